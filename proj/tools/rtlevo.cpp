#include "rtlevo/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace rtlevo;

int main(int argc, char** argv)
{
    CLI::App app{"Feedback-driven RTL generation search"};
    app.require_subcommand(1);

    GlobalOptions g;
    std::string config;
    std::uint64_t seed = 0;
    app.add_option("--config", config, "Run manifest (JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "Override the search RNG seed");
    app.add_option("--jobs", g.jobs, "Tasks run in parallel")->check(CLI::PositiveNumber);
    app.add_flag("--dry-run", g.dry_run, "Print the plan without touching disk");

    auto* run = app.add_subcommand("run", "Run the search for every task in the manifest");

    EvolveOptions ev;
    auto* evolve = app.add_subcommand("evolve", "Ingest runs and propose skill updates");
    evolve->add_option("--store", ev.store, "Evolver store directory")->required();
    evolve->add_option("--runs", ev.runs, "Run directories")->required();
    evolve->add_option("--mode", ev.mode, "immediate or validated")->check(CLI::IsMember({"immediate", "validated"}));
    evolve->add_option("--skills-dir", ev.skills_dir, "Skill library")->required();
    evolve->add_option("--queue-dir", ev.queue_dir, "Validation queue");
    evolve->add_option("--script-dir", ev.script_dir, "Scripted provider responses");
    evolve->add_option("--tau-pass", ev.tau_pass)->check(CLI::PositiveNumber);
    evolve->add_option("--tau-promote", ev.tau_promote)->check(CLI::PositiveNumber);

    WorkerCommandOptions wk;
    auto* worker = app.add_subcommand("worker", "Replay validation jobs");
    worker->add_option("--queue-dir", wk.queue_dir)->required();
    worker->add_option("--worker-id", wk.worker_id)->required();
    worker->add_option("--max-jobs", wk.max_jobs)->check(CLI::PositiveNumber);
    worker->add_option("--script-dir", wk.script_dir, "Scripted provider responses");
    worker->add_option("--templates-dir", wk.templates_dir, "Prompt template overrides");

    fs::path pub_queue, pub_skills;
    auto* publish = app.add_subcommand("publish", "Apply validation thresholds to pending jobs");
    publish->add_option("--queue-dir", pub_queue)->required();
    publish->add_option("--skills-dir", pub_skills)->required();

    std::vector<fs::path> report_roots;
    std::string report_out;
    bool table = false;
    auto* report = app.add_subcommand("report", "Aggregate metrics over run directories");
    report->add_option("runs", report_roots, "Run directories");
    report->add_option("-o,--output", report_out, "Write the JSON document here");
    report->add_flag("--table", table, "Print a table");

    fs::path skills_dir;
    auto* init = app.add_subcommand("init-skills", "Write the shipped skills and templates");
    init->add_option("dir", skills_dir)->required();

    fs::path tasks_dir;
    auto* emit = app.add_subcommand("emit-gemm-tasks", "Write the GEMM task documents and reference RTL");
    emit->add_option("dir", tasks_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }
    if (!config.empty())
        g.config = config;
    if (seed_opt->count())
        g.seed = seed;

    try {
        if (run->parsed())
            return cmd_run(g, std::cout, std::cerr).exit_code;
        if (evolve->parsed())
            return cmd_evolve(g, ev, std::cout, std::cerr);
        if (worker->parsed())
            return cmd_worker(g, wk, std::cout, std::cerr);
        if (publish->parsed())
            return cmd_publish(g, pub_queue, pub_skills, std::cout, std::cerr);
        if (report->parsed())
            return cmd_report(report_roots, report_out.empty() ? std::nullopt : std::optional<fs::path>(report_out),
                              table, std::cout, std::cerr);
        if (init->parsed())
            return cmd_init_skills(skills_dir, std::cout, std::cerr);
        if (emit->parsed())
            return cmd_emit_gemm_tasks(tasks_dir, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
