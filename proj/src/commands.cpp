#include "rtlevo/commands.hpp"

#include "rtlevo/error.hpp"
#include "rtlevo/evolver.hpp"
#include "rtlevo/gemm.hpp"
#include "rtlevo/report.hpp"
#include "rtlevo/validation.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <ostream>
#include <set>

namespace rtlevo {

namespace {

fs::path resolve(const fs::path& base, const fs::path& p)
{
    if (p.empty() || p.is_absolute())
        return p;
    return (base / p).lexically_normal();
}

std::string fmt(const std::optional<double>& v)
{
    if (!v)
        return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

std::unique_ptr<Provider> provider_for(const GlobalOptions& g, const fs::path& script_dir)
{
    if (!script_dir.empty())
        return std::make_unique<ScriptedProvider>(script_dir);
    if (!g.config)
        throw ConfigError("a provider is needed: pass --script-dir or --config");
    return make_provider(load_manifest(*g.config).provider);
}

} // namespace

RunManifest parse_manifest(const json& j, const fs::path& base)
{
    RunManifest m;
    try {
        if (!j.is_object())
            throw ConfigError("manifest must be an object");
        m.run_id = j.value("run_id", std::string("run"));
        if (m.run_id.empty() || m.run_id.find('/') != std::string::npos || m.run_id.front() == '.')
            throw ConfigError("run_id '" + m.run_id + "' is not a valid directory name");
        m.runs_dir = resolve(base, j.value("runs_dir", std::string("runs")));
        if (!j.contains("tasks") || !j.at("tasks").is_array() || j.at("tasks").empty())
            throw ConfigError("manifest needs a non-empty tasks list");
        for (auto& t : j.at("tasks"))
            m.tasks.push_back(resolve(base, t.get<std::string>()));
        if (j.contains("search"))
            m.search = j.at("search").get<SearchConfig>();
        m.score_mode = j.value("score_mode", m.score_mode);
        ScoreMode mode;
        try {
            mode = score_mode_from_string(m.score_mode);
        } catch (const std::exception&) {
            throw ConfigError("unknown score mode '" + m.score_mode + "'");
        }
        m.score = preset(mode);
        if (j.contains("score")) {
            json s = j.at("score");
            s["mode"] = m.score_mode;
            m.score = s.get<ScoreConfig>();
        }
        validate_score_config(m.score);
        if (j.contains("evaluator"))
            m.evaluator = j.at("evaluator").get<EvaluatorConfig>();
        fs::path eda = m.evaluator.eda_report_path;
        m.evaluator.eda_report_path = resolve(base, eda).string();
        if (j.contains("provider"))
            m.provider = j.at("provider").get<ProviderConfig>();
        m.provider.script_dir = resolve(base, m.provider.script_dir);
        validate_provider_config(m.provider);
        m.skills_dir = resolve(base, j.value("skills_dir", std::string()));
        m.templates_dir = resolve(base, j.value("templates_dir", std::string()));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    return m;
}

RunManifest load_manifest(const fs::path& path)
{
    if (!fs::exists(path))
        throw ConfigError("manifest not found: " + path.string());
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_manifest(j, fs::absolute(path).parent_path());
}

std::vector<TaskSpec> check_manifest(const RunManifest& m)
{
    validate_search_config(m.search);
    validate_evaluator_config(m.evaluator);
    std::vector<TaskSpec> tasks;
    std::set<std::string> ids;
    for (auto& p : m.tasks) {
        if (!fs::exists(p))
            throw ConfigError("task document not found: " + p.string());
        TaskSpec t = load_task_spec(p);
        validate_task_spec(t);
        if (!ids.insert(t.task_id).second)
            throw ConfigError("duplicate task_id '" + t.task_id + "' in manifest");
        tasks.push_back(std::move(t));
    }
    const auto& en = m.evaluator.enabled;
    auto enabled = [&](const std::string& e) { return std::find(en.begin(), en.end(), e) != en.end(); };
    for (auto& req : m.score.required)
        if (!enabled(req))
            throw ConfigError("required evaluator '" + req + "' is not enabled");
    if (m.score.mode == ScoreMode::eda && !enabled(kEda))
        throw ConfigError("eda score mode needs the eda evaluator enabled");
    if (!m.skills_dir.empty() && !fs::is_directory(m.skills_dir))
        throw ConfigError("skills_dir not found: " + m.skills_dir.string());
    if (m.provider.kind == "scripted" && !fs::is_directory(m.provider.script_dir))
        throw ConfigError("provider script_dir not found: " + m.provider.script_dir.string());
    if (m.evaluator.backend == "tools") {
        bool gate_heldout = m.search.promotion_gate && *m.search.promotion_gate == kHeldout;
        for (auto& t : tasks) {
            if (enabled(kFunctional) && !fs::exists(t.visible_testbench))
                throw ConfigError("testbench not found: " + t.visible_testbench.string());
            if ((gate_heldout || enabled(kHeldout)) && !t.heldout_profile)
                throw ConfigError("held-out evaluation needs a heldout_profile on task " + t.task_id);
            if (t.heldout_profile)
                gemm_profile(*t.heldout_profile);
        }
        bool needs_sim = m.score.required.count(kFunctional) || m.score.required.count(kHeldout) || gate_heldout;
        if (needs_sim && simulator_kind(m.evaluator).empty())
            throw ToolMissingError("no simulator found (iverilog+vvp or verilator) but functional checks are required");
        bool needs_yosys = false;
        for (auto* e : {kSynthesis, kTiming, kDownstream})
            needs_yosys = needs_yosys || m.score.required.count(e) || m.score.hard_gates.count(e);
        if (needs_yosys && resolve_yosys(m.evaluator).empty())
            throw ToolMissingError("yosys not found but a required evaluator needs it");
    }
    return tasks;
}

RunCommandResult cmd_run(const GlobalOptions& g, std::ostream& out, std::ostream& err)
{
    RunCommandResult res;
    RunManifest m;
    std::vector<TaskSpec> tasks;
    try {
        if (!g.config)
            throw ConfigError("run needs --config <manifest>");
        m = load_manifest(*g.config);
        if (g.seed)
            m.search.rng_seed = *g.seed;
        if (g.jobs < 1)
            throw ConfigError("--jobs must be >= 1");
        tasks = check_manifest(m);
    } catch (const ToolMissingError& e) {
        err << "error: " << e.what() << "\n";
        res.exit_code = kExitToolMissing;
        return res;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        res.exit_code = kExitConfig;
        return res;
    }

    if (g.dry_run) {
        out << "run " << m.run_id << " -> " << (m.runs_dir / m.run_id).string() << "\n";
        out << "rounds " << m.search.rounds << ", minors " << m.search.minors << ", score mode " << m.score_mode
            << ", early stop " << (m.search.early_stop_for(m.score.mode) ? "on" : "off") << ", gate "
            << m.search.promotion_gate.value_or("none") << "\n";
        out << "evaluators:";
        for (auto& e : m.evaluator.enabled)
            out << " " << e;
        out << " (" << m.evaluator.backend << ")\n";
        for (auto& t : tasks)
            out << "task " << t.task_id << "\n";
        return res;
    }

    fs::path run_dir = m.runs_dir / m.run_id;
    for (int n = 2; fs::exists(run_dir); ++n)
        run_dir = m.runs_dir / (m.run_id + "-" + std::to_string(n));
    std::string run_id = run_dir.filename().string();
    res.run_dir = run_dir;

    std::unique_ptr<Provider> provider;
    std::optional<SkillLibrary> lib;
    PromptTemplates templates;
    try {
        provider = make_provider(m.provider);
        if (!m.skills_dir.empty())
            lib = load_library(m.skills_dir);
        fs::path tdir = !m.templates_dir.empty() ? m.templates_dir
                        : !m.skills_dir.empty()  ? m.skills_dir / "templates"
                                                 : fs::path();
        if (!tdir.empty() && fs::is_directory(tdir))
            templates = PromptTemplates::load(tdir);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        res.exit_code = kExitConfig;
        return res;
    }
    if (lib)
        for (auto& d : lib->diagnostics)
            err << "warning: " << d << "\n";

    EvaluatorSet evaluators = make_evaluators(m.evaluator);
    auto run_one = [&](const TaskSpec& task) {
        SearchEnv env;
        env.task = &task;
        env.search = m.search;
        env.score = m.score;
        env.evaluator = m.evaluator;
        env.provider = provider.get();
        env.skills = lib ? &*lib : nullptr;
        env.templates = templates;
        env.evaluators = evaluators;
        env.task_dir = run_dir / task.task_id;
        return run_task(env, run_id).summary;
    };

    std::vector<std::optional<RunSummary>> done(tasks.size());
    bool failed = false;
    for (std::size_t i = 0; i < tasks.size(); i += static_cast<std::size_t>(g.jobs)) {
        std::vector<std::pair<std::size_t, std::future<RunSummary>>> batch;
        for (std::size_t k = i; k < tasks.size() && k < i + static_cast<std::size_t>(g.jobs); ++k)
            batch.emplace_back(k, std::async(g.jobs > 1 ? std::launch::async : std::launch::deferred, run_one,
                                             std::cref(tasks[k])));
        for (auto& [k, f] : batch) {
            try {
                done[k] = f.get();
            } catch (const std::exception& e) {
                err << "error: task " << tasks[k].task_id << ": " << e.what() << "\n";
                failed = true;
            }
        }
    }

    char line[256];
    std::snprintf(line, sizeof line, "%-28s %7s %10s %9s %8s %8s\n", "task", "success", "final", "promotion",
                  "compile", "promoted");
    out << line;
    for (auto& s : done) {
        if (!s)
            continue;
        std::snprintf(line, sizeof line, "%-28s %7s %10s %9s %8s %8d\n", s->task_id.c_str(),
                      s->final_success ? "yes" : "no", fmt(s->final_score).c_str(), fmt(s->promotion_pass).c_str(),
                      fmt(s->compile_pass).c_str(), s->promoted_major_count);
        out << line;
        res.summaries.push_back(*s);
    }
    out << "run directory: " << run_dir.string() << "\n";
    res.exit_code = failed ? kExitFailure : kExitOk;
    return res;
}

int cmd_evolve(const GlobalOptions& g, const EvolveOptions& o, std::ostream& out, std::ostream& err)
{
    try {
        PublicationMode mode = publication_mode_from_string(o.mode);
        if (o.store.empty() || o.skills_dir.empty())
            throw ConfigError("evolve needs --store and --skills-dir");
        if (mode == PublicationMode::validated && o.queue_dir.empty())
            throw ConfigError("validated mode needs --queue-dir");
        for (auto& r : o.runs)
            if (!fs::exists(r))
                throw ConfigError("run directory not found: " + r.string());
        auto provider = provider_for(g, o.script_dir);
        SkillLibrary lib = load_library(o.skills_dir);
        if (g.dry_run) {
            EvolverStore store(o.store);
            auto sessions = store.sessions();
            out << "store " << o.store.string() << ": " << sessions.size() << " sessions, "
                << aggregate(sessions, &lib).size() << " groups before ingest\n";
            return kExitOk;
        }
        EvolverStore store(o.store);
        EvolveReport rep = evolve(o.runs, store, lib, *provider, mode, o.queue_dir, {o.tau_pass, o.tau_promote});
        for (auto& d : rep.ingest.diagnostics)
            err << "warning: " << d << "\n";
        out << "ingested " << rep.ingest.new_sessions << " new sessions\n";
        if (rep.decisions.empty()) {
            out << "no groups\n";
            return kExitOk;
        }
        char line[320];
        std::snprintf(line, sizeof line, "%-32s %6s %7s %8s %6s %-14s %-10s %s\n", "group", "n_pass", "n_prom",
                      "delta", "risk", "decision", "action", "reason");
        out << line;
        for (std::size_t i = 0; i < rep.decisions.size(); ++i) {
            auto& d = rep.decisions[i];
            std::snprintf(line, sizeof line, "%-32s %6d %7d %8.3f %6s %-14s %-10s %s\n", d.group.skill_id.c_str(),
                          d.group.n_pass, d.group.n_promote, d.group.mean_delta,
                          to_string(d.group.equivalence_risk).c_str(), to_string(d.kind).c_str(),
                          rep.routes[i].action.c_str(), d.rationale.c_str());
            out << line;
        }
        out << "published " << rep.published << ", queued " << rep.queued << "\n";
        return kExitOk;
    } catch (const LockError& e) {
        err << "error: " << e.what() << "\n";
        return kExitLock;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_worker(const GlobalOptions& g, const WorkerCommandOptions& o, std::ostream& out, std::ostream& err)
{
    try {
        if (o.queue_dir.empty() || o.worker_id.empty())
            throw ConfigError("worker needs --queue-dir and --worker-id");
        if (o.max_jobs < 1)
            throw ConfigError("--max-jobs must be >= 1");
        WorkerOptions wo;
        wo.worker_id = o.worker_id;
        wo.max_jobs = o.max_jobs;
        if (g.config)
            wo.fallback_evaluator = load_manifest(*g.config).evaluator;
        if (!o.templates_dir.empty())
            wo.templates = PromptTemplates::load(o.templates_dir);
        if (g.dry_run) {
            out << list_jobs(o.queue_dir).size() << " jobs in queue\n";
            return kExitOk;
        }
        if (list_jobs(o.queue_dir).empty()) {
            out << "no jobs\n";
            return kExitOk;
        }
        auto provider = provider_for(g, o.script_dir);
        auto reports = worker_process(o.queue_dir, *provider, wo);
        if (reports.empty()) {
            out << "no jobs\n";
            return kExitOk;
        }
        for (auto& r : reports) {
            char line[256];
            std::snprintf(line, sizeof line, "%-40s %-8s cand %.3f base %.3f cases %d\n", r.job_id.c_str(),
                          r.result.approved ? "approve" : "reject", r.result.candidate_quality,
                          r.result.baseline_quality, r.result.cases_replayed);
            out << line;
            for (auto& n : r.result.notes)
                err << "note: " << r.job_id << ": " << n << "\n";
        }
        out << "processed " << reports.size() << " jobs\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_publish(const GlobalOptions& g, const fs::path& queue_dir, const fs::path& skills_dir, std::ostream& out,
                std::ostream& err)
{
    try {
        if (queue_dir.empty() || skills_dir.empty())
            throw ConfigError("publish needs --queue-dir and --skills-dir");
        SkillLibrary lib = load_library(skills_dir);
        std::vector<PublishReport> reports;
        if (g.dry_run) {
            for (auto& id : list_jobs(queue_dir)) {
                auto job = load_job(queue_dir, id);
                auto v = job.status == JobStatus::pending ? publish_decision(job.results, job.thresholds)
                                                          : PublishVerdict{job.status, job.status_reason};
                reports.push_back({id, job.skill_id, v.status, static_cast<int>(job.results.size()), 0, 0.0,
                                   v.reason, false});
            }
        } else {
            reports = publish(queue_dir, lib);
        }
        if (reports.empty()) {
            out << "no jobs\n";
            return kExitOk;
        }
        char line[320];
        std::snprintf(line, sizeof line, "%-40s %-10s %7s %9s %7s %s\n", "job", "status", "results", "approvals",
                      "quality", "reason");
        out << line;
        for (auto& r : reports) {
            std::snprintf(line, sizeof line, "%-40s %-10s %7d %9d %7.3f %s\n", r.job_id.c_str(),
                          to_string(r.status).c_str(), r.results, r.approvals, r.mean_quality, r.reason.c_str());
            out << line;
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_report(const std::vector<fs::path>& roots, const std::optional<fs::path>& output, bool table,
               std::ostream& out, std::ostream& err)
{
    std::vector<std::string> warnings;
    json doc = build_report(roots, &warnings);
    for (auto& w : warnings)
        err << "warning: " << w << "\n";
    std::string text = dump_text(doc, 2) + "\n";
    if (output)
        write_file_atomic(*output, text);
    else if (!table)
        out << text;
    if (table)
        out << render_report_table(doc);
    return kExitOk;
}

int cmd_init_skills(const fs::path& dir, std::ostream& out, std::ostream& err)
{
    try {
        int n = init_skill_library(dir);
        out << "wrote " << n << " skills to " << dir.string() << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_emit_gemm_tasks(const fs::path& out_dir, std::ostream& out, std::ostream& err)
{
    try {
        for (auto& id : gemm_profile_ids()) {
            const GemmProfile& p = gemm_profile(id);
            TaskSpec t = emit_task_spec(p, out_dir);
            write_file(out_dir / id / "golden.v", golden_rtl(p));
            write_file(out_dir / id / "overfit.v", overfit_rtl(p, visible_cases(p)));
            out << t.task_id << " -> " << (out_dir / id).string() << "\n";
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace rtlevo
