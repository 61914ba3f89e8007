#include "rtlevo/error.hpp"
#include "rtlevo/evaluators.hpp"
#include "rtlevo/process.hpp"

#include <algorithm>
#include <regex>

namespace rtlevo {

namespace {

constexpr std::size_t kLogCap = 4000;

struct Simulator {
    std::string kind;
    fs::path compiler;
    fs::path runner;
};

std::optional<Simulator> resolve_simulator(const EvaluatorConfig& c)
{
    if (c.simulator == "auto" || c.simulator == "iverilog") {
        auto iv = find_executable(c.iverilog);
        auto vvp = find_executable(c.vvp);
        if (!iv.empty() && !vvp.empty())
            return Simulator{"iverilog", iv, vvp};
        if (c.simulator == "iverilog")
            return std::nullopt;
    }
    for (auto& name : c.verilator) {
        auto v = find_executable(name);
        if (!v.empty())
            return Simulator{"verilator", v, {}};
    }
    return std::nullopt;
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
}

std::string first_module_name(const std::string& text)
{
    static const std::regex re(R"(\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*))");
    std::smatch m;
    if (std::regex_search(text, m, re))
        return m[1].str();
    return {};
}

bool declares_module(const std::string& text, const std::string& name)
{
    std::string escaped;
    for (char ch : name)
        escaped += ch == '$' ? std::string("\\$") : std::string(1, ch);
    std::regex re("\\bmodule\\s+" + escaped + "\\b");
    return std::regex_search(text, re);
}

std::string scrub_paths(std::string log, const fs::path& scratch)
{
    std::string prefix = scratch.string() + "/";
    for (auto pos = log.find(prefix); pos != std::string::npos; pos = log.find(prefix, pos))
        log.erase(pos, prefix.size());
    return log;
}

EvaluatorResult finish(const std::string& name, Outcome outcome, const std::string& summary, const std::string& log,
                       const std::string& rtl, const TaskSpec* task, std::map<std::string, double> metrics = {})
{
    std::string feedback = summary;
    std::string body = trim(log);
    if (!body.empty())
        feedback += "\n" + truncate_with_marker(body, kLogCap);
    for (auto& h : repair_hints(outcome, summary + "\n" + log, rtl, task))
        feedback += "\n" + h;
    return make_result(name, outcome, feedback, std::move(metrics));
}

} // namespace

std::string simulator_kind(const EvaluatorConfig& config)
{
    auto sim = resolve_simulator(config);
    return sim ? sim->kind : std::string();
}

std::vector<std::string> repair_hints(Outcome outcome, std::string_view log_view, std::string_view rtl_view,
                                      const TaskSpec* task)
{
    std::vector<std::string> hints;
    if (outcome == Outcome::passed || outcome == Outcome::tool_unavailable)
        return hints;
    std::string log = lower(std::string(log_view));
    std::string rtl = lower(std::string(rtl_view));
    std::string header = task ? lower(task->module_header) : std::string();
    auto has = [](const std::string& hay, const char* needle) { return hay.find(needle) != std::string::npos; };

    if (has(log, "syntax error"))
        hints.push_back("[hint:syntax] fix the syntax error at the cited line; keep the given module header verbatim");
    static const std::regex module_re(R"(unknown module|cannot find file containing module|no module declaration|not declared in candidate)");
    if (std::regex_search(log, module_re))
        hints.push_back("[hint:module_name] declare the module with exactly the name and ports of the header");
    if (has(log, "unsupported") || has(log, "not supported"))
        hints.push_back("[hint:simplify_construct] replace the unsupported construct with plain synthesizable Verilog");
    if (outcome == Outcome::timeout)
        hints.push_back("[hint:termination] look for combinational loops or zero-delay feedback that keeps the "
                        "simulation from finishing");

    if (outcome == Outcome::mismatch || outcome == Outcome::compile_error) {
        bool header_signed = has(header, "signed");
        if (has(log, "signed") || (header_signed && outcome == Outcome::mismatch && !has(rtl, "signed")))
            hints.push_back("[hint:signedness] declare signed operands (or use $signed) so products and sums "
                            "sign-extend");
        static const std::regex width_re(R"(width|truncat|\bbits\b|expects \d+ bits)");
        if (std::regex_search(log, width_re))
            hints.push_back("[hint:bit_width] check declared widths and implicit truncation or extension of "
                            "intermediate results");
    }
    if (outcome == Outcome::mismatch) {
        static const std::regex rst_re(R"(\b(rst|reset|rst_n)\b)");
        std::smatch m;
        if (std::regex_search(header, m, rst_re) && !has(rtl, m[1].str().c_str()))
            hints.push_back("[hint:reset] drive the documented reset behaviour on " + m[1].str());
        if (hints.empty())
            hints.push_back("[hint:logic] compare the listed failing cases against the description");
    }
    if (outcome == Outcome::unknown_failure && hints.empty())
        hints.push_back("[hint:testbench_output] the testbench did not report a result; make sure the design "
                        "elaborates and does not stop the simulation");
    return hints;
}

EvaluatorResult evaluate_functional(const std::string& rtl_text, const fs::path& testbench,
                                    const std::vector<fs::path>& extra_sources, const TaskSpec* task,
                                    const EvaluatorConfig& config, const fs::path& scratch,
                                    const std::string& name)
{
    if (testbench.empty() || !fs::exists(testbench))
        throw ConfigError("testbench not found: " + testbench.string());
    for (auto& src : extra_sources)
        if (!fs::exists(src))
            throw ConfigError("extra source not found: " + src.string());

    if (first_module_name(rtl_text).empty())
        return finish(name, Outcome::compile_error, "compile_error: no module declaration in candidate source", "",
                      rtl_text, task);
    if (task) {
        auto want = task->module_name();
        if (!want.empty() && !declares_module(rtl_text, want))
            return finish(name, Outcome::compile_error,
                          "compile_error: module '" + want + "' not declared in candidate source", "", rtl_text,
                          task);
    }

    auto sim = resolve_simulator(config);
    if (!sim)
        return make_result(name, Outcome::tool_unavailable,
                           "no simulator found (tried iverilog/vvp and verilator; simulator=" + config.simulator + ")");

    fs::create_directories(scratch);
    write_file(scratch / "candidate.v", rtl_text);
    std::vector<std::string> sources{fs::absolute(testbench).string(), "candidate.v"};
    for (auto& s : extra_sources)
        sources.push_back(fs::absolute(s).string());

    ProcessOptions copts;
    copts.cwd = scratch;
    copts.timeout = std::chrono::milliseconds(config.compile_timeout_ms);
    copts.stdout_file = scratch / "compile.out";
    copts.stderr_file = scratch / "compile.err";

    std::vector<std::string> compile;
    std::vector<std::string> run;
    if (sim->kind == "iverilog") {
        compile = {sim->compiler.string(), "-g2012", "-o", "sim.vvp"};
        compile.insert(compile.end(), sources.begin(), sources.end());
        run = {sim->runner.string(), "-n", "sim.vvp"};
    } else {
        std::string top = first_module_name(read_file(testbench));
        if (top.empty())
            throw ConfigError("testbench declares no module: " + testbench.string());
        std::error_code ec;
        fs::remove_all(scratch / "obj", ec);
        compile = {sim->compiler.string(), "--binary", "--timing", "-Wno-fatal", "-Wno-lint", "-Wno-style",
                   "--top-module", top, "-Mdir", "obj", "-CFLAGS", "-O0", "-MAKEFLAGS",
                   "PYTHON3=python3 OPT_FAST=-O0 OPT_SLOW=-O0 OPT_GLOBAL=-O0"};
        compile.insert(compile.end(), sources.begin(), sources.end());
        run = {(scratch / "obj" / ("V" + top)).string()};
    }

    auto c = run_process(compile, copts);
    std::string clog = scrub_paths(c.out + c.err, scratch);
    if (c.launch_failed)
        return make_result(name, Outcome::tool_unavailable, "failed to launch " + compile.front());
    if (c.timed_out)
        return finish(name, Outcome::timeout, "timeout: compilation exceeded " +
                                                  std::to_string(config.compile_timeout_ms) + " ms",
                      clog, rtl_text, task);
    if (c.exit_code != 0) {
        Outcome o = lower(clog).find("syntax error") != std::string::npos ? Outcome::syntax_error
                                                                          : Outcome::compile_error;
        return finish(name, o, to_string(o) + ": " + sim->kind + " exited with " + std::to_string(c.exit_code), clog,
                      rtl_text, task);
    }

    ProcessOptions ropts;
    ropts.cwd = scratch;
    ropts.timeout = std::chrono::milliseconds(config.timeout_for(name));
    ropts.stdout_file = scratch / "sim.out";
    ropts.stderr_file = scratch / "sim.err";
    auto r = run_process(run, ropts);
    std::string slog = scrub_paths(r.out + r.err, scratch);
    if (r.launch_failed)
        return make_result(name, Outcome::unknown_failure, "failed to launch simulation model " + run.front());
    if (r.timed_out)
        return finish(name, Outcome::timeout,
                      "timeout: simulation killed after " + std::to_string(config.timeout_for(name)) + " ms", slog,
                      rtl_text, task);

    static const std::regex summary_re(R"(Mismatches:\s*(\d+)\s+in\s+(\d+)\s+samples)");
    std::smatch m;
    std::string last_summary;
    long long mism = -1;
    long long total = -1;
    for (auto it = std::sregex_iterator(slog.begin(), slog.end(), summary_re); it != std::sregex_iterator(); ++it) {
        mism = std::stoll((*it)[1].str());
        total = std::stoll((*it)[2].str());
    }
    if (mism < 0) {
        if (slog.find("TIMEOUT") != std::string::npos)
            return finish(name, Outcome::timeout, "timeout: testbench watchdog fired", slog, rtl_text, task);
        return finish(name, Outcome::unknown_failure, "unknown_failure: no mismatch summary in simulator output", slog,
                      rtl_text, task);
    }
    if (total <= 0)
        return finish(name, Outcome::unknown_failure, "unknown_failure: testbench reported zero samples", slog,
                      rtl_text, task);
    if (mism == 0)
        return make_result(name, Outcome::passed, {},
                           {{"mismatch_count", 0.0}, {"total_samples", static_cast<double>(total)}});
    mism = std::min(mism, total);
    return finish(name, Outcome::mismatch,
                  "mismatch: " + std::to_string(mism) + " of " + std::to_string(total) + " samples differ", slog,
                  rtl_text, task,
                  {{"mismatch_count", static_cast<double>(mism)}, {"total_samples", static_cast<double>(total)}});
}

EvaluatorResult evaluate_heldout(const std::string& rtl_text, const TaskSpec& task, std::uint64_t seed,
                                 int case_count, const EvaluatorConfig& config, const fs::path& scratch)
{
    if (!task.heldout_profile)
        throw ConfigError("task " + task.task_id + " has no held-out profile");
    const auto& profile = gemm_profile(*task.heldout_profile);
    auto cases = generate_cases(profile, seed, case_count);
    fs::create_directories(scratch);
    auto tb = scratch / "tb_heldout.v";
    write_file(tb, emit_testbench(profile, cases));
    auto r = evaluate_functional(rtl_text, tb, {}, &task, config, scratch, kHeldout);
    r.feedback = "held-out " + profile.id + " (" + std::to_string(case_count) + " cases, seed " +
                 std::to_string(seed) + ")" + (r.feedback.empty() ? "" : "\n" + r.feedback);
    return r;
}

} // namespace rtlevo
