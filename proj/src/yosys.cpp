#include "rtlevo/error.hpp"
#include "rtlevo/evaluators.hpp"
#include "rtlevo/process.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

namespace rtlevo {

namespace {

std::string top_of(const std::string& rtl_text, const TaskSpec* task)
{
    if (task && !task->module_name().empty())
        return task->module_name();
    return module_name_of(rtl_text);
}

std::string error_lines(const std::string& log)
{
    std::string out;
    std::istringstream in(log);
    std::string line;
    while (std::getline(in, line))
        if (line.find("ERROR") != std::string::npos || line.find("Warning") != std::string::npos)
            out += line + "\n";
    return out.empty() ? log : out;
}

std::string tail(const std::string& s, std::size_t n) { return s.size() <= n ? s : "..." + s.substr(s.size() - n); }

struct YosysRun {
    ProcessResult proc;
    std::string log;
};

YosysRun run_yosys(const fs::path& yosys, const fs::path& scratch, const std::string& script_name,
                   const std::string& script, std::int64_t timeout_ms)
{
    fs::create_directories(scratch);
    write_file(scratch / script_name, script);
    ProcessOptions o;
    o.cwd = scratch;
    o.timeout = std::chrono::milliseconds(timeout_ms);
    std::string stem = fs::path(script_name).stem().string();
    o.stdout_file = scratch / (stem + ".log");
    o.stderr_file = scratch / (stem + ".err");
    YosysRun r;
    r.proc = run_process({yosys.string(), "-s", script_name}, o);
    r.log = r.proc.out + r.proc.err;
    return r;
}

} // namespace

fs::path resolve_yosys(const EvaluatorConfig& config)
{
    for (auto& name : config.yosys) {
        auto p = find_executable(name);
        if (!p.empty())
            return p;
    }
    return {};
}

std::map<std::string, double> parse_yosys_stat(const json& stat)
{
    const json* section = nullptr;
    if (stat.contains("design"))
        section = &stat.at("design");
    else if (stat.contains("modules") && stat.at("modules").size() == 1)
        section = &stat.at("modules").begin().value();
    if (!section)
        throw ParseError("stat document has no design section");
    std::map<std::string, double> m;
    m["cell_count"] = section->value("num_cells", 0.0);
    m["wire_count"] = section->value("num_wires", 0.0);
    m["wire_bits"] = section->value("num_wire_bits", 0.0);
    if (auto it = section->find("num_cells_by_type"); it != section->end())
        for (auto& [type, n] : it->items())
            m["cell_type:" + type] = n.get<double>();
    return m;
}

EvaluatorResult evaluate_synthesis(const std::string& rtl_text, const TaskSpec* task, const EvaluatorConfig& config,
                                   const fs::path& scratch)
{
    auto yosys = resolve_yosys(config);
    if (yosys.empty())
        return make_result(kSynthesis, Outcome::tool_unavailable, "yosys not found");
    std::string top = top_of(rtl_text, task);
    fs::create_directories(scratch);
    write_file(scratch / "candidate.v", rtl_text);
    std::string script = "read_verilog -sv candidate.v\n"
                         "hierarchy -check " + (top.empty() ? std::string("-auto-top") : "-top " + top) + "\n"
                         "proc\n"
                         "flatten\n"
                         "opt\n"
                         "wreduce\n"
                         "opt_clean\n"
                         "tee -q -o stat.json stat -json\n"
                         "write_json netlist.json\n";
    auto run = run_yosys(yosys, scratch, "synth.ys", script, config.timeout_for(kSynthesis));
    if (run.proc.launch_failed)
        return make_result(kSynthesis, Outcome::tool_unavailable, "failed to launch " + yosys.string());
    if (run.proc.timed_out)
        return make_result(kSynthesis, Outcome::timeout, "timeout: yosys exceeded " +
                                                             std::to_string(config.timeout_for(kSynthesis)) + " ms");
    if (run.proc.exit_code != 0)
        return make_result(kSynthesis, Outcome::compile_error,
                           "compile_error: yosys exited with " + std::to_string(run.proc.exit_code) + "\n" +
                               truncate_with_marker(trim(error_lines(run.log)), 4000));
    std::map<std::string, double> metrics;
    try {
        metrics = parse_yosys_stat(json::parse(read_file(scratch / "stat.json")));
    } catch (const std::exception& e) {
        return make_result(kSynthesis, Outcome::unknown_failure,
                           std::string("unknown_failure: unreadable stat output: ") + e.what());
    }
    if (!fs::exists(scratch / "netlist.json"))
        return make_result(kSynthesis, Outcome::unknown_failure, "unknown_failure: netlist.json was not written");
    return make_result(kSynthesis, Outcome::passed, {}, metrics);
}

AbcStats parse_abc_log(std::string_view log)
{
    static const std::regex delay_re(R"(\bdelay\s*=\s*([0-9]+(?:\.[0-9]+)?))");
    static const std::regex lev_re(R"(\blev\s*=\s*([0-9]+))");
    AbcStats stats;
    std::string text(log);
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        bool stat_line = false;
        std::optional<double> delay;
        std::optional<int> lev;
        if (std::regex_search(line, m, delay_re)) {
            delay = std::stod(m[1].str());
            stat_line = true;
        }
        if (std::regex_search(line, m, lev_re)) {
            lev = std::stoi(m[1].str());
            stat_line = true;
        }
        if (stat_line) {
            stats.delay = delay;
            stats.levels = lev;
        }
    }
    return stats;
}

EvaluatorResult evaluate_timing(const std::string& rtl_text, const TaskSpec* task, const EvaluatorConfig& config,
                                const fs::path& scratch)
{
    auto yosys = resolve_yosys(config);
    if (yosys.empty())
        return make_result(kTiming, Outcome::tool_unavailable, "yosys not found");
    std::string top = top_of(rtl_text, task);
    std::string top_arg = top.empty() ? std::string("-auto-top") : "-top " + top;
    fs::create_directories(scratch);
    write_file(scratch / "candidate.v", rtl_text);
    std::string script = "read_verilog -sv candidate.v\n"
                         "hierarchy -check " + top_arg + "\n"
                         "synth -flatten -noabc " + (top.empty() ? std::string() : "-top " + top) + "\n"
                         "abc -g AND,NAND,OR,NOR,XOR,XNOR,ANDNOT,ORNOT,MUX -script \"+strash;dc2;map;topo;print_stats\"\n"
                         "opt_clean\n"
                         "tee -q -o timing_stat.json stat -json\n";
    auto run = run_yosys(yosys, scratch, "timing.ys", script, config.timeout_for(kTiming));
    if (run.proc.launch_failed)
        return make_result(kTiming, Outcome::tool_unavailable, "failed to launch " + yosys.string());
    if (run.proc.timed_out)
        return make_result(kTiming, Outcome::timeout,
                           "timeout: yosys/abc exceeded " + std::to_string(config.timeout_for(kTiming)) + " ms");
    if (run.proc.exit_code != 0)
        return make_result(kTiming, Outcome::compile_error,
                           "compile_error: yosys exited with " + std::to_string(run.proc.exit_code) + "\n" +
                               truncate_with_marker(trim(error_lines(run.log)), 4000));

    auto abc = parse_abc_log(run.log);
    if ((!abc.delay && !abc.levels) || !fs::exists(scratch / "timing_stat.json"))
        return make_result(kTiming, Outcome::unknown_failure,
                           "unknown_failure: ABC mapping report missing\n" + tail(trim(run.log), 1500));

    std::map<std::string, double> metrics;
    try {
        auto stat = parse_yosys_stat(json::parse(read_file(scratch / "timing_stat.json")));
        double dff = 0.0;
        double logic = 0.0;
        for (auto& [k, v] : stat) {
            if (k.rfind("cell_type:", 0) != 0)
                continue;
            std::string type = k.substr(10);
            std::transform(type.begin(), type.end(), type.begin(), [](unsigned char c) { return std::tolower(c); });
            (type.find("dff") != std::string::npos ? dff : logic) += v;
        }
        metrics["abc_logic_cells"] = logic;
        metrics["abc_dff_count"] = dff;
    } catch (const std::exception& e) {
        return make_result(kTiming, Outcome::unknown_failure,
                           std::string("unknown_failure: unreadable stat output: ") + e.what());
    }
    metrics["abc_delay_proxy"] = abc.delay ? *abc.delay : static_cast<double>(*abc.levels);
    if (abc.levels)
        metrics["abc_levels"] = *abc.levels;
    return make_result(kTiming, Outcome::passed, {}, metrics);
}

} // namespace rtlevo
