#include "rtlevo/evaluators.hpp"

#include "rtlevo/error.hpp"

#include <algorithm>
#include <chrono>
#include <regex>
#include <set>
#include <sstream>

namespace rtlevo {

const std::vector<std::string>& known_evaluators()
{
    static const std::vector<std::string> names{kFunctional, kSynthesis, kTiming, kDownstream, kHeldout, kEda};
    return names;
}

std::int64_t EvaluatorConfig::timeout_for(const std::string& evaluator) const
{
    auto it = timeouts_ms.find(evaluator);
    return it == timeouts_ms.end() ? 60000 : it->second;
}

void validate_evaluator_config(const EvaluatorConfig& c)
{
    if (c.enabled.empty())
        throw ConfigError("evaluator config: enabled list is empty");
    std::set<std::string> seen;
    for (auto& name : c.enabled) {
        if (std::find(known_evaluators().begin(), known_evaluators().end(), name) == known_evaluators().end())
            throw ConfigError("evaluator config: unknown evaluator '" + name + "'");
        if (!seen.insert(name).second)
            throw ConfigError("evaluator config: evaluator '" + name + "' enabled twice");
    }
    for (auto& [name, ms] : c.timeouts_ms)
        if (ms <= 0)
            throw ConfigError("evaluator config: timeout for '" + name + "' must be > 0");
    if (c.compile_timeout_ms <= 0)
        throw ConfigError("evaluator config: compile_timeout_ms must be > 0");
    if (c.backend != "tools" && c.backend != "annotated")
        throw ConfigError("evaluator config: backend must be tools or annotated");
    if (c.simulator != "auto" && c.simulator != "iverilog" && c.simulator != "verilator")
        throw ConfigError("evaluator config: simulator must be auto, iverilog or verilator");
    if (c.heldout_case_count < 1)
        throw ConfigError("evaluator config: heldout_case_count must be >= 1");
}

void to_json(json& j, const EvaluatorConfig& c)
{
    j = json{{"enabled", c.enabled},
             {"timeouts_ms", c.timeouts_ms},
             {"compile_timeout_ms", c.compile_timeout_ms},
             {"backend", c.backend},
             {"simulator", c.simulator},
             {"tools", {{"iverilog", c.iverilog}, {"vvp", c.vvp}, {"verilator", c.verilator}, {"yosys", c.yosys}}},
             {"work_dir", c.work_dir.string()},
             {"heldout_seed", c.heldout_seed},
             {"heldout_case_count", c.heldout_case_count},
             {"eda_report_path", c.eda_report_path},
             {"cell_patterns", c.cell_patterns}};
}

void from_json(const json& j, EvaluatorConfig& c)
{
    c = EvaluatorConfig{};
    if (!j.is_object())
        throw ConfigError("evaluator config must be an object");
    try {
        if (j.contains("enabled"))
            c.enabled = j.at("enabled").get<std::vector<std::string>>();
        if (j.contains("timeouts_ms"))
            for (auto& [k, v] : j.at("timeouts_ms").items())
                c.timeouts_ms[k] = v.get<std::int64_t>();
        c.compile_timeout_ms = j.value("compile_timeout_ms", c.compile_timeout_ms);
        c.backend = j.value("backend", c.backend);
        c.simulator = j.value("simulator", c.simulator);
        if (auto t = j.find("tools"); t != j.end()) {
            c.iverilog = t->value("iverilog", c.iverilog);
            c.vvp = t->value("vvp", c.vvp);
            c.verilator = t->value("verilator", c.verilator);
            c.yosys = t->value("yosys", c.yosys);
        }
        if (j.contains("work_dir"))
            c.work_dir = j.at("work_dir").get<std::string>();
        c.heldout_seed = j.value("heldout_seed", c.heldout_seed);
        c.heldout_case_count = j.value("heldout_case_count", c.heldout_case_count);
        c.eda_report_path = j.value("eda_report_path", c.eda_report_path);
        if (j.contains("cell_patterns"))
            c.cell_patterns = j.at("cell_patterns").get<std::map<std::string, std::vector<std::string>>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("evaluator config: ") + e.what());
    }
    validate_evaluator_config(c);
}

EvaluatorConfig load_evaluator_config(const fs::path& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return j.get<EvaluatorConfig>();
}

const EvaluatorResult* EvalContext::prior_result(std::string_view evaluator) const
{
    for (auto& r : prior)
        if (r.evaluator == evaluator)
            return &r;
    return nullptr;
}

namespace {

std::optional<double> metric_of(const EvaluatorResult* r, const std::string& key)
{
    if (!r)
        return std::nullopt;
    auto it = r->metrics.find(key);
    if (it == r->metrics.end())
        return std::nullopt;
    return it->second;
}

std::string substitute(std::string text, const std::string& key, const std::string& value)
{
    std::string pat = "{" + key + "}";
    for (auto pos = text.find(pat); pos != std::string::npos; pos = text.find(pat, pos + value.size()))
        text.replace(pos, pat.size(), value);
    return text;
}

class FunctionalEvaluator : public Evaluator {
public:
    std::string name() const override { return kFunctional; }
    EvaluatorResult evaluate(const std::string& rtl, EvalContext& ctx) override
    {
        return evaluate_functional(rtl, ctx.task->visible_testbench, ctx.task->extra_sources, ctx.task, *ctx.config,
                                   ctx.scratch / kFunctional);
    }
};

class SynthesisEvaluator : public Evaluator {
public:
    std::string name() const override { return kSynthesis; }
    EvaluatorResult evaluate(const std::string& rtl, EvalContext& ctx) override
    {
        auto dir = ctx.scratch / kSynthesis;
        auto r = evaluate_synthesis(rtl, ctx.task, *ctx.config, dir);
        if (r.passed && fs::exists(dir / "netlist.json"))
            ctx.produced["netlist"] = dir / "netlist.json";
        return r;
    }
};

class TimingEvaluator : public Evaluator {
public:
    std::string name() const override { return kTiming; }
    EvaluatorResult evaluate(const std::string& rtl, EvalContext& ctx) override
    {
        return evaluate_timing(rtl, ctx.task, *ctx.config, ctx.scratch / kTiming);
    }
};

class DownstreamEvaluator : public Evaluator {
public:
    std::string name() const override { return kDownstream; }
    EvaluatorResult evaluate(const std::string&, EvalContext& ctx) override
    {
        return evaluate_downstream(ctx.produced.at("netlist"), downstream_params_for(ctx.task),
                                   metric_of(ctx.prior_result(kSynthesis), "cell_count"),
                                   metric_of(ctx.prior_result(kTiming), "abc_delay_proxy"), *ctx.config);
    }
};

class HeldoutEvaluator : public Evaluator {
public:
    std::string name() const override { return kHeldout; }
    EvaluatorResult evaluate(const std::string& rtl, EvalContext& ctx) override
    {
        return evaluate_heldout(rtl, *ctx.task, ctx.config->heldout_seed, ctx.config->heldout_case_count,
                                *ctx.config, ctx.scratch / kHeldout);
    }
};

class EdaEvaluator : public Evaluator {
public:
    std::string name() const override { return kEda; }
    EvaluatorResult evaluate(const std::string&, EvalContext& ctx) override
    {
        std::string path = substitute(ctx.config->eda_report_path, "task", ctx.task->task_id);
        path = substitute(path, "version", ctx.version.str());
        if (!fs::exists(path))
            return make_result(kEda, Outcome::tool_unavailable, "EDA report not found: " + path);
        EdaReport report;
        try {
            report = parse_eda_report(read_file(path));
        } catch (const ParseError& e) {
            return make_result(kEda, Outcome::unknown_failure, std::string("EDA report unreadable: ") + e.what());
        }
        return eda_result(report);
    }
};

class AnnotatedEvaluator : public Evaluator {
public:
    explicit AnnotatedEvaluator(std::string name) : name_(std::move(name)) {}
    std::string name() const override { return name_; }
    EvaluatorResult evaluate(const std::string& rtl, EvalContext& ctx) override
    {
        auto r = annotated_result(name_, rtl);
        if (name_ == kSynthesis && r.passed) {
            auto dir = ctx.scratch / kSynthesis;
            fs::create_directories(dir);
            write_file(dir / "netlist.json", "{\"modules\": {}}\n");
            ctx.produced["netlist"] = dir / "netlist.json";
        }
        return r;
    }

private:
    std::string name_;
};

std::vector<std::string> list_artifacts(const fs::path& scratch, const std::string& evaluator)
{
    std::vector<std::string> out;
    auto dir = scratch / evaluator;
    if (!fs::is_directory(dir))
        return out;
    for (auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file())
            out.push_back((fs::path(evaluator) / e.path().filename()).string());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

EvaluatorSet make_evaluators(const EvaluatorConfig& config)
{
    EvaluatorSet set;
    if (config.backend == "annotated") {
        for (auto& n : known_evaluators())
            set[n] = std::make_shared<AnnotatedEvaluator>(n);
        return set;
    }
    set[kFunctional] = std::make_shared<FunctionalEvaluator>();
    set[kSynthesis] = std::make_shared<SynthesisEvaluator>();
    set[kTiming] = std::make_shared<TimingEvaluator>();
    set[kDownstream] = std::make_shared<DownstreamEvaluator>();
    set[kHeldout] = std::make_shared<HeldoutEvaluator>();
    set[kEda] = std::make_shared<EdaEvaluator>();
    return set;
}

PoolOutput run_pool(const std::string& rtl_text, const TaskSpec& task, VersionId version,
                    const EvaluatorConfig& config, const fs::path& scratch, const EvaluatorSet& evaluators)
{
    if (rtl_text.empty())
        throw PreconditionError("run_pool: empty rtl_text");
    fs::create_directories(scratch);
    EvalContext ctx;
    ctx.task = &task;
    ctx.version = version;
    ctx.scratch = scratch;
    ctx.config = &config;

    PoolOutput out;
    for (auto& name : config.enabled) {
        auto started = std::chrono::steady_clock::now();
        EvaluatorResult r;
        bool needs_netlist = name == kTiming || name == kDownstream;
        if (needs_netlist && !ctx.produced.count("netlist")) {
            bool synth_enabled =
                std::find(config.enabled.begin(), config.enabled.end(), kSynthesis) != config.enabled.end();
            r = make_result(name, Outcome::tool_unavailable,
                            synth_enabled ? "missing netlist: synthesis did not produce a netlist for this candidate"
                                          : "missing netlist: requires the synthesis evaluator to be enabled");
        } else {
            auto it = evaluators.find(name);
            if (it == evaluators.end()) {
                r = make_result(name, Outcome::tool_unavailable, "no evaluator registered for '" + name + "'");
            } else {
                try {
                    r = it->second->evaluate(rtl_text, ctx);
                } catch (const ConfigError&) {
                    throw;
                } catch (const std::exception& e) {
                    r = make_result(name, Outcome::unknown_failure, std::string("evaluator error: ") + e.what());
                }
            }
        }
        r.evaluator = name;
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
        out.wall_time_ms[name] = elapsed.count();
        auto files = list_artifacts(scratch, name);
        if (!files.empty())
            out.artifacts[name] = files;
        ctx.prior.push_back(r);
        out.results.push_back(std::move(r));
    }
    return out;
}

EvaluatorResult annotated_result(const std::string& evaluator, std::string_view rtl_text)
{
    static const std::regex line_re(R"(//\s*@([A-Za-z_]+)\s*:\s*([A-Za-z_]+)(.*))");
    std::istringstream in{std::string(rtl_text)};
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_search(line, m, line_re) || m[1].str() != evaluator)
            continue;
        Outcome outcome = outcome_from_string(m[2].str());
        std::map<std::string, double> metrics;
        std::vector<std::string> hints;
        std::istringstream rest(m[3].str());
        std::string tok;
        while (rest >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos)
                continue;
            std::string key = tok.substr(0, eq);
            std::string value = tok.substr(eq + 1);
            if (key == "hint") {
                hints.push_back(value);
                continue;
            }
            try {
                metrics[key] = std::stod(value);
            } catch (const std::exception&) {
                throw ParseError("annotation " + evaluator + ": bad metric '" + tok + "'");
            }
        }
        std::string feedback;
        if (outcome != Outcome::passed)
            feedback = "annotated outcome: " + to_string(outcome);
        for (auto& h : hints)
            feedback += (feedback.empty() ? "" : "\n") + std::string("[hint:") + h + "]";
        return make_result(evaluator, outcome, feedback, metrics);
    }
    return make_result(evaluator, Outcome::passed);
}

} // namespace rtlevo
