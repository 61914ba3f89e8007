#pragma once

#include "rtlevo/gemm.hpp"
#include "rtlevo/model.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rtlevo {

inline constexpr const char* kFunctional = "functional";
inline constexpr const char* kSynthesis = "synthesis";
inline constexpr const char* kTiming = "timing";
inline constexpr const char* kDownstream = "downstream";
inline constexpr const char* kHeldout = "heldout";
inline constexpr const char* kEda = "eda";

const std::vector<std::string>& known_evaluators();

struct EvaluatorConfig {
    std::vector<std::string> enabled{kFunctional};
    std::map<std::string, std::int64_t> timeouts_ms{
        {kFunctional, 30000}, {kSynthesis, 60000}, {kTiming, 60000},
        {kDownstream, 60000}, {kHeldout, 30000},   {kEda, 60000},
    };
    /// Budget for building the simulation model (Verilator builds are slow).
    std::int64_t compile_timeout_ms = 180000;

    /// `tools` runs the simulators and Yosys; `annotated` reads outcomes
    /// declared in the RTL text (for scripted runs).
    std::string backend = "tools";
    /// auto | iverilog | verilator
    std::string simulator = "auto";
    std::string iverilog = "iverilog";
    std::string vvp = "vvp";
    std::vector<std::string> verilator{"verilator", "verilator-cli"};
    std::vector<std::string> yosys{"yosys", "yowasp-yosys"};

    fs::path work_dir = "work";
    std::uint64_t heldout_seed = 20240611;
    int heldout_case_count = 64;

    /// Report location for the parse-only EDA adapter; `{task}` and
    /// `{version}` are substituted.
    std::string eda_report_path = "eda/{task}/{version}.rpt";

    /// Lower-case substrings that classify netlist cell types, checked in
    /// the order dff, mul, add, mux.
    std::map<std::string, std::vector<std::string>> cell_patterns{
        {"dff", {"dff"}},
        {"mul", {"mul"}},
        {"add", {"$add", "$sub", "$alu", "add"}},
        {"mux", {"mux"}},
    };

    std::int64_t timeout_for(const std::string& evaluator) const;
};

void validate_evaluator_config(const EvaluatorConfig& c);
void to_json(json& j, const EvaluatorConfig& c);
void from_json(const json& j, EvaluatorConfig& c);
EvaluatorConfig load_evaluator_config(const fs::path& path);

/// State shared by the evaluators of one candidate within a pool run.
struct EvalContext {
    const TaskSpec* task = nullptr;
    VersionId version;
    /// Per-candidate scratch directory; evaluators write artifacts here.
    fs::path scratch;
    const EvaluatorConfig* config = nullptr;
    /// Named artifacts produced so far (e.g. "netlist").
    std::map<std::string, fs::path> produced;
    /// Results of evaluators that already ran, in order.
    std::vector<EvaluatorResult> prior;
    /// Artifact files per evaluator, recorded in the history.
    std::map<std::string, std::vector<std::string>> artifacts;

    const EvaluatorResult* prior_result(std::string_view evaluator) const;
};

class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual std::string name() const = 0;
    virtual EvaluatorResult evaluate(const std::string& rtl_text, EvalContext& ctx) = 0;
};

using EvaluatorSet = std::map<std::string, std::shared_ptr<Evaluator>>;

/// Evaluators for every known name under the configured backend.
EvaluatorSet make_evaluators(const EvaluatorConfig& config);

struct PoolOutput {
    std::vector<EvaluatorResult> results;
    std::map<std::string, std::vector<std::string>> artifacts;
    std::map<std::string, std::int64_t> wall_time_ms;
};

/// One result per enabled evaluator, in declared order. Timing and
/// downstream need the synthesis netlist from the same run and report
/// tool_unavailable without it.
PoolOutput run_pool(const std::string& rtl_text, const TaskSpec& task, VersionId version,
                    const EvaluatorConfig& config, const fs::path& scratch, const EvaluatorSet& evaluators);

// Functional simulation ----------------------------------------------------

/// Pattern-derived repair hints, each as a `[hint:<tag>] ...` line.
std::vector<std::string> repair_hints(Outcome outcome, std::string_view log, std::string_view rtl_text,
                                      const TaskSpec* task);

/// Compiles `rtl_text` with `testbench` (plus extra sources) and simulates.
/// Throws ConfigError when the testbench is missing.
EvaluatorResult evaluate_functional(const std::string& rtl_text, const fs::path& testbench,
                                    const std::vector<fs::path>& extra_sources, const TaskSpec* task,
                                    const EvaluatorConfig& config, const fs::path& scratch,
                                    const std::string& evaluator_name = kFunctional);

/// "iverilog" or "verilator" for the configured simulator, or empty.
std::string simulator_kind(const EvaluatorConfig& config);

/// Randomized stimulus against the profile's reference model.
EvaluatorResult evaluate_heldout(const std::string& rtl_text, const TaskSpec& task, std::uint64_t seed,
                                 int case_count, const EvaluatorConfig& config, const fs::path& scratch);

// Yosys --------------------------------------------------------------------

/// Resolved Yosys executable, or empty.
fs::path resolve_yosys(const EvaluatorConfig& config);

/// Metrics from a `stat -json` document (design totals).
std::map<std::string, double> parse_yosys_stat(const json& stat);

/// Writes `netlist.json` into `scratch` on success.
EvaluatorResult evaluate_synthesis(const std::string& rtl_text, const TaskSpec* task,
                                   const EvaluatorConfig& config, const fs::path& scratch);

struct AbcStats {
    std::optional<double> delay;
    std::optional<int> levels;
};
/// Reads the last `print_stats` line of an ABC log.
AbcStats parse_abc_log(std::string_view log);

EvaluatorResult evaluate_timing(const std::string& rtl_text, const TaskSpec* task, const EvaluatorConfig& config,
                                const fs::path& scratch);

// Downstream GEMM analysis ---------------------------------------------------

struct GemmMetrics {
    int mul_cells = 0;
    int add_cells = 0;
    int dff_cells = 0;
    int mux_cells = 0;
    int bitwidth_hits = 0;
    int pipeline_depth_proxy = 0;
    std::optional<double> adp_proxy;
    double downstream_score = 0.0;
};

/// Structural features of the top module of a Yosys JSON netlist.
/// Throws ParseError when the document is not a netlist.
GemmMetrics analyze_netlist(const json& netlist, const DownstreamParams& params,
                            const std::map<std::string, std::vector<std::string>>& cell_patterns);

double downstream_score(const GemmMetrics& m, const DownstreamParams& params);

/// Profile parameters for GEMM tasks, defaults otherwise.
DownstreamParams downstream_params_for(const TaskSpec* task);

/// Throws PreconditionError when the netlist file is missing.
EvaluatorResult evaluate_downstream(const fs::path& netlist_path, const DownstreamParams& params,
                                    std::optional<double> cell_count, std::optional<double> abc_delay_proxy,
                                    const EvaluatorConfig& config);

// Industrial EDA (parse-only) ------------------------------------------------

enum class SecStatus { pass, fail, unknown };

struct EdaReport {
    SecStatus sec_status = SecStatus::unknown;
    std::optional<double> wns;
    std::optional<double> tns;
    std::optional<double> area;
    std::optional<double> power;
    std::vector<std::pair<std::string, double>> critical_paths;
    std::vector<std::string> warnings;
};

/// Throws ParseError on empty input.
EdaReport parse_eda_report(std::string_view text);

EvaluatorResult eda_result(const EdaReport& report);

// Annotated backend ----------------------------------------------------------

/// Outcome declared in the RTL as `// @<evaluator>: <outcome> key=value ...`.
/// Keys other than numeric metrics: `hint=<tag>` adds a hint line. An
/// evaluator without an annotation passes.
EvaluatorResult annotated_result(const std::string& evaluator, std::string_view rtl_text);

} // namespace rtlevo
