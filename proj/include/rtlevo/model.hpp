#pragma once

#include "rtlevo/fsutil.hpp"

#include <json.hpp>

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rtlevo {

using json = nlohmann::json;

/// Serializes with invalid UTF-8 replaced (tool logs and model output are
/// arbitrary bytes).
inline std::string dump_text(const json& j, int indent = -1)
{
    return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

inline constexpr int kSchemaVersion = 1;

enum class Outcome {
    passed,
    mismatch,
    compile_error,
    syntax_error,
    timeout,
    unknown_failure,
    tool_unavailable,
};

enum class Strategy { direct, c_bridge, repair };
enum class PathSelect { timing_critical, structurally_complex, random_exploration, none };
enum class Focus { combinational, sequential, mixed };
enum class RetrievalMode { static_set, retrieved };
enum class Risk { low, high };

std::string to_string(Outcome o);
std::string to_string(Strategy s);
std::string to_string(PathSelect p);
std::string to_string(Focus f);
std::string to_string(RetrievalMode m);
std::string to_string(Risk r);

Outcome outcome_from_string(std::string_view s);
Strategy strategy_from_string(std::string_view s);
PathSelect path_select_from_string(std::string_view s);
Focus focus_from_string(std::string_view s);
RetrievalMode retrieval_mode_from_string(std::string_view s);
Risk risk_from_string(std::string_view s);

/// A design task: what to build and how it is checked.
struct TaskSpec {
    std::string task_id;
    std::string description;
    std::string module_header;
    fs::path visible_testbench;
    /// Additional sources compiled with the testbench (e.g. a reference module).
    std::vector<fs::path> extra_sources;
    std::optional<std::string> heldout_profile;
    std::vector<std::string> tags;

    /// Name declared by `module_header`.
    std::string module_name() const;

    bool operator==(const TaskSpec&) const = default;
};

/// Throws ConfigError naming the first violated invariant.
void validate_task_spec(const TaskSpec& task);

/// Extracts the module name from a declaration header, or empty.
std::string module_name_of(std::string_view header);

/// Loads a task document; relative paths resolve against the file's directory.
TaskSpec load_task_spec(const fs::path& path);
void save_task_spec(const TaskSpec& task, const fs::path& path);

struct VersionId {
    int major = 0;
    int minor = 1;

    std::string str() const { return std::to_string(major) + "." + std::to_string(minor); }
    auto operator<=>(const VersionId&) const = default;
};

struct DiversityPlan {
    PathSelect path_select = PathSelect::none;
    Focus focus = Focus::combinational;

    bool operator==(const DiversityPlan&) const = default;
};

struct SkillRef {
    std::string skill_id;
    RetrievalMode mode = RetrievalMode::retrieved;

    bool operator==(const SkillRef&) const = default;
};

struct RtlCandidate {
    VersionId version;
    std::string rtl_text;
    Strategy strategy = Strategy::direct;
    DiversityPlan plan;
    std::vector<SkillRef> skill_refs;
    std::optional<VersionId> parent;
    /// Generation metadata such as a logged C-bridge downgrade.
    std::vector<std::string> notes;
    /// Skill ids the model proposed as new evidence tags.
    std::vector<std::string> proposed_skills;

    bool operator==(const RtlCandidate&) const = default;
};

struct EvaluatorResult {
    std::string evaluator;
    bool passed = false;
    Outcome outcome = Outcome::unknown_failure;
    std::map<std::string, double> metrics;
    std::string feedback;

    bool operator==(const EvaluatorResult&) const = default;
};

EvaluatorResult make_result(std::string evaluator, Outcome outcome, std::string feedback = {},
                            std::map<std::string, double> metrics = {});

/// Throws ParseError when passed/outcome disagree or feedback is missing on failure.
void validate_result(const EvaluatorResult& r);

struct CandidateRecord {
    std::string task_id;
    RtlCandidate candidate;
    std::vector<EvaluatorResult> results;
    double score = 0.0;
    bool eligible = false;
    std::map<std::string, double> breakdown;
    std::map<std::string, std::vector<std::string>> artifacts;
    std::map<std::string, std::int64_t> wall_time_ms;
    std::int64_t timestamp_ms = 0;

    const EvaluatorResult* result(std::string_view evaluator) const;

    bool operator==(const CandidateRecord&) const = default;
};

struct MajorRecord {
    std::string task_id;
    int major = 0;
    std::optional<int> selected_minor;
    std::optional<double> selected_score;
    bool improve = false;
    std::optional<EvaluatorResult> gate_result;
    bool promoted = false;
    /// Baseline score before this round, when a baseline existed.
    std::optional<double> previous_score;
    /// Baseline score after this round.
    std::optional<double> score;
    std::optional<CandidateRecord> baseline_record;
    std::string promoted_artifact;
    int minors_evaluated = 0;
    std::int64_t timestamp_ms = 0;

    bool operator==(const MajorRecord&) const = default;
};

struct SessionSummary {
    std::string session_id;
    std::string task_id;
    std::vector<std::string> referenced_skills;
    int pass_count = 0;
    int promote_count = 0;
    int record_count = 0;
    double avg_score = 0.0;
    std::vector<double> score_deltas;
    Strategy strategy = Strategy::direct;
    PathSelect path_select = PathSelect::none;
    Focus focus = Focus::combinational;
    std::map<std::string, int> strategy_counts;
    std::map<std::string, int> path_select_counts;
    std::map<std::string, int> focus_counts;
    std::map<std::string, int> hint_tag_counts;
    Risk equivalence_risk = Risk::low;
    std::vector<std::string> proposed_skills;
    /// Task document and evaluator configuration snapshots used for replay.
    std::string task_spec_path;
    std::string evaluator_config_path;

    bool operator==(const SessionSummary&) const = default;
};

void to_json(json& j, const TaskSpec& t);
void from_json(const json& j, TaskSpec& t);
void to_json(json& j, const VersionId& v);
void from_json(const json& j, VersionId& v);
void to_json(json& j, const DiversityPlan& p);
void from_json(const json& j, DiversityPlan& p);
void to_json(json& j, const SkillRef& s);
void from_json(const json& j, SkillRef& s);
void to_json(json& j, const RtlCandidate& c);
void from_json(const json& j, RtlCandidate& c);
void to_json(json& j, const EvaluatorResult& r);
void from_json(const json& j, EvaluatorResult& r);
void to_json(json& j, const CandidateRecord& r);
void from_json(const json& j, CandidateRecord& r);
void to_json(json& j, const MajorRecord& r);
void from_json(const json& j, MajorRecord& r);
void to_json(json& j, const SessionSummary& s);
void from_json(const json& j, SessionSummary& s);

/// One self-delimiting line (no embedded newlines).
std::string encode_minor_line(const CandidateRecord& r);
std::string encode_major_line(const MajorRecord& r);

/// Append-only minors.log / majors.log for one task run directory.
/// Appends are serialized in-process and flock'ed across processes.
class HistorySink {
public:
    explicit HistorySink(fs::path task_dir);

    void record_minor(const CandidateRecord& r);
    void record_major(const MajorRecord& r);

    const fs::path& dir() const { return dir_; }
    fs::path minors_path() const { return dir_ / "minors.log"; }
    fs::path majors_path() const { return dir_ / "majors.log"; }

private:
    fs::path dir_;
    std::mutex mu_;
};

struct LineDiagnostic {
    std::string file;
    int line = 0;
    std::string message;
};

struct History {
    std::vector<CandidateRecord> minors;
    std::vector<MajorRecord> majors;
    std::vector<LineDiagnostic> diagnostics;
    std::vector<std::string> warnings;
};

History parse_history(const fs::path& task_dir);

/// True when the record passes the correctness checks counted as evidence:
/// the functional evaluator and, when present, SEC.
bool correctness_pass(const CandidateRecord& r);

/// Hint tags embedded in evaluator feedback as `[hint:<tag>]`.
std::vector<std::string> extract_hint_tags(std::string_view feedback);

using RiskLookup = std::function<Risk(const std::string& skill_id)>;

/// Requires at least one record.
SessionSummary summarize_session(const std::string& session_id,
                                 const std::vector<CandidateRecord>& records,
                                 const std::vector<MajorRecord>& majors,
                                 const RiskLookup& risk = {});

} // namespace rtlevo
