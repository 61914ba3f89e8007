#pragma once

#include "rtlevo/evaluators.hpp"
#include "rtlevo/llm.hpp"
#include "rtlevo/model.hpp"
#include "rtlevo/skills.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rtlevo {

inline constexpr int kMaxReplayCases = 8;
inline constexpr int kCasesPerWorker = 3;

struct ValidationThresholds {
    int min_results = 2;
    int min_approvals = 2;
    double min_mean_quality = 0.75;
    bool operator==(const ValidationThresholds&) const = default;
};

struct ReplayCase {
    std::string session_id;
    std::string task_spec_path;
    std::string evaluator_config_path;
    bool operator==(const ReplayCase&) const = default;
};

enum class JobStatus { pending, published, rejected };
std::string to_string(JobStatus s);
JobStatus job_status_from_string(std::string_view s);

struct ValidatorResult {
    std::string worker_id;
    bool approved = false;
    double candidate_quality = 0.0;
    double baseline_quality = 0.0;
    int cases_replayed = 0;
    std::vector<std::string> notes;
    bool operator==(const ValidatorResult&) const = default;
};

struct ValidationJob {
    std::string job_id;
    std::string skill_id;
    /// create_skill jobs carry an empty baseline.
    bool create = false;
    std::string baseline_text;
    std::string candidate_text;
    std::vector<ReplayCase> replay_cases;
    ValidationThresholds thresholds;
    /// Read from the per-worker result files, not from job.doc.
    std::vector<ValidatorResult> results;
    JobStatus status = JobStatus::pending;
    std::string status_reason;
    bool operator==(const ValidationJob&) const = default;
};

void to_json(json& j, const ValidationThresholds& t);
void from_json(const json& j, ValidationThresholds& t);
void to_json(json& j, const ReplayCase& c);
void from_json(const json& j, ReplayCase& c);
void to_json(json& j, const ValidatorResult& r);
void from_json(const json& j, ValidatorResult& r);
void to_json(json& j, const ValidationJob& v);
void from_json(const json& j, ValidationJob& v);

/// Throws PreconditionError when the job cannot be enqueued.
void validate_job(const ValidationJob& job);

/// Persists queue/<job_id>/job.doc with status pending. A duplicate id
/// throws PreconditionError.
std::string enqueue(const ValidationJob& job, const fs::path& queue);

bool job_exists(const fs::path& queue, const std::string& job_id);

/// job.doc plus every result.<worker>.doc, results ordered by worker id.
ValidationJob load_job(const fs::path& queue, const std::string& job_id);
std::vector<std::string> list_jobs(const fs::path& queue);

/// Exclusive claim on one job; released on destruction.
class JobClaim {
public:
    JobClaim(const fs::path& queue, const std::string& job_id, const std::string& worker_id);
    ~JobClaim();
    JobClaim(const JobClaim&) = delete;
    JobClaim& operator=(const JobClaim&) = delete;

    bool held() const { return held_; }

private:
    fs::path path_;
    bool held_ = false;
};

/// Writes result.<worker>.doc exclusively; false when the worker already
/// has a result for this job.
bool append_result(const fs::path& queue, const std::string& job_id, const ValidatorResult& r);

/// Quality of one replay: 1 for a passing candidate, else
/// clamp(1 - score / p_max, 0, 1).
double replay_quality(bool passed, double score, double p_max);

bool approve(double candidate_quality, double baseline_quality, const ValidationThresholds& t);

struct PublishVerdict {
    JobStatus status = JobStatus::pending;
    std::string reason;
};

PublishVerdict publish_decision(const std::vector<ValidatorResult>& results, const ValidationThresholds& t);

struct WorkerOptions {
    std::string worker_id;
    int max_jobs = 1;
    /// Used when a case has no readable evaluator configuration.
    EvaluatorConfig fallback_evaluator;
    /// Scratch root for replay builds; defaults to queue/<job>/work.<worker>.
    fs::path scratch;
    PromptTemplates templates;
};

struct WorkerReport {
    std::string job_id;
    ValidatorResult result;
};

/// Claims up to max_jobs pending jobs this worker has not judged and appends
/// one result to each.
std::vector<WorkerReport> worker_process(const fs::path& queue, Provider& provider, const WorkerOptions& opt);

/// Replays up to three cases of one job (no claim handling).
ValidatorResult replay_job(const ValidationJob& job, Provider& provider, const WorkerOptions& opt,
                           const fs::path& scratch);

struct PublishReport {
    std::string job_id;
    std::string skill_id;
    JobStatus status = JobStatus::pending;
    int results = 0;
    int approvals = 0;
    double mean_quality = 0.0;
    std::string reason;
    bool changed = false;
};

/// Applies the thresholds to every pending job. A registry write failure
/// leaves the job pending with a diagnostic.
std::vector<PublishReport> publish(const fs::path& queue, SkillLibrary& lib);

} // namespace rtlevo
