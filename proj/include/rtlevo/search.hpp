#pragma once

#include "rtlevo/evaluators.hpp"
#include "rtlevo/llm.hpp"
#include "rtlevo/model.hpp"
#include "rtlevo/scoring.hpp"
#include "rtlevo/skills.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rtlevo {

struct SearchConfig {
    int rounds = 3;
    int minors = 5;
    std::vector<Strategy> strategy_pool{Strategy::direct, Strategy::c_bridge, Strategy::repair};
    /// Unset means: on in correctness_only mode, off otherwise.
    std::optional<bool> early_stop;
    /// Evaluator applied to the selected minor before promotion.
    std::optional<std::string> promotion_gate;
    std::uint64_t rng_seed = 0;
    /// Minors evaluated concurrently within a round.
    int parallelism = 1;
    std::size_t feedback_cap = 1500;
    int token_budget_hint = 4096;
    double temperature = 0.8;
    double repair_temperature = 0.4;
    RetrievalConfig retrieval;

    bool early_stop_for(ScoreMode mode) const { return early_stop.value_or(mode == ScoreMode::correctness_only); }
};

void validate_search_config(const SearchConfig& c);
void to_json(json& j, const SearchConfig& c);
void from_json(const json& j, SearchConfig& c);

struct SearchState {
    std::optional<CandidateRecord> current_major;
    FeedbackContext feedback;
    int round = 0;
    /// Digest of the last two non-promoting rounds; kept outside the
    /// feedback context so the context only changes on promotion.
    std::vector<std::string> recent_failures;
};

/// Deterministic generator for one (seed, task, round, minor) slot.
std::mt19937_64 attempt_rng(std::uint64_t seed, const std::string& task_id, int round, int minor);

struct Attempt {
    Strategy strategy = Strategy::direct;
    DiversityPlan plan;
};

/// Round-robin over the usable pool for the first |pool| minors, then
/// seeded-uniform. Repair needs a baseline; path selection needs synthesis or
/// timing feedback on the baseline.
Attempt sample_attempt(const std::vector<Strategy>& pool, bool has_baseline, bool has_structural_feedback, int k,
                       std::mt19937_64& rng);

struct SearchEnv {
    const TaskSpec* task = nullptr;
    SearchConfig search;
    ScoreConfig score;
    EvaluatorConfig evaluator;
    Provider* provider = nullptr;
    const SkillLibrary* skills = nullptr;
    PromptTemplates templates;
    EvaluatorSet evaluators;
    /// runs/<run_id>/<task_id>
    fs::path task_dir;
};

/// Generates, evaluates and scores one minor candidate; never throws for
/// provider or extraction failures.
CandidateRecord run_minor(const SearchState& state, const SearchEnv& env, int round, int k);

/// One major round: minors, selection, improvement and gate checks,
/// promotion, history lines.
MajorRecord run_major_round(SearchState& state, const SearchEnv& env, HistorySink& sink);

struct RunSummary {
    std::string task_id;
    std::string run_id;
    bool final_success = false;
    std::optional<double> best_functional_score;
    std::optional<double> promotion_pass;
    double compile_pass = 0.0;
    int promoted_major_count = 0;
    int rounds = 0;
    int minors_total = 0;
    std::optional<double> final_score;
    std::string final_artifact;
};

void to_json(json& j, const RunSummary& s);

struct RunResult {
    RunSummary summary;
    std::optional<CandidateRecord> final_major;
    std::vector<MajorRecord> majors;
};

/// Validates every configuration before the first round, then runs all
/// rounds and writes task.json, config.json and summary.json next to the logs.
RunResult run_task(const SearchEnv& env, const std::string& run_id);

/// Summary fields recomputed from parsed history.
RunSummary summarize_run(const std::string& task_id, const std::string& run_id, const History& h);

} // namespace rtlevo
