#pragma once

#include "rtlevo/model.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rtlevo {

enum class ScoreMode { correctness_only, ppa, timing, downstream, eda };

std::string to_string(ScoreMode m);
ScoreMode score_mode_from_string(std::string_view s);

/// Objective terms of the open-source score. Each term sums its configured
/// metric keys, each divided by its normalizer.
inline constexpr const char* kTermArea = "area";
inline constexpr const char* kTermWire = "wire";
inline constexpr const char* kTermTiming = "timing";
inline constexpr const char* kTermDownstream = "downstream";

struct ScoreConfig {
    ScoreMode mode = ScoreMode::correctness_only;

    double lambda_area = 0.0;
    double lambda_wire = 0.0;
    double lambda_timing = 0.0;
    double lambda_downstream = 0.0;

    /// Fixed penalty per functional outcome. The `mismatch` entry is the
    /// coefficient applied to the mismatch ratio.
    std::map<Outcome, double> penalty_table;
    double optional_fail_penalty = 5.0;

    std::set<std::string> required{"functional"};
    std::set<std::string> hard_gates;
    std::map<std::string, double> normalizers;
    std::map<std::string, std::vector<std::string>> metric_keys;

    // Industrial mode.
    double eda_epsilon = 1e-6;
    double sec_penalty = 1e6;
    std::optional<double> area_cap;
    double area_cap_penalty = 1.0;

    double mismatch_coefficient() const;
    double lambda_for(const std::string& term) const;
};

/// The five shipped presets.
ScoreConfig preset(ScoreMode mode);

/// Throws ConfigError on any violated invariant.
void validate_score_config(const ScoreConfig& c);

void to_json(json& j, const ScoreConfig& c);
/// Missing fields fall back to the preset of the section's `mode`.
void from_json(const json& j, ScoreConfig& c);

/// Reads a preset file with one section per mode name.
std::map<std::string, ScoreConfig> load_score_presets(const fs::path& path);
json default_score_presets_json();

struct ScoreResult {
    double score = 0.0;
    bool eligible = false;
    std::map<std::string, double> breakdown;
};

/// Largest fixed functional penalty; anchors replay quality mapping.
double max_functional_penalty(const ScoreConfig& c);

bool pass_predicate(const std::vector<EvaluatorResult>& results, const ScoreConfig& c);

ScoreResult score_open(const std::vector<EvaluatorResult>& results, const ScoreConfig& c);

/// `baseline` is the current major's results; null means deltas are zero.
ScoreResult score_eda(const std::vector<EvaluatorResult>& results,
                      const std::vector<EvaluatorResult>* baseline, const ScoreConfig& c);

/// Dispatches on mode.
ScoreResult evaluate_score(const std::vector<EvaluatorResult>& results, const ScoreConfig& c,
                           const std::vector<EvaluatorResult>* baseline = nullptr);

/// Index of the eligible record with minimal score; ties go to the smaller
/// minor index. Empty when nothing is eligible.
std::optional<std::size_t> select_best(const std::vector<CandidateRecord>& records);

} // namespace rtlevo
