#pragma once

#include "rtlevo/llm.hpp"
#include "rtlevo/model.hpp"
#include "rtlevo/skills.hpp"
#include "rtlevo/validation.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rtlevo {

/// One ingested run/task pair plus the per-skill pass counts that the
/// aggregate needs (records referencing the skill that pass correctness).
struct SessionEntry {
    SessionSummary summary;
    std::map<std::string, int> skill_pass;
    std::map<std::string, int> proposed_pass;
    bool operator==(const SessionEntry&) const = default;
};

void to_json(json& j, const SessionEntry& e);
void from_json(const json& j, SessionEntry& e);

/// evolver/ directory: sessions.log, drained.index, decisions.log, .lock.
class EvolverStore {
public:
    explicit EvolverStore(fs::path dir);

    const fs::path& dir() const { return dir_; }
    fs::path sessions_path() const { return dir_ / "sessions.log"; }
    fs::path drained_path() const { return dir_ / "drained.index"; }
    fs::path decisions_path() const { return dir_ / "decisions.log"; }
    fs::path lock_path() const { return dir_ / ".lock"; }

    std::vector<SessionEntry> sessions() const;
    std::vector<std::string> drained() const;

private:
    fs::path dir_;
};

/// Holds the store lock; throws LockError when another evolver holds it.
class StoreLock {
public:
    explicit StoreLock(const EvolverStore& store);

private:
    std::unique_ptr<FileLock> lock_;
};

/// Task directories (containing history logs) under a task, run or runs root.
std::vector<fs::path> discover_task_dirs(const fs::path& root);

struct IngestReport {
    int new_sessions = 0;
    std::vector<std::string> diagnostics;
};

/// Summarizes every unseen run/task pair into the store. Idempotent.
IngestReport ingest(const std::vector<fs::path>& runs, EvolverStore& store, const SkillLibrary* lib = nullptr);

SessionEntry make_session(const std::string& session_id, const History& h, const fs::path& task_dir,
                          const RiskLookup& risk = {});

struct SkillGroup {
    std::string skill_id;
    /// Keyed by a `category/id` tag the model proposed; no library skill.
    bool proposed = false;
    std::vector<SessionSummary> sessions;
    int n_pass = 0;
    int n_promote = 0;
    double mean_delta = 0.0;
    Risk equivalence_risk = Risk::low;
};

/// Groups by referenced skill, plus one group per proposed tag. Proposed
/// groups are high risk.
std::vector<SkillGroup> aggregate(const std::vector<SessionEntry>& sessions, const SkillLibrary* lib = nullptr);

struct EvidenceThresholds {
    int tau_pass = 2;
    int tau_promote = 1;
};

struct Verdict {
    bool accepted = false;
    std::string reason;
};

Verdict verify(const SkillGroup& g, const EvidenceThresholds& t = {});

enum class DecisionKind { create_skill, improve_skill, skip };
std::string to_string(DecisionKind k);

struct EvolutionDecision {
    DecisionKind kind = DecisionKind::skip;
    SkillGroup group;
    Verdict verdict;
    std::optional<SkillFile> candidate_skill;
    std::string rationale;
};

/// Strategy/focus distributions, top hint tags and score-delta summary.
std::string evidence_digest(const SkillGroup& g, std::size_t cap = 1200);

/// Drafts through the provider under key `evolve/<skill_id>`. Provider
/// failure or an invalid draft downgrades to skip.
EvolutionDecision decide(const SkillGroup& g, const Verdict& v, const SkillLibrary& lib, Provider& provider);

/// Up to eight cases: sessions with promotions first, then lower avg_score.
std::vector<ReplayCase> select_replay_cases(const SkillGroup& g);

struct RouteOutcome {
    /// published | skipped | queued | duplicate | no_replay_cases
    std::string action;
    std::string job_id;
};

RouteOutcome route(const EvolutionDecision& d, PublicationMode mode, SkillLibrary& lib, const fs::path& queue);

struct EvolveReport {
    IngestReport ingest;
    std::vector<EvolutionDecision> decisions;
    std::vector<RouteOutcome> routes;
    int published = 0;
    int queued = 0;
};

/// ingest, aggregate, verify, decide and route under the store lock; every
/// decision is appended to decisions.log.
EvolveReport evolve(const std::vector<fs::path>& runs, EvolverStore& store, SkillLibrary& lib, Provider& provider,
                    PublicationMode mode, const fs::path& queue, const EvidenceThresholds& t = {});

} // namespace rtlevo
