#pragma once

#include "rtlevo/model.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rtlevo {

enum class SkillCategory {
    functional_generation,
    simulator_repair,
    synthesis_rewrite,
    timing_rewrite,
    rtl_optimization,
    downstream_codesign,
};

std::string to_string(SkillCategory c);
SkillCategory skill_category_from_string(std::string_view s);

struct Trigger {
    std::string token;
    double weight = 1.0;
    bool operator==(const Trigger&) const = default;
};

struct SkillFile {
    std::string skill_id;
    std::string name;
    SkillCategory category = SkillCategory::functional_generation;
    std::vector<Trigger> triggers;
    std::string guidance;
    Risk equivalence_risk = Risk::low;
    /// Always digest(name + triggers + guidance); kept in sync by the helpers.
    std::string version_hash;

    bool operator==(const SkillFile&) const = default;
};

std::string compute_skill_hash(const SkillFile& s);
/// Throws ConfigError naming the violated field.
void validate_skill(const SkillFile& s);

/// Front matter between `---` lines, then the guidance body.
std::string serialize_skill(const SkillFile& s);
/// Throws ParseError on a malformed file; the hash is recomputed.
SkillFile parse_skill(std::string_view text);

enum class PublicationMode { immediate, validated };
std::string to_string(PublicationMode m);
PublicationMode publication_mode_from_string(std::string_view s);

struct RegistryVersion {
    std::string hash;
    std::int64_t timestamp_ms = 0;
    PublicationMode mode = PublicationMode::immediate;
    bool operator==(const RegistryVersion&) const = default;
};

struct RegistryEntry {
    std::string skill_id;
    std::vector<RegistryVersion> history;
    int validated_count = 0;

    const std::string& current_hash() const { return history.back().hash; }
    bool operator==(const RegistryEntry&) const = default;
};

struct SkillLibrary {
    fs::path dir;
    std::map<std::string, SkillFile> skills;
    std::map<std::string, fs::path> paths;
    std::map<std::string, RegistryEntry> registry;
    std::vector<std::string> diagnostics;

    const SkillFile* find(const std::string& id) const;
    int validated_count(const std::string& id) const;
    Risk risk_of(const std::string& id) const;
    fs::path registry_path() const { return dir / "registry.log"; }
};

/// Loads `<dir>/<category>/<id>.skill` files and replays the registry.
/// Malformed files are skipped with a diagnostic; duplicate ids throw
/// ConfigError naming both paths.
SkillLibrary load_library(const fs::path& dir);

enum class WriteStatus { written, skipped };

struct WriteOutcome {
    WriteStatus status = WriteStatus::skipped;
    RegistryEntry entry;
};

/// Atomic file write plus a registry append. Republishing the current hash
/// is a skip and leaves everything untouched.
WriteOutcome write_skill(SkillLibrary& lib, SkillFile skill, PublicationMode mode,
                         bool fail_before_rename = false);

struct RetrievalConfig {
    bool enabled = true;
    int limit = 3;
    double boost_per_validated = 0.5;
    double boost_cap = 2.0;
    /// Skill ids returned when retrieval is disabled.
    std::vector<std::string> static_set;
};

void to_json(json& j, const RetrievalConfig& c);
void from_json(const json& j, RetrievalConfig& c);

struct RankedSkill {
    SkillRef ref;
    double match = 0.0;
    double boost = 0.0;
    double score = 0.0;
};

/// Context tokens from the task text and tags, feedback hint tags and the
/// diversity plan.
std::set<std::string> retrieval_context(const TaskSpec& task, const std::vector<std::string>& hint_tags,
                                        const DiversityPlan& plan);

double trigger_match(const SkillFile& s, const std::set<std::string>& context);

/// Top `limit` skills with a positive trigger match, by descending
/// match + boost, ties by skill id.
std::vector<RankedSkill> retrieve(const SkillLibrary& lib, const TaskSpec& task,
                                  const std::vector<std::string>& hint_tags, const DiversityPlan& plan,
                                  const RetrievalConfig& cfg);

/// The six skills written by `init-skills`.
std::vector<SkillFile> shipped_skills();

/// Writes the shipped skills (immediate mode) and prompt templates into `dir`.
/// Existing identical skills are skipped. Returns the number written.
int init_skill_library(const fs::path& dir);

} // namespace rtlevo
