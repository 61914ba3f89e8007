#pragma once

#include "rtlevo/model.hpp"
#include "rtlevo/skills.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace rtlevo {

// Feedback context -----------------------------------------------------------

struct FailureNote {
    std::string evaluator;
    Outcome outcome = Outcome::unknown_failure;
    std::string feedback;
    std::vector<std::string> hint_tags;
    bool operator==(const FailureNote&) const = default;
};

/// Structured feedback carried from the current major into prompts and the
/// diversity planner.
struct FeedbackContext {
    std::optional<VersionId> source;
    bool source_passed = false;
    std::vector<FailureNote> failures;
    std::map<std::string, double> metrics;
    /// Largest cell-type groups, for structural path selection.
    std::vector<std::string> hotspots;
    bool has_synthesis = false;
    bool has_timing = false;
    /// Digest lines of the last failed rounds, oldest first.
    std::vector<std::string> recent_failures;

    std::vector<std::string> hint_tags() const;
    bool operator==(const FeedbackContext&) const = default;
};

/// Per-evaluator failure notes with feedback capped at `cap` bytes.
FeedbackContext build_feedback_context(const CandidateRecord& record, std::size_t cap = 1500);

/// Deterministic prompt text for a context.
std::string render_feedback(const FeedbackContext& ctx, std::size_t cap = 6000);

void to_json(json& j, const FeedbackContext& c);

// Prompts --------------------------------------------------------------------

inline constexpr const char* kSequentialDirective =
    "Focus: sequential rewrite. Revisit register placement, reset handling and state updates while keeping the "
    "documented cycle behaviour.";
inline constexpr const char* kCombinationalDirective =
    "Focus: combinational rewrite. Restructure expressions (operator sharing, balanced trees, narrower "
    "intermediates) without adding registers.";
inline constexpr const char* kMixedDirective =
    "Focus: mixed rewrite. Combine expression restructuring with register-level changes where the interface "
    "allows it.";

std::string focus_directive(Focus f);
/// Empty for PathSelect::none.
std::string path_directive(PathSelect p);

struct Prompt {
    std::string system_text;
    std::string user_text;
    Strategy strategy = Strategy::direct;
    std::vector<std::string> attached_skill_ids;
    int token_budget_hint = 4096;
    double temperature = 0.8;
    /// Routing key for scripted replay, e.g. `task/2.3` or `task/2.3.cref`.
    std::string key;
};

/// Named templates with `{{placeholder}}` slots.
class PromptTemplates {
public:
    /// Built-in templates.
    PromptTemplates();
    /// Built-ins overridden by `<dir>/<name>.tmpl` files.
    static PromptTemplates load(const fs::path& dir);

    const std::string& get(const std::string& name) const;
    void set(const std::string& name, std::string text) { templates_[name] = std::move(text); }
    const std::map<std::string, std::string>& all() const { return templates_; }

    /// Throws ConfigError on a placeholder without a value.
    std::string render(const std::string& name, const std::map<std::string, std::string>& vars) const;

private:
    std::map<std::string, std::string> templates_;
};

struct PromptInputs {
    const TaskSpec* task = nullptr;
    std::vector<SkillFile> skills;
    DiversityPlan plan;
    const FeedbackContext* feedback = nullptr;
    std::string key;
    int token_budget_hint = 4096;
    double temperature = 0.8;
    double repair_temperature = 0.4;
};

Prompt build_generation_prompt(const PromptInputs& in, const PromptTemplates& t);
Prompt build_cbridge_reference_prompt(const PromptInputs& in, const PromptTemplates& t);
/// The reference is capped at four bytes per budget token.
Prompt build_cbridge_verilog_prompt(const PromptInputs& in, const std::string& reference, const PromptTemplates& t);
/// Frames the request as repair when the parent failed, else as optimization.
Prompt build_repair_prompt(const PromptInputs& in, const std::string& parent_rtl, const PromptTemplates& t);

// Providers ------------------------------------------------------------------

class Provider {
public:
    virtual ~Provider() = default;
    /// Throws ProviderError when no text can be produced.
    virtual std::string generate(const Prompt& prompt) = 0;
};

struct ProviderConfig {
    /// scripted | http_chat
    std::string kind = "scripted";
    fs::path script_dir;
    std::string endpoint;
    std::string base_path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env = "RTLEVO_API_KEY";
    std::optional<double> temperature;
    int max_retries = 3;
    std::int64_t timeout_ms = 60000;
    std::int64_t backoff_ms = 500;
};

void validate_provider_config(const ProviderConfig& c);
void to_json(json& j, const ProviderConfig& c);
void from_json(const json& j, ProviderConfig& c);

/// Serves keyed files from a directory: `<key>.response`, then
/// `<key>.1.response`, `<key>.2.response`, ... in call order (the last one
/// repeats), falling back to `<task>/default.response` and
/// `default.response`. A response starting with `!provider_error` raises.
class ScriptedProvider : public Provider {
public:
    explicit ScriptedProvider(fs::path dir);
    std::string generate(const Prompt& prompt) override;

private:
    fs::path dir_;
    std::mutex mu_;
    std::map<std::string, std::size_t> cursor_;
};

/// Chat-completions client (messages in, choices out).
class HttpChatProvider : public Provider {
public:
    explicit HttpChatProvider(ProviderConfig cfg);
    std::string generate(const Prompt& prompt) override;

private:
    ProviderConfig cfg_;
    std::string api_key_;
};

std::unique_ptr<Provider> make_provider(const ProviderConfig& c);

/// Extracts the module named like the header from fenced or bare text; a
/// fenced body without a declaration is wrapped in the header. Throws
/// ExtractionError when nothing usable is found.
std::string extract_rtl(std::string_view raw, std::string_view module_header);

/// `proposed-skill: <category>/<id>` lines in model output.
std::vector<std::string> extract_proposed_skills(std::string_view raw);

} // namespace rtlevo
