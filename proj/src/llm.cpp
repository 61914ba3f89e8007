#include "rtlevo/llm.hpp"

#include "rtlevo/error.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <sstream>

namespace rtlevo {

namespace {

std::string fmt_num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

const char* kSystem =
    "You are an RTL design assistant. Reply with synthesizable Verilog-2005 inside a single ```verilog fenced "
    "block. Keep the given module header exactly as written.\n";

const char* kDirect = "Task {{task_id}}\n"
                      "{{description}}\n"
                      "\n"
                      "Module header (use verbatim):\n"
                      "{{header}}\n"
                      "{{skills}}{{plan}}\n"
                      "Write the complete Verilog module `{{module_name}}`. Output only Verilog.\n";

const char* kCrefReference =
    "Task {{task_id}}\n"
    "{{description}}\n"
    "\n"
    "Module header:\n"
    "{{header}}\n"
    "{{skills}}\n"
    "Before any Verilog, write a C-style functional reference for this module. Use fixed-width integer types "
    "(int8_t, int32_t, uint32_t), one function per clock step or combinational evaluation, and make every "
    "truncation, sign extension and rounding step explicit. Output only C code.\n";

const char* kCrefVerilog = "Task {{task_id}}\n"
                           "{{description}}\n"
                           "\n"
                           "C-style functional reference:\n"
                           "```c\n"
                           "{{reference}}\n"
                           "```\n"
                           "\n"
                           "Module header (use verbatim):\n"
                           "{{header}}\n"
                           "{{skills}}{{plan}}\n"
                           "Implement the reference as the complete Verilog module `{{module_name}}`, matching it "
                           "bit for bit. Output only Verilog.\n";

const char* kRepair = "Task {{task_id}}\n"
                      "{{description}}\n"
                      "\n"
                      "Module header (use verbatim):\n"
                      "{{header}}\n"
                      "\n"
                      "The current candidate fails evaluation:\n"
                      "```verilog\n"
                      "{{parent_rtl}}\n"
                      "```\n"
                      "\n"
                      "{{feedback}}\n"
                      "{{skills}}{{plan}}\n"
                      "Fix every reported problem and return the corrected complete module. Output only Verilog.\n";

const char* kOptimize = "Task {{task_id}}\n"
                        "{{description}}\n"
                        "\n"
                        "Module header (use verbatim):\n"
                        "{{header}}\n"
                        "\n"
                        "The current candidate passes all correctness checks:\n"
                        "```verilog\n"
                        "{{parent_rtl}}\n"
                        "```\n"
                        "\n"
                        "{{feedback}}\n"
                        "{{skills}}{{plan}}\n"
                        "Optimize the design for the reported metrics while preserving its exact function and "
                        "cycle behaviour. Return the complete module. Output only Verilog.\n";

std::string skills_section(const std::vector<SkillFile>& skills)
{
    if (skills.empty())
        return {};
    std::string out = "\nSkills:\n";
    for (auto& s : skills)
        out += "### " + s.name + " [" + s.skill_id + "]\n" + s.guidance + "\n";
    return out;
}

std::string plan_section(const DiversityPlan& plan, const FeedbackContext* fb)
{
    std::string out = "\nPlan:\n- " + focus_directive(plan.focus) + "\n";
    auto path = path_directive(plan.path_select);
    if (!path.empty()) {
        out += "- " + path + "\n";
        if (fb && !fb->hotspots.empty() && plan.path_select == PathSelect::structurally_complex) {
            out += "- Hotspots:";
            for (auto& h : fb->hotspots)
                out += " " + h + ";";
            out += "\n";
        }
        if (fb && plan.path_select == PathSelect::timing_critical) {
            if (auto it = fb->metrics.find("abc_delay_proxy"); it != fb->metrics.end())
                out += "- Current delay proxy: " + fmt_num(it->second) + "\n";
        }
    }
    return out;
}

std::map<std::string, std::string> base_vars(const PromptInputs& in)
{
    if (!in.task)
        throw PreconditionError("prompt needs a task");
    return {{"task_id", in.task->task_id},
            {"description", in.task->description},
            {"header", in.task->module_header},
            {"module_name", in.task->module_name()},
            {"skills", skills_section(in.skills)},
            {"plan", plan_section(in.plan, in.feedback)}};
}

Prompt make_prompt(const PromptInputs& in, const PromptTemplates& t, Strategy s, std::string user, double temp)
{
    Prompt p;
    p.system_text = t.get("system");
    p.user_text = std::move(user);
    p.strategy = s;
    for (auto& sk : in.skills)
        p.attached_skill_ids.push_back(sk.skill_id);
    p.token_budget_hint = in.token_budget_hint;
    p.temperature = temp;
    p.key = in.key;
    return p;
}

} // namespace

std::vector<std::string> FeedbackContext::hint_tags() const
{
    std::vector<std::string> out;
    for (auto& f : failures)
        for (auto& h : f.hint_tags)
            if (std::find(out.begin(), out.end(), h) == out.end())
                out.push_back(h);
    return out;
}

FeedbackContext build_feedback_context(const CandidateRecord& record, std::size_t cap)
{
    FeedbackContext ctx;
    ctx.source = record.candidate.version;
    ctx.source_passed = record.eligible;
    std::vector<std::pair<std::string, double>> cell_types;
    for (auto& r : record.results) {
        if (r.passed) {
            for (auto& [k, v] : r.metrics) {
                ctx.metrics[k] = v;
                if (k.rfind("cell_type:", 0) == 0)
                    cell_types.emplace_back(k.substr(10), v);
            }
            if (r.evaluator == "synthesis")
                ctx.has_synthesis = true;
            if (r.evaluator == "timing")
                ctx.has_timing = true;
            continue;
        }
        if (r.outcome == Outcome::tool_unavailable)
            continue;
        FailureNote note;
        note.evaluator = r.evaluator;
        note.outcome = r.outcome;
        std::string text = trim(r.feedback);
        if (r.outcome == Outcome::mismatch) {
            auto m = r.metrics.find("mismatch_count");
            auto n = r.metrics.find("total_samples");
            if (m != r.metrics.end() && n != r.metrics.end())
                text = "mismatch ratio " + fmt_num(m->second) + "/" + fmt_num(n->second) + "\n" + text;
        }
        note.feedback = truncate_with_marker(text, cap);
        note.hint_tags = extract_hint_tags(r.feedback);
        if (r.evaluator == "synthesis" && (r.outcome == Outcome::compile_error || r.outcome == Outcome::syntax_error) &&
            std::find(note.hint_tags.begin(), note.hint_tags.end(), "simplify_construct") == note.hint_tags.end())
            note.hint_tags.push_back("simplify_construct");
        ctx.failures.push_back(std::move(note));
    }
    std::sort(cell_types.begin(), cell_types.end(), [](auto& a, auto& b) {
        if (a.second != b.second)
            return a.second > b.second;
        return a.first < b.first;
    });
    for (std::size_t i = 0; i < cell_types.size() && i < 3; ++i)
        ctx.hotspots.push_back(cell_types[i].first + " x" + fmt_num(cell_types[i].second));
    return ctx;
}

std::string render_feedback(const FeedbackContext& ctx, std::size_t cap)
{
    std::string out = "Evaluator feedback";
    if (ctx.source)
        out += " for candidate " + ctx.source->str();
    out += ":\n";
    if (ctx.failures.empty())
        out += "(no failing evaluators)\n";
    for (auto& f : ctx.failures) {
        out += "[" + f.evaluator + "] " + to_string(f.outcome) + "\n";
        if (!f.feedback.empty())
            out += f.feedback + "\n";
        if (!f.hint_tags.empty()) {
            out += "hints:";
            for (auto& h : f.hint_tags)
                out += " " + h;
            out += "\n";
        }
    }
    if (!ctx.metrics.empty()) {
        out += "Metrics:";
        for (auto& [k, v] : ctx.metrics)
            if (k.rfind("cell_type:", 0) != 0)
                out += " " + k + "=" + fmt_num(v);
        out += "\n";
    }
    if (!ctx.hotspots.empty()) {
        out += "Hotspots:";
        for (auto& h : ctx.hotspots)
            out += " " + h + ";";
        out += "\n";
    }
    if (!ctx.recent_failures.empty()) {
        out += "Recent failed rounds:\n";
        for (auto& r : ctx.recent_failures)
            out += "- " + r + "\n";
    }
    return truncate_with_marker(out, cap);
}

void to_json(json& j, const FeedbackContext& c)
{
    json failures = json::array();
    for (auto& f : c.failures)
        failures.push_back(
            {{"evaluator", f.evaluator}, {"outcome", to_string(f.outcome)}, {"feedback", f.feedback}, {"hints", f.hint_tags}});
    j = json{{"source", c.source ? json(c.source->str()) : json(nullptr)},
             {"source_passed", c.source_passed},
             {"failures", failures},
             {"metrics", c.metrics},
             {"hotspots", c.hotspots},
             {"recent_failures", c.recent_failures}};
}

std::string focus_directive(Focus f)
{
    switch (f) {
    case Focus::combinational:
        return kCombinationalDirective;
    case Focus::sequential:
        return kSequentialDirective;
    case Focus::mixed:
        return kMixedDirective;
    }
    return {};
}

std::string path_directive(PathSelect p)
{
    switch (p) {
    case PathSelect::timing_critical:
        return "Path selection: target the longest combinational path reported by the timing proxy.";
    case PathSelect::structurally_complex:
        return "Path selection: simplify the structurally most complex region (largest cell groups).";
    case PathSelect::random_exploration:
        return "Path selection: explore an alternative micro-architecture for one region of the design.";
    case PathSelect::none:
        return {};
    }
    return {};
}

PromptTemplates::PromptTemplates()
{
    templates_ = {{"system", kSystem},
                  {"direct", kDirect},
                  {"cbridge_reference", kCrefReference},
                  {"cbridge_verilog", kCrefVerilog},
                  {"repair", kRepair},
                  {"optimize", kOptimize}};
}

PromptTemplates PromptTemplates::load(const fs::path& dir)
{
    PromptTemplates t;
    if (!fs::is_directory(dir))
        return t;
    const PromptTemplates builtin;
    for (auto& [name, text] : builtin.all()) {
        auto path = dir / (name + ".tmpl");
        if (fs::exists(path))
            t.set(name, read_file(path));
    }
    return t;
}

const std::string& PromptTemplates::get(const std::string& name) const
{
    auto it = templates_.find(name);
    if (it == templates_.end())
        throw ConfigError("unknown prompt template '" + name + "'");
    return it->second;
}

std::string PromptTemplates::render(const std::string& name, const std::map<std::string, std::string>& vars) const
{
    const std::string& text = get(name);
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string::npos)
            throw ConfigError("template " + name + ": unterminated placeholder");
        out += text.substr(pos, open - pos);
        std::string key = trim(text.substr(open + 2, close - open - 2));
        auto it = vars.find(key);
        if (it == vars.end())
            throw ConfigError("template " + name + ": no value for {{" + key + "}}");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

Prompt build_generation_prompt(const PromptInputs& in, const PromptTemplates& t)
{
    return make_prompt(in, t, Strategy::direct, t.render("direct", base_vars(in)), in.temperature);
}

Prompt build_cbridge_reference_prompt(const PromptInputs& in, const PromptTemplates& t)
{
    auto p = make_prompt(in, t, Strategy::c_bridge, t.render("cbridge_reference", base_vars(in)), in.temperature);
    p.key = in.key + ".cref";
    return p;
}

Prompt build_cbridge_verilog_prompt(const PromptInputs& in, const std::string& reference, const PromptTemplates& t)
{
    auto vars = base_vars(in);
    vars["reference"] =
        truncate_with_marker(trim(reference), static_cast<std::size_t>(std::max(1, in.token_budget_hint)) * 4);
    return make_prompt(in, t, Strategy::c_bridge, t.render("cbridge_verilog", vars), in.temperature);
}

Prompt build_repair_prompt(const PromptInputs& in, const std::string& parent_rtl, const PromptTemplates& t)
{
    auto vars = base_vars(in);
    vars["parent_rtl"] = trim(parent_rtl);
    FeedbackContext empty;
    const FeedbackContext& fb = in.feedback ? *in.feedback : empty;
    vars["feedback"] = render_feedback(fb);
    bool optimize = in.feedback && in.feedback->source_passed && in.feedback->failures.empty();
    return make_prompt(in, t, Strategy::repair, t.render(optimize ? "optimize" : "repair", vars),
                       in.repair_temperature);
}

// Providers ------------------------------------------------------------------

void validate_provider_config(const ProviderConfig& c)
{
    if (c.kind == "scripted") {
        if (c.script_dir.empty())
            throw ConfigError("scripted provider needs script_dir");
        if (!c.endpoint.empty())
            throw ConfigError("scripted provider must not set endpoint");
    } else if (c.kind == "http_chat") {
        if (c.endpoint.empty())
            throw ConfigError("http_chat provider needs endpoint");
        if (!c.script_dir.empty())
            throw ConfigError("http_chat provider must not set script_dir");
    } else {
        throw ConfigError("provider kind must be scripted or http_chat");
    }
    if (c.max_retries < 0)
        throw ConfigError("max_retries must be >= 0");
    if (c.timeout_ms <= 0)
        throw ConfigError("provider timeout must be > 0");
}

void to_json(json& j, const ProviderConfig& c)
{
    j = json{{"kind", c.kind},
             {"script_dir", c.script_dir.string()},
             {"endpoint", c.endpoint},
             {"base_path", c.base_path},
             {"model", c.model},
             {"api_key_env", c.api_key_env},
             {"max_retries", c.max_retries},
             {"timeout_ms", c.timeout_ms},
             {"backoff_ms", c.backoff_ms}};
    if (c.temperature)
        j["temperature"] = *c.temperature;
}

void from_json(const json& j, ProviderConfig& c)
{
    c = ProviderConfig{};
    c.kind = j.value("kind", c.kind);
    c.script_dir = j.value("script_dir", std::string());
    c.endpoint = j.value("endpoint", c.endpoint);
    c.base_path = j.value("base_path", c.base_path);
    c.model = j.value("model", c.model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
    if (j.contains("temperature") && !j.at("temperature").is_null())
        c.temperature = j.at("temperature").get<double>();
    validate_provider_config(c);
}

ScriptedProvider::ScriptedProvider(fs::path dir) : dir_(std::move(dir))
{
    if (!fs::is_directory(dir_))
        throw ConfigError("script directory not found: " + dir_.string());
}

std::string ScriptedProvider::generate(const Prompt& prompt)
{
    std::lock_guard lock(mu_);
    std::vector<fs::path> queue;
    if (auto p = dir_ / (prompt.key + ".response"); fs::exists(p))
        queue.push_back(p);
    for (int i = 1;; ++i) {
        auto p = dir_ / (prompt.key + "." + std::to_string(i) + ".response");
        if (!fs::exists(p))
            break;
        queue.push_back(p);
    }
    fs::path chosen;
    if (!queue.empty()) {
        std::size_t& cur = cursor_[prompt.key];
        chosen = queue[std::min(cur, queue.size() - 1)];
        ++cur;
    } else {
        auto slash = prompt.key.find('/');
        if (slash != std::string::npos) {
            auto p = dir_ / prompt.key.substr(0, slash) / "default.response";
            if (fs::exists(p))
                chosen = p;
        }
        if (chosen.empty() && fs::exists(dir_ / "default.response"))
            chosen = dir_ / "default.response";
    }
    if (chosen.empty())
        throw ProviderError("no scripted response for key '" + prompt.key + "'");
    std::string text = read_file(chosen);
    if (text.rfind("!provider_error", 0) == 0)
        throw ProviderError("scripted provider error for key '" + prompt.key + "'");
    return text;
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& c)
{
    validate_provider_config(c);
    if (c.kind == "scripted")
        return std::make_unique<ScriptedProvider>(c.script_dir);
    return std::make_unique<HttpChatProvider>(c);
}

// Extraction -----------------------------------------------------------------

namespace {

struct ModuleBlock {
    std::string name;
    std::string text;
};

std::vector<ModuleBlock> find_modules(const std::string& text)
{
    static const std::regex decl_re(R"((^|[^A-Za-z0-9_$])module\s+([A-Za-z_][A-Za-z0-9_$]*))");
    static const std::regex end_re(R"(\bendmodule\b)");
    std::vector<ModuleBlock> out;
    auto begin = text.cbegin();
    std::smatch m;
    while (std::regex_search(begin, text.cend(), m, decl_re)) {
        auto start = m[0].first + m[1].length();
        std::smatch e;
        if (!std::regex_search(start, text.cend(), e, end_re))
            break;
        auto stop = e[0].second;
        out.push_back({m[2].str(), std::string(start, stop)});
        begin = stop;
    }
    return out;
}

std::vector<std::string> fenced_blocks(const std::string& text)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("```", pos);
        if (open == std::string::npos)
            break;
        auto line_end = text.find('\n', open);
        if (line_end == std::string::npos)
            break;
        auto close = text.find("```", line_end + 1);
        if (close == std::string::npos) {
            out.push_back(text.substr(line_end + 1));
            break;
        }
        out.push_back(text.substr(line_end + 1, close - line_end - 1));
        pos = close + 3;
    }
    return out;
}

bool looks_like_body(const std::string& block)
{
    static const std::regex body_re(R"(\b(assign|always|reg|wire)\b)");
    return std::regex_search(block, body_re);
}

} // namespace

std::string extract_rtl(std::string_view raw_view, std::string_view module_header)
{
    std::string raw(raw_view);
    std::string want = module_name_of(module_header);
    auto blocks = fenced_blocks(raw);

    std::vector<ModuleBlock> modules;
    for (auto& b : blocks)
        for (auto& m : find_modules(b))
            modules.push_back(m);
    for (auto& m : find_modules(raw))
        modules.push_back(m);

    for (auto& m : modules)
        if (m.name == want)
            return trim(m.text) + "\n";
    if (!modules.empty() && want.empty())
        return trim(modules.front().text) + "\n";

    for (auto& b : blocks) {
        if (!looks_like_body(b) || !find_modules(b).empty())
            continue;
        std::string body = trim(b);
        static const std::regex trailing_end(R"(\bendmodule\s*$)");
        body = std::regex_replace(body, trailing_end, "");
        return trim(module_header) + "\n" + trim(body) + "\nendmodule\n";
    }
    if (!modules.empty())
        return trim(modules.front().text) + "\n";
    throw ExtractionError("no module in output");
}

std::vector<std::string> extract_proposed_skills(std::string_view raw)
{
    static const std::regex re(R"(proposed-skill:\s*([a-z_]+)/([A-Za-z0-9_.-]+))");
    std::vector<std::string> out;
    std::string text(raw);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        std::string id = (*it)[1].str() + "/" + (*it)[2].str();
        if (std::find(out.begin(), out.end(), id) == out.end())
            out.push_back(id);
    }
    return out;
}

} // namespace rtlevo
