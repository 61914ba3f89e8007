#include "rtlevo/skills.hpp"

#include "rtlevo/error.hpp"
#include "rtlevo/llm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>

namespace rtlevo {

namespace {

const std::vector<std::pair<SkillCategory, std::string>>& category_names()
{
    static const std::vector<std::pair<SkillCategory, std::string>> names{
        {SkillCategory::functional_generation, "functional_generation"},
        {SkillCategory::simulator_repair, "simulator_repair"},
        {SkillCategory::synthesis_rewrite, "synthesis_rewrite"},
        {SkillCategory::timing_rewrite, "timing_rewrite"},
        {SkillCategory::rtl_optimization, "rtl_optimization"},
        {SkillCategory::downstream_codesign, "downstream_codesign"},
    };
    return names;
}

std::string format_weight(double w)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", w);
    return buf;
}

std::string triggers_text(const std::vector<Trigger>& triggers)
{
    std::string out;
    for (std::size_t i = 0; i < triggers.size(); ++i) {
        if (i)
            out += ", ";
        out += triggers[i].token;
        if (triggers[i].weight != 1.0)
            out += ":" + format_weight(triggers[i].weight);
    }
    return out;
}

std::vector<Trigger> parse_triggers(const std::string& text)
{
    std::vector<Trigger> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            continue;
        Trigger t;
        auto colon = item.find(':');
        t.token = trim(item.substr(0, colon));
        std::transform(t.token.begin(), t.token.end(), t.token.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (colon != std::string::npos) {
            try {
                t.weight = std::stod(trim(item.substr(colon + 1)));
            } catch (const std::exception&) {
                throw ParseError("bad trigger weight in '" + item + "'");
            }
        }
        out.push_back(t);
    }
    return out;
}

json registry_line(const std::string& id, const RegistryVersion& v)
{
    return json{{"schema_version", kSchemaVersion},
                {"skill_id", id},
                {"hash", v.hash},
                {"timestamp_ms", v.timestamp_ms},
                {"mode", to_string(v.mode)}};
}

} // namespace

std::string to_string(SkillCategory c)
{
    for (auto& [v, n] : category_names())
        if (v == c)
            return n;
    throw Error("unnamed skill category");
}

SkillCategory skill_category_from_string(std::string_view s)
{
    for (auto& [v, n] : category_names())
        if (n == s)
            return v;
    throw ParseError("unknown skill category '" + std::string(s) + "'");
}

std::string to_string(PublicationMode m) { return m == PublicationMode::immediate ? "immediate" : "validated"; }

PublicationMode publication_mode_from_string(std::string_view s)
{
    if (s == "immediate")
        return PublicationMode::immediate;
    if (s == "validated")
        return PublicationMode::validated;
    throw ParseError("unknown publication mode '" + std::string(s) + "'");
}

std::string compute_skill_hash(const SkillFile& s)
{
    return sha256_hex(s.name + "\n" + triggers_text(s.triggers) + "\n" + s.guidance);
}

void validate_skill(const SkillFile& s)
{
    static const std::regex id_re(R"([A-Za-z0-9_.-]+)");
    if (!std::regex_match(s.skill_id, id_re))
        throw ConfigError("skill id '" + s.skill_id + "' must be non-empty [A-Za-z0-9_.-]");
    if (trim(s.name).empty())
        throw ConfigError("skill " + s.skill_id + ": name is empty");
    if (s.triggers.empty())
        throw ConfigError("skill " + s.skill_id + ": triggers are empty");
    for (auto& t : s.triggers) {
        if (t.token.empty() || tokenize(t.token) != std::vector<std::string>{t.token})
            throw ConfigError("skill " + s.skill_id + ": trigger '" + t.token + "' is not a single lower-case token");
        if (!std::isfinite(t.weight) || t.weight <= 0)
            throw ConfigError("skill " + s.skill_id + ": trigger weight must be positive");
    }
    if (trim(s.guidance).empty())
        throw ConfigError("skill " + s.skill_id + ": guidance is empty");
    if (!s.version_hash.empty() && s.version_hash != compute_skill_hash(s))
        throw ConfigError("skill " + s.skill_id + ": version_hash does not match content");
}

std::string serialize_skill(const SkillFile& s)
{
    std::string out = "---\n";
    out += "id: " + s.skill_id + "\n";
    out += "name: " + s.name + "\n";
    out += "category: " + to_string(s.category) + "\n";
    out += "triggers: " + triggers_text(s.triggers) + "\n";
    out += "risk: " + to_string(s.equivalence_risk) + "\n";
    out += "---\n";
    out += s.guidance + "\n";
    return out;
}

SkillFile parse_skill(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || trim(line) != "---")
        throw ParseError("skill file must start with ---");
    std::map<std::string, std::string> fields;
    bool closed = false;
    while (std::getline(in, line)) {
        if (trim(line) == "---") {
            closed = true;
            break;
        }
        if (trim(line).empty())
            continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw ParseError("front matter line without ':': " + line);
        fields[trim(line.substr(0, colon))] = trim(line.substr(colon + 1));
    }
    if (!closed)
        throw ParseError("unterminated front matter");
    for (const char* key : {"id", "name", "category", "triggers"})
        if (!fields.count(key) || fields[key].empty())
            throw ParseError(std::string("missing ") + key);

    SkillFile s;
    s.skill_id = fields["id"];
    s.name = fields["name"];
    s.category = skill_category_from_string(fields["category"]);
    s.triggers = parse_triggers(fields["triggers"]);
    if (s.triggers.empty())
        throw ParseError("missing triggers");
    s.equivalence_risk = fields.count("risk") ? risk_from_string(fields["risk"]) : Risk::low;
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back())))
        body.pop_back();
    s.guidance = body;
    s.version_hash = compute_skill_hash(s);
    try {
        validate_skill(s);
    } catch (const ConfigError& e) {
        throw ParseError(e.what());
    }
    return s;
}

const SkillFile* SkillLibrary::find(const std::string& id) const
{
    auto it = skills.find(id);
    return it == skills.end() ? nullptr : &it->second;
}

int SkillLibrary::validated_count(const std::string& id) const
{
    auto it = registry.find(id);
    return it == registry.end() ? 0 : it->second.validated_count;
}

Risk SkillLibrary::risk_of(const std::string& id) const
{
    const auto* s = find(id);
    return s ? s->equivalence_risk : Risk::low;
}

SkillLibrary load_library(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw ConfigError("skill directory not found: " + dir.string());
    SkillLibrary lib;
    lib.dir = dir;

    std::vector<fs::path> files;
    for (auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".skill")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    for (auto& path : files) {
        SkillFile s;
        try {
            s = parse_skill(read_file(path));
        } catch (const Error& e) {
            lib.diagnostics.push_back(path.string() + ": " + e.what());
            continue;
        }
        if (auto it = lib.paths.find(s.skill_id); it != lib.paths.end())
            throw ConfigError("duplicate skill id '" + s.skill_id + "' in " + it->second.string() + " and " +
                              path.string());
        lib.paths[s.skill_id] = path;
        lib.skills[s.skill_id] = std::move(s);
    }

    if (fs::exists(lib.registry_path())) {
        int lineno = 0;
        for (auto& line : read_lines(lib.registry_path())) {
            ++lineno;
            if (trim(line).empty())
                continue;
            try {
                auto j = json::parse(line);
                std::string id = j.at("skill_id").get<std::string>();
                RegistryVersion v{j.at("hash").get<std::string>(), j.at("timestamp_ms").get<std::int64_t>(),
                                  publication_mode_from_string(j.at("mode").get<std::string>())};
                auto& entry = lib.registry[id];
                entry.skill_id = id;
                entry.history.push_back(v);
                if (v.mode == PublicationMode::validated)
                    ++entry.validated_count;
            } catch (const std::exception& e) {
                lib.diagnostics.push_back("registry.log:" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    return lib;
}

WriteOutcome write_skill(SkillLibrary& lib, SkillFile skill, PublicationMode mode, bool fail_before_rename)
{
    skill.version_hash = compute_skill_hash(skill);
    validate_skill(skill);
    fs::create_directories(lib.dir);
    FileLock lock(lib.dir / ".registry.lock");

    WriteOutcome out;
    auto reg = lib.registry.find(skill.skill_id);
    if (reg != lib.registry.end() && reg->second.current_hash() == skill.version_hash) {
        out.status = WriteStatus::skipped;
        out.entry = reg->second;
        return out;
    }

    fs::path path = lib.dir / to_string(skill.category) / (skill.skill_id + ".skill");
    fs::create_directories(path.parent_path());
    write_file_atomic(path, serialize_skill(skill), fail_before_rename);
    if (auto old = lib.paths.find(skill.skill_id); old != lib.paths.end() && old->second != path) {
        std::error_code ec;
        fs::remove(old->second, ec);
    }

    RegistryVersion v{skill.version_hash, now_ms(), mode};
    append_line_locked(lib.registry_path(), dump_text(registry_line(skill.skill_id, v)));

    auto& entry = lib.registry[skill.skill_id];
    entry.skill_id = skill.skill_id;
    entry.history.push_back(v);
    if (mode == PublicationMode::validated)
        ++entry.validated_count;
    lib.paths[skill.skill_id] = path;
    lib.skills[skill.skill_id] = std::move(skill);

    out.status = WriteStatus::written;
    out.entry = entry;
    return out;
}

void to_json(json& j, const RetrievalConfig& c)
{
    j = json{{"enabled", c.enabled},
             {"limit", c.limit},
             {"boost_per_validated", c.boost_per_validated},
             {"boost_cap", c.boost_cap},
             {"static_set", c.static_set}};
}

void from_json(const json& j, RetrievalConfig& c)
{
    c = RetrievalConfig{};
    c.enabled = j.value("enabled", c.enabled);
    c.limit = j.value("limit", c.limit);
    c.boost_per_validated = j.value("boost_per_validated", c.boost_per_validated);
    c.boost_cap = j.value("boost_cap", c.boost_cap);
    c.static_set = j.value("static_set", c.static_set);
    if (c.limit < 0)
        throw ConfigError("retrieval limit must be >= 0");
    if (c.boost_per_validated < 0 || c.boost_cap < 0)
        throw ConfigError("retrieval boost must be >= 0");
}

std::set<std::string> retrieval_context(const TaskSpec& task, const std::vector<std::string>& hint_tags,
                                        const DiversityPlan& plan)
{
    std::set<std::string> ctx;
    for (auto& t : tokenize(task.description))
        ctx.insert(t);
    for (auto& tag : task.tags)
        for (auto& t : tokenize(tag))
            ctx.insert(t);
    for (auto& h : hint_tags)
        for (auto& t : tokenize(h))
            ctx.insert(t);
    auto add_plan_tag = [&](const std::string& tag) {
        ctx.insert(tag);
        std::stringstream ss(tag);
        std::string part;
        while (std::getline(ss, part, '_'))
            if (!part.empty())
                ctx.insert(part);
    };
    add_plan_tag(to_string(plan.focus));
    if (plan.path_select != PathSelect::none)
        add_plan_tag(to_string(plan.path_select));
    return ctx;
}

double trigger_match(const SkillFile& s, const std::set<std::string>& context)
{
    double m = 0.0;
    for (auto& t : s.triggers)
        if (context.count(t.token))
            m += t.weight;
    return m;
}

std::vector<RankedSkill> retrieve(const SkillLibrary& lib, const TaskSpec& task,
                                  const std::vector<std::string>& hint_tags, const DiversityPlan& plan,
                                  const RetrievalConfig& cfg)
{
    std::vector<RankedSkill> out;
    if (cfg.limit <= 0)
        return out;
    if (!cfg.enabled) {
        for (auto& id : cfg.static_set) {
            if (!lib.find(id))
                continue;
            out.push_back({SkillRef{id, RetrievalMode::static_set}, 0.0, 0.0, 0.0});
            if (static_cast<int>(out.size()) == cfg.limit)
                break;
        }
        return out;
    }
    auto ctx = retrieval_context(task, hint_tags, plan);
    for (auto& [id, skill] : lib.skills) {
        double match = trigger_match(skill, ctx);
        if (match <= 0)
            continue;
        double boost = std::min(cfg.boost_cap, cfg.boost_per_validated * lib.validated_count(id));
        out.push_back({SkillRef{id, RetrievalMode::retrieved}, match, boost, match + boost});
    }
    std::sort(out.begin(), out.end(), [](const RankedSkill& a, const RankedSkill& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.ref.skill_id < b.ref.skill_id;
    });
    if (static_cast<int>(out.size()) > cfg.limit)
        out.resize(static_cast<std::size_t>(cfg.limit));
    return out;
}

std::vector<SkillFile> shipped_skills()
{
    auto make = [](std::string id, std::string name, SkillCategory cat, std::string triggers, Risk risk,
                   std::string guidance) {
        SkillFile s;
        s.skill_id = std::move(id);
        s.name = std::move(name);
        s.category = cat;
        s.triggers = parse_triggers(triggers);
        s.equivalence_risk = risk;
        s.guidance = std::move(guidance);
        s.version_hash = compute_skill_hash(s);
        return s;
    };
    return {
        make("module_contract", "Complete module from a header", SkillCategory::functional_generation,
             "module, header, combinational, output, compute, description", Risk::low,
             "Copy the module header verbatim, including port order, widths and signedness.\n"
             "Give every combinational output a value on every path (default assignment first) so no latch is "
             "inferred.\n"
             "Prefer continuous assignments for pure datapath logic and one always block per register group.\n"
             "Finish with exactly one endmodule and no testbench code."),
        make("sign_width_repair", "Signedness, width and reset repair", SkillCategory::simulator_repair,
             "mismatch, signedness:2, bit_width:2, reset:1.5, signed, overflow, wraps", Risk::low,
             "When outputs differ only for negative operands, declare operands and intermediates signed or wrap "
             "them in $signed(); a single unsigned operand makes the whole expression unsigned.\n"
             "Size intermediates for the full result: an a-bit by b-bit product needs a+b bits, a sum of n terms "
             "needs ceil(log2 n) extra bits.\n"
             "Truncate only at the final assignment and only when the description says the result wraps.\n"
             "Drive every register in the reset branch with the documented reset value."),
        make("synthesizable_subset", "Keep to the synthesizable subset", SkillCategory::synthesis_rewrite,
             "simplify_construct:2, unsupported, compile_error, syntax, initial, synthesis, loop", Risk::low,
             "Remove initial blocks, $display and delays from design code.\n"
             "Replace while loops and data-dependent loop bounds with for loops over constants.\n"
             "Avoid real, string and class types; use plain reg/wire vectors.\n"
             "Replace functions with side effects by continuous assignments."),
        make("pipeline_critical_path", "Cut the critical path", SkillCategory::timing_rewrite,
             "timing_critical:2, timing, delay, critical, pipeline, latency, sequential", Risk::high,
             "Find the longest combinational chain (usually multiply then add) and balance it: use adder trees "
             "instead of linear accumulation.\n"
             "Only insert pipeline registers when the task allows extra latency; otherwise restructure "
             "expressions.\n"
             "Keep reset and enable behaviour of existing registers unchanged."),
        make("share_and_narrow", "Share operators and narrow datapaths", SkillCategory::rtl_optimization,
             "structurally_complex:2, area, mux, optimize, cells, wire, ppa, combinational", Risk::high,
             "Share a single arithmetic unit between mutually exclusive cases instead of duplicating it behind a "
             "mux.\n"
             "Compute at the narrowest width that still holds the exact result, then sign-extend once.\n"
             "Replace comparisons against constants with bit tests where the encoding allows.\n"
             "Remove logic whose result never reaches an output."),
        make("mixed_precision_datapath", "Mixed-precision GEMM datapaths", SkillCategory::downstream_codesign,
             "gemm:2, mixed_precision:2, mac, dot, accumulate, requantize, int4, int8, product, saturate",
             Risk::low,
             "Keep operand widths native (4-bit activations, 8-bit weights) and sign-extend products to the "
             "accumulator width only once.\n"
             "Use one multiplier per lane; a dot product is a balanced sum of lane products.\n"
             "For requantization, shift arithmetically, round from the discarded bits (ties to even when "
             "specified) and saturate after rounding.\n"
             "Register the accumulator once per cycle; avoid extra pipeline stages unless latency is allowed."),
    };
}

int init_skill_library(const fs::path& dir)
{
    fs::create_directories(dir);
    SkillLibrary lib = load_library(dir);
    int written = 0;
    for (auto& s : shipped_skills())
        if (write_skill(lib, s, PublicationMode::immediate).status == WriteStatus::written)
            ++written;
    fs::create_directories(dir / "templates");
    const PromptTemplates builtin;
    for (auto& [name, text] : builtin.all()) {
        auto path = dir / "templates" / (name + ".tmpl");
        if (!fs::exists(path))
            write_file_atomic(path, text);
    }
    return written;
}

} // namespace rtlevo
