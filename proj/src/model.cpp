#include "rtlevo/model.hpp"

#include "rtlevo/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <regex>

namespace rtlevo {

namespace {

template <typename E, std::size_t N>
struct EnumNames {
    std::array<std::pair<E, std::string_view>, N> entries;

    std::string name(E e) const
    {
        for (auto& [v, n] : entries)
            if (v == e)
                return std::string(n);
        throw Error("unnamed enum value");
    }
    E parse(std::string_view s, std::string_view what) const
    {
        for (auto& [v, n] : entries)
            if (n == s)
                return v;
        throw ParseError("unknown " + std::string(what) + " '" + std::string(s) + "'");
    }
};

constexpr EnumNames<Outcome, 7> kOutcome{{{
    {Outcome::passed, "passed"},
    {Outcome::mismatch, "mismatch"},
    {Outcome::compile_error, "compile_error"},
    {Outcome::syntax_error, "syntax_error"},
    {Outcome::timeout, "timeout"},
    {Outcome::unknown_failure, "unknown_failure"},
    {Outcome::tool_unavailable, "tool_unavailable"},
}}};
constexpr EnumNames<Strategy, 3> kStrategy{{{
    {Strategy::direct, "direct"},
    {Strategy::c_bridge, "c_bridge"},
    {Strategy::repair, "repair"},
}}};
constexpr EnumNames<PathSelect, 4> kPathSelect{{{
    {PathSelect::timing_critical, "timing_critical"},
    {PathSelect::structurally_complex, "structurally_complex"},
    {PathSelect::random_exploration, "random_exploration"},
    {PathSelect::none, "none"},
}}};
constexpr EnumNames<Focus, 3> kFocus{{{
    {Focus::combinational, "combinational"},
    {Focus::sequential, "sequential"},
    {Focus::mixed, "mixed"},
}}};
constexpr EnumNames<RetrievalMode, 2> kRetrieval{{{
    {RetrievalMode::static_set, "static"},
    {RetrievalMode::retrieved, "retrieved"},
}}};
constexpr EnumNames<Risk, 2> kRisk{{{
    {Risk::low, "low"},
    {Risk::high, "high"},
}}};

template <typename T>
std::optional<T> opt_get(const json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null())
        return std::nullopt;
    return it->get<T>();
}

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v)
{
    if (v)
        j[key] = *v;
}

void check_finite(double v, const char* what)
{
    if (!std::isfinite(v))
        throw Error(std::string("non-finite value in ") + what);
}

} // namespace

std::string to_string(Outcome o) { return kOutcome.name(o); }
std::string to_string(Strategy s) { return kStrategy.name(s); }
std::string to_string(PathSelect p) { return kPathSelect.name(p); }
std::string to_string(Focus f) { return kFocus.name(f); }
std::string to_string(RetrievalMode m) { return kRetrieval.name(m); }
std::string to_string(Risk r) { return kRisk.name(r); }

Outcome outcome_from_string(std::string_view s) { return kOutcome.parse(s, "outcome"); }
Strategy strategy_from_string(std::string_view s) { return kStrategy.parse(s, "strategy"); }
PathSelect path_select_from_string(std::string_view s) { return kPathSelect.parse(s, "path_select"); }
Focus focus_from_string(std::string_view s) { return kFocus.parse(s, "focus"); }
RetrievalMode retrieval_mode_from_string(std::string_view s) { return kRetrieval.parse(s, "retrieval mode"); }
Risk risk_from_string(std::string_view s) { return kRisk.parse(s, "risk"); }

// --- TaskSpec ---------------------------------------------------------------

std::string module_name_of(std::string_view header)
{
    static const std::regex re(R"(\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*))");
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(header.begin(), header.end(), m, re))
        return m[1].str();
    return {};
}

std::string TaskSpec::module_name() const { return module_name_of(module_header); }

void validate_task_spec(const TaskSpec& task)
{
    if (task.task_id.empty())
        throw ConfigError("task_id is empty");
    if (trim(task.description).empty())
        throw ConfigError("task " + task.task_id + ": description is empty");
    static const std::regex module_kw(R"(\bmodule\b)");
    static const std::regex endmodule_kw(R"(\bendmodule\b)");
    auto begin = std::sregex_iterator(task.module_header.begin(), task.module_header.end(), module_kw);
    auto count = std::distance(begin, std::sregex_iterator());
    if (count != 1 || task.module_name().empty())
        throw ConfigError("task " + task.task_id + ": module_header must contain exactly one module declaration");
    if (std::regex_search(task.module_header, endmodule_kw))
        throw ConfigError("task " + task.task_id + ": module_header must not contain endmodule");
    if (task.module_header.find('(') == std::string::npos && task.module_header.find(';') == std::string::npos)
        throw ConfigError("task " + task.task_id + ": module_header has no port list");
}

void to_json(json& j, const TaskSpec& t)
{
    j = json{{"task_id", t.task_id},
             {"description", t.description},
             {"module_header", t.module_header},
             {"visible_testbench", t.visible_testbench.string()},
             {"tags", t.tags}};
    json extra = json::array();
    for (auto& p : t.extra_sources)
        extra.push_back(p.string());
    j["extra_sources"] = extra;
    put_opt(j, "heldout_profile", t.heldout_profile);
}

void from_json(const json& j, TaskSpec& t)
{
    t.task_id = j.at("task_id").get<std::string>();
    t.description = j.at("description").get<std::string>();
    t.module_header = j.at("module_header").get<std::string>();
    t.visible_testbench = j.value("visible_testbench", std::string{});
    t.extra_sources.clear();
    if (j.contains("extra_sources"))
        for (auto& p : j["extra_sources"])
            t.extra_sources.emplace_back(p.get<std::string>());
    t.heldout_profile = opt_get<std::string>(j, "heldout_profile");
    t.tags = j.value("tags", std::vector<std::string>{});
}

TaskSpec load_task_spec(const fs::path& path)
{
    TaskSpec t;
    try {
        t = json::parse(read_file(path)).get<TaskSpec>();
    } catch (const json::exception& e) {
        throw ConfigError("malformed task document " + path.string() + ": " + e.what());
    } catch (const StorageError& e) {
        throw ConfigError(e.what());
    }
    auto base = path.parent_path();
    auto resolve = [&](fs::path& p) {
        if (!p.empty() && p.is_relative())
            p = fs::weakly_canonical(base / p);
    };
    resolve(t.visible_testbench);
    for (auto& p : t.extra_sources)
        resolve(p);
    validate_task_spec(t);
    return t;
}

void save_task_spec(const TaskSpec& task, const fs::path& path)
{
    write_file_atomic(path, dump_text(json(task), 2) + "\n");
}

// --- Candidates and results --------------------------------------------------

void to_json(json& j, const VersionId& v) { j = json{{"major", v.major}, {"minor", v.minor}}; }
void from_json(const json& j, VersionId& v)
{
    v.major = j.at("major").get<int>();
    v.minor = j.at("minor").get<int>();
}

void to_json(json& j, const DiversityPlan& p)
{
    j = json{{"path_select", to_string(p.path_select)}, {"focus", to_string(p.focus)}};
}
void from_json(const json& j, DiversityPlan& p)
{
    p.path_select = path_select_from_string(j.at("path_select").get<std::string>());
    p.focus = focus_from_string(j.at("focus").get<std::string>());
}

void to_json(json& j, const SkillRef& s) { j = json{{"skill_id", s.skill_id}, {"mode", to_string(s.mode)}}; }
void from_json(const json& j, SkillRef& s)
{
    s.skill_id = j.at("skill_id").get<std::string>();
    s.mode = retrieval_mode_from_string(j.at("mode").get<std::string>());
}

void to_json(json& j, const RtlCandidate& c)
{
    j = json{{"version", c.version},
             {"rtl_text", c.rtl_text},
             {"strategy", to_string(c.strategy)},
             {"plan", c.plan},
             {"skill_refs", c.skill_refs},
             {"notes", c.notes},
             {"proposed_skills", c.proposed_skills}};
    put_opt(j, "parent", c.parent);
}
void from_json(const json& j, RtlCandidate& c)
{
    c.version = j.at("version").get<VersionId>();
    c.rtl_text = j.at("rtl_text").get<std::string>();
    c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    c.plan = j.at("plan").get<DiversityPlan>();
    c.skill_refs = j.value("skill_refs", std::vector<SkillRef>{});
    c.parent = opt_get<VersionId>(j, "parent");
    c.notes = j.value("notes", std::vector<std::string>{});
    c.proposed_skills = j.value("proposed_skills", std::vector<std::string>{});
    if (c.strategy == Strategy::repair && !c.parent)
        throw ParseError("repair candidate without parent");
}

EvaluatorResult make_result(std::string evaluator, Outcome outcome, std::string feedback,
                            std::map<std::string, double> metrics)
{
    EvaluatorResult r;
    r.evaluator = std::move(evaluator);
    r.outcome = outcome;
    r.passed = outcome == Outcome::passed;
    r.feedback = std::move(feedback);
    r.metrics = std::move(metrics);
    if (!r.passed && r.feedback.empty())
        r.feedback = r.evaluator + ": " + to_string(outcome);
    return r;
}

void validate_result(const EvaluatorResult& r)
{
    if (r.passed != (r.outcome == Outcome::passed))
        throw ParseError("result " + r.evaluator + ": passed flag disagrees with outcome");
    if (!r.passed && r.feedback.empty())
        throw ParseError("result " + r.evaluator + ": failure without feedback");
    for (auto& [k, v] : r.metrics)
        check_finite(v, k.c_str());
}

void to_json(json& j, const EvaluatorResult& r)
{
    for (auto& [k, v] : r.metrics)
        check_finite(v, k.c_str());
    j = json{{"evaluator", r.evaluator},
             {"passed", r.passed},
             {"outcome", to_string(r.outcome)},
             {"metrics", r.metrics},
             {"feedback", r.feedback}};
}
void from_json(const json& j, EvaluatorResult& r)
{
    r.evaluator = j.at("evaluator").get<std::string>();
    r.passed = j.at("passed").get<bool>();
    r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    r.metrics = j.value("metrics", std::map<std::string, double>{});
    r.feedback = j.value("feedback", std::string{});
    validate_result(r);
}

const EvaluatorResult* CandidateRecord::result(std::string_view evaluator) const
{
    for (auto& r : results)
        if (r.evaluator == evaluator)
            return &r;
    return nullptr;
}

void to_json(json& j, const CandidateRecord& r)
{
    check_finite(r.score, "score");
    j = json{{"task_id", r.task_id},
             {"candidate", r.candidate},
             {"results", r.results},
             {"score", r.score},
             {"eligible", r.eligible},
             {"breakdown", r.breakdown},
             {"artifacts", r.artifacts},
             {"wall_time_ms", r.wall_time_ms},
             {"timestamp_ms", r.timestamp_ms}};
}
void from_json(const json& j, CandidateRecord& r)
{
    r.task_id = j.at("task_id").get<std::string>();
    r.candidate = j.at("candidate").get<RtlCandidate>();
    r.results = j.at("results").get<std::vector<EvaluatorResult>>();
    r.score = j.at("score").get<double>();
    r.eligible = j.at("eligible").get<bool>();
    r.breakdown = j.value("breakdown", std::map<std::string, double>{});
    r.artifacts = j.value("artifacts", std::map<std::string, std::vector<std::string>>{});
    r.wall_time_ms = j.value("wall_time_ms", std::map<std::string, std::int64_t>{});
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
}

void to_json(json& j, const MajorRecord& r)
{
    j = json{{"task_id", r.task_id},
             {"major", r.major},
             {"improve", r.improve},
             {"promoted", r.promoted},
             {"promoted_artifact", r.promoted_artifact},
             {"minors_evaluated", r.minors_evaluated},
             {"timestamp_ms", r.timestamp_ms}};
    put_opt(j, "selected_minor", r.selected_minor);
    put_opt(j, "selected_score", r.selected_score);
    put_opt(j, "gate_result", r.gate_result);
    put_opt(j, "previous_score", r.previous_score);
    put_opt(j, "score", r.score);
    put_opt(j, "baseline_record", r.baseline_record);
}
void from_json(const json& j, MajorRecord& r)
{
    r.task_id = j.at("task_id").get<std::string>();
    r.major = j.at("major").get<int>();
    r.improve = j.value("improve", false);
    r.promoted = j.at("promoted").get<bool>();
    r.promoted_artifact = j.value("promoted_artifact", std::string{});
    r.minors_evaluated = j.value("minors_evaluated", 0);
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    r.selected_minor = opt_get<int>(j, "selected_minor");
    r.selected_score = opt_get<double>(j, "selected_score");
    r.gate_result = opt_get<EvaluatorResult>(j, "gate_result");
    r.previous_score = opt_get<double>(j, "previous_score");
    r.score = opt_get<double>(j, "score");
    r.baseline_record = opt_get<CandidateRecord>(j, "baseline_record");
    if (r.promoted && !r.selected_minor)
        throw ParseError("promoted major without selected minor");
    if (r.promoted && r.gate_result && !r.gate_result->passed)
        throw ParseError("promoted major with failed gate");
}

void to_json(json& j, const SessionSummary& s)
{
    j = json{{"session_id", s.session_id},
             {"task_id", s.task_id},
             {"referenced_skills", s.referenced_skills},
             {"pass_count", s.pass_count},
             {"promote_count", s.promote_count},
             {"record_count", s.record_count},
             {"avg_score", s.avg_score},
             {"score_deltas", s.score_deltas},
             {"strategy", to_string(s.strategy)},
             {"path_select", to_string(s.path_select)},
             {"focus", to_string(s.focus)},
             {"strategy_counts", s.strategy_counts},
             {"path_select_counts", s.path_select_counts},
             {"focus_counts", s.focus_counts},
             {"hint_tag_counts", s.hint_tag_counts},
             {"equivalence_risk", to_string(s.equivalence_risk)},
             {"proposed_skills", s.proposed_skills},
             {"task_spec_path", s.task_spec_path},
             {"evaluator_config_path", s.evaluator_config_path}};
}
void from_json(const json& j, SessionSummary& s)
{
    s.session_id = j.at("session_id").get<std::string>();
    s.task_id = j.at("task_id").get<std::string>();
    s.referenced_skills = j.value("referenced_skills", std::vector<std::string>{});
    s.pass_count = j.at("pass_count").get<int>();
    s.promote_count = j.at("promote_count").get<int>();
    s.record_count = j.value("record_count", 0);
    s.avg_score = j.at("avg_score").get<double>();
    s.score_deltas = j.value("score_deltas", std::vector<double>{});
    s.strategy = strategy_from_string(j.value("strategy", std::string("direct")));
    s.path_select = path_select_from_string(j.value("path_select", std::string("none")));
    s.focus = focus_from_string(j.value("focus", std::string("combinational")));
    s.strategy_counts = j.value("strategy_counts", std::map<std::string, int>{});
    s.path_select_counts = j.value("path_select_counts", std::map<std::string, int>{});
    s.focus_counts = j.value("focus_counts", std::map<std::string, int>{});
    s.hint_tag_counts = j.value("hint_tag_counts", std::map<std::string, int>{});
    s.equivalence_risk = risk_from_string(j.value("equivalence_risk", std::string("low")));
    s.proposed_skills = j.value("proposed_skills", std::vector<std::string>{});
    s.task_spec_path = j.value("task_spec_path", std::string{});
    s.evaluator_config_path = j.value("evaluator_config_path", std::string{});
}

// --- History -----------------------------------------------------------------

std::string encode_minor_line(const CandidateRecord& r)
{
    json j = r;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "minor";
    return dump_text(j);
}

std::string encode_major_line(const MajorRecord& r)
{
    json j = r;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "major";
    return dump_text(j);
}

HistorySink::HistorySink(fs::path task_dir) : dir_(std::move(task_dir))
{
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
        throw StorageError("cannot create run directory " + dir_.string());
}

void HistorySink::record_minor(const CandidateRecord& r)
{
    auto line = encode_minor_line(r);
    std::lock_guard lock(mu_);
    append_line_locked(minors_path(), line);
}

void HistorySink::record_major(const MajorRecord& r)
{
    auto line = encode_major_line(r);
    std::lock_guard lock(mu_);
    append_line_locked(majors_path(), line);
}

namespace {

template <typename T>
void parse_log(const fs::path& path, std::string_view kind, std::vector<T>& out, History& h)
{
    std::error_code ec;
    if (!fs::exists(path, ec)) {
        h.warnings.push_back("missing history file " + path.string());
        return;
    }
    auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        if (trim(line).empty())
            continue;
        try {
            auto j = json::parse(line);
            int version = j.at("schema_version").get<int>();
            if (version != kSchemaVersion)
                throw ParseError("unsupported schema_version " + std::to_string(version));
            if (j.value("kind", std::string{}) != kind)
                throw ParseError("expected kind '" + std::string(kind) + "'");
            out.push_back(j.get<T>());
        } catch (const std::exception& e) {
            h.diagnostics.push_back({path.string(), static_cast<int>(i + 1), e.what()});
        }
    }
}

} // namespace

History parse_history(const fs::path& task_dir)
{
    History h;
    parse_log(task_dir / "minors.log", "minor", h.minors, h);
    parse_log(task_dir / "majors.log", "major", h.majors, h);
    return h;
}

// --- Session summaries -------------------------------------------------------

bool correctness_pass(const CandidateRecord& r)
{
    const auto* func = r.result("functional");
    const auto* eda = r.result("eda");
    if (!func && !eda)
        return false;
    if (func && !func->passed)
        return false;
    if (eda) {
        auto it = eda->metrics.find("sec_pass");
        if (it == eda->metrics.end() || it->second != 1.0)
            return false;
    }
    return true;
}

std::vector<std::string> extract_hint_tags(std::string_view feedback)
{
    static const std::regex re(R"(\[hint:([a-z0-9_]+)\])");
    std::vector<std::string> tags;
    std::string text(feedback);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        auto tag = (*it)[1].str();
        if (std::find(tags.begin(), tags.end(), tag) == tags.end())
            tags.push_back(tag);
    }
    return tags;
}

namespace {

template <typename E>
E dominant(const std::map<std::string, int>& counts, E fallback, E (*parse)(std::string_view))
{
    const std::pair<const std::string, int>* best = nullptr;
    for (auto& kv : counts)
        if (!best || kv.second > best->second)
            best = &kv;
    return best ? parse(best->first) : fallback;
}

} // namespace

SessionSummary summarize_session(const std::string& session_id,
                                 const std::vector<CandidateRecord>& records,
                                 const std::vector<MajorRecord>& majors,
                                 const RiskLookup& risk)
{
    if (records.empty())
        throw PreconditionError("session " + session_id + " has no records");

    SessionSummary s;
    s.session_id = session_id;
    s.task_id = records.front().task_id;
    s.record_count = static_cast<int>(records.size());

    std::set<std::string> skills;
    std::set<std::string> proposed;
    double total = 0.0;
    for (auto& r : records) {
        if (r.task_id != s.task_id)
            throw PreconditionError("session " + session_id + " mixes tasks");
        if (correctness_pass(r))
            ++s.pass_count;
        total += r.score;
        for (auto& ref : r.candidate.skill_refs)
            skills.insert(ref.skill_id);
        for (auto& p : r.candidate.proposed_skills)
            proposed.insert(p);
        ++s.strategy_counts[to_string(r.candidate.strategy)];
        ++s.path_select_counts[to_string(r.candidate.plan.path_select)];
        ++s.focus_counts[to_string(r.candidate.plan.focus)];
        for (auto& res : r.results)
            if (!res.passed)
                for (auto& tag : extract_hint_tags(res.feedback))
                    ++s.hint_tag_counts[tag];
    }
    s.avg_score = total / static_cast<double>(records.size());
    s.referenced_skills.assign(skills.begin(), skills.end());
    s.proposed_skills.assign(proposed.begin(), proposed.end());

    for (auto& m : majors) {
        if (!m.promoted)
            continue;
        ++s.promote_count;
        if (m.previous_score && m.score)
            s.score_deltas.push_back(*m.score - *m.previous_score);
    }

    s.strategy = dominant(s.strategy_counts, Strategy::direct, strategy_from_string);
    s.path_select = dominant(s.path_select_counts, PathSelect::none, path_select_from_string);
    s.focus = dominant(s.focus_counts, Focus::combinational, focus_from_string);

    if (risk)
        for (auto& id : s.referenced_skills)
            if (risk(id) == Risk::high)
                s.equivalence_risk = Risk::high;
    return s;
}

} // namespace rtlevo
