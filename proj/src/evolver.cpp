#include "rtlevo/evolver.hpp"

#include "rtlevo/error.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace rtlevo {

void to_json(json& j, const SessionEntry& e)
{
    j = json{{"schema_version", kSchemaVersion},
             {"summary", e.summary},
             {"skill_pass", e.skill_pass},
             {"proposed_pass", e.proposed_pass}};
}

void from_json(const json& j, SessionEntry& e)
{
    e.summary = j.at("summary").get<SessionSummary>();
    e.skill_pass = j.value("skill_pass", std::map<std::string, int>{});
    e.proposed_pass = j.value("proposed_pass", std::map<std::string, int>{});
}

EvolverStore::EvolverStore(fs::path dir) : dir_(std::move(dir))
{
    try {
        fs::create_directories(dir_);
    } catch (const fs::filesystem_error& e) {
        throw StorageError(std::string("evolver store unwritable: ") + e.what());
    }
}

std::vector<SessionEntry> EvolverStore::sessions() const
{
    std::vector<SessionEntry> out;
    if (!fs::exists(sessions_path()))
        return out;
    int n = 0;
    for (auto& line : read_lines(sessions_path())) {
        ++n;
        if (trim(line).empty())
            continue;
        try {
            out.push_back(json::parse(line).get<SessionEntry>());
        } catch (const std::exception& e) {
            throw ParseError(sessions_path().string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::vector<std::string> EvolverStore::drained() const
{
    std::vector<std::string> out;
    if (!fs::exists(drained_path()))
        return out;
    for (auto& line : read_lines(drained_path()))
        if (!trim(line).empty())
            out.push_back(trim(line));
    return out;
}

StoreLock::StoreLock(const EvolverStore& store) : lock_(std::make_unique<FileLock>(store.lock_path(), true))
{
    if (!lock_->owns())
        throw LockError("evolver store " + store.dir().string() + " is locked by another process");
}

std::vector<fs::path> discover_task_dirs(const fs::path& root)
{
    std::vector<fs::path> out;
    auto is_task = [](const fs::path& p) {
        return fs::exists(p / "minors.log") || fs::exists(p / "majors.log") || fs::exists(p / "task.json");
    };
    if (!fs::is_directory(root))
        return out;
    if (is_task(root)) {
        out.push_back(root);
        return out;
    }
    for (int depth = 0; depth < 2 && out.empty(); ++depth) {
        for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
            if (!it->is_directory())
                continue;
            if (it.depth() == depth && is_task(it->path())) {
                out.push_back(it->path());
                it.disable_recursion_pending();
            } else if (it.depth() >= depth) {
                it.disable_recursion_pending();
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

SessionEntry make_session(const std::string& session_id, const History& h, const fs::path& task_dir,
                          const RiskLookup& risk)
{
    SessionEntry e;
    e.summary = summarize_session(session_id, h.minors, h.majors, risk);
    for (auto& r : h.minors) {
        bool pass = correctness_pass(r);
        std::set<std::string> ids;
        for (auto& ref : r.candidate.skill_refs)
            ids.insert(ref.skill_id);
        for (auto& id : ids) {
            auto& slot = e.skill_pass[id];
            slot += pass ? 1 : 0;
        }
        for (auto& p : r.candidate.proposed_skills) {
            auto& slot = e.proposed_pass[p];
            slot += pass ? 1 : 0;
        }
    }
    fs::path abs = fs::absolute(task_dir);
    if (fs::exists(abs / "task.json"))
        e.summary.task_spec_path = (abs / "task.json").string();
    if (fs::exists(abs / "config.json"))
        e.summary.evaluator_config_path = (abs / "config.json").string();
    return e;
}

IngestReport ingest(const std::vector<fs::path>& runs, EvolverStore& store, const SkillLibrary* lib)
{
    IngestReport rep;
    std::set<std::string> seen;
    for (auto& id : store.drained())
        seen.insert(id);
    for (auto& s : store.sessions())
        seen.insert(s.summary.session_id);

    RiskLookup risk;
    if (lib)
        risk = [lib](const std::string& id) { return lib->risk_of(id); };

    for (auto& root : runs) {
        if (!fs::is_directory(root)) {
            rep.diagnostics.push_back(root.string() + ": not a directory, skipped");
            continue;
        }
        for (auto& dir : discover_task_dirs(root)) {
            std::string session_id = dir.parent_path().filename().string() + "/" + dir.filename().string();
            if (seen.count(session_id))
                continue;
            History h;
            try {
                h = parse_history(dir);
            } catch (const std::exception& e) {
                rep.diagnostics.push_back(session_id + ": unreadable history: " + e.what());
                continue;
            }
            for (auto& d : h.diagnostics)
                rep.diagnostics.push_back(session_id + ": " + d.file + ":" + std::to_string(d.line) + ": " + d.message);
            if (h.minors.empty()) {
                rep.diagnostics.push_back(session_id + ": empty history, skipped");
                continue;
            }
            SessionEntry entry;
            try {
                entry = make_session(session_id, h, dir, risk);
            } catch (const std::exception& e) {
                rep.diagnostics.push_back(session_id + ": " + e.what());
                continue;
            }
            append_line_locked(store.sessions_path(), dump_text(json(entry)));
            append_line_locked(store.drained_path(), session_id);
            seen.insert(session_id);
            ++rep.new_sessions;
        }
    }
    return rep;
}

std::vector<SkillGroup> aggregate(const std::vector<SessionEntry>& sessions, const SkillLibrary* lib)
{
    std::map<std::string, SkillGroup> groups;
    std::map<std::string, std::vector<double>> deltas;
    auto add = [&](const std::string& key, const std::string& id, bool proposed, const SessionEntry& e, int passes) {
        auto& g = groups[key];
        g.skill_id = id;
        g.proposed = proposed;
        g.sessions.push_back(e.summary);
        g.n_pass += passes;
        g.n_promote += e.summary.promote_count;
        auto& d = deltas[key];
        d.insert(d.end(), e.summary.score_deltas.begin(), e.summary.score_deltas.end());
    };
    for (auto& e : sessions) {
        for (auto& id : e.summary.referenced_skills) {
            auto it = e.skill_pass.find(id);
            add("skill:" + id, id, false, e, it == e.skill_pass.end() ? 0 : it->second);
        }
        for (auto& tag : e.summary.proposed_skills) {
            auto it = e.proposed_pass.find(tag);
            add("proposed:" + tag, tag, true, e, it == e.proposed_pass.end() ? 0 : it->second);
        }
    }
    std::vector<SkillGroup> out;
    for (auto& [key, g] : groups) {
        auto& d = deltas[key];
        if (!d.empty()) {
            double sum = 0.0;
            for (double x : d)
                sum += x;
            g.mean_delta = sum / static_cast<double>(d.size());
        }
        if (g.proposed)
            g.equivalence_risk = Risk::high;
        else if (lib && lib->find(g.skill_id))
            g.equivalence_risk = lib->risk_of(g.skill_id);
        else
            g.equivalence_risk = std::any_of(g.sessions.begin(), g.sessions.end(),
                                             [](auto& s) { return s.equivalence_risk == Risk::high; })
                                     ? Risk::high
                                     : Risk::low;
        out.push_back(std::move(g));
    }
    return out;
}

Verdict verify(const SkillGroup& g, const EvidenceThresholds& t)
{
    if (t.tau_pass < 1 || t.tau_promote < 1)
        throw PreconditionError("evidence thresholds must be >= 1");
    auto fmt = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%+.4g", x);
        return std::string(buf);
    };
    if (g.n_pass < t.tau_pass)
        return {false, "pass clause failed: n_pass " + std::to_string(g.n_pass) + " < " + std::to_string(t.tau_pass)};
    bool promote_ok = g.n_promote >= t.tau_promote;
    bool delta_ok = g.mean_delta < 0.0;
    if (!promote_ok && !delta_ok)
        return {false, "promotion clause failed: n_promote " + std::to_string(g.n_promote) + " < " +
                           std::to_string(t.tau_promote) + " and mean_delta " + fmt(g.mean_delta) + " >= 0"};
    if (g.equivalence_risk == Risk::high && g.n_promote < 1)
        return {false, "high-risk clause failed: no promotion (mean_delta " + fmt(g.mean_delta) + ")"};
    std::string why = "accepted: n_pass " + std::to_string(g.n_pass) + " >= " + std::to_string(t.tau_pass) + ", ";
    why += promote_ok ? "n_promote " + std::to_string(g.n_promote) + " >= " + std::to_string(t.tau_promote)
                      : "mean_delta " + fmt(g.mean_delta) + " < 0";
    if (g.equivalence_risk == Risk::high)
        why += ", high risk with promotion";
    return {true, why};
}

std::string to_string(DecisionKind k)
{
    switch (k) {
    case DecisionKind::create_skill: return "create_skill";
    case DecisionKind::improve_skill: return "improve_skill";
    case DecisionKind::skip: return "skip";
    }
    return "skip";
}

namespace {

std::string distribution(const std::map<std::string, int>& counts)
{
    std::vector<std::pair<std::string, int>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.second > b.second; });
    std::string out;
    for (auto& [k, n] : v)
        out += (out.empty() ? "" : ", ") + k + "=" + std::to_string(n);
    return out.empty() ? "none" : out;
}

std::vector<std::string> top_hint_tags(const SkillGroup& g, std::size_t n)
{
    std::map<std::string, int> tags;
    for (auto& s : g.sessions)
        for (auto& [t, c] : s.hint_tag_counts)
            tags[t] += c;
    std::vector<std::pair<std::string, int>> v(tags.begin(), tags.end());
    std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size() && i < n; ++i)
        out.push_back(v[i].first);
    return out;
}

std::string strip_fences(const std::string& raw)
{
    std::string t = trim(raw);
    if (t.rfind("```", 0) == 0) {
        auto nl = t.find('\n');
        auto end = t.rfind("```");
        if (nl != std::string::npos && end != std::string::npos && end > nl)
            return trim(t.substr(nl + 1, end - nl - 1));
    }
    return t;
}

std::string draft_guidance(Provider& provider, const std::string& key, const std::string& existing,
                           const std::string& digest, const std::string& id)
{
    Prompt p;
    p.system_text = "You maintain a library of reusable RTL generation and repair skills. Reply with the skill "
                    "guidance text only.";
    if (existing.empty())
        p.user_text = "Draft guidance for a new skill '" + id + "' from this evidence.\n\nEvidence:\n" + digest;
    else
        p.user_text = "Revise the guidance of skill '" + id + "' using this evidence. Keep what still holds.\n\n"
                      "Current guidance:\n" + existing + "\n\nEvidence:\n" + digest;
    p.temperature = 0.0;
    p.key = key;
    std::string text = strip_fences(provider.generate(p));
    if (text.rfind("---", 0) == 0)
        text = parse_skill(text).guidance;
    return text;
}

} // namespace

std::string evidence_digest(const SkillGroup& g, std::size_t cap)
{
    std::map<std::string, int> strategies, focus, paths;
    std::vector<double> deltas;
    for (auto& s : g.sessions) {
        for (auto& [k, n] : s.strategy_counts)
            strategies[k] += n;
        for (auto& [k, n] : s.focus_counts)
            focus[k] += n;
        for (auto& [k, n] : s.path_select_counts)
            paths[k] += n;
        deltas.insert(deltas.end(), s.score_deltas.begin(), s.score_deltas.end());
    }
    std::string out;
    out += "sessions: " + std::to_string(g.sessions.size()) + ", n_pass " + std::to_string(g.n_pass) +
           ", n_promote " + std::to_string(g.n_promote) + "\n";
    out += "strategies: " + distribution(strategies) + "\n";
    out += "focus: " + distribution(focus) + "\n";
    out += "path_select: " + distribution(paths) + "\n";
    auto tags = top_hint_tags(g, 5);
    std::string t;
    for (auto& x : tags)
        t += (t.empty() ? "" : ", ") + x;
    out += "hint tags: " + (t.empty() ? std::string("none") : t) + "\n";
    char buf[96];
    if (deltas.empty()) {
        out += "score deltas: none\n";
    } else {
        double lo = *std::min_element(deltas.begin(), deltas.end());
        double hi = *std::max_element(deltas.begin(), deltas.end());
        std::snprintf(buf, sizeof buf, "score deltas: n=%zu mean=%.4g min=%.4g max=%.4g\n", deltas.size(),
                      g.mean_delta, lo, hi);
        out += buf;
    }
    return truncate_with_marker(out, cap);
}

EvolutionDecision decide(const SkillGroup& g, const Verdict& v, const SkillLibrary& lib, Provider& provider)
{
    EvolutionDecision d;
    d.group = g;
    d.verdict = v;
    if (!v.accepted) {
        d.rationale = v.reason;
        return d;
    }

    std::string id = g.skill_id;
    std::optional<SkillCategory> category;
    if (g.proposed) {
        auto slash = g.skill_id.find('/');
        try {
            category = skill_category_from_string(g.skill_id.substr(0, slash));
        } catch (const std::exception&) {
            d.rationale = "skip: proposed tag '" + g.skill_id + "' has an unknown category";
            return d;
        }
        id = g.skill_id.substr(slash + 1);
    }

    const SkillFile* existing = lib.find(id);
    std::string digest = evidence_digest(g);
    SkillFile cand;
    try {
        if (existing) {
            cand = *existing;
            cand.guidance = draft_guidance(provider, "evolve/" + id, existing->guidance, digest, id);
        } else if (g.proposed) {
            cand.skill_id = id;
            cand.name = id;
            std::replace(cand.name.begin(), cand.name.end(), '_', ' ');
            cand.category = *category;
            cand.equivalence_risk = Risk::high;
            std::set<std::string> seen;
            for (auto& tok : tokenize(id)) {
                if (seen.insert(tok).second)
                    cand.triggers.push_back({tok, 1.0});
                std::stringstream parts(tok);
                std::string part;
                while (std::getline(parts, part, '_'))
                    if (!part.empty() && seen.insert(part).second)
                        cand.triggers.push_back({part, 1.0});
            }
            for (auto& tag : top_hint_tags(g, 3))
                if (seen.insert(tag).second)
                    cand.triggers.push_back({tag, 1.5});
            cand.guidance = draft_guidance(provider, "evolve/" + id, "", digest, id);
        } else {
            d.rationale = "skip: referenced skill '" + id + "' is not in the library";
            return d;
        }
    } catch (const ProviderError& e) {
        d.rationale = std::string("skip: drafting failed: ") + e.what();
        return d;
    } catch (const ParseError& e) {
        d.rationale = std::string("skip: draft unparseable: ") + e.what();
        return d;
    }
    cand.version_hash = compute_skill_hash(cand);
    try {
        validate_skill(cand);
    } catch (const ConfigError& e) {
        d.rationale = std::string("skip: draft invalid: ") + e.what();
        return d;
    }
    d.kind = existing ? DecisionKind::improve_skill : DecisionKind::create_skill;
    d.candidate_skill = cand;
    d.rationale = v.reason;
    return d;
}

std::vector<ReplayCase> select_replay_cases(const SkillGroup& g)
{
    std::vector<const SessionSummary*> order;
    for (auto& s : g.sessions)
        if (!s.task_spec_path.empty())
            order.push_back(&s);
    std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) {
        if (a->promote_count != b->promote_count)
            return a->promote_count > b->promote_count;
        if (a->avg_score != b->avg_score)
            return a->avg_score < b->avg_score;
        return a->session_id < b->session_id;
    });
    std::vector<ReplayCase> out;
    std::set<std::string> used;
    for (auto* s : order) {
        if (out.size() >= static_cast<std::size_t>(kMaxReplayCases))
            break;
        if (!used.insert(s->session_id).second)
            continue;
        out.push_back({s->session_id, s->task_spec_path, s->evaluator_config_path});
    }
    return out;
}

RouteOutcome route(const EvolutionDecision& d, PublicationMode mode, SkillLibrary& lib, const fs::path& queue)
{
    if (d.kind == DecisionKind::skip || !d.candidate_skill)
        throw PreconditionError("route needs a create or improve decision");
    const SkillFile& cand = *d.candidate_skill;
    if (mode == PublicationMode::immediate) {
        auto w = write_skill(lib, cand, PublicationMode::immediate);
        return {w.status == WriteStatus::written ? "published" : "skipped", {}};
    }
    ValidationJob job;
    job.skill_id = cand.skill_id;
    job.job_id = cand.skill_id + "-" + compute_skill_hash(cand).substr(0, 12);
    job.create = d.kind == DecisionKind::create_skill;
    if (!job.create)
        job.baseline_text = serialize_skill(*lib.find(cand.skill_id));
    job.candidate_text = serialize_skill(cand);
    job.replay_cases = select_replay_cases(d.group);
    if (job.replay_cases.empty())
        return {"no_replay_cases", job.job_id};
    if (job_exists(queue, job.job_id))
        return {"duplicate", job.job_id};
    enqueue(job, queue);
    return {"queued", job.job_id};
}

EvolveReport evolve(const std::vector<fs::path>& runs, EvolverStore& store, SkillLibrary& lib, Provider& provider,
                    PublicationMode mode, const fs::path& queue, const EvidenceThresholds& t)
{
    StoreLock lock(store);
    EvolveReport rep;
    rep.ingest = ingest(runs, store, &lib);
    for (auto& g : aggregate(store.sessions(), &lib)) {
        Verdict v = verify(g, t);
        EvolutionDecision d = decide(g, v, lib, provider);
        RouteOutcome r;
        if (d.kind != DecisionKind::skip) {
            r = route(d, mode, lib, queue);
            rep.published += r.action == "published" ? 1 : 0;
            rep.queued += r.action == "queued" ? 1 : 0;
        } else {
            r.action = "none";
        }
        json line{{"schema_version", kSchemaVersion},
                  {"timestamp_ms", now_ms()},
                  {"skill_id", g.skill_id},
                  {"proposed", g.proposed},
                  {"n_pass", g.n_pass},
                  {"n_promote", g.n_promote},
                  {"mean_delta", g.mean_delta},
                  {"risk", to_string(g.equivalence_risk)},
                  {"accepted", v.accepted},
                  {"reason", v.reason},
                  {"kind", to_string(d.kind)},
                  {"rationale", d.rationale},
                  {"candidate_hash", d.candidate_skill ? d.candidate_skill->version_hash : ""},
                  {"mode", to_string(mode)},
                  {"action", r.action},
                  {"job_id", r.job_id}};
        append_line_locked(store.decisions_path(), dump_text(line));
        rep.decisions.push_back(std::move(d));
        rep.routes.push_back(std::move(r));
    }
    return rep;
}

} // namespace rtlevo
