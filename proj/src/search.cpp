#include "rtlevo/search.hpp"

#include "rtlevo/error.hpp"

#include <algorithm>
#include <future>

namespace rtlevo {

void validate_search_config(const SearchConfig& c)
{
    if (c.rounds < 1)
        throw ConfigError("search: rounds must be >= 1");
    if (c.minors < 1)
        throw ConfigError("search: minors must be >= 1");
    if (c.strategy_pool.empty())
        throw ConfigError("search: strategy_pool is empty");
    if (c.parallelism < 1)
        throw ConfigError("search: parallelism must be >= 1");
    if (c.token_budget_hint < 1)
        throw ConfigError("search: token_budget_hint must be >= 1");
    if (c.promotion_gate) {
        const auto& known = known_evaluators();
        if (std::find(known.begin(), known.end(), *c.promotion_gate) == known.end())
            throw ConfigError("search: unknown promotion gate '" + *c.promotion_gate + "'");
    }
    if (c.retrieval.limit < 0)
        throw ConfigError("search: retrieval limit must be >= 0");
}

void to_json(json& j, const SearchConfig& c)
{
    std::vector<std::string> pool;
    for (auto s : c.strategy_pool)
        pool.push_back(to_string(s));
    j = json{{"rounds", c.rounds},
             {"minors", c.minors},
             {"strategy_pool", pool},
             {"rng_seed", c.rng_seed},
             {"parallelism", c.parallelism},
             {"feedback_cap", c.feedback_cap},
             {"token_budget_hint", c.token_budget_hint},
             {"temperature", c.temperature},
             {"repair_temperature", c.repair_temperature},
             {"retrieval", c.retrieval}};
    if (c.early_stop)
        j["early_stop"] = *c.early_stop;
    if (c.promotion_gate)
        j["promotion_gate"] = *c.promotion_gate;
}

void from_json(const json& j, SearchConfig& c)
{
    c = SearchConfig{};
    try {
        c.rounds = j.value("rounds", c.rounds);
        c.minors = j.value("minors", c.minors);
        if (j.contains("strategy_pool")) {
            c.strategy_pool.clear();
            for (auto& s : j.at("strategy_pool"))
                c.strategy_pool.push_back(strategy_from_string(s.get<std::string>()));
        }
        if (j.contains("early_stop") && !j.at("early_stop").is_null())
            c.early_stop = j.at("early_stop").get<bool>();
        if (j.contains("promotion_gate") && !j.at("promotion_gate").is_null())
            c.promotion_gate = j.at("promotion_gate").get<std::string>();
        c.rng_seed = j.value("rng_seed", c.rng_seed);
        c.parallelism = j.value("parallelism", c.parallelism);
        c.feedback_cap = j.value("feedback_cap", c.feedback_cap);
        c.token_budget_hint = j.value("token_budget_hint", c.token_budget_hint);
        c.temperature = j.value("temperature", c.temperature);
        c.repair_temperature = j.value("repair_temperature", c.repair_temperature);
        if (j.contains("retrieval"))
            c.retrieval = j.at("retrieval").get<RetrievalConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("search config: ") + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(std::string("search config: ") + e.what());
    }
    validate_search_config(c);
}

std::mt19937_64 attempt_rng(std::uint64_t seed, const std::string& task_id, int round, int minor)
{
    // seed_seq's mixing is fully specified, so streams match across
    // standard libraries.
    auto h = sha256_hex(task_id);
    std::uint32_t task_word = static_cast<std::uint32_t>(std::stoul(h.substr(0, 8), nullptr, 16));
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      task_word, static_cast<std::uint32_t>(round), static_cast<std::uint32_t>(minor)};
    return std::mt19937_64(seq);
}

Attempt sample_attempt(const std::vector<Strategy>& pool, bool has_baseline, bool has_structural_feedback, int k,
                       std::mt19937_64& rng)
{
    if (k < 1)
        throw PreconditionError("minor index must be >= 1");
    std::vector<Strategy> usable;
    for (auto s : pool)
        if (s != Strategy::repair || has_baseline)
            usable.push_back(s);
    if (usable.empty())
        usable.push_back(Strategy::direct);

    Attempt a;
    if (static_cast<std::size_t>(k) <= usable.size())
        a.strategy = usable[static_cast<std::size_t>(k - 1)];
    else
        a.strategy = usable[rng() % usable.size()];

    static constexpr Focus kRotation[] = {Focus::combinational, Focus::sequential, Focus::mixed};
    a.plan.focus = kRotation[(k - 1) % 3];

    if (has_structural_feedback) {
        static constexpr PathSelect kPaths[] = {PathSelect::timing_critical, PathSelect::structurally_complex,
                                                PathSelect::random_exploration};
        a.plan.path_select = kPaths[rng() % 3];
    }
    return a;
}

namespace {

std::string rel(const fs::path& p, const fs::path& base) { return fs::relative(p, base).generic_string(); }

CandidateRecord failed_generation(const SearchEnv& env, RtlCandidate cand, const std::string& why)
{
    CandidateRecord rec;
    rec.task_id = env.task->task_id;
    rec.candidate = std::move(cand);
    for (auto& name : env.evaluator.enabled) {
        if (name == kFunctional)
            rec.results.push_back(make_result(name, Outcome::unknown_failure, why));
        else
            rec.results.push_back(make_result(name, Outcome::tool_unavailable, "not run: " + why));
    }
    return rec;
}

std::string describe(const CandidateRecord& r)
{
    std::string out = r.candidate.version.str() + " score " + std::to_string(r.score);
    for (auto& res : r.results)
        if (!res.passed && res.outcome != Outcome::tool_unavailable)
            out += ", " + res.evaluator + " " + to_string(res.outcome);
    return out;
}

} // namespace

CandidateRecord run_minor(const SearchState& state, const SearchEnv& env, int round, int k)
{
    const TaskSpec& task = *env.task;
    VersionId version{round, k};
    auto rng = attempt_rng(env.search.rng_seed, task.task_id, round, k);
    bool has_baseline = state.current_major.has_value();
    bool structural = has_baseline && (state.feedback.has_synthesis || state.feedback.has_timing);
    Attempt attempt = sample_attempt(env.search.strategy_pool, has_baseline, structural, k, rng);

    RtlCandidate cand;
    cand.version = version;
    cand.strategy = attempt.strategy;
    cand.plan = attempt.plan;
    if (attempt.strategy == Strategy::repair)
        cand.parent = state.current_major->candidate.version;

    std::vector<SkillFile> skills;
    if (env.skills) {
        for (auto& ranked : retrieve(*env.skills, task, state.feedback.hint_tags(), attempt.plan, env.search.retrieval)) {
            cand.skill_refs.push_back(ranked.ref);
            skills.push_back(*env.skills->find(ranked.ref.skill_id));
        }
    }

    FeedbackContext prompt_feedback = state.feedback;
    prompt_feedback.recent_failures = state.recent_failures;

    PromptInputs in;
    in.task = &task;
    in.skills = skills;
    in.plan = attempt.plan;
    in.feedback = has_baseline ? &prompt_feedback : nullptr;
    in.key = task.task_id + "/" + version.str();
    in.token_budget_hint = env.search.token_budget_hint;
    in.temperature = env.search.temperature;
    in.repair_temperature = env.search.repair_temperature;

    fs::path art = env.task_dir / "artifacts" / version.str();
    fs::create_directories(art);

    std::string raw;
    std::string prompt_log;
    try {
        if (attempt.strategy == Strategy::repair) {
            auto p = build_repair_prompt(in, state.current_major->candidate.rtl_text, env.templates);
            prompt_log = p.user_text;
            raw = env.provider->generate(p);
        } else if (attempt.strategy == Strategy::c_bridge) {
            auto ref_prompt = build_cbridge_reference_prompt(in, env.templates);
            std::string reference = env.provider->generate(ref_prompt);
            if (trim(reference).empty()) {
                cand.strategy = Strategy::direct;
                cand.notes.push_back("c_bridge downgraded to direct: empty reference");
                auto p = build_generation_prompt(in, env.templates);
                prompt_log = p.user_text;
                raw = env.provider->generate(p);
            } else {
                write_file(art / "reference.c", reference);
                auto p = build_cbridge_verilog_prompt(in, reference, env.templates);
                prompt_log = ref_prompt.user_text + "\n----\n" + p.user_text;
                raw = env.provider->generate(p);
            }
        } else {
            auto p = build_generation_prompt(in, env.templates);
            prompt_log = p.user_text;
            raw = env.provider->generate(p);
        }
    } catch (const ProviderError& e) {
        write_file(art / "prompt.txt", prompt_log);
        cand.rtl_text = "// no rtl: provider error\n";
        cand.notes.push_back(std::string("provider error: ") + e.what());
        auto rec = failed_generation(env, cand, std::string("provider error: ") + e.what());
        auto s = evaluate_score(rec.results, env.score, has_baseline ? &state.current_major->results : nullptr);
        rec.score = s.score;
        rec.eligible = s.eligible;
        rec.breakdown = s.breakdown;
        rec.timestamp_ms = now_ms();
        return rec;
    }
    write_file(art / "prompt.txt", prompt_log);
    write_file(art / "response.txt", raw);
    cand.proposed_skills = extract_proposed_skills(raw);

    CandidateRecord rec;
    try {
        cand.rtl_text = extract_rtl(raw, task.module_header);
    } catch (const ExtractionError& e) {
        cand.rtl_text = raw.empty() ? "// no rtl: empty response\n" : raw;
        cand.notes.push_back("extraction failed: no module in output");
        rec = failed_generation(env, cand, "no module in output");
    }
    write_file(art / "candidate.v", cand.rtl_text);

    if (rec.results.empty()) {
        rec.task_id = task.task_id;
        rec.candidate = cand;
        auto pool = run_pool(cand.rtl_text, task, version, env.evaluator, art, env.evaluators);
        rec.results = std::move(pool.results);
        for (auto& [name, files] : pool.artifacts)
            for (auto& f : files)
                rec.artifacts[name].push_back(rel(art / f, env.task_dir));
        rec.wall_time_ms = std::move(pool.wall_time_ms);
    }
    rec.artifacts["candidate"] = {rel(art / "candidate.v", env.task_dir)};

    auto s = evaluate_score(rec.results, env.score, has_baseline ? &state.current_major->results : nullptr);
    rec.score = s.score;
    rec.eligible = s.eligible;
    rec.breakdown = s.breakdown;
    rec.timestamp_ms = now_ms();
    return rec;
}

MajorRecord run_major_round(SearchState& state, const SearchEnv& env, HistorySink& sink)
{
    const int round = state.round;
    const int K = env.search.minors;
    const bool early_stop = env.search.early_stop_for(env.score.mode);
    const int par = env.search.parallelism;

    std::vector<CandidateRecord> records;
    bool stopped = false;
    for (int k = 1; k <= K && !stopped; k += par) {
        std::vector<CandidateRecord> batch;
        if (par == 1) {
            batch.push_back(run_minor(state, env, round, k));
        } else {
            std::vector<std::future<CandidateRecord>> futures;
            for (int j = k; j < k + par && j <= K; ++j)
                futures.push_back(std::async(std::launch::async, [&, j] { return run_minor(state, env, round, j); }));
            for (auto& f : futures)
                batch.push_back(f.get());
        }
        // Results are consumed in k order so early stop matches the sequential loop.
        for (auto& rec : batch) {
            sink.record_minor(rec);
            records.push_back(std::move(rec));
            if (early_stop && records.back().eligible) {
                stopped = true;
                break;
            }
        }
    }

    MajorRecord m;
    m.task_id = env.task->task_id;
    m.major = round;
    m.minors_evaluated = static_cast<int>(records.size());
    if (state.current_major)
        m.previous_score = state.current_major->score;

    bool promoted = false;
    if (auto best = select_best(records)) {
        const CandidateRecord& sel = records[*best];
        m.selected_minor = sel.candidate.version.minor;
        m.selected_score = sel.score;
        m.improve = !state.current_major || sel.score < state.current_major->score;
        bool gate_ok = true;
        if (env.search.promotion_gate) {
            const std::string& gate = *env.search.promotion_gate;
            EvalContext ctx;
            ctx.task = env.task;
            ctx.version = sel.candidate.version;
            ctx.scratch = env.task_dir / "artifacts" / sel.candidate.version.str() / "gate";
            ctx.config = &env.evaluator;
            fs::create_directories(ctx.scratch);
            EvaluatorResult g;
            auto it = env.evaluators.find(gate);
            if (it == env.evaluators.end()) {
                g = make_result(gate, Outcome::tool_unavailable, "no evaluator registered for gate '" + gate + "'");
            } else {
                try {
                    g = it->second->evaluate(sel.candidate.rtl_text, ctx);
                } catch (const ConfigError&) {
                    throw;
                } catch (const std::exception& e) {
                    g = make_result(gate, Outcome::unknown_failure, std::string("gate error: ") + e.what());
                }
            }
            g.evaluator = gate;
            gate_ok = g.passed;
            m.gate_result = g;
        }
        promoted = m.improve && gate_ok;
        if (promoted) {
            state.current_major = sel;
            state.feedback = build_feedback_context(sel, env.search.feedback_cap);
            m.promoted_artifact = (fs::path("artifacts") / sel.candidate.version.str() / "candidate.v").generic_string();
        } else {
            std::string why = !m.improve ? "no strict improvement" : "gate " + *env.search.promotion_gate + " failed";
            state.recent_failures.push_back("round " + std::to_string(round) + ": selected " + describe(sel) + "; " + why);
        }
    } else {
        std::string digest = "round " + std::to_string(round) + ": no eligible minor";
        if (!records.empty()) {
            auto lowest = std::min_element(records.begin(), records.end(),
                                           [](auto& a, auto& b) { return a.score < b.score; });
            digest += "; best " + describe(*lowest);
        }
        state.recent_failures.push_back(digest);
    }
    if (state.recent_failures.size() > 2)
        state.recent_failures.erase(state.recent_failures.begin(),
                                    state.recent_failures.end() - 2);

    m.promoted = promoted;
    if (state.current_major) {
        m.score = state.current_major->score;
        m.baseline_record = state.current_major;
    }
    m.timestamp_ms = now_ms();
    sink.record_major(m);
    ++state.round;
    return m;
}

void to_json(json& j, const RunSummary& s)
{
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    j = json{{"task_id", s.task_id},
             {"run_id", s.run_id},
             {"final_success", s.final_success},
             {"best_functional_score", opt(s.best_functional_score)},
             {"promotion_pass", opt(s.promotion_pass)},
             {"compile_pass", s.compile_pass},
             {"promoted_major_count", s.promoted_major_count},
             {"rounds", s.rounds},
             {"minors_total", s.minors_total},
             {"final_score", opt(s.final_score)},
             {"final_artifact", s.final_artifact}};
}

RunSummary summarize_run(const std::string& task_id, const std::string& run_id, const History& h)
{
    RunSummary s;
    s.task_id = task_id;
    s.run_id = run_id;
    s.rounds = static_cast<int>(h.majors.size());
    s.minors_total = static_cast<int>(h.minors.size());

    int compiled = 0;
    for (auto& r : h.minors) {
        if (const auto* f = r.result(kFunctional)) {
            if (f->outcome == Outcome::passed || f->outcome == Outcome::mismatch || f->outcome == Outcome::timeout)
                ++compiled;
        }
        auto it = r.breakdown.find("functional");
        double fs_ = it != r.breakdown.end() ? it->second : r.score;
        if (!s.best_functional_score || fs_ < *s.best_functional_score)
            s.best_functional_score = fs_;
    }
    s.compile_pass = h.minors.empty() ? 0.0 : static_cast<double>(compiled) / static_cast<double>(h.minors.size());

    int selected = 0;
    int gate_passed = 0;
    const MajorRecord* last_promoted = nullptr;
    for (auto& m : h.majors) {
        if (m.selected_minor) {
            ++selected;
            if (!m.gate_result || m.gate_result->passed)
                ++gate_passed;
        }
        if (m.promoted) {
            ++s.promoted_major_count;
            last_promoted = &m;
        }
    }
    if (selected > 0)
        s.promotion_pass = static_cast<double>(gate_passed) / selected;
    if (last_promoted && last_promoted->baseline_record) {
        s.final_success = correctness_pass(*last_promoted->baseline_record);
        s.final_score = last_promoted->score;
        s.final_artifact = last_promoted->promoted_artifact;
    }
    return s;
}

RunResult run_task(const SearchEnv& env, const std::string& run_id)
{
    if (!env.task)
        throw PreconditionError("run_task without a task");
    if (!env.provider)
        throw ConfigError("run_task without a provider");
    const TaskSpec& task = *env.task;
    validate_task_spec(task);
    validate_search_config(env.search);
    validate_score_config(env.score);
    validate_evaluator_config(env.evaluator);
    for (auto& req : env.score.required)
        if (std::find(env.evaluator.enabled.begin(), env.evaluator.enabled.end(), req) == env.evaluator.enabled.end())
            throw ConfigError("required evaluator '" + req + "' is not enabled");
    if (env.score.mode == ScoreMode::eda &&
        std::find(env.evaluator.enabled.begin(), env.evaluator.enabled.end(), kEda) == env.evaluator.enabled.end())
        throw ConfigError("eda score mode needs the eda evaluator enabled");
    if (env.evaluator.backend == "tools") {
        bool functional = std::find(env.evaluator.enabled.begin(), env.evaluator.enabled.end(), kFunctional) !=
                          env.evaluator.enabled.end();
        if (functional && !fs::exists(task.visible_testbench))
            throw ConfigError("testbench not found: " + task.visible_testbench.string());
        bool heldout = (env.search.promotion_gate && *env.search.promotion_gate == kHeldout) ||
                       std::find(env.evaluator.enabled.begin(), env.evaluator.enabled.end(), kHeldout) !=
                           env.evaluator.enabled.end();
        if (heldout) {
            if (!task.heldout_profile)
                throw ConfigError("held-out evaluation needs a heldout_profile on task " + task.task_id);
            gemm_profile(*task.heldout_profile);
        }
    }

    try {
        fs::create_directories(env.task_dir / "artifacts");
    } catch (const fs::filesystem_error& e) {
        throw StorageError(std::string("cannot create run directory: ") + e.what());
    }
    save_task_spec(task, env.task_dir / "task.json");
    json cfg{{"search", env.search}, {"score", env.score}, {"evaluator", env.evaluator}};
    write_file_atomic(env.task_dir / "config.json", dump_text(cfg, 2) + "\n");

    HistorySink sink(env.task_dir);
    SearchState state;
    RunResult result;
    for (int i = 0; i < env.search.rounds; ++i)
        result.majors.push_back(run_major_round(state, env, sink));
    result.final_major = state.current_major;

    History h = parse_history(env.task_dir);
    result.summary = summarize_run(task.task_id, run_id, h);
    write_file_atomic(env.task_dir / "summary.json", dump_text(json(result.summary), 2) + "\n");
    return result;
}

} // namespace rtlevo
