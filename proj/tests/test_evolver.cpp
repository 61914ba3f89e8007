#include "support.hpp"

#include "rtlevo/error.hpp"
#include "rtlevo/evolver.hpp"

#include <doctest.h>

using namespace rtlevo;
using namespace rtlevo::test;

namespace {

SessionEntry session(const std::string& id, std::map<std::string, int> skill_pass, int promotes,
                     std::vector<double> deltas, double avg = 1.0)
{
    SessionEntry e;
    e.summary.session_id = id;
    e.summary.task_id = "t";
    for (auto& [k, v] : skill_pass)
        e.summary.referenced_skills.push_back(k);
    e.skill_pass = std::move(skill_pass);
    e.summary.promote_count = promotes;
    e.summary.score_deltas = std::move(deltas);
    e.summary.avg_score = avg;
    e.summary.record_count = 5;
    e.summary.task_spec_path = "/tasks/" + id + "/task.json";
    e.summary.evaluator_config_path = "/tasks/" + id + "/config.json";
    return e;
}

SkillGroup group(int n_pass, int n_promote, double mean_delta, Risk risk)
{
    SkillGroup g;
    g.skill_id = "g";
    g.n_pass = n_pass;
    g.n_promote = n_promote;
    g.mean_delta = mean_delta;
    g.equivalence_risk = risk;
    return g;
}

const SkillGroup& find_group(const std::vector<SkillGroup>& gs, const std::string& id)
{
    for (auto& g : gs)
        if (g.skill_id == id)
            return g;
    FAIL("group " << id << " missing");
    throw 0;
}

SkillFile lib_skill(const std::string& id, Risk risk = Risk::low)
{
    SkillFile s;
    s.skill_id = id;
    s.name = "Skill " + id;
    s.category = SkillCategory::simulator_repair;
    s.triggers = {{"combinational", 1.0}};
    s.guidance = "Original guidance for " + id + ".";
    s.equivalence_risk = risk;
    s.version_hash = compute_skill_hash(s);
    return s;
}

/// Scripted run under `<base>/runs/<run_id>/toy` whose minors retrieve the
/// given library.
void scripted_run(const fs::path& base, const std::string& run_id, const SkillLibrary& lib, int rounds,
                  const std::string& annotations)
{
    ScriptedRun run(base / ("work-" + run_id), ScoreMode::correctness_only, rounds, 2);
    run.env.skills = &lib;
    run.env.task_dir = base / "runs" / run_id / "toy";
    run.default_response(annotations);
    run_task(run.env, run_id);
}

} // namespace

TEST_SUITE("evolver")
{
    TEST_CASE("aggregate: {A} and {A,B} give A with two sessions and B with one")
    {
        std::vector<SessionEntry> ss{session("r1/t", {{"A", 2}}, 1, {-0.8}),
                                     session("r2/t", {{"A", 1}, {"B", 1}}, 0, {}),
                                     session("r3/t", {}, 2, {-1.0, -2.0})};
        auto gs = aggregate(ss);
        REQUIRE(gs.size() == 2);
        auto& a = find_group(gs, "A");
        auto& b = find_group(gs, "B");
        CHECK(a.sessions.size() == 2);
        CHECK(b.sessions.size() == 1);
        CHECK(a.n_pass == 3);
        CHECK(a.n_promote == 1);
        CHECK(a.mean_delta == doctest::Approx(-0.8));
        CHECK(b.n_pass == 1);
        CHECK(b.n_promote == 0);
        CHECK(b.mean_delta == 0.0);
    }

    TEST_CASE("aggregate pools deltas across sessions and marks proposed groups high risk")
    {
        auto s1 = session("r1/t", {{"A", 1}}, 1, {-1.0, 0.5});
        auto s2 = session("r2/t", {{"A", 1}}, 1, {-0.3});
        s2.summary.proposed_skills = {"rtl_optimization/share_mul"};
        s2.proposed_pass["rtl_optimization/share_mul"] = 2;
        auto gs = aggregate({s1, s2});
        auto& a = find_group(gs, "A");
        CHECK(a.mean_delta == doctest::Approx((-1.0 + 0.5 - 0.3) / 3));
        auto& p = find_group(gs, "rtl_optimization/share_mul");
        CHECK(p.proposed);
        CHECK(p.equivalence_risk == Risk::high);
        CHECK(p.n_pass == 2);
    }

    TEST_CASE("verify examples")
    {
        CHECK(verify(group(2, 1, 0.1, Risk::low)).accepted);
        auto hi = verify(group(3, 0, -0.2, Risk::high));
        CHECK_FALSE(hi.accepted);
        CHECK(hi.reason.find("high-risk") != std::string::npos);
        auto few = verify(group(1, 5, -1.0, Risk::low));
        CHECK_FALSE(few.accepted);
        CHECK(few.reason.find("pass clause") != std::string::npos);
        CHECK(verify(group(3, 0, -0.2, Risk::low)).accepted);
        auto flat = verify(group(3, 0, 0.0, Risk::low));
        CHECK_FALSE(flat.accepted);
        CHECK(flat.reason.find("promotion clause") != std::string::npos);
        CHECK_THROWS_AS(verify(group(3, 1, 0, Risk::low), {0, 1}), PreconditionError);
    }

    TEST_CASE("verify truth table against the gate formula")
    {
        for (int np = 0; np <= 3; ++np)
            for (int nr = 0; nr <= 2; ++nr)
                for (double md : {-0.5, 0.0, 0.5})
                    for (auto risk : {Risk::low, Risk::high}) {
                        bool expect = np >= 2 && (nr >= 1 || md < 0) && (risk == Risk::low || nr >= 1);
                        CHECK(verify(group(np, nr, md, risk)).accepted == expect);
                    }
    }

    TEST_CASE("decide: improve, create, skip")
    {
        TempDir d("decide");
        auto lib = load_library((fs::create_directories(d.path() / "lib"), d.path() / "lib"));
        write_skill(lib, lib_skill("A"), PublicationMode::immediate);
        fs::create_directories(d.path() / "script" / "evolve");
        script(d.path() / "script", "evolve/A", "```\nMerged guidance for A.\n```");
        script(d.path() / "script", "evolve/share_mul", "Share one multiplier across lanes.");
        script(d.path() / "script", "evolve/broken", "!provider_error");
        ScriptedProvider provider(d.path() / "script");

        auto ga = group(3, 1, -0.5, Risk::low);
        ga.skill_id = "A";
        auto dec = decide(ga, verify(ga), lib, provider);
        CHECK(dec.kind == DecisionKind::improve_skill);
        REQUIRE(dec.candidate_skill);
        CHECK(dec.candidate_skill->guidance == "Merged guidance for A.");
        CHECK(dec.candidate_skill->skill_id == "A");

        auto gp = group(3, 1, -0.5, Risk::high);
        gp.skill_id = "rtl_optimization/share_mul";
        gp.proposed = true;
        SessionSummary s;
        s.hint_tag_counts = {{"bit_width", 4}, {"reset", 1}};
        gp.sessions = {s};
        dec = decide(gp, verify(gp), lib, provider);
        CHECK(dec.kind == DecisionKind::create_skill);
        REQUIRE(dec.candidate_skill);
        CHECK(dec.candidate_skill->skill_id == "share_mul");
        CHECK(dec.candidate_skill->category == SkillCategory::rtl_optimization);
        CHECK(dec.candidate_skill->equivalence_risk == Risk::high);
        auto& trig = dec.candidate_skill->triggers;
        CHECK(trig.front() == Trigger{"share_mul", 1.0});
        CHECK(std::find(trig.begin(), trig.end(), Trigger{"mul", 1.0}) != trig.end());
        CHECK(std::find(dec.candidate_skill->triggers.begin(), dec.candidate_skill->triggers.end(),
                        Trigger{"bit_width", 1.5}) != dec.candidate_skill->triggers.end());
        CHECK_NOTHROW(validate_skill(*dec.candidate_skill));

        auto rejected = group(1, 0, 0.0, Risk::low);
        rejected.skill_id = "A";
        dec = decide(rejected, verify(rejected), lib, provider);
        CHECK(dec.kind == DecisionKind::skip);
        CHECK(dec.rationale.find("pass clause") != std::string::npos);

        auto broken = group(3, 1, -1, Risk::high);
        broken.skill_id = "timing_rewrite/broken";
        broken.proposed = true;
        dec = decide(broken, verify(broken), lib, provider);
        CHECK(dec.kind == DecisionKind::skip);
        CHECK_FALSE(dec.candidate_skill);

        auto odd = group(3, 1, -1, Risk::high);
        odd.skill_id = "misc/thing";
        odd.proposed = true;
        CHECK(decide(odd, verify(odd), lib, provider).kind == DecisionKind::skip);
    }

    TEST_CASE("replay cases: promotions first, at most eight, one per session")
    {
        SkillGroup g;
        for (int i = 0; i < 12; ++i)
            g.sessions.push_back(session("r" + std::to_string(i) + "/t", {{"A", 1}}, i % 3, {}, 10.0 - i).summary);
        auto cases = select_replay_cases(g);
        REQUIRE(cases.size() == 8);
        CHECK(cases[0].session_id == "r11/t");
        CHECK(cases[1].session_id == "r8/t");
        CHECK(cases[3].session_id == "r2/t");
        CHECK(cases[4].session_id == "r10/t");
        std::set<std::string> ids;
        for (auto& c : cases)
            ids.insert(c.session_id);
        CHECK(ids.size() == 8);
    }

    TEST_CASE("route: immediate improve appends one immediate history entry")
    {
        TempDir d("route");
        auto lib = load_library((fs::create_directories(d.path() / "lib"), d.path() / "lib"));
        write_skill(lib, lib_skill("A"), PublicationMode::immediate);
        EvolutionDecision dec;
        dec.kind = DecisionKind::improve_skill;
        auto improved = lib_skill("A");
        improved.guidance = "Better.";
        dec.candidate_skill = improved;
        auto r = route(dec, PublicationMode::immediate, lib, d.path() / "queue");
        CHECK(r.action == "published");
        auto& e = lib.registry.at("A");
        CHECK(e.history.size() == 2);
        CHECK(e.history.back().mode == PublicationMode::immediate);
        CHECK(e.validated_count == 0);
        CHECK(route(dec, PublicationMode::immediate, lib, d.path() / "queue").action == "skipped");
    }

    TEST_CASE("route: validated mode caps replay cases at eight and flags create")
    {
        TempDir d("routev");
        auto lib = load_library((fs::create_directories(d.path() / "lib"), d.path() / "lib"));
        write_skill(lib, lib_skill("A"), PublicationMode::immediate);
        EvolutionDecision dec;
        dec.kind = DecisionKind::improve_skill;
        auto improved = lib_skill("A");
        improved.guidance = "Better.";
        dec.candidate_skill = improved;
        for (int i = 0; i < 12; ++i)
            dec.group.sessions.push_back(session("r" + std::to_string(i) + "/t", {{"A", 1}}, 1, {}).summary);
        auto r = route(dec, PublicationMode::validated, lib, d.path() / "queue");
        CHECK(r.action == "queued");
        auto job = load_job(d.path() / "queue", r.job_id);
        CHECK(job.replay_cases.size() == 8);
        CHECK_FALSE(job.create);
        CHECK(job.baseline_text == serialize_skill(*lib.find("A")));
        CHECK(job.status == JobStatus::pending);
        CHECK(lib.registry.at("A").history.size() == 1);
        CHECK(route(dec, PublicationMode::validated, lib, d.path() / "queue").action == "duplicate");

        EvolutionDecision create;
        create.kind = DecisionKind::create_skill;
        create.candidate_skill = lib_skill("fresh");
        create.group.sessions = {session("r1/t", {}, 1, {}).summary};
        auto rc = route(create, PublicationMode::validated, lib, d.path() / "queue");
        auto cj = load_job(d.path() / "queue", rc.job_id);
        CHECK(cj.create);
        CHECK(cj.baseline_text.empty());
        CHECK(cj.replay_cases.size() == 1);

        create.candidate_skill = lib_skill("lonely");
        create.group.sessions.clear();
        CHECK(route(create, PublicationMode::validated, lib, d.path() / "queue").action == "no_replay_cases");
    }

    TEST_CASE("ingest: three runs, then nothing new; empty history skipped")
    {
        TempDir d("ingest");
        SkillLibrary lib;
        for (int i = 0; i < 3; ++i)
            scripted_run(d.path(), "run" + std::to_string(i), lib, 1, "");
        fs::create_directories(d.path() / "runs" / "run9" / "toy");
        write_file(d.path() / "runs" / "run9" / "toy" / "minors.log", "");
        EvolverStore store(d.path() / "store");
        auto rep = ingest({d.path() / "runs"}, store);
        CHECK(rep.new_sessions == 3);
        bool empty_reported = false;
        for (auto& m : rep.diagnostics)
            empty_reported |= m.find("run9/toy: empty history") != std::string::npos;
        CHECK(empty_reported);
        CHECK(ingest({d.path() / "runs"}, store).new_sessions == 0);
        CHECK(store.sessions().size() == 3);
        CHECK(store.drained().size() == 3);
        auto s = store.sessions()[0];
        CHECK(fs::exists(s.summary.task_spec_path));
        CHECK(fs::exists(s.summary.evaluator_config_path));
        CHECK(ingest({d.path() / "runs" / "run0"}, store).new_sessions == 0);
    }

    TEST_CASE("evolve end to end in immediate mode, then idempotent")
    {
        TempDir d("evolve");
        init_skill_library(d.path() / "lib");
        auto lib = load_library(d.path() / "lib");
        scripted_run(d.path(), "a", lib, 2, "");
        scripted_run(d.path(), "b", lib, 2, "");
        fs::create_directories(d.path() / "script" / "evolve");
        write_file(d.path() / "script" / "default.response", "Revised guidance from replayed evidence.");
        ScriptedProvider provider(d.path() / "script");
        EvolverStore store(d.path() / "store");

        auto rep = evolve({d.path() / "runs"}, store, lib, provider, PublicationMode::immediate, d.path() / "q");
        CHECK(rep.ingest.new_sessions == 2);
        REQUIRE_FALSE(rep.decisions.empty());
        CHECK(rep.published >= 1);
        CHECK(read_lines(store.decisions_path()).size() == rep.decisions.size());
        for (std::size_t i = 0; i < rep.decisions.size(); ++i)
            if (rep.decisions[i].kind != DecisionKind::skip)
                CHECK(rep.decisions[i].candidate_skill.has_value());

        auto again = evolve({d.path() / "runs"}, store, lib, provider, PublicationMode::immediate, d.path() / "q");
        CHECK(again.ingest.new_sessions == 0);
        CHECK(again.published == 0);
    }

    TEST_CASE("a second evolver is refused while the store is locked")
    {
        TempDir d("lock");
        EvolverStore store(d.path());
        StoreLock held(store);
        CHECK_THROWS_AS(StoreLock{store}, LockError);
    }

    TEST_CASE("session entries round-trip through json")
    {
        auto e = session("r/t", {{"A", 2}, {"B", 0}}, 1, {-0.5});
        e.proposed_pass["rtl_optimization/x"] = 1;
        e.summary.hint_tag_counts["reset"] = 2;
        json j = e;
        CHECK(j.get<SessionEntry>() == e);
    }
}
