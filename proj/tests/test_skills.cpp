#include "support.hpp"

#include "rtlevo/error.hpp"
#include "rtlevo/skills.hpp"

#include <doctest.h>

using namespace rtlevo;
using namespace rtlevo::test;

namespace {

SkillFile make(const std::string& id, SkillCategory cat, std::vector<Trigger> triggers,
               const std::string& guidance = "Do the thing.")
{
    SkillFile s;
    s.skill_id = id;
    s.name = "Skill " + id;
    s.category = cat;
    s.triggers = std::move(triggers);
    s.guidance = guidance;
    s.version_hash = compute_skill_hash(s);
    return s;
}

TaskSpec task_with(const std::string& description)
{
    TaskSpec t;
    t.task_id = "t";
    t.description = description;
    t.module_header = "module t(input a, output y);";
    t.visible_testbench = "tb.v";
    return t;
}

} // namespace

TEST_SUITE("skills")
{
    TEST_CASE("serialize and parse round-trip with weights")
    {
        auto s = make("narrow", SkillCategory::rtl_optimization, {{"area", 1.0}, {"mux", 2.5}},
                      "Line one.\nLine two: with colon.");
        s.equivalence_risk = Risk::high;
        s.version_hash = compute_skill_hash(s);
        auto back = parse_skill(serialize_skill(s));
        CHECK(back == s);
    }

    TEST_CASE("hash covers name, triggers and guidance only")
    {
        auto s = make("a", SkillCategory::timing_rewrite, {{"delay", 1.0}});
        auto t = s;
        t.category = SkillCategory::rtl_optimization;
        t.equivalence_risk = Risk::high;
        CHECK(compute_skill_hash(t) == compute_skill_hash(s));
        t.guidance += " More.";
        CHECK(compute_skill_hash(t) != compute_skill_hash(s));
        t = s;
        t.triggers[0].weight = 2.0;
        CHECK(compute_skill_hash(t) != compute_skill_hash(s));
    }

    TEST_CASE("validation rejects bad skills")
    {
        auto s = make("ok", SkillCategory::functional_generation, {{"adder", 1.0}});
        CHECK_NOTHROW(validate_skill(s));
        auto bad = s;
        bad.triggers.clear();
        bad.version_hash.clear();
        CHECK_THROWS_AS(validate_skill(bad), ConfigError);
        bad = s;
        bad.skill_id = "has space";
        CHECK_THROWS_AS(validate_skill(bad), ConfigError);
        bad = s;
        bad.version_hash = "deadbeef";
        CHECK_THROWS_AS(validate_skill(bad), ConfigError);
        CHECK_THROWS(skill_category_from_string("misc"));
    }

    TEST_CASE("six shipped skills load with an empty registry")
    {
        TempDir d("lib");
        CHECK(init_skill_library(d.path()) == 6);
        auto lib = load_library(d.path());
        CHECK(lib.skills.size() == 6);
        CHECK(lib.diagnostics.empty());
        std::set<SkillCategory> cats;
        for (auto& [id, s] : lib.skills)
            cats.insert(s.category);
        CHECK(cats.size() == 6);
        CHECK(init_skill_library(d.path()) == 0);
    }

    TEST_CASE("duplicate ids name both paths; malformed files are skipped")
    {
        TempDir d("dup");
        auto s = make("twin", SkillCategory::timing_rewrite, {{"delay", 1.0}});
        write_file(d.path() / "a" / "twin.skill", serialize_skill(s));
        write_file(d.path() / "b" / "twin.skill", serialize_skill(s));
        try {
            load_library(d.path());
            FAIL("expected a duplicate id error");
        } catch (const ConfigError& e) {
            std::string msg = e.what();
            CHECK(msg.find((d.path() / "a" / "twin.skill").string()) != std::string::npos);
            CHECK(msg.find((d.path() / "b" / "twin.skill").string()) != std::string::npos);
        }

        TempDir e("bad");
        write_file(e.path() / "x" / "good.skill",
                   serialize_skill(make("good", SkillCategory::timing_rewrite, {{"delay", 1.0}})));
        write_file(e.path() / "x" / "notrig.skill",
                   "---\nid: notrig\nname: No triggers\ncategory: timing_rewrite\n---\nBody.\n");
        auto lib = load_library(e.path());
        CHECK(lib.skills.size() == 1);
        REQUIRE(lib.diagnostics.size() == 1);
        CHECK(lib.diagnostics[0].find("notrig.skill") != std::string::npos);
        CHECK_THROWS_AS(load_library(e.path() / "missing"), ConfigError);
    }

    TEST_CASE("trigger match ranks the pipeline skill first")
    {
        SkillLibrary lib;
        lib.skills["cut"] = make("cut", SkillCategory::timing_rewrite, {{"pipeline", 1.0}});
        lib.skills["area"] = make("area", SkillCategory::rtl_optimization, {{"area", 1.0}});
        lib.skills["adder"] = make("adder", SkillCategory::functional_generation, {{"sum", 0.5}});
        auto task = task_with("A three-stage pipeline that computes a sum.");
        auto out = retrieve(lib, task, {}, DiversityPlan{}, RetrievalConfig{});
        REQUIRE(out.size() == 2);
        CHECK(out[0].ref.skill_id == "cut");
        CHECK(out[1].ref.skill_id == "adder");
        CHECK(out[0].ref.mode == RetrievalMode::retrieved);
    }

    TEST_CASE("validated history boosts equal matches; limit 0 is empty; static set")
    {
        SkillLibrary lib;
        lib.skills["a_plain"] = make("a_plain", SkillCategory::timing_rewrite, {{"delay", 1.0}});
        lib.skills["b_validated"] = make("b_validated", SkillCategory::timing_rewrite, {{"delay", 1.0}});
        RegistryEntry e;
        e.skill_id = "b_validated";
        e.history = {{"h1", 1, PublicationMode::validated}, {"h2", 2, PublicationMode::validated}};
        e.validated_count = 2;
        lib.registry["b_validated"] = e;
        auto task = task_with("Reduce delay.");
        RetrievalConfig cfg;
        auto out = retrieve(lib, task, {}, DiversityPlan{}, cfg);
        REQUIRE(out.size() == 2);
        CHECK(out[0].ref.skill_id == "b_validated");
        CHECK(out[0].boost == doctest::Approx(1.0));
        cfg.boost_cap = 0.3;
        CHECK(retrieve(lib, task, {}, DiversityPlan{}, cfg)[0].boost == doctest::Approx(0.3));

        cfg.limit = 0;
        CHECK(retrieve(lib, task, {}, DiversityPlan{}, cfg).empty());

        cfg = RetrievalConfig{};
        cfg.enabled = false;
        cfg.static_set = {"a_plain", "missing"};
        out = retrieve(lib, task_with("nothing relevant"), {}, DiversityPlan{}, cfg);
        REQUIRE(out.size() == 1);
        CHECK(out[0].ref.mode == RetrievalMode::static_set);
    }

    TEST_CASE("hint tags and plan tags feed retrieval context")
    {
        DiversityPlan plan;
        plan.focus = Focus::mixed;
        plan.path_select = PathSelect::timing_critical;
        auto ctx = retrieval_context(task_with("Adder."), {"signedness"}, plan);
        CHECK(ctx.count("signedness"));
        CHECK(ctx.count("timing_critical"));
        CHECK(ctx.count("timing"));
        CHECK(ctx.count("mixed"));
        CHECK(ctx.count("adder"));
    }

    TEST_CASE("write_skill: new immediate, validated improve, identical republish skip")
    {
        TempDir d("write");
        auto lib = load_library((fs::create_directories(d.path() / "lib"), d.path() / "lib"));
        auto s = make("fresh", SkillCategory::simulator_repair, {{"reset", 1.0}});
        auto w = write_skill(lib, s, PublicationMode::immediate);
        CHECK(w.status == WriteStatus::written);
        CHECK(w.entry.history.size() == 1);
        CHECK(w.entry.validated_count == 0);

        s.guidance = "Improved guidance.";
        w = write_skill(lib, s, PublicationMode::validated);
        CHECK(w.entry.history.size() == 2);
        CHECK(w.entry.validated_count == 1);
        CHECK(w.entry.current_hash() == compute_skill_hash(s));

        auto before = read_file(lib.registry_path());
        w = write_skill(lib, s, PublicationMode::validated);
        CHECK(w.status == WriteStatus::skipped);
        CHECK(read_file(lib.registry_path()) == before);

        auto reloaded = load_library(d.path() / "lib");
        CHECK(reloaded.registry.at("fresh") == lib.registry.at("fresh"));
        CHECK(reloaded.skills.at("fresh") == lib.skills.at("fresh"));
    }

    TEST_CASE("crash before rename leaves file and registry untouched")
    {
        TempDir d("crash");
        fs::create_directories(d.path());
        auto lib = load_library(d.path());
        auto s = make("stable", SkillCategory::simulator_repair, {{"reset", 1.0}}, "Original.");
        write_skill(lib, s, PublicationMode::immediate);
        auto path = lib.paths.at("stable");
        auto file_before = read_file(path);
        auto reg_before = read_file(lib.registry_path());
        auto changed = s;
        changed.guidance = "Changed.";
        CHECK_THROWS(write_skill(lib, changed, PublicationMode::immediate, true));
        CHECK(read_file(path) == file_before);
        CHECK(read_file(lib.registry_path()) == reg_before);
        auto reloaded = load_library(d.path());
        CHECK(reloaded.skills.at("stable").guidance == "Original.");
    }

    TEST_CASE("registry is append-only across random writes")
    {
        TempDir d("append");
        auto lib = load_library(d.path());
        std::mt19937_64 rng(21);
        std::vector<std::vector<RegistryVersion>> snapshots;
        for (int i = 0; i < 60; ++i) {
            auto s = make("s" + std::to_string(rng() % 3), SkillCategory::rtl_optimization, {{"area", 1.0}},
                          "g" + std::to_string(rng() % 4));
            auto before = lib.registry.count(s.skill_id) ? lib.registry.at(s.skill_id).history
                                                          : std::vector<RegistryVersion>{};
            auto w = write_skill(lib, s, rng() % 2 ? PublicationMode::validated : PublicationMode::immediate);
            auto& after = w.entry.history;
            REQUIRE(after.size() >= before.size());
            CHECK(std::equal(before.begin(), before.end(), after.begin()));
            CHECK(after.size() - before.size() == (w.status == WriteStatus::written ? 1u : 0u));
        }
    }
}
