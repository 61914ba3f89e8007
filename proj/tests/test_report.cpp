#include "support.hpp"

#include "rtlevo/report.hpp"

#include <doctest.h>

using namespace rtlevo;
using namespace rtlevo::test;

namespace {

const char* kCompileError = "// @functional: compile_error\n";
const char* kMismatch = "// @functional: mismatch mismatch_count=1 total_samples=8\n";

// Run "a": round 0 = {compile_error, pass}, round 1 = {mismatch, mismatch}.
// Run "b": every minor fails to compile.
// Run "c": one passing ppa minor with synthesis and downstream metrics.
void build_fixture_runs(const fs::path& base)
{
    {
        ScriptedRun run(base / "work-a", ScoreMode::correctness_only, 2, 2);
        run.env.task_dir = base / "runs" / "a" / "toy";
        run.respond(0, 1, kCompileError);
        run.respond(0, 2, "");
        run.default_response(kMismatch);
        run_task(run.env, "a");
    }
    {
        ScriptedRun run(base / "work-b", ScoreMode::correctness_only, 2, 2);
        run.env.task_dir = base / "runs" / "b" / "toy";
        run.default_response(kCompileError);
        run_task(run.env, "b");
    }
    {
        ScriptedRun run(base / "work-c", ScoreMode::ppa, 1, 1, {"functional", "synthesis", "downstream"});
        run.env.task_dir = base / "runs" / "c" / "toy";
        run.default_response("// @synthesis: passed cell_count=40\n"
                             "// @downstream: passed mul_cells=2 downstream_score=0.5\n");
        run_task(run.env, "c");
    }
}

const json& run_row(const json& report, const std::string& label)
{
    for (auto& r : report.at("runs"))
        if (r.at("label") == label)
            return r;
    FAIL("no run " << label);
    throw 0;
}

} // namespace

TEST_SUITE("report")
{
    TEST_CASE("fixture runs give hand-computed rates")
    {
        TempDir d("report");
        build_fixture_runs(d.path());
        std::vector<std::string> warnings;
        auto rep = build_report({d.path() / "runs"}, &warnings);
        CHECK(warnings.empty());
        auto& agg = rep.at("aggregate");
        CHECK(agg.at("run_count") == 3);

        auto& a = run_row(rep, "a/toy");
        CHECK(a.at("final_success") == true);
        CHECK(a.at("compile_pass").get<double>() == doctest::Approx(3.0 / 4));
        CHECK(a.at("promotion_pass").get<double>() == doctest::Approx(1.0));
        CHECK(a.at("promoted_major_count") == 1);
        CHECK_FALSE(a.contains("downstream"));

        auto& b = run_row(rep, "b/toy");
        CHECK(b.at("final_success") == false);
        CHECK(b.at("compile_pass").get<double>() == 0.0);
        CHECK(b.at("promotion_pass").is_null());
        CHECK(b.at("promoted_major_count") == 0);

        auto& c = run_row(rep, "c/toy");
        CHECK(c.at("final_success") == true);
        REQUIRE(c.contains("downstream"));
        CHECK(c.at("downstream").at("cell_count") == 40.0);
        CHECK(c.at("downstream").at("mul_cells") == 2.0);
        CHECK(c.at("downstream").at("abc_delay_proxy").is_null());

        CHECK(agg.at("final_success_rate").get<double>() == doctest::Approx(2.0 / 3));
        CHECK(agg.at("promotion_pass_rate").get<double>() == doctest::Approx(1.0));
        CHECK(agg.at("compile_pass_rate").get<double>() == doctest::Approx((0.75 + 0.0 + 1.0) / 3));
        CHECK(agg.at("avg_promoted_majors").get<double>() == doctest::Approx(2.0 / 3));
        REQUIRE(agg.contains("downstream"));
        CHECK(agg.at("downstream").at("run_count") == 1);
        CHECK(agg.at("downstream").at("mean_cell_count") == 40.0);
        CHECK(agg.at("downstream").at("mean_adp_proxy").is_null());

        auto table = render_report_table(rep);
        CHECK(table.find("a/toy") != std::string::npos);
        CHECK(table.find("downstream (1 runs)") != std::string::npos);
    }

    TEST_CASE("report is a pure function of the history files")
    {
        TempDir d("pure");
        build_fixture_runs(d.path());
        auto first = dump_text(build_report({d.path() / "runs"}));
        CHECK(first == dump_text(build_report({d.path() / "runs", d.path() / "runs" / "a"})));
        CHECK(first.find(d.path().string()) == std::string::npos);
    }

    TEST_CASE("zero runs give an empty report")
    {
        TempDir d("empty");
        auto rep = build_report({d.path()});
        CHECK(rep.at("runs").empty());
        CHECK(rep.at("aggregate").at("run_count") == 0);
        CHECK(rep.at("aggregate").at("final_success_rate").is_null());
        CHECK_FALSE(rep.at("aggregate").contains("downstream"));
    }

    TEST_CASE("an unparseable run is excluded with a warning")
    {
        TempDir d("bad");
        build_fixture_runs(d.path());
        write_file(d.path() / "runs" / "z" / "toy" / "minors.log", "not json\n{\"also\": \"wrong\"}\n");
        std::vector<std::string> warnings;
        auto rep = build_report({d.path() / "runs"}, &warnings);
        CHECK(rep.at("aggregate").at("run_count") == 3);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("z/toy: excluded") == 0);
    }
}
