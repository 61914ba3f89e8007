#pragma once

#include "rtlevo/fsutil.hpp"
#include "rtlevo/model.hpp"
#include "rtlevo/search.hpp"

#include <random>
#include <string>

namespace rtlevo::test {

inline fs::path fixtures() { return fs::path(RTLEVO_FIXTURES); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t")
    {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("rtlevo-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

/// A task whose checks come from `// @evaluator: outcome` annotations.
inline TaskSpec annotated_task(const fs::path& dir, const std::string& id = "toy")
{
    TaskSpec t;
    t.task_id = id;
    t.description = "Toy adder used by scripted runs.";
    t.module_header = "module " + id + "(input [3:0] a, input [3:0] b, output [4:0] y);";
    t.visible_testbench = dir / "tb.v";
    t.tags = {"combinational"};
    write_file(t.visible_testbench, "// unused by the annotated backend\n");
    return t;
}

/// Module body for `task` carrying the given annotation lines.
inline std::string annotated_module(const TaskSpec& task, const std::string& annotations, const std::string& tag = "")
{
    std::string out = "```verilog\n" + task.module_header + "\n";
    out += annotations;
    if (!tag.empty())
        out += "  // " + tag + "\n";
    out += "  assign y = a + b;\nendmodule\n```\n";
    return out;
}

inline void script(const fs::path& dir, const std::string& key, const std::string& text)
{
    write_file(dir / (key + ".response"), text);
}

inline std::string random_text(std::mt19937_64& rng, int max_len)
{
    static const std::vector<std::string> alphabet{"a", "b", "c", "X", "Y", "Z", "0", "1", "9", " ", "_", "-", "\n",
                                                   "\t", "\"", "\\", "/", "{", "}", "[", "]", ":", ",", "é", "→"};
    std::uniform_int_distribution<int> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string s;
    int n = len(rng);
    for (int i = 0; i < n; ++i)
        s += alphabet[pick(rng)];
    return s;
}

inline EvaluatorResult random_result(std::mt19937_64& rng, const std::string& name)
{
    static const Outcome outcomes[] = {Outcome::passed,        Outcome::mismatch, Outcome::compile_error,
                                       Outcome::syntax_error,  Outcome::timeout,  Outcome::unknown_failure,
                                       Outcome::tool_unavailable};
    EvaluatorResult r;
    r.evaluator = name;
    r.outcome = outcomes[rng() % 7];
    r.passed = r.outcome == Outcome::passed;
    std::uniform_real_distribution<double> val(-1000.0, 1000.0);
    int n = static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i)
        r.metrics["m" + std::to_string(rng() % 10)] = val(rng);
    r.feedback = r.passed ? random_text(rng, 8) : "fail " + random_text(rng, 40);
    return r;
}

inline CandidateRecord random_record(std::mt19937_64& rng)
{
    static const char* names[] = {"functional", "synthesis", "timing", "downstream", "heldout", "eda"};
    CandidateRecord r;
    r.task_id = "task_" + std::to_string(rng() % 5);
    r.candidate.version = {static_cast<int>(rng() % 4), static_cast<int>(1 + rng() % 6)};
    r.candidate.rtl_text = "module m;\n" + random_text(rng, 60) + "\nendmodule\n";
    r.candidate.strategy = static_cast<Strategy>(rng() % 3);
    r.candidate.plan.focus = static_cast<Focus>(rng() % 3);
    r.candidate.plan.path_select = static_cast<PathSelect>(rng() % 4);
    for (int i = 0, n = static_cast<int>(rng() % 3); i < n; ++i)
        r.candidate.skill_refs.push_back({"skill_" + std::to_string(rng() % 6),
                                          rng() % 2 ? RetrievalMode::retrieved : RetrievalMode::static_set});
    if (r.candidate.strategy == Strategy::repair || rng() % 2)
        r.candidate.parent = VersionId{static_cast<int>(rng() % 3), static_cast<int>(1 + rng() % 5)};
    if (rng() % 3 == 0)
        r.candidate.notes.push_back(random_text(rng, 20));
    if (rng() % 4 == 0)
        r.candidate.proposed_skills.push_back("rtl_optimization/p" + std::to_string(rng() % 3));
    int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i)
        r.results.push_back(random_result(rng, names[i]));
    std::uniform_real_distribution<double> score(0.0, 100.0);
    r.score = score(rng);
    r.eligible = rng() % 2;
    r.breakdown["functional"] = score(rng);
    r.breakdown["area"] = -score(rng);
    if (rng() % 2)
        r.artifacts["synthesis"] = {"artifacts/0.1/synthesis/netlist.json"};
    r.wall_time_ms["functional"] = static_cast<std::int64_t>(rng() % 100000);
    r.timestamp_ms = static_cast<std::int64_t>(rng() % 2000000000000ULL);
    return r;
}

/// Search environment over the annotated backend and a scripted provider
/// reading from `<root>/script`; run output goes to `<root>/runs/<task>`.
struct ScriptedRun {
    fs::path root;
    TaskSpec task;
    std::unique_ptr<ScriptedProvider> provider;
    SearchEnv env;

    ScriptedRun(const fs::path& dir, ScoreMode mode, int rounds, int minors, std::vector<std::string> enabled = {"functional"})
        : root(dir), task(annotated_task(dir, "toy"))
    {
        fs::create_directories(dir / "script");
        provider = std::make_unique<ScriptedProvider>(dir / "script");
        env.task = &task;
        env.search.rounds = rounds;
        env.search.minors = minors;
        env.search.strategy_pool = {Strategy::direct};
        env.score = preset(mode);
        env.evaluator.backend = "annotated";
        env.evaluator.enabled = std::move(enabled);
        env.evaluators = make_evaluators(env.evaluator);
        env.provider = provider.get();
        env.task_dir = dir / "runs" / task.task_id;
    }

    /// Response for major `round`, minor `k`.
    void respond(int round, int k, const std::string& annotations, const std::string& tag = "")
    {
        script(root / "script", task.task_id + "/" + std::to_string(round) + "." + std::to_string(k),
               annotated_module(task, annotations, tag));
    }
    void respond_raw(int round, int k, const std::string& text)
    {
        script(root / "script", task.task_id + "/" + std::to_string(round) + "." + std::to_string(k), text);
    }
    /// Fallback for every unscripted key.
    void default_response(const std::string& annotations)
    {
        write_file(root / "script" / "default.response", annotated_module(task, annotations));
    }
};

} // namespace rtlevo::test
