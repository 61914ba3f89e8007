#pragma once

#include "rtlevo/evaluators.hpp"
#include "rtlevo/llm.hpp"
#include "rtlevo/scoring.hpp"
#include "rtlevo/search.hpp"
#include "rtlevo/skills.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rtlevo {

enum ExitCode { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitLock = 3, kExitToolMissing = 4 };

/// One declarative run document. Relative paths resolve against its directory.
struct RunManifest {
    std::string run_id;
    fs::path runs_dir;
    std::vector<fs::path> tasks;
    SearchConfig search;
    std::string score_mode = "correctness_only";
    ScoreConfig score;
    EvaluatorConfig evaluator;
    ProviderConfig provider;
    fs::path skills_dir;
    /// Prompt template overrides; defaults to <skills_dir>/templates.
    fs::path templates_dir;
};

struct GlobalOptions {
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool dry_run = false;
};

/// Throws ConfigError naming the offending field.
RunManifest load_manifest(const fs::path& path);
RunManifest parse_manifest(const json& j, const fs::path& base);

/// Every manifest, task and tool check that run performs before touching disk.
std::vector<TaskSpec> check_manifest(const RunManifest& m);

struct RunCommandResult {
    int exit_code = kExitOk;
    std::vector<RunSummary> summaries;
    fs::path run_dir;
};

RunCommandResult cmd_run(const GlobalOptions& g, std::ostream& out, std::ostream& err);

struct EvolveOptions {
    fs::path store;
    std::vector<fs::path> runs;
    std::string mode = "immediate";
    fs::path skills_dir;
    fs::path queue_dir;
    /// Scripted provider directory; overrides the manifest provider.
    fs::path script_dir;
    int tau_pass = 2;
    int tau_promote = 1;
};

int cmd_evolve(const GlobalOptions& g, const EvolveOptions& o, std::ostream& out, std::ostream& err);

struct WorkerCommandOptions {
    fs::path queue_dir;
    std::string worker_id;
    int max_jobs = 1;
    fs::path script_dir;
    fs::path templates_dir;
};

int cmd_worker(const GlobalOptions& g, const WorkerCommandOptions& o, std::ostream& out, std::ostream& err);
int cmd_publish(const GlobalOptions& g, const fs::path& queue_dir, const fs::path& skills_dir, std::ostream& out,
                std::ostream& err);
/// Writes the JSON document to `output` when given, else to `out`.
int cmd_report(const std::vector<fs::path>& roots, const std::optional<fs::path>& output, bool table,
               std::ostream& out, std::ostream& err);
int cmd_init_skills(const fs::path& dir, std::ostream& out, std::ostream& err);
/// Task documents plus golden and overfit reference RTL per profile.
int cmd_emit_gemm_tasks(const fs::path& out_dir, std::ostream& out, std::ostream& err);

} // namespace rtlevo
