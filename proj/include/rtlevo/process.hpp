#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace rtlevo {

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    bool launch_failed = false;
    std::string out;
    std::string err;
    std::int64_t wall_time_ms = 0;

    bool ok() const { return !launch_failed && !timed_out && exit_code == 0; }
};

struct ProcessOptions {
    std::filesystem::path cwd;
    std::chrono::milliseconds timeout{60000};
    /// When set, stdout/stderr are captured into these files (and read back).
    std::filesystem::path stdout_file;
    std::filesystem::path stderr_file;
};

/// Runs argv[0] (PATH-resolved) in its own process group. On timeout the
/// whole group gets SIGKILL.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& opts);

} // namespace rtlevo
