#include "rtlevo/process.hpp"

#include "rtlevo/fsutil.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

namespace rtlevo {

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& opts)
{
    ProcessResult res;
    if (argv.empty()) {
        res.launch_failed = true;
        res.err = "empty command";
        return res;
    }

    fs::path exe = find_executable(argv[0]);
    if (exe.empty()) {
        res.launch_failed = true;
        res.err = "executable not found: " + argv[0];
        return res;
    }

    fs::path scratch = opts.cwd.empty() ? fs::temp_directory_path() : opts.cwd;
    fs::create_directories(scratch);
    fs::path out_path = opts.stdout_file;
    fs::path err_path = opts.stderr_file;
    bool tmp_out = out_path.empty();
    bool tmp_err = err_path.empty();
    if (tmp_out)
        out_path = scratch / (".stdout." + std::to_string(::getpid()) + "." +
                              std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    if (tmp_err)
        err_path = scratch / (".stderr." + std::to_string(::getpid()) + "." +
                              std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));

    // Everything the child touches is prepared before fork.
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& a : argv)
        cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    std::string exe_str = exe.string();
    std::string cwd_str = opts.cwd.string();
    std::string out_str = out_path.string();
    std::string err_str = err_path.string();

    auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) {
        res.launch_failed = true;
        res.err = std::string("fork failed: ") + std::strerror(errno);
        return res;
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        if (!cwd_str.empty() && ::chdir(cwd_str.c_str()) != 0)
            ::_exit(127);
        int in = ::open("/dev/null", O_RDONLY);
        int o = ::open(out_str.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        int e = ::open(err_str.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (in < 0 || o < 0 || e < 0)
            ::_exit(127);
        ::dup2(in, 0);
        ::dup2(o, 1);
        ::dup2(e, 2);
        ::execv(exe_str.c_str(), cargv.data());
        ::_exit(127);
    }
    ::setpgid(pid, pid);

    int status = 0;
    auto deadline = start + opts.timeout;
    auto sleep_for = std::chrono::milliseconds(2);
    while (true) {
        pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid)
            break;
        if (r < 0 && errno != EINTR) {
            res.launch_failed = true;
            res.err = std::string("waitpid failed: ") + std::strerror(errno);
            break;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            res.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(sleep_for);
        if (sleep_for < std::chrono::milliseconds(50))
            sleep_for *= 2;
    }
    // Orphans left in the group (e.g. make children) do not outlive us.
    ::kill(-pid, SIGKILL);

    res.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    if (!res.timed_out && !res.launch_failed) {
        if (WIFEXITED(status))
            res.exit_code = WEXITSTATUS(status);
        else if (WIFSIGNALED(status))
            res.exit_code = 128 + WTERMSIG(status);
    }

    std::error_code ec;
    if (fs::exists(out_path, ec))
        res.out = read_file(out_path);
    if (fs::exists(err_path, ec))
        res.err += read_file(err_path);
    if (tmp_out)
        fs::remove(out_path, ec);
    if (tmp_err)
        fs::remove(err_path, ec);
    return res;
}

} // namespace rtlevo
