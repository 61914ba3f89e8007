#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rtlevo {

namespace fs = std::filesystem;

std::int64_t now_ms();

std::string read_file(const fs::path& path);
std::vector<std::string> read_lines(const fs::path& path);

/// Writes to a sibling temp file, fsyncs, then renames over `path`.
/// With `fail_before_rename` the temp file is written and an exception is
/// thrown before the rename, which tests use to inject a crash.
void write_file_atomic(const fs::path& path, std::string_view content,
                       bool fail_before_rename = false);

void write_file(const fs::path& path, std::string_view content);

/// Appends one line (a trailing '\n' is added) under an exclusive flock.
/// The whole line goes out in a single write(2) on an O_APPEND descriptor.
void append_line_locked(const fs::path& path, std::string_view line);

/// Advisory exclusive lock on a lock file, released on destruction.
class FileLock {
public:
    /// Blocks until the lock is acquired.
    explicit FileLock(const fs::path& path);
    /// Non-blocking acquisition; `owns()` tells whether it succeeded.
    FileLock(const fs::path& path, bool try_only);
    ~FileLock();

    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

    bool owns() const { return owns_; }

private:
    int fd_ = -1;
    bool owns_ = false;
};

/// Creates `path` exclusively (O_CREAT|O_EXCL). Returns false if it exists.
bool create_exclusive(const fs::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);

/// Lower-case, split on anything that is not alnum or '_'.
std::vector<std::string> tokenize(std::string_view text);

std::string trim(std::string_view s);

/// Deterministic truncation: keeps the first `cap` bytes and appends a marker
/// naming how many bytes were dropped.
std::string truncate_with_marker(std::string_view text, std::size_t cap);

/// Resolves a command name against PATH (or checks an explicit path).
/// Returns an empty path when not found or not executable.
fs::path find_executable(std::string_view name);

} // namespace rtlevo
