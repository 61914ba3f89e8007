#include "rtlevo/fsutil.hpp"

#include "rtlevo/error.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <sstream>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

namespace rtlevo {

std::int64_t now_ms()
{
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw StorageError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw StorageError("cannot read " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

namespace {

void write_all(int fd, std::string_view data, const fs::path& path)
{
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw StorageError("write failed on " + path.string() + ": " + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

} // namespace

void write_file_atomic(const fs::path& path, std::string_view content, bool fail_before_rename)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0)
        throw StorageError("cannot open " + tmp.string() + ": " + std::strerror(errno));
    try {
        write_all(fd, content, tmp);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::fsync(fd);
    ::close(fd);
    if (fail_before_rename)
        throw StorageError("injected failure before rename of " + path.string());
    if (::rename(tmp.c_str(), path.c_str()) != 0)
        throw StorageError("rename failed for " + path.string() + ": " + std::strerror(errno));
}

void write_file(const fs::path& path, std::string_view content)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw StorageError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw StorageError("write failed on " + path.string());
}

void append_line_locked(const fs::path& path, std::string_view line)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0)
        throw StorageError("cannot open " + path.string() + " for append: " + std::strerror(errno));
    std::string buf(line);
    buf.push_back('\n');
    ::flock(fd, LOCK_EX);
    try {
        write_all(fd, buf, path);
    } catch (...) {
        ::flock(fd, LOCK_UN);
        ::close(fd);
        throw;
    }
    ::flock(fd, LOCK_UN);
    ::close(fd);
}

FileLock::FileLock(const fs::path& path) : FileLock(path, false) {}

FileLock::FileLock(const fs::path& path, bool try_only)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0)
        throw StorageError("cannot open lock " + path.string() + ": " + std::strerror(errno));
    int op = LOCK_EX | (try_only ? LOCK_NB : 0);
    owns_ = ::flock(fd_, op) == 0;
}

FileLock::~FileLock()
{
    if (fd_ >= 0) {
        if (owns_)
            ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

bool create_exclusive(const fs::path& path, std::string_view content)
{
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            return false;
        throw StorageError("cannot create " + path.string() + ": " + std::strerror(errno));
    }
    try {
        write_all(fd, content, path);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    return true;
}

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc) || c == '_') {
            cur.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

std::string truncate_with_marker(std::string_view text, std::size_t cap)
{
    if (text.size() <= cap)
        return std::string(text);
    std::string out(text.substr(0, cap));
    out += "\n[... truncated " + std::to_string(text.size() - cap) + " bytes]";
    return out;
}

fs::path find_executable(std::string_view name)
{
    if (name.empty())
        return {};
    auto executable = [](const fs::path& p) {
        struct stat st{};
        return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
    };
    if (name.find('/') != std::string_view::npos) {
        fs::path p(name);
        return executable(p) ? p : fs::path{};
    }
    const char* path_env = std::getenv("PATH");
    if (!path_env)
        return {};
    std::string_view path(path_env);
    std::size_t start = 0;
    while (start <= path.size()) {
        std::size_t end = path.find(':', start);
        if (end == std::string_view::npos)
            end = path.size();
        std::string_view dir = path.substr(start, end - start);
        if (!dir.empty()) {
            fs::path candidate = fs::path(dir) / name;
            if (executable(candidate))
                return candidate;
        }
        start = end + 1;
    }
    return {};
}

} // namespace rtlevo
