#include "log_io.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pachyderm/errors.hpp"

namespace pachyderm::detail {

namespace {

[[noreturn]] void io_fail(const std::string& what) {
    throw Error(Errc::io_failure, what + ": " + std::strerror(errno));
}

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t read_u32_be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

// Process start token from /proc/<pid>/stat field 22; 0 when unavailable.
uint64_t proc_start_token(pid_t pid) {
    char path[64];
    std::snprintf(path, sizeof path, "/proc/%d/stat", static_cast<int>(pid));
    std::ifstream in(path);
    if (!in) return 0;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    // Fields after the parenthesized comm cannot contain ')'.
    size_t close = content.rfind(')');
    if (close == std::string::npos) return 0;
    std::istringstream rest(content.substr(close + 1));
    std::string field;
    for (int i = 3; i <= 21; ++i) rest >> field;
    uint64_t starttime = 0;
    rest >> starttime;
    return starttime;
}

}  // namespace

uint32_t crc32_of(std::span<const uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    return static_cast<uint32_t>(::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::vector<uint8_t> make_header() {
    std::vector<uint8_t> out(kMagic, kMagic + 8);
    out.push_back(static_cast<uint8_t>(kFormatVersion >> 8));
    out.push_back(static_cast<uint8_t>(kFormatVersion & 0xFF));
    out.resize(kHeaderSize, 0);
    return out;
}

bool header_ok(std::span<const uint8_t> file) {
    if (file.size() < kHeaderSize) return false;
    if (std::memcmp(file.data(), kMagic, 8) != 0) return false;
    const uint16_t version = static_cast<uint16_t>((file[8] << 8) | file[9]);
    return version == kFormatVersion;
}

void append_log_record(std::vector<uint8_t>& out, RecKind kind,
                       std::span<const uint8_t> payload) {
    const uint32_t len = static_cast<uint32_t>(1 + payload.size());
    put_u32_be(out, len);
    const size_t body_start = out.size();
    out.push_back(static_cast<uint8_t>(kind));
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32_be(out, crc32_of(std::span<const uint8_t>(out.data() + body_start, len)));
}

ParseOutcome parse_record(std::span<const uint8_t> file, size_t pos, RawRecord& out) {
    if (pos >= file.size()) return ParseOutcome::end_of_file;
    if (pos + 4 > file.size()) return ParseOutcome::truncated;
    const uint32_t len = read_u32_be(file.data() + pos);
    if (len < 1 || len > kMaxRecordLength) return ParseOutcome::truncated;
    if (pos + 4 + len + 4 > file.size()) return ParseOutcome::truncated;
    const std::span<const uint8_t> body = file.subspan(pos + 4, len);
    const uint32_t stored_crc = read_u32_be(file.data() + pos + 4 + len);
    out.kind = body[0];
    out.payload = body.subspan(1);
    out.total_size = 4 + len + 4;
    if (crc32_of(body) != stored_crc) return ParseOutcome::bad_crc;
    return ParseOutcome::ok;
}

int open_rw(const std::string& path, bool create_new) {
    int flags = O_RDWR;
    if (create_new) flags |= O_CREAT | O_EXCL;
    int fd = ::open(path.c_str(), flags, 0644);
    if (fd < 0) io_fail("open " + path);
    return fd;
}

void close_quiet(int fd) {
    if (fd >= 0) ::close(fd);
}

uint64_t file_size(int fd) {
    struct stat st;
    if (fstat(fd, &st) != 0) io_fail("fstat");
    return static_cast<uint64_t>(st.st_size);
}

std::vector<uint8_t> read_all(int fd) {
    const uint64_t size = file_size(fd);
    std::vector<uint8_t> buf(size);
    if (size > 0) pread_exact(fd, buf.data(), size, 0);
    return buf;
}

void pread_exact(int fd, void* buf, size_t len, uint64_t offset) {
    uint8_t* p = static_cast<uint8_t*>(buf);
    while (len > 0) {
        ssize_t n = ::pread(fd, p, len, static_cast<off_t>(offset));
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("pread");
        }
        if (n == 0) throw Error(Errc::io_failure, "unexpected end of file while reading");
        p += n;
        len -= static_cast<size_t>(n);
        offset += static_cast<uint64_t>(n);
    }
}

void pwrite_exact(int fd, const void* buf, size_t len, uint64_t offset) {
    const uint8_t* p = static_cast<const uint8_t*>(buf);
    while (len > 0) {
        ssize_t n = ::pwrite(fd, p, len, static_cast<off_t>(offset));
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("pwrite");
        }
        p += n;
        len -= static_cast<size_t>(n);
        offset += static_cast<uint64_t>(n);
    }
}

void truncate_to(int fd, uint64_t size) {
    if (ftruncate(fd, static_cast<off_t>(size)) != 0) io_fail("ftruncate");
}

void sync_data(int fd) {
    if (fdatasync(fd) != 0) io_fail("fdatasync");
}

void write_file_atomically(const std::string& tmp_path, const std::string& final_path,
                           std::span<const uint8_t> bytes) {
    ::unlink(tmp_path.c_str());
    int fd = ::open(tmp_path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd < 0) io_fail("open " + tmp_path);
    try {
        pwrite_exact(fd, bytes.data(), bytes.size(), 0);
        sync_data(fd);
    } catch (...) {
        close_quiet(fd);
        ::unlink(tmp_path.c_str());
        throw;
    }
    close_quiet(fd);
    if (::rename(tmp_path.c_str(), final_path.c_str()) != 0) {
        int saved = errno;
        ::unlink(tmp_path.c_str());
        errno = saved;
        io_fail("rename " + tmp_path);
    }
    // Persist the rename itself.
    std::string dir = final_path;
    size_t slash = dir.rfind('/');
    dir = slash == std::string::npos ? "." : dir.substr(0, slash + 1);
    int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (dfd >= 0) {
        fsync(dfd);
        close_quiet(dfd);
    }
}

LockSentinel LockSentinel::acquire(const std::string& store_path, bool force) {
    const std::string lock_path = store_path + ".lock";
    const pid_t self = getpid();
    const uint64_t self_token = proc_start_token(self);

    for (int attempt = 0; attempt < 3; ++attempt) {
        int fd = ::open(lock_path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
        if (fd >= 0) {
            char buf[64];
            int n = std::snprintf(buf, sizeof buf, "%d %llu\n", static_cast<int>(self),
                                  static_cast<unsigned long long>(self_token));
            pwrite_exact(fd, buf, static_cast<size_t>(n), 0);
            close_quiet(fd);
            LockSentinel lock;
            lock.path_ = lock_path;
            lock.held_ = true;
            return lock;
        }
        if (errno != EEXIST) io_fail("open " + lock_path);

        if (force) {
            ::unlink(lock_path.c_str());
            continue;
        }

        // Stale if the recorded process is gone or its start token changed.
        pid_t owner = 0;
        unsigned long long owner_token = 0;
        bool stale = true;
        if (std::ifstream in(lock_path); in) {
            in >> owner >> owner_token;
            if (owner > 0) {
                if (kill(owner, 0) == 0 || errno != ESRCH) {
                    const uint64_t live_token = proc_start_token(owner);
                    stale = owner_token != 0 && live_token != 0 && live_token != owner_token;
                } else {
                    stale = true;
                }
            }
        }
        if (!stale)
            throw Error(Errc::locked, "store is locked by pid " + std::to_string(owner) +
                                          " (" + lock_path + ")")
                .with_detail(store_path);
        ::unlink(lock_path.c_str());
    }
    throw Error(Errc::locked, "could not acquire " + lock_path).with_detail(store_path);
}

void LockSentinel::release() {
    if (held_) {
        ::unlink(path_.c_str());
        held_ = false;
    }
}

}  // namespace pachyderm::detail
