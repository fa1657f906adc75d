#pragma once
// Internal log framing, checksums, POSIX file helpers and the single-writer
// lock sentinel. Not part of the public headers.
//
// File header (16 bytes): magic "PCHYDRM1" + format version (u16 BE = 1) +
// 6 reserved zero bytes. Then log records back to back:
//   length (u32 BE, covers kind+payload) | kind (1 byte) | payload |
//   crc (u32 BE, CRC-32 of kind+payload)
// A transaction is a maximal run of non-commit records followed by one
// commit record.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pachyderm::detail {

inline constexpr char kMagic[8] = {'P', 'C', 'H', 'Y', 'D', 'R', 'M', '1'};
inline constexpr uint16_t kFormatVersion = 1;
inline constexpr size_t kHeaderSize = 16;
inline constexpr size_t kFrameOverhead = 8;  // length + crc
inline constexpr uint32_t kMaxRecordLength = 1u << 30;

enum class RecKind : uint8_t {
    schema_define = 0x01,
    schema_redefine = 0x02,
    instance_write = 0x03,
    instance_delete = 0x04,
    txn_commit = 0x05,
};

uint32_t crc32_of(std::span<const uint8_t> bytes);

std::vector<uint8_t> make_header();
bool header_ok(std::span<const uint8_t> file);

void append_log_record(std::vector<uint8_t>& out, RecKind kind,
                       std::span<const uint8_t> payload);

struct RawRecord {
    uint8_t kind = 0;
    std::span<const uint8_t> payload;
    size_t total_size = 0;
};

enum class ParseOutcome { ok, end_of_file, truncated, bad_crc };

// Parses the frame at `pos`; never throws. Unknown kinds parse fine (the
// caller decides).
ParseOutcome parse_record(std::span<const uint8_t> file, size_t pos, RawRecord& out);

// POSIX wrappers; all throw Error(io_failure) with errno context.
int open_rw(const std::string& path, bool create_new);
void close_quiet(int fd);
uint64_t file_size(int fd);
std::vector<uint8_t> read_all(int fd);
void pread_exact(int fd, void* buf, size_t len, uint64_t offset);
void pwrite_exact(int fd, const void* buf, size_t len, uint64_t offset);
void truncate_to(int fd, uint64_t size);
void sync_data(int fd);
void write_file_atomically(const std::string& tmp_path, const std::string& final_path,
                           std::span<const uint8_t> bytes);

// Single-writer lock: a sentinel file beside the store recording the owning
// pid and its process-start token. A sentinel whose process is gone (or
// whose start token no longer matches the pid) is stale and gets broken
// automatically; force breaks unconditionally.
class LockSentinel {
public:
    LockSentinel() = default;
    ~LockSentinel() { release(); }
    LockSentinel(LockSentinel&& other) noexcept { *this = std::move(other); }
    LockSentinel& operator=(LockSentinel&& other) noexcept {
        if (this != &other) {
            release();
            path_ = std::move(other.path_);
            held_ = other.held_;
            other.held_ = false;
        }
        return *this;
    }
    LockSentinel(const LockSentinel&) = delete;
    LockSentinel& operator=(const LockSentinel&) = delete;

    // Throws locked(store_path) / io_failure.
    static LockSentinel acquire(const std::string& store_path, bool force);
    void release();
    const std::string& path() const { return path_; }

private:
    std::string path_;
    bool held_ = false;
};

}  // namespace pachyderm::detail
