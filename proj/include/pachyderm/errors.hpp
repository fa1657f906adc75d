#pragma once
// Error taxonomy shared by all pachyderm components.
//
// Every failure surfaces as an Error carrying a machine-checkable code plus
// whatever context the failure site had (byte offset, value path, count).

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pachyderm {

enum class Errc : uint8_t {
    // value construction
    non_scalar_key,
    duplicate_key,
    // codec
    non_serializable,
    unknown_tag,
    truncated,
    malformed_utf8,
    non_canonical,
    duplicate_slot,
    malformed,
    // schema
    already_defined,
    invalid_slot_spec,
    unknown_class,
    unknown_version,
    name_mismatch,
    parse_error,
    // migration
    version_skew,
    hook_failure,
    // objects
    unknown_oid,
    deleted,
    unbound_slot,
    unknown_slot,
    duplicate_hook,
    // graph
    dangling_ref,
    schema_conflict,
    // store
    bad_magic,
    locked,
    io_failure,
    dirty_session,
    concurrent_access,
    session_closed,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    Errc code() const { return code_; }

    // Byte offset into the blob/file, where the failure site had one.
    uint64_t offset() const { return offset_; }
    Error& with_offset(uint64_t off) {
        offset_ = off;
        return *this;
    }

    // Locator string (value path for non_serializable, class/slot names, ...).
    const std::string& detail() const { return detail_; }
    Error& with_detail(std::string d) {
        detail_ = std::move(d);
        return *this;
    }

    // Progress count for partial failures (e.g. aborted eager sweeps).
    uint64_t count() const { return count_; }
    Error& with_count(uint64_t n) {
        count_ = n;
        return *this;
    }

private:
    Errc code_;
    uint64_t offset_ = 0;
    std::string detail_;
    uint64_t count_ = 0;
};

}  // namespace pachyderm
