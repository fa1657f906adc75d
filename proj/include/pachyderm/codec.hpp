#pragma once
// Canonical, self-delimiting binary encoding of values and instance records.
//
// Wire format: one tag byte, then the payload.
//   0x00 unit            (no payload)
//   0x01 bool            (1 byte, 0x00/0x01)
//   0x02 int             (zigzag LEB128)
//   0x03 float           (8 bytes, IEEE 754 bit pattern, big-endian)
//   0x04 text            (LEB128 byte length + UTF-8)
//   0x05 bytes           (LEB128 length + raw)
//   0x06 symbol          (LEB128 byte length + UTF-8)
//   0x07 list            (LEB128 count + elements)
//   0x08 map             (LEB128 count + key,value pairs, keys in ascending
//                         encoded-byte order)
//   0x09 set             (LEB128 count + members in ascending encoded-byte
//                         order)
//   0x0A ref             (8 bytes, oid big-endian)
//
// Record layout: oid (8 bytes BE) + class name (LEB128 len + UTF-8) + class
// version (LEB128) + slot count (LEB128) + per slot: name (LEB128 len +
// UTF-8) + encoded value; slots in ascending name-byte order.
//
// Encoding is deterministic, so byte equality backs the round-trip tests;
// decoding consumes exactly one value and enforces canonical form.
//
// non_serializable errors carry a path locating the offending sub-value:
// `$` root, `[i]` list element, `{ki}`/`{vi}` map entry key/value, `(i)` set
// member, `.name` record slot.

#include <cstdint>
#include <span>
#include <vector>

#include "pachyderm/record.hpp"
#include "pachyderm/value.hpp"

namespace pachyderm {

struct DecodedValue {
    Value value;
    size_t consumed = 0;
};

// Throws non_serializable if an opaque is reachable inside v.
std::vector<uint8_t> encode_value(const Value& v);
void encode_value_into(std::vector<uint8_t>& out, const Value& v);

// Decodes exactly one value starting at `offset`; `consumed` counts bytes
// from `offset`. Throws unknown_tag, truncated, malformed_utf8,
// non_canonical, malformed; error offsets are absolute into `bytes`.
DecodedValue decode_value(std::span<const uint8_t> bytes, size_t offset = 0);

std::vector<uint8_t> encode_record(const InstanceRecord& r);

// Consumes the whole span; errors mirror decode_value plus duplicate_slot.
InstanceRecord decode_record(std::span<const uint8_t> bytes);
// Incremental form used inside larger blobs.
InstanceRecord decode_record_at(std::span<const uint8_t> bytes, size_t offset,
                                size_t& consumed);

// Unsigned LEB128 and zigzag helpers; shared with the schema and store
// layouts.
void put_uvarint(std::vector<uint8_t>& out, uint64_t v);
uint64_t get_uvarint(std::span<const uint8_t> bytes, size_t& offset);
void put_u64_be(std::vector<uint8_t>& out, uint64_t v);
uint64_t get_u64_be(std::span<const uint8_t> bytes, size_t& offset);
void put_lp_string(std::vector<uint8_t>& out, std::string_view s);
// Validates UTF-8 (throws malformed_utf8 at the string's offset).
std::string get_lp_string(std::span<const uint8_t> bytes, size_t& offset);

}  // namespace pachyderm
