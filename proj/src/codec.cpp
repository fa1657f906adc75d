#include "pachyderm/codec.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>

namespace pachyderm {

namespace {

constexpr uint8_t kTagUnit = 0x00;
constexpr uint8_t kTagBool = 0x01;
constexpr uint8_t kTagInt = 0x02;
constexpr uint8_t kTagFloat = 0x03;
constexpr uint8_t kTagText = 0x04;
constexpr uint8_t kTagBytes = 0x05;
constexpr uint8_t kTagSymbol = 0x06;
constexpr uint8_t kTagList = 0x07;
constexpr uint8_t kTagMap = 0x08;
constexpr uint8_t kTagSet = 0x09;
constexpr uint8_t kTagRef = 0x0A;

// Guards the recursive decoder against hostile nesting.
constexpr size_t kMaxDepth = 512;

uint64_t zigzag(int64_t n) {
    return (static_cast<uint64_t>(n) << 1) ^ static_cast<uint64_t>(n >> 63);
}

int64_t unzigzag(uint64_t z) {
    return static_cast<int64_t>(z >> 1) ^ -static_cast<int64_t>(z & 1);
}

// Builds "$.slot{k0}[2]"-style locators lazily, only on failure.
struct PathStack {
    std::vector<std::string> parts;

    std::string str() const {
        std::string out = "$";
        for (const auto& p : parts) out += p;
        return out;
    }
};

void encode_into(std::vector<uint8_t>& out, const Value& v, PathStack& path);

void encode_sorted_chunks(std::vector<uint8_t>& out,
                          std::vector<std::pair<std::vector<uint8_t>, std::vector<uint8_t>>>& chunks) {
    std::sort(chunks.begin(), chunks.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, rest] : chunks) {
        out.insert(out.end(), key.begin(), key.end());
        out.insert(out.end(), rest.begin(), rest.end());
    }
}

void encode_into(std::vector<uint8_t>& out, const Value& v, PathStack& path) {
    switch (v.kind()) {
        case Value::Kind::unit:
            out.push_back(kTagUnit);
            break;
        case Value::Kind::boolean:
            out.push_back(kTagBool);
            out.push_back(v.as_bool() ? 0x01 : 0x00);
            break;
        case Value::Kind::integer:
            out.push_back(kTagInt);
            put_uvarint(out, zigzag(v.as_int()));
            break;
        case Value::Kind::real:
            out.push_back(kTagFloat);
            put_u64_be(out, v.real_bits());
            break;
        case Value::Kind::text:
            out.push_back(kTagText);
            put_lp_string(out, v.as_text());
            break;
        case Value::Kind::bytes: {
            const auto& b = v.as_bytes();
            out.push_back(kTagBytes);
            put_uvarint(out, b.size());
            out.insert(out.end(), b.begin(), b.end());
            break;
        }
        case Value::Kind::symbol:
            out.push_back(kTagSymbol);
            put_lp_string(out, v.as_symbol());
            break;
        case Value::Kind::list: {
            const auto& items = v.as_list();
            out.push_back(kTagList);
            put_uvarint(out, items.size());
            for (size_t i = 0; i < items.size(); ++i) {
                path.parts.push_back("[" + std::to_string(i) + "]");
                encode_into(out, items[i], path);
                path.parts.pop_back();
            }
            break;
        }
        case Value::Kind::map: {
            const auto& entries = v.as_map();
            out.push_back(kTagMap);
            put_uvarint(out, entries.size());
            std::vector<std::pair<std::vector<uint8_t>, std::vector<uint8_t>>> chunks;
            chunks.reserve(entries.size());
            for (size_t i = 0; i < entries.size(); ++i) {
                std::pair<std::vector<uint8_t>, std::vector<uint8_t>> chunk;
                path.parts.push_back("{k" + std::to_string(i) + "}");
                encode_into(chunk.first, entries[i].first, path);
                path.parts.back() = "{v" + std::to_string(i) + "}";
                encode_into(chunk.second, entries[i].second, path);
                path.parts.pop_back();
                chunks.push_back(std::move(chunk));
            }
            encode_sorted_chunks(out, chunks);
            break;
        }
        case Value::Kind::set: {
            const auto& members = v.as_set();
            out.push_back(kTagSet);
            put_uvarint(out, members.size());
            std::vector<std::pair<std::vector<uint8_t>, std::vector<uint8_t>>> chunks;
            chunks.reserve(members.size());
            for (size_t i = 0; i < members.size(); ++i) {
                std::pair<std::vector<uint8_t>, std::vector<uint8_t>> chunk;
                path.parts.push_back("(" + std::to_string(i) + ")");
                encode_into(chunk.first, members[i], path);
                path.parts.pop_back();
                chunks.push_back(std::move(chunk));
            }
            encode_sorted_chunks(out, chunks);
            break;
        }
        case Value::Kind::ref:
            out.push_back(kTagRef);
            put_u64_be(out, v.as_ref().id);
            break;
        case Value::Kind::opaque:
            throw Error(Errc::non_serializable,
                        "opaque value <" + v.opaque_tag() + "> at " + path.str())
                .with_detail(path.str());
    }
}

uint8_t need_byte(std::span<const uint8_t> bytes, size_t offset) {
    if (offset >= bytes.size())
        throw Error(Errc::truncated, "unexpected end of input").with_offset(offset);
    return bytes[offset];
}

Value decode_at(std::span<const uint8_t> bytes, size_t& offset, size_t depth);

// Decodes one value and returns the raw byte slice it occupied, for the
// canonical-order checks.
std::pair<Value, std::span<const uint8_t>> decode_slice(std::span<const uint8_t> bytes,
                                                        size_t& offset, size_t depth) {
    const size_t start = offset;
    Value v = decode_at(bytes, offset, depth);
    return {std::move(v), bytes.subspan(start, offset - start)};
}

bool bytes_less(std::span<const uint8_t> a, std::span<const uint8_t> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

Value decode_at(std::span<const uint8_t> bytes, size_t& offset, size_t depth) {
    if (depth > kMaxDepth)
        throw Error(Errc::malformed, "value nesting exceeds decoder limit").with_offset(offset);
    const size_t tag_offset = offset;
    const uint8_t tag = need_byte(bytes, offset);
    ++offset;
    switch (tag) {
        case kTagUnit:
            return Value::unit();
        case kTagBool: {
            const uint8_t b = need_byte(bytes, offset);
            ++offset;
            if (b > 0x01)
                throw Error(Errc::non_canonical, "bool payload must be 0x00 or 0x01")
                    .with_offset(offset - 1);
            return Value::boolean(b == 0x01);
        }
        case kTagInt:
            return Value::integer(unzigzag(get_uvarint(bytes, offset)));
        case kTagFloat: {
            const uint64_t bits = get_u64_be(bytes, offset);
            return Value::real(std::bit_cast<double>(bits));
        }
        case kTagText:
            return Value::text(get_lp_string(bytes, offset));
        case kTagBytes: {
            const uint64_t len = get_uvarint(bytes, offset);
            if (offset + len > bytes.size())
                throw Error(Errc::truncated, "byte string runs past end").with_offset(offset);
            std::vector<uint8_t> b(bytes.begin() + offset, bytes.begin() + offset + len);
            offset += len;
            return Value::bytes(std::move(b));
        }
        case kTagSymbol:
            return Value::symbol(get_lp_string(bytes, offset));
        case kTagList: {
            const uint64_t count = get_uvarint(bytes, offset);
            std::vector<Value> items;
            items.reserve(std::min<uint64_t>(count, 4096));
            for (uint64_t i = 0; i < count; ++i)
                items.push_back(decode_at(bytes, offset, depth + 1));
            return Value::list(std::move(items));
        }
        case kTagMap: {
            const uint64_t count = get_uvarint(bytes, offset);
            std::vector<std::pair<Value, Value>> entries;
            entries.reserve(std::min<uint64_t>(count, 4096));
            std::span<const uint8_t> prev_key;
            for (uint64_t i = 0; i < count; ++i) {
                const size_t key_at = offset;
                auto [key, key_bytes] = decode_slice(bytes, offset, depth + 1);
                if (!is_scalar(key))
                    throw Error(Errc::non_canonical, "map key must be a scalar")
                        .with_offset(key_at);
                if (i > 0 && !bytes_less(prev_key, key_bytes))
                    throw Error(Errc::non_canonical,
                                "map keys out of canonical order or duplicated")
                        .with_offset(key_at);
                prev_key = key_bytes;
                Value val = decode_at(bytes, offset, depth + 1);
                entries.emplace_back(std::move(key), std::move(val));
            }
            return Value::map(std::move(entries));
        }
        case kTagSet: {
            const uint64_t count = get_uvarint(bytes, offset);
            std::vector<Value> members;
            members.reserve(std::min<uint64_t>(count, 4096));
            std::span<const uint8_t> prev;
            for (uint64_t i = 0; i < count; ++i) {
                const size_t at = offset;
                auto [member, member_bytes] = decode_slice(bytes, offset, depth + 1);
                if (!is_scalar(member))
                    throw Error(Errc::non_canonical, "set member must be a scalar")
                        .with_offset(at);
                if (i > 0 && !bytes_less(prev, member_bytes))
                    throw Error(Errc::non_canonical,
                                "set members out of canonical order or duplicated")
                        .with_offset(at);
                prev = member_bytes;
                members.push_back(std::move(member));
            }
            return Value::set(std::move(members));
        }
        case kTagRef: {
            const uint64_t id = get_u64_be(bytes, offset);
            return Value::ref(Oid{id});
        }
        default: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "unknown value tag 0x%02X", tag);
            throw Error(Errc::unknown_tag, buf).with_offset(tag_offset);
        }
    }
}

}  // namespace

void put_uvarint(std::vector<uint8_t>& out, uint64_t v) {
    do {
        uint8_t b = v & 0x7F;
        v >>= 7;
        if (v != 0) b |= 0x80;
        out.push_back(b);
    } while (v != 0);
}

uint64_t get_uvarint(std::span<const uint8_t> bytes, size_t& offset) {
    uint64_t result = 0;
    int shift = 0;
    const size_t start = offset;
    for (;;) {
        const uint8_t b = need_byte(bytes, offset);
        ++offset;
        if (shift == 63 && (b & 0x7E) != 0)
            throw Error(Errc::malformed, "varint exceeds 64 bits").with_offset(start);
        result |= static_cast<uint64_t>(b & 0x7F) << shift;
        if ((b & 0x80) == 0) {
            if (b == 0 && offset - start > 1)
                throw Error(Errc::non_canonical, "overlong varint").with_offset(start);
            return result;
        }
        shift += 7;
        if (shift > 63)
            throw Error(Errc::malformed, "varint exceeds 64 bits").with_offset(start);
    }
}

void put_u64_be(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t get_u64_be(std::span<const uint8_t> bytes, size_t& offset) {
    if (offset + 8 > bytes.size())
        throw Error(Errc::truncated, "need 8 bytes").with_offset(offset);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[offset + i];
    offset += 8;
    return v;
}

void put_lp_string(std::vector<uint8_t>& out, std::string_view s) {
    put_uvarint(out, s.size());
    out.insert(out.end(), s.begin(), s.end());
}

std::string get_lp_string(std::span<const uint8_t> bytes, size_t& offset) {
    const uint64_t len = get_uvarint(bytes, offset);
    if (offset + len > bytes.size())
        throw Error(Errc::truncated, "string runs past end").with_offset(offset);
    std::string s(reinterpret_cast<const char*>(bytes.data() + offset), len);
    offset += len;
    if (!valid_utf8(s))
        throw Error(Errc::malformed_utf8, "string is not valid UTF-8").with_offset(offset - len);
    return s;
}

void encode_value_into(std::vector<uint8_t>& out, const Value& v) {
    PathStack path;
    encode_into(out, v, path);
}

std::vector<uint8_t> encode_value(const Value& v) {
    std::vector<uint8_t> out;
    encode_value_into(out, v);
    return out;
}

DecodedValue decode_value(std::span<const uint8_t> bytes, size_t offset) {
    size_t pos = offset;
    Value v = decode_at(bytes, pos, 0);
    return {std::move(v), pos - offset};
}

std::vector<uint8_t> encode_record(const InstanceRecord& r) {
    std::vector<uint8_t> out;
    put_u64_be(out, r.oid.id);
    put_lp_string(out, r.class_name);
    put_uvarint(out, r.class_version);
    put_uvarint(out, r.slots.size());
    for (const auto& [name, value] : r.slots) {
        put_lp_string(out, name);
        PathStack path;
        path.parts.push_back("." + name);
        encode_into(out, value, path);
    }
    return out;
}

InstanceRecord decode_record_at(std::span<const uint8_t> bytes, size_t offset,
                                size_t& consumed) {
    size_t pos = offset;
    InstanceRecord r;
    r.oid = Oid{get_u64_be(bytes, pos)};
    r.class_name = get_lp_string(bytes, pos);
    r.class_version = get_uvarint(bytes, pos);
    const uint64_t count = get_uvarint(bytes, pos);
    std::string prev_name;
    for (uint64_t i = 0; i < count; ++i) {
        const size_t name_at = pos;
        std::string name = get_lp_string(bytes, pos);
        if (i > 0) {
            if (name == prev_name)
                throw Error(Errc::duplicate_slot, "slot '" + name + "' appears twice")
                    .with_offset(name_at);
            if (name < prev_name)
                throw Error(Errc::non_canonical, "slots out of canonical name order")
                    .with_offset(name_at);
        }
        Value v = decode_at(bytes, pos, 0);
        auto [it, inserted] = r.slots.emplace(std::move(name), std::move(v));
        prev_name = it->first;
    }
    consumed = pos - offset;
    return r;
}

InstanceRecord decode_record(std::span<const uint8_t> bytes) {
    size_t consumed = 0;
    InstanceRecord r = decode_record_at(bytes, 0, consumed);
    if (consumed != bytes.size())
        throw Error(Errc::malformed, "trailing bytes after record").with_offset(consumed);
    return r;
}

}  // namespace pachyderm
