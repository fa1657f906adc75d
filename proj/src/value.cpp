#include "pachyderm/value.hpp"

#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace pachyderm {

std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::non_scalar_key: return "non-scalar-key";
        case Errc::duplicate_key: return "duplicate-key";
        case Errc::non_serializable: return "non-serializable";
        case Errc::unknown_tag: return "unknown-tag";
        case Errc::truncated: return "truncated";
        case Errc::malformed_utf8: return "malformed-utf8";
        case Errc::non_canonical: return "non-canonical";
        case Errc::duplicate_slot: return "duplicate-slot";
        case Errc::malformed: return "malformed";
        case Errc::already_defined: return "already-defined";
        case Errc::invalid_slot_spec: return "invalid-slot-spec";
        case Errc::unknown_class: return "unknown-class";
        case Errc::unknown_version: return "unknown-version";
        case Errc::name_mismatch: return "name-mismatch";
        case Errc::parse_error: return "parse-error";
        case Errc::version_skew: return "version-skew";
        case Errc::hook_failure: return "hook-failure";
        case Errc::unknown_oid: return "unknown-oid";
        case Errc::deleted: return "deleted";
        case Errc::unbound_slot: return "unbound-slot";
        case Errc::unknown_slot: return "unknown-slot";
        case Errc::duplicate_hook: return "duplicate-hook";
        case Errc::dangling_ref: return "dangling-ref";
        case Errc::schema_conflict: return "schema-conflict";
        case Errc::bad_magic: return "bad-magic";
        case Errc::locked: return "locked";
        case Errc::io_failure: return "io-failure";
        case Errc::dirty_session: return "dirty-session";
        case Errc::concurrent_access: return "concurrent-access";
        case Errc::session_closed: return "session-closed";
    }
    return "unknown";
}

bool valid_utf8(std::string_view s) {
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        const uint8_t c = static_cast<uint8_t>(s[i]);
        size_t len;
        uint32_t cp;
        if (c < 0x80) {
            i += 1;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (size_t k = 1; k < len; ++k) {
            const uint8_t cc = static_cast<uint8_t>(s[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Reject overlong forms, surrogates and out-of-range code points.
        if (len == 2 && cp < 0x80) return false;
        if (len == 3 && cp < 0x800) return false;
        if (len == 4 && cp < 0x10000) return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

Value Value::text(std::string s) {
    if (!valid_utf8(s)) throw Error(Errc::malformed_utf8, "text is not valid UTF-8");
    return Value(Rep(detail::Text{std::move(s)}));
}

Value Value::symbol(std::string s) {
    if (!valid_utf8(s)) throw Error(Errc::malformed_utf8, "symbol is not valid UTF-8");
    return Value(Rep(detail::Symbol{std::move(s)}));
}

Value Value::map(std::vector<std::pair<Value, Value>> entries) {
    for (size_t i = 0; i < entries.size(); ++i) {
        if (!is_scalar(entries[i].first))
            throw Error(Errc::non_scalar_key, "map key must be a scalar value");
        for (size_t j = 0; j < i; ++j)
            if (equal(entries[i].first, entries[j].first))
                throw Error(Errc::duplicate_key,
                            "map keys must be distinct: " + to_display_string(entries[i].first));
    }
    return Value(Rep(detail::Map{std::move(entries)}));
}

Value Value::set(std::vector<Value> members) {
    for (size_t i = 0; i < members.size(); ++i) {
        if (!is_scalar(members[i]))
            throw Error(Errc::non_scalar_key, "set member must be a scalar value");
        for (size_t j = 0; j < i; ++j)
            if (equal(members[i], members[j]))
                throw Error(Errc::duplicate_key,
                            "set members must be distinct: " + to_display_string(members[i]));
    }
    return Value(Rep(detail::Set{std::move(members)}));
}

uint64_t Value::real_bits() const {
    return std::bit_cast<uint64_t>(as_real());
}

bool is_scalar(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::unit:
        case Value::Kind::boolean:
        case Value::Kind::integer:
        case Value::Kind::real:
        case Value::Kind::text:
        case Value::Kind::bytes:
        case Value::Kind::symbol:
            return true;
        default:
            return false;
    }
}

bool equal(const Value& a, const Value& b) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case Value::Kind::unit:
            return true;
        case Value::Kind::boolean:
            return a.as_bool() == b.as_bool();
        case Value::Kind::integer:
            return a.as_int() == b.as_int();
        case Value::Kind::real:
            return a.real_bits() == b.real_bits();
        case Value::Kind::text:
            return a.as_text() == b.as_text();
        case Value::Kind::bytes:
            return a.as_bytes() == b.as_bytes();
        case Value::Kind::symbol:
            return a.as_symbol() == b.as_symbol();
        case Value::Kind::ref:
            return a.as_ref() == b.as_ref();
        case Value::Kind::opaque:
            return a.opaque_tag() == b.opaque_tag();
        case Value::Kind::list: {
            const auto& la = a.as_list();
            const auto& lb = b.as_list();
            if (la.size() != lb.size()) return false;
            for (size_t i = 0; i < la.size(); ++i)
                if (!equal(la[i], lb[i])) return false;
            return true;
        }
        case Value::Kind::map: {
            const auto& ma = a.as_map();
            const auto& mb = b.as_map();
            if (ma.size() != mb.size()) return false;
            for (const auto& [ka, va] : ma) {
                bool found = false;
                for (const auto& [kb, vb] : mb) {
                    if (equal(ka, kb)) {
                        if (!equal(va, vb)) return false;
                        found = true;
                        break;
                    }
                }
                if (!found) return false;
            }
            return true;
        }
        case Value::Kind::set: {
            const auto& sa = a.as_set();
            const auto& sb = b.as_set();
            if (sa.size() != sb.size()) return false;
            for (const auto& ea : sa) {
                bool found = false;
                for (const auto& eb : sb)
                    if (equal(ea, eb)) {
                        found = true;
                        break;
                    }
                if (!found) return false;
            }
            return true;
        }
    }
    return false;
}

bool contains_opaque(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::opaque:
            return true;
        case Value::Kind::list:
            for (const auto& item : v.as_list())
                if (contains_opaque(item)) return true;
            return false;
        case Value::Kind::map:
            for (const auto& [k, val] : v.as_map())
                if (contains_opaque(val)) return true;  // keys are scalar
            return false;
        default:
            return false;
    }
}

bool contains_ref(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::ref:
            return true;
        case Value::Kind::list:
            for (const auto& item : v.as_list())
                if (contains_ref(item)) return true;
            return false;
        case Value::Kind::map:
            for (const auto& [k, val] : v.as_map())
                if (contains_ref(val)) return true;
            return false;
        default:
            return false;
    }
}

namespace {

void append_quoted(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    out += '"';
}

void append_real(std::string& out, double d) {
    if (std::isnan(d)) {
        out += "nan";
        return;
    }
    if (std::isinf(d)) {
        out += d < 0 ? "-inf" : "inf";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    out += buf;
    if (out.find_first_of(".eE", out.size() - std::strlen(buf)) == std::string::npos)
        out += ".0";
}

void render(std::string& out, const Value& v) {
    switch (v.kind()) {
        case Value::Kind::unit:
            out += "unit";
            break;
        case Value::Kind::boolean:
            out += v.as_bool() ? "true" : "false";
            break;
        case Value::Kind::integer: {
            char buf[24];
            std::snprintf(buf, sizeof buf, "%" PRId64, v.as_int());
            out += buf;
            break;
        }
        case Value::Kind::real:
            append_real(out, v.as_real());
            break;
        case Value::Kind::text:
            append_quoted(out, v.as_text());
            break;
        case Value::Kind::bytes: {
            out += "0x";
            static const char hex[] = "0123456789abcdef";
            for (uint8_t b : v.as_bytes()) {
                out += hex[b >> 4];
                out += hex[b & 0xF];
            }
            break;
        }
        case Value::Kind::symbol:
            out += ':';
            out += v.as_symbol();
            break;
        case Value::Kind::list: {
            out += '[';
            bool first = true;
            for (const auto& item : v.as_list()) {
                if (!first) out += ", ";
                first = false;
                render(out, item);
            }
            out += ']';
            break;
        }
        case Value::Kind::map: {
            out += '{';
            bool first = true;
            for (const auto& [k, val] : v.as_map()) {
                if (!first) out += ", ";
                first = false;
                render(out, k);
                out += ": ";
                render(out, val);
            }
            out += '}';
            break;
        }
        case Value::Kind::set: {
            out += "#{";
            bool first = true;
            for (const auto& m : v.as_set()) {
                if (!first) out += ", ";
                first = false;
                render(out, m);
            }
            out += '}';
            break;
        }
        case Value::Kind::ref: {
            char buf[24];
            std::snprintf(buf, sizeof buf, "@%" PRIu64, v.as_ref().id);
            out += buf;
            break;
        }
        case Value::Kind::opaque:
            out += "<opaque:";
            out += v.opaque_tag();
            out += '>';
            break;
    }
}

}  // namespace

std::string to_display_string(const Value& v) {
    std::string out;
    render(out, v);
    return out;
}

}  // namespace pachyderm
