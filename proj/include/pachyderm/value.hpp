#pragma once
// The closed universe of storable values.
//
// A Value is immutable after construction and safe to copy/share across
// threads. Floats are identified by bit pattern (NaN == NaN when the bits
// match, 0.0 != -0.0), which keeps equality total and round-trips testable.
// Opaque values model host resources and code: they may live in memory but
// are rejected by the codec, so they can never reach a committed store.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pachyderm/errors.hpp"

namespace pachyderm {

// Store-unique object identifier: nonzero, strictly increasing, never reused.
struct Oid {
    uint64_t id = 0;

    constexpr Oid() = default;
    constexpr explicit Oid(uint64_t v) : id(v) {}
    auto operator<=>(const Oid&) const = default;
};

class Value;

namespace detail {
struct Unit {};
struct Text { std::string s; };
struct Bytes { std::vector<uint8_t> b; };
struct Symbol { std::string s; };
struct List { std::vector<Value> items; };
struct Map { std::vector<std::pair<Value, Value>> entries; };
struct Set { std::vector<Value> members; };
struct Opaque { std::string tag; };
}  // namespace detail

class Value {
public:
    // Kind order mirrors the wire tag assignment (unit=0x00 ... ref=0x0A);
    // opaque has no wire tag and must stay last.
    enum class Kind : uint8_t {
        unit = 0,
        boolean,
        integer,
        real,
        text,
        bytes,
        symbol,
        list,
        map,
        set,
        ref,
        opaque,
    };

    Value() : rep_(detail::Unit{}) {}

    static Value unit() { return Value(); }
    static Value boolean(bool b) { return Value(Rep(b)); }
    static Value integer(int64_t i) { return Value(Rep(i)); }
    static Value real(double d) { return Value(Rep(d)); }
    // Text and symbol contents must be valid UTF-8; throws malformed_utf8.
    static Value text(std::string s);
    static Value symbol(std::string s);
    static Value bytes(std::vector<uint8_t> b) {
        return Value(Rep(detail::Bytes{std::move(b)}));
    }
    static Value list(std::vector<Value> items) {
        return Value(Rep(detail::List{std::move(items)}));
    }
    // Keys must be scalar and pairwise distinct under equal(); construction
    // order is preserved (the codec canonicalizes on encode).
    // Throws non_scalar_key / duplicate_key.
    static Value map(std::vector<std::pair<Value, Value>> entries);
    // Same constraints as map keys.
    static Value set(std::vector<Value> members);
    static Value ref(Oid oid) { return Value(Rep(oid)); }
    static Value opaque(std::string tag) {
        return Value(Rep(detail::Opaque{std::move(tag)}));
    }

    Kind kind() const { return static_cast<Kind>(rep_.index()); }
    bool is(Kind k) const { return kind() == k; }

    bool as_bool() const { return std::get<bool>(rep_); }
    int64_t as_int() const { return std::get<int64_t>(rep_); }
    double as_real() const { return std::get<double>(rep_); }
    uint64_t real_bits() const;
    const std::string& as_text() const { return std::get<detail::Text>(rep_).s; }
    const std::string& as_symbol() const { return std::get<detail::Symbol>(rep_).s; }
    const std::vector<uint8_t>& as_bytes() const { return std::get<detail::Bytes>(rep_).b; }
    const std::vector<Value>& as_list() const { return std::get<detail::List>(rep_).items; }
    const std::vector<std::pair<Value, Value>>& as_map() const {
        return std::get<detail::Map>(rep_).entries;
    }
    const std::vector<Value>& as_set() const { return std::get<detail::Set>(rep_).members; }
    Oid as_ref() const { return std::get<Oid>(rep_); }
    const std::string& opaque_tag() const { return std::get<detail::Opaque>(rep_).tag; }

private:
    using Rep = std::variant<detail::Unit, bool, int64_t, double, detail::Text,
                             detail::Bytes, detail::Symbol, detail::List,
                             detail::Map, detail::Set, Oid, detail::Opaque>;
    explicit Value(Rep rep) : rep_(std::move(rep)) {}
    Rep rep_;
};

// Structural equality: floats by bit pattern, refs by oid, map/set
// order-insensitive. Total over every Value including opaque.
bool equal(const Value& a, const Value& b);

// True iff v is unit/bool/int/float/text/bytes/symbol.
bool is_scalar(const Value& v);

// True iff an opaque value is reachable anywhere inside v.
bool contains_opaque(const Value& v);

// True iff a ref value is reachable anywhere inside v.
bool contains_ref(const Value& v);

// Calls fn(oid) for every ref reachable inside v.
template <typename Fn>
void for_each_ref(const Value& v, Fn&& fn) {
    switch (v.kind()) {
        case Value::Kind::ref:
            fn(v.as_ref());
            break;
        case Value::Kind::list:
            for (const auto& item : v.as_list()) for_each_ref(item, fn);
            break;
        case Value::Kind::map:
            for (const auto& [k, val] : v.as_map()) for_each_ref(val, fn);
            break;
        default:
            break;  // scalars and sets cannot hold refs
    }
}

// Display form used by the CLI and diagnostics. Lists/maps/sets render in
// stored order; values decoded from a store are already canonically ordered.
std::string to_display_string(const Value& v);

bool valid_utf8(std::string_view s);

}  // namespace pachyderm

template <>
struct std::hash<pachyderm::Oid> {
    size_t operator()(const pachyderm::Oid& o) const noexcept {
        return std::hash<uint64_t>{}(o.id);
    }
};
