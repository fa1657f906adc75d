#include "pachyderm/schema.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>

#include "pachyderm/codec.hpp"

namespace pachyderm {

const SlotSpec* ClassDescriptor::find_slot(std::string_view slot_name) const {
    for (const auto& s : slots)
        if (s.name == slot_name) return &s;
    return nullptr;
}

ClassDiff class_diff(const ClassDescriptor& older, const ClassDescriptor& newer) {
    if (older.name != newer.name)
        throw Error(Errc::name_mismatch,
                    "cannot diff '" + older.name + "' against '" + newer.name + "'");
    ClassDiff diff;
    for (const auto& s : newer.slots) {
        if (older.has_slot(s.name))
            diff.retained.insert(s.name);
        else
            diff.added.insert(s.name);
    }
    for (const auto& s : older.slots)
        if (!newer.has_slot(s.name)) diff.discarded.insert(s.name);
    return diff;
}

void validate_slots(const std::string& class_name, const std::vector<SlotSpec>& slots) {
    if (class_name.empty() || !valid_utf8(class_name))
        throw Error(Errc::invalid_slot_spec, "class name must be nonempty UTF-8");
    for (size_t i = 0; i < slots.size(); ++i) {
        const auto& s = slots[i];
        if (s.name.empty() || !valid_utf8(s.name))
            throw Error(Errc::invalid_slot_spec,
                        "slot name must be nonempty UTF-8 in class '" + class_name + "'");
        for (size_t j = 0; j < i; ++j)
            if (slots[j].name == s.name)
                throw Error(Errc::invalid_slot_spec,
                            "duplicate slot '" + s.name + "' in class '" + class_name + "'");
        if (s.default_value) {
            if (contains_opaque(*s.default_value))
                throw Error(Errc::invalid_slot_spec,
                            "default for slot '" + s.name + "' contains an opaque value");
            if (contains_ref(*s.default_value))
                throw Error(Errc::invalid_slot_spec,
                            "default for slot '" + s.name + "' contains a ref");
        }
    }
}

const ClassDescriptor& SchemaRegistry::define(const std::string& name,
                                              std::vector<SlotSpec> slots) {
    if (classes_.count(name))
        throw Error(Errc::already_defined, "class '" + name + "' is already defined");
    validate_slots(name, slots);
    auto& versions = classes_[name];
    versions.push_back(ClassDescriptor{name, 1, std::move(slots)});
    return versions.back();
}

std::pair<const ClassDescriptor*, ClassDiff> SchemaRegistry::redefine(
    const std::string& name, std::vector<SlotSpec> slots) {
    auto it = classes_.find(name);
    if (it == classes_.end())
        throw Error(Errc::unknown_class, "class '" + name + "' is not defined");
    validate_slots(name, slots);
    auto& versions = it->second;
    versions.push_back(ClassDescriptor{name, versions.size() + 1, std::move(slots)});
    const ClassDescriptor& newer = versions.back();
    ClassDiff diff = class_diff(versions[versions.size() - 2], newer);
    return {&newer, std::move(diff)};
}

const ClassDescriptor& SchemaRegistry::get(const std::string& name, uint64_t version) const {
    auto it = classes_.find(name);
    if (it == classes_.end())
        throw Error(Errc::unknown_class, "class '" + name + "' is not defined");
    if (version < 1 || version > it->second.size())
        throw Error(Errc::unknown_version,
                    "class '" + name + "' has no version " + std::to_string(version));
    return it->second[version - 1];
}

const ClassDescriptor& SchemaRegistry::current(const std::string& name) const {
    auto it = classes_.find(name);
    if (it == classes_.end())
        throw Error(Errc::unknown_class, "class '" + name + "' is not defined");
    return it->second.back();
}

uint64_t SchemaRegistry::current_version(const std::string& name) const {
    return current(name).version;
}

std::vector<std::string> SchemaRegistry::class_names() const {
    std::vector<std::string> names;
    names.reserve(classes_.size());
    for (const auto& [name, versions] : classes_) names.push_back(name);
    return names;
}

void SchemaRegistry::mark_all_durable() {
    durable_counts_.clear();
    for (const auto& [name, versions] : classes_) durable_counts_[name] = versions.size();
}

void SchemaRegistry::discard_pending() {
    for (auto it = classes_.begin(); it != classes_.end();) {
        auto durable = durable_counts_.find(it->first);
        const size_t keep = durable == durable_counts_.end() ? 0 : durable->second;
        if (keep == 0) {
            it = classes_.erase(it);
        } else {
            it->second.resize(keep);
            ++it;
        }
    }
}

bool SchemaRegistry::has_pending() const {
    for (const auto& [name, versions] : classes_) {
        auto durable = durable_counts_.find(name);
        const size_t keep = durable == durable_counts_.end() ? 0 : durable->second;
        if (versions.size() != keep) return true;
    }
    return false;
}

std::vector<uint8_t> encode_descriptor(const ClassDescriptor& d) {
    std::vector<uint8_t> out;
    put_lp_string(out, d.name);
    put_uvarint(out, d.version);
    put_uvarint(out, d.slots.size());
    for (const auto& s : d.slots) {
        put_lp_string(out, s.name);
        if (s.default_value) {
            out.push_back(0x01);
            encode_value_into(out, *s.default_value);
        } else {
            out.push_back(0x00);
        }
        out.push_back(s.persistent ? 0x01 : 0x00);
    }
    return out;
}

ClassDescriptor decode_descriptor(std::span<const uint8_t> bytes, size_t offset,
                                  size_t& consumed) {
    size_t pos = offset;
    ClassDescriptor d;
    d.name = get_lp_string(bytes, pos);
    d.version = get_uvarint(bytes, pos);
    const uint64_t count = get_uvarint(bytes, pos);
    for (uint64_t i = 0; i < count; ++i) {
        SlotSpec s;
        s.name = get_lp_string(bytes, pos);
        if (pos >= bytes.size())
            throw Error(Errc::truncated, "descriptor slot flags missing").with_offset(pos);
        const uint8_t default_flag = bytes[pos++];
        if (default_flag == 0x01) {
            DecodedValue dv = decode_value(bytes, pos);
            s.default_value = std::move(dv.value);
            pos += dv.consumed;
        } else if (default_flag != 0x00) {
            throw Error(Errc::malformed, "bad default flag in descriptor").with_offset(pos - 1);
        }
        if (pos >= bytes.size())
            throw Error(Errc::truncated, "descriptor persistent flag missing").with_offset(pos);
        const uint8_t persistent_flag = bytes[pos++];
        if (persistent_flag > 0x01)
            throw Error(Errc::malformed, "bad persistent flag in descriptor")
                .with_offset(pos - 1);
        s.persistent = persistent_flag == 0x01;
        d.slots.push_back(std::move(s));
    }
    consumed = pos - offset;
    return d;
}

namespace {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail(size_t line_no, const std::string& reason) {
    throw Error(Errc::parse_error,
                "line " + std::to_string(line_no) + ": " + reason)
        .with_offset(line_no);
}

// Splits a slot body into tokens; a double-quoted string is one token with
// its escapes resolved and a leading '"' marker retained.
std::vector<std::string> tokenize(std::string_view s, size_t line_no) {
    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] == ' ' || s[i] == '\t') {
            ++i;
            continue;
        }
        if (s[i] == '"') {
            std::string tok = "\"";
            ++i;
            bool closed = false;
            while (i < s.size()) {
                char c = s[i++];
                if (c == '\\') {
                    if (i >= s.size()) fail(line_no, "unterminated escape in string literal");
                    char e = s[i++];
                    if (e == '"' || e == '\\')
                        tok += e;
                    else
                        fail(line_no, std::string("unsupported escape '\\") + e + "'");
                } else if (c == '"') {
                    closed = true;
                    break;
                } else {
                    tok += c;
                }
            }
            if (!closed) fail(line_no, "unterminated string literal");
            tokens.push_back(std::move(tok));
            continue;
        }
        size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        tokens.emplace_back(s.substr(start, i - start));
    }
    return tokens;
}

Value parse_literal(const std::string& tok, size_t line_no) {
    if (tok == "unit") return Value::unit();
    if (tok == "true") return Value::boolean(true);
    if (tok == "false") return Value::boolean(false);
    if (!tok.empty() && tok[0] == '"') return Value::text(tok.substr(1));
    if (tok.size() > 1 && tok[0] == ':') return Value::symbol(tok.substr(1));
    const bool is_float = tok.find('.') != std::string::npos;
    const char* begin = tok.c_str();
    char* end = nullptr;
    if (is_float) {
        double d = std::strtod(begin, &end);
        if (end != begin + tok.size() || tok == ".")
            fail(line_no, "bad float literal '" + tok + "'");
        return Value::real(d);
    }
    errno = 0;
    long long i = std::strtoll(begin, &end, 10);
    if (end != begin + tok.size() || tok.empty() || errno == ERANGE)
        fail(line_no, "bad literal '" + tok + "'");
    return Value::integer(i);
}

}  // namespace

std::vector<std::pair<std::string, std::vector<SlotSpec>>> parse_schema_text(
    std::string_view text) {
    std::vector<std::pair<std::string, std::vector<SlotSpec>>> defs;
    std::optional<std::string> open_class;
    std::vector<SlotSpec> slots;

    const auto lines = split_lines(text);
    for (size_t idx = 0; idx < lines.size(); ++idx) {
        const size_t line_no = idx + 1;
        std::string_view line = trim(lines[idx]);
        if (line.empty() || line.front() == '#') continue;

        auto tokens = tokenize(line, line_no);
        if (tokens.empty()) continue;
        const std::string& head = tokens[0];

        if (head == "class") {
            if (open_class) fail(line_no, "nested class definition");
            if (tokens.size() != 2) fail(line_no, "expected: class <name>");
            open_class = tokens[1];
            slots.clear();
        } else if (head == "slot") {
            if (!open_class) fail(line_no, "slot outside class block");
            if (tokens.size() < 2) fail(line_no, "expected: slot <name> ...");
            SlotSpec spec;
            spec.name = tokens[1];
            size_t i = 2;
            while (i < tokens.size()) {
                if (tokens[i] == "default") {
                    if (i + 1 >= tokens.size()) fail(line_no, "default requires a literal");
                    if (spec.default_value) fail(line_no, "duplicate default");
                    spec.default_value = parse_literal(tokens[i + 1], line_no);
                    i += 2;
                } else if (tokens[i] == "transient") {
                    spec.persistent = false;
                    ++i;
                } else {
                    fail(line_no, "unexpected token '" + tokens[i] + "'");
                }
            }
            slots.push_back(std::move(spec));
        } else if (head == "end") {
            if (!open_class) fail(line_no, "end without class");
            if (tokens.size() != 1) fail(line_no, "unexpected tokens after end");
            defs.emplace_back(std::move(*open_class), std::move(slots));
            open_class.reset();
            slots = {};
        } else {
            fail(line_no, "unexpected directive '" + head + "'");
        }
    }
    if (open_class) fail(lines.size(), "class '" + *open_class + "' not closed with end");
    return defs;
}

}  // namespace pachyderm
