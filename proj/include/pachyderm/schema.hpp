#pragma once
// Versioned class registry: named descriptors, redefinition with diffing,
// and the line-oriented schema text grammar used by the CLI.
//
// Versions of a class always form the contiguous range 1..current, and a
// descriptor is immutable once registered. Slot correspondence across
// versions is by name only; a rename is modeled as discard+add with a
// migration hook carrying the value across.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pachyderm/value.hpp"

namespace pachyderm {

struct SlotSpec {
    std::string name;
    // Unbound when absent. A constant default may not contain opaque values
    // (never storable) or refs (a shared default object would silently alias
    // instances).
    std::optional<Value> default_value;
    bool persistent = true;
};

struct ClassDescriptor {
    std::string name;
    uint64_t version = 1;
    std::vector<SlotSpec> slots;

    const SlotSpec* find_slot(std::string_view slot_name) const;
    bool has_slot(std::string_view slot_name) const { return find_slot(slot_name) != nullptr; }
};

struct ClassDiff {
    std::set<std::string> added;
    std::set<std::string> discarded;
    std::set<std::string> retained;
};

// Diff by slot name; default/persistent changes on retained slots do not
// move them out of retained. Throws name_mismatch.
ClassDiff class_diff(const ClassDescriptor& older, const ClassDescriptor& newer);

// Validates slot invariants (unique names, default constraints).
// Throws invalid_slot_spec.
void validate_slots(const std::string& class_name, const std::vector<SlotSpec>& slots);

class SchemaRegistry {
public:
    // Registers version 1. Throws already_defined, invalid_slot_spec.
    const ClassDescriptor& define(const std::string& name, std::vector<SlotSpec> slots);

    // Registers version current+1 and returns the diff against the previous
    // version. Existing instances are untouched until migrated.
    // Throws unknown_class, invalid_slot_spec.
    std::pair<const ClassDescriptor*, ClassDiff> redefine(const std::string& name,
                                                          std::vector<SlotSpec> slots);

    // Throws unknown_class / unknown_version.
    const ClassDescriptor& get(const std::string& name, uint64_t version) const;
    const ClassDescriptor& current(const std::string& name) const;
    uint64_t current_version(const std::string& name) const;
    bool has_class(const std::string& name) const { return classes_.count(name) != 0; }
    std::vector<std::string> class_names() const;
    size_t class_count() const { return classes_.size(); }

    // Durability bookkeeping for the owning session: definitions start out
    // pending and survive rollback only once marked durable.
    void mark_all_durable();
    void discard_pending();
    bool has_pending() const;

private:
    std::map<std::string, std::vector<ClassDescriptor>> classes_;
    std::map<std::string, size_t> durable_counts_;
};

// Durable descriptor layout: name (LEB128 len + UTF-8) + version (LEB128) +
// slot count (LEB128) + per slot: name + default flag (0x00 unbound / 0x01 +
// encoded value) + persistent flag (1 byte).
std::vector<uint8_t> encode_descriptor(const ClassDescriptor& d);
ClassDescriptor decode_descriptor(std::span<const uint8_t> bytes, size_t offset,
                                  size_t& consumed);

// Schema text grammar (line-oriented, UTF-8):
//   class <name>
//     slot <name> [default <literal>] [transient]
//   end
// Literals: unit, true, false, decimal integer, decimal float containing
// '.', double-quoted string with \" and \\ escapes, :<symbol>.
// Blank lines and lines starting with '#' are skipped.
// Throws parse_error with the offending line number in offset().
std::vector<std::pair<std::string, std::vector<SlotSpec>>> parse_schema_text(
    std::string_view text);

}  // namespace pachyderm
