#pragma once
// Single-step record upgrades between adjacent class versions. A migration
// hook sees the upgraded draft, the names of added slots, and the values of
// discarded slots. Multi-version upgrades are chained stepwise, so each hook
// always runs against the one diff it was written for.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pachyderm/record.hpp"
#include "pachyderm/schema.hpp"

namespace pachyderm {

// Mutable view over a record mid-upgrade (or mid-initialization). Writes are
// validated against the target descriptor; persistent slots reject opaque
// values. When a transient store is attached (initialization only), writes
// to transient slots land there; without one, transient names are unknown.
class RecordDraft {
public:
    RecordDraft(InstanceRecord& record, const ClassDescriptor& target,
                std::map<std::string, Value>* transient = nullptr)
        : record_(record), target_(target), transient_(transient) {}

    // Throws unknown_slot / non_serializable.
    void set(const std::string& slot, Value v);
    // Clears a slot back to unbound.
    void unset(const std::string& slot);
    bool has(const std::string& slot) const;
    std::optional<Value> get(const std::string& slot) const;

    const ClassDescriptor& target() const { return target_; }

private:
    const SlotSpec& spec_for(const std::string& slot) const;
    InstanceRecord& record_;
    const ClassDescriptor& target_;
    std::map<std::string, Value>* transient_;
};

using MigrationHook =
    std::function<void(RecordDraft& draft, const std::vector<std::string>& added,
                       const std::map<std::string, Value>& discarded)>;

using InitHook =
    std::function<void(RecordDraft& draft, const std::map<std::string, Value>& init_args)>;

// Upgrades one record by exactly one version step:
//   - retained slots copied verbatim (persistent ones; a retained slot that
//     turned transient drops out of the record),
//   - added slots filled from constant defaults, left absent when unbound,
//   - discarded slot values removed and handed to the hook,
//   - hook mutations applied last.
// Throws version_skew when record/descriptor versions do not line up, and
// hook_failure (record untouched) when the hook throws.
InstanceRecord upgrade_record(const InstanceRecord& record, const ClassDescriptor& from,
                              const ClassDescriptor& to, const MigrationHook* hook);

// Session tally of applied upgrade steps, keyed by class.
class UpgradeCounter {
public:
    void bump(const std::string& class_name) {
        ++per_class_[class_name];
        ++total_;
    }
    uint64_t for_class(const std::string& class_name) const {
        auto it = per_class_.find(class_name);
        return it == per_class_.end() ? 0 : it->second;
    }
    uint64_t total() const { return total_; }
    void reset() {
        per_class_.clear();
        total_ = 0;
    }

private:
    std::map<std::string, uint64_t> per_class_;
    uint64_t total_ = 0;
};

}  // namespace pachyderm
