#include "pachyderm/migration.hpp"

namespace pachyderm {

const SlotSpec& RecordDraft::spec_for(const std::string& slot) const {
    const SlotSpec* spec = target_.find_slot(slot);
    if (!spec)
        throw Error(Errc::unknown_slot, "class '" + target_.name + "' v" +
                                            std::to_string(target_.version) +
                                            " has no slot '" + slot + "'");
    if (!spec->persistent && !transient_)
        throw Error(Errc::unknown_slot,
                    "slot '" + slot + "' is transient and not addressable here");
    return *spec;
}

void RecordDraft::set(const std::string& slot, Value v) {
    const SlotSpec& spec = spec_for(slot);
    if (spec.persistent) {
        if (contains_opaque(v))
            throw Error(Errc::non_serializable,
                        "opaque value written to persistent slot '" + slot + "'");
        record_.slots.insert_or_assign(slot, std::move(v));
    } else {
        transient_->insert_or_assign(slot, std::move(v));
    }
}

void RecordDraft::unset(const std::string& slot) {
    const SlotSpec& spec = spec_for(slot);
    if (spec.persistent)
        record_.slots.erase(slot);
    else
        transient_->erase(slot);
}

bool RecordDraft::has(const std::string& slot) const {
    const SlotSpec& spec = spec_for(slot);
    if (spec.persistent) return record_.slots.count(slot) != 0;
    return transient_->count(slot) != 0;
}

std::optional<Value> RecordDraft::get(const std::string& slot) const {
    const SlotSpec& spec = spec_for(slot);
    const auto& store = spec.persistent ? record_.slots : *transient_;
    auto it = store.find(slot);
    if (it == store.end()) return std::nullopt;
    return it->second;
}

InstanceRecord upgrade_record(const InstanceRecord& record, const ClassDescriptor& from,
                              const ClassDescriptor& to, const MigrationHook* hook) {
    if (record.class_name != from.name || from.name != to.name)
        throw Error(Errc::version_skew, "record class '" + record.class_name +
                                            "' does not match descriptors '" + from.name +
                                            "'/'" + to.name + "'");
    if (record.class_version != from.version)
        throw Error(Errc::version_skew,
                    "record at v" + std::to_string(record.class_version) +
                        " but upgrade starts from v" + std::to_string(from.version));
    if (to.version != from.version + 1)
        throw Error(Errc::version_skew,
                    "upgrade steps must be adjacent: v" + std::to_string(from.version) +
                        " -> v" + std::to_string(to.version));

    ClassDiff diff = class_diff(from, to);

    InstanceRecord upgraded;
    upgraded.oid = record.oid;
    upgraded.class_name = record.class_name;
    upgraded.class_version = to.version;

    std::map<std::string, Value> discarded_values;
    for (const auto& [name, value] : record.slots) {
        if (diff.discarded.count(name)) {
            discarded_values.emplace(name, value);
        } else if (const SlotSpec* spec = to.find_slot(name); spec && spec->persistent) {
            upgraded.slots.emplace(name, value);
        }
        // retained slots that turned transient are dropped: records hold
        // persistent slots only, and transient state never survives a reload
    }
    std::vector<std::string> added(diff.added.begin(), diff.added.end());
    for (const auto& name : added) {
        const SlotSpec* spec = to.find_slot(name);
        if (spec->persistent && spec->default_value)
            upgraded.slots.emplace(name, *spec->default_value);
    }

    if (hook && *hook) {
        RecordDraft draft(upgraded, to);
        try {
            (*hook)(draft, added, discarded_values);
        } catch (const std::exception& e) {
            throw Error(Errc::hook_failure,
                        "migration hook for '" + to.name + "' v" +
                            std::to_string(to.version) + " failed: " + e.what());
        } catch (...) {
            throw Error(Errc::hook_failure, "migration hook for '" + to.name + "' v" +
                                                std::to_string(to.version) + " failed");
        }
    }
    return upgraded;
}

}  // namespace pachyderm
