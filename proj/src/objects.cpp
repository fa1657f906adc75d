// Object layer of StoreSession: handle cache, mediated slot access with lazy
// load + lazy migration, instance lifecycle, hooks, extents.

#include "log_io.hpp"
#include "pachyderm/codec.hpp"
#include "pachyderm/session.hpp"
#include "session_guard.hpp"

namespace pachyderm {

Value Handle::read(const std::string& slot) const {
    if (!body_ || !body_->session)
        throw Error(Errc::session_closed, "handle is not attached to an open session");
    return body_->session->slot_read(*this, slot);
}

void Handle::write(const std::string& slot, Value v) const {
    if (!body_ || !body_->session)
        throw Error(Errc::session_closed, "handle is not attached to an open session");
    body_->session->slot_write(*this, slot, std::move(v));
}

detail::HandleBody& StoreSession::checked_body(const Handle& handle) const {
    if (!handle.body_)
        throw Error(Errc::unknown_oid, "invalid handle");
    if (handle.body_->session != this)
        throw Error(Errc::session_closed, "handle belongs to another or a closed session");
    return *handle.body_;
}

std::shared_ptr<detail::HandleBody> StoreSession::body_for_live(Oid oid) {
    auto it = handles_.find(oid.id);
    if (it != handles_.end()) {
        if (it->second->deleted)
            throw Error(Errc::deleted, "object " + std::to_string(oid.id) + " was deleted");
        return it->second;
    }
    if (is_deleted(oid))
        throw Error(Errc::deleted, "object " + std::to_string(oid.id) + " was deleted");
    if (committed_.count(oid.id) == 0)
        throw Error(Errc::unknown_oid, "no object with oid " + std::to_string(oid.id));
    auto body = std::make_shared<detail::HandleBody>();
    body->oid = oid;
    body->session = this;
    handles_.emplace(oid.id, body);
    return body;
}

void StoreSession::load_body(detail::HandleBody& body) {
    auto it = committed_.find(body.oid.id);
    if (it == committed_.end()) {
        if (is_deleted(body.oid))
            throw Error(Errc::deleted, "object " + std::to_string(body.oid.id) + " was deleted");
        throw Error(Errc::unknown_oid, "no object with oid " + std::to_string(body.oid.id));
    }
    body.record = read_committed_record(it->second.offset);
    body.loaded = true;
    body.dirty = false;
}

void StoreSession::mark_dirty(detail::HandleBody& body) {
    body.dirty = true;
    if (pending_creates_.count(body.oid.id) == 0) dirty_oids_.insert(body.oid.id);
}

// ---- schema ----

const ClassDescriptor& StoreSession::define_class(const std::string& name,
                                                  std::vector<SlotSpec> slots) {
    OpGuard guard(*this);
    const ClassDescriptor& desc = registry_.define(name, std::move(slots));
    staged_schema_.push_back({name, desc.version});
    return desc;
}

RedefineResult StoreSession::redefine_class(const std::string& name,
                                            std::vector<SlotSpec> slots) {
    OpGuard guard(*this);
    auto [desc, diff] = registry_.redefine(name, std::move(slots));
    staged_schema_.push_back({name, desc->version});
    return {desc, std::move(diff)};
}

const ClassDescriptor& StoreSession::get_descriptor(const std::string& name,
                                                    uint64_t version) const {
    return registry_.get(name, version);
}

const ClassDescriptor& StoreSession::current_descriptor(const std::string& name) const {
    return registry_.current(name);
}

// ---- objects ----

Handle StoreSession::create_instance(const std::string& class_name,
                                     const std::map<std::string, Value>& init_args) {
    OpGuard guard(*this);
    const ClassDescriptor& desc = registry_.current(class_name);

    for (const auto& [slot, value] : init_args) {
        const SlotSpec* spec = desc.find_slot(slot);
        if (!spec)
            throw Error(Errc::unknown_slot,
                        "class '" + class_name + "' has no slot '" + slot + "'");
        if (spec->persistent && contains_opaque(value))
            throw Error(Errc::non_serializable,
                        "opaque init value for persistent slot '" + slot + "'");
    }

    auto body = std::make_shared<detail::HandleBody>();
    body->oid = Oid{next_oid_++};
    body->session = this;
    body->loaded = true;
    body->dirty = true;
    body->record.oid = body->oid;
    body->record.class_name = class_name;
    body->record.class_version = desc.version;

    for (const auto& spec : desc.slots) {
        if (!spec.default_value) continue;
        if (spec.persistent)
            body->record.slots.emplace(spec.name, *spec.default_value);
        else
            body->transient.emplace(spec.name, *spec.default_value);
    }
    for (const auto& [slot, value] : init_args) {
        if (desc.find_slot(slot)->persistent)
            body->record.slots.insert_or_assign(slot, value);
        else
            body->transient.insert_or_assign(slot, value);
    }

    if (auto hook = init_hooks_.find(class_name); hook != init_hooks_.end()) {
        RecordDraft draft(body->record, desc, &body->transient);
        try {
            hook->second(draft, init_args);
        } catch (const std::exception& e) {
            // No oid leaks: the allocation never reaches the pending set.
            throw Error(Errc::hook_failure,
                        "init hook for '" + class_name + "' failed: " + e.what());
        } catch (...) {
            throw Error(Errc::hook_failure, "init hook for '" + class_name + "' failed");
        }
    }

    handles_.emplace(body->oid.id, body);
    pending_creates_.insert(body->oid.id);
    return Handle(body);
}

Handle StoreSession::lookup_instance(Oid oid) {
    OpGuard guard(*this);
    return Handle(body_for_live(oid));
}

Handle StoreSession::deref(const Value& ref_value) {
    if (!ref_value.is(Value::Kind::ref))
        throw Error(Errc::malformed, "deref expects a ref value, got " +
                                         to_display_string(ref_value));
    return lookup_instance(ref_value.as_ref());
}

const SlotSpec& StoreSession::slot_spec_checked(const detail::HandleBody& body,
                                                const std::string& slot,
                                                const char* action) const {
    const ClassDescriptor& desc = registry_.current(body.record.class_name);
    const SlotSpec* spec = desc.find_slot(slot);
    if (!spec)
        throw Error(Errc::unknown_slot, std::string("cannot ") + action + " '" + slot +
                                            "': class '" + body.record.class_name + "' v" +
                                            std::to_string(desc.version) +
                                            " does not define it");
    return *spec;
}

Value StoreSession::slot_read(const Handle& handle, const std::string& slot) {
    OpGuard guard(*this);
    detail::HandleBody& body = checked_body(handle);
    if (body.deleted)
        throw Error(Errc::deleted, "object " + std::to_string(body.oid.id) + " was deleted");
    if (!body.loaded) load_body(body);
    ensure_current_impl(body);

    const SlotSpec& spec = slot_spec_checked(body, slot, "read");
    const auto& store = spec.persistent ? body.record.slots : body.transient;
    auto it = store.find(slot);
    if (it == store.end())
        throw Error(Errc::unbound_slot,
                    "slot '" + slot + "' of class '" + body.record.class_name +
                        "' is unbound in object " + std::to_string(body.oid.id))
            .with_detail(body.record.class_name + "." + slot);
    return it->second;
}

void StoreSession::slot_write(const Handle& handle, const std::string& slot, Value v) {
    OpGuard guard(*this);
    detail::HandleBody& body = checked_body(handle);
    if (body.deleted)
        throw Error(Errc::deleted, "object " + std::to_string(body.oid.id) + " was deleted");
    if (!body.loaded) load_body(body);
    ensure_current_impl(body);

    const SlotSpec& spec = slot_spec_checked(body, slot, "write");
    if (spec.persistent) {
        if (contains_opaque(v))
            throw Error(Errc::non_serializable,
                        "opaque value written to persistent slot '" + slot + "'");
        body.record.slots.insert_or_assign(slot, std::move(v));
    } else {
        body.transient.insert_or_assign(slot, std::move(v));
    }
    mark_dirty(body);
}

void StoreSession::delete_instance(const Handle& handle) {
    OpGuard guard(*this);
    detail::HandleBody& body = checked_body(handle);
    if (body.deleted)
        throw Error(Errc::deleted,
                    "object " + std::to_string(body.oid.id) + " was already deleted");
    const uint64_t id = body.oid.id;
    if (pending_creates_.count(id)) {
        // Never committed: it vanishes without a tombstone.
        pending_creates_.erase(id);
        handles_.erase(id);
    } else {
        if (committed_.count(id) == 0)
            throw Error(Errc::unknown_oid, "no object with oid " + std::to_string(id));
        pending_deletes_.insert(id);
        dirty_oids_.erase(id);
    }
    body.deleted = true;
    body.dirty = false;
}

void StoreSession::register_init_hook(const std::string& class_name, InitHook hook) {
    OpGuard guard(*this);
    if (!registry_.has_class(class_name))
        throw Error(Errc::unknown_class, "class '" + class_name + "' is not defined");
    if (init_hooks_.count(class_name))
        throw Error(Errc::duplicate_hook,
                    "init hook for '" + class_name + "' is already registered");
    init_hooks_.emplace(class_name, std::move(hook));
}

void StoreSession::register_migration_hook(const std::string& class_name,
                                           uint64_t target_version, MigrationHook hook) {
    OpGuard guard(*this);
    if (!registry_.has_class(class_name))
        throw Error(Errc::unknown_class, "class '" + class_name + "' is not defined");
    if (target_version < 2)
        throw Error(Errc::unknown_version, "no upgrade targets version " +
                                               std::to_string(target_version));
    const auto key = std::make_pair(class_name, target_version);
    if (migration_hooks_.count(key))
        throw Error(Errc::duplicate_hook, "migration hook for '" + class_name + "' v" +
                                              std::to_string(target_version) +
                                              " is already registered");
    migration_hooks_.emplace(key, std::move(hook));
}

namespace {

void check_record_slots(const ClassDescriptor& desc, const InstanceRecord& record) {
    for (const auto& [slot, value] : record.slots) {
        const SlotSpec* spec = desc.find_slot(slot);
        if (!spec || !spec->persistent)
            throw Error(Errc::unknown_slot, "record carries slot '" + slot +
                                                "' unknown to class '" + record.class_name +
                                                "' v" + std::to_string(record.class_version));
        if (contains_opaque(value))
            throw Error(Errc::non_serializable, "record carries an opaque value");
    }
}

}  // namespace

Handle StoreSession::restore_record(InstanceRecord record) {
    OpGuard guard(*this);
    const ClassDescriptor& desc = registry_.get(record.class_name, record.class_version);
    check_record_slots(desc, record);
    auto body = std::make_shared<detail::HandleBody>();
    body->oid = Oid{next_oid_++};
    body->session = this;
    body->loaded = true;
    body->dirty = true;
    body->record = std::move(record);
    body->record.oid = body->oid;
    handles_.emplace(body->oid.id, body);
    pending_creates_.insert(body->oid.id);
    return Handle(body);
}

void StoreSession::restore_slots(const Handle& handle, std::map<std::string, Value> slots) {
    OpGuard guard(*this);
    detail::HandleBody& body = checked_body(handle);
    if (body.deleted)
        throw Error(Errc::deleted, "object " + std::to_string(body.oid.id) + " was deleted");
    if (!body.loaded) load_body(body);
    InstanceRecord staged = body.record;
    staged.slots = std::move(slots);
    check_record_slots(registry_.get(staged.class_name, staged.class_version), staged);
    body.record = std::move(staged);
    mark_dirty(body);
}

// ---- migration ----

size_t StoreSession::ensure_current_impl(detail::HandleBody& body) {
    if (!body.loaded) load_body(body);
    const std::string& class_name = body.record.class_name;
    const uint64_t current = registry_.current_version(class_name);

    size_t steps = 0;
    while (body.record.class_version < current) {
        const uint64_t v = body.record.class_version;
        const ClassDescriptor& from = registry_.get(class_name, v);
        const ClassDescriptor& to = registry_.get(class_name, v + 1);
        auto hook = migration_hooks_.find({class_name, v + 1});
        const MigrationHook* hook_ptr =
            hook == migration_hooks_.end() ? nullptr : &hook->second;
        // Throws hook_failure with the record untouched, so the object stays
        // at the last version it reached.
        body.record = upgrade_record(body.record, from, to, hook_ptr);
        upgrades_.bump(class_name);
        ++steps;
        mark_dirty(body);
    }
    if (steps > 0) {
        // Transient values only make sense for slots that are transient in
        // the current descriptor.
        const ClassDescriptor& desc = registry_.current(class_name);
        for (auto it = body.transient.begin(); it != body.transient.end();) {
            const SlotSpec* spec = desc.find_slot(it->first);
            if (!spec || spec->persistent)
                it = body.transient.erase(it);
            else
                ++it;
        }
    }
    return steps;
}

size_t StoreSession::ensure_current(const Handle& handle) {
    OpGuard guard(*this);
    detail::HandleBody& body = checked_body(handle);
    if (body.deleted)
        throw Error(Errc::deleted, "object " + std::to_string(body.oid.id) + " was deleted");
    return ensure_current_impl(body);
}

size_t StoreSession::migrate_eager(const std::string& class_name) {
    OpGuard guard(*this);
    if (!registry_.has_class(class_name))
        throw Error(Errc::unknown_class, "class '" + class_name + "' is not defined");

    std::set<uint64_t> ids;
    if (auto it = extent_committed_.find(class_name); it != extent_committed_.end())
        for (uint64_t id : it->second)
            if (pending_deletes_.count(id) == 0) ids.insert(id);
    for (uint64_t id : pending_creates_)
        if (handles_.at(id)->record.class_name == class_name) ids.insert(id);

    size_t upgraded = 0;
    for (uint64_t id : ids) {
        auto body = body_for_live(Oid{id});
        size_t steps;
        try {
            steps = ensure_current_impl(*body);
        } catch (Error& e) {
            if (e.code() == Errc::hook_failure) throw e.with_count(upgraded);
            throw;
        }
        if (steps > 0) ++upgraded;
    }
    return upgraded;
}

std::vector<Oid> StoreSession::extent(const std::string& class_name) {
    OpGuard guard(*this);
    if (!registry_.has_class(class_name))
        throw Error(Errc::unknown_class, "class '" + class_name + "' is not defined");

    std::set<uint64_t> ids;
    if (auto it = extent_committed_.find(class_name); it != extent_committed_.end())
        for (uint64_t id : it->second)
            if (pending_deletes_.count(id) == 0) ids.insert(id);
    for (uint64_t id : pending_creates_)
        if (handles_.at(id)->record.class_name == class_name) ids.insert(id);

    std::vector<Oid> out;
    out.reserve(ids.size());
    for (uint64_t id : ids) out.push_back(Oid{id});
    return out;
}

const InstanceRecord& StoreSession::peek_record(Oid oid) {
    OpGuard guard(*this);
    auto body = body_for_live(oid);
    if (!body->loaded) load_body(*body);
    return body->record;
}

}  // namespace pachyderm
