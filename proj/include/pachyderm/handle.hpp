#pragma once
// Handles mediate every access to a persistent object: they trigger lazy
// load, lazy migration to the current class version, and dirty tracking.
// A session keeps at most one handle body per oid, so handle identity
// answers object identity within the session.

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "pachyderm/record.hpp"

namespace pachyderm {

class StoreSession;

namespace detail {
struct HandleBody {
    Oid oid;
    StoreSession* session = nullptr;
    bool loaded = false;
    bool deleted = false;
    bool dirty = false;
    InstanceRecord record;
    // Transient slot values live only here; dropped on store/reload.
    std::map<std::string, Value> transient;
};
}  // namespace detail

class Handle {
public:
    Handle() = default;

    bool valid() const { return body_ != nullptr; }
    Oid oid() const { return body_->oid; }

    // Mediated access: loads and migrates the record first. Refs are
    // returned as refs, never auto-dereferenced.
    // Throws unbound_slot, unknown_slot, deleted, unknown_oid, ...
    Value read(const std::string& slot) const;
    void write(const std::string& slot, Value v) const;

    bool is_loaded() const { return body_->loaded; }
    bool is_dirty() const { return body_->dirty; }
    // Record version currently held (0 when not loaded).
    uint64_t loaded_version() const { return body_->loaded ? body_->record.class_version : 0; }

private:
    friend class StoreSession;
    friend bool same_handle(const Handle& a, const Handle& b);
    explicit Handle(std::shared_ptr<detail::HandleBody> body) : body_(std::move(body)) {}
    std::shared_ptr<detail::HandleBody> body_;
};

// The handle-identity predicate: true iff both mediate the same in-session
// object (not merely equal oids or equal contents).
inline bool same_handle(const Handle& a, const Handle& b) {
    return a.body_ != nullptr && a.body_ == b.body_;
}

}  // namespace pachyderm
