#pragma once
// StoreSession: a single-writer session over one durable store file.
//
// The store is an append-only log of CRC-checked records grouped into
// transactions; commit() is the only durability point. Opening scans the
// committed prefix, discards any torn tail, and rebuilds the schema
// registry, the oid index, and the per-class extents. Instance records are
// loaded lazily through handles and migrated to the current class version
// on access (or eagerly via migrate_eager).
//
// Sessions are single-threaded: the object may move between threads as a
// unit between operations, but overlapping operations (including hooks
// calling back into the session) fail fast with concurrent_access.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pachyderm/handle.hpp"
#include "pachyderm/migration.hpp"
#include "pachyderm/record.hpp"
#include "pachyderm/schema.hpp"

namespace pachyderm {

namespace detail {
class LockSentinel;
}

struct OpenOptions {
    // Break an existing lock sentinel regardless of liveness checks.
    bool force_unlock = false;
};

struct VerifyFinding {
    enum class Kind {
        crc_mismatch,
        truncated_record,
        unknown_record_kind,
        malformed_payload,
        dangling_ref,
        version_beyond_class,
        unknown_class_record,
        extent_mismatch,
    };
    Kind kind = Kind::crc_mismatch;
    uint64_t offset = 0;
    Oid from;
    Oid to;
    std::string class_name;
    uint64_t version = 0;
    uint64_t current = 0;

    std::string to_line() const;
};

struct VerifyReport {
    std::vector<VerifyFinding> findings;
    bool clean() const { return findings.empty(); }
};

struct RedefineResult {
    const ClassDescriptor* descriptor;
    ClassDiff diff;
};

class StoreSession {
public:
    // Opens the store at `path`, creating and initializing it (header plus
    // an initial empty commit) when absent. Holds a lock sentinel beside
    // the file until destruction. Throws bad_magic, locked, io_failure.
    static std::unique_ptr<StoreSession> open(const std::string& path, OpenOptions opts = {});

    // Uncommitted changes are discarded, as by rollback.
    ~StoreSession();

    StoreSession(const StoreSession&) = delete;
    StoreSession& operator=(const StoreSession&) = delete;

    // ---- durability ----

    // Appends all staged changes as one transaction, flushed before return.
    // An empty commit is a no-op returning the previous sequence number.
    uint64_t commit();

    // Discards all staged changes; handles revert to not-loaded.
    void rollback();

    // Rewrites the store keeping only the latest committed version of each
    // live record plus full schema history; atomically swaps the file in.
    // Returns (old size, new size) in bytes. Throws dirty_session when
    // changes are staged.
    std::pair<uint64_t, uint64_t> compact();

    // Audits the raw file (CRCs, framing) and the committed state (refs,
    // versions, extents). Findings are data, not errors.
    VerifyReport verify();

    // ---- schema ----

    const ClassDescriptor& define_class(const std::string& name, std::vector<SlotSpec> slots);
    RedefineResult redefine_class(const std::string& name, std::vector<SlotSpec> slots);
    const ClassDescriptor& get_descriptor(const std::string& name, uint64_t version) const;
    const ClassDescriptor& current_descriptor(const std::string& name) const;
    const SchemaRegistry& schema() const { return registry_; }

    // ---- objects ----

    // Fresh oid; slots = constant defaults overlaid with init_args; the
    // class's init hook runs exactly once, here and never on load.
    Handle create_instance(const std::string& class_name,
                           const std::map<std::string, Value>& init_args = {});

    // The session's unique handle for a live oid (identity cache).
    // Throws unknown_oid / deleted.
    Handle lookup_instance(Oid oid);

    Value slot_read(const Handle& handle, const std::string& slot);
    void slot_write(const Handle& handle, const std::string& slot, Value v);

    // Stages a tombstone; the oid leaves the extent at commit.
    void delete_instance(const Handle& handle);

    // Convenience: lookup of a ref value's target.
    Handle deref(const Value& ref_value);

    void register_init_hook(const std::string& class_name, InitHook hook);
    void register_migration_hook(const std::string& class_name, uint64_t target_version,
                                 MigrationHook hook);

    // Restores a record verbatim under a fresh oid (deserialization path:
    // no defaults, no init hook, no migration). Used by subgraph import.
    Handle restore_record(InstanceRecord record);

    // Replaces the record's slots verbatim at its current record version,
    // without migrating. Second half of the deserialization path, for slot
    // values that could not be known until all oids were allocated.
    void restore_slots(const Handle& handle, std::map<std::string, Value> slots);

    // ---- migration ----

    // Applies stepwise upgrades until the handle's record is at the current
    // class version; returns the number of steps applied.
    size_t ensure_current(const Handle& handle);

    // Upgrades every extent member to the current version; returns how many
    // records needed at least one step. A hook failure aborts the sweep
    // with the completed count in Error::count(); completed upgrades stay.
    size_t migrate_eager(const std::string& class_name);

    // Live oids bearing the class name at any version, ascending.
    std::vector<Oid> extent(const std::string& class_name);

    const UpgradeCounter& upgrade_counter() const { return upgrades_; }

    // ---- introspection ----

    uint64_t sequence_number() const { return seq_; }
    const std::string& store_path() const { return path_; }
    size_t class_count() const { return registry_.class_count(); }
    size_t object_count() const;
    bool has_staged_changes() const;

    // Effective record view (staged state if loaded, else the committed
    // record) without triggering migration. The reference stays valid until
    // the next operation touching that object.
    const InstanceRecord& peek_record(Oid oid);

    // Session-visible liveness (committed state plus staged changes).
    bool is_live(Oid oid) const;
    bool is_deleted(Oid oid) const;
    std::vector<Oid> live_oids() const;

private:
    StoreSession() = default;

    struct OpGuard;
    struct OidMeta {
        uint64_t offset = 0;  // log record start of the latest committed write
        std::string class_name;
    };
    struct StagedSchema {
        std::string name;
        uint64_t version;
    };

    void scan_existing(const std::vector<uint8_t>& file);
    void initialize_fresh();
    std::shared_ptr<detail::HandleBody> body_for_live(Oid oid);
    void load_body(detail::HandleBody& body);
    InstanceRecord read_committed_record(uint64_t offset) const;
    size_t ensure_current_impl(detail::HandleBody& body);
    const SlotSpec& slot_spec_checked(const detail::HandleBody& body, const std::string& slot,
                                      const char* action) const;
    void mark_dirty(detail::HandleBody& body);
    detail::HandleBody& checked_body(const Handle& handle) const;

    std::string path_;
    int fd_ = -1;
    std::unique_ptr<detail::LockSentinel> lock_;
    uint64_t durable_end_ = 0;
    uint64_t seq_ = 0;
    uint64_t next_oid_ = 1;

    SchemaRegistry registry_;
    std::unordered_map<uint64_t, OidMeta> committed_;
    std::map<std::string, std::set<uint64_t>> extent_committed_;
    std::unordered_set<uint64_t> deleted_committed_;

    std::vector<StagedSchema> staged_schema_;
    std::set<uint64_t> pending_creates_;
    std::set<uint64_t> pending_deletes_;
    std::set<uint64_t> dirty_oids_;

    std::unordered_map<uint64_t, std::shared_ptr<detail::HandleBody>> handles_;
    std::map<std::string, InitHook> init_hooks_;
    std::map<std::pair<std::string, uint64_t>, MigrationHook> migration_hooks_;
    UpgradeCounter upgrades_;

    mutable std::atomic<bool> in_op_{false};
};

}  // namespace pachyderm
