#include "pachyderm/session.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>

#include "log_io.hpp"
#include "pachyderm/codec.hpp"
#include "session_guard.hpp"

namespace pachyderm {

using detail::RecKind;

namespace {

std::vector<uint8_t> oid_payload(uint64_t oid) {
    std::vector<uint8_t> out;
    put_u64_be(out, oid);
    return out;
}

VerifyFinding finding(VerifyFinding::Kind kind, uint64_t offset = 0) {
    VerifyFinding f;
    f.kind = kind;
    f.offset = offset;
    return f;
}

uint64_t payload_u64(std::span<const uint8_t> payload) {
    if (payload.size() != 8)
        throw Error(Errc::malformed, "payload must be exactly 8 bytes");
    size_t pos = 0;
    return get_u64_be(payload, pos);
}

}  // namespace

std::unique_ptr<StoreSession> StoreSession::open(const std::string& path, OpenOptions opts) {
    auto lock = std::make_unique<detail::LockSentinel>(
        detail::LockSentinel::acquire(path, opts.force_unlock));

    std::unique_ptr<StoreSession> session(new StoreSession());
    session->path_ = path;
    session->lock_ = std::move(lock);

    bool fresh = false;
    try {
        session->fd_ = detail::open_rw(path, /*create_new=*/true);
        fresh = true;
    } catch (const Error&) {
        session->fd_ = detail::open_rw(path, /*create_new=*/false);
    }

    if (fresh) {
        session->initialize_fresh();
    } else {
        const std::vector<uint8_t> file = detail::read_all(session->fd_);
        session->scan_existing(file);
    }
    return session;
}

StoreSession::~StoreSession() {
    for (auto& [oid, body] : handles_) body->session = nullptr;
    detail::close_quiet(fd_);
}

void StoreSession::initialize_fresh() {
    std::vector<uint8_t> out = detail::make_header();
    detail::append_log_record(out, RecKind::txn_commit, oid_payload(1));
    detail::pwrite_exact(fd_, out.data(), out.size(), 0);
    detail::sync_data(fd_);
    durable_end_ = out.size();
    seq_ = 1;
}

void StoreSession::scan_existing(const std::vector<uint8_t>& file) {
    if (!detail::header_ok(file))
        throw Error(Errc::bad_magic, "not a pachyderm store: " + path_);

    struct PendingWrite {
        uint64_t offset;
        std::string class_name;
    };
    std::map<uint64_t, PendingWrite> txn_writes;
    std::vector<uint64_t> txn_deletes;
    uint64_t txn_max_oid = 0;

    auto reset_txn = [&] {
        txn_writes.clear();
        txn_deletes.clear();
        txn_max_oid = 0;
    };

    size_t pos = detail::kHeaderSize;
    for (;;) {
        detail::RawRecord rec;
        const auto outcome = detail::parse_record(file, pos, rec);
        if (outcome != detail::ParseOutcome::ok) break;

        bool torn = false;
        try {
            switch (static_cast<RecKind>(rec.kind)) {
                case RecKind::schema_define:
                case RecKind::schema_redefine: {
                    size_t consumed = 0;
                    ClassDescriptor desc = decode_descriptor(rec.payload, 0, consumed);
                    const bool redefine = static_cast<RecKind>(rec.kind) == RecKind::schema_redefine;
                    if (redefine) {
                        if (!registry_.has_class(desc.name) ||
                            registry_.current_version(desc.name) + 1 != desc.version)
                            throw Error(Errc::malformed, "schema version out of sequence");
                        registry_.redefine(desc.name, std::move(desc.slots));
                    } else {
                        if (desc.version != 1)
                            throw Error(Errc::malformed, "schema definition must be version 1");
                        registry_.define(desc.name, std::move(desc.slots));
                    }
                    break;
                }
                case RecKind::instance_write: {
                    InstanceRecord r = decode_record(rec.payload);
                    txn_max_oid = std::max(txn_max_oid, r.oid.id);
                    txn_writes[r.oid.id] = {pos, r.class_name};
                    break;
                }
                case RecKind::instance_delete: {
                    const uint64_t oid = payload_u64(rec.payload);
                    txn_max_oid = std::max(txn_max_oid, oid);
                    txn_deletes.push_back(oid);
                    break;
                }
                case RecKind::txn_commit: {
                    const uint64_t seq = payload_u64(rec.payload);
                    for (const auto& [oid, write] : txn_writes) {
                        auto prior = committed_.find(oid);
                        if (prior != committed_.end() && prior->second.class_name != write.class_name)
                            extent_committed_[prior->second.class_name].erase(oid);
                        committed_[oid] = {write.offset, write.class_name};
                        extent_committed_[write.class_name].insert(oid);
                        deleted_committed_.erase(oid);
                    }
                    for (uint64_t oid : txn_deletes) {
                        auto it = committed_.find(oid);
                        if (it != committed_.end()) {
                            extent_committed_[it->second.class_name].erase(oid);
                            committed_.erase(it);
                        }
                        deleted_committed_.insert(oid);
                    }
                    registry_.mark_all_durable();
                    next_oid_ = std::max(next_oid_, txn_max_oid + 1);
                    seq_ = seq;
                    durable_end_ = pos + rec.total_size;
                    reset_txn();
                    break;
                }
                default:
                    torn = true;
                    break;
            }
        } catch (const Error&) {
            torn = true;
        }
        if (torn) break;
        pos += rec.total_size;
    }

    // Anything staged after the last commit is a torn tail: drop it from the
    // registry now; the file itself is truncated on the next commit.
    registry_.discard_pending();
}

uint64_t StoreSession::commit() {
    OpGuard guard(*this);
    if (!has_staged_changes()) return seq_;

    std::vector<uint8_t> out;
    for (const auto& staged : staged_schema_) {
        const ClassDescriptor& desc = registry_.get(staged.name, staged.version);
        const auto kind = staged.version == 1 ? RecKind::schema_define : RecKind::schema_redefine;
        detail::append_log_record(out, kind, encode_descriptor(desc));
    }

    std::set<uint64_t> writes = pending_creates_;
    writes.insert(dirty_oids_.begin(), dirty_oids_.end());
    struct WrittenAt {
        uint64_t oid;
        uint64_t rel_offset;
        std::string class_name;
    };
    std::vector<WrittenAt> written;
    written.reserve(writes.size());
    for (uint64_t oid : writes) {
        const auto& body = handles_.at(oid);
        written.push_back({oid, out.size(), body->record.class_name});
        detail::append_log_record(out, RecKind::instance_write, encode_record(body->record));
    }
    for (uint64_t oid : pending_deletes_)
        detail::append_log_record(out, RecKind::instance_delete, oid_payload(oid));
    detail::append_log_record(out, RecKind::txn_commit, oid_payload(seq_ + 1));

    // Drop any torn tail inherited from a crashed writer, then append.
    if (detail::file_size(fd_) != durable_end_) detail::truncate_to(fd_, durable_end_);
    try {
        detail::pwrite_exact(fd_, out.data(), out.size(), durable_end_);
        detail::sync_data(fd_);
    } catch (...) {
        // Best effort to restore the durable prefix; staged state is intact
        // for a retry.
        try {
            detail::truncate_to(fd_, durable_end_);
        } catch (...) {
        }
        throw;
    }

    for (const auto& w : written) {
        committed_[w.oid] = {durable_end_ + w.rel_offset, w.class_name};
        extent_committed_[w.class_name].insert(w.oid);
        auto body = handles_.find(w.oid);
        if (body != handles_.end()) body->second->dirty = false;
    }
    for (uint64_t oid : pending_deletes_) {
        auto it = committed_.find(oid);
        if (it != committed_.end()) {
            extent_committed_[it->second.class_name].erase(oid);
            committed_.erase(it);
        }
        deleted_committed_.insert(oid);
    }
    durable_end_ += out.size();
    seq_ += 1;
    staged_schema_.clear();
    registry_.mark_all_durable();
    pending_creates_.clear();
    pending_deletes_.clear();
    dirty_oids_.clear();
    return seq_;
}

void StoreSession::rollback() {
    OpGuard guard(*this);
    staged_schema_.clear();
    registry_.discard_pending();

    for (uint64_t oid : pending_creates_) handles_.erase(oid);
    pending_creates_.clear();
    pending_deletes_.clear();
    dirty_oids_.clear();

    for (auto& [oid, body] : handles_) {
        body->loaded = false;
        body->dirty = false;
        body->record = InstanceRecord{};
        body->transient.clear();
        body->deleted = deleted_committed_.count(oid) != 0;
    }
}

std::pair<uint64_t, uint64_t> StoreSession::compact() {
    OpGuard guard(*this);
    if (has_staged_changes())
        throw Error(Errc::dirty_session, "commit or roll back staged changes before compacting");

    const uint64_t old_size = detail::file_size(fd_);
    const std::vector<uint8_t> file = detail::read_all(fd_);

    std::vector<uint8_t> out = detail::make_header();
    for (const auto& name : registry_.class_names()) {
        const uint64_t current = registry_.current_version(name);
        for (uint64_t v = 1; v <= current; ++v) {
            const auto kind = v == 1 ? RecKind::schema_define : RecKind::schema_redefine;
            detail::append_log_record(out, kind, encode_descriptor(registry_.get(name, v)));
        }
    }

    std::vector<uint64_t> live(committed_.size());
    std::transform(committed_.begin(), committed_.end(), live.begin(),
                   [](const auto& kv) { return kv.first; });
    std::sort(live.begin(), live.end());

    std::vector<std::pair<uint64_t, uint64_t>> new_offsets;  // oid -> record start
    new_offsets.reserve(live.size());
    for (uint64_t oid : live) {
        detail::RawRecord rec;
        if (detail::parse_record(file, committed_.at(oid).offset, rec) != detail::ParseOutcome::ok)
            throw Error(Errc::io_failure, "could not reread committed record during compaction");
        new_offsets.emplace_back(oid, out.size());
        detail::append_log_record(out, RecKind::instance_write, rec.payload);
    }

    // The allocator high-water mark must survive a reopen even when the
    // highest oid is no longer live, so oids are never reused.
    const uint64_t high_water = next_oid_ - 1;
    if (high_water > 0 && committed_.count(high_water) == 0)
        detail::append_log_record(out, RecKind::instance_delete, oid_payload(high_water));

    detail::append_log_record(out, RecKind::txn_commit, oid_payload(seq_));

    detail::write_file_atomically(path_ + ".compact", path_, out);
    detail::close_quiet(fd_);
    fd_ = detail::open_rw(path_, /*create_new=*/false);
    for (const auto& [oid, offset] : new_offsets) committed_[oid].offset = offset;
    durable_end_ = out.size();
    return {old_size, static_cast<uint64_t>(out.size())};
}

std::string VerifyFinding::to_line() const {
    char buf[256];
    switch (kind) {
        case Kind::crc_mismatch:
            std::snprintf(buf, sizeof buf, "crc-mismatch offset=%" PRIu64, offset);
            break;
        case Kind::truncated_record:
            std::snprintf(buf, sizeof buf, "truncated-record offset=%" PRIu64, offset);
            break;
        case Kind::unknown_record_kind:
            std::snprintf(buf, sizeof buf, "unknown-record-kind offset=%" PRIu64, offset);
            break;
        case Kind::malformed_payload:
            std::snprintf(buf, sizeof buf, "malformed-payload offset=%" PRIu64, offset);
            break;
        case Kind::dangling_ref:
            std::snprintf(buf, sizeof buf, "dangling-ref from=%" PRIu64 " to=%" PRIu64, from.id,
                          to.id);
            break;
        case Kind::version_beyond_class:
            std::snprintf(buf, sizeof buf,
                          "version-beyond-class oid=%" PRIu64 " class=%s version=%" PRIu64
                          " current=%" PRIu64,
                          from.id, class_name.c_str(), version, current);
            break;
        case Kind::unknown_class_record:
            std::snprintf(buf, sizeof buf, "unknown-class-record oid=%" PRIu64 " class=%s",
                          from.id, class_name.c_str());
            break;
        case Kind::extent_mismatch:
            std::snprintf(buf, sizeof buf, "extent-mismatch class=%s", class_name.c_str());
            break;
    }
    return buf;
}

VerifyReport StoreSession::verify() {
    OpGuard guard(*this);
    VerifyReport report;
    const std::vector<uint8_t> file = detail::read_all(fd_);

    if (!detail::header_ok(file)) {
        report.findings.push_back(finding(VerifyFinding::Kind::truncated_record));
        return report;
    }

    // Raw pass: framing, checksums, payload shape.
    size_t pos = detail::kHeaderSize;
    for (;;) {
        detail::RawRecord rec;
        const auto outcome = detail::parse_record(file, pos, rec);
        if (outcome == detail::ParseOutcome::end_of_file) break;
        if (outcome == detail::ParseOutcome::truncated) {
            report.findings.push_back(finding(VerifyFinding::Kind::truncated_record, pos));
            break;
        }
        if (outcome == detail::ParseOutcome::bad_crc) {
            report.findings.push_back(finding(VerifyFinding::Kind::crc_mismatch, pos));
            pos += rec.total_size;
            continue;
        }
        try {
            switch (static_cast<RecKind>(rec.kind)) {
                case RecKind::schema_define:
                case RecKind::schema_redefine: {
                    size_t consumed = 0;
                    decode_descriptor(rec.payload, 0, consumed);
                    if (consumed != rec.payload.size())
                        throw Error(Errc::malformed, "trailing bytes");
                    break;
                }
                case RecKind::instance_write:
                    decode_record(rec.payload);
                    break;
                case RecKind::instance_delete:
                case RecKind::txn_commit:
                    payload_u64(rec.payload);
                    break;
                default:
                    report.findings.push_back(finding(VerifyFinding::Kind::unknown_record_kind, pos));
            }
        } catch (const Error&) {
            report.findings.push_back(finding(VerifyFinding::Kind::malformed_payload, pos));
        }
        pos += rec.total_size;
    }

    // Semantic pass over the committed state.
    std::vector<uint64_t> live(committed_.size());
    std::transform(committed_.begin(), committed_.end(), live.begin(),
                   [](const auto& kv) { return kv.first; });
    std::sort(live.begin(), live.end());
    for (uint64_t oid : live) {
        detail::RawRecord rec;
        if (detail::parse_record(file, committed_.at(oid).offset, rec) != detail::ParseOutcome::ok)
            continue;  // already reported by the raw pass
        InstanceRecord r;
        try {
            r = decode_record(rec.payload);
        } catch (const Error&) {
            continue;
        }
        if (!registry_.has_class(r.class_name)) {
            VerifyFinding f = finding(VerifyFinding::Kind::unknown_class_record);
            f.from = r.oid;
            f.class_name = r.class_name;
            report.findings.push_back(std::move(f));
        } else if (r.class_version > registry_.current_version(r.class_name)) {
            VerifyFinding f = finding(VerifyFinding::Kind::version_beyond_class);
            f.from = r.oid;
            f.class_name = r.class_name;
            f.version = r.class_version;
            f.current = registry_.current_version(r.class_name);
            report.findings.push_back(std::move(f));
        }
        for (const auto& [slot, value] : r.slots) {
            for_each_ref(value, [&](Oid target) {
                if (committed_.count(target.id) == 0) {
                    VerifyFinding f = finding(VerifyFinding::Kind::dangling_ref);
                    f.from = r.oid;
                    f.to = target;
                    report.findings.push_back(std::move(f));
                }
            });
        }
    }

    // Extent indexes must exactly reflect the committed records.
    std::map<std::string, std::set<uint64_t>> rebuilt;
    for (const auto& [oid, meta] : committed_) rebuilt[meta.class_name].insert(oid);
    for (const auto& [name, members] : extent_committed_) {
        auto it = rebuilt.find(name);
        const bool matches = members.empty() ? (it == rebuilt.end() || it->second.empty())
                                             : (it != rebuilt.end() && it->second == members);
        if (!matches) {
            VerifyFinding f = finding(VerifyFinding::Kind::extent_mismatch);
            f.class_name = name;
            report.findings.push_back(std::move(f));
        }
    }
    for (const auto& [name, members] : rebuilt)
        if (!members.empty() && extent_committed_.count(name) == 0) {
            VerifyFinding f = finding(VerifyFinding::Kind::extent_mismatch);
            f.class_name = name;
            report.findings.push_back(std::move(f));
        }

    return report;
}

InstanceRecord StoreSession::read_committed_record(uint64_t offset) const {
    uint8_t len_buf[4];
    detail::pread_exact(fd_, len_buf, 4, offset);
    const uint32_t len = (static_cast<uint32_t>(len_buf[0]) << 24) |
                         (static_cast<uint32_t>(len_buf[1]) << 16) |
                         (static_cast<uint32_t>(len_buf[2]) << 8) | len_buf[3];
    if (len < 1 || len > detail::kMaxRecordLength)
        throw Error(Errc::io_failure, "committed record frame is invalid");
    std::vector<uint8_t> body(len + 4);  // kind + payload + crc
    detail::pread_exact(fd_, body.data(), body.size(), offset + 4);
    const std::span<const uint8_t> kind_payload(body.data(), len);
    const uint32_t stored = (static_cast<uint32_t>(body[len]) << 24) |
                            (static_cast<uint32_t>(body[len + 1]) << 16) |
                            (static_cast<uint32_t>(body[len + 2]) << 8) | body[len + 3];
    if (detail::crc32_of(kind_payload) != stored)
        throw Error(Errc::io_failure, "checksum mismatch on committed record").with_offset(offset);
    if (kind_payload[0] != static_cast<uint8_t>(RecKind::instance_write))
        throw Error(Errc::io_failure, "oid index points at a non-record frame")
            .with_offset(offset);
    return decode_record(kind_payload.subspan(1));
}

bool StoreSession::has_staged_changes() const {
    return !staged_schema_.empty() || !pending_creates_.empty() || !pending_deletes_.empty() ||
           !dirty_oids_.empty() || registry_.has_pending();
}

size_t StoreSession::object_count() const {
    return committed_.size() - pending_deletes_.size() + pending_creates_.size();
}

bool StoreSession::is_live(Oid oid) const {
    if (pending_creates_.count(oid.id)) return true;
    if (pending_deletes_.count(oid.id)) return false;
    return committed_.count(oid.id) != 0;
}

bool StoreSession::is_deleted(Oid oid) const {
    return pending_deletes_.count(oid.id) != 0 || deleted_committed_.count(oid.id) != 0;
}

std::vector<Oid> StoreSession::live_oids() const {
    std::set<uint64_t> ids = pending_creates_;
    for (const auto& [oid, meta] : committed_)
        if (pending_deletes_.count(oid) == 0) ids.insert(oid);
    std::vector<Oid> out;
    out.reserve(ids.size());
    for (uint64_t id : ids) out.push_back(Oid{id});
    return out;
}

}  // namespace pachyderm
