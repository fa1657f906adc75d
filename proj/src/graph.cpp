#include "pachyderm/graph.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <functional>
#include <set>
#include <unordered_map>

#include "pachyderm/codec.hpp"

namespace pachyderm {

namespace {

constexpr char kGraphMagic[4] = {'P', 'G', 'R', 'F'};

// Collects ref targets of one record in deterministic slot order.
std::vector<Oid> record_refs(const InstanceRecord& r) {
    std::vector<Oid> out;
    for (const auto& [slot, value] : r.slots)
        for_each_ref(value, [&](Oid target) { out.push_back(target); });
    return out;
}

Value remap_refs(const Value& v, const std::unordered_map<uint64_t, uint64_t>& mapping) {
    switch (v.kind()) {
        case Value::Kind::ref:
            return Value::ref(Oid{mapping.at(v.as_ref().id)});
        case Value::Kind::list: {
            std::vector<Value> items;
            items.reserve(v.as_list().size());
            for (const auto& item : v.as_list()) items.push_back(remap_refs(item, mapping));
            return Value::list(std::move(items));
        }
        case Value::Kind::map: {
            std::vector<std::pair<Value, Value>> entries;
            entries.reserve(v.as_map().size());
            for (const auto& [k, val] : v.as_map())
                entries.emplace_back(k, remap_refs(val, mapping));
            return Value::map(std::move(entries));
        }
        default:
            return v;
    }
}

}  // namespace

std::vector<Oid> reachable_closure(StoreSession& session, const std::vector<Oid>& roots,
                                   size_t* visit_count) {
    if (visit_count) *visit_count = 0;
    std::set<uint64_t> seen;
    std::deque<uint64_t> work;
    for (Oid root : roots) {
        if (!session.is_live(root)) {
            if (session.is_deleted(root))
                throw Error(Errc::deleted,
                            "root " + std::to_string(root.id) + " was deleted");
            throw Error(Errc::unknown_oid, "root " + std::to_string(root.id) + " not in store");
        }
        if (seen.insert(root.id).second) work.push_back(root.id);
    }
    while (!work.empty()) {
        const uint64_t id = work.front();
        work.pop_front();
        if (visit_count) ++*visit_count;
        const InstanceRecord& rec = session.peek_record(Oid{id});
        for (Oid target : record_refs(rec)) {
            if (!session.is_live(target))
                throw Error(Errc::dangling_ref,
                            "object " + std::to_string(id) + " refs missing object " +
                                std::to_string(target.id))
                    .with_detail(std::to_string(id) + "->" + std::to_string(target.id));
            if (seen.insert(target.id).second) work.push_back(target.id);
        }
    }
    std::vector<Oid> out;
    out.reserve(seen.size());
    for (uint64_t id : seen) out.push_back(Oid{id});
    return out;
}

ExportedGraph export_subgraph(StoreSession& session, const std::vector<Oid>& roots) {
    const std::vector<Oid> closure = reachable_closure(session, roots);

    ExportedGraph result;
    std::unordered_map<uint64_t, uint64_t> dense;
    dense.reserve(closure.size());
    uint64_t next = 1;
    for (Oid oid : closure) {
        dense[oid.id] = next;
        result.dense_ids[oid] = next;
        ++next;
    }

    // Descriptor versions 1..max referenced, per class, so version ranges
    // stay contiguous when imported into a store that lacks the class.
    std::map<std::string, uint64_t> max_version;
    for (Oid oid : closure) {
        const InstanceRecord& rec = session.peek_record(oid);
        auto [it, inserted] = max_version.emplace(rec.class_name, rec.class_version);
        if (!inserted) it->second = std::max(it->second, rec.class_version);
    }

    std::vector<uint8_t>& out = result.bytes;
    out.insert(out.end(), kGraphMagic, kGraphMagic + 4);
    uint64_t descriptor_count = 0;
    for (const auto& [name, version] : max_version) descriptor_count += version;
    put_uvarint(out, descriptor_count);
    for (const auto& [name, version] : max_version)
        for (uint64_t v = 1; v <= version; ++v) {
            const std::vector<uint8_t> enc = encode_descriptor(session.get_descriptor(name, v));
            out.insert(out.end(), enc.begin(), enc.end());
        }

    put_uvarint(out, closure.size());
    for (Oid oid : closure) {
        InstanceRecord rec = session.peek_record(oid);
        rec.oid = Oid{dense.at(oid.id)};
        for (auto& [slot, value] : rec.slots) value = remap_refs(value, dense);
        const std::vector<uint8_t> enc = encode_record(rec);
        out.insert(out.end(), enc.begin(), enc.end());
    }
    return result;
}

std::map<uint64_t, Oid> import_subgraph(StoreSession& session,
                                        const std::vector<uint8_t>& blob) {
    const std::span<const uint8_t> bytes(blob);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kGraphMagic, 4) != 0)
        throw Error(Errc::malformed, "not a graph blob");
    size_t pos = 4;

    std::vector<ClassDescriptor> descriptors;
    try {
        const uint64_t descriptor_count = get_uvarint(bytes, pos);
        for (uint64_t i = 0; i < descriptor_count; ++i) {
            size_t consumed = 0;
            descriptors.push_back(decode_descriptor(bytes, pos, consumed));
            pos += consumed;
        }
    } catch (const Error& e) {
        throw Error(Errc::malformed, std::string("bad graph blob descriptors: ") + e.what());
    }

    // Reconcile schemas: identical-at-version required, newer blob versions
    // registered as redefinitions.
    try {
        for (const ClassDescriptor& desc : descriptors) {
            if (session.schema().has_class(desc.name)) {
                const uint64_t current = session.schema().current_version(desc.name);
                if (desc.version <= current) {
                    const std::vector<uint8_t> theirs = encode_descriptor(desc);
                    const std::vector<uint8_t> ours =
                        encode_descriptor(session.get_descriptor(desc.name, desc.version));
                    if (theirs != ours)
                        throw Error(Errc::schema_conflict,
                                    "class '" + desc.name + "' v" +
                                        std::to_string(desc.version) +
                                        " differs from the store's definition")
                            .with_detail(desc.name);
                } else if (desc.version == current + 1) {
                    session.redefine_class(desc.name, desc.slots);
                } else {
                    throw Error(Errc::malformed, "descriptor versions out of order in blob");
                }
            } else {
                if (desc.version != 1)
                    throw Error(Errc::malformed,
                                "blob lacks version 1 of class '" + desc.name + "'");
                session.define_class(desc.name, desc.slots);
            }
        }
    } catch (const Error& e) {
        if (e.code() == Errc::schema_conflict || e.code() == Errc::malformed) throw;
        throw Error(Errc::malformed, std::string("bad graph blob schema: ") + e.what());
    }

    std::vector<InstanceRecord> records;
    uint64_t record_count = 0;
    try {
        record_count = get_uvarint(bytes, pos);
        for (uint64_t i = 0; i < record_count; ++i) {
            size_t consumed = 0;
            records.push_back(decode_record_at(bytes, pos, consumed));
            pos += consumed;
        }
    } catch (const Error& e) {
        throw Error(Errc::malformed, std::string("bad graph blob records: ") + e.what());
    }
    if (pos != bytes.size())
        throw Error(Errc::malformed, "trailing bytes after graph blob").with_offset(pos);

    // Dense ids must be exactly 1..n, each exactly once, refs within range.
    std::set<uint64_t> ids;
    for (const InstanceRecord& r : records) {
        if (r.oid.id < 1 || r.oid.id > record_count || !ids.insert(r.oid.id).second)
            throw Error(Errc::malformed, "graph blob ids are not dense 1..n");
        for (Oid target : record_refs(r))
            if (target.id < 1 || target.id > record_count)
                throw Error(Errc::malformed, "graph blob ref escapes the blob");
    }

    std::map<uint64_t, Oid> mapping;
    std::unordered_map<uint64_t, uint64_t> dense_to_new;
    std::vector<std::pair<Handle, InstanceRecord>> staged;
    staged.reserve(records.size());
    // Two passes: allocate all oids first so refs can be rewritten, then
    // install slots verbatim at each record's written version.
    try {
        for (InstanceRecord& r : records) {
            InstanceRecord shell;
            shell.class_name = r.class_name;
            shell.class_version = r.class_version;
            Handle handle = session.restore_record(std::move(shell));
            mapping[r.oid.id] = handle.oid();
            dense_to_new[r.oid.id] = handle.oid().id;
            staged.emplace_back(handle, std::move(r));
        }
        for (auto& [handle, r] : staged) {
            for (auto& [slot, value] : r.slots) value = remap_refs(value, dense_to_new);
            session.restore_slots(handle, std::move(r.slots));
        }
    } catch (const Error& e) {
        throw Error(Errc::malformed, std::string("bad graph blob records: ") + e.what());
    }
    return mapping;
}

namespace {

// Structural match where refs must pair under the evolving bijection.
bool values_match(const Value& a, const Value& b,
                  const std::function<bool(Oid, Oid)>& pair_refs) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case Value::Kind::ref:
            return pair_refs(a.as_ref(), b.as_ref());
        case Value::Kind::list: {
            const auto& la = a.as_list();
            const auto& lb = b.as_list();
            if (la.size() != lb.size()) return false;
            for (size_t i = 0; i < la.size(); ++i)
                if (!values_match(la[i], lb[i], pair_refs)) return false;
            return true;
        }
        case Value::Kind::map: {
            const auto& ma = a.as_map();
            const auto& mb = b.as_map();
            if (ma.size() != mb.size()) return false;
            for (const auto& [ka, va] : ma) {
                bool found = false;
                for (const auto& [kb, vb] : mb) {
                    if (equal(ka, kb)) {  // keys are scalar, no refs inside
                        if (!values_match(va, vb, pair_refs)) return false;
                        found = true;
                        break;
                    }
                }
                if (!found) return false;
            }
            return true;
        }
        default:
            return equal(a, b);
    }
}

}  // namespace

bool graphs_isomorphic(StoreSession& session_a, const std::vector<Oid>& roots_a,
                       StoreSession& session_b, const std::vector<Oid>& roots_b) {
    if (roots_a.size() != roots_b.size()) return false;
    for (Oid root : roots_a)
        if (!session_a.is_live(root)) {
            if (session_a.is_deleted(root))
                throw Error(Errc::deleted, "root " + std::to_string(root.id) + " was deleted");
            throw Error(Errc::unknown_oid, "root " + std::to_string(root.id) + " not in store");
        }
    for (Oid root : roots_b)
        if (!session_b.is_live(root)) {
            if (session_b.is_deleted(root))
                throw Error(Errc::deleted, "root " + std::to_string(root.id) + " was deleted");
            throw Error(Errc::unknown_oid, "root " + std::to_string(root.id) + " not in store");
        }

    std::unordered_map<uint64_t, uint64_t> fwd;
    std::unordered_map<uint64_t, uint64_t> rev;
    std::deque<std::pair<uint64_t, uint64_t>> work;
    bool consistent = true;

    auto pair_nodes = [&](Oid a, Oid b) -> bool {
        auto f = fwd.find(a.id);
        auto r = rev.find(b.id);
        if (f == fwd.end() && r == rev.end()) {
            fwd[a.id] = b.id;
            rev[b.id] = a.id;
            work.emplace_back(a.id, b.id);
            return true;
        }
        return f != fwd.end() && r != rev.end() && f->second == b.id && r->second == a.id;
    };

    for (size_t i = 0; i < roots_a.size(); ++i)
        if (!pair_nodes(roots_a[i], roots_b[i])) return false;

    while (!work.empty() && consistent) {
        const auto [id_a, id_b] = work.front();
        work.pop_front();

        if (!session_a.is_live(Oid{id_a}) || !session_b.is_live(Oid{id_b})) return false;
        const InstanceRecord rec_a = session_a.peek_record(Oid{id_a});
        const InstanceRecord rec_b = session_b.peek_record(Oid{id_b});
        if (rec_a.class_name != rec_b.class_name ||
            rec_a.class_version != rec_b.class_version ||
            rec_a.slots.size() != rec_b.slots.size())
            return false;

        auto it_b = rec_b.slots.begin();
        for (const auto& [slot_a, value_a] : rec_a.slots) {
            if (it_b->first != slot_a) return false;
            std::function<bool(Oid, Oid)> pairer = [&](Oid a, Oid b) {
                // Dangling refs fail the match rather than throwing here;
                // the closure oracle reports them separately.
                if (!session_a.is_live(a) || !session_b.is_live(b)) {
                    consistent = false;
                    return false;
                }
                return pair_nodes(a, b);
            };
            if (!values_match(value_a, it_b->second, pairer)) return false;
            ++it_b;
        }
    }
    return consistent;
}

}  // namespace pachyderm
