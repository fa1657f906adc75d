#pragma once
// Object-graph traversal and export/import of closed subgraphs preserving
// identity, sharing and cycles.
//
// Blob format: magic "PGRF" + LEB128 descriptor count + encoded descriptors
// (schema layout) + LEB128 record count + encoded records (codec layout)
// with oids remapped to a dense 1..n numbering (ascending original oid).
// Every ref inside a blob resolves within the blob; each object appears
// exactly once.

#include <cstdint>
#include <map>
#include <vector>

#include "pachyderm/session.hpp"

namespace pachyderm {

// Oids reachable from `roots` via ref edges, roots included, ascending.
// `visit_count`, when given, receives the number of traversal visits (one
// per reached object, even on dense cyclic graphs).
// Throws unknown_oid for a missing root, dangling_ref when traversal meets
// a ref to a deleted or never-allocated oid.
std::vector<Oid> reachable_closure(StoreSession& session, const std::vector<Oid>& roots,
                                   size_t* visit_count = nullptr);

struct ExportedGraph {
    std::vector<uint8_t> bytes;
    // Original oid -> dense id inside the blob.
    std::map<Oid, uint64_t> dense_ids;
};

// Exports the reachable closure of `roots`, including every descriptor
// version up to the highest one referenced per contained class.
ExportedGraph export_subgraph(StoreSession& session, const std::vector<Oid>& roots);

// Imports a blob under fresh oids; returns dense id -> new oid. Contained
// classes must be absent from the store or descriptor-identical at the same
// version (extra newer versions in the blob are registered as
// redefinitions). Throws schema_conflict / malformed.
std::map<uint64_t, Oid> import_subgraph(StoreSession& session,
                                        const std::vector<uint8_t>& blob);

// True iff a bijection maps closure(roots_a) onto closure(roots_b) matching
// class, version and all slot values, with refs corresponding under the
// bijection and roots paired positionally. Runs in linear time by parallel
// traversal.
bool graphs_isomorphic(StoreSession& session_a, const std::vector<Oid>& roots_a,
                       StoreSession& session_b, const std::vector<Oid>& roots_b);

}  // namespace pachyderm
