#pragma once
// Persisted snapshot of one object: identity, class identification at write
// time, and the bound persistent slots. Unbound slots are simply absent.

#include <cstdint>
#include <map>
#include <string>

#include "pachyderm/value.hpp"

namespace pachyderm {

struct InstanceRecord {
    Oid oid;
    std::string class_name;
    uint64_t class_version = 1;
    // std::map iterates in ascending name-byte order, which is exactly the
    // wire slot order.
    std::map<std::string, Value> slots;
};

}  // namespace pachyderm
