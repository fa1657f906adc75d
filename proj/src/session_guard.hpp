#pragma once
// Internal: fail-fast reentrancy/concurrency guard. One operation at a time
// per session; hooks calling back into the session trip it too.

#include <atomic>

#include "pachyderm/errors.hpp"
#include "pachyderm/session.hpp"

namespace pachyderm {

struct StoreSession::OpGuard {
    explicit OpGuard(const StoreSession& s) : flag_(s.in_op_) {
        if (flag_.exchange(true, std::memory_order_acq_rel))
            throw Error(Errc::concurrent_access,
                        "overlapping operations on one session are forbidden");
    }
    ~OpGuard() { flag_.store(false, std::memory_order_release); }
    OpGuard(const OpGuard&) = delete;
    OpGuard& operator=(const OpGuard&) = delete;
    std::atomic<bool>& flag_;
};

}  // namespace pachyderm
