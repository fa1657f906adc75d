#pragma once
// Shared test utilities: scratch directories, error-code capture, and the
// random generators behind the property tests.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pachyderm/errors.hpp"
#include "pachyderm/value.hpp"

namespace testutil {

using pachyderm::Errc;
using pachyderm::Error;
using pachyderm::Oid;
using pachyderm::Value;

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0;; ++i) {
            auto candidate = base / ("pachyderm-" + tag + "-" + std::to_string(::getpid()) +
                                     "-" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                break;
            }
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Runs fn expecting a pachyderm::Error; returns its code.
template <typename Fn>
Errc code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    throw std::logic_error("expected a pachyderm::Error, none was thrown");
}

inline std::string random_text(std::mt19937_64& rng, size_t max_len = 12) {
    static const std::vector<std::string> pieces = {
        "a", "b", "z", "Q", "0", "7", "_", "-", " ", "\"", "\\", "é", "日", "ß", "𝄞"};
    std::uniform_int_distribution<size_t> len_dist(0, max_len);
    std::uniform_int_distribution<size_t> pick(0, pieces.size() - 1);
    std::string out;
    const size_t len = len_dist(rng);
    for (size_t i = 0; i < len; ++i) out += pieces[pick(rng)];
    return out;
}

inline int64_t random_int(std::mt19937_64& rng) {
    switch (rng() % 5) {
        case 0: return static_cast<int64_t>(rng() % 10);
        case 1: return -static_cast<int64_t>(rng() % 10);
        case 2: return static_cast<int64_t>(rng());
        case 3: return INT64_MIN;
        default: return INT64_MAX;
    }
}

inline double random_real(std::mt19937_64& rng) {
    switch (rng() % 6) {
        case 0: return 0.0;
        case 1: return -0.0;
        case 2: return std::numeric_limits<double>::quiet_NaN();
        case 3: return std::numeric_limits<double>::infinity();
        case 4: return static_cast<double>(static_cast<int64_t>(rng())) / 997.0;
        default: return std::uniform_real_distribution<double>(-1e9, 1e9)(rng);
    }
}

inline Value random_scalar(std::mt19937_64& rng) {
    switch (rng() % 7) {
        case 0: return Value::unit();
        case 1: return Value::boolean(rng() % 2 == 0);
        case 2: return Value::integer(random_int(rng));
        case 3: return Value::real(random_real(rng));
        case 4: return Value::text(random_text(rng));
        case 5: {
            std::vector<uint8_t> b(rng() % 16);
            for (auto& x : b) x = static_cast<uint8_t>(rng());
            return Value::bytes(std::move(b));
        }
        default: return Value::symbol("s" + std::to_string(rng() % 64));
    }
}

// Distinct scalars under value equality, for map keys and set members.
inline std::vector<Value> distinct_scalars(std::mt19937_64& rng, size_t want) {
    std::vector<Value> out;
    for (size_t attempts = 0; out.size() < want && attempts < want * 8; ++attempts) {
        Value candidate = random_scalar(rng);
        bool dup = false;
        for (const auto& existing : out)
            if (pachyderm::equal(existing, candidate)) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(std::move(candidate));
    }
    return out;
}

// Random value with bounded depth and node budget. Refs are drawn from
// `ref_pool` when nonempty.
inline Value random_value(std::mt19937_64& rng, int depth, size_t& budget,
                          const std::vector<Oid>& ref_pool = {}) {
    if (budget > 0) --budget;
    const bool composite_ok = depth > 0 && budget > 4;
    const int roll = static_cast<int>(rng() % 100);
    if (!composite_ok || roll < 55) {
        if (!ref_pool.empty() && roll < 10)
            return Value::ref(ref_pool[rng() % ref_pool.size()]);
        return random_scalar(rng);
    }
    if (roll < 75) {
        const size_t len = rng() % 5;
        std::vector<Value> items;
        items.reserve(len);
        for (size_t i = 0; i < len && budget > 0; ++i)
            items.push_back(random_value(rng, depth - 1, budget, ref_pool));
        return Value::list(std::move(items));
    }
    if (roll < 90) {
        auto keys = distinct_scalars(rng, rng() % 4);
        std::vector<std::pair<Value, Value>> entries;
        entries.reserve(keys.size());
        for (auto& key : keys) {
            if (budget == 0) break;
            entries.emplace_back(std::move(key), random_value(rng, depth - 1, budget, ref_pool));
        }
        return Value::map(std::move(entries));
    }
    return Value::set(distinct_scalars(rng, rng() % 5));
}

}  // namespace testutil
