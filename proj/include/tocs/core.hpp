#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tocs {

/// Time and utility values are plain doubles throughout; infinity is a
/// legal time (an open-ended final transfer).
using real = double;

inline constexpr real kInf = std::numeric_limits<real>::infinity();

/// Raised when an input (file, strategy, scenario, argument) fails
/// validation.  The CLI maps this to exit code 2.
class validation_error : public std::invalid_argument {
  public:
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numeric procedure cannot reach its tolerance (quadrature
/// depth exhausted, sweep cap hit).  The CLI maps this to exit code 3.
class numeric_error : public std::runtime_error {
  public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Small deterministic PRNG.  Streams derived from (seed, index) are
/// independent of thread scheduling, so parallel and serial runs agree.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x632be59bd9b4e019ULL) {
        // decorrelate trivially related seeds
        next_u64();
        next_u64();
    }
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t s = seed;
        std::uint64_t mixed = splitmix64(s) ^ (index * 0x9e3779b97f4a7c15ULL);
        return Rng(splitmix64(mixed));
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1).
    real uniform() { return static_cast<real>(next_u64() >> 11) * 0x1.0p-53; }

    real uniform(real lo, real hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Index drawn from a discrete distribution given by nonnegative weights.
    std::size_t pick(const std::vector<real>& weights) {
        real total = 0;
        for (real w : weights) total += w;
        real x = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            x -= weights[i];
            if (x < 0) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

  private:
    std::uint64_t state_;
};

/// Runs fn(i) for i in [0, n) across a few threads with a static partition.
/// Callers must make fn(i) write only to slot i of preallocated storage;
/// results are then identical to a serial run.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = hw == 0 ? 1 : hw;
    if (workers > n) workers = n == 0 ? 1 : n;
    if (workers <= 1 || n < 4) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

} // namespace tocs
