/*
 Copyright 2026 The riskpmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace riskpmp {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
// pure function of (key, counter), so any (path, step, component) stream can
// be regenerated independently of thread schedule.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeylA;
                key[1] += kWeylB;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

    static constexpr std::pair<std::uint32_t, std::uint32_t> mulhilo(std::uint32_t a,
                                                                     std::uint32_t b) noexcept {
        const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
        return {static_cast<std::uint32_t>(product >> 32), static_cast<std::uint32_t>(product)};
    }

    static constexpr Counter single_round(const Counter& ctr, const Key& key) noexcept {
        const auto [hi0, lo0] = mulhilo(kMulA, ctr[0]);
        const auto [hi1, lo1] = mulhilo(kMulB, ctr[2]);
        return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
};

// Uniform in the open interval (0, 1) on the midpoints of a 2^-52 lattice.
// With 53 bits the top midpoint would round to 1.0.
inline double uniform_open(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

// Two independent standard normals for the stream position
// (seed, path, step, block). Box-Muller on one Philox output block.
inline std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t path,
                                         std::uint32_t step, std::uint32_t block) noexcept {
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                              static_cast<std::uint32_t>(seed >> 32)};
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(path),
                                  static_cast<std::uint32_t>(path >> 32), step, block};
    const auto out = Philox4x32::generate(ctr, key);
    const double u1 = uniform_open(out[0], out[1]);
    const double u2 = uniform_open(out[2], out[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

// Small sequential generator for test samplers and probe points; the state is
// a (key, counter) pair so it is cheap to fork deterministically.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream) {}

    double uniform() noexcept {
        refill_if_empty();
        const double u = uniform_open(buffer_[used_], buffer_[used_ + 1]);
        used_ += 2;
        return u;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    std::uint64_t below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
    }

private:
    void refill_if_empty() noexcept {
        if (used_ < 4) return;
        const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                                  static_cast<std::uint32_t>(seed_ >> 32)};
        buffer_ = Philox4x32::generate({static_cast<std::uint32_t>(counter_),
                                        static_cast<std::uint32_t>(counter_ >> 32),
                                        static_cast<std::uint32_t>(stream_),
                                        static_cast<std::uint32_t>(stream_ >> 32) ^ 0x5bd1e995u},
                                       key);
        ++counter_;
        used_ = 0;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Philox4x32::Counter buffer_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace riskpmp
