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

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "riskpmp/time_grid.hpp"

namespace riskpmp {

/// Brownian values W(t_k) for every path, laid out [path][step 0..K][component].
struct BrownianPaths {
    std::size_t paths = 0;
    std::size_t steps = 0;
    std::size_t dim = 0;
    std::vector<double> data;

    const double* at(std::size_t path, std::size_t k) const noexcept {
        return data.data() + (path * (steps + 1) + k) * dim;
    }
};

/// M sample paths of a d-dimensional Wiener process on a TimeGrid.
///
/// By default the increments are not stored: increment (path, step, component)
/// is regenerated from a Philox counter keyed by the seed, so the ensemble is
/// O(1) in memory and bit-identical under any evaluation order. An ensemble
/// can also carry explicit increments (materialize(), from_increments()).
class BrownianEnsemble {
public:
    BrownianEnsemble(TimeGrid grid, std::size_t dim, std::size_t paths, std::uint64_t seed);

    /// Explicit increments laid out [path][step][component].
    static BrownianEnsemble from_increments(TimeGrid grid, std::size_t dim, std::size_t paths,
                                            std::uint64_t seed, std::vector<double> increments);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t paths() const noexcept { return paths_; }
    std::uint64_t seed() const noexcept { return seed_; }
    bool materialized() const noexcept { return stored_ != nullptr; }

    /// Writes the K*d increments of one path into out ([step][component]).
    void path_increments(std::size_t path, std::span<double> out) const;
    double increment(std::size_t path, std::size_t step, std::size_t component) const;

    BrownianEnsemble materialize() const;

    /// Same paths observed on a grid with steps/factor steps (increments summed).
    BrownianEnsemble coarsen(std::size_t factor) const;

    BrownianPaths values() const;

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::size_t paths_;
    std::uint64_t seed_;
    std::size_t fine_factor_ = 1;  // generated increments are sums of this many draws
    std::shared_ptr<const std::vector<double>> stored_;
};

BrownianEnsemble sample_brownian(const TimeGrid& grid, std::size_t dim, std::size_t paths,
                                 std::uint64_t seed);

}  // namespace riskpmp
