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

#include "riskpmp/brownian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "riskpmp/parallel.hpp"
#include "riskpmp/philox.hpp"

namespace riskpmp {

BrownianEnsemble::BrownianEnsemble(TimeGrid grid, std::size_t dim, std::size_t paths,
                                   std::uint64_t seed)
    : grid_(grid), dim_(dim), paths_(paths), seed_(seed) {
    if (dim == 0) throw std::invalid_argument("Brownian dimension must be at least 1");
    if (paths == 0) throw std::invalid_argument("Brownian ensemble needs at least one path");
    if (grid.steps() >= std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("too many time steps for the counter layout");
    }
}

BrownianEnsemble BrownianEnsemble::from_increments(TimeGrid grid, std::size_t dim,
                                                   std::size_t paths, std::uint64_t seed,
                                                   std::vector<double> increments) {
    BrownianEnsemble out(grid, dim, paths, seed);
    if (increments.size() != paths * grid.steps() * dim) {
        throw std::invalid_argument("increment array has " + std::to_string(increments.size()) +
                                    " entries, expected " +
                                    std::to_string(paths * grid.steps() * dim));
    }
    out.stored_ = std::make_shared<const std::vector<double>>(std::move(increments));
    return out;
}

void BrownianEnsemble::path_increments(std::size_t path, std::span<double> out) const {
    const std::size_t steps = grid_.steps();
    if (out.size() < steps * dim_) throw std::invalid_argument("increment buffer too small");
    if (stored_) {
        const double* src = stored_->data() + path * steps * dim_;
        std::copy(src, src + steps * dim_, out.begin());
        return;
    }
    const double scale = std::sqrt(grid_.dt() / static_cast<double>(fine_factor_));
    for (std::size_t k = 0; k < steps; ++k) {
        double* slot = out.data() + k * dim_;
        for (std::size_t c = 0; c < dim_; ++c) slot[c] = 0.0;
        for (std::size_t f = 0; f < fine_factor_; ++f) {
            const auto fine_step = static_cast<std::uint32_t>(k * fine_factor_ + f);
            for (std::size_t block = 0; 2 * block < dim_; ++block) {
                const auto z = normal_pair(seed_, path, fine_step, static_cast<std::uint32_t>(block));
                slot[2 * block] += scale * z[0];
                if (2 * block + 1 < dim_) slot[2 * block + 1] += scale * z[1];
            }
        }
    }
}

double BrownianEnsemble::increment(std::size_t path, std::size_t step,
                                   std::size_t component) const {
    if (stored_) return (*stored_)[(path * grid_.steps() + step) * dim_ + component];
    const double scale = std::sqrt(grid_.dt() / static_cast<double>(fine_factor_));
    double sum = 0.0;
    for (std::size_t f = 0; f < fine_factor_; ++f) {
        const auto fine_step = static_cast<std::uint32_t>(step * fine_factor_ + f);
        const auto z = normal_pair(seed_, path, fine_step, static_cast<std::uint32_t>(component / 2));
        sum += scale * z[component % 2];
    }
    return sum;
}

BrownianEnsemble BrownianEnsemble::materialize() const {
    if (stored_) return *this;
    const std::size_t width = grid_.steps() * dim_;
    std::vector<double> data(paths_ * width);
    parallel_for(paths_, [&](std::size_t path) {
        path_increments(path, std::span<double>(data.data() + path * width, width));
    });
    return from_increments(grid_, dim_, paths_, seed_, std::move(data));
}

BrownianEnsemble BrownianEnsemble::coarsen(std::size_t factor) const {
    const TimeGrid coarse = grid_.coarsened(factor);
    if (!stored_) {
        BrownianEnsemble out(coarse, dim_, paths_, seed_);
        out.fine_factor_ = fine_factor_ * factor;
        return out;
    }
    const std::size_t fine_steps = grid_.steps();
    const std::size_t coarse_steps = coarse.steps();
    std::vector<double> data(paths_ * coarse_steps * dim_, 0.0);
    for (std::size_t p = 0; p < paths_; ++p) {
        for (std::size_t k = 0; k < fine_steps; ++k) {
            for (std::size_t c = 0; c < dim_; ++c) {
                data[(p * coarse_steps + k / factor) * dim_ + c] +=
                    (*stored_)[(p * fine_steps + k) * dim_ + c];
            }
        }
    }
    return from_increments(coarse, dim_, paths_, seed_, std::move(data));
}

BrownianPaths BrownianEnsemble::values() const {
    const std::size_t steps = grid_.steps();
    BrownianPaths out{paths_, steps, dim_, std::vector<double>(paths_ * (steps + 1) * dim_, 0.0)};
    parallel_for(paths_, [&](std::size_t path) {
        std::vector<double> inc(steps * dim_);
        path_increments(path, inc);
        double* w = out.data.data() + path * (steps + 1) * dim_;
        for (std::size_t k = 0; k < steps; ++k) {
            for (std::size_t c = 0; c < dim_; ++c) {
                w[(k + 1) * dim_ + c] = w[k * dim_ + c] + inc[k * dim_ + c];
            }
        }
    });
    return out;
}

BrownianEnsemble sample_brownian(const TimeGrid& grid, std::size_t dim, std::size_t paths,
                                 std::uint64_t seed) {
    return BrownianEnsemble(grid, dim, paths, seed);
}

}  // namespace riskpmp
