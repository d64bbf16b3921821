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

#include "riskpmp/time_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace riskpmp {

TimeGrid::TimeGrid(double horizon, std::size_t steps)
    : horizon_(horizon), steps_(steps), dt_(0.0) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw std::invalid_argument("time grid horizon must be positive and finite");
    }
    if (steps == 0) throw std::invalid_argument("time grid needs at least one step");
    dt_ = horizon / static_cast<double>(steps);
}

std::vector<double> TimeGrid::nodes() const {
    std::vector<double> out(steps_ + 1);
    for (std::size_t k = 0; k <= steps_; ++k) out[k] = node(k);
    return out;
}

TimeGrid TimeGrid::coarsened(std::size_t factor) const {
    if (factor == 0 || steps_ % factor != 0) {
        throw std::invalid_argument("coarsening factor " + std::to_string(factor) +
                                    " does not divide " + std::to_string(steps_) + " steps");
    }
    return TimeGrid(horizon_, steps_ / factor);
}

TimeGrid make_grid(double horizon, std::int64_t steps) {
    if (steps <= 0) throw std::invalid_argument("time grid step count must be positive");
    return TimeGrid(horizon, static_cast<std::size_t>(steps));
}

}  // namespace riskpmp
