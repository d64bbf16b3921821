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
#include <vector>

namespace riskpmp {

/// Uniform partition 0 = t_0 < ... < t_K = T of the horizon.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }

    /// t_k; the last node is returned as exactly T.
    double node(std::size_t k) const noexcept {
        return k >= steps_ ? horizon_ : static_cast<double>(k) * dt_;
    }
    std::vector<double> nodes() const;

    /// Same horizon with steps / factor steps. factor must divide steps.
    TimeGrid coarsened(std::size_t factor) const;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double horizon_;
    std::size_t steps_;
    double dt_;
};

/// Checked construction from user input; rejects T <= 0 and K <= 0.
TimeGrid make_grid(double horizon, std::int64_t steps);

}  // namespace riskpmp
