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

#include "riskpmp/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskpmp {

ControlSet ControlSet::box(std::vector<double> lower, std::vector<double> upper,
                           std::size_t points_per_axis) {
    if (lower.empty() || lower.size() != upper.size()) {
        throw std::invalid_argument("control box bounds must be non-empty and of equal size");
    }
    if (points_per_axis < 2) throw std::invalid_argument("control box needs >= 2 points per axis");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!(lower[i] <= upper[i])) throw std::invalid_argument("control box lower > upper");
    }
    ControlSet set;
    set.dim_ = lower.size();
    std::size_t total = 1;
    for (std::size_t i = 0; i < set.dim_; ++i) total *= points_per_axis;
    set.points_.resize(total * set.dim_);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        for (std::size_t axis = 0; axis < set.dim_; ++axis) {
            const std::size_t j = rest % points_per_axis;
            rest /= points_per_axis;
            // Endpoints are assigned exactly so the box vertices are grid points.
            double value = lower[axis];
            if (j + 1 == points_per_axis) {
                value = upper[axis];
            } else if (j > 0) {
                value = lower[axis] + (upper[axis] - lower[axis]) * static_cast<double>(j) /
                                          static_cast<double>(points_per_axis - 1);
            }
            set.points_[idx * set.dim_ + axis] = value;
        }
    }
    set.lower_ = std::move(lower);
    set.upper_ = std::move(upper);
    return set;
}

ControlSet ControlSet::from_points(std::size_t dim, std::vector<double> points) {
    if (dim == 0 || points.empty() || points.size() % dim != 0) {
        throw std::invalid_argument("control point list must be a non-empty multiple of dim");
    }
    ControlSet set;
    set.dim_ = dim;
    set.points_ = std::move(points);
    return set;
}

bool ControlSet::contains(std::span<const double> u, double tol) const {
    if (u.size() != dim_) return false;
    if (has_box()) {
        for (std::size_t i = 0; i < dim_; ++i) {
            if (u[i] < lower_[i] - tol || u[i] > upper_[i] + tol) return false;
        }
        return true;
    }
    for (std::size_t p = 0; p < size(); ++p) {
        const auto candidate = point(p);
        bool same = true;
        for (std::size_t i = 0; i < dim_ && same; ++i) same = std::abs(candidate[i] - u[i]) <= tol;
        if (same) return true;
    }
    return false;
}

ControlLaw ControlLaw::constant(std::vector<double> value) {
    const std::size_t dim = value.size();
    return ControlLaw(dim, [value = std::move(value)](const ControlQuery&, std::span<double> out) {
        std::copy(value.begin(), value.end(), out.begin());
    });
}

ControlLaw ControlLaw::open_loop(std::size_t dim,
                                 std::function<void(double, std::span<double>)> signal) {
    return ControlLaw(dim, [signal = std::move(signal)](const ControlQuery& q,
                                                        std::span<double> out) {
        signal(q.time, out);
    });
}

ControlLaw ControlLaw::tabulated(ControlTable table) {
    auto shared = std::make_shared<const ControlTable>(std::move(table));
    ControlLaw law(shared->dim(), [shared](const ControlQuery& q, std::span<double> out) {
        if (q.step >= shared->steps() || q.path >= shared->paths()) {
            throw std::out_of_range("control table queried outside its (path, step) range");
        }
        const auto row = shared->at(q.path, q.step);
        std::copy(row.begin(), row.end(), out.begin());
    });
    law.table_ = std::move(shared);
    return law;
}

ControlLaw ControlLaw::feedback(std::size_t dim, Feedback law) {
    return ControlLaw(dim, std::move(law));
}

}  // namespace riskpmp
