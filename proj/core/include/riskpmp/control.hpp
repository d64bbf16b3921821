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
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace riskpmp {

/// Finite control set U. Points are stored row-major, one control value of
/// dimension dim() per point. When built from a box, the lower/upper bounds are
/// kept and every vertex of the box is among the points.
class ControlSet {
public:
    static ControlSet box(std::vector<double> lower, std::vector<double> upper,
                          std::size_t points_per_axis);
    static ControlSet from_points(std::size_t dim, std::vector<double> points);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ == 0 ? 0 : points_.size() / dim_; }
    std::span<const double> point(std::size_t i) const noexcept {
        return {points_.data() + i * dim_, dim_};
    }
    bool has_box() const noexcept { return !lower_.empty(); }
    std::span<const double> lower() const noexcept { return lower_; }
    std::span<const double> upper() const noexcept { return upper_; }

    /// True if u is one of the grid points or, for boxes, lies inside the box.
    bool contains(std::span<const double> u, double tol = 1e-12) const;

private:
    std::size_t dim_ = 0;
    std::vector<double> points_;
    std::vector<double> lower_;
    std::vector<double> upper_;
};

/// Realized control values u[path][step][component] for steps 0..K-1.
class ControlTable {
public:
    ControlTable() = default;
    ControlTable(std::size_t paths, std::size_t steps, std::size_t dim)
        : paths_(paths), steps_(steps), dim_(dim), data_(paths * steps * dim, 0.0) {}

    std::size_t paths() const noexcept { return paths_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t dim() const noexcept { return dim_; }

    std::span<double> at(std::size_t path, std::size_t step) noexcept {
        return {data_.data() + (path * steps_ + step) * dim_, dim_};
    }
    std::span<const double> at(std::size_t path, std::size_t step) const noexcept {
        return {data_.data() + (path * steps_ + step) * dim_, dim_};
    }
    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t paths_ = 0;
    std::size_t steps_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

/// What a control law may look at when choosing u(t_k): the current node,
/// the path's current state and Brownian value. Nothing from later steps is
/// exposed, so every law built on this interface is adapted.
struct ControlQuery {
    std::size_t step = 0;
    double time = 0.0;
    std::size_t path = 0;
    std::span<const double> state;
    std::span<const double> brownian;
};

class ControlLaw {
public:
    using Feedback = std::function<void(const ControlQuery&, std::span<double>)>;

    static ControlLaw constant(std::vector<double> value);
    static ControlLaw open_loop(std::size_t dim, std::function<void(double, std::span<double>)> signal);
    static ControlLaw tabulated(ControlTable table);
    static ControlLaw feedback(std::size_t dim, Feedback law);

    std::size_t dim() const noexcept { return dim_; }
    void evaluate(const ControlQuery& query, std::span<double> out) const { law_(query, out); }

    /// Non-null for tabulated laws.
    const ControlTable* table() const noexcept { return table_.get(); }

private:
    ControlLaw(std::size_t dim, Feedback law) : dim_(dim), law_(std::move(law)) {}

    std::size_t dim_;
    Feedback law_;
    std::shared_ptr<const ControlTable> table_;
};

}  // namespace riskpmp
