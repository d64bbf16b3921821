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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "riskpmp/time_grid.hpp"

namespace riskpmp {

class StateEnsemble;
class BrownianEnsemble;

/// Read-only view of a per-path, per-node process with `width` columns,
/// laid out [path][step 0..K][column].
struct ProcessView {
    TimeGrid grid{1.0, 1};
    std::size_t paths = 0;
    std::size_t width = 0;
    std::span<const double> data;
    std::vector<std::string> columns;
};

ProcessView view_of(const StateEnsemble& states, const std::string& prefix = "x");

/// One row per (path, step): path,step,t,<columns...>. Values are written
/// with 17 significant digits so they round-trip exactly.
void write_csv(std::ostream& out, const ProcessView& view);
void write_csv(const std::filesystem::path& file, const ProcessView& view);

/// Header of the binary dump. n is the state dimension, d the Brownian
/// dimension, K the step count and M the path count.
struct DumpHeader {
    std::uint64_t n = 0;
    std::uint64_t d = 0;
    std::uint64_t K = 0;
    std::uint64_t M = 0;
    std::uint64_t seed = 0;
};

struct BinaryDump {
    DumpHeader header;
    std::size_t width = 0;  // doubles per (path, step) record
    std::vector<double> data;
};

/// "RPMP1" magic, five little-endian uint64 header fields, then the view's
/// records as little-endian float64.
void write_binary(const std::filesystem::path& file, const DumpHeader& header, const ProcessView& view);
BinaryDump read_binary(const std::filesystem::path& file);

}  // namespace riskpmp
