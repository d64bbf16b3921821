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

#include "riskpmp/ensemble_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "riskpmp/sde.hpp"

namespace riskpmp {

namespace {

constexpr std::array<char, 5> kMagic{'R', 'P', 'M', 'P', '1'};

template <class T>
T to_little_endian(T value) {
    if constexpr (std::endian::native == std::endian::little) {
        return value;
    } else {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
}

template <class T>
void put(std::ostream& out, T value) {
    const T le = to_little_endian(value);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T raw{};
    in.read(reinterpret_cast<char*>(&raw), sizeof(T));
    if (!in) throw std::runtime_error("truncated binary dump");
    return to_little_endian(raw);
}

void check_view(const ProcessView& view) {
    if (view.data.size() != view.paths * (view.grid.steps() + 1) * view.width) {
        throw std::invalid_argument("process view size does not match its shape");
    }
    if (!view.columns.empty() && view.columns.size() != view.width) {
        throw std::invalid_argument("process view has the wrong number of column names");
    }
}

}  // namespace

ProcessView view_of(const StateEnsemble& states, const std::string& prefix) {
    ProcessView view;
    view.grid = states.grid();
    view.paths = states.paths();
    view.width = states.dim();
    view.data = states.values();
    for (std::size_t i = 0; i < states.dim(); ++i) view.columns.push_back(prefix + std::to_string(i));
    return view;
}

void write_csv(std::ostream& out, const ProcessView& view) {
    check_view(view);
    out << "path,step,t";
    for (std::size_t c = 0; c < view.width; ++c) {
        out << ',' << (view.columns.empty() ? "c" + std::to_string(c) : view.columns[c]);
    }
    out << '\n';
    out << std::setprecision(17);
    const std::size_t nodes = view.grid.steps() + 1;
    for (std::size_t p = 0; p < view.paths; ++p) {
        for (std::size_t k = 0; k < nodes; ++k) {
            out << p << ',' << k << ',' << view.grid.node(k);
            const double* row = view.data.data() + (p * nodes + k) * view.width;
            for (std::size_t c = 0; c < view.width; ++c) out << ',' << row[c];
            out << '\n';
        }
    }
}

void write_csv(const std::filesystem::path& file, const ProcessView& view) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
    write_csv(out, view);
}

void write_binary(const std::filesystem::path& file, const DumpHeader& header, const ProcessView& view) {
    check_view(view);
    if (header.K != view.grid.steps() || header.M != view.paths) {
        throw std::invalid_argument("dump header does not match the process view");
    }
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
    out.write(kMagic.data(), kMagic.size());
    put(out, header.n);
    put(out, header.d);
    put(out, header.K);
    put(out, header.M);
    put(out, header.seed);
    for (double v : view.data) put(out, v);
}

BinaryDump read_binary(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::array<char, 5> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw std::runtime_error(file.string() + " is not an RPMP1 dump");

    BinaryDump dump;
    dump.header.n = get<std::uint64_t>(in);
    dump.header.d = get<std::uint64_t>(in);
    dump.header.K = get<std::uint64_t>(in);
    dump.header.M = get<std::uint64_t>(in);
    dump.header.seed = get<std::uint64_t>(in);

    const auto start = in.tellg();
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg() - start);
    in.seekg(start);
    const std::size_t records = static_cast<std::size_t>((dump.header.K + 1) * dump.header.M);
    if (records == 0 || bytes % (records * sizeof(double)) != 0) {
        throw std::runtime_error("binary dump payload does not match its header");
    }
    dump.width = bytes / (records * sizeof(double));
    dump.data.resize(records * dump.width);
    for (double& v : dump.data) v = get<double>(in);
    return dump;
}

}  // namespace riskpmp
