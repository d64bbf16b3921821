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


#include "report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#ifndef RISKPMP_VERSION
#define RISKPMP_VERSION "unknown"
#endif
#ifndef RISKPMP_REVISION
#define RISKPMP_REVISION ""
#endif

namespace riskpmp::cli {

using nlohmann::json;

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    // integral values (counts, step numbers) print without an exponent
    if (x == std::floor(x) && std::abs(x) < 1e15) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<long long>(x));
        return std::string(buf, res.ptr);
    }
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string CsvTable::render() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw std::logic_error("csv row width does not match its header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_number(row[i]);
        }
        out += '\n';
    }
    return out;
}

std::string version_string() {
    std::string v = RISKPMP_VERSION;
    const std::string rev = RISKPMP_REVISION;
    if (!rev.empty()) v += "+" + rev;
    return v;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string render_report(const std::string& kind, const RunOutcome& outcome, const json& echo,
                          const std::string& timestamp) {
    json artifacts = json::array();
    for (const auto& a : outcome.artifacts) artifacts.push_back(a.name);
    // Top level keeps insertion order; nested objects are key-sorted.
    nlohmann::ordered_json report{{"schema", kReportSchema},
                {"kind", kind},
                {"status", to_string(outcome.status)},
                {"causes", outcome.causes},
                {"timestamp", timestamp},
                {"results", outcome.results},
                {"artifacts", artifacts},
                {"reproduction",
                 {{"version", version_string()},
                  {"command", "riskpmp " + kind + " --config <config echo below>"},
                  {"config", echo}}}};
    return report.dump(2) + "\n";
}

void write_bundle(const std::filesystem::path& dir, const std::string& report, const std::vector<Artifact>& artifacts) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto put = [&dir](const std::string& name, const std::string& content) {
        const fs::path target = dir / name;
        const fs::path temp = dir / (name + ".tmp");
        {
            std::ofstream out(temp, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot write " + temp.string());
            out << content;
            if (!out) throw std::runtime_error("write failed for " + temp.string());
        }
        fs::rename(temp, target);
    };
    for (const auto& a : artifacts) put(a.name, a.content);
    put("report.json", report);
}

CsvTable martingale_table(const MartingaleReport& report, std::size_t component) {
    CsvTable t{{"t", "mean_p_y", "stderr"}, {}};
    if (report.raw_mean.cols() <= static_cast<Eigen::Index>(component)) return t;
    const auto c = static_cast<Eigen::Index>(component);
    for (std::size_t k = 0; k < report.times.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        t.rows.push_back({report.times[k], report.raw_mean(i, c), report.raw_stderr(i, c)});
    }
    return t;
}

CsvTable gap_histogram_table(const MaximizationGapReport& report) {
    CsvTable t{{"lower", "upper", "count"}, {}};
    const auto& edges = report.histogram_edges;
    for (std::size_t i = 0; i < edges.size() && i < report.histogram_counts.size(); ++i) {
        const double upper = i + 1 < edges.size() ? edges[i + 1] : std::numeric_limits<double>::infinity();
        t.rows.push_back({edges[i], upper, static_cast<double>(report.histogram_counts[i])});
    }
    return t;
}

int exit_code(Verdict verdict) {
    switch (verdict) {
        case Verdict::Pass: return 0;
        case Verdict::Fail: return 2;
        case Verdict::Inconclusive: return 3;
    }
    return 2;
}

}  // namespace riskpmp::cli
