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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskpmp/adjoint.hpp"
#include "riskpmp/certificate.hpp"

namespace riskpmp::cli {

inline constexpr const char* kReportSchema = "riskpmp_report_v1";

/// A tidy CSV table. An empty table still has its header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string render() const;
};

/// Shortest decimal form that round-trips; "inf"/"-inf"/"nan" otherwise.
std::string format_number(double x);

struct Artifact {
    std::string name;
    std::string content;
};

struct RunOutcome {
    Verdict status = Verdict::Pass;
    std::vector<std::string> causes;
    nlohmann::json results = nlohmann::json::object();
    std::vector<Artifact> artifacts;  // everything except report.json
};

std::string version_string();

/// report.json contents. The timestamp sits on its own line so that
/// comparisons can drop it.
std::string render_report(const std::string& kind, const RunOutcome& outcome, const nlohmann::json& echo,
                          const std::string& timestamp);

std::string utc_timestamp();

/// Writes every artifact plus report.json into `dir` (created if missing).
/// Each file is written under a temporary name and renamed into place.
void write_bundle(const std::filesystem::path& dir, const std::string& report, const std::vector<Artifact>& artifacts);

// Plot tables shared by several kinds.
CsvTable martingale_table(const MartingaleReport& report, std::size_t component = 0);
CsvTable gap_histogram_table(const MaximizationGapReport& report);

/// 0 pass, 2 fail, 3 inconclusive.
int exit_code(Verdict verdict);

}  // namespace riskpmp::cli
