/* Copyright 2026 The dwv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef DWV_TOOLS_CLI_SUPPORT_HPP_
#define DWV_TOOLS_CLI_SUPPORT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dwv::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestName = "run_manifest.json";

/// "16/255" or a plain decimal; throws std::invalid_argument otherwise.
double parse_epsilon(const std::string& text);

/// Comma-separated numbers; each item may use the fraction syntax.
std::vector<double> parse_number_list(const std::string& text);

/// Reads a flat key=value file (blank lines and '#' comments ignored).
std::map<std::string, std::string> read_flat_config(const std::filesystem::path& file);

/// Splices `--config FILE` entries into argv as `--key value` pairs for every
/// key not already given on the command line, so flags win over the file and
/// the file wins over defaults. The subcommand is args[1].
std::vector<std::string> expand_config_args(const std::vector<std::string>& args);

/// SHA-256 of a file, of a directory's files (sorted relative names and
/// contents, run manifests excluded), or of the string itself when the path
/// does not exist (synthetic dataset specs).
std::string digest_source(const std::string& source);

struct RunManifest {
  std::string command;
  std::string config_text;  // resolved key=value lines
  std::map<std::string, std::string> inputs;   // name -> source
  std::map<std::string, unsigned long long> seeds;
  std::map<std::string, double> timings;       // seconds per stage
  std::vector<std::string> outputs;            // paths relative to the run dir

  /// Writes run_manifest.json into `dir`, with digests of the config, every
  /// input and every output.
  void write(const std::filesystem::path& dir) const;
};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal standalone SVG line chart.
std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<Series>& series);

}  // namespace dwv::cli

#endif  // DWV_TOOLS_CLI_SUPPORT_HPP_
