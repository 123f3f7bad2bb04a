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
#include "cli_support.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dwv/io.hpp"

namespace dwv::cli {
namespace fs = std::filesystem;

namespace {

double parse_double_strict(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

double parse_epsilon(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_double_strict(text);
  const double num = parse_double_strict(std::string_view(text).substr(0, slash));
  const double den = parse_double_strict(std::string_view(text).substr(slash + 1));
  if (den == 0.0) throw std::invalid_argument("zero denominator in '" + text + "'");
  return num / den;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_epsilon(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::map<std::string, std::string> read_flat_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file " + file.string());
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(file.string() + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::vector<std::string> expand_config_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string config_file;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size()) {
      config_file = args[++i];
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      config_file = a.substr(9);
      continue;
    }
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
    out.push_back(a);
  }
  if (config_file.empty()) return out;
  for (const auto& [key, value] : read_flat_config(config_file)) {
    if (given.count(key)) continue;
    out.push_back("--" + key);
    out.push_back(value);
  }
  return out;
}

std::string digest_source(const std::string& source) {
  const fs::path p(source);
  std::error_code ec;
  if (fs::is_regular_file(p, ec)) return io::sha256_file(p);
  if (fs::is_directory(p, ec)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file() && e.path().filename() != kManifestName) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    io::Sha256 h;
    for (const auto& f : files) {
      h.update(fs::relative(f, p).generic_string());
      h.update(io::sha256_file(f));
    }
    return h.hex();
  }
  return io::sha256_hex({reinterpret_cast<const std::uint8_t*>(source.data()), source.size()});
}

void RunManifest::write(const fs::path& dir) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["config_digest"] = io::sha256_hex(
      {reinterpret_cast<const std::uint8_t*>(config_text.data()), config_text.size()});
  j["config"] = config_text;
  auto& in = j["inputs"];
  in = nlohmann::ordered_json::object();
  for (const auto& [name, src] : inputs) in[name] = {{"source", src}, {"digest", digest_source(src)}};
  j["seeds"] = seeds;
  auto& out = j["outputs"];
  out = nlohmann::ordered_json::object();
  for (const auto& rel : outputs) out[rel] = digest_source((dir / rel).string());
  j["timings_s"] = timings;
  io::write_text(dir / kManifestName, j.dump(2) + "\n");
}

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<Series>& series) {
  constexpr double kW = 480, kH = 320, kL = 60, kR = 120, kT = 36, kB = 48;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = 0.0, y1 = 1.0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      if (std::isfinite(s.y[i])) {
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
      }
    }
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0;
  if (x1 == x0) x1 = x0 + 1.0;
  const auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
  const auto py = [&](double y) { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream o;
  o << std::setprecision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
    << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
    << kH - kB << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << kH - kB + 14 << "\" text-anchor=\"middle\">"
      << xv << "</text>\n";
    o << "<text x=\"" << kL - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv
      << "</text>\n";
  }
  o << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 10
    << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  o << "<text transform=\"translate(14," << (kT + kH - kB) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) o << px(s.x[i]) << "," << py(s.y[i]) << " ";
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i]))
        o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    o << "<text x=\"" << kW - kR + 8 << "\" y=\"" << kT + 14 * (k + 1) << "\" fill=\"" << color
      << "\">" << xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace dwv::cli
