#pragma once

// Output files, checksums, manifests and native SVG plots.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace chaoslab {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Shortest round-trip text for a double (same bits on every run).
std::string format_double(double v);

struct ArtifactFile {
  std::string name;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Writes files under one output directory and remembers their checksums.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path directory);

  const std::filesystem::path& directory() const { return dir_; }
  const std::vector<ArtifactFile>& files() const { return files_; }

  void write(const std::string& name, std::string_view content);
  void write_json(const std::string& name, const nlohmann::json& doc);

 private:
  std::filesystem::path dir_;
  std::vector<ArtifactFile> files_;
};

/// Simple CSV builder; numbers are written with format_double.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);
  CsvTable& row();
  CsvTable& add(double v);
  CsvTable& add(long long v);
  CsvTable& add(std::size_t v) { return add(static_cast<long long>(v)); }
  CsvTable& add(int v) { return add(static_cast<long long>(v)); }
  CsvTable& add(const std::string& v);
  std::string str() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct RunManifest {
  std::string study;
  std::string config_hash;
  std::string version;
  std::string started;
  std::string finished;
  unsigned workers = 1;
  std::string status;         // "pass", "fail" or "error"
  std::string failure_point;  // first failed check or error message
  std::vector<ArtifactFile> files;

  nlohmann::json to_json() const;
};

/// UTC time in ISO 8601.
std::string utc_timestamp();

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = true;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

/// Standalone SVG line/scatter plot.
std::string render_svg(const PlotSpec& spec);

}  // namespace chaoslab
