#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "zeno/config.hpp"

namespace zeno {

std::string version();

/// A NaN or infinity reached an output column.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The output directory cannot be created or written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric table written as one CSV (or JSON) file named after `name`.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row);  // throws std::invalid_argument on a width mismatch
};

/// Throws NonFiniteError naming the table, row and column of the first bad value.
void ensure_finite(const Table& table);

/// Fixed-width-free "%.*g" text; identical input gives identical bytes.
std::string format_number(double value, int precision);

/// Creates the directory if needed and checks that a file can be written in it.
void prepare_output_dir(const std::filesystem::path& dir);

/// Lines of the resolved configuration, "[section] key = value".
std::vector<std::string> provenance_lines(const RunConfig& config, const std::string& command);

/// Writes `<dir>/<name>.csv` with a '#' header, or `<dir>/<name>.json`.
/// Checks finiteness before touching the file. Returns the path written.
std::filesystem::path write_table(const Table& table, const RunConfig& config, const std::string& command);

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
};

struct Summary {
  std::string command;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  std::vector<std::string> files;

  bool all_pass() const;
};

nlohmann::ordered_json summary_json(const Summary& summary, const RunConfig& config);

/// Writes `<dir>/<command>_summary.json`; throws NonFiniteError on non-finite metrics.
std::filesystem::path write_summary(const Summary& summary, const RunConfig& config);

}  // namespace zeno
