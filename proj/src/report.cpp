#include "zeno/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#ifndef ZENO_VERSION
#define ZENO_VERSION "0.0.0"
#endif

namespace zeno {

std::string version() { return ZENO_VERSION; }

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) {
    throw std::invalid_argument("table " + name + ": row width " + std::to_string(row.size()) +
                                " != " + std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

void ensure_finite(const Table& table) {
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < table.rows[r].size(); ++c) {
      if (!std::isfinite(table.rows[r][c])) {
        throw NonFiniteError("non-finite value in " + table.name + " row " + std::to_string(r) +
                             " column " + table.columns[c]);
      }
    }
  }
}

std::string format_number(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, value);
  return buf;
}

void prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory '" + dir.string() + "': " + ec.message());
  if (!std::filesystem::is_directory(dir)) {
    throw OutputError("output path '" + dir.string() + "' is not a directory");
  }
  const std::filesystem::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw OutputError("output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

std::vector<std::string> provenance_lines(const RunConfig& config, const std::string& command) {
  std::vector<std::string> lines{"zeno " + version(), "command = " + command};
  for (const ConfigEntry& e : config_entries(config)) {
    lines.push_back("[" + e.section + "] " + e.key + " = " + e.value);
  }
  return lines;
}

namespace {

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw OutputError("failed writing '" + path.string() + "'");
}

// Non-finite numbers become null so that the error names them before writing.
nlohmann::ordered_json number(double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nullptr; }

bool json_finite(const nlohmann::ordered_json& j) {
  if (j.is_null()) return false;
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const auto& v : j) {
      if (!json_finite(v)) return false;
    }
  }
  return true;
}

}  // namespace

std::filesystem::path write_table(const Table& table, const RunConfig& config, const std::string& command) {
  ensure_finite(table);
  const std::filesystem::path dir(config.output.directory);
  const int precision = config.output.precision;
  if (config.output.format == OutputFormat::json) {
    nlohmann::ordered_json j;
    j["name"] = table.name;
    j["provenance"] = provenance_lines(config, command);
    j["columns"] = table.columns;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
      // Rounded through the text form so both formats carry the same digits.
      nlohmann::ordered_json r = nlohmann::ordered_json::array();
      for (double v : row) r.push_back(std::stod(format_number(v, precision)));
      j["rows"].push_back(std::move(r));
    }
    const std::filesystem::path path = dir / (table.name + ".json");
    std::ofstream out(path);
    out << j.dump(1) << '\n';
    finish(out, path);
    return path;
  }
  const std::filesystem::path path = dir / (table.name + ".csv");
  std::ofstream out(path);
  for (const std::string& line : provenance_lines(config, command)) out << "# " << line << '\n';
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_number(row[c], precision);
    out << '\n';
  }
  finish(out, path);
  return path;
}

bool Summary::all_pass() const {
  for (const Check& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

nlohmann::ordered_json summary_json(const Summary& summary, const RunConfig& config) {
  nlohmann::ordered_json j;
  j["command"] = summary.command;
  j["version"] = version();
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const ConfigEntry& e : config_entries(config)) cfg[e.section][e.key] = e.value;
  j["config"] = cfg;
  j["metrics"] = summary.metrics;
  j["checks"] = nlohmann::ordered_json::array();
  for (const Check& c : summary.checks) {
    j["checks"].push_back(
        {{"name", c.name}, {"pass", c.pass}, {"value", number(c.value)}, {"tolerance", number(c.tolerance)}});
  }
  j["warnings"] = summary.warnings;
  j["files"] = summary.files;
  return j;
}

std::filesystem::path write_summary(const Summary& summary, const RunConfig& config) {
  const nlohmann::ordered_json j = summary_json(summary, config);
  if (!json_finite(j["metrics"]) || !json_finite(j["checks"])) {
    throw NonFiniteError("non-finite value in the " + summary.command + " summary");
  }
  const std::filesystem::path path =
      std::filesystem::path(config.output.directory) / (summary.command + "_summary.json");
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
  return path;
}

}  // namespace zeno
