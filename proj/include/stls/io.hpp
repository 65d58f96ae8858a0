#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stls/scenarios.hpp"

namespace stls::io {

using nlohmann::json;

/// Problem file contents. Structure, weight and groups are present only when
/// the file describes them; Y is set for multi-column data.
struct ProblemFile {
  ProblemInstance<double> problem;
  std::optional<MatrixXd> Y;
  std::optional<AffineStructure<double>> structure;
  std::optional<WeightMatrix<double>> weight;
  std::optional<GroupMap> groups;
};

/// One row per line, comma separated. Blank lines are skipped; a first line
/// that does not parse as numbers is treated as a header.
MatrixXd load_csv(const std::filesystem::path& path);

/// {m, n, y, A row-major, atoms {S0, matrix: [[[i,j,v],..],..], vector: [[i,k,v],..] or "identity", n_y},
/// W: "identity" or {diagonal} or dense row-major, groups}.
/// y, A and Y may also be strings naming CSV files relative to the JSON file.
ProblemFile parse_problem(const json& j, const std::filesystem::path& base_dir = {});
ProblemFile load_problem(const std::filesystem::path& path);

json problem_to_json(const ProblemInstance<double>& prob);
json structure_to_json(const AffineStructure<double>& s);
json weight_to_json(const WeightMatrix<double>& W);
json groups_to_json(const GroupMap& g);

json to_json(const VectorXd& v);
/// Row-major flattening.
json to_json(const MatrixXd& M);
json to_json(const Metrics& m);
json to_json(const SolveReport<double>& rep);

/// Format used for every CSV cell: 12 significant digits.
std::string csv_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(const std::vector<double>& values);
  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_json(const std::filesystem::path& path, const json& j);
void write_vector_csv(const std::filesystem::path& path, const VectorXd& v, const std::string& column);
VectorXd load_vector_csv(const std::filesystem::path& path);

}  // namespace stls::io
