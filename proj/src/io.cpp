#include "stls/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace stls::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) return false;
    std::size_t used = 0;
    try {
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      return false;
    }
    if (used != cell.size()) return false;
  }
  return !out.empty();
}

double number(const json& v, const char* what) {
  require(v.is_number(), std::string("problem file: ") + what + " must be numeric");
  return v.get<double>();
}

Eigen::Index index_field(const json& j, const char* key) {
  require(j.contains(key) && j.at(key).is_number_integer(), std::string("problem file: missing integer field ") + key);
  const auto v = j.at(key).get<long long>();
  require(v >= 1, std::string("problem file: ") + key + " must be positive");
  return static_cast<Eigen::Index>(v);
}

MatrixXd dense_field(const json& v, Eigen::Index rows, Eigen::Index cols, const std::filesystem::path& base,
                     const char* what) {
  if (v.is_string()) {
    MatrixXd M = load_csv(base / v.get<std::string>());
    if (M.rows() == 1 && M.cols() == rows * cols && cols == 1) M.transposeInPlace();
    require(M.rows() == rows && M.cols() == cols, std::string("problem file: ") + what + " CSV has wrong shape");
    return M;
  }
  require(v.is_array(), std::string("problem file: ") + what + " must be an array or a CSV path");
  MatrixXd M(rows, cols);
  if (!v.empty() && v.front().is_array()) {
    require(static_cast<Eigen::Index>(v.size()) == rows, std::string("problem file: ") + what + " has wrong row count");
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto& row = v[static_cast<std::size_t>(i)];
      require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols,
              std::string("problem file: ") + what + " has a ragged row");
      for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = number(row[static_cast<std::size_t>(k)], what);
    }
    return M;
  }
  require(static_cast<Eigen::Index>(v.size()) == rows * cols, std::string("problem file: ") + what + " has wrong size");
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = number(v[static_cast<std::size_t>(i * cols + k)], what);
  return M;
}

SparseXd sparse_field(const json& v, Eigen::Index rows, Eigen::Index cols, const char* what) {
  require(v.is_array(), std::string("problem file: ") + what + " must be a triplet list");
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& t : v) {
    require(t.is_array() && t.size() == 3 && t[0].is_number_integer() && t[1].is_number_integer(),
            std::string("problem file: ") + what + " entries must be [row, col, value]");
    const auto i = t[0].get<long long>(), k = t[1].get<long long>();
    require(i >= 0 && i < rows && k >= 0 && k < cols, std::string("problem file: ") + what + " index out of range");
    trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k), number(t[2], what));
  }
  SparseXd S(rows, cols);
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

}  // namespace

MatrixXd load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read CSV file " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (!parse_row(line, row)) {
      require(first, "CSV file " + path.string() + ": unparsable line '" + line + "'");
      first = false;
      continue;
    }
    first = false;
    require(rows.empty() || rows.front().size() == row.size(), "CSV file " + path.string() + ": ragged rows");
    rows.push_back(row);
  }
  require(!rows.empty(), "CSV file " + path.string() + " has no numeric rows");
  MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index k = 0; k < M.cols(); ++k) M(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  return M;
}

ProblemFile parse_problem(const json& j, const std::filesystem::path& base_dir) {
  require(j.is_object(), "problem file: top level must be an object");
  const Eigen::Index m = index_field(j, "m");
  const Eigen::Index n = index_field(j, "n");
  require(j.contains("A"), "problem file: missing A");
  MatrixXd A = dense_field(j.at("A"), m, n, base_dir, "A");

  std::optional<MatrixXd> Y;
  VectorXd y;
  if (j.contains("Y")) {
    const Eigen::Index L = index_field(j, "L");
    Y = dense_field(j.at("Y"), m, L, base_dir, "Y");
    y = Y->col(0);
  } else {
    require(j.contains("y"), "problem file: missing y");
    y = dense_field(j.at("y"), m, 1, base_dir, "y").col(0);
  }
  ProblemFile pf{ProblemInstance<double>(std::move(y), std::move(A)), std::move(Y), {}, {}, {}};

  if (j.contains("atoms")) {
    const auto& a = j.at("atoms");
    require(a.is_object(), "problem file: atoms must be an object");
    MatrixXd S0 = a.contains("S0") ? dense_field(a.at("S0"), m, n + 1, base_dir, "atoms.S0") : MatrixXd::Zero(m, n + 1);
    std::vector<SparseXd> mats;
    if (a.contains("matrix")) {
      require(a.at("matrix").is_array(), "problem file: atoms.matrix must be a list of triplet lists");
      for (const auto& t : a.at("matrix")) mats.push_back(sparse_field(t, m, n, "atoms.matrix"));
    }
    MatrixXd Sy;
    if (a.contains("vector") && a.at("vector").is_string() && a.at("vector").get<std::string>() == "identity") {
      Sy = MatrixXd::Identity(m, m);
    } else if (a.contains("vector")) {
      const Eigen::Index ny = index_field(a, "n_y");
      Sy = MatrixXd(sparse_field(a.at("vector"), m, ny, "atoms.vector"));
    } else {
      Sy = MatrixXd::Zero(m, 0);
    }
    pf.structure.emplace(std::move(S0), std::move(mats), std::move(Sy));
  }

  if (j.contains("W")) {
    require(pf.structure.has_value(), "problem file: W requires atoms");
    const Eigen::Index na = pf.structure->n_a(), ny = pf.structure->n_y();
    const auto& w = j.at("W");
    if (w.is_string()) {
      require(w.get<std::string>() == "identity", "problem file: W must be \"identity\" or a dense matrix");
      pf.weight = WeightMatrix<double>::identity(na, ny);
    } else if (w.is_object()) {
      require(w.contains("diagonal"), "problem file: W object must hold a diagonal");
      const VectorXd d = dense_field(w.at("diagonal"), na + ny, 1, base_dir, "W.diagonal").col(0);
      pf.weight = WeightMatrix<double>(MatrixXd(d.asDiagonal()), na);
    } else {
      pf.weight = WeightMatrix<double>(dense_field(w, na + ny, na + ny, base_dir, "W"), na);
    }
  }

  if (j.contains("groups")) {
    std::vector<std::vector<Eigen::Index>> groups;
    for (const auto& g : j.at("groups")) {
      require(g.is_array(), "problem file: groups must be a list of index lists");
      std::vector<Eigen::Index> idx;
      for (const auto& i : g) {
        require(i.is_number_integer(), "problem file: group indices must be integers");
        idx.push_back(static_cast<Eigen::Index>(i.get<long long>()));
      }
      groups.push_back(std::move(idx));
    }
    pf.groups = GroupMap(std::move(groups), n);
  }
  return pf;
}

ProblemFile load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read problem file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw StructuralError("problem file " + path.string() + ": " + e.what());
  }
  return parse_problem(j, path.parent_path());
}

json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index k = 0; k < M.cols(); ++k) a.push_back(M(i, k));
  return a;
}

json problem_to_json(const ProblemInstance<double>& prob) {
  return json{{"m", prob.m()}, {"n", prob.n()}, {"y", to_json(prob.y())}, {"A", to_json(prob.A())}};
}

json structure_to_json(const AffineStructure<double>& s) {
  json mats = json::array();
  for (const auto& S : s.matrix_atoms()) {
    json trip = json::array();
    for (int k = 0; k < S.outerSize(); ++k)
      for (SparseXd::InnerIterator it(S, k); it; ++it) trip.push_back(json::array({it.row(), it.col(), it.value()}));
    mats.push_back(std::move(trip));
  }
  json out{{"matrix", std::move(mats)}};
  if (!s.S0().isZero(0.0)) out["S0"] = to_json(s.S0());
  const auto& Sy = s.vector_atoms();
  if (Sy.rows() == Sy.cols() && Sy.isIdentity(0.0)) {
    out["vector"] = "identity";
  } else {
    json trip = json::array();
    for (Eigen::Index i = 0; i < Sy.rows(); ++i)
      for (Eigen::Index k = 0; k < Sy.cols(); ++k)
        if (Sy(i, k) != 0.0) trip.push_back(json::array({i, k, Sy(i, k)}));
    out["vector"] = std::move(trip);
    out["n_y"] = Sy.cols();
  }
  return out;
}

json weight_to_json(const WeightMatrix<double>& W) {
  if (W.W().isIdentity(0.0)) return "identity";
  if (W.is_diagonal()) return json{{"diagonal", to_json(VectorXd(W.W().diagonal()))}};
  return to_json(W.W());
}

json groups_to_json(const GroupMap& g) {
  json out = json::array();
  for (const auto& grp : g.groups()) out.push_back(grp);
  return out;
}

json to_json(const Metrics& m) {
  return json{{"l2_err", m.l2_err}, {"l1_err", m.l1_err}, {"l0_err_percent", m.l0_err_percent},
              {"pd", m.pd},         {"pfa", m.pfa}};
}

json to_json(const SolveReport<double>& rep) {
  json traj = json::array();
  for (double c : rep.cost_trajectory) traj.push_back(c);
  json out{{"x_hat", to_json(rep.x_hat)},
           {"cost_trajectory", std::move(traj)},
           {"outer_iterations", rep.outer_iterations},
           {"converged", rep.converged},
           {"final_cost", rep.final_cost}};
  if (const auto* E = std::get_if<MatrixPerturbation<double>>(&rep.perturbation)) {
    out["e_hat"] = json{{"rows", E->E.rows()}, {"cols", E->E.cols()}, {"values", to_json(E->E)}};
  } else {
    const auto& p = std::get<StructuredPerturbation<double>>(rep.perturbation);
    out["eps_a"] = to_json(p.eps_a);
    out["eps_y"] = to_json(p.eps_y);
  }
  return out;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(csv_number(v));
  add_row(std::move(cells));
}

void CsvTable::add_row(std::vector<std::string> cells) {
  require(cells.size() == header_.size(), "csv: row width does not match header");
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out.str();
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write " + path.string());
  out << str();
  require(out.good(), "write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write " + path.string());
  out << j.dump(2) << '\n';
  require(out.good(), "write failed for " + path.string());
}

void write_vector_csv(const std::filesystem::path& path, const VectorXd& v, const std::string& column) {
  CsvTable t({column});
  for (Eigen::Index i = 0; i < v.size(); ++i) t.add_row(std::vector<double>{v(i)});
  t.write(path);
}

VectorXd load_vector_csv(const std::filesystem::path& path) {
  const MatrixXd M = load_csv(path);
  if (M.cols() == 1) return M.col(0);
  require(M.rows() == 1, "vector CSV must have a single row or a single column: " + path.string());
  return M.row(0).transpose();
}

}  // namespace stls::io
