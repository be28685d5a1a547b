#include "rcshape/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rcshape {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::string_view bytes) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv64(bytes)));
  return buf;
}

void save_dataset_csv(const std::string& path, const RawDataset& raw) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  int d = raw.dim();
  bool with_beta = raw.beta.rows() == raw.rows();
  for (int k = 0; k < d; ++k) out << "x" << (k + 1) << ",";
  out << "y";
  if (with_beta)
    for (int k = 0; k < d; ++k) out << ",beta" << (k + 1);
  out << "\n";
  for (long i = 0; i < raw.rows(); ++i) {
    for (int k = 0; k < d; ++k) out << format_double(raw.X(i, k)) << ",";
    out << format_double(raw.Y(i));
    if (with_beta)
      for (int k = 0; k < d; ++k) out << "," << format_double(raw.beta(i, k));
    out << "\n";
  }
}

RawDataset load_dataset_csv(const std::string& path, bool intercept) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("dataset is empty: " + path);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int d = 0;
  while (d < static_cast<int>(header.size()) &&
         header[d] == "x" + std::to_string(d + 1))
    ++d;
  if (d < 2 || d >= static_cast<int>(header.size()) || header[d] != "y")
    throw std::runtime_error(
        "dataset header must be x1,...,xd,y (optionally beta1,...,betad): " +
        path);
  int beta_cols = static_cast<int>(header.size()) - d - 1;
  if (beta_cols != 0 && beta_cols != d)
    throw std::runtime_error("dataset header: unexpected trailing columns");

  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("dataset row " + std::to_string(line_no) +
                                 ": cannot parse '" + cell + "'");
      }
    }
    if (static_cast<int>(vals.size()) != static_cast<int>(header.size()))
      throw std::runtime_error("dataset row " + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) +
                               " columns, got " + std::to_string(vals.size()));
    rows.push_back(std::move(vals));
  }
  RawDataset raw;
  raw.model = intercept ? ModelKind::with_intercept : ModelKind::no_intercept;
  long n = static_cast<long>(rows.size());
  raw.X.resize(n, d);
  raw.Y.resize(n);
  if (beta_cols > 0) raw.beta.resize(n, d);
  for (long i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) raw.X(i, k) = rows[i][k];
    raw.Y(i) = rows[i][d];
    if (beta_cols > 0)
      for (int k = 0; k < d; ++k) raw.beta(i, k) = rows[i][d + 1 + k];
    if (intercept && raw.X(i, 0) != 1.0)
      throw std::runtime_error(
          "dataset row " + std::to_string(i + 2) +
          ": --intercept set but x1 != 1");
  }
  raw.validate();
  return raw;
}

void save_kernel_csv(const std::string& path, const KernelTable& kt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "u,psi\n";
  for (int j = 0; j < kt.n_points(); ++j) {
    double u = -kt.u_max() + j * kt.grid_step();
    out << format_double(u) << "," << format_double(kt.values()[j]) << "\n";
  }
}

void save_arrows_csv(const std::string& path,
                     const std::vector<Arrow>& arrows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t_x,t_y,v_x,v_y\n";
  for (const auto& a : arrows)
    out << format_double(a.t(0)) << "," << format_double(a.t(1)) << ","
        << format_double(a.v(0)) << "," << format_double(a.v(1)) << "\n";
}

namespace {

const char* procedure_name(ProcedureKind p) {
  switch (p) {
    case ProcedureKind::single: return "single";
    case ProcedureKind::mode_at_point: return "mode-at-point";
    case ProcedureKind::global_scan: return "global-scan";
    case ProcedureKind::monotonicity_map: return "monotonicity-map";
  }
  return "unknown";
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (long k = 0; k < v.size(); ++k) arr.push_back(v(k));
  return arr;
}

}  // namespace

nlohmann::json outcome_to_json(const TestOutcome& outcome, std::uint64_t seed,
                               const std::string& config_hash) {
  nlohmann::json j;
  j["procedure"] = procedure_name(outcome.procedure);
  j["alpha"] = outcome.alpha;
  nlohmann::json fam = nlohmann::json::array();
  for (const auto& e : outcome.entries) {
    nlohmann::json row;
    row["t"] = vec_to_json(e.tp.t);
    row["h"] = e.tp.h;
    row["v"] = vec_to_json(e.tp.v);
    row["T_hat"] = e.t_hat;
    row["sigma_hat"] = e.sigma_hat;
    row["kappa"] = e.kappa;
    row["reject_plus"] = e.reject_plus;
    row["reject_minus"] = e.reject_minus;
    fam.push_back(row);
  }
  j["family"] = fam;
  j["verdict"] = outcome.verdict;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["quantile_mode"] = outcome.quantile_mode;
  if (!outcome.candidates.empty()) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : outcome.candidates) cands.push_back(vec_to_json(c));
    j["candidates"] = cands;
  }
  if (!outcome.diagnostics.empty()) j["diagnostics"] = outcome.diagnostics;
  return j;
}

nlohmann::json ols_to_json(const OlsResult& ols) {
  nlohmann::json j;
  j["gamma"] = vec_to_json(ols.gamma);
  j["se"] = vec_to_json(ols.se);
  j["n"] = ols.n;
  return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_manifest(const std::string& results_path,
                    const std::string& config_hash, std::uint64_t seed,
                    double wall_seconds, const std::string& command) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["wall_seconds"] = wall_seconds;
  j["command"] = command;
  j["version"] = "0.1.0";
  write_json_file(results_path + ".manifest.json", j);
}

QuantileCache::QuantileCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (in) {
    try {
      in >> map_;
    } catch (const std::exception&) {
      map_ = nlohmann::json::object();
    }
  }
  if (!map_.is_object()) map_ = nlohmann::json::object();
}

std::optional<nlohmann::json> QuantileCache::lookup(
    const std::string& key) const {
  auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return *it;
}

void QuantileCache::store(const std::string& key, nlohmann::json value) {
  map_[key] = std::move(value);
  write_json_file(path_, map_);
}

std::string family_hash(const std::vector<TestPoint>& family) {
  std::ostringstream ss;
  for (const auto& tp : family) {
    for (long k = 0; k < tp.t.size(); ++k) ss << format_double(tp.t(k)) << ",";
    ss << format_double(tp.h) << ";";
    for (long k = 0; k < tp.v.size(); ++k) ss << format_double(tp.v(k)) << ",";
    ss << "|";
  }
  return hash_hex(ss.str());
}

std::string file_content_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hash_hex(ss.str());
}

}  // namespace rcshape
