#include "latbma/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "latbma/errors.hpp"

namespace latbma {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    else if (c == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else cell += c;
  }
  out.push_back(trim(cell));
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (!s.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    if (s == "inf" || s == "Inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-Inf") return -std::numeric_limits<double>::infinity();
    throw DataError("non-numeric value '" + s + "' in " + where);
  }
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void check_written(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      t.header = split_line(line);
      first = false;
      continue;
    }
    if (trim(line).empty()) continue;
    auto row = split_line(line);
    if (row.size() != t.header.size())
      throw DataError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                      std::to_string(row.size()) + " fields, header has " +
                      std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  if (first) throw DataError(path.string() + " is empty");
  return t;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  auto out = open_out(path);
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  check_written(out, path);
}

LoadedData load_numeric_csv(const fs::path& path, const std::string& outcome) {
  const CsvTable t = read_csv(path);
  const int yc = t.column(outcome);
  if (yc < 0) throw DataError("outcome column '" + outcome + "' not found in " + path.string());
  LoadedData d;
  const int n = static_cast<int>(t.rows.size());
  const int p = static_cast<int>(t.header.size()) - 1;
  d.X.resize(n, p);
  d.y.resize(n);
  for (int j = 0, k = 0; j < static_cast<int>(t.header.size()); ++j)
    if (j != yc) d.names.push_back(t.header[j]), ++k;
  for (int i = 0; i < n; ++i) {
    int k = 0;
    for (int j = 0; j < static_cast<int>(t.header.size()); ++j) {
      const std::string where = path.string() + " row " + std::to_string(i + 1);
      if (t.rows[i][j].empty()) throw DataError("missing value in " + where);
      const double v = parse_double(t.rows[i][j], where);
      if (j == yc) d.y[i] = v;
      else d.X(i, k++) = v;
    }
  }
  return d;
}

void write_dataset_csv(const fs::path& path, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<std::string>& names, const std::string& outcome) {
  auto out = open_out(path);
  out << outcome;
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out << format_double(y[i]);
    for (Eigen::Index j = 0; j < X.cols(); ++j) out << ',' << format_double(X(i, j));
    out << '\n';
  }
  check_written(out, path);
}

void write_evidence_csv(const fs::path& path, const std::vector<EvidenceRecord>& records,
                        const std::vector<std::string>& names) {
  auto out = open_out(path);
  out << "mask,p_k,log_evidence,log_prior,method,criterion,iters,wall_time_ns,converged,mu_alpha,sigma2_hat";
  for (const auto& n : names) out << ",beta_" << n;
  out << '\n';
  for (const auto& r : records) {
    out << r.model.to_string() << ',' << r.model.size() << ',' << format_double(r.log_evidence) << ','
        << format_double(r.log_prior) << ',' << to_string(r.method) << ',' << to_string(r.criterion)
        << ',' << r.iters << ',' << r.wall_time_ns << ',' << (r.converged ? 1 : 0) << ','
        << format_double(r.mu_alpha) << ',' << format_double(r.sigma2_hat);
    const auto idx = r.model.included();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) beta[idx[k]] = r.mu_beta[static_cast<Eigen::Index>(k)];
    for (Eigen::Index j = 0; j < beta.size(); ++j) out << ',' << format_double(beta[j]);
    out << '\n';
  }
  check_written(out, path);
}

std::vector<EvidenceRecord> read_evidence_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const char* required[] = {"mask", "log_evidence", "log_prior", "method", "criterion", "iters",
                            "wall_time_ns", "converged", "mu_alpha", "sigma2_hat"};
  for (const char* c : required)
    if (t.column(c) < 0) throw DataError(path.string() + " lacks column " + c);
  std::vector<int> beta_cols;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (t.header[j].rfind("beta_", 0) == 0) beta_cols.push_back(static_cast<int>(j));
  std::vector<EvidenceRecord> out;
  for (const auto& row : t.rows) {
    EvidenceRecord r;
    const std::string where = path.string();
    r.model = ModelIndex::from_string(row[t.column("mask")]);
    r.log_evidence = parse_double(row[t.column("log_evidence")], where);
    r.log_prior = parse_double(row[t.column("log_prior")], where);
    r.method = parse_method(row[t.column("method")]);
    r.criterion = parse_criterion(row[t.column("criterion")]);
    r.iters = static_cast<int>(parse_double(row[t.column("iters")], where));
    r.wall_time_ns = static_cast<std::int64_t>(parse_double(row[t.column("wall_time_ns")], where));
    r.converged = row[t.column("converged")] == "1";
    r.mu_alpha = parse_double(row[t.column("mu_alpha")], where);
    r.sigma2_hat = parse_double(row[t.column("sigma2_hat")], where);
    if (static_cast<int>(beta_cols.size()) != r.model.p_total())
      throw DataError(where + ": beta columns do not match mask length");
    const auto idx = r.model.included();
    r.mu_beta.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
      r.mu_beta[static_cast<Eigen::Index>(k)] = parse_double(row[beta_cols[idx[k]]], where);
    out.push_back(std::move(r));
  }
  return out;
}

void write_trace_csv(const fs::path& path, const ExplorationTrace& trace) {
  auto out = open_out(path);
  out << "chain,iteration,mask,p_k,log_evidence,accepted,kept\n";
  for (const auto& v : trace.visited)
    out << v.chain << ',' << v.iteration << ',' << v.model.to_string() << ',' << v.model.size() << ','
        << format_double(v.log_evidence) << ',' << (v.accepted ? 1 : 0) << ',' << (v.kept ? 1 : 0)
        << '\n';
  check_written(out, path);
}

std::vector<Visit> read_trace_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  for (const char* c : {"chain", "iteration", "mask", "log_evidence", "accepted", "kept"})
    if (t.column(c) < 0) throw DataError(path.string() + " lacks column " + c);
  std::vector<Visit> out;
  for (const auto& row : t.rows) {
    Visit v;
    v.chain = std::stoi(row[t.column("chain")]);
    v.iteration = std::stol(row[t.column("iteration")]);
    v.model = ModelIndex::from_string(row[t.column("mask")]);
    v.log_evidence = parse_double(row[t.column("log_evidence")], path.string());
    v.accepted = row[t.column("accepted")] == "1";
    v.kept = row[t.column("kept")] == "1";
    out.push_back(v);
  }
  return out;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "text") return ReportFormat::kText;
  throw ParameterError("unknown report format '" + name + "' (csv or text)");
}

namespace {

void write_table(const fs::path& base, ReportFormat format, const CsvTable& t) {
  if (format == ReportFormat::kCsv) {
    write_csv(fs::path(base).replace_extension(".csv"), t);
    return;
  }
  std::vector<std::size_t> width(t.header.size());
  for (std::size_t j = 0; j < t.header.size(); ++j) width[j] = t.header[j].size();
  for (const auto& r : t.rows)
    for (std::size_t j = 0; j < r.size(); ++j) width[j] = std::max(width[j], r[j].size());
  const fs::path path = fs::path(base).replace_extension(".txt");
  auto out = open_out(path);
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < row.size(); ++j)
      out << (j ? "  " : "") << std::setw(static_cast<int>(width[j])) << row[j];
    out << '\n';
  };
  emit(t.header);
  for (const auto& r : t.rows) emit(r);
  check_written(out, path);
}

}  // namespace

void emit_report(const Summary& s, const std::vector<std::string>& names, const fs::path& dir,
                 ReportFormat format, std::size_t top_k) {
  if (static_cast<int>(names.size()) != s.p) throw ParameterError("report: name count does not match p");
  std::error_code ec;
  fs::create_directories(dir, ec);

  CsvTable pip{{"covariate", "index", "pip", "in_median_model"}, {}};
  CsvTable beta{{"covariate", "index", "beta_avg"}, {}};
  for (int j = 0; j < s.p; ++j) {
    pip.rows.push_back({names[j], std::to_string(j), format_double(s.pip[j]),
                        s.median_model.contains(j) ? "1" : "0"});
    beta.rows.push_back({names[j], std::to_string(j), format_double(s.beta_avg[j])});
  }
  write_table(dir / "pip", format, pip);
  write_table(dir / "beta", format, beta);

  CsvTable top{{"rank", "mask", "p_k", "log_evidence", "log_prior", "weight"}, {}};
  for (std::size_t k = 0; k < std::min(top_k, s.models.size()); ++k) {
    const auto& m = s.models[k];
    top.rows.push_back({std::to_string(k + 1), m.record.model.to_string(),
                        std::to_string(m.record.model.size()), format_double(m.record.log_evidence),
                        format_double(m.record.log_prior), format_double(m.weight)});
  }
  write_table(dir / "top_models", format, top);

  CsvTable size{{"statistic", "value"}, {}};
  size.rows.push_back({"size_mean", format_double(s.size_mean)});
  size.rows.push_back({"size_sd", format_double(s.size_sd)});
  size.rows.push_back({"median_model", s.median_model.to_string()});
  size.rows.push_back({"top_model", s.top_model.to_string()});
  write_table(dir / "model_size", format, size);
}

Eigen::VectorXd read_pip_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const int c = t.column("pip");
  if (c < 0) throw DataError(path.string() + " lacks a pip column");
  Eigen::VectorXd pip(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    pip[static_cast<Eigen::Index>(i)] = parse_double(t.rows[i][c], path.string());
  return pip;
}

std::uint64_t dataset_fingerprint(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const std::int64_t dims[2] = {X.rows(), X.cols()};
  mix(dims, sizeof dims);
  mix(X.data(), sizeof(double) * static_cast<std::size_t>(X.size()));
  mix(y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));
  return h;
}

void write_fit_report(const fs::path& path, const VariationalState& s,
                      const std::vector<std::string>& names, double log_vbc_value, double elbo) {
  auto out = open_out(path);
  out << "model=" << s.model.to_string() << '\n';
  out << "n=" << s.n << '\n';
  out << "p_k=" << s.p_k() << '\n';
  out << "iterations=" << s.iterations << '\n';
  out << "converged=" << (s.converged ? 1 : 0) << '\n';
  out << "mu_alpha=" << format_double(s.mu_alpha) << '\n';
  out << "omega_alpha=" << format_double(s.omega_alpha) << '\n';
  const auto idx = s.model.included();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    out << "mu_beta." << names.at(idx[k]) << '=' << format_double(s.mu_beta[e]) << '\n';
    out << "var_beta." << names.at(idx[k]) << '=' << format_double(s.Omega_beta(e, e)) << '\n';
  }
  out << "a=" << format_double(s.a) << '\n';
  out << "b=" << format_double(s.b) << '\n';
  out << "sigma2_fixed=" << (s.sigma2_fixed ? 1 : 0) << '\n';
  out << "log_vbc=" << format_double(log_vbc_value) << '\n';
  out << "elbo=" << format_double(elbo) << '\n';
  out << "sum_s=" << format_double(s.latent.sum_s) << '\n';
  check_written(out, path);
}

void write_truth_manifest(const fs::path& path, const SimResult& sim) {
  const auto& d = sim.design;
  nlohmann::json j;
  j["family"] = to_string(d.family);
  j["n"] = d.n;
  j["p"] = d.p;
  j["rho"] = d.rho;
  j["preset"] = d.preset;
  j["alpha_true"] = d.alpha_true;
  j["sigma2_true"] = d.sigma2_true;
  j["y_lower"] = d.y_lower;
  j["seed"] = d.seed;
  j["replicate"] = d.replicate;
  j["resamples"] = sim.resamples;
  j["truth_mask"] = sim.truth.to_string();
  j["beta_true"] = std::vector<double>(d.beta_true.data(), d.beta_true.data() + d.beta_true.size());
  auto out = open_out(path);
  out << std::setprecision(17) << j.dump(2) << '\n';
  check_written(out, path);
}

}  // namespace latbma
