#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latbma/explorer.hpp"
#include "latbma/sim.hpp"

namespace latbma {

// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Splits a numeric CSV into outcome and covariates. Every column except the
// outcome becomes a candidate covariate.
struct LoadedData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
};
LoadedData load_numeric_csv(const std::filesystem::path& path, const std::string& outcome);

void write_dataset_csv(const std::filesystem::path& path, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, const std::vector<std::string>& names,
                       const std::string& outcome = "y");

// mask, p_k, log_evidence, log_prior, method, criterion, iters, wall_time_ns,
// converged, mu_alpha, sigma2_hat, beta_<name> per covariate (0 when excluded).
void write_evidence_csv(const std::filesystem::path& path, const std::vector<EvidenceRecord>& records,
                        const std::vector<std::string>& names);
std::vector<EvidenceRecord> read_evidence_csv(const std::filesystem::path& path);

// chain, iteration, mask, p_k, log_evidence, accepted, kept
void write_trace_csv(const std::filesystem::path& path, const ExplorationTrace& trace);
std::vector<Visit> read_trace_csv(const std::filesystem::path& path);

enum class ReportFormat { kCsv, kText };
ReportFormat parse_report_format(const std::string& name);

// Writes pip, beta, top_models and model_size tables into dir, as .csv or
// aligned .txt tables. top_k = 0 gives header-only model tables.
void emit_report(const Summary& summary, const std::vector<std::string>& names,
                 const std::filesystem::path& dir, ReportFormat format, std::size_t top_k);

// Reads back pip.csv written by emit_report.
Eigen::VectorXd read_pip_csv(const std::filesystem::path& path);

// FNV-1a over dimensions and raw values.
std::uint64_t dataset_fingerprint(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

void write_fit_report(const std::filesystem::path& path, const VariationalState& state,
                      const std::vector<std::string>& names, double log_vbc_value, double elbo);

void write_truth_manifest(const std::filesystem::path& path, const SimResult& sim);

}  // namespace latbma
