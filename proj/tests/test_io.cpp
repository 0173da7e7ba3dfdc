#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "latbma/errors.hpp"
#include "latbma/io.hpp"
#include "support.hpp"

using namespace latbma;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("latbma_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Summary small_summary() {
  EnumerationTable t;
  t.p = 2;
  for (std::uint64_t bits = 0; bits < 4; ++bits) {
    EvidenceRecord r;
    r.model = ModelIndex(2, bits);
    r.log_evidence = -10.0 + static_cast<double>(bits);
    r.mu_beta = Eigen::VectorXd::Constant(r.model.size(), 0.3);
    t.records.push_back(r);
  }
  normalize_probabilities(t);
  return summarize(t);
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("doubles round trip") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv round trip") {
  const fs::path dir = scratch("csv");
  CsvTable t{{"a", "b"}, {{"1", "x"}, {"2.5", "y"}}};
  write_csv(dir / "t.csv", t);
  const CsvTable back = read_csv(dir / "t.csv");
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b") == 1);
  CHECK(back.column("zz") == -1);
  CHECK_THROWS_AS(read_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("numeric csv loading") {
  const fs::path dir = scratch("load");
  Eigen::MatrixXd X(3, 2);
  X << 1, 2, 3, 4, 5, 6.5;
  Eigen::VectorXd y(3);
  y << 0, 1, 0;
  write_dataset_csv(dir / "d.csv", X, y, {"u", "v"}, "out");
  const LoadedData l = load_numeric_csv(dir / "d.csv", "out");
  CHECK(l.X == X);
  CHECK(l.y == y);
  CHECK(l.names == std::vector<std::string>{"u", "v"});
  CHECK_THROWS_AS(load_numeric_csv(dir / "d.csv", "nope"), DataError);
  std::ofstream(dir / "bad.csv") << "y,x\n1,2\n0,abc\n";
  CHECK_THROWS_AS(load_numeric_csv(dir / "bad.csv", "y"), DataError);
}

TEST_CASE("evidence csv round trip") {
  const fs::path dir = scratch("evidence");
  const Dataset d = testing_support::sim_data(Family::kTobit, 200, 3, 1);
  const CrossProducts cp = cross_products(d);
  Evaluator ev(d, cp, FitConfig{}, EvaluatorOptions{});
  const EnumerationTable t = enumerate_models(ev);
  write_evidence_csv(dir / "e.csv", t.records, d.names);
  const auto back = read_evidence_csv(dir / "e.csv");
  REQUIRE(back.size() == t.records.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].model == t.records[k].model);
    CHECK(back[k].log_evidence == t.records[k].log_evidence);
    CHECK(back[k].log_prior == t.records[k].log_prior);
    CHECK(back[k].sigma2_hat == t.records[k].sigma2_hat);
    CHECK(back[k].mu_beta == t.records[k].mu_beta);
  }
}

TEST_CASE("trace csv round trip") {
  const fs::path dir = scratch("trace");
  const Dataset d = testing_support::sim_data(Family::kProbit, 200, 3, 2);
  const CrossProducts cp = cross_products(d);
  ChainConfig cc;
  cc.n_keep = 50;
  cc.burn_in = 5;
  const ExplorationTrace tr = explore(d, cp, FitConfig{}, EvaluatorOptions{}, cc);
  write_trace_csv(dir / "t.csv", tr);
  const auto back = read_trace_csv(dir / "t.csv");
  REQUIRE(back.size() == tr.visited.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].model == tr.visited[k].model);
    CHECK(back[k].kept == tr.visited[k].kept);
    CHECK(back[k].log_evidence == tr.visited[k].log_evidence);
  }
}

TEST_CASE("report tables") {
  const Summary s = small_summary();
  const fs::path dir = scratch("report");
  emit_report(s, {"a", "b"}, dir / "k0", ReportFormat::kCsv, 0);
  CHECK(line_count(dir / "k0" / "top_models.csv") == 1);
  emit_report(s, {"a", "b"}, dir / "k9", ReportFormat::kCsv, 9);
  CHECK(line_count(dir / "k9" / "top_models.csv") == 5);
  const Eigen::VectorXd pip = read_pip_csv(dir / "k9" / "pip.csv");
  CHECK((pip - s.pip).cwiseAbs().maxCoeff() == 0.0);
  emit_report(s, {"a", "b"}, dir / "txt", ReportFormat::kText, 2);
  CHECK(fs::exists(dir / "txt" / "pip.txt"));
  CHECK(line_count(dir / "txt" / "top_models.txt") == 3);
  CHECK_THROWS_AS(emit_report(s, {"a"}, dir, ReportFormat::kCsv, 1), ParameterError);
  std::ofstream(dir / "blocker") << "x";
  CHECK_THROWS_AS(emit_report(s, {"a", "b"}, dir / "blocker" / "sub", ReportFormat::kCsv, 1), IoError);
  CHECK_THROWS_AS(parse_report_format("xml"), ParameterError);
}

TEST_CASE("fingerprint") {
  Eigen::MatrixXd X(2, 2);
  X << 1, 2, 3, 4;
  Eigen::VectorXd y(2);
  y << 0, 1;
  const auto h = dataset_fingerprint(X, y);
  CHECK(h == dataset_fingerprint(X, y));
  X(1, 1) = 4.0000001;
  CHECK(h != dataset_fingerprint(X, y));
}

}  // TEST_SUITE
