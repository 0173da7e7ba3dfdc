#include "latbma/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "latbma/errors.hpp"
#include "latbma/explorer.hpp"
#include "latbma/io.hpp"
#include "latbma/parallel.hpp"
#include "latbma/sim.hpp"

namespace latbma {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

class PhaseClock {
 public:
  PhaseClock() : start_(Clock::now()), mark_(start_) {}

  // Attributes the time since the previous mark to `name`.
  void mark(const std::string& name) {
    const auto now = Clock::now();
    phases_.emplace_back(name, ns(mark_, now));
    mark_ = now;
  }
  // Splits an already-measured sub-interval out of the next phase.
  void carve(const std::string& name, std::int64_t dt) {
    phases_.emplace_back(name, dt);
    carved_ += dt;
  }
  void mark_rest(const std::string& name) {
    const auto now = Clock::now();
    phases_.emplace_back(name, ns(mark_, now) - carved_);
    carved_ = 0;
    mark_ = now;
  }
  std::int64_t total() const { return ns(start_, Clock::now()); }
  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : phases_) j[k] = v;
    return j;
  }

 private:
  static std::int64_t ns(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
  }
  Clock::time_point start_, mark_;
  std::vector<std::pair<std::string, std::int64_t>> phases_;
  std::int64_t carved_ = 0;
};

struct DataArgs {
  std::string data;
  std::string outcome;
  std::string family;
  double y_lower = 0.0;
};

struct FitArgs {
  double g = 0.0;
  double tol = 1e-6;
  int max_iter = 10000;
  int pln_newton = 50;
};

struct SearchArgs {
  std::string method = "vb";
  std::string criterion = "vbc";
  double prior_mean_size = 0.0;  // 0 means p/2
  std::string format = "csv";
  std::size_t top_k = 10;
};

struct Common {
  int threads = default_threads();
  std::string out_dir = ".";
  std::string config;
};

// Appends "--key value" for every config-file entry whose flag is not already
// on the command line.
std::vector<std::string> with_config_file(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t k = 1; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    else if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  auto given = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> extra;
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const std::string flag = "--" + item.name;
    if (flag == "--config" || given(flag)) continue;
    extra.push_back(flag);
    for (const auto& v : item.inputs) extra.push_back(v);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

void add_data_args(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.data, "input CSV (header row, numeric columns)")->required();
  cmd->add_option("--outcome", a.outcome, "name of the outcome column")->required();
  cmd->add_option("--family", a.family, "probit, tobit, star or pln")
      ->required()
      ->check(CLI::IsMember({"probit", "tobit", "star", "pln"}));
  cmd->add_option("--y-lower", a.y_lower, "tobit censoring bound")->capture_default_str();
}

void add_fit_args(CLI::App* cmd, FitArgs& a) {
  cmd->add_option("--g", a.g, "g-prior scale (default n)");
  cmd->add_option("--tol", a.tol, "relative convergence tolerance")->capture_default_str();
  cmd->add_option("--max-iter", a.max_iter, "CAVI sweep cap")->capture_default_str();
  cmd->add_option("--pln-newton", a.pln_newton, "Newton iteration cap per PLN site")->capture_default_str();
}

void add_search_args(CLI::App* cmd, SearchArgs& a) {
  cmd->add_option("--method", a.method, "vb or avb")->check(CLI::IsMember({"vb", "avb"}))->capture_default_str();
  cmd->add_option("--criterion", a.criterion, "vbc or elbo")
      ->check(CLI::IsMember({"vbc", "elbo"}))
      ->capture_default_str();
  cmd->add_option("--prior-mean-size", a.prior_mean_size, "prior expected model size (default p/2)");
  cmd->add_option("--format", a.format, "report format: csv or text")
      ->check(CLI::IsMember({"csv", "text"}))
      ->capture_default_str();
  cmd->add_option("--top-k", a.top_k, "models listed in the top-models table")->capture_default_str();
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "worker threads (default: logical cores)");
  cmd->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--config", c.config, "key=value file supplementing the flags (flags win)");
}

struct Loaded {
  LoadedData raw;
  Dataset data;
  CrossProducts cp;
};

Loaded load(const DataArgs& a) {
  Loaded l;
  l.raw = load_numeric_csv(a.data, a.outcome);
  PrepareOptions opt;
  opt.y_lower = a.y_lower;
  opt.names = l.raw.names;
  l.data = prepare_dataset(l.raw.X, l.raw.y, parse_family(a.family), opt);
  l.cp = cross_products(l.data);
  return l;
}

FitConfig make_fit_config(const FitArgs& a, int threads) {
  FitConfig c;
  c.g = a.g;
  c.tol = a.tol;
  c.max_iter = a.max_iter;
  c.latent.pln.max_iter = a.pln_newton;
  c.latent.threads = std::max(1, threads);
  c.validate();
  return c;
}

EvaluatorOptions make_options(const SearchArgs& a, int p) {
  EvaluatorOptions o;
  o.method = parse_method(a.method);
  o.criterion = parse_criterion(a.criterion);
  const double p0 = a.prior_mean_size > 0.0 ? a.prior_mean_size : 0.5 * p;
  o.prior = ModelPriorSpec::from_expected_size(p, p0);
  return o;
}

json dataset_json(const Loaded& l) {
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << dataset_fingerprint(l.raw.X, l.raw.y);
  return {{"rows", l.data.n()}, {"cols", l.data.p()}, {"hash", hash.str()}};
}

void write_manifest(const fs::path& dir, const std::string& command, const CLI::App& app,
                    const std::string& started, const PhaseClock& clock, json extra) {
  json m;
  m["command"] = command;
  m["config"] = app.config_to_str(true, false);
  m["started"] = started;
  m["finished"] = utc_now();
  m["total_ns"] = clock.total();
  m["phases_ns"] = clock.to_json();
  m["version"] = kVersion;
  for (auto& [k, v] : extra.items()) m[k] = v;
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << '\n';
}

int cmd_fit(const CLI::App& app, const DataArgs& da, const FitArgs& fa, const Common& c,
            const std::string& mask, const std::string& method) {
  const std::string started = utc_now();
  PhaseClock clock;
  Loaded l = load(da);
  clock.mark("load");
  const FitConfig cfg = make_fit_config(fa, c.threads);
  const ModelIndex model = mask.empty() ? ModelIndex::full_model(l.data.p()) : ModelIndex::from_string(mask);
  if (model.p_total() != l.data.p()) throw ParameterError("--model length must equal the covariate count");
  EvaluatorOptions opt;
  opt.method = parse_method(method);
  opt.prior = ModelPriorSpec::from_expected_size(l.data.p(), 0.5 * l.data.p());
  std::shared_ptr<const NullCache> cache;
  if (opt.method == Method::kAvb) cache = std::make_shared<const NullCache>(build_null_cache(l.data, l.cp, cfg));
  clock.mark("null_cache");
  Evaluator ev(l.data, l.cp, cfg, opt, cache);
  const CaviResult r = ev.fit(model);
  clock.mark("model_fits");
  const double g = cfg.g_for(l.data.n());
  const double vbc = log_vbc(r.state, g);
  const double elbo = master_elbo(r.state, g);
  clock.mark("summarize");
  write_fit_report(fs::path(c.out_dir) / "fit.txt", r.state, l.data.names, vbc, elbo);
  clock.mark("write");
  write_manifest(c.out_dir, "fit", app, started, clock, {{"dataset", dataset_json(l)}});
  return r.converged ? kExitOk : kExitNumerical;
}

int cmd_enumerate(const CLI::App& app, const DataArgs& da, const FitArgs& fa, const SearchArgs& sa,
                  const Common& c, int max_p) {
  const std::string started = utc_now();
  PhaseClock clock;
  Loaded l = load(da);
  clock.mark("load");
  const FitConfig cfg = make_fit_config(fa, c.threads);
  const EvaluatorOptions opt = make_options(sa, l.data.p());
  if (l.data.p() > max_p)
    throw ParameterError("p=" + std::to_string(l.data.p()) + " exceeds --max-p; use explore");
  std::shared_ptr<const NullCache> cache;
  if (opt.method == Method::kAvb) cache = std::make_shared<const NullCache>(build_null_cache(l.data, l.cp, cfg));
  clock.mark("null_cache");
  Evaluator ev(l.data, l.cp, cfg, opt, cache);
  EnumerationTable table = enumerate_models(ev, max_p);
  clock.mark("model_fits");
  const Summary s = summarize(table);
  clock.mark("summarize");
  const fs::path dir = c.out_dir;
  write_evidence_csv(dir / "evidence.csv", table.records, l.data.names);
  emit_report(s, l.data.names, dir, parse_report_format(sa.format), sa.top_k);
  clock.mark("write");
  write_manifest(dir, "enumerate", app, started, clock,
                 {{"dataset", dataset_json(l)}, {"models", table.records.size()}, {"fits", ev.fits()}});
  return kExitOk;
}

int cmd_explore(const CLI::App& app, const DataArgs& da, const FitArgs& fa, const SearchArgs& sa,
                const Common& c, ChainConfig chain) {
  const std::string started = utc_now();
  PhaseClock clock;
  Loaded l = load(da);
  clock.mark("load");
  FitConfig cfg = make_fit_config(fa, c.threads);
  const EvaluatorOptions opt = make_options(sa, l.data.p());
  std::shared_ptr<const NullCache> cache;
  if (opt.method == Method::kAvb) cache = std::make_shared<const NullCache>(build_null_cache(l.data, l.cp, cfg));
  clock.mark("null_cache");
  chain.threads = c.threads;
  const ExplorationTrace trace = explore(l.data, l.cp, cfg, opt, chain, cache);
  clock.mark("model_search");
  const Summary s = summarize(trace);
  clock.mark("summarize");
  const fs::path dir = c.out_dir;
  write_trace_csv(dir / "trace.csv", trace);
  std::vector<EvidenceRecord> recs;
  for (const auto& m : s.models) recs.push_back(m.record);
  write_evidence_csv(dir / "evidence.csv", recs, l.data.names);
  emit_report(s, l.data.names, dir, parse_report_format(sa.format), sa.top_k);
  clock.mark("write");
  write_manifest(dir, "explore", app, started, clock,
                 {{"dataset", dataset_json(l)},
                  {"seed", chain.seed},
                  {"chains", chain.chains},
                  {"keep", chain.n_keep},
                  {"burnin", chain.burn_in},
                  {"proposals", trace.proposals},
                  {"accepted", trace.accepted},
                  {"fits", trace.fits},
                  {"fit_time_ns", trace.fit_time_ns}});
  return kExitOk;
}

struct SimArgs {
  std::string family = "probit";
  int n = 1000;
  int p = 10;
  double rho = 0.25;
  std::string preset = "sparse";
  std::uint64_t seed = 1;
  std::uint64_t replicate = 0;
  double sigma2 = 0.0;  // 0 = family default
  double alpha = 0.0;
  double y_lower = 0.0;
};

int cmd_simulate(const CLI::App& app, const SimArgs& a, const Common& c) {
  const std::string started = utc_now();
  PhaseClock clock;
  SimDesign d = make_design(parse_family(a.family), a.n, a.p, a.preset, a.seed, a.replicate);
  d.rho = a.rho;
  d.alpha_true = a.alpha;
  d.y_lower = a.y_lower;
  if (a.sigma2 > 0.0) d.sigma2_true = a.sigma2;
  const SimResult sim = simulate(d);
  clock.mark("simulate");
  const fs::path dir = c.out_dir;
  write_dataset_csv(dir / "data.csv", sim.raw_X, sim.y, sim.data.names, "y");
  write_truth_manifest(dir / "truth.json", sim);
  clock.mark("write");
  write_manifest(dir, "simulate", app, started, clock,
                 {{"seed", a.seed}, {"replicate", a.replicate}, {"truth_mask", sim.truth.to_string()}});
  return kExitOk;
}

int cmd_report(const CLI::App& app, const std::string& in_dir, const SearchArgs& sa, const Common& c) {
  const std::string started = utc_now();
  PhaseClock clock;
  const fs::path in = in_dir;
  std::vector<EvidenceRecord> recs = read_evidence_csv(in / "evidence.csv");
  if (recs.empty()) throw DataError("evidence.csv has no models");
  const CsvTable header = read_csv(in / "evidence.csv");
  std::vector<std::string> names;
  for (const auto& h : header.header)
    if (h.rfind("beta_", 0) == 0) names.push_back(h.substr(5));
  clock.mark("load");

  Summary s;
  if (fs::exists(in / "trace.csv")) {
    ExplorationTrace trace;
    trace.p = recs.front().model.p_total();
    trace.visited = read_trace_csv(in / "trace.csv");
    for (auto& r : recs) trace.records.emplace(r.model, r);
    trace.pip_counts = Eigen::VectorXd::Zero(trace.p);
    trace.beta_sum = Eigen::VectorXd::Zero(trace.p);
    for (const auto& v : trace.visited) {
      if (!v.kept) continue;
      ++trace.n_kept;
      const auto& r = trace.records.at(v.model);
      const auto idx = v.model.included();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        trace.pip_counts[idx[k]] += 1.0;
        trace.beta_sum[idx[k]] += r.mu_beta[static_cast<Eigen::Index>(k)];
      }
      trace.size_sum += idx.size();
      trace.size_sum_sq += static_cast<double>(idx.size() * idx.size());
    }
    s = summarize(trace);
  } else {
    EnumerationTable table;
    table.p = recs.front().model.p_total();
    table.records = std::move(recs);
    normalize_probabilities(table);
    s = summarize(table);
  }
  clock.mark("summarize");
  const fs::path out = c.out_dir.empty() ? in : fs::path(c.out_dir);
  emit_report(s, names, out, parse_report_format(sa.format), sa.top_k);
  clock.mark("write");
  write_manifest(out, "report", app, started, clock, {{"source", in.string()}});
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Bayesian variable selection for latent Gaussian regression (probit, tobit, STAR, PLN)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  DataArgs da;
  FitArgs fa;
  SearchArgs sa;
  Common common;
  std::string mask, fit_method = "vb";
  int max_p = kDefaultEnumerationCap;
  ChainConfig chain;
  SimArgs sim;
  std::string in_dir;

  auto* fit = app.add_subcommand("fit", "fit one model and write its variational state");
  add_data_args(fit, da);
  add_fit_args(fit, fa);
  add_common(fit, common);
  fit->add_option("--model", mask, "inclusion mask such as 0110 (default: all covariates)");
  fit->add_option("--method", fit_method, "vb or avb")->check(CLI::IsMember({"vb", "avb"}))->capture_default_str();

  auto* en = app.add_subcommand("enumerate", "evaluate every model and report posterior summaries");
  add_data_args(en, da);
  add_fit_args(en, fa);
  add_search_args(en, sa);
  add_common(en, common);
  en->add_option("--max-p", max_p, "largest p accepted for enumeration")->capture_default_str();

  auto* ex = app.add_subcommand("explore", "Metropolis-Hastings search over models");
  add_data_args(ex, da);
  add_fit_args(ex, fa);
  add_search_args(ex, sa);
  add_common(ex, common);
  ex->add_option("--keep", chain.n_keep, "models kept per chain after burn-in")->capture_default_str();
  ex->add_option("--burnin", chain.burn_in, "burn-in iterations per chain")->capture_default_str();
  ex->add_option("--chains", chain.chains, "independent chains")->capture_default_str();
  ex->add_option("--seed", chain.seed, "random seed")->capture_default_str();

  auto* si = app.add_subcommand("simulate", "draw a synthetic dataset");
  si->add_option("--family", sim.family, "probit, tobit, star or pln")
      ->check(CLI::IsMember({"probit", "tobit", "star", "pln"}))
      ->capture_default_str();
  si->add_option("--n", sim.n, "observations")->capture_default_str();
  si->add_option("--p", sim.p, "candidate covariates")->capture_default_str();
  si->add_option("--rho", sim.rho, "AR(1) covariate correlation")->capture_default_str();
  si->add_option("--preset", sim.preset, "sparse or dense coefficients")
      ->check(CLI::IsMember({"sparse", "dense"}))
      ->capture_default_str();
  si->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  si->add_option("--replicate", sim.replicate, "replicate index")->capture_default_str();
  si->add_option("--sigma2", sim.sigma2, "latent noise variance (default 0.1 for pln, else 1)");
  si->add_option("--alpha", sim.alpha, "true intercept")->capture_default_str();
  si->add_option("--y-lower", sim.y_lower, "tobit censoring bound")->capture_default_str();
  add_common(si, common);

  auto* re = app.add_subcommand("report", "rebuild summary tables from enumerate/explore output");
  re->add_option("--in-dir", in_dir, "directory holding evidence.csv (and trace.csv)")->required();
  re->add_option("--format", sa.format, "csv or text")->check(CLI::IsMember({"csv", "text"}))->capture_default_str();
  re->add_option("--top-k", sa.top_k, "models listed in the top-models table")->capture_default_str();
  re->add_option("--out-dir", common.out_dir, "output directory (default: --in-dir)");
  re->add_option("--config", common.config, "key=value file supplementing the flags (flags win)");

  std::vector<std::string> args;
  try {
    args = with_config_file(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitData;
  }

  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit) return cmd_fit(*fit, da, fa, common, mask, fit_method);
    if (*en) return cmd_enumerate(*en, da, fa, sa, common, max_p);
    if (*ex) return cmd_explore(*ex, da, fa, sa, common, chain);
    if (*si) return cmd_simulate(*si, sim, common);
    if (*re) {
      if (re->count("--out-dir") == 0) common.out_dir.clear();
      return cmd_report(*re, in_dir, sa, common);
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("latbma");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace latbma
