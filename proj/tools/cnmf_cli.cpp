// cnmf: command-line front end for fitting, data generation, benchmarking and
// reconstruction-form self checks.
//
// Exit codes: 0 success, 1 check failed / all bench runs failed, 2 malformed
// input file, 3 invalid flags or parameters.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cnmf/cnmf.hpp"

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitBadFile = 2;
constexpr int kExitBadFlags = 3;

namespace fs = std::filesystem;

bool is_csv(const fs::path& p) { return p.extension() == ".csv"; }

void save_matrix(const fs::path& p, const cnmf::Matrix& M) {
  if (is_csv(p))
    cnmf::write_matrix_csv(p, M);
  else
    cnmf::write_matrix(p, M);
}

void save_tensor(const fs::path& p, const cnmf::MotifTensor& W) {
  if (is_csv(p)) throw cnmf::InvalidInput("motif tensors cannot be written as CSV: " + p.string());
  cnmf::write_tensor(p, W);
}

std::string num(double v) { return cnmf::detail::format_double(v); }

struct FitFlags {
  std::string input;
  long K = 0;
  long L = 0;
  std::string algorithm = "hals";
  int max_iters = 100;
  double time_limit_s = std::numeric_limits<double>::infinity();
  double rel_tol = 0.0;
  double target_loss = 0.0;
  std::uint64_t seed = 0;
  cnmf::Regularization reg;
  int refresh_every = 1;
  std::string out_w, out_h, trace;
  bool no_timing = false;
};

int run_fit(const FitFlags& f) {
  cnmf::SolverConfig cfg;
  cfg.algorithm = cnmf::parse_algorithm(f.algorithm);
  cfg.max_iters = f.max_iters;
  cfg.time_limit_s = f.time_limit_s;
  cfg.rel_tol = f.rel_tol;
  cfg.target_loss = f.target_loss;
  cfg.seed = f.seed;
  cfg.reg = f.reg;
  cfg.full_residual_refresh_every = f.refresh_every;
  cnmf::validate(cfg);
  const auto& r = cfg.reg;
  if (cfg.algorithm != cnmf::Algorithm::HALS && (r.l1_w > 0 || r.l1_h > 0 || r.l2_w > 0 || r.l2_h > 0)) {
    throw cnmf::InvalidInput("regularization weights are only supported with --algorithm hals");
  }
  if (f.K < 1 || f.L < 1) throw cnmf::InvalidInput("--K and --L must be >= 1");

  cnmf::Matrix X;
  try {
    X = cnmf::read_matrix(f.input);
    cnmf::check_data(X);
  } catch (const cnmf::InvalidInput& e) {
    throw cnmf::FormatError(std::string("input data: ") + e.what());
  }
  if (X.norm() == 0.0) throw cnmf::FormatError("input data is all zeros");
  if (f.L > X.cols()) throw cnmf::InvalidInput("--L exceeds the number of timebins in the input");

  const cnmf::FitResult res = cnmf::fit(X, f.K, f.L, cfg);
  if (!f.out_w.empty()) save_tensor(f.out_w, res.model.W);
  if (!f.out_h.empty()) save_matrix(f.out_h, res.model.H);
  if (!f.trace.empty()) cnmf::write_trace(f.trace, res.trace, !f.no_timing);

  std::cout << "{\"algorithm\": \"" << cnmf::to_string(cfg.algorithm) << "\", \"iterations\": "
            << res.trace.records.back().iteration << ", \"final_loss\": " << num(res.trace.final_loss())
            << ", \"stop_reason\": \"" << cnmf::to_string(res.stop_reason) << "\", \"nnls_warnings\": "
            << res.nnls_warnings << "}\n";
  return 0;
}

struct SynthFlags {
  cnmf::SynthParams p;
  std::string out_x, out_w, out_h, out_x_clean;
  bool verify = false;
};

int run_synth(const SynthFlags& f) {
  const cnmf::SynthDataset d = cnmf::synth_generate(f.p);
  if (!f.out_x.empty()) save_matrix(f.out_x, d.X);
  if (!f.out_w.empty()) save_tensor(f.out_w, d.W_true);
  if (!f.out_h.empty()) save_matrix(f.out_h, d.H_true);
  if (!f.out_x_clean.empty()) save_matrix(f.out_x_clean, d.X_clean);
  std::cout << "{\"N\": " << f.p.N << ", \"T\": " << f.p.T << ", \"K\": " << f.p.K << ", \"L\": " << f.p.L
            << ", \"seed\": " << f.p.seed << "}\n";
  if (!f.verify) return 0;

  bool ok = true;
  double min_x = d.X.minCoeff();
  if (!f.out_x.empty()) {
    const cnmf::Matrix X = cnmf::read_matrix(f.out_x);
    ok = ok && X == d.X;
    min_x = X.minCoeff();
  }
  ok = ok && min_x >= 0.0;
  double clean_loss = cnmf::normalized_loss(d.X_clean, d.W_true, d.H_true);
  if (!f.out_w.empty() && !f.out_h.empty()) {
    const cnmf::MotifTensor W = cnmf::read_tensor(f.out_w);
    const cnmf::Matrix H = cnmf::read_matrix(f.out_h);
    clean_loss = cnmf::normalized_loss(d.X_clean, W, H);
  }
  ok = ok && clean_loss <= 1e-12;
  std::cout << "{\"verified\": " << (ok ? "true" : "false") << ", \"min_x\": " << num(min_x)
            << ", \"clean_loss\": " << num(clean_loss) << "}\n";
  return ok ? 0 : kExitCheckFailed;
}

struct BenchFlags {
  std::string input;
  bool synth = false;
  cnmf::SynthParams p;
  long K = 0;
  long L = 0;
  std::vector<std::string> algorithms{"mu", "hals", "anls"};
  std::vector<std::uint64_t> seeds{0};
  double time_limit_s = 60.0;
  int max_iters = std::numeric_limits<int>::max();
  double rel_tol = 0.0;
  std::string out_dir;
  bool no_timing = false;
};

int run_bench(const BenchFlags& f) {
  if (f.synth == !f.input.empty()) throw cnmf::InvalidInput("give exactly one of --input or --synth");
  cnmf::BenchOptions opts;
  opts.algorithms.clear();
  for (const auto& a : f.algorithms) opts.algorithms.push_back(cnmf::parse_algorithm(a));
  opts.seeds = f.seeds;
  opts.base.time_limit_s = f.time_limit_s;
  opts.base.max_iters = f.max_iters;
  opts.base.rel_tol = f.rel_tol;
  cnmf::validate(opts.base);
  opts.out_dir = f.out_dir;
  opts.timing = !f.no_timing;

  cnmf::Matrix X;
  if (f.synth) {
    X = cnmf::synth_generate(f.p).X;
    opts.K = f.K > 0 ? f.K : f.p.K;
    opts.L = f.L > 0 ? f.L : f.p.L;
  } else {
    try {
      X = cnmf::read_matrix(f.input);
      cnmf::check_data(X);
    } catch (const cnmf::InvalidInput& e) {
      throw cnmf::FormatError(std::string("input data: ") + e.what());
    }
    if (f.K < 1 || f.L < 1) throw cnmf::InvalidInput("--K and --L are required with --input");
    opts.K = f.K;
    opts.L = f.L;
  }
  if (opts.L > X.cols()) throw cnmf::InvalidInput("--L exceeds the number of timebins");

  const auto runs = cnmf::run_bench(X, opts);
  std::cout << cnmf::encode_summary(runs);
  for (const auto& r : runs)
    if (r.ok) return 0;
  return kExitCheckFailed;
}

struct FormFlags {
  std::vector<long> dims{4, 10, 2, 3};
  int trials = 20;
  std::uint64_t seed = 0;
};

int run_check_forms(const FormFlags& f) {
  if (f.dims.size() != 4) throw cnmf::InvalidInput("--dims takes N,T,K,L");
  if (f.trials < 1) throw cnmf::InvalidInput("--trials must be >= 1");
  const cnmf::Dims d{f.dims[0], f.dims[1], f.dims[2], f.dims[3]};
  cnmf::FormCheckReport rep;
  try {
    rep = cnmf::check_forms(d, f.trials, f.seed);
  } catch (const cnmf::OracleTooLarge& e) {
    throw cnmf::InvalidInput(e.what());
  }
  const bool ok = rep.max_deviation() <= 1e-10;
  std::cout << "{\"trials\": " << rep.trials << ", \"max_form_deviation\": " << num(rep.max_form_deviation)
            << ", \"max_adjoint_deviation\": " << num(rep.max_adjoint_deviation);
  if (rep.nmf_checked) std::cout << ", \"max_nmf_deviation\": " << num(rep.max_nmf_deviation);
  std::cout << ", \"max_deviation\": " << num(rep.max_deviation()) << ", \"pass\": " << (ok ? "true" : "false")
            << "}\n";
  return ok ? 0 : kExitCheckFailed;
}

void add_synth_params(CLI::App* app, cnmf::SynthParams& p) {
  app->add_option("--N", p.N, "Features")->capture_default_str();
  app->add_option("--T", p.T, "Timebins")->capture_default_str();
  app->add_option("--K", p.K, "Components")->capture_default_str();
  app->add_option("--L", p.L, "Motif length")->capture_default_str();
  app->add_option("--sigma", p.sigma, "Gaussian bump width")->capture_default_str();
  app->add_option("--dirichlet-alpha", p.dirichlet_alpha, "Dirichlet concentration")->capture_default_str();
  app->add_option("--zero-prob", p.zero_prob, "Probability of a zero activation")->capture_default_str();
  app->add_option("--exp-rate", p.exp_rate, "Rate of nonzero activations")->capture_default_str();
  app->add_option("--noise-std", p.noise_std, "Std of additive Gaussian noise")->capture_default_str();
  app->add_option("--seed", p.seed, "Random seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutive NMF toolkit"};
  app.require_subcommand(1);

  FitFlags fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a CNMF model to a data matrix");
  fit_cmd->add_option("--input", fit.input, "Data matrix (binary or .csv)")->required();
  fit_cmd->add_option("--K", fit.K, "Number of components")->required();
  fit_cmd->add_option("--L", fit.L, "Motif length")->required();
  fit_cmd->add_option("--algorithm", fit.algorithm, "mu | hals | anls")
      ->check(CLI::IsMember({"mu", "hals", "anls"}))
      ->capture_default_str();
  fit_cmd->add_option("--max-iters", fit.max_iters, "Outer iteration cap")->capture_default_str();
  fit_cmd->add_option("--time-limit-s", fit.time_limit_s, "Wall-clock budget in seconds");
  fit_cmd->add_option("--rel-tol", fit.rel_tol, "Relative loss drop over 5 iterations; 0 disables")
      ->capture_default_str();
  fit_cmd->add_option("--target-loss", fit.target_loss, "Stop once the loss reaches this; 0 disables");
  fit_cmd->add_option("--seed", fit.seed, "Initialization seed")->capture_default_str();
  fit_cmd->add_option("--l1-w", fit.reg.l1_w, "l1 weight on W (hals)");
  fit_cmd->add_option("--l1-h", fit.reg.l1_h, "l1 weight on H (hals)");
  fit_cmd->add_option("--l2-w", fit.reg.l2_w, "l2 weight on W (hals)");
  fit_cmd->add_option("--l2-h", fit.reg.l2_h, "l2 weight on H (hals)");
  fit_cmd->add_option("--refresh-every", fit.refresh_every, "HALS full residual refresh period")
      ->capture_default_str();
  fit_cmd->add_option("--out-w", fit.out_w, "Output motif tensor (L x N x K)");
  fit_cmd->add_option("--out-h", fit.out_h, "Output activations (K x T)");
  fit_cmd->add_option("--trace", fit.trace, "Output trace CSV");
  fit_cmd->add_flag("--no-timing", fit.no_timing, "Write iteration index in place of elapsed time");

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic CNMF dataset");
  add_synth_params(synth_cmd, synth.p);
  synth_cmd->add_option("--out-x", synth.out_x, "Output data matrix");
  synth_cmd->add_option("--out-w", synth.out_w, "Output true motifs");
  synth_cmd->add_option("--out-h", synth.out_h, "Output true activations");
  synth_cmd->add_option("--out-x-clean", synth.out_x_clean, "Output noiseless data matrix");
  synth_cmd->add_flag("--verify", synth.verify, "Reload outputs and check them");

  BenchFlags bench;
  auto* bench_cmd = app.add_subcommand("bench", "Compare algorithms from shared initializations");
  bench_cmd->add_option("--input", bench.input, "Data matrix (binary or .csv)");
  bench_cmd->add_flag("--synth", bench.synth, "Generate the data from the synth parameters");
  add_synth_params(bench_cmd, bench.p);
  bench_cmd->get_option("--K")->description("Components (synth and fit)");
  bench_cmd->get_option("--L")->description("Motif length (synth and fit)");
  bench_cmd->add_option("--algorithms", bench.algorithms, "Comma-separated algorithm list")
      ->delimiter(',')
      ->check(CLI::IsMember({"mu", "hals", "anls"}));
  bench_cmd->add_option("--seeds", bench.seeds, "Comma-separated initialization seeds")->delimiter(',');
  bench_cmd->add_option("--time-limit-s", bench.time_limit_s, "Budget per run")->capture_default_str();
  bench_cmd->add_option("--max-iters", bench.max_iters, "Iteration cap per run");
  bench_cmd->add_option("--rel-tol", bench.rel_tol, "Convergence tolerance; 0 disables");
  bench_cmd->add_option("--out-dir", bench.out_dir, "Directory for traces and summary.csv")->required();
  bench_cmd->add_flag("--no-timing", bench.no_timing, "Write iteration index in place of elapsed time");

  FormFlags forms;
  auto* forms_cmd = app.add_subcommand("check-forms", "Cross-check the reconstruction forms");
  forms_cmd->add_option("--dims", forms.dims, "N,T,K,L")->delimiter(',')->expected(4);
  forms_cmd->add_option("--trials", forms.trials, "Random instances")->capture_default_str();
  forms_cmd->add_option("--seed", forms.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadFlags;
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*synth_cmd) return run_synth(synth);
    if (*bench_cmd) {
      // --K / --L on bench are shared between the synth params and the fit.
      bench.K = bench_cmd->count("--K") ? static_cast<long>(bench.p.K) : 0;
      bench.L = bench_cmd->count("--L") ? static_cast<long>(bench.p.L) : 0;
      return run_bench(bench);
    }
    if (*forms_cmd) return run_check_forms(forms);
  } catch (const cnmf::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadFile;
  } catch (const cnmf::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadFlags;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitBadFlags;
}
