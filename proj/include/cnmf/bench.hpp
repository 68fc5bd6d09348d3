#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "cnmf/io.hpp"
#include "cnmf/solvers.hpp"

namespace cnmf {

struct BenchOptions {
  std::vector<Algorithm> algorithms{Algorithm::MU, Algorithm::HALS, Algorithm::ANLS};
  std::vector<std::uint64_t> seeds{0};
  Index K = 5;
  Index L = 20;
  /// Template for every run; algorithm and seed are overwritten per run.
  SolverConfig base;
  /// Empty means keep results in memory only.
  std::filesystem::path out_dir;
  bool timing = true;
};

struct BenchRun {
  Algorithm algorithm = Algorithm::MU;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  FitResult result;
};

inline std::string trace_filename(Algorithm a, std::uint64_t seed) {
  return "trace_" + std::string(to_string(a)) + "_seed" + std::to_string(seed) + ".csv";
}

/// Summary CSV: algorithm,seed,status,final_loss,iters,elapsed_s,stop_reason.
inline std::string encode_summary(const std::vector<BenchRun>& runs) {
  std::string out = "algorithm,seed,status,final_loss,iters,elapsed_s,stop_reason\n";
  for (const auto& r : runs) {
    out += std::string(to_string(r.algorithm)) + "," + std::to_string(r.seed) + ",";
    if (r.ok) {
      const auto& last = r.result.trace.records.back();
      out += "ok," + detail::format_double(last.loss) + "," + std::to_string(last.iteration) + "," +
             detail::format_double(last.elapsed_s) + "," + std::string(to_string(r.result.stop_reason));
    } else {
      std::string msg = r.error;
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ' ';
      out += "error:" + msg + ",,,,";
    }
    out.push_back('\n');
  }
  return out;
}

/// Runs every (algorithm, seed) pair sequentially. For a given seed all
/// algorithms start from the same random initialization. A failing run is
/// recorded and does not stop the others.
inline std::vector<BenchRun> run_bench(const Matrix& X, const BenchOptions& opts) {
  require(!opts.algorithms.empty(), "bench: no algorithms given");
  require(!opts.seeds.empty(), "bench: no seeds given");
  check_data(X);
  if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);

  std::vector<BenchRun> runs;
  for (std::uint64_t seed : opts.seeds) {
    for (Algorithm a : opts.algorithms) {
      BenchRun run;
      run.algorithm = a;
      run.seed = seed;
      try {
        SolverConfig cfg = opts.base;
        cfg.algorithm = a;
        cfg.seed = seed;
        run.result = fit(X, opts.K, opts.L, cfg);
        run.ok = true;
        if (!opts.out_dir.empty()) write_trace(opts.out_dir / trace_filename(a, seed), run.result.trace, opts.timing);
      } catch (const std::exception& e) {
        run.ok = false;
        run.error = e.what();
      }
      runs.push_back(std::move(run));
    }
  }
  if (!opts.out_dir.empty()) detail::write_file_atomic(opts.out_dir / "summary.csv", encode_summary(runs));
  return runs;
}

}  // namespace cnmf
