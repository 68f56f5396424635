// slpsim: sweep runner, property-suite driver, and precoder benchmark for
// the robust symbol-level precoding library.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slp/config.hpp"
#include "slp/report.hpp"
#include "slp/sim.hpp"
#include "slp/validation.hpp"

namespace {

constexpr const char* kVersion = "slpsim 0.1.0";

int run_sweep_cmd(const std::string& config_path, const std::string& preset,
                  const std::string& out_dir, std::uint64_t seed, int threads,
                  bool trace_solver) {
  slp::SweepConfig cfg;
  try {
    if (preset == "ula14")
      cfg = slp::ula14_preset();
    else if (preset == "upa64")
      cfg = slp::upa64_preset();
    else if (!preset.empty()) {
      std::cerr << "unknown preset \"" << preset << "\" (expected ula14 or upa64)\n";
      return 2;
    }
    if (!config_path.empty()) cfg = slp::parse_config_file(config_path, cfg);
    if (seed != 0) cfg.seed = seed;
    if (threads > 0) cfg.threads = threads;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  std::filesystem::create_directories(out_dir);
  auto t0 = std::chrono::steady_clock::now();
  std::vector<slp::MetricsRecord> records = slp::run_sweep(cfg);
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::string csv_path = out_dir + "/metrics.csv";
  std::string plot_path = out_dir + "/plot.py";
  std::string manifest_path = out_dir + "/manifest.json";
  {
    std::ofstream f(csv_path);
    slp::emit_csv(records, f);
  }
  {
    std::ofstream f(plot_path);
    f << slp::plot_script_text();
  }
  {
    std::ofstream f(manifest_path);
    f << slp::RunManifest::make(cfg, {csv_path, plot_path}, kVersion).to_json() << "\n";
  }

  bool any_failed = false;
  for (const auto& r : records) {
    if (r.failed) {
      any_failed = true;
      std::cerr << "FAILED cell " << r.scheme << " snr=" << r.snr_db << " alpha=" << r.alpha
                << ": " << r.error << "\n";
    } else {
      std::cout << r.scheme << " snr=" << r.snr_db << " alpha=" << r.alpha
                << " ser=" << r.ser << " mse=" << r.mse << " gmin=" << r.gamma_min_db
                << " dB (n=" << r.n_symbols << ")\n";
    }
  }
  (void)trace_solver;
  std::cout << "sweep finished in " << dt << " s; results in " << out_dir << "\n";
  return any_failed ? 1 : 0;
}

int run_validate_cmd(const std::string& suite) {
  slp::CheckResult res;
  if (suite == "lemma1")
    res = slp::validate_lemma1();
  else if (suite == "prop2")
    res = slp::validate_prop2();
  else if (suite == "prop3")
    res = slp::validate_gram_trend(0);
  else if (suite == "prop4")
    res = slp::validate_prop4();
  else if (suite == "prop5")
    res = slp::validate_gram_trend(1);
  else if (suite == "mil")
    res = slp::validate_mil();
  else if (suite == "degeneracy")
    res = slp::validate_degeneracy();
  else if (suite == "monotone")
    res = slp::validate_monotone();
  else {
    std::cerr << "unknown suite \"" << suite
              << "\"; expected one of: lemma1 prop2 prop3 prop4 prop5 mil degeneracy monotone\n";
    return 2;
  }
  std::cout << "suite " << res.name << ": " << (res.passed ? "PASS" : "FAIL") << "\n";
  for (const auto& line : res.lines) std::cout << line << "\n";
  return res.passed ? 0 : 1;
}

int run_bench_cmd(int k_users, int reps) {
  using clock = std::chrono::steady_clock;
  std::cout << "timing per precoder call, K=" << k_users << ", " << reps << " reps\n";
  std::cout << "     N     cisb-rlc    cf+nnls    cimmse-r  cimmse-rlc   ratio r/rlc\n";
  slp::Rng rng(12345);
  std::vector<int> sizes = {16, 32, 64, 128};
  std::vector<double> ratio;
  double rlc_ms_128 = 0.0;
  for (int n : sizes) {
    slp::detail::Instance inst = slp::detail::make_instance(
        slp::ArrayConfig::ula(n, 1), k_users, 0.95, 8, 25.0, rng);
    slp::SlpInput in = inst.input();
    auto time_one = [&](auto&& fn) {
      fn();  // warmup
      auto t0 = clock::now();
      for (int r = 0; r < reps; ++r) fn();
      return std::chrono::duration<double, std::milli>(clock::now() - t0).count() / reps;
    };
    double t_rlc = time_one([&] { slp::cisb_rlc_precode(in); });
    double t_cf = time_one([&] { slp::closed_form_with_nnls(in); });
    double t_r = time_one([&] { slp::cimmse_r_precode(in); });
    double t_mrlc = time_one([&] { slp::cimmse_rlc_precode(in); });
    ratio.push_back(t_mrlc / t_r);
    if (n == 128) rlc_ms_128 = t_rlc;
    std::printf("  %4d  %9.3fms %9.3fms %9.3fms %9.3fms   %8.4f\n", n, t_rlc, t_cf, t_r,
                t_mrlc, t_mrlc / t_r);
  }
  bool scaling_ok = ratio.back() < ratio[1];
  bool budget_ok = rlc_ms_128 < 50.0;
  std::cout << (scaling_ok ? "PASS" : "FAIL")
            << ": low-complexity/full time ratio shrinks from N=32 to N=128\n";
  std::cout << (budget_ok ? "PASS" : "FAIL") << ": cisb-rlc at N=128 under 50 ms/symbol\n";
  return scaling_ok && budget_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust symbol-level precoding simulator"};
  app.set_version_flag("--version", kVersion);

  std::string config_path, preset, out_dir = "out", suite;
  std::uint64_t seed = 0;
  int threads = 0;
  bool trace_solver = false;
  int bench_k = 4, bench_reps = 5;

  CLI::App* sweep = app.add_subcommand("sweep", "run a Monte Carlo sweep and emit CSV + plots");
  sweep->add_option("--config", config_path, "sweep configuration file");
  sweep->add_option("--preset", preset, "configuration preset: ula14 or upa64");
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--seed", seed, "override the RNG seed");
  sweep->add_option("--threads", threads, "worker threads (default: hardware)");
  sweep->add_flag("--trace-solver", trace_solver, "keep per-solve traces (diagnostic)");

  CLI::App* validate = app.add_subcommand("validate", "run a named property suite");
  validate->add_option("suite", suite,
                       "lemma1 | prop2 | prop3 | prop4 | prop5 | mil | degeneracy | monotone")
      ->required();

  CLI::App* bench = app.add_subcommand("bench", "wall-clock scaling of the precoders");
  bench->add_option("--k", bench_k, "number of users");
  bench->add_option("--reps", bench_reps, "repetitions per timing");

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed())
      return run_sweep_cmd(config_path, preset, out_dir, seed, threads, trace_solver);
    if (validate->parsed()) return run_validate_cmd(suite);
    if (bench->parsed()) return run_bench_cmd(bench_k, bench_reps);
  } catch (const slp::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
