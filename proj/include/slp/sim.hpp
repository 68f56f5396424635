#ifndef SLP_SIM_HPP
#define SLP_SIM_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "slp/channel_model.hpp"
#include "slp/cir_geometry.hpp"
#include "slp/precoders.hpp"
#include "slp/real_lift.hpp"
#include "slp/rng.hpp"

namespace slp {

enum class Scheme { kZf, kMmse, kCisb, kCimmse, kCisbR, kCimmseR, kCisbRlc, kCimmseRlc };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kZf: return "zf";
    case Scheme::kMmse: return "mmse";
    case Scheme::kCisb: return "cisb";
    case Scheme::kCimmse: return "cimmse";
    case Scheme::kCisbR: return "cisb-r";
    case Scheme::kCimmseR: return "cimmse-r";
    case Scheme::kCisbRlc: return "cisb-rlc";
    case Scheme::kCimmseRlc: return "cimmse-rlc";
  }
  return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view name) {
  for (Scheme s : {Scheme::kZf, Scheme::kMmse, Scheme::kCisb, Scheme::kCimmse,
                   Scheme::kCisbR, Scheme::kCimmseR, Scheme::kCisbRlc, Scheme::kCimmseRlc})
    if (name == scheme_name(s)) return s;
  return std::nullopt;
}

enum class AgingMode { kFixedAlpha, kIntraSlot };

struct BudgetConfig {
  long max_symbols = 200000;  // user-symbol decisions per grid point
  int target_errors = 500;    // early stop once reached (slot granularity)
};

struct SweepConfig {
  ArrayConfig array;
  int n_users = 0;
  int modulation = 8;
  int n_clusters = 3;
  MaskProfile mask_profile;
  std::vector<double> snr_grid_db;
  std::vector<double> alpha_grid;
  int n_slots = 1 << 30;  // slot cap; the symbol budget usually binds first
  int symbols_per_slot = 10;
  int mask_epoch_slots = 0;  // 0: one mask draw for the whole sweep
  std::vector<Scheme> schemes;
  std::uint64_t seed = 1;
  AgingMode aging_mode = AgingMode::kFixedAlpha;
  MobilityProfile mobility;
  BudgetConfig budget;
  int threads = 0;  // 0: hardware concurrency
  MaxMinOptions maxmin;
  MmseOptions mmse;

  void validate() const {
    array.validate();
    if (n_users < 1 || n_users > array.n_antennas)
      throw std::invalid_argument("SweepConfig: need 1 <= n_users <= n_antennas");
    if (snr_grid_db.empty()) throw std::invalid_argument("SweepConfig: empty snr grid");
    if (alpha_grid.empty() && aging_mode == AgingMode::kFixedAlpha)
      throw std::invalid_argument("SweepConfig: empty alpha grid");
    if (symbols_per_slot < 1) throw std::invalid_argument("SweepConfig: symbols_per_slot >= 1");
    if (schemes.empty()) throw std::invalid_argument("SweepConfig: no schemes selected");
    for (double a : alpha_grid)
      if (a < 0.0 || a > 1.0) throw std::invalid_argument("SweepConfig: alpha outside [0, 1]");
  }

  long slot_cap() const {
    long by_budget = (budget.max_symbols + static_cast<long>(n_users) * symbols_per_slot - 1) /
                     (static_cast<long>(n_users) * symbols_per_slot);
    return std::min<long>(n_slots, std::max<long>(1, by_budget));
  }
};

/// Aggregates for one (scheme, snr, alpha) grid point.
struct MetricsRecord {
  std::string scheme;
  double snr_db = 0.0;
  double alpha = 0.0;
  double ser = 0.0;
  double ser_ci = 0.0;  // Wilson half-width at 95%
  double mse = 0.0;
  double gamma_min_db = 0.0;
  long n_symbols = 0;
  long n_errors = 0;
  double mean_power = 0.0;
  bool failed = false;
  std::string error;
};

inline double wilson_half_width(long errors, long n, double z = 1.959963984540054) {
  if (n <= 0) return 0.0;
  double p = static_cast<double>(errors) / n;
  double z2n = z * z / n;
  return z * std::sqrt(p * (1.0 - p) / n + z2n / (4.0 * n)) / (1.0 + z2n);
}

namespace detail {

/// Per-epoch immutable channel data shared read-only across workers.
struct MaskEpoch {
  std::vector<Eigen::VectorXd> masks;
  std::vector<Eigen::MatrixXd> e_grams;
  Eigen::VectorXd mask_sq;
};

struct SweepContext {
  Eigen::MatrixXcd grid;
  std::vector<MaskEpoch> epochs;
  PskConstellation constellation;

  const MaskEpoch& epoch_for(const SweepConfig& cfg, long slot) const {
    if (cfg.mask_epoch_slots <= 0) return epochs.front();
    return epochs[std::min<size_t>(slot / cfg.mask_epoch_slots, epochs.size() - 1)];
  }
};

inline SweepContext make_context(const SweepConfig& cfg) {
  SweepContext ctx;
  ctx.grid = build_dft_grid(cfg.array);
  ctx.constellation = psk_constellation(cfg.modulation);
  long cap = cfg.slot_cap();
  long n_epochs = cfg.mask_epoch_slots > 0
                      ? (cap + cfg.mask_epoch_slots - 1) / cfg.mask_epoch_slots
                      : 1;
  ctx.epochs.resize(n_epochs);
  for (long e = 0; e < n_epochs; ++e) {
    Rng rng(Rng::derive(cfg.seed, 0x6d61736bULL, static_cast<std::uint64_t>(e)));
    MaskEpoch& ep = ctx.epochs[e];
    ep.masks = synthesize_mask_set(rng, cfg.n_users, cfg.n_clusters, cfg.array,
                                   cfg.mask_profile);
    ep.e_grams.reserve(cfg.n_users);
    ep.mask_sq.resize(cfg.n_users);
    for (int k = 0; k < cfg.n_users; ++k) {
      ep.e_grams.push_back(build_uncertainty(ep.masks[k], ctx.grid).e);
      ep.mask_sq(k) = ep.masks[k].squaredNorm();
    }
  }
  return ctx;
}

}  // namespace detail

struct TrialStats {
  long symbols = 0;
  long errors = 0;
  double mse_sum = 0.0;
  double gamma_min_sum = 0.0;  // linear
  double power_sum = 0.0;
  long solves = 0;

  void merge(const TrialStats& o) {
    symbols += o.symbols;
    errors += o.errors;
    mse_sum += o.mse_sum;
    gamma_min_sum += o.gamma_min_sum;
    power_sum += o.power_sum;
    solves += o.solves;
  }
};

namespace detail {

inline SlpOutput dispatch(Scheme scheme, const SlpInput& in, const SweepConfig& cfg) {
  switch (scheme) {
    case Scheme::kZf: return zf_precode(in);
    case Scheme::kMmse: return mmse_precode(in);
    case Scheme::kCisb: return cisb_precode(in, cfg.maxmin);
    case Scheme::kCisbR: return cisb_r_precode(in, cfg.maxmin);
    case Scheme::kCisbRlc: return cisb_rlc_precode(in);
    case Scheme::kCimmse: return cimmse_precode(in, cfg.mmse);
    case Scheme::kCimmseR: return cimmse_r_precode(in, cfg.mmse);
    case Scheme::kCimmseRlc: return cimmse_rlc_precode(in, cfg.mmse);
  }
  throw std::logic_error("dispatch: unknown scheme");
}

inline bool needs_pinv(Scheme s) {
  return s == Scheme::kZf || s == Scheme::kCisb || s == Scheme::kCisbR ||
         s == Scheme::kCisbRlc;
}

}  // namespace detail

/// One slot of the link simulation: draw the estimated channels, then for
/// each downlink symbol precode on the channel mean, push the symbol through
/// the true aged channel plus noise, rescale, demodulate, and accumulate the
/// error/MSE/Gamma_min statistics. The RNG draw order is scheme-independent,
/// so common random numbers pair the schemes at equal seeds.
inline TrialStats run_trial(const SweepConfig& cfg, const detail::SweepContext& ctx,
                            double snr_db, double alpha, Scheme scheme,
                            long slot_index, std::uint64_t slot_seed) {
  const detail::MaskEpoch& ep = ctx.epoch_for(cfg, slot_index);
  const int k_users = cfg.n_users;
  const int n = cfg.array.n_antennas;
  const double p_t = 1.0;
  const double sigma2 = p_t / std::pow(10.0, snr_db / 10.0);
  Rng rng(slot_seed);

  // Estimated channels for the slot.
  Eigen::MatrixXcd h_u(k_users, n);
  for (int k = 0; k < k_users; ++k) {
    Eigen::VectorXcd g = rng.cnormal_vector(ep.masks[k].size());
    h_u.row(k) = (ctx.grid.conjugate() * (ep.masks[k].array() * g.array()).matrix()).transpose();
  }

  TrialStats stats;
  Eigen::MatrixXd h_lift, h_pinv, h_gram;
  bool slot_cache_valid = false;

  for (int sym = 1; sym <= cfg.symbols_per_slot; ++sym) {
    double a = alpha;
    if (cfg.aging_mode == AgingMode::kIntraSlot) a = jakes_correlation(cfg.mobility, sym);
    if (a < 0.0 || a > 1.0)
      throw std::invalid_argument("run_trial: aging coefficient outside [0, 1]");
    double beta = std::sqrt(std::max(0.0, 1.0 - a * a));

    if (!slot_cache_valid || cfg.aging_mode == AgingMode::kIntraSlot) {
      h_lift = lift_channel(a * h_u);
      h_gram = h_lift * h_lift.transpose();
      if (detail::needs_pinv(scheme)) {
        Eigen::LLT<Eigen::MatrixXd> llt(h_gram);
        if (llt.info() != Eigen::Success)
          throw std::runtime_error("run_trial: rank-deficient lifted channel");
        h_pinv = h_lift.transpose() *
                 llt.solve(Eigen::MatrixXd::Identity(2 * k_users, 2 * k_users));
      }
      slot_cache_valid = true;
    }

    // Symbols for this slot position.
    Eigen::VectorXcd sc(k_users);
    std::vector<int> idx(k_users);
    for (int k = 0; k < k_users; ++k) {
      idx[k] = rng.uniform_int(cfg.modulation);
      sc(k) = ctx.constellation.points(idx[k]);
    }
    CirSpec cir = make_cir_spec(sc, cfg.modulation);

    SlpInput in;
    in.h = &h_lift;
    in.cir = &cir;
    in.beta = Eigen::VectorXd::Constant(k_users, beta);
    in.e_grams = &ep.e_grams;
    in.mask_sq_norms = ep.mask_sq;
    in.sigma2 = sigma2;
    in.p_t = p_t;
    in.h_pinv = detail::needs_pinv(scheme) ? &h_pinv : nullptr;
    in.h_gram = &h_gram;

    SlpOutput out = detail::dispatch(scheme, in, cfg);
    Eigen::VectorXcd x_c = unlift_vector(out.x);
    stats.gamma_min_sum += gamma_min_metric(out, in);
    stats.power_sum += out.x.squaredNorm();
    ++stats.solves;

    for (int k = 0; k < k_users; ++k) {
      Eigen::VectorXcd g = rng.cnormal_vector(ep.masks[k].size());
      Eigen::VectorXcd h_true = a * h_u.row(k).transpose() +
          beta * (ctx.grid.conjugate() * (ep.masks[k].array() * g.array()).matrix());
      cd noise = std::sqrt(sigma2) * rng.cnormal();
      cd y = (h_true.array() * x_c.array()).sum() + noise;  // h^T x, not h^H x
      cd y_tilde = y / out.gamma(k);
      cd target(out.diag.target(k), out.diag.target(k_users + k));
      stats.mse_sum += std::norm(y_tilde - target);
      if (demodulate(y_tilde, cfg.modulation) != idx[k]) ++stats.errors;
      ++stats.symbols;
    }
  }
  return stats;
}

/// Full Cartesian sweep. Grid points run sequentially; slots inside a point
/// run on a small thread pool. Slot results merge in slot order and the
/// early-stop rule is evaluated per slot, so output is independent of the
/// thread count. A failing grid point is recorded and the sweep continues.
inline std::vector<MetricsRecord> run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  detail::SweepContext ctx = detail::make_context(cfg);
  const long cap = cfg.slot_cap();
  const int n_threads = cfg.threads > 0
                            ? cfg.threads
                            : std::max(1u, std::thread::hardware_concurrency());

  std::vector<double> alphas = cfg.alpha_grid;
  if (cfg.aging_mode == AgingMode::kIntraSlot)
    alphas = {jakes_correlation(cfg.mobility, 1)};

  std::vector<MetricsRecord> records;
  for (Scheme scheme : cfg.schemes) {
    for (size_t si = 0; si < cfg.snr_grid_db.size(); ++si) {
      for (size_t ai = 0; ai < alphas.size(); ++ai) {
        MetricsRecord rec;
        rec.scheme = scheme_name(scheme);
        rec.snr_db = cfg.snr_grid_db[si];
        rec.alpha = alphas[ai];
        std::uint64_t point_seed = Rng::derive(cfg.seed, 0x706f696eULL, si, ai);
        TrialStats total;
        try {
          long slot = 0;
          bool stopped = false;
          while (slot < cap && !stopped) {
            long block = std::min<long>(cap - slot, 2L * n_threads);
            std::vector<TrialStats> part(block);
            std::vector<std::exception_ptr> errs(block);
            std::vector<std::thread> pool;
            std::atomic<long> next{0};
            auto worker = [&]() {
              for (;;) {
                long j = next.fetch_add(1);
                if (j >= block) return;
                try {
                  part[j] = run_trial(cfg, ctx, cfg.snr_grid_db[si], alphas[ai], scheme,
                                      slot + j, Rng::derive(point_seed, slot + j));
                } catch (...) {
                  errs[j] = std::current_exception();
                }
              }
            };
            int spawn = static_cast<int>(std::min<long>(n_threads, block));
            pool.reserve(spawn);
            for (int w = 0; w < spawn; ++w) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
            for (long j = 0; j < block; ++j) {
              if (errs[j]) std::rethrow_exception(errs[j]);
              total.merge(part[j]);
              if (total.symbols >= cfg.budget.max_symbols ||
                  total.errors >= cfg.budget.target_errors) {
                stopped = true;
                break;
              }
            }
            slot += block;
          }
          rec.n_symbols = total.symbols;
          rec.n_errors = total.errors;
          rec.ser = total.symbols > 0 ? static_cast<double>(total.errors) / total.symbols : 0.0;
          rec.ser_ci = wilson_half_width(total.errors, total.symbols);
          rec.mse = total.symbols > 0 ? total.mse_sum / total.symbols : 0.0;
          rec.gamma_min_db = total.solves > 0
                                 ? 10.0 * std::log10(total.gamma_min_sum / total.solves)
                                 : 0.0;
          rec.mean_power = total.solves > 0 ? total.power_sum / total.solves : 0.0;
        } catch (const std::exception& e) {
          rec.failed = true;
          rec.error = e.what();
        }
        records.push_back(std::move(rec));
      }
    }
  }
  std::sort(records.begin(), records.end(), [](const MetricsRecord& a, const MetricsRecord& b) {
    if (a.scheme != b.scheme) return a.scheme < b.scheme;
    if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
    return a.alpha < b.alpha;
  });
  return records;
}

}  // namespace slp

#endif  // SLP_SIM_HPP
