#ifndef SLP_CHANNEL_MODEL_HPP
#define SLP_CHANNEL_MODEL_HPP

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "slp/rng.hpp"

namespace slp {

enum class ArrayGeometry { kUla, kUpa };

/// Antenna array description. For UPA the grid is the Kronecker product of
/// per-axis oversampled DFT grids; a dual-polarized panel repeats that grid
/// block-diagonally across the two polarizations, so N = 2 * n_v * n_h.
struct ArrayConfig {
  int n_antennas = 0;   // N
  int fine_factor = 1;  // F_vh
  ArrayGeometry geometry = ArrayGeometry::kUla;
  int n_v = 0;
  int n_h = 0;
  bool dual_polarized = true;

  int grid_length() const { return fine_factor * n_antennas; }

  void validate() const {
    if (n_antennas < 1) throw std::invalid_argument("ArrayConfig: n_antennas must be >= 1");
    if (fine_factor < 1) throw std::invalid_argument("ArrayConfig: fine_factor must be >= 1");
    if (geometry == ArrayGeometry::kUpa) {
      if (n_v < 1 || n_h < 1) throw std::invalid_argument("ArrayConfig: UPA needs n_v, n_h >= 1");
      int expect = (dual_polarized ? 2 : 1) * n_v * n_h;
      if (n_antennas != expect)
        throw std::invalid_argument("ArrayConfig: UPA requires n_antennas == (dual?2:1)*n_v*n_h");
    }
  }

  static ArrayConfig ula(int n, int fine = 1) {
    ArrayConfig c;
    c.n_antennas = n;
    c.fine_factor = fine;
    c.geometry = ArrayGeometry::kUla;
    return c;
  }

  static ArrayConfig upa(int n_v, int n_h, int fine = 1, bool dual = true) {
    ArrayConfig c;
    c.geometry = ArrayGeometry::kUpa;
    c.n_v = n_v;
    c.n_h = n_h;
    c.dual_polarized = dual;
    c.fine_factor = fine;
    c.n_antennas = (dual ? 2 : 1) * n_v * n_h;
    return c;
  }
};

/// UE mobility parameters feeding the Jakes autocorrelation coefficient.
struct MobilityProfile {
  double speed_mps = 0.0;
  double carrier_hz = 3.5e9;
  double symbol_duration_s = 1e-4;
  static constexpr double kLightSpeedMps = 299792458.0;
};

/// Bessel function of the first kind, order zero, |error| <= 1e-7.
/// Power series for |x| <= 8, Hankel asymptotic expansion beyond.
inline double bessel_j0(double x) {
  x = std::abs(x);
  if (x <= 8.0) {
    // sum_k (-q)^k / (k!)^2 with q = x^2/4; 40 terms bound the tail far
    // below 1e-7 at x = 8.
    double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 40; ++k) {
      term *= -q / (static_cast<double>(k) * k);
      sum += term;
    }
    return sum;
  }
  // J0(x) ~ sqrt(2/(pi x)) [P(8/x) cos(x - pi/4) - Q(8/x) sin(x - pi/4)]
  double z = 8.0 / x;
  double y = z * z;
  double p0 = 1.0 + y * (-0.1098628627e-2 + y * (0.2734510407e-4 +
              y * (-0.2073370639e-5 + y * 0.2093887211e-6)));
  double q0 = z * (-0.1562499995e-1 + y * (0.1430488765e-3 +
              y * (-0.6911147651e-5 + y * (0.7621095161e-6 - y * 0.934935152e-7))));
  double xx = x - 0.785398163397448;
  return std::sqrt(0.636619772 / x) * (std::cos(xx) * p0 - std::sin(xx) * q0);
}

/// Jakes model aging coefficient alpha = J0(2 pi v f_c n T / c) at symbol lag n.
inline double jakes_correlation(const MobilityProfile& profile, int n_symbols) {
  if (n_symbols < 0) throw std::invalid_argument("jakes_correlation: n must be >= 0");
  double arg = 2.0 * M_PI * profile.speed_mps * profile.carrier_hz *
               static_cast<double>(n_symbols) * profile.symbol_duration_s /
               MobilityProfile::kLightSpeedMps;
  return bessel_j0(arg);
}

namespace detail {

inline Eigen::MatrixXcd oversampled_dft(int n, int fine) {
  const int cols = fine * n;
  Eigen::MatrixXcd v(n, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < n; ++i) {
      double phase = -2.0 * M_PI * static_cast<double>(i) * j / cols;
      v(i, j) = std::polar(scale, phase);
    }
  return v;
}

// Split the fine factor across the two UPA axes, as square as possible.
inline std::pair<int, int> split_fine(int fine) {
  for (int d = static_cast<int>(std::sqrt(static_cast<double>(fine))); d >= 1; --d)
    if (fine % d == 0) return {d, fine / d};
  return {1, fine};
}

}  // namespace detail

/// N x (F_vh N) beamspace grid with unit-norm columns. ULA: oversampled DFT.
/// UPA: Kronecker product of per-axis grids, repeated per polarization.
inline Eigen::MatrixXcd build_dft_grid(const ArrayConfig& config) {
  config.validate();
  if (config.geometry == ArrayGeometry::kUla)
    return detail::oversampled_dft(config.n_antennas, config.fine_factor);

  auto [f_v, f_h] = detail::split_fine(config.fine_factor);
  Eigen::MatrixXcd vv = detail::oversampled_dft(config.n_v, f_v);
  Eigen::MatrixXcd vh = detail::oversampled_dft(config.n_h, f_h);
  Eigen::MatrixXcd vvh(config.n_v * config.n_h, vv.cols() * vh.cols());
  for (Eigen::Index a = 0; a < vv.rows(); ++a)
    for (Eigen::Index b = 0; b < vv.cols(); ++b)
      vvh.block(a * vh.rows(), b * vh.cols(), vh.rows(), vh.cols()) = vv(a, b) * vh;
  if (!config.dual_polarized) return vvh;
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(2 * vvh.rows(), 2 * vvh.cols());
  v.topLeftCorner(vvh.rows(), vvh.cols()) = vvh;
  v.bottomRightCorner(vvh.rows(), vvh.cols()) = vvh;
  return v;
}

/// Cross-user layout of the synthetic angular masks.
///
/// kIndependent: every lobe center drawn uniformly, users uncorrelated.
/// kSharedHotspots: each user places its strongest lobes on cluster centers
/// shared by all users (co-located scatterers), plus one weak wide private
/// lobe. This profile reproduces the qualitative regime where non-robust
/// precoding collapses under aging while robust schemes keep working.
struct MaskProfile {
  enum Kind { kIndependent, kSharedHotspots } kind = kIndependent;
  // shared-hotspot parameters
  int n_hotspots = 2;
  double hotspot_jitter = 0.75;          // grid bins
  double strong_width_lo = 0.2, strong_width_hi = 0.5;
  double private_amp_lo = 0.03, private_amp_hi = 0.07;
  double private_width_lo = 1.5, private_width_hi = 3.0;

  static MaskProfile independent() { return {}; }
  static MaskProfile shared_hotspots() {
    MaskProfile p;
    p.kind = kSharedHotspots;
    return p;
  }
};

namespace detail {

inline void add_laplacian_lobe(Eigen::VectorXd& m, double center, double width,
                               double amp) {
  const int L = static_cast<int>(m.size());
  for (int j = 0; j < L; ++j) {
    double d = std::abs(j - center);
    d = std::min(d, L - d);  // the DFT grid wraps
    m(j) += amp * std::exp(-d / std::max(width, 1e-9));
  }
}

inline void normalize_mask(Eigen::VectorXd& m, int n_antennas) {
  m *= std::sqrt(static_cast<double>(n_antennas)) / m.norm();
}

}  // namespace detail

/// Sparse nonnegative angular mask: sum of n_clusters Laplacian lobes at
/// uniformly random grid centers, rescaled to ||m||^2 = N.
inline Eigen::VectorXd synthesize_angular_mask(Rng& rng, int n_clusters,
                                               const ArrayConfig& config) {
  if (n_clusters < 1) throw std::invalid_argument("synthesize_angular_mask: n_clusters >= 1");
  config.validate();
  const int L = config.grid_length();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(L);
  for (int c = 0; c < n_clusters; ++c) {
    double center = rng.uniform(0.0, L);
    double width = rng.uniform(0.3, 1.5) * L / 256.0;
    double amp = rng.uniform(0.5, 1.0);
    detail::add_laplacian_lobe(m, center, width, amp);
  }
  detail::normalize_mask(m, config.n_antennas);
  return m;
}

/// Masks for all K users under the chosen cross-user profile.
inline std::vector<Eigen::VectorXd> synthesize_mask_set(Rng& rng, int n_users,
                                                        int n_clusters,
                                                        const ArrayConfig& config,
                                                        const MaskProfile& profile) {
  config.validate();
  std::vector<Eigen::VectorXd> masks;
  masks.reserve(n_users);
  if (profile.kind == MaskProfile::kIndependent) {
    for (int k = 0; k < n_users; ++k)
      masks.push_back(synthesize_angular_mask(rng, n_clusters, config));
    return masks;
  }
  const int L = config.grid_length();
  const double min_sep = L / 8.0;
  std::vector<double> hotspots(profile.n_hotspots);
  for (int h = 0; h < profile.n_hotspots; ++h) {
    for (int tries = 0; tries < 64; ++tries) {
      double c = rng.uniform(0.0, L);
      bool ok = true;
      for (int j = 0; j < h; ++j) {
        double d = std::abs(c - hotspots[j]);
        d = std::min(d, L - d);
        if (d < min_sep) { ok = false; break; }
      }
      hotspots[h] = c;
      if (ok) break;
    }
  }
  const int n_strong = std::max(1, n_clusters - 1);
  for (int k = 0; k < n_users; ++k) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(L);
    for (int c = 0; c < n_strong; ++c) {
      double center = hotspots[rng.uniform_int(profile.n_hotspots)] +
                      rng.normal() * profile.hotspot_jitter;
      double width = rng.uniform(profile.strong_width_lo, profile.strong_width_hi) * L / 256.0;
      double amp = (c == 0) ? 1.0 : rng.uniform(0.5, 1.0);
      detail::add_laplacian_lobe(m, center, width, amp);
    }
    if (n_clusters > n_strong)
      detail::add_laplacian_lobe(m, rng.uniform(0.0, L),
                                 rng.uniform(profile.private_width_lo, profile.private_width_hi) * L / 256.0,
                                 rng.uniform(profile.private_amp_lo, profile.private_amp_hi));
    detail::normalize_mask(m, config.n_antennas);
    masks.push_back(std::move(m));
  }
  return masks;
}

/// Jointly correlated channel model in beamspace: grid V_D, per-user masks
/// m_k and aging coefficients (alpha_k, beta_k) with alpha^2 + beta^2 = 1.
struct AngularChannelModel {
  ArrayConfig array;
  Eigen::MatrixXcd dft_grid;           // N x F_vh N
  std::vector<Eigen::VectorXd> masks;  // K entries, each F_vh N
  Eigen::VectorXd alpha;               // K
  Eigen::VectorXd beta;                // K

  int n_users() const { return static_cast<int>(masks.size()); }

  static AngularChannelModel make(const ArrayConfig& array,
                                  std::vector<Eigen::VectorXd> masks,
                                  const Eigen::VectorXd& alpha) {
    AngularChannelModel m;
    m.array = array;
    m.dft_grid = build_dft_grid(array);
    m.masks = std::move(masks);
    m.alpha = alpha;
    m.beta = (1.0 - alpha.array().square()).max(0.0).sqrt();
    return m;
  }
};

/// Uplink-estimated channel draw: h_u = V_D^* (m ⊙ g0), g0 i.i.d. CN(0,1).
inline Eigen::VectorXcd sample_estimated_channel(const AngularChannelModel& model,
                                                 int user, Rng& rng) {
  const Eigen::VectorXd& m = model.masks.at(user);
  Eigen::VectorXcd g = rng.cnormal_vector(m.size());
  return model.dft_grid.conjugate() * (m.array() * g.array()).matrix();
}

/// True aged channel: h = alpha h_u + beta V_D^* (m ⊙ g), beta = sqrt(1-alpha^2).
inline Eigen::VectorXcd evolve_true_channel(const Eigen::MatrixXcd& dft_grid,
                                            const Eigen::VectorXd& mask,
                                            const Eigen::VectorXcd& h_u,
                                            double alpha, Rng& rng) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("evolve_true_channel: alpha must be in [0, 1]");
  double beta = std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
  Eigen::VectorXcd g = rng.cnormal_vector(mask.size());
  return alpha * h_u + beta * (dft_grid.conjugate() * (mask.array() * g.array()).matrix());
}

/// One per-user realization of the a posteriori model.
struct PosterioriRealization {
  std::vector<Eigen::VectorXcd> estimated;     // h_u
  std::vector<Eigen::VectorXcd> mean;          // alpha h_u
  std::vector<Eigen::VectorXcd> true_channel;  // h
  std::vector<Eigen::VectorXcd> innovation;    // g
};

inline PosterioriRealization draw_posteriori(const AngularChannelModel& model, Rng& rng) {
  PosterioriRealization r;
  const int K = model.n_users();
  r.estimated.resize(K);
  r.mean.resize(K);
  r.true_channel.resize(K);
  r.innovation.resize(K);
  for (int k = 0; k < K; ++k) {
    r.estimated[k] = sample_estimated_channel(model, k, rng);
    r.mean[k] = model.alpha(k) * r.estimated[k];
    Eigen::VectorXcd g = rng.cnormal_vector(model.masks[k].size());
    r.innovation[k] = g;
    r.true_channel[k] = r.mean[k] + model.beta(k) * (model.dft_grid.conjugate() *
                        (model.masks[k].array() * g.array()).matrix());
  }
  return r;
}

}  // namespace slp

#endif  // SLP_CHANNEL_MODEL_HPP
