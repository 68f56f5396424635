#ifndef SLP_REPORT_HPP
#define SLP_REPORT_HPP

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "slp/config.hpp"
#include "slp/sim.hpp"

namespace slp {

inline void emit_csv(const std::vector<MetricsRecord>& records, std::ostream& os) {
  os << "scheme,snr_db,alpha,ser,ser_ci,mse,gamma_min_db,n_symbols\n";
  os.precision(12);
  for (const MetricsRecord& r : records) {
    os << r.scheme << ',' << r.snr_db << ',' << r.alpha << ',' << r.ser << ',' << r.ser_ci
       << ',' << r.mse << ',' << r.gamma_min_db << ',' << r.n_symbols << '\n';
  }
}

inline std::vector<MetricsRecord> parse_csv(std::istream& is) {
  std::vector<MetricsRecord> out;
  std::string line;
  if (!std::getline(is, line)) return out;
  if (line != "scheme,snr_db,alpha,ser,ser_ci,mse,gamma_min_db,n_symbols")
    throw std::runtime_error("parse_csv: unexpected header: " + line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    MetricsRecord r;
    std::string field;
    std::getline(ss, r.scheme, ',');
    auto num = [&]() {
      std::getline(ss, field, ',');
      return std::stod(field);
    };
    r.snr_db = num();
    r.alpha = num();
    r.ser = num();
    r.ser_ci = num();
    r.mse = num();
    r.gamma_min_db = num();
    r.n_symbols = static_cast<long>(num());
    out.push_back(std::move(r));
  }
  return out;
}

/// Real vectors, one per row.
inline void save_vectors_csv(const std::vector<Eigen::VectorXd>& vectors, std::ostream& os) {
  os.precision(17);
  for (const auto& v : vectors) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v(i);
    os << '\n';
  }
}

inline std::vector<Eigen::VectorXd> load_vectors_csv(std::istream& is) {
  std::vector<Eigen::VectorXd> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<double> vals;
    std::string f;
    while (std::getline(ss, f, ',')) vals.push_back(std::stod(f));
    out.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size()));
  }
  return out;
}

/// Complex matrix, one row per matrix row, entries as re,im pairs.
inline void save_complex_matrix_csv(const Eigen::MatrixXcd& m, std::ostream& os) {
  os.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << (j ? "," : "") << m(i, j).real() << ',' << m(i, j).imag();
    os << '\n';
  }
}

inline Eigen::MatrixXcd load_complex_matrix_csv(std::istream& is) {
  std::vector<std::vector<cd>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<double> vals;
    std::string f;
    while (std::getline(ss, f, ',')) vals.push_back(std::stod(f));
    if (vals.size() % 2 != 0) throw std::runtime_error("complex csv: odd value count");
    std::vector<cd> row;
    for (size_t j = 0; j + 1 < vals.size(); j += 2) row.emplace_back(vals[j], vals[j + 1]);
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXcd m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

/// Provenance record written next to every sweep output.
struct RunManifest {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string timestamp;
  std::vector<std::string> outputs;

  static RunManifest make(const SweepConfig& cfg, std::vector<std::string> outputs,
                          const std::string& version) {
    RunManifest m;
    m.config_hash = fnv1a_hash(canonical_config(cfg) + ";seed=" + std::to_string(cfg.seed));
    m.seed = cfg.seed;
    m.tool_version = version;
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&now), "%FT%TZ");
    m.timestamp = ts.str();
    m.outputs = std::move(outputs);
    return m;
  }

  std::string to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["tool_version"] = tool_version;
    j["timestamp"] = timestamp;
    j["outputs"] = outputs;
    return j.dump(2);
  }
};

/// Companion plot script (matplotlib) reproducing the standard figure
/// layouts: SER/MSE/Gamma_min versus SNR, and versus alpha when the sweep
/// has more than one alpha point.
inline std::string plot_script_text() {
  return R"PY(#!/usr/bin/env python3
"""Plot metrics.csv produced by slpsim sweep."""
import csv
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "metrics.csv"
rows = list(csv.DictReader(open(path)))
for r in rows:
    for k in ("snr_db", "alpha", "ser", "ser_ci", "mse", "gamma_min_db"):
        r[k] = float(r[k])

alphas = sorted({r["alpha"] for r in rows})
snrs = sorted({r["snr_db"] for r in rows})
schemes = sorted({r["scheme"] for r in rows})

def series(metric, fixed_alpha):
    out = defaultdict(list)
    for r in rows:
        if r["alpha"] == fixed_alpha:
            out[r["scheme"]].append((r["snr_db"], r[metric]))
    return {s: sorted(v) for s, v in out.items()}

a0 = alphas[0]
for metric, ylabel, logy in (("ser", "SER", True), ("mse", "MSE", True),
                             ("gamma_min_db", "Gamma_min [dB]", False)):
    plt.figure(figsize=(6, 4.5))
    for s, pts in series(metric, a0).items():
        plt.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=s)
    if logy:
        plt.yscale("log")
    plt.xlabel("SNR [dB]")
    plt.ylabel(ylabel)
    plt.grid(True, which="both", alpha=0.3)
    plt.legend()
    plt.title(f"{ylabel} vs SNR (alpha={a0})")
    plt.tight_layout()
    plt.savefig(f"{metric}_vs_snr.png", dpi=150)

if len(alphas) > 1:
    s0 = snrs[-1]
    for metric, ylabel, logy in (("ser", "SER", True), ("mse", "MSE", True),
                                 ("gamma_min_db", "Gamma_min [dB]", False)):
        plt.figure(figsize=(6, 4.5))
        by = defaultdict(list)
        for r in rows:
            if r["snr_db"] == s0:
                by[r["scheme"]].append((r["alpha"], r[metric]))
        for s, pts in by.items():
            pts.sort()
            plt.plot([p[0] for p in pts], [p[1] for p in pts], marker="s", label=s)
        if logy:
            plt.yscale("log")
        plt.xlabel("alpha")
        plt.ylabel(ylabel)
        plt.grid(True, which="both", alpha=0.3)
        plt.legend()
        plt.title(f"{ylabel} vs alpha (SNR={s0} dB)")
        plt.tight_layout()
        plt.savefig(f"{metric}_vs_alpha.png", dpi=150)
print("plots written")
)PY";
}

}  // namespace slp

#endif  // SLP_REPORT_HPP
