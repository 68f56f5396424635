#ifndef SLP_CONFIG_HPP
#define SLP_CONFIG_HPP

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slp/sim.hpp"

namespace slp {

/// Configuration errors carry the offending section/key and the expected
/// type so the CLI can print a one-line diagnostic (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

struct IniData {
  // section -> key -> value (trimmed strings)
  std::map<std::string, std::map<std::string, std::string>> sections;
};

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline IniData parse_ini(std::istream& is) {
  IniData ini;
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      ini.sections[section];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside any [section]");
    ini.sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return ini;
}

class IniReader {
 public:
  explicit IniReader(IniData data) : data_(std::move(data)) {}

  void require_section(const std::string& name) const {
    if (!data_.sections.count(name))
      throw ConfigError("config: missing required section [" + name + "]");
  }
  bool has(const std::string& sec, const std::string& key) const {
    auto it = data_.sections.find(sec);
    return it != data_.sections.end() && it->second.count(key);
  }
  std::string raw(const std::string& sec, const std::string& key) const {
    return data_.sections.at(sec).at(key);
  }

  double number(const std::string& sec, const std::string& key, double fallback) const {
    if (!has(sec, key)) return fallback;
    try {
      size_t pos = 0;
      double v = std::stod(raw(sec, key), &pos);
      if (pos != raw(sec, key).size()) throw std::invalid_argument("trailing");
      return v;
    } catch (...) {
      throw ConfigError("config: [" + sec + "] " + key + ": expected a number, got \"" +
                        raw(sec, key) + "\"");
    }
  }
  long integer(const std::string& sec, const std::string& key, long fallback) const {
    double v = number(sec, key, static_cast<double>(fallback));
    long n = static_cast<long>(v);
    if (static_cast<double>(n) != v)
      throw ConfigError("config: [" + sec + "] " + key + ": expected an integer");
    return n;
  }
  bool boolean(const std::string& sec, const std::string& key, bool fallback) const {
    if (!has(sec, key)) return fallback;
    std::string v = raw(sec, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: [" + sec + "] " + key + ": expected a boolean (true/false)");
  }
  std::string text(const std::string& sec, const std::string& key,
                   const std::string& fallback) const {
    return has(sec, key) ? raw(sec, key) : fallback;
  }

  /// Number list: either comma-separated values or a start:step:stop range.
  std::vector<double> number_list(const std::string& sec, const std::string& key,
                                  std::vector<double> fallback) const {
    if (!has(sec, key)) return fallback;
    const std::string v = raw(sec, key);
    std::vector<double> out;
    try {
      if (v.find(':') != std::string::npos) {
        std::istringstream ss(v);
        std::string a, b, c;
        std::getline(ss, a, ':');
        std::getline(ss, b, ':');
        std::getline(ss, c, ':');
        double start = std::stod(a), step = std::stod(b), stop = std::stod(c);
        if (step <= 0.0) throw std::invalid_argument("step");
        for (double x = start; x <= stop + 1e-12; x += step) out.push_back(x);
      } else {
        std::istringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
          item = trim(item);
          if (!item.empty()) out.push_back(std::stod(item));
        }
      }
    } catch (...) {
      throw ConfigError("config: [" + sec + "] " + key +
                        ": expected numbers (a,b,c or start:step:stop), got \"" + v + "\"");
    }
    if (out.empty())
      throw ConfigError("config: [" + sec + "] " + key + ": empty list");
    return out;
  }

  const IniData& data() const { return data_; }

 private:
  IniData data_;
};

}  // namespace detail

/// Paper-scale presets selectable from the CLI.
inline SweepConfig ula14_preset() {
  SweepConfig cfg;
  cfg.array = ArrayConfig::ula(14, 1);
  cfg.n_users = 12;
  cfg.modulation = 8;
  cfg.n_clusters = 3;
  cfg.mask_profile = MaskProfile::independent();
  cfg.snr_grid_db = {0, 5, 10, 15, 20, 25, 30, 35, 40};
  cfg.alpha_grid = {0.995};
  cfg.symbols_per_slot = 10;
  cfg.mask_epoch_slots = 200;
  cfg.schemes = {Scheme::kZf, Scheme::kMmse, Scheme::kCisb, Scheme::kCimmse,
                 Scheme::kCisbR, Scheme::kCimmseR};
  return cfg;
}

inline SweepConfig upa64_preset() {
  SweepConfig cfg;
  cfg.array = ArrayConfig::upa(4, 8, 4, true);  // N = 64, F_vh = 4
  cfg.n_users = 9;
  cfg.modulation = 8;
  cfg.n_clusters = 3;
  cfg.mask_profile = MaskProfile::shared_hotspots();
  cfg.snr_grid_db = {0, 5, 10, 15, 20, 25, 30, 35, 40};
  cfg.alpha_grid = {0.95};
  cfg.symbols_per_slot = 10;
  cfg.mask_epoch_slots = 200;
  cfg.schemes = {Scheme::kCisb, Scheme::kCimmse, Scheme::kCisbR, Scheme::kCimmseR,
                 Scheme::kCisbRlc, Scheme::kCimmseRlc};
  return cfg;
}

/// Parse a sweep configuration. Sections: [array], [users], [sweep],
/// [schemes], [budget]. `base` supplies defaults (normally a preset or a
/// default-constructed config).
inline SweepConfig parse_config(std::istream& is, SweepConfig base = {}) {
  detail::IniReader ini(detail::parse_ini(is));
  for (const auto& [sec, kv] : ini.data().sections) {
    if (sec != "array" && sec != "users" && sec != "sweep" && sec != "schemes" &&
        sec != "budget" && sec != "solver")
      throw ConfigError("config: unknown section [" + sec + "]");
  }
  ini.require_section("array");
  ini.require_section("users");
  ini.require_section("sweep");
  ini.require_section("schemes");

  SweepConfig cfg = base;

  std::string geom = ini.text("array", "geometry", cfg.array.geometry == ArrayGeometry::kUpa ? "upa" : "ula");
  int fine = static_cast<int>(ini.integer("array", "fine_factor", cfg.array.fine_factor));
  if (geom == "ula") {
    int n = static_cast<int>(ini.integer("array", "n_antennas", cfg.array.n_antennas));
    cfg.array = ArrayConfig::ula(n, fine);
  } else if (geom == "upa") {
    int nv = static_cast<int>(ini.integer("array", "n_v", cfg.array.n_v));
    int nh = static_cast<int>(ini.integer("array", "n_h", cfg.array.n_h));
    bool dual = ini.boolean("array", "dual_polarized", cfg.array.dual_polarized);
    cfg.array = ArrayConfig::upa(nv, nh, fine, dual);
  } else {
    throw ConfigError("config: [array] geometry: expected \"ula\" or \"upa\"");
  }

  cfg.n_users = static_cast<int>(ini.integer("users", "count", cfg.n_users));
  cfg.n_clusters = static_cast<int>(ini.integer("users", "n_clusters", cfg.n_clusters));
  std::string profile = ini.text("users", "mask_profile",
      cfg.mask_profile.kind == MaskProfile::kSharedHotspots ? "shared-hotspots" : "independent");
  if (profile == "independent")
    cfg.mask_profile = MaskProfile::independent();
  else if (profile == "shared-hotspots")
    cfg.mask_profile = MaskProfile::shared_hotspots();
  else
    throw ConfigError("config: [users] mask_profile: expected \"independent\" or \"shared-hotspots\"");
  cfg.mobility.speed_mps = ini.number("users", "speed_mps", cfg.mobility.speed_mps);
  cfg.mobility.carrier_hz = ini.number("users", "carrier_hz", cfg.mobility.carrier_hz);
  cfg.mobility.symbol_duration_s =
      ini.number("users", "symbol_duration_s", cfg.mobility.symbol_duration_s);

  cfg.snr_grid_db = ini.number_list("sweep", "snr_db", cfg.snr_grid_db);
  cfg.alpha_grid = ini.number_list("sweep", "alpha", cfg.alpha_grid);
  cfg.modulation = static_cast<int>(ini.integer("sweep", "modulation", cfg.modulation));
  cfg.n_slots = static_cast<int>(ini.integer("sweep", "n_slots", cfg.n_slots));
  cfg.symbols_per_slot =
      static_cast<int>(ini.integer("sweep", "symbols_per_slot", cfg.symbols_per_slot));
  cfg.mask_epoch_slots =
      static_cast<int>(ini.integer("sweep", "mask_epoch_slots", cfg.mask_epoch_slots));
  std::string aging = ini.text("sweep", "aging", cfg.aging_mode == AgingMode::kIntraSlot ? "intra-slot" : "fixed-alpha");
  if (aging == "fixed-alpha")
    cfg.aging_mode = AgingMode::kFixedAlpha;
  else if (aging == "intra-slot")
    cfg.aging_mode = AgingMode::kIntraSlot;
  else
    throw ConfigError("config: [sweep] aging: expected \"fixed-alpha\" or \"intra-slot\"");

  if (ini.has("schemes", "list")) {
    cfg.schemes.clear();
    std::istringstream ss(ini.raw("schemes", "list"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      auto s = parse_scheme(item);
      if (!s)
        throw ConfigError("config: [schemes] list: unknown scheme \"" + item + "\"");
      cfg.schemes.push_back(*s);
    }
  }

  cfg.budget.max_symbols = ini.integer("budget", "max_symbols", cfg.budget.max_symbols);
  cfg.budget.target_errors =
      static_cast<int>(ini.integer("budget", "target_errors", cfg.budget.target_errors));

  cfg.maxmin.inner_tol = ini.number("solver", "maxmin_inner_tol", cfg.maxmin.inner_tol);
  cfg.maxmin.outer_tol = ini.number("solver", "maxmin_outer_tol", cfg.maxmin.outer_tol);
  cfg.maxmin.max_outer =
      static_cast<int>(ini.integer("solver", "maxmin_max_outer", cfg.maxmin.max_outer));
  cfg.mmse.max_iter = static_cast<int>(ini.integer("solver", "mmse_max_iter", cfg.mmse.max_iter));
  cfg.mmse.rel_tol = ini.number("solver", "mmse_rel_tol", cfg.mmse.rel_tol);

  cfg.validate();
  return cfg;
}

inline SweepConfig parse_config_file(const std::string& path, SweepConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open \"" + path + "\"");
  return parse_config(f, std::move(base));
}

/// Canonical serialization; the run-manifest hash covers exactly this string,
/// so any numerics-affecting field change produces a new hash.
inline std::string canonical_config(const SweepConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "geometry=" << (cfg.array.geometry == ArrayGeometry::kUpa ? "upa" : "ula")
     << ";n=" << cfg.array.n_antennas << ";fine=" << cfg.array.fine_factor
     << ";nv=" << cfg.array.n_v << ";nh=" << cfg.array.n_h
     << ";dual=" << cfg.array.dual_polarized << ";k=" << cfg.n_users
     << ";mod=" << cfg.modulation << ";clusters=" << cfg.n_clusters
     << ";profile=" << static_cast<int>(cfg.mask_profile.kind)
     << ";hot=" << cfg.mask_profile.n_hotspots << ";jit=" << cfg.mask_profile.hotspot_jitter
     << ";sw=" << cfg.mask_profile.strong_width_lo << "," << cfg.mask_profile.strong_width_hi
     << ";pa=" << cfg.mask_profile.private_amp_lo << "," << cfg.mask_profile.private_amp_hi
     << ";pw=" << cfg.mask_profile.private_width_lo << "," << cfg.mask_profile.private_width_hi
     << ";snr=";
  for (double v : cfg.snr_grid_db) os << v << ",";
  os << ";alpha=";
  for (double v : cfg.alpha_grid) os << v << ",";
  os << ";slots=" << cfg.n_slots << ";sps=" << cfg.symbols_per_slot
     << ";epoch=" << cfg.mask_epoch_slots << ";schemes=";
  for (Scheme s : cfg.schemes) os << scheme_name(s) << ",";
  os << ";seed=" << cfg.seed << ";aging=" << static_cast<int>(cfg.aging_mode)
     << ";speed=" << cfg.mobility.speed_mps << ";fc=" << cfg.mobility.carrier_hz
     << ";T=" << cfg.mobility.symbol_duration_s
     << ";maxsym=" << cfg.budget.max_symbols << ";targerr=" << cfg.budget.target_errors
     << ";itol=" << cfg.maxmin.inner_tol << ";otol=" << cfg.maxmin.outer_tol
     << ";mout=" << cfg.maxmin.max_outer << ";mmi=" << cfg.mmse.max_iter
     << ";mmt=" << cfg.mmse.rel_tol;
  return os.str();
}

inline std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace slp

#endif  // SLP_CONFIG_HPP
