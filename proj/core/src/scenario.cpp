#include "simcal/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "simcal/rng.hpp"

namespace simcal {

namespace {

using nlohmann::json;

constexpr double kPpb = 1e-9;
constexpr double kNs = 1e-9;

/// Walks one JSON object, tracking which keys have been consumed so unknown keys are
/// rejected with their full path.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_, "expected an object");
  }

  ~ObjectReader() = default;
  ObjectReader(const ObjectReader&) = delete;
  ObjectReader& operator=(const ObjectReader&) = delete;

  bool has(const std::string& key) const { return node_.contains(key); }

  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(child_path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(child_path(key), "must be finite");
    return x;
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(child_path(key), "expected an integer");
    return v.get<int>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(child_path(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(child_path(key), "expected a boolean");
    return v.get<bool>();
  }

  Bounds bounds(const std::string& key, Bounds fallback, double scale) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    const std::string p = child_path(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(p, "expected [lo, hi]");
    }
    Bounds b{v[0].get<double>() * scale, v[1].get<double>() * scale};
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi)) throw ConfigError(p, "bounds must be finite");
    if (b.lo > b.hi) throw ConfigError(p, "lo must not exceed hi");
    return b;
  }

  Vec3 vec3(const json& v, const std::string& p) const {
    if (!v.is_array() || (v.size() != 2 && v.size() != 3)) {
      throw ConfigError(p, "expected [x, y] or [x, y, z]");
    }
    Vec3 out{};
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(p, "coordinates must be numbers");
      out[i] = v[i].get<double>();
      if (!std::isfinite(out[i])) throw ConfigError(p, "coordinates must be finite");
    }
    return out;
  }

  Vec3 vec3(const std::string& key, Vec3 fallback) {
    if (!has(key)) return fallback;
    return vec3(raw(key), child_path(key));
  }

  std::vector<Vec3> vec3_list(const std::string& key) {
    if (!has(key)) return {};
    const json& v = raw(key);
    const std::string p = child_path(key);
    if (!v.is_array()) throw ConfigError(p, "expected a list of coordinates");
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(vec3(v[i], p + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  std::vector<double> number_list(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    const std::string p = child_path(key);
    if (!v.is_array()) throw ConfigError(p, "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(p + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) throw ConfigError(child_path(key), "unknown field");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

std::vector<Vec3> default_trp_layout() {
  // 200 m square: corners then edge midpoints.
  return {{-100, -100, 0}, {100, -100, 0}, {100, 100, 0}, {-100, 100, 0},
          {0, -100, 0},    {100, 0, 0},    {0, 100, 0},   {-100, 0, 0}};
}

json vec_to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

}  // namespace

ScenarioConfig table1_scenario() {
  ScenarioConfig cfg;
  cfg.geometry.trp_positions_m = default_trp_layout();
  cfg.geometry.ue_region_center_m = {0, 0, 0};
  cfg.geometry.ue_region_radius_m = 60.0;
  cfg.geometry.ue_speed_mps = {3.0, 4.0};
  cfg.pilots.cars_symbols = {0.0, 0.1, 1.0, 8.0, static_cast<double>(cfg.num_symbols - 1)};
  cfg.pilots.cars_turnaround_s = 1.0 / cfg.subcarrier_spacing_hz * (1.0 + 144.0 / 2048.0);
  cfg.pilots.sensing_symbols = cfg.num_symbols;
  cfg.pilots.tracking_patterns = 60;
  cfg.pilots.num_eval_subcarriers = 16;
  return cfg;
}

void validate(const ScenarioConfig& cfg) {
  if (cfg.num_subcarriers < 2) throw ValidationError("system.num_subcarriers: K must be >= 2");
  if (cfg.num_symbols < 2) throw ValidationError("system.num_symbols: L must be >= 2");
  if (cfg.num_trp < 1) throw ValidationError("geometry.trp_positions_m: at least one TRP required");
  if (cfg.num_ue < 1) throw ValidationError("geometry.num_ue: N must be >= 1");
  if (cfg.num_calib_ue < 1 || cfg.num_calib_ue > cfg.num_ue) {
    throw ValidationError("geometry.num_calib_ue: must lie in [1, num_ue]");
  }
  if (cfg.fft_size < 2) throw ValidationError("system.fft_size: must be >= 2");
  if (cfg.num_subcarriers > cfg.fft_size) {
    throw ValidationError("system.num_subcarriers: K exceeds fft_size");
  }
  if (static_cast<long>(cfg.num_subcarriers) * cfg.num_trp > cfg.fft_size) {
    throw ValidationError("system.num_subcarriers: K * num_trp exceeds fft_size (TRP comb does not fit)");
  }
  if (static_cast<long>(cfg.num_subcarriers) * cfg.num_ue > cfg.fft_size) {
    throw ValidationError("system.num_subcarriers: K * num_ue exceeds fft_size (SRS comb does not fit)");
  }
  if (cfg.carrier_freq_hz <= 0.0) throw ValidationError("system.carrier_freq_hz: must be positive");
  if (cfg.subcarrier_spacing_hz <= 0.0) throw ValidationError("system.subcarrier_spacing_hz: must be positive");
  if (cfg.symbol_interval_s <= 0.0) throw ValidationError("system.symbol_interval_s: must be positive");
  if (cfg.bandwidth_hz < cfg.subcarrier_spacing_hz) {
    throw ValidationError("system.bandwidth_hz: must cover at least one subcarrier");
  }
  if (!std::isfinite(cfg.tx_power_dbm)) throw ValidationError("system.tx_power_dbm: must be finite");
  if (cfg.rf_amp_sigma < 0.0) throw ValidationError("impairments.rf_amp_sigma: must be >= 0");
  if (cfg.rf_amp_min <= 0.0) throw ValidationError("impairments.rf_amp_min: must be > 0");
  if (static_cast<int>(cfg.geometry.trp_positions_m.size()) != cfg.num_trp) {
    throw ValidationError("geometry.trp_positions_m: count does not match num_trp");
  }
  if (!cfg.geometry.trp_velocities_mps.empty() &&
      cfg.geometry.trp_velocities_mps.size() != cfg.geometry.trp_positions_m.size()) {
    throw ValidationError("geometry.trp_velocities_mps: count does not match TRPs");
  }
  const auto& ue_pos = cfg.geometry.ue_positions_m;
  if (!ue_pos.empty() && static_cast<int>(ue_pos.size()) != cfg.num_ue) {
    throw ValidationError("geometry.ue_positions_m: count does not match num_ue");
  }
  if (!cfg.geometry.ue_velocities_mps.empty() && cfg.geometry.ue_velocities_mps.size() != ue_pos.size()) {
    throw ValidationError("geometry.ue_velocities_mps: requires explicit ue_positions_m of equal count");
  }
  if (ue_pos.empty() && cfg.geometry.ue_region_radius_m < 0.0) {
    throw ValidationError("geometry.ue_region.radius_m: must be >= 0");
  }
  if (cfg.geometry.ue_speed_mps.lo < 0.0) throw ValidationError("geometry.ue_speed_bounds_mps: must be >= 0");
  if (cfg.pilots.cars_symbols.empty()) throw ValidationError("pilots.cars_symbols: at least one round trip required");
  if (!std::is_sorted(cfg.pilots.cars_symbols.begin(), cfg.pilots.cars_symbols.end())) {
    throw ValidationError("pilots.cars_symbols: must be ascending");
  }
  if (cfg.pilots.cars_turnaround_s < 0.0) throw ValidationError("pilots.cars_turnaround_s: must be >= 0");
  if (cfg.pilots.sensing_symbols < 0) throw ValidationError("pilots.sensing_symbols: must be >= 0");
  if (cfg.pilots.tracking_patterns < 0) throw ValidationError("pilots.tracking_patterns: must be >= 0");
  if (cfg.pilots.num_eval_subcarriers < 1) throw ValidationError("pilots.num_eval_subcarriers: must be >= 1");
  if (cfg.drops < 1) throw ValidationError("run.drops: must be >= 1");
}

ScenarioConfig load_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("parse error: ") + e.what());
  }
  ObjectReader root(doc, "");
  ScenarioConfig cfg = table1_scenario();
  const ScenarioConfig defaults = cfg;

  if (root.has("system")) {
    ObjectReader s(root.raw("system"), "system");
    cfg.carrier_freq_hz = s.number("carrier_freq_hz", defaults.carrier_freq_hz);
    cfg.subcarrier_spacing_hz = s.number("subcarrier_spacing_hz", defaults.subcarrier_spacing_hz);
    cfg.fft_size = s.integer("fft_size", defaults.fft_size);
    cfg.num_symbols = s.integer("num_symbols", defaults.num_symbols);
    cfg.symbol_interval_s = s.number("symbol_interval_s", defaults.symbol_interval_s);
    cfg.cp_length = s.integer("cp_length", defaults.cp_length);
    cfg.bandwidth_hz = s.number("bandwidth_hz", defaults.bandwidth_hz);
    cfg.tx_power_dbm = s.number("tx_power_dbm", defaults.tx_power_dbm);
    cfg.noise_psd_dbm_hz = s.number("noise_psd_dbm_hz", defaults.noise_psd_dbm_hz);
    cfg.antennas_per_aau = s.integer("antennas_per_aau", defaults.antennas_per_aau);
    cfg.array_gain_db = s.number("array_gain_db", defaults.array_gain_db);
    cfg.noiseless = s.boolean("noiseless", defaults.noiseless);
    // K defaults to one TRP comb of the FFT; resolved after geometry fixes num_trp.
    cfg.num_subcarriers = s.integer("num_subcarriers", -1);
    s.finish();
  } else {
    cfg.num_subcarriers = -1;
  }

  if (root.has("impairments")) {
    ObjectReader im(root.raw("impairments"), "impairments");
    cfg.rf_amp_sigma = im.number("rf_amp_sigma", defaults.rf_amp_sigma);
    cfg.rf_amp_min = im.number("rf_amp_min", defaults.rf_amp_min);
    cfg.rf_phase_rad = im.bounds("rf_phase_bounds_rad", defaults.rf_phase_rad, 1.0);
    cfg.tau_s = im.bounds("tau_bounds_ns", {defaults.tau_s.lo / kNs, defaults.tau_s.hi / kNs}, kNs);
    cfg.e = im.bounds("e_bounds_ppb", {defaults.e.lo / kPpb, defaults.e.hi / kPpb}, kPpb);
    im.finish();
  }

  if (root.has("geometry")) {
    ObjectReader g(root.raw("geometry"), "geometry");
    if (g.has("trp_positions_m")) cfg.geometry.trp_positions_m = g.vec3_list("trp_positions_m");
    cfg.geometry.trp_velocities_mps = g.vec3_list("trp_velocities_mps");
    cfg.geometry.ue_positions_m = g.vec3_list("ue_positions_m");
    cfg.geometry.ue_velocities_mps = g.vec3_list("ue_velocities_mps");
    if (g.has("ue_region")) {
      ObjectReader r(g.raw("ue_region"), g.child_path("ue_region"));
      cfg.geometry.ue_region_center_m = r.vec3("center_m", defaults.geometry.ue_region_center_m);
      cfg.geometry.ue_region_radius_m = r.number("radius_m", defaults.geometry.ue_region_radius_m);
      r.finish();
    }
    cfg.geometry.ue_speed_mps = g.bounds("ue_speed_bounds_mps", defaults.geometry.ue_speed_mps, 1.0);
    const int explicit_ues = static_cast<int>(cfg.geometry.ue_positions_m.size());
    cfg.num_ue = g.integer("num_ue", explicit_ues > 0 ? explicit_ues : defaults.num_ue);
    cfg.num_calib_ue = g.integer("num_calib_ue", std::min(defaults.num_calib_ue, cfg.num_ue));
    if (g.has("scatterers")) {
      const json& list = g.raw("scatterers");
      const std::string p = g.child_path("scatterers");
      if (!list.is_array()) throw ConfigError(p, "expected a list");
      for (std::size_t i = 0; i < list.size(); ++i) {
        ObjectReader sc(list[i], p + "[" + std::to_string(i) + "]");
        Scatterer s;
        s.position_m = sc.vec3("position_m", {});
        s.velocity_mps = sc.vec3("velocity_mps", {});
        s.gain_db = sc.number("gain_db", s.gain_db);
        sc.finish();
        cfg.geometry.scatterers.push_back(s);
      }
    }
    g.finish();
  }
  cfg.num_trp = static_cast<int>(cfg.geometry.trp_positions_m.size());
  if (cfg.num_subcarriers < 0) cfg.num_subcarriers = cfg.num_trp > 0 ? cfg.fft_size / cfg.num_trp : cfg.fft_size;

  bool cars_given = false;
  if (root.has("pilots")) {
    ObjectReader p(root.raw("pilots"), "pilots");
    cars_given = p.has("cars_symbols");
    cfg.pilots.cars_symbols = p.number_list("cars_symbols", {});
    cfg.pilots.cars_turnaround_s = p.number("cars_turnaround_s", defaults.pilots.cars_turnaround_s);
    cfg.pilots.sensing_symbols = p.integer("sensing_symbols", cfg.num_symbols);
    cfg.pilots.tracking_patterns = p.integer("tracking_patterns", defaults.pilots.tracking_patterns);
    cfg.pilots.num_eval_subcarriers = p.integer("num_eval_subcarriers", defaults.pilots.num_eval_subcarriers);
    p.finish();
  } else {
    cfg.pilots.sensing_symbols = cfg.num_symbols;
  }
  if (!cars_given) {
    cfg.pilots.cars_symbols = {0.0, 0.1, 1.0, 8.0, static_cast<double>(cfg.num_symbols - 1)};
    cfg.pilots.cars_symbols.erase(
        std::unique(cfg.pilots.cars_symbols.begin(), cfg.pilots.cars_symbols.end()), cfg.pilots.cars_symbols.end());
    std::sort(cfg.pilots.cars_symbols.begin(), cfg.pilots.cars_symbols.end());
  }

  if (root.has("run")) {
    ObjectReader r(root.raw("run"), "run");
    cfg.seed = r.unsigned_integer("seed", 0);
    cfg.drops = r.integer("drops", 1);
    r.finish();
  }
  root.finish();

  validate(cfg);
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_scenario(buffer.str());
}

std::string dump_scenario(const ScenarioConfig& cfg) {
  json doc;
  doc["system"] = {
      {"carrier_freq_hz", cfg.carrier_freq_hz},
      {"subcarrier_spacing_hz", cfg.subcarrier_spacing_hz},
      {"num_subcarriers", cfg.num_subcarriers},
      {"num_symbols", cfg.num_symbols},
      {"symbol_interval_s", cfg.symbol_interval_s},
      {"fft_size", cfg.fft_size},
      {"cp_length", cfg.cp_length},
      {"bandwidth_hz", cfg.bandwidth_hz},
      {"tx_power_dbm", cfg.tx_power_dbm},
      {"noise_psd_dbm_hz", cfg.noise_psd_dbm_hz},
      {"antennas_per_aau", cfg.antennas_per_aau},
      {"array_gain_db", cfg.array_gain_db},
      {"noiseless", cfg.noiseless},
  };
  doc["impairments"] = {
      {"rf_amp_sigma", cfg.rf_amp_sigma},
      {"rf_amp_min", cfg.rf_amp_min},
      {"rf_phase_bounds_rad", {cfg.rf_phase_rad.lo, cfg.rf_phase_rad.hi}},
      {"tau_bounds_ns", {cfg.tau_s.lo / kNs, cfg.tau_s.hi / kNs}},
      {"e_bounds_ppb", {cfg.e.lo / kPpb, cfg.e.hi / kPpb}},
  };
  json geo;
  geo["trp_positions_m"] = json::array();
  for (const auto& p : cfg.geometry.trp_positions_m) geo["trp_positions_m"].push_back(vec_to_json(p));
  if (!cfg.geometry.trp_velocities_mps.empty()) {
    geo["trp_velocities_mps"] = json::array();
    for (const auto& v : cfg.geometry.trp_velocities_mps) geo["trp_velocities_mps"].push_back(vec_to_json(v));
  }
  if (!cfg.geometry.ue_positions_m.empty()) {
    geo["ue_positions_m"] = json::array();
    for (const auto& p : cfg.geometry.ue_positions_m) geo["ue_positions_m"].push_back(vec_to_json(p));
  }
  if (!cfg.geometry.ue_velocities_mps.empty()) {
    geo["ue_velocities_mps"] = json::array();
    for (const auto& v : cfg.geometry.ue_velocities_mps) geo["ue_velocities_mps"].push_back(vec_to_json(v));
  }
  geo["ue_region"] = {{"center_m", vec_to_json(cfg.geometry.ue_region_center_m)},
                      {"radius_m", cfg.geometry.ue_region_radius_m}};
  geo["ue_speed_bounds_mps"] = {cfg.geometry.ue_speed_mps.lo, cfg.geometry.ue_speed_mps.hi};
  geo["num_ue"] = cfg.num_ue;
  geo["num_calib_ue"] = cfg.num_calib_ue;
  if (!cfg.geometry.scatterers.empty()) {
    geo["scatterers"] = json::array();
    for (const auto& s : cfg.geometry.scatterers) {
      geo["scatterers"].push_back({{"position_m", vec_to_json(s.position_m)},
                                   {"velocity_mps", vec_to_json(s.velocity_mps)},
                                   {"gain_db", s.gain_db}});
    }
  }
  doc["geometry"] = geo;
  doc["pilots"] = {
      {"cars_symbols", cfg.pilots.cars_symbols},
      {"cars_turnaround_s", cfg.pilots.cars_turnaround_s},
      {"sensing_symbols", cfg.pilots.sensing_symbols},
      {"tracking_patterns", cfg.pilots.tracking_patterns},
      {"num_eval_subcarriers", cfg.pilots.num_eval_subcarriers},
  };
  doc["run"] = {{"seed", cfg.seed}, {"drops", cfg.drops}};
  return doc.dump(2);
}

ImpairmentMap draw_impairments(const ScenarioConfig& cfg, std::uint64_t drop) {
  Rng rng(cfg.seed, Stream::impairments, drop);
  auto draw_gain = [&]() {
    const double amp = std::max(cfg.rf_amp_min, rng.normal(1.0, cfg.rf_amp_sigma));
    const double phase = rng.uniform(cfg.rf_phase_rad.lo, cfg.rf_phase_rad.hi);
    return std::polar(amp, phase);
  };
  auto draw_node = [&]() {
    NodeImpairment node;
    node.beta_t = draw_gain();
    node.beta_r = draw_gain();
    node.tau_s = rng.uniform(cfg.tau_s.lo, cfg.tau_s.hi);
    node.e = rng.uniform(cfg.e.lo, cfg.e.hi);
    return node;
  };
  ImpairmentMap map;
  map.trp.reserve(cfg.num_trp);
  map.ue.reserve(cfg.num_ue);
  for (int m = 0; m < cfg.num_trp; ++m) map.trp.push_back(draw_node());
  for (int n = 0; n < cfg.num_ue; ++n) map.ue.push_back(draw_node());
  return map;
}

DropGeometry draw_geometry(const ScenarioConfig& cfg, std::uint64_t drop) {
  DropGeometry out;
  out.trp_positions_m = cfg.geometry.trp_positions_m;
  out.trp_velocities_mps = cfg.geometry.trp_velocities_mps;
  if (out.trp_velocities_mps.empty()) out.trp_velocities_mps.assign(out.trp_positions_m.size(), Vec3{});

  if (!cfg.geometry.ue_positions_m.empty()) {
    out.ue_positions_m = cfg.geometry.ue_positions_m;
    out.ue_velocities_mps = cfg.geometry.ue_velocities_mps;
    if (out.ue_velocities_mps.empty()) out.ue_velocities_mps.assign(out.ue_positions_m.size(), Vec3{});
    return out;
  }

  Rng rng(cfg.seed, Stream::geometry, drop);
  const Vec3& c = cfg.geometry.ue_region_center_m;
  for (int n = 0; n < cfg.num_ue; ++n) {
    const double r = cfg.geometry.ue_region_radius_m * std::sqrt(rng.uniform01());
    const double angle = rng.uniform(-kPi, kPi);
    const double speed = rng.uniform(cfg.geometry.ue_speed_mps.lo, cfg.geometry.ue_speed_mps.hi);
    const double heading = rng.uniform(-kPi, kPi);
    out.ue_positions_m.push_back({c[0] + r * std::cos(angle), c[1] + r * std::sin(angle), c[2]});
    out.ue_velocities_mps.push_back({speed * std::cos(heading), speed * std::sin(heading), 0.0});
  }
  (void)norm;
  return out;
}

}  // namespace simcal
