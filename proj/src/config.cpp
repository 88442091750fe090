#include "cfsim/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cfsim {

using nlohmann::json;

std::string DetectorSpec::name() const {
  switch (kind) {
    case Kind::kMrc: return "mrc";
    case Kind::kZfDf: return "zf_df";
    case Kind::kMmseSic: return "mmse_sic";
    case Kind::kPm: return "pm";
    case Kind::kExactMl: return "exact_ml";
    case Kind::kCPm: return "c_pm";
  }
  return "?";
}

std::string DetectorSpec::id() const {
  if (kind == Kind::kPm || kind == Kind::kCPm) {
    return name() + "(" + std::to_string(r) + ")";
  }
  return name();
}

DetectorSpec DetectorSpec::parse(const std::string& s) {
  auto strip = [](std::string v) {
    const auto b = v.find_first_not_of(" \t");
    const auto e = v.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
  };
  std::string text = strip(s);
  std::string base = text;
  int r = 0;
  const auto open = text.find('(');
  if (open != std::string::npos) {
    if (text.back() != ')') {
      throw ConfigError("bad detector spec '" + s + "'");
    }
    base = strip(text.substr(0, open));
    const std::string arg = text.substr(open + 1, text.size() - open - 2);
    try {
      std::size_t pos = 0;
      r = std::stoi(arg, &pos);
      if (pos != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
      throw ConfigError("bad detector parameter in '" + s + "'");
    }
  }
  DetectorSpec spec;
  spec.r = r;
  if (base == "mrc") spec.kind = Kind::kMrc;
  else if (base == "zf_df") spec.kind = Kind::kZfDf;
  else if (base == "mmse_sic") spec.kind = Kind::kMmseSic;
  else if (base == "exact_ml") spec.kind = Kind::kExactMl;
  else if (base == "pm") spec.kind = Kind::kPm;
  else if (base == "c_pm") spec.kind = Kind::kCPm;
  else throw ConfigError("unknown detector '" + s + "'");
  const bool takes_r = spec.kind == Kind::kPm || spec.kind == Kind::kCPm;
  if (takes_r && open == std::string::npos) {
    throw ConfigError("detector '" + base + "' needs a parameter, e.g. " +
                      base + "(4)");
  }
  if (!takes_r && open != std::string::npos) {
    throw ConfigError("detector '" + base + "' takes no parameter");
  }
  if (r < 0) throw ConfigError("detector parameter r must be >= 0");
  return spec;
}

std::vector<DetectorSpec> DetectorSpec::parse_list(
    const std::string& comma_list) {
  std::vector<DetectorSpec> specs;
  std::stringstream ss(comma_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    specs.push_back(parse(item));
  }
  return specs;
}

double SimConfig::sigma2_w() const {
  if (sigma2_w_override_w >= 0.0) return sigma2_w_override_w;
  Deployment dep;
  dep.bandwidth_hz = bandwidth_hz;
  dep.noise_figure_db = noise_figure_db;
  dep.noise_psd_dbm_hz = noise_psd_dbm_hz;
  return dep.noise_power_w();
}

FpcParams SimConfig::fpc_params() const {
  FpcParams p;
  p.p_max_w = mw_to_watts(p_max_mw);
  p.p0_w = mw_to_watts(db_to_linear(p0_dbmw));
  p.kappa = kappa;
  return p;
}

void SimConfig::validate() const {
  if (m_aps < 1 || k_users < 1 || n_ap_antennas < 1) {
    throw ConfigError("need M >= 1, K >= 1, N_AP >= 1");
  }
  if (side_m <= 0.0) throw ConfigError("side_m must be > 0");
  if (bandwidth_hz <= 0.0) throw ConfigError("bandwidth_hz must be > 0");
  if (tau_p < 1) throw ConfigError("tau_p must be >= 1");
  if (p_tilde_mw <= 0.0) throw ConfigError("p_tilde_mw must be > 0");
  if (n_serve.empty()) throw ConfigError("N list must not be empty");
  for (int n : n_serve) {
    if (n < 1 || n > k_users) throw ConfigError("N values must be in [1, K]");
  }
  if (p_max_mw <= 0.0) throw ConfigError("P_max_mw must be > 0");
  if (kappa < 0.0) throw ConfigError("kappa must be >= 0");
  if (snr_points_db.empty()) throw ConfigError("snr_points_db must not be empty");
  if (target_frame_errors < 1) {
    throw ConfigError("target_frame_errors must be >= 1");
  }
  if (max_frames < 1) throw ConfigError("max_frames must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (drops < 1) throw ConfigError("drops must be >= 1");
  code.validate();
  if (code.coded_bits() % 2 != 0) {
    throw ConfigError("coded frame length must be even for QPSK mapping");
  }
  for (const DetectorSpec& d : detectors) {
    if (d.kind == DetectorSpec::Kind::kExactMl &&
        2 * *std::max_element(n_serve.begin(), n_serve.end()) >
            exact_ml_cap_bits) {
      throw ConfigError("exact_ml exceeds the enumeration cap at the largest "
                        "configured N; use pm(r)");
    }
  }
}

SimConfig SimConfig::defaults() {
  SimConfig cfg;
  cfg.code = CodeConfig::make(100, 7, {"133", "171", "165"});
  cfg.detectors = DetectorSpec::parse_list(
      "mrc, zf_df, mmse_sic, pm(2), pm(4), c_pm(4)");
  return cfg;
}

namespace {

void check_keys(const json& obj, const std::string& section,
                const std::set<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw ConfigError("unknown config key '" + section + "." + item.key() +
                        "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + std::string(key) +
                        "': " + e.what());
    }
  }
}

}  // namespace

SimConfig SimConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  check_keys(root, "",
             {"geometry", "pilots", "power", "code", "sweep", "overrides",
              "derived"});

  SimConfig cfg = defaults();

  if (root.contains("geometry")) {
    const json& g = root["geometry"];
    check_keys(g, "geometry",
               {"side_m", "M", "K", "N_AP", "carrier_hz", "bandwidth_hz",
                "noise_figure_db", "noise_psd_dbm_hz", "path_loss_a_db",
                "path_loss_b_db", "d_min_m", "shadow_sigma_db",
                "shadow_corr_distance_m"});
    read(g, "side_m", cfg.side_m);
    read(g, "M", cfg.m_aps);
    read(g, "K", cfg.k_users);
    read(g, "N_AP", cfg.n_ap_antennas);
    read(g, "carrier_hz", cfg.carrier_hz);
    read(g, "bandwidth_hz", cfg.bandwidth_hz);
    read(g, "noise_figure_db", cfg.noise_figure_db);
    read(g, "noise_psd_dbm_hz", cfg.noise_psd_dbm_hz);
    read(g, "path_loss_a_db", cfg.path_loss.a_db);
    read(g, "path_loss_b_db", cfg.path_loss.b_db);
    read(g, "d_min_m", cfg.path_loss.d_min_m);
    read(g, "shadow_sigma_db", cfg.shadowing.sigma_db);
    read(g, "shadow_corr_distance_m", cfg.shadowing.corr_distance_m);
  }
  if (root.contains("pilots")) {
    const json& p = root["pilots"];
    check_keys(p, "pilots", {"tau_p", "p_tilde_mw", "policy"});
    read(p, "tau_p", cfg.tau_p);
    read(p, "p_tilde_mw", cfg.p_tilde_mw);
    if (p.contains("policy")) {
      const std::string policy = p.at("policy").get<std::string>();
      if (policy == "round_robin") cfg.pilot_policy = PilotPolicy::kRoundRobin;
      else if (policy == "random") cfg.pilot_policy = PilotPolicy::kRandom;
      else throw ConfigError("unknown pilot policy '" + policy + "'");
    }
  }
  if (root.contains("power")) {
    const json& p = root["power"];
    check_keys(p, "power", {"N", "P_max_mw", "P0_dbmw", "kappa"});
    read(p, "N", cfg.n_serve);
    read(p, "P_max_mw", cfg.p_max_mw);
    read(p, "P0_dbmw", cfg.p0_dbmw);
    read(p, "kappa", cfg.kappa);
  }
  if (root.contains("code")) {
    const json& c = root["code"];
    check_keys(c, "code",
               {"info_block_bits", "constraint_length", "generators_octal",
                "zero_tail"});
    int info = cfg.code.info_block_bits;
    int constraint = cfg.code.constraint_length;
    bool zero_tail = cfg.code.zero_tail;
    std::vector<std::string> gens = {"133", "171", "165"};
    read(c, "info_block_bits", info);
    read(c, "constraint_length", constraint);
    read(c, "generators_octal", gens);
    read(c, "zero_tail", zero_tail);
    cfg.code = CodeConfig::make(info, constraint, gens, zero_tail);
  }
  if (root.contains("sweep")) {
    const json& s = root["sweep"];
    check_keys(s, "sweep",
               {"snr_points_db", "target_frame_errors", "max_frames", "seed",
                "detectors", "threads", "drops", "probe_user_center",
                "per_user_fer", "csv_wall_seconds"});
    read(s, "snr_points_db", cfg.snr_points_db);
    read(s, "target_frame_errors", cfg.target_frame_errors);
    read(s, "max_frames", cfg.max_frames);
    read(s, "seed", cfg.seed);
    if (s.contains("detectors")) {
      cfg.detectors.clear();
      for (const json& d : s.at("detectors")) {
        cfg.detectors.push_back(DetectorSpec::parse(d.get<std::string>()));
      }
    }
    read(s, "threads", cfg.threads);
    read(s, "drops", cfg.drops);
    read(s, "probe_user_center", cfg.probe_user_center);
    read(s, "per_user_fer", cfg.per_user_fer);
    read(s, "csv_wall_seconds", cfg.csv_wall_seconds);
  }
  if (root.contains("overrides")) {
    const json& o = root["overrides"];
    check_keys(o, "overrides",
               {"sigma2_w_w", "perfect_csi", "exact_ml_cap_bits"});
    if (o.contains("sigma2_w_w") && !o.at("sigma2_w_w").is_null()) {
      cfg.sigma2_w_override_w = o.at("sigma2_w_w").get<double>();
    }
    read(o, "perfect_csi", cfg.perfect_csi);
    read(o, "exact_ml_cap_bits", cfg.exact_ml_cap_bits);
  }

  cfg.validate();
  return cfg;
}

SimConfig SimConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string SimConfig::to_json() const {
  json root;
  json& g = root["geometry"];
  g["side_m"] = side_m;
  g["M"] = m_aps;
  g["K"] = k_users;
  g["N_AP"] = n_ap_antennas;
  g["carrier_hz"] = carrier_hz;
  g["bandwidth_hz"] = bandwidth_hz;
  g["noise_figure_db"] = noise_figure_db;
  g["noise_psd_dbm_hz"] = noise_psd_dbm_hz;
  g["path_loss_a_db"] = path_loss.a_db;
  g["path_loss_b_db"] = path_loss.b_db;
  g["d_min_m"] = path_loss.d_min_m;
  g["shadow_sigma_db"] = shadowing.sigma_db;
  g["shadow_corr_distance_m"] = shadowing.corr_distance_m;

  json& p = root["pilots"];
  p["tau_p"] = tau_p;
  p["p_tilde_mw"] = p_tilde_mw;
  p["policy"] =
      pilot_policy == PilotPolicy::kRoundRobin ? "round_robin" : "random";

  json& w = root["power"];
  w["N"] = n_serve;
  w["P_max_mw"] = p_max_mw;
  w["P0_dbmw"] = p0_dbmw;
  w["kappa"] = kappa;

  json& c = root["code"];
  c["info_block_bits"] = code.info_block_bits;
  c["constraint_length"] = code.constraint_length;
  std::vector<std::string> gens;
  for (std::uint32_t gmask : code.generators) {
    std::string oct;
    std::uint32_t v = gmask;
    do {
      oct.insert(oct.begin(), static_cast<char>('0' + (v & 7u)));
      v >>= 3;
    } while (v != 0);
    gens.push_back(oct);
  }
  c["generators_octal"] = gens;
  c["zero_tail"] = code.zero_tail;

  json& s = root["sweep"];
  s["snr_points_db"] = snr_points_db;
  s["target_frame_errors"] = target_frame_errors;
  s["max_frames"] = max_frames;
  s["seed"] = seed;
  std::vector<std::string> det;
  for (const DetectorSpec& d : detectors) det.push_back(d.id());
  s["detectors"] = det;
  s["threads"] = threads;
  s["drops"] = drops;
  s["probe_user_center"] = probe_user_center;
  s["per_user_fer"] = per_user_fer;
  s["csv_wall_seconds"] = csv_wall_seconds;

  json& o = root["overrides"];
  if (sigma2_w_override_w >= 0.0) o["sigma2_w_w"] = sigma2_w_override_w;
  o["perfect_csi"] = perfect_csi;
  o["exact_ml_cap_bits"] = exact_ml_cap_bits;

  json& d = root["derived"];
  d["sigma2_w_w"] = sigma2_w();
  d["coded_bits"] = code.coded_bits();
  d["symbols_per_frame"] = code.symbols_per_frame();

  return root.dump(2) + "\n";
}

}  // namespace cfsim
