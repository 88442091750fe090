#include "cfsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "cfsim/coding.hpp"

namespace cfsim {

DropCore build_drop(const SimConfig& cfg, int drop_idx) {
  DropCore core;
  core.sigma2_w = cfg.sigma2_w();
  core.perfect_csi = cfg.perfect_csi;

  Rng rng_geo = Rng::substream(cfg.seed, Stream::kGeometry, drop_idx);
  core.dep = make_deployment(cfg.m_aps, cfg.k_users, cfg.n_ap_antennas,
                             cfg.side_m, cfg.carrier_hz, cfg.bandwidth_hz,
                             cfg.noise_figure_db, cfg.noise_psd_dbm_hz,
                             cfg.probe_user_center, rng_geo);

  Rng rng_sh = Rng::substream(cfg.seed, Stream::kShadowing, drop_idx);
  const Mat shadow = draw_shadowing(core.dep, rng_sh, cfg.shadowing);
  core.ls = build_large_scale(core.dep, cfg.path_loss, shadow);
  core.corr = build_correlations(core.ls, cfg.n_ap_antennas);

  Rng rng_pilot = Rng::substream(cfg.seed, Stream::kPilotAssign, drop_idx);
  core.pilots =
      make_pilot_book(cfg.k_users, cfg.tau_p, cfg.pilot_policy, &rng_pilot);
  core.train_powers.tau_p = cfg.tau_p;
  core.train_powers.p_tilde_w =
      Vec::Constant(cfg.k_users, mw_to_watts(cfg.p_tilde_mw));

  core.gamma = PerLink<CMat>(cfg.m_aps, cfg.k_users);
  core.c = PerLink<CMat>(cfg.m_aps, cfg.k_users);
  core.proj = PerLink<CMat>(cfg.m_aps, cfg.k_users);
  for (int m = 0; m < cfg.m_aps; ++m) {
    for (int k = 0; k < cfg.k_users; ++k) {
      if (core.perfect_csi) {
        core.c.of(k, m) =
            CMat::Zero(cfg.n_ap_antennas, cfg.n_ap_antennas);
        continue;
      }
      CMat gamma = gamma_matrix(k, m, core.corr, core.pilots,
                                core.train_powers, core.sigma2_w);
      core.proj.of(k, m) =
          mmse_projection(k, m, core.corr, core.train_powers, gamma);
      core.c.of(k, m) =
          error_covariance(k, m, core.corr, core.train_powers, gamma);
      core.gamma.of(k, m) = std::move(gamma);
    }
  }
  return core;
}

Scenario build_scenario(const SimConfig& cfg, const DropCore& core,
                        int n_serve) {
  Scenario sc;
  sc.n_serve = n_serve;
  sc.assoc = associate(core.ls.beta, n_serve);
  sc.powers = fpc_powers(core.ls.beta, sc.assoc, cfg.fpc_params());
  sc.sigma2_e.resize(cfg.m_aps);
  for (int m = 0; m < cfg.m_aps; ++m) {
    sc.sigma2_e[m] = interference_variance(m, sc.assoc, sc.powers, core.c,
                                           core.corr, core.sigma2_w);
  }
  return sc;
}

double snr_k(int k, const UplinkPowers& powers, const AssociationMap& assoc,
             const Mat& beta, double sigma2_w, int n_ap) {
  double sum_beta = 0.0;
  for (int m : assoc.serving[k]) sum_beta += beta(m, k);
  const double eta = powers.eta_w(k);
  if (eta <= 0.0 || sum_beta <= 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  return linear_to_db(eta * n_ap * sum_beta / sigma2_w);
}

void set_probe_snr(const SimConfig& cfg, const DropCore& core, Scenario& sc,
                   double snr_db) {
  double sum_beta = 0.0;
  for (int m : sc.assoc.serving[kProbeUser]) {
    sum_beta += core.ls.beta(m, kProbeUser);
  }
  if (sum_beta <= 0.0) {
    log_warn("probe user is in outage; SNR target unreachable");
    return;
  }
  sc.powers.eta_w(kProbeUser) =
      db_to_linear(snr_db) * core.sigma2_w / (cfg.n_ap_antennas * sum_beta);
  for (int m = 0; m < cfg.m_aps; ++m) {
    sc.sigma2_e[m] = interference_variance(m, sc.assoc, sc.powers, core.c,
                                           core.corr, core.sigma2_w);
  }
}

Vec fuse_llrs(const LlrFrame& frame, int user,
              const std::vector<int>& serving) {
  if (serving.empty()) {
    throw PipelineError("fuse_llrs: user " + std::to_string(user) +
                        " has no serving APs");
  }
  Vec fused;
  for (int m : serving) {
    const Vec& contrib = frame.local[m][user];
    if (contrib.size() == 0) {
      throw PipelineError("fuse_llrs: AP " + std::to_string(m) +
                          " contributed no LLRs for user " +
                          std::to_string(user));
    }
    if (fused.size() == 0) {
      fused = contrib;
    } else {
      if (fused.size() != contrib.size()) {
        throw PipelineError("fuse_llrs: contribution length mismatch");
      }
      fused += contrib;
    }
  }
  return fused;
}

bool TrialResult::error_for(int user) const {
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i] == user) return frame_error[i] != 0;
  }
  throw PipelineError("user was not decoded in this trial");
}

namespace {

std::unique_ptr<LocalDetector> make_local_detector(const DetectorSpec& det,
                                                   Mat b_real, double sigma2_e,
                                                   const BitMapping& map,
                                                   int cap_bits) {
  using Kind = DetectorSpec::Kind;
  switch (det.kind) {
    case Kind::kMrc:
      return std::make_unique<MrcDetector>(std::move(b_real), sigma2_e, map);
    case Kind::kZfDf:
      return std::make_unique<ZfDfSoftDetector>(std::move(b_real), sigma2_e,
                                                map);
    case Kind::kMmseSic:
      return std::make_unique<MmseSicDetector>(std::move(b_real), sigma2_e,
                                               map);
    case Kind::kPm:
      return std::make_unique<PmDetector>(std::move(b_real), sigma2_e, map,
                                          det.r);
    case Kind::kExactMl:
      return std::make_unique<ExactMlDetector>(std::move(b_real), sigma2_e,
                                               map, cap_bits);
    case Kind::kCPm:
      break;
  }
  throw PipelineError("c_pm is not a per-AP detector");
}

long count_clamp_hits(const Vec& llrs) {
  long hits = 0;
  for (Eigen::Index i = 0; i < llrs.size(); ++i) {
    if (std::abs(llrs(i)) >= 80.0) ++hits;
  }
  return hits;
}

}  // namespace

TrialResult run_trial(const SimConfig& cfg, const DropCore& core,
                      const Scenario& sc, const DetectorSpec& det,
                      int drop_idx, long trial_idx,
                      const std::vector<int>& users_to_decode) {
  const int m_aps = cfg.m_aps;
  const int k_users = cfg.k_users;
  const int n_ap = cfg.n_ap_antennas;
  const int n_sym = cfg.code.symbols_per_frame();
  const int coded_bits = cfg.code.coded_bits();
  const BitMapping map = BitMapping::qpsk();
  const bool centralized = det.kind == DetectorSpec::Kind::kCPm;

  TrialResult result;
  result.users = users_to_decode;
  result.frame_error.assign(users_to_decode.size(), 0);

  // APs whose observations matter for the decoded users.
  std::vector<char> ap_needed(m_aps, 0);
  for (int u : users_to_decode) {
    for (int m : sc.assoc.serving[u]) ap_needed[m] = 1;
  }

  Rng rng_ch =
      Rng::substream(cfg.seed, Stream::kChannels, drop_idx, trial_idx);
  const ChannelRealization channels = draw_channels(core.corr, rng_ch);

  EstimateSet est;
  est.g_hat = PerLink<CVec>(m_aps, k_users);
  if (core.perfect_csi) {
    for (int m = 0; m < m_aps; ++m) {
      for (int k = 0; k < k_users; ++k) est.g_hat.of(k, m) = channels.of(k, m);
    }
  } else {
    Rng rng_pn =
        Rng::substream(cfg.seed, Stream::kPilotNoise, drop_idx, trial_idx);
    const PerLink<CVec> y_hat = training_observable(
        channels, core.pilots, core.train_powers, core.sigma2_w, rng_pn);
    for (int m = 0; m < m_aps; ++m) {
      for (int k = 0; k < k_users; ++k) {
        est.g_hat.of(k, m) = core.proj.of(k, m) * y_hat.of(k, m);
      }
    }
  }

  // Encode one frame per user over this channel realization.
  Rng rng_bits =
      Rng::substream(cfg.seed, Stream::kDataBits, drop_idx, trial_idx);
  std::vector<std::vector<int>> info(k_users);
  CMat x_all(k_users, n_sym);
  for (int k = 0; k < k_users; ++k) {
    info[k].resize(cfg.code.info_block_bits);
    for (int& b : info[k]) b = static_cast<int>(rng_bits.below(2));
    x_all.row(k) = qpsk_map(conv_encode(info[k], cfg.code), map).transpose();
  }

  // Per-AP synthesis matrices and detectors, fixed for the frame.
  std::vector<CMat> gm(m_aps);        // columns sqrt(eta_k) g_{k,m}
  std::vector<CMat> model_c(m_aps);   // complex effective model per AP
  std::vector<std::unique_ptr<LocalDetector>> local(m_aps);
  std::vector<Rng> rng_noise;
  rng_noise.reserve(m_aps);
  for (int m = 0; m < m_aps; ++m) {
    rng_noise.push_back(Rng::substream(cfg.seed, Stream::kDataNoise, drop_idx,
                                       trial_idx, m));
    if (!ap_needed[m]) continue;
    gm[m] = CMat(n_ap, k_users);
    for (int k = 0; k < k_users; ++k) {
      gm[m].col(k) = std::sqrt(sc.powers.eta_w(k)) * channels.of(k, m);
    }
    model_c[m] = effective_model_complex(m, est, sc.assoc, sc.powers);
    if (!centralized) {
      try {
        local[m] = make_local_detector(det, realify_matrix(model_c[m]),
                                       sc.sigma2_e[m], map,
                                       cfg.exact_ml_cap_bits);
      } catch (const CapacityError& e) {
        throw CapacityError("AP " + std::to_string(m) + " with N_m = " +
                            std::to_string(sc.assoc.served[m].size()) + ": " +
                            e.what());
      }
    }
  }

  std::vector<std::unique_ptr<CentralizedPmDetector>> cpm(k_users);
  if (centralized) {
    for (int u : users_to_decode) {
      if (sc.assoc.serving[u].empty()) continue;
      std::vector<ApBlock> blocks;
      for (int m : sc.assoc.serving[u]) {
        blocks.push_back(
            ApBlock{model_c[m], sc.assoc.served[m], sc.sigma2_e[m]});
      }
      cpm[u] = std::make_unique<CentralizedPmDetector>(blocks, map, det.r);
    }
  }

  // LLR accumulation: per-AP contributions for the local path (fused through
  // fuse_llrs afterwards), direct joint LLRs for c_pm.
  LlrFrame frame;
  frame.local.assign(m_aps, std::vector<Vec>(k_users));
  frame.fused.assign(k_users, Vec());
  std::vector<char> decode_user(k_users, 0);
  for (int u : users_to_decode) decode_user[u] = 1;
  if (!centralized) {
    for (int m = 0; m < m_aps; ++m) {
      if (!ap_needed[m]) continue;
      for (int u : sc.assoc.served[m]) {
        if (decode_user[u]) frame.local[m][u] = Vec::Zero(coded_bits);
      }
    }
  } else {
    for (int u : users_to_decode) {
      if (cpm[u]) frame.fused[u] = Vec::Zero(coded_bits);
    }
  }

  std::vector<CVec> y(m_aps);
  for (int t = 0; t < n_sym; ++t) {
    const CVec x_t = x_all.col(t);
    for (int m = 0; m < m_aps; ++m) {
      if (!ap_needed[m]) continue;
      CVec w(n_ap);
      for (int i = 0; i < n_ap; ++i) w(i) = rng_noise[m].cnormal(core.sigma2_w);
      y[m] = gm[m] * x_t + w;
      if (centralized) continue;

      const DetectorOutput out = local[m]->run(realify_vector(y[m]));
      result.op_count += out.op_count;
      result.clamp_hits += count_clamp_hits(out.llrs);
      const auto& served = sc.assoc.served[m];
      const int n_m = static_cast<int>(served.size());
      for (int j = 0; j < n_m; ++j) {
        const int u = served[j];
        if (!decode_user[u]) continue;
        frame.local[m][u](2 * t) = out.llrs(j);
        frame.local[m][u](2 * t + 1) = out.llrs(n_m + j);
      }
    }
    if (centralized) {
      for (int u : users_to_decode) {
        if (!cpm[u]) continue;
        std::vector<CVec> y_serving;
        y_serving.reserve(sc.assoc.serving[u].size());
        for (int m : sc.assoc.serving[u]) y_serving.push_back(y[m]);
        const DetectorOutput out = cpm[u]->run(y_serving);
        result.op_count += out.op_count;
        result.clamp_hits += count_clamp_hits(out.llrs);
        const auto [i_idx, q_idx] = cpm[u]->bit_indices(u);
        frame.fused[u](2 * t) = out.llrs(i_idx);
        frame.fused[u](2 * t + 1) = out.llrs(q_idx);
      }
    }
  }

  for (std::size_t i = 0; i < users_to_decode.size(); ++i) {
    const int u = users_to_decode[i];
    if (sc.assoc.in_outage(u)) {
      result.frame_error[i] = 1;  // conservative FER accounting
      continue;
    }
    if (!centralized) frame.fused[u] = fuse_llrs(frame, u, sc.assoc.serving[u]);
    const std::vector<int> decoded = viterbi_decode(frame.fused[u], cfg.code);
    result.frame_error[i] = decoded != info[u] ? 1 : 0;
  }
  return result;
}

namespace {

struct SweepItem {
  DetectorSpec det;
  int n_serve;
  double snr_db;
};

}  // namespace

std::vector<FerRecord> run_sweep(const SimConfig& cfg) {
  cfg.validate();

  std::vector<SweepItem> items;
  for (const DetectorSpec& det : cfg.detectors) {
    for (int n : cfg.n_serve) {
      for (double snr : cfg.snr_points_db) {
        items.push_back(SweepItem{det, n, snr});
      }
    }
  }
  std::sort(items.begin(), items.end(),
            [](const SweepItem& a, const SweepItem& b) {
              if (a.det.name() != b.det.name()) return a.det.name() < b.det.name();
              if (a.n_serve != b.n_serve) return a.n_serve < b.n_serve;
              if (a.det.r != b.det.r) return a.det.r < b.det.r;
              return a.snr_db < b.snr_db;
            });

  std::vector<DropCore> cores;
  cores.reserve(cfg.drops);
  for (int d = 0; d < cfg.drops; ++d) cores.push_back(build_drop(cfg, d));

  std::vector<int> users_to_decode = {kProbeUser};
  if (cfg.per_user_fer) {
    users_to_decode.resize(cfg.k_users);
    for (int k = 0; k < cfg.k_users; ++k) users_to_decode[k] = k;
  }

  std::vector<FerRecord> records;
  records.reserve(items.size());
  for (const SweepItem& item : items) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<Scenario> scenarios;
    scenarios.reserve(cfg.drops);
    for (int d = 0; d < cfg.drops; ++d) {
      Scenario sc = build_scenario(cfg, cores[d], item.n_serve);
      set_probe_snr(cfg, cores[d], sc, item.snr_db);
      scenarios.push_back(std::move(sc));
    }

    FerRecord rec;
    rec.detector = item.det.name();
    rec.r = item.det.r;
    rec.n_serve = item.n_serve;
    rec.snr_db = item.snr_db;

    std::vector<long> per_user_errors(cfg.k_users, 0);
    long frames = 0;
    long errors = 0;
    std::uint64_t ops = 0;
    long clamp_hits = 0;
    bool done = false;
    const long chunk = std::max<long>(64, 8L * cfg.threads);
    while (!done && frames < cfg.max_frames) {
      const long batch = std::min<long>(chunk, cfg.max_frames - frames);
      std::vector<TrialResult> results(batch);
      std::atomic<long> next{0};
      auto worker = [&]() {
        for (;;) {
          const long i = next.fetch_add(1);
          if (i >= batch) return;
          const long trial = frames + i;
          const int d = static_cast<int>(trial % cfg.drops);
          results[i] = run_trial(cfg, cores[d], scenarios[d], item.det, d,
                                 trial, users_to_decode);
        }
      };
      if (cfg.threads == 1) {
        worker();
      } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
      }
      // Deterministic stopping: scan results in trial order.
      for (long i = 0; i < batch; ++i) {
        const TrialResult& tr = results[i];
        ++frames;
        ops += tr.op_count;
        clamp_hits += tr.clamp_hits;
        if (tr.error_for(kProbeUser)) ++errors;
        if (cfg.per_user_fer) {
          for (std::size_t j = 0; j < tr.users.size(); ++j) {
            per_user_errors[tr.users[j]] += tr.frame_error[j];
          }
        }
        if (errors >= cfg.target_frame_errors) {
          done = true;
          break;
        }
      }
    }

    rec.frames = frames;
    rec.frame_errors = errors;
    rec.fer = frames > 0 ? static_cast<double>(errors) / frames : 0.0;
    rec.op_count = ops;
    rec.low_confidence = errors < cfg.target_frame_errors;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (rec.low_confidence) {
      log_warn(rec.detector + " N=" + std::to_string(rec.n_serve) + " snr=" +
               std::to_string(rec.snr_db) + ": hit max_frames with " +
               std::to_string(errors) + "/" +
               std::to_string(cfg.target_frame_errors) +
               " target errors (low confidence)");
    }
    if (clamp_hits > 0) {
      log_warn(rec.detector + " N=" + std::to_string(rec.n_serve) + " snr=" +
               std::to_string(rec.snr_db) + ": " +
               std::to_string(clamp_hits) + " local LLRs at |L| >= 80");
    }
    if (cfg.per_user_fer) {
      std::string msg = rec.detector + " N=" + std::to_string(rec.n_serve) +
                        " snr=" + std::to_string(rec.snr_db) +
                        " per-user errors/" + std::to_string(frames) + ":";
      for (int k = 0; k < cfg.k_users; ++k) {
        msg += " u" + std::to_string(k) + "=" +
               std::to_string(per_user_errors[k]);
      }
      log_warn(msg);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string records_to_csv(const std::vector<FerRecord>& records,
                           bool include_wall_seconds) {
  std::string out =
      "detector,r,N,snr_db,frames,frame_errors,fer,wall_seconds,op_count\n";
  char line[256];
  for (const FerRecord& rec : records) {
    std::snprintf(line, sizeof(line), "%s,%d,%d,%.3f,%ld,%ld,%.9e,%.3f,%llu\n",
                  rec.detector.c_str(), rec.r, rec.n_serve, rec.snr_db,
                  rec.frames, rec.frame_errors, rec.fer,
                  include_wall_seconds ? rec.wall_seconds : 0.0,
                  static_cast<unsigned long long>(rec.op_count));
    out += line;
  }
  return out;
}

}  // namespace cfsim
