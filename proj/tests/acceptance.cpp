// Acceptance gate: one pass/fail line per criterion, exit 0 only when all
// criteria hold. Heavier than the unit suites; budgeted per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "geoemu/commands.hpp"
#include "geoemu/config.hpp"
#include "geoemu/diagnostics.hpp"
#include "geoemu/forecast.hpp"
#include "geoemu/grid.hpp"
#include "geoemu/models.hpp"
#include "geoemu/preprocess.hpp"
#include "geoemu/training.hpp"
#include "oracles.hpp"

using namespace geoemu;
using cfg::json;
namespace fs = std::filesystem;

namespace {

int g_checks = 0, g_failed = 0;

void expect(bool ok, const std::string& what) {
  ++g_checks;
  if (!ok) {
    ++g_failed;
    std::cout << "    FAILED: " << what << "\n";
  }
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("geoemu_acc_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

Tensor random_tensor(const std::vector<int>& shape, Rng& rng) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

bool tensors_bitequal(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), size_t(a.size()) * 8) == 0;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness for all four architectures + K=3 roll-out.
bool criterion_gradients() {
  const int L = 12, W = 12, C = 8;
  ArchConfig ac;
  ac.cnn_depth = 3;
  ac.cnn_width = 8;
  ac.lstm_hidden = 4;
  ac.lstm_layers = 2;
  ac.lstm_seq_len = 2;
  ac.afno_patch = 4;
  ac.afno_embed = 8;
  ac.afno_blocks = 1;
  ac.afno_mlp_hidden = 8;
  ac.field_height = L;
  ac.field_width = W;
  ac.unet_width = 4;

  Rng rng(1001);
  Tensor input = random_tensor({C, L, W}, rng);
  Tensor target = random_tensor({1, L, W}, rng);
  Tensor mask({1, L, W});
  for (int64_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < 0.85 ? 1.0 : 0.0;

  for (Arch a : {Arch::CNN, Arch::ConvLSTM, Arch::AFNO, Arch::UNet}) {
    EmulatorModel m = build_model(a, C, ac);
    m.init_params(7);
    auto grads = oracles::static_grads(m, input, target, mask);
    auto loss_fn = [&](EmulatorModel& mm) {
      return oracles::masked_mse_plain(mm.forward_eval(input), target, mask);
    };
    int checked = 0;
    double worst = oracles::gradcheck(m, grads, loss_fn, 100, 500 + int(a), 1e-5,
                                      &checked);
    expect(checked >= 100, arch_name(a) + ": only " + std::to_string(checked) +
                               " parameters checked");
    expect(worst < 1e-4, arch_name(a) + ": worst static grad rel err " +
                             std::to_string(worst));
  }

  // Roll-out K=3 through a small AR model.
  EmulatorModel ar = build_model(Arch::UNet, C + 1, ac);
  ar.autoregressive = true;
  ar.init_params(8);
  Tensor state0 = random_tensor({1, L, W}, rng);
  std::vector<Tensor> windows, targets, masks;
  for (int k = 0; k < 3; ++k) {
    windows.push_back(random_tensor({C, L, W}, rng));
    targets.push_back(random_tensor({1, L, W}, rng));
    Tensor mk({1, L, W});
    for (int64_t i = 0; i < mk.size(); ++i) mk[i] = rng.uniform() < 0.85 ? 1.0 : 0.0;
    masks.push_back(mk);
  }
  auto rgrads = oracles::rollout_grads(ar, state0, windows, targets, masks);
  auto rloss = [&](EmulatorModel& mm) {
    return oracles::rollout_loss_plain(mm, state0, windows, targets, masks);
  };
  int checked = 0;
  double worst = oracles::gradcheck(ar, rgrads, rloss, 100, 900, 1e-5, &checked);
  expect(checked >= 100, "rollout: only " + std::to_string(checked) + " checked");
  expect(worst < 1e-4, "rollout: worst grad rel err " + std::to_string(worst));
  return g_failed == 0;
}

// ---------------------------------------------------------------------------
// 2. EOF vs brute-force eigendecomposition on >= 20 random anomaly matrices.
bool criterion_eof_oracle() {
  Rng rng(2002);
  for (int rep = 0; rep < 20; ++rep) {
    const int L = 2 + int(rng.below(5));       // 2..6
    const int W = 2 + int(rng.below(5));
    const int T = 12 + int(rng.below(37));     // 12..48
    const int N = L * W;
    AnomalySeries anom;
    anom.values = random_tensor({T, L, W}, rng);
    anom.cell_valid.assign(size_t(N), 1);

    const int n_modes = std::min(N, T);
    EOFResult e = eof(anom, n_modes);

    // Brute-force scatter matrix eigendecomposition.
    std::vector<double> Cm(size_t(N) * N, 0.0);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        for (int t = 0; t < T; ++t)
          Cm[size_t(i) * N + j] +=
              anom.values[int64_t(t) * N + i] * anom.values[int64_t(t) * N + j];
    std::vector<double> evals, V;
    oracles::jacobi_eig(Cm, N, evals, V);
    double lmax = std::max(evals[0], 1e-300), total = 0;
    for (double v : evals) total += v;

    for (int m = 0; m < n_modes; ++m) {
      double ref = evals[size_t(m)] / total;
      expect(std::fabs(e.explained[size_t(m)] - ref) <=
                 1e-8 * std::max(1.0, std::fabs(ref)),
             "rep " + std::to_string(rep) + " mode " + std::to_string(m) +
                 ": explained " + std::to_string(e.explained[size_t(m)]) +
                 " vs " + std::to_string(ref));
      // Subspace alignment for non-degenerate modes.
      double gap_lo = m > 0 ? evals[size_t(m - 1)] - evals[size_t(m)] : lmax;
      double gap_hi = m + 1 < N ? evals[size_t(m)] - evals[size_t(m + 1)] : lmax;
      if (std::min(gap_lo, gap_hi) < 1e-6 * lmax) continue;
      double dot = 0;
      for (int i = 0; i < N; ++i)
        dot += e.patterns[int64_t(m) * N + i] * V[size_t(i) * N + m];
      expect(std::fabs(dot) > 1.0 - 1e-8,
             "rep " + std::to_string(rep) + " mode " + std::to_string(m) +
                 ": |dot| = " + std::to_string(std::fabs(dot)));
    }

    // Full-rank reconstruction (Frobenius norm of the residual).
    double fro = 0;
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < N; ++i) {
        double rec = 0;
        for (int m = 0; m < int(e.explained.size()); ++m)
          rec += e.pcs.at2(m, t) * e.patterns[int64_t(m) * N + i];
        double d = rec - anom.values[int64_t(t) * N + i];
        fro += d * d;
      }
    expect(std::sqrt(fro) < 1e-8,
           "rep " + std::to_string(rep) + ": reconstruction residual " +
               std::to_string(std::sqrt(fro)));
  }
  return g_failed == 0;
}

// ---------------------------------------------------------------------------
// 3. Persistence seasonal-PC correlation follows cos(2*pi*k/12) at k=1..11.
bool criterion_persistence_pc_law() {
  json c = cfg::resolve(json::object());
  c["seed"] = 3003;
  c["data"]["synthetic"]["width"] = 16;
  c["data"]["synthetic"]["length"] = 8;
  c["data"]["synthetic"]["n_steps"] = 144;
  c["data"]["synthetic"]["seasonal_amp"] = 1.0;
  c["data"]["synthetic"]["lowfreq_amp"] = 0.0;
  c["data"]["synthetic"]["spatial_mod"] = 0.5;
  c["data"]["synthetic"]["predictor_noise"] = 0.0;
  c["data"]["synthetic"]["target_noise"] = 0.0;
  // Pure-fundamental target: a nonlinear truth (tanh, squared lag) injects
  // harmonics and the lagged autocorrelation stops following the cosine law.
  c["data"]["synthetic"]["truth"] = {{"a", 0.0}, {"b", 1.0}, {"c_lag", 0.0},
                                     {"d", 1.0},  {"f1", 0},   {"f2", 1},
                                     {"f3", 2}};
  c["data"]["split"] = {{"train_start", 0},  {"train_end", 47},
                        {"val_fraction", 0.2}, {"test_start", 48},
                        {"test_end", 143}};
  c["forecast"]["predictor"] = "persistence";
  c["forecast"]["horizon"] = 11;

  fs::path out = scratch("pclaw");
  json summary = cmd::cmd_forecast(c, out.string());
  for (const auto& row : summary.at("leads")) {
    int k = row.at("lead");
    double corr = row.at("corr_seas_pc");
    double want = std::cos(2 * M_PI * k / 12.0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "lead %d: corr %.4f vs cos law %.4f", k,
                  corr, want);
    expect(std::fabs(corr - want) <= 0.02, buf);
  }
  fs::remove_all(out);
  return g_failed == 0;
}

// Shared scaffolding for the two trend criteria.
json trend_base(int width, int length, int n_steps, int test_years) {
  json c = cfg::resolve(json::object());
  c["data"]["synthetic"]["width"] = width;
  c["data"]["synthetic"]["length"] = length;
  c["data"]["synthetic"]["n_steps"] = n_steps;
  c["data"]["synthetic"]["target_noise"] = 0.1;
  c["data"]["synthetic"]["predictor_noise"] = 0.1;
  int test_start = n_steps - 12 * test_years;
  c["data"]["split"] = {{"train_start", 0},
                        {"train_end", test_start - 1},
                        {"val_fraction", 0.2},
                        {"test_start", test_start},
                        {"test_end", n_steps - 1}};
  c["model"]["arch"] = "unet";
  c["model"]["unet"]["width"] = 8;
  c["training"]["max_epochs"] = 12;
  c["training"]["early_stop_patience"] = 12;
  c["training"]["learning_rate"] = 2e-3;
  return c;
}

double train_eval_rmse(json c, const fs::path& dir) {
  fs::create_directories(dir);
  json tr = cmd::cmd_train(c, dir.string());
  c["evaluate"]["checkpoint"] = tr.at("checkpoint");
  json ev = cmd::cmd_evaluate(c, (dir / "eval").string());
  for (const auto& r : ev.at("metrics"))
    if (r.at("scope") == "global") return r.at("rmse");
  throw std::runtime_error("no global metric");
}

// ---------------------------------------------------------------------------
// 4. Two-month predictor window beats the single-month window (>= 4/5 seeds).
bool criterion_window_trend() {
  fs::path out = scratch("window");
  int wins = 0;
  for (int s = 0; s < 5; ++s) {
    json c = trend_base(32, 16, 120, 2);
    c["seed"] = 4000 + s;
    // The lagged term must carry information that is NOT recoverable from
    // Z(t): smooth sinusoidal predictors are nearly deterministic in time, so
    // make them noise-dominated and give the lag term a heavy weight.
    c["data"]["synthetic"]["seasonal_amp"] = 0.5;
    c["data"]["synthetic"]["lowfreq_amp"] = 0.3;
    c["data"]["synthetic"]["predictor_noise"] = 0.8;
    c["data"]["synthetic"]["truth"]["c_lag"] = 1.2;

    json c0 = c;
    c0["model"]["window"] = {{"delta_minus", 0}, {"delta_plus", 0}};
    double rmse0 = train_eval_rmse(c0, out / ("s" + std::to_string(s) + "_w0"));

    json c1 = c;
    c1["model"]["window"] = {{"delta_minus", 1}, {"delta_plus", 0}};
    double rmse1 = train_eval_rmse(c1, out / ("s" + std::to_string(s) + "_w1"));

    std::printf("    seed %d: rmse[Z(t)] = %.4f, rmse[Z(t-1),Z(t)] = %.4f\n",
                s, rmse0, rmse1);
    if (rmse1 < rmse0) ++wins;
  }
  expect(wins >= 4, "window trend held in only " + std::to_string(wins) +
                        "/5 seeds");
  fs::remove_all(out);
  return g_failed == 0;
}

// ---------------------------------------------------------------------------
// 5. Roll-out trend: AR-6 beats AR-1 at leads 3..6; both beat persistence at
//    leads 1-2; AR-1's lead-1 edge over the static model is gone by lead 3.
struct LeadRmse {
  std::vector<double> rmse;  // index k-1
};

LeadRmse forecast_leads(json c, const std::string& ckpt, const fs::path& dir) {
  c["forecast"]["predictor"] = ckpt.empty() ? "persistence" : "checkpoint";
  c["forecast"]["checkpoint"] = ckpt;
  c["forecast"]["horizon"] = 6;
  json fc = cmd::cmd_forecast(c, dir.string());
  LeadRmse lr;
  for (const auto& row : fc.at("leads")) lr.rmse.push_back(row.at("rmse"));
  return lr;
}

bool criterion_rollout_trend() {
  fs::path out = scratch("rollout");
  int ar6_wins = 0, beat_pers = 0, edge_gone = 0, ar1_lead1_better = 0;
  for (int s = 0; s < 5; ++s) {
    json base = trend_base(16, 16, 120, 3);
    base["seed"] = 5000 + s;
    base["data"]["synthetic"]["lowfreq_amp"] = 1.0;
    base["data"]["synthetic"]["target_noise"] = 0.15;
    base["data"]["synthetic"]["target_noise_rho"] = 0.5;
    // One shared schedule for the static and both AR cells so the ordering
    // comparisons are fair; roll-out training needs the gentler rate.
    base["training"]["learning_rate"] = 5e-4;
    base["training"]["max_epochs"] = 24;
    base["training"]["early_stop_patience"] = 24;
    fs::path sd = out / ("s" + std::to_string(s));

    // Static reference.
    json cs = base;
    double static_rmse = train_eval_rmse(cs, sd / "static");

    // AR-1 and AR-6.
    auto train_ar = [&](int k, const fs::path& dir) {
      json c = base;
      c["model"]["mode"] = "ar";
      c["training"]["rollout_k"] = k;
      fs::create_directories(dir);
      json tr = cmd::cmd_train(c, dir.string());
      return forecast_leads(c, tr.at("checkpoint"), dir / "fc");
    };
    LeadRmse ar1 = train_ar(1, sd / "ar1");
    LeadRmse ar6 = train_ar(6, sd / "ar6");
    LeadRmse pers = forecast_leads(base, "", sd / "pers");

    auto mean36 = [](const LeadRmse& l) {
      return (l.rmse[2] + l.rmse[3] + l.rmse[4] + l.rmse[5]) / 4.0;
    };
    std::printf("    seed %d: static %.4f | ar1 L1 %.4f L3-6 %.4f | "
                "ar6 L1 %.4f L3-6 %.4f | pers L1 %.4f L2 %.4f\n",
                s, static_rmse, ar1.rmse[0], mean36(ar1), ar6.rmse[0],
                mean36(ar6), pers.rmse[0], pers.rmse[1]);

    if (mean36(ar6) < mean36(ar1)) ++ar6_wins;
    if (ar1.rmse[0] < pers.rmse[0] && ar1.rmse[1] < pers.rmse[1] &&
        ar6.rmse[0] < pers.rmse[0] && ar6.rmse[1] < pers.rmse[1])
      ++beat_pers;
    if (ar1.rmse[0] < static_rmse) ++ar1_lead1_better;
    if (ar1.rmse[2] >= static_rmse) ++edge_gone;
  }
  expect(ar6_wins >= 4, "AR-6 beat AR-1 (leads 3-6) in only " +
                            std::to_string(ar6_wins) + "/5 seeds");
  expect(beat_pers >= 4, "models beat persistence at leads 1-2 in only " +
                             std::to_string(beat_pers) + "/5 seeds");
  expect(ar1_lead1_better >= 3, "AR-1 beat the static model at lead 1 in only " +
                                    std::to_string(ar1_lead1_better) + "/5 seeds");
  expect(edge_gone >= 4, "AR-1's lead-1 edge persisted to lead 3 in " +
                             std::to_string(5 - edge_gone) + "/5 seeds");
  fs::remove_all(out);
  return g_failed == 0;
}

// ---------------------------------------------------------------------------
// 6. Mask invariance: garbage under invalid cells changes nothing, bit-exact.
bool criterion_mask_invariance() {
  SyntheticConfig sc;
  sc.width = 16;
  sc.length = 8;
  sc.n_steps = 36;
  sc.obs_gap_fraction = 0.2;
  sc.land_fraction = 0.3;
  SyntheticDataset sd = generate_synthetic(sc, 606);
  Dataset clean{sd.grid, sd.predictors, sd.target};

  Dataset dirty = clean;
  const int L = sc.length, W = sc.width, C = dirty.predictors.channels();
  for (int t = 0; t < sc.n_steps; ++t)
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x) {
        bool land = !sd.grid.valid_at(y, x);
        if (land)
          for (int c = 0; c < C; ++c)
            dirty.predictors.values.at4(t, c, y, x) = 777.0 + t + c;
        if (land || !sd.target.observed(t, y, x, W, L))
          dirty.target.values.at(t, y, x) = -555.0 + t;
      }

  SplitSpec sp;
  sp.train_start = 0;
  sp.train_end = 23;
  sp.val_fraction = 0.2;
  sp.test_start = 24;
  sp.test_end = 35;
  SplitResult splits = split_dataset(sp, sc.n_steps, 1);
  Preprocessed pa = preprocess(clean, splits.train, PreprocessOptions{});
  Preprocessed pb = preprocess(dirty, splits.train, PreprocessOptions{});

  expect(tensors_bitequal(pa.pred, pb.pred), "preprocessed predictors differ");
  expect(tensors_bitequal(pa.targ, pb.targ), "preprocessed target differs");
  expect(tensors_bitequal(pa.ar_state, pb.ar_state), "AR state differs");

  // Loss, metrics, gradients through a real model.
  ArchConfig ac;
  ac.cnn_depth = 3;
  ac.cnn_width = 8;
  EmulatorModel m = build_cnn(8, ac);
  m.window = WindowSpec{0, 0};
  m.init_params(9);
  const int t = 25;
  Tensor ina = static_input(pa, t, m.window), inb = static_input(pb, t, m.window);
  expect(tensors_bitequal(ina, inb), "model inputs differ");
  Tensor mask_a = sample_mask(sd.grid, pa, t), mask_b = sample_mask(sd.grid, pb, t);
  expect(tensors_bitequal(mask_a, mask_b), "sample masks differ");

  MaskedLossResult la =
      masked_loss(m.forward_eval(ina), sample_target(pa, t), mask_a);
  MaskedLossResult lb =
      masked_loss(m.forward_eval(inb), sample_target(pb, t), mask_b);
  expect(la.loss == lb.loss && la.n_cells == lb.n_cells, "losses differ");

  MetricReport ra =
      compute_metrics(m.forward_eval(ina), sample_target(pa, t), mask_a);
  MetricReport rb =
      compute_metrics(m.forward_eval(inb), sample_target(pb, t), mask_b);
  expect(ra.r2 == rb.r2 && ra.rmse == rb.rmse && ra.slope == rb.slope &&
             ra.mae == rb.mae,
         "metrics differ");

  auto ga = oracles::static_grads(m, ina, sample_target(pa, t), mask_a);
  auto gb = oracles::static_grads(m, inb, sample_target(pb, t), mask_b);
  bool grads_same = true;
  for (const auto& [name, tns] : ga)
    grads_same = grads_same && tensors_bitequal(tns, gb.at(name));
  expect(grads_same, "gradients differ");

  // EOF outputs.
  for (AnomalyKind kind : {AnomalyKind::seasonal, AnomalyKind::nonseasonal}) {
    AnomalySeries aa =
        compute_anomalies(clean.target.values, pa.obs_mask, sd.grid, kind);
    AnomalySeries ab =
        compute_anomalies(dirty.target.values, pb.obs_mask, sd.grid, kind);
    expect(tensors_bitequal(aa.values, ab.values), "anomalies differ");
    EOFResult ea = eof(aa, 2), eb = eof(ab, 2);
    expect(tensors_bitequal(ea.patterns, eb.patterns) &&
               tensors_bitequal(ea.pcs, eb.pcs) &&
               ea.explained == eb.explained,
           "EOF outputs differ");
  }
  return g_failed == 0;
}

// ---------------------------------------------------------------------------
// 7. Metric oracles on >= 10 fixtures each, 1e-10 absolute.
bool criterion_metric_oracles() {
  Rng rng(7007);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 8 + int(rng.below(30));
    std::vector<double> pred, obs;
    for (int i = 0; i < n; ++i) {
      double o = rng.normal();
      obs.push_back(o);
      pred.push_back(0.7 * o + 0.4 * rng.normal() - 0.2);
    }
    // Brute-force reference.
    double mp = 0, mo = 0;
    for (int i = 0; i < n; ++i) {
      mp += pred[size_t(i)];
      mo += obs[size_t(i)];
    }
    mp /= n;
    mo /= n;
    double spp = 0, soo = 0, spo = 0, se = 0, ae = 0;
    for (int i = 0; i < n; ++i) {
      double dp = pred[size_t(i)] - mp, dobs = obs[size_t(i)] - mo;
      spp += dp * dp;
      soo += dobs * dobs;
      spo += dp * dobs;
      se += (pred[size_t(i)] - obs[size_t(i)]) * (pred[size_t(i)] - obs[size_t(i)]);
      ae += std::fabs(pred[size_t(i)] - obs[size_t(i)]);
    }
    MetricReport r = compute_metrics(pred, obs);
    expect(std::fabs(r.r2 - spo * spo / (spp * soo)) < 1e-10, "r2 fixture");
    expect(std::fabs(r.rmse - std::sqrt(se / n)) < 1e-10, "rmse fixture");
    expect(std::fabs(r.slope - spo / soo) < 1e-10, "slope fixture");
    expect(std::fabs(r.mae - ae / n) < 1e-10, "mae fixture");

    // pc_compare against the independent pearson oracle.
    std::vector<double> b;
    for (int i = 0; i < n; ++i) b.push_back(rng.normal());
    PcComparison pc = pc_compare(obs, b);
    expect(std::fabs(pc.correlation - oracles::pearson(obs, b)) < 1e-10,
           "pc_compare fixture");
  }

  // Map fixtures: per-cell brute force on small random series.
  for (int rep = 0; rep < 10; ++rep) {
    const int T = 10 + int(rng.below(20)), L = 2, W = 3;
    Tensor pred = random_tensor({T, L, W}, rng);
    Tensor obs = random_tensor({T, L, W}, rng);
    Tensor mask({T, L, W});
    for (int64_t i = 0; i < mask.size(); ++i) mask[i] = 1.0;
    Tensor cm = correlation_map(pred, obs, mask);
    Tensor nm = nrmse_map(pred, obs, mask);
    for (int i = 0; i < L * W; ++i) {
      std::vector<double> ps, os;
      for (int t = 0; t < T; ++t) {
        ps.push_back(pred[int64_t(t) * L * W + i]);
        os.push_back(obs[int64_t(t) * L * W + i]);
      }
      double corr = oracles::pearson(ps, os);
      expect(std::fabs(cm[i] - corr) < 1e-10, "correlation_map fixture");
      double mo = 0;
      for (double v : os) mo += v;
      mo /= T;
      double so = 0, se = 0;
      for (int t = 0; t < T; ++t) {
        so += (os[size_t(t)] - mo) * (os[size_t(t)] - mo);
        se += (ps[size_t(t)] - os[size_t(t)]) * (ps[size_t(t)] - os[size_t(t)]);
      }
      double ref = std::sqrt(se / T) / std::sqrt(so / T);
      expect(std::fabs(nm[i] - ref) < 1e-10, "nrmse_map fixture");
    }
  }
  return g_failed == 0;
}

// ---------------------------------------------------------------------------
// 8. Benchmark-suite determinism: identical consolidated reports on rerun.
bool criterion_suite_determinism() {
  json c = cfg::resolve(json::object());
  c["seed"] = 808;
  c["data"]["synthetic"]["width"] = 16;
  c["data"]["synthetic"]["length"] = 8;
  c["data"]["synthetic"]["n_steps"] = 48;
  c["data"]["synthetic"]["lowfreq_amp"] = 0.8;
  c["data"]["synthetic"]["target_noise"] = 0.1;
  c["data"]["split"] = {{"train_start", 0},  {"train_end", 35},
                        {"val_fraction", 0.2}, {"test_start", 36},
                        {"test_end", 47}};
  c["model"]["unet"]["width"] = 4;
  c["model"]["cnn"] = {{"depth", 3}, {"width", 8}};
  c["model"]["convlstm"] = {{"hidden", 4}, {"layers", 1}, {"seq_len", 0}};
  c["model"]["afno"] = {{"patch", 4}, {"embed", 8}, {"blocks", 1},
                        {"mlp_hidden", 8}, {"lambda", 0.01}};
  c["training"]["max_epochs"] = 2;

  fs::path a = scratch("suite_a"), b = scratch("suite_b");
  cmd::cmd_suite(c, a.string());
  cmd::cmd_suite(c, b.string());
  for (const char* f : {"suite_report.json", "suite_report.csv"}) {
    std::string sa = slurp(a / f), sb = slurp(b / f);
    expect(!sa.empty() && sa == sb, std::string(f) + " differs between runs");
  }
  fs::remove_all(a);
  fs::remove_all(b);
  return g_failed == 0;
}

// ---------------------------------------------------------------------------
// 9. Production-shaped dry run: 401 x 1440 forward on all four architectures.
bool criterion_production_shape() {
  const int L = 401, W = 1440, C = 8;
  ArchConfig ac;
  ac.cnn_depth = 2;
  ac.cnn_width = 4;
  ac.lstm_hidden = 2;
  ac.lstm_layers = 1;
  ac.lstm_seq_len = 2;
  ac.afno_patch = 8;
  ac.afno_embed = 4;
  ac.afno_blocks = 1;
  ac.afno_mlp_hidden = 4;
  ac.field_height = L;
  ac.field_width = W;
  ac.unet_width = 2;
  ac.allow_padding = true;  // 401 is not divisible by 4 or 8

  Rng rng(9009);
  Tensor input({C, L, W});
  for (int64_t i = 0; i < input.size(); ++i) input[i] = 0.1 * rng.normal();

  for (Arch a : {Arch::CNN, Arch::ConvLSTM, Arch::AFNO, Arch::UNet}) {
    auto t0 = std::chrono::steady_clock::now();
    EmulatorModel m = build_model(a, C, ac);
    m.init_params(3);
    Tensor y = m.forward_eval(input);
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    expect(y.dim(1) == L && y.dim(2) == W,
           arch_name(a) + ": wrong output shape " + y.shape_str());
    bool finite = true;
    for (int64_t i = 0; i < y.size() && finite; ++i) finite = std::isfinite(y[i]);
    expect(finite, arch_name(a) + ": non-finite output");
    std::printf("    %s: %d x %d forward in %.1f s\n", arch_name(a).c_str(), L,
                W, secs);
    expect(secs < 60.0, arch_name(a) + ": forward took " + std::to_string(secs) +
                            " s (budget 60 s)");
  }
  return g_failed == 0;
}

struct Criterion {
  const char* label;
  double budget_seconds;
  std::function<bool()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {"1 gradient correctness (4 architectures + K=3 roll-out)", 120,
       criterion_gradients},
      {"2 EOF oracle equivalence (20 random anomaly matrices)", 120,
       criterion_eof_oracle},
      {"3 persistence seasonal-PC cosine law (leads 1..11)", 60,
       criterion_persistence_pc_law},
      {"4 predictor-window trend (2-month window wins, 5 seeds)", 1800,
       criterion_window_trend},
      {"5 roll-out trend (AR-6 vs AR-1 vs persistence vs static)", 3600,
       criterion_rollout_trend},
      {"6 mask invariance (bit-exact under invalid-cell perturbation)", 120,
       criterion_mask_invariance},
      {"7 metric oracles (10+ fixtures per metric, 1e-10)", 60,
       criterion_metric_oracles},
      {"8 benchmark-suite determinism (byte-identical reports)", 600,
       criterion_suite_determinism},
      {"9 production-shaped dry run (401 x 1440, all architectures)", 240,
       criterion_production_shape},
  };

  int failures = 0, executed = 0;
  for (const auto& c : criteria) {
    if (argc > 1) {  // optional filter: run only criteria whose number matches
      bool selected = false;
      for (int i = 1; i < argc; ++i)
        selected = selected || std::string(c.label).rfind(argv[i], 0) == 0;
      if (!selected) continue;
    }
    g_failed = 0;
    ++executed;
    auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string err;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (secs > c.budget_seconds) {
      ok = false;
      std::printf("    over budget: %.1f s > %.0f s\n", secs, c.budget_seconds);
    }
    if (!err.empty()) std::printf("    exception: %s\n", err.c_str());
    std::printf("criterion %s: %s (%.1f s)\n", c.label, ok ? "PASS" : "FAIL",
                secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("%d/%d criteria passed\n", executed - failures, executed);
  return failures == 0 ? 0 : 1;
}
