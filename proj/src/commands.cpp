#include "geoemu/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "geoemu/container.hpp"
#include "geoemu/diagnostics.hpp"
#include "geoemu/error.hpp"
#include "geoemu/forecast.hpp"
#include "geoemu/plot.hpp"
#include "geoemu/training.hpp"

namespace geoemu::cmd {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string shift_calendar(const std::string& start, int months) {
  int year = std::stoi(start.substr(0, 4));
  int month = std::stoi(start.substr(5, 2)) - 1 + months;
  year += month / 12;
  month %= 12;
  if (month < 0) {
    month += 12;
    --year;
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month + 1);
  return buf;
}

struct LoadedData {
  Dataset ds;
  std::optional<GroundTruth> truth;
};

LoadedData load_input(const json& config) {
  LoadedData out;
  std::string source = config.at("data").at("source");
  if (source == "synthetic") {
    SyntheticConfig sc = cfg::synthetic_config(config);
    uint64_t seed = uint64_t(int64_t(config.at("seed")));
    SyntheticDataset sd = generate_synthetic(sc, seed);
    out.ds = Dataset{std::move(sd.grid), std::move(sd.predictors),
                     std::move(sd.target)};
    out.truth = sd.truth;
  } else if (source == "container") {
    std::string path = config.at("data").at("path");
    if (path.empty())
      throw validation_error("config: $.data.path required for container source");
    out.ds = load_dataset(path);
  } else {
    throw validation_error("config: $.data.source must be \"synthetic\" or "
                           "\"container\", got \"" + source + "\"");
  }
  return out;
}

struct Pipeline {
  Dataset ds;
  std::optional<GroundTruth> truth;
  SplitResult splits;
  Preprocessed pre;
};

Pipeline build_pipeline(const json& config) {
  Pipeline p;
  LoadedData in = load_input(config);
  p.ds = std::move(in.ds);
  p.truth = in.truth;
  uint64_t seed = uint64_t(int64_t(config.at("seed")));
  p.splits = split_dataset(cfg::split_spec(config), p.ds.grid.n_steps, seed);
  p.pre = preprocess(p.ds, p.splits.train, cfg::preprocess_options(config));
  return p;
}

EmulatorModel make_model(const json& config, const GridSpec& grid,
                         int n_channels) {
  bool ar = cfg::model_autoregressive(config);
  WindowSpec w = cfg::window_spec(config);
  ArchConfig ac = cfg::arch_config(config);
  ac.field_height = grid.length;
  ac.field_width = grid.width;
  if (ac.lstm_seq_len == 0) ac.lstm_seq_len = w.size();
  int in_ch = n_channels * w.size() + (ar ? 1 : 0);
  EmulatorModel m = build_model(cfg::model_arch(config), in_ch, ac);
  m.autoregressive = ar;
  m.window = w;
  m.init_params(uint64_t(int64_t(config.at("seed"))));
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw geoemu::runtime_error("cannot write \"" + path.string() + "\"");
  out << text;
}

json report_json(const MetricReport& r) {
  return json{{"scope", r.scope}, {"n", r.n_samples}, {"r2", r.r2},
              {"rmse", r.rmse},   {"slope", r.slope}, {"mae", r.mae}};
}

std::string report_csv_row(const MetricReport& r) {
  return r.scope + "," + std::to_string(r.n_samples) + "," + fmt(r.r2) + "," +
         fmt(r.rmse) + "," + fmt(r.slope) + "," + fmt(r.mae) + "\n";
}

// Observed log-space target restricted to steps, with loss mask
// (valid AND observed).
struct TestSeries {
  Tensor obs;   // [N,L,W]
  Tensor mask;  // [N,L,W]
  std::vector<int> steps;
};

TestSeries test_series(const Dataset& ds, const std::vector<int>& steps) {
  const int L = ds.grid.length, W = ds.grid.width;
  TestSeries s;
  s.steps = steps;
  s.obs = Tensor({int(steps.size()), L, W});
  s.mask = Tensor({int(steps.size()), L, W});
  for (size_t i = 0; i < steps.size(); ++i) {
    int t = steps[i];
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x) {
        s.obs.at(int(i), y, x) = ds.target.values.at(t, y, x);
        s.mask.at(int(i), y, x) =
            (ds.grid.valid_at(y, x) &&
             ds.target.observed(t, y, x, W, L))
                ? 1.0
                : 0.0;
      }
  }
  return s;
}

void require_nonempty_test(const std::vector<int>& test) {
  if (test.empty()) throw validation_error("no test samples in configured range");
}

// Predictions aligned with a TestSeries; absent slots masked out.
struct PredSeries {
  Tensor pred;      // [N,L,W]
  Tensor mask;      // [N,L,W] intersected with the test mask
  std::vector<uint8_t> covered;  // per timestamp
};

PredSeries from_lead(const LeadFieldSeries& lf, int lead, const TestSeries& ts) {
  const int N = ts.obs.dim(0), L = ts.obs.dim(1), W = ts.obs.dim(2);
  PredSeries p;
  p.pred = Tensor({N, L, W});
  p.mask = Tensor({N, L, W});
  p.covered.assign(size_t(N), 0);
  const auto& col = lf.fields[size_t(lead - 1)];
  for (int i = 0; i < N; ++i) {
    if (!col[size_t(i)]) continue;
    p.covered[size_t(i)] = 1;
    const Tensor& f = *col[size_t(i)];
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x) {
        p.pred.at(i, y, x) = f.at2(y, x);
        p.mask.at(i, y, x) = ts.mask.at(i, y, x);
      }
  }
  return p;
}

PredSeries from_oracle(const Dataset& ds, const GroundTruth& truth,
                       const TestSeries& ts) {
  const int N = ts.obs.dim(0), L = ts.obs.dim(1), W = ts.obs.dim(2);
  const Tensor& Z = ds.predictors.values;
  PredSeries p;
  p.pred = Tensor({N, L, W});
  p.mask = ts.mask;
  p.covered.assign(size_t(N), 1);
  for (int i = 0; i < N; ++i) {
    int t = ts.steps[size_t(i)];
    int tl = std::max(0, t - 1);
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x)
        p.pred.at(i, y, x) = truth.eval(Z.at4(t, truth.f1, y, x),
                                        Z.at4(tl, truth.f2, y, x),
                                        Z.at4(t, truth.f3, y, x));
  }
  return p;
}

void save_field_series(const fs::path& path, const GridSpec& grid,
                       const TestSeries& ts, const PredSeries& ps) {
  ArrayFile f;
  const int N = ts.obs.dim(0);
  f.dims["time"] = N;
  f.dims["y"] = grid.length;
  f.dims["x"] = grid.width;
  f.arrays["prediction"] = ps.pred;
  std::vector<uint8_t> mask(size_t(ps.mask.size()));
  for (int64_t i = 0; i < ps.mask.size(); ++i) mask[size_t(i)] = ps.mask[i] != 0;
  f.byte_arrays["pred_mask"] = std::move(mask);
  f.byte_arrays["valid_mask"] = grid.valid_mask;
  f.attrs["time_offset"] = std::to_string(ts.steps.front());
  if (grid.calendar_start)
    f.attrs["calendar_start"] = shift_calendar(*grid.calendar_start,
                                               ts.steps.front());
  f.save(path.string());
}

GridSpec slice_grid(const GridSpec& grid, int offset, int n) {
  GridSpec g = grid;
  g.n_steps = n;
  if (grid.calendar_start)
    g.calendar_start = shift_calendar(*grid.calendar_start, offset);
  return g;
}

std::vector<uint8_t> mask_bytes(const Tensor& mask) {
  std::vector<uint8_t> out(size_t(mask.size()));
  for (int64_t i = 0; i < mask.size(); ++i) out[size_t(i)] = mask[i] != 0;
  return out;
}

// Seasonal/non-seasonal PC-1 agreement between a prediction series and the
// observations, using EOFs of the observed anomalies. Compared only over
// fully covered timestamps.
struct PcAgreement {
  double corr_seasonal = std::nan("");
  double rmse_seasonal = std::nan("");
  double corr_nonseasonal = std::nan("");
  double rmse_nonseasonal = std::nan("");
};

PcAgreement pc_agreement(const GridSpec& sgrid, const TestSeries& ts,
                         const PredSeries& ps) {
  PcAgreement out;
  const int N = ts.obs.dim(0);
  std::vector<int> covered;
  for (int i = 0; i < N; ++i)
    if (ps.covered[size_t(i)]) covered.push_back(i);
  if (covered.size() < 3) return out;

  std::vector<uint8_t> obs_bytes = mask_bytes(ts.mask);
  std::vector<uint8_t> pred_bytes = mask_bytes(ps.mask);
  for (AnomalyKind kind : {AnomalyKind::seasonal, AnomalyKind::nonseasonal}) {
    AnomalySeries ao = compute_anomalies(ts.obs, obs_bytes, sgrid, kind);
    AnomalySeries ap = compute_anomalies(ps.pred, pred_bytes, sgrid, kind);
    EOFResult basis;
    try {
      basis = eof(ao, 1);
    } catch (const Error&) {
      continue;  // degenerate anomalies: agreement stays undefined
    }
    Tensor pco = project(ao, basis), pcp = project(ap, basis);
    std::vector<double> a, b;
    for (int i : covered) {
      a.push_back(pco.at2(0, i));
      b.push_back(pcp.at2(0, i));
    }
    PcComparison c = pc_compare(a, b);
    if (kind == AnomalyKind::seasonal) {
      out.corr_seasonal = c.correlation;
      out.rmse_seasonal = c.rmse;
    } else {
      out.corr_nonseasonal = c.correlation;
      out.rmse_nonseasonal = c.rmse;
    }
  }
  return out;
}

std::string checkpoint_path(const json& config, const char* section) {
  std::string p = config.at(section).at("checkpoint");
  if (p.empty())
    throw validation_error(std::string("config: $.") + section +
                           ".checkpoint path required");
  return p;
}

}  // namespace

json cmd_synth(const json& config, const std::string& out_dir) {
  SyntheticConfig sc = cfg::synthetic_config(config);
  uint64_t seed = uint64_t(int64_t(config.at("seed")));
  SyntheticDataset sd = generate_synthetic(sc, seed);
  fs::create_directories(out_dir);
  Dataset ds{sd.grid, sd.predictors, sd.target};
  save_dataset((fs::path(out_dir) / "dataset.gemu").string(), ds);
  json truth = {{"a", sd.truth.a},       {"b", sd.truth.b},
                {"c_lag", sd.truth.c_lag}, {"d", sd.truth.d},
                {"f1", sd.truth.f1},     {"f2", sd.truth.f2},
                {"f3", sd.truth.f3},     {"seed", seed}};
  write_text(fs::path(out_dir) / "ground_truth.json", truth.dump(2) + "\n");
  cfg::write_resolved(config, out_dir);
  return json{{"path", (fs::path(out_dir) / "dataset.gemu").string()},
              {"n_steps", sd.grid.n_steps},
              {"width", sd.grid.width},
              {"length", sd.grid.length}};
}

json cmd_train(const json& config, const std::string& out_dir) {
  Pipeline p = build_pipeline(config);
  EmulatorModel model =
      make_model(config, p.ds.grid, p.ds.predictors.channels());
  TrainConfig tc = cfg::train_config(config);
  TrainHistory h = model.autoregressive
                       ? train_autoregressive(model, p.ds.grid, p.pre, p.splits, tc)
                       : train_static(model, p.ds.grid, p.pre, p.splits, tc);
  fs::create_directories(out_dir);
  std::string ckpt = (fs::path(out_dir) / "checkpoint.gemu").string();
  save_checkpoint(ckpt, model, p.pre.pred_stats, p.pre.targ_stats);
  export_history_csv((fs::path(out_dir) / "history.csv").string(), h);
  cfg::write_resolved(config, out_dir);
  double best = h.best_epoch >= 0
                    ? h.epochs[size_t(h.best_epoch)].val_loss
                    : std::nan("");
  return json{{"checkpoint", ckpt},
              {"epochs", h.epochs.size()},
              {"best_epoch", h.best_epoch},
              {"best_val_loss", best},
              {"parameters", model.count_parameters()}};
}

json cmd_evaluate(const json& config, const std::string& out_dir) {
  Pipeline p = build_pipeline(config);
  require_nonempty_test(p.splits.test);
  TestSeries ts = test_series(p.ds, p.splits.test);
  const int t0 = p.splits.test.front(), t1 = p.splits.test.back();

  std::string predictor = config.at("evaluate").at("predictor");
  PredSeries ps;
  if (predictor == "checkpoint") {
    Checkpoint ck = load_checkpoint(checkpoint_path(config, "evaluate"));
    if (ck.model.arch == Arch::AFNO &&
        (ck.model.cfg.field_height != p.ds.grid.length ||
         ck.model.cfg.field_width != p.ds.grid.width))
      throw validation_error("checkpoint grid does not match dataset grid");
    ForecastMode mode = ck.model.autoregressive ? ForecastMode::autoregressive
                                                : ForecastMode::statical;
    LeadFieldSeries lf = lead_fields(mode, &ck.model, p.pre, p.ds.grid, t0, t1, 1);
    ps = from_lead(lf, 1, ts);
  } else if (predictor == "persistence") {
    LeadFieldSeries lf =
        lead_fields(ForecastMode::persistence, nullptr, p.pre, p.ds.grid, t0, t1, 1);
    ps = from_lead(lf, 1, ts);
  } else if (predictor == "oracle") {
    std::optional<GroundTruth> truth = p.truth;
    std::string tp = config.at("evaluate").at("truth_path");
    if (!tp.empty()) {
      json tj = cfg::load_file(tp);
      GroundTruth g;
      g.a = tj.at("a");
      g.b = tj.at("b");
      g.c_lag = tj.at("c_lag");
      g.d = tj.at("d");
      g.f1 = tj.at("f1");
      g.f2 = tj.at("f2");
      g.f3 = tj.at("f3");
      truth = g;
    }
    if (!truth)
      throw validation_error("oracle predictor needs synthetic data or "
                             "$.evaluate.truth_path");
    ps = from_oracle(p.ds, *truth, ts);
  } else {
    throw validation_error("config: $.evaluate.predictor must be checkpoint, "
                           "persistence or oracle, got \"" + predictor + "\"");
  }

  fs::create_directories(out_dir);
  std::vector<MetricReport> reports;
  reports.push_back(compute_metrics(ps.pred, ts.obs, ps.mask, "global"));
  auto basins = basin_masks(p.ds.grid, cfg::basin_boxes(config));
  const int L = p.ds.grid.length, W = p.ds.grid.width, N = ts.obs.dim(0);
  for (const auto& [name, bmask] : basins) {
    Tensor m = ps.mask;
    for (int i = 0; i < N; ++i)
      for (int64_t c = 0; c < int64_t(L) * W; ++c)
        if (!bmask[size_t(c)]) m[int64_t(i) * L * W + c] = 0;
    try {
      reports.push_back(compute_metrics(ps.pred, ts.obs, m, name));
    } catch (const Error&) {
      // basins with < 2 pairs are simply absent from the report
    }
  }

  std::string csv = "scope,n,r2,rmse,slope,mae\n";
  json jreports = json::array();
  for (const auto& r : reports) {
    csv += report_csv_row(r);
    jreports.push_back(report_json(r));
  }
  write_text(fs::path(out_dir) / "metrics.csv", csv);
  write_text(fs::path(out_dir) / "metrics.json", jreports.dump(2) + "\n");

  ArrayFile maps;
  maps.dims["y"] = L;
  maps.dims["x"] = W;
  maps.arrays["correlation"] = correlation_map(ps.pred, ts.obs, ps.mask);
  maps.arrays["nrmse"] = nrmse_map(ps.pred, ts.obs, ps.mask);
  maps.byte_arrays["valid_mask"] = p.ds.grid.valid_mask;
  maps.save((fs::path(out_dir) / "maps.gemu").string());

  // Scatter export, stride-subsampled to a deterministic cap.
  int64_t pairs = 0;
  for (int64_t i = 0; i < ps.mask.size(); ++i) pairs += ps.mask[i] != 0;
  int64_t stride = std::max<int64_t>(1, pairs / 20000);
  std::string scatter = "obs,pred\n";
  int64_t k = 0;
  for (int64_t i = 0; i < ps.mask.size(); ++i) {
    if (ps.mask[i] == 0) continue;
    if (k++ % stride == 0) scatter += fmt(ts.obs[i]) + "," + fmt(ps.pred[i]) + "\n";
  }
  write_text(fs::path(out_dir) / "scatter.csv", scatter);

  save_field_series(fs::path(out_dir) / "predictions.gemu", p.ds.grid, ts, ps);
  cfg::write_resolved(config, out_dir);
  return json{{"metrics", jreports}};
}

json cmd_forecast(const json& config, const std::string& out_dir) {
  Pipeline p = build_pipeline(config);
  require_nonempty_test(p.splits.test);
  int horizon = config.at("forecast").at("horizon");
  if (horizon < 1)
    throw validation_error("config: $.forecast.horizon must be >= 1");
  TestSeries ts = test_series(p.ds, p.splits.test);
  const int t0 = p.splits.test.front(), t1 = p.splits.test.back();
  const int N = ts.obs.dim(0);

  std::string predictor = config.at("forecast").at("predictor");
  ForecastMode mode;
  std::optional<Checkpoint> ck;
  if (predictor == "checkpoint") {
    ck = load_checkpoint(checkpoint_path(config, "forecast"));
    if (!ck->model.autoregressive)
      throw validation_error("forecast needs an auto-regressive checkpoint or "
                             "the persistence predictor");
    mode = ForecastMode::autoregressive;
  } else if (predictor == "persistence") {
    mode = ForecastMode::persistence;
  } else {
    throw validation_error("config: $.forecast.predictor must be checkpoint or "
                           "persistence, got \"" + predictor + "\"");
  }

  LeadFieldSeries lf = lead_fields(mode, ck ? &ck->model : nullptr, p.pre,
                                   p.ds.grid, t0, t1, horizon);
  GridSpec sgrid = slice_grid(p.ds.grid, t0, N);

  fs::create_directories(out_dir);
  std::string csv =
      "lead,n,r2,rmse,slope,mae,corr_seas_pc,rmse_seas_pc,corr_nonseas_pc,"
      "rmse_nonseas_pc\n";
  json rows = json::array();
  for (int k = 1; k <= horizon; ++k) {
    PredSeries ps = from_lead(lf, k, ts);
    MetricReport r = compute_metrics(ps.pred, ts.obs, ps.mask,
                                     "lead_" + std::to_string(k));
    PcAgreement pc = pc_agreement(sgrid, ts, ps);
    csv += std::to_string(k) + "," + std::to_string(r.n_samples) + "," +
           fmt(r.r2) + "," + fmt(r.rmse) + "," + fmt(r.slope) + "," +
           fmt(r.mae) + "," + fmt(pc.corr_seasonal) + "," +
           fmt(pc.rmse_seasonal) + "," + fmt(pc.corr_nonseasonal) + "," +
           fmt(pc.rmse_nonseasonal) + "\n";
    json row = report_json(r);
    row["lead"] = k;
    row["corr_seas_pc"] = pc.corr_seasonal;
    row["rmse_seas_pc"] = pc.rmse_seasonal;
    row["corr_nonseas_pc"] = pc.corr_nonseasonal;
    row["rmse_nonseas_pc"] = pc.rmse_nonseasonal;
    rows.push_back(std::move(row));
  }
  write_text(fs::path(out_dir) / "lead_table.csv", csv);
  write_text(fs::path(out_dir) / "lead_table.json", rows.dump(2) + "\n");
  cfg::write_resolved(config, out_dir);
  return json{{"leads", rows}};
}

json cmd_eof(const json& config, const std::string& out_dir) {
  LoadedData in = load_input(config);
  const GridSpec& grid = in.ds.grid;
  const int L = grid.length, W = grid.width;
  int n_modes = config.at("diagnostics").at("n_modes");
  bool alt_annual = config.at("diagnostics").at("alt_annual_mean");

  // Prediction window (defaults to the observations themselves).
  int offset = 0, n = grid.n_steps;
  Tensor pred;
  std::vector<uint8_t> pred_mask;
  std::string pred_path = config.at("diagnostics").at("pred_path");
  if (!pred_path.empty()) {
    ArrayFile f = ArrayFile::load(pred_path);
    pred = f.array("prediction");
    if (pred.rank() != 3 || pred.dim(1) != L || pred.dim(2) != W)
      throw validation_error("prediction grid does not match observation grid");
    pred_mask = f.byte_arrays.at("pred_mask");
    offset = std::stoi(f.attr("time_offset"));
    n = pred.dim(0);
    if (offset < 0 || offset + n > grid.n_steps)
      throw validation_error("prediction window exceeds observation record");
  }
  if (n % 12 != 0)
    throw validation_error("EOF window must cover whole years, got " +
                           std::to_string(n) + " steps");

  Tensor obs({n, L, W});
  std::vector<uint8_t> obs_mask(size_t(n) * L * W);
  for (int i = 0; i < n; ++i)
    for (int64_t c = 0; c < int64_t(L) * W; ++c) {
      obs[int64_t(i) * L * W + c] = in.ds.target.values[int64_t(i + offset) * L * W + c];
      obs_mask[size_t(int64_t(i) * L * W + c)] =
          in.ds.target.obs_mask[size_t(int64_t(i + offset) * L * W + c)] &&
          grid.valid_mask[size_t(c)];
    }
  if (pred.empty()) {
    pred = obs;
    pred_mask = obs_mask;
  }
  GridSpec sgrid = slice_grid(grid, offset, n);

  fs::create_directories(out_dir);
  std::string pcs_csv = "kind,mode,t,obs_pc,pred_pc\n";
  std::string cmp_csv = "kind,mode,correlation,rmse\n";
  json summary = json::object();
  for (AnomalyKind kind : {AnomalyKind::seasonal, AnomalyKind::nonseasonal}) {
    const char* kname = kind == AnomalyKind::seasonal ? "seasonal" : "nonseasonal";
    AnomalySeries ao = compute_anomalies(obs, obs_mask, sgrid, kind, alt_annual);
    AnomalySeries ap = compute_anomalies(pred, pred_mask, sgrid, kind, alt_annual);
    EOFResult basis;
    try {
      basis = eof(ao, n_modes);
    } catch (const Error& e) {
      throw validation_error(std::string(kname) + " anomalies: " + e.what());
    }
    Tensor pcp = project(ap, basis);

    ArrayFile f;
    f.dims["mode"] = n_modes;
    f.dims["y"] = L;
    f.dims["x"] = W;
    f.arrays["patterns"] = basis.patterns;
    f.arrays["pcs"] = basis.pcs;
    f.byte_arrays["cell_valid"] = basis.cell_valid;
    std::string ev;
    for (size_t i = 0; i < basis.explained.size(); ++i)
      ev += (i ? "," : "") + fmt(basis.explained[i]);
    f.attrs["explained_variance"] = ev;
    f.attrs["anomaly_kind"] = kname;
    f.save((fs::path(out_dir) / ("eof_" + std::string(kname) + ".gemu")).string());

    json modes = json::array();
    for (int m = 0; m < n_modes; ++m) {
      std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
      for (int t = 0; t < n; ++t) {
        a[size_t(t)] = basis.pcs.at2(m, t);
        b[size_t(t)] = pcp.at2(m, t);
        pcs_csv += std::string(kname) + "," + std::to_string(m + 1) + "," +
                   std::to_string(t) + "," + fmt(a[size_t(t)]) + "," +
                   fmt(b[size_t(t)]) + "\n";
      }
      PcComparison c = pc_compare(a, b);
      cmp_csv += std::string(kname) + "," + std::to_string(m + 1) + "," +
                 fmt(c.correlation) + "," + fmt(c.rmse) + "\n";
      modes.push_back(json{{"mode", m + 1},
                           {"explained_variance", basis.explained[size_t(m)]},
                           {"pc_correlation", c.correlation},
                           {"pc_rmse", c.rmse}});
    }
    summary[kname] = std::move(modes);
  }
  write_text(fs::path(out_dir) / "pcs.csv", pcs_csv);
  write_text(fs::path(out_dir) / "pc_compare.csv", cmp_csv);
  write_text(fs::path(out_dir) / "eof_summary.json", summary.dump(2) + "\n");
  cfg::write_resolved(config, out_dir);
  return summary;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open artifact \"" + path + "\"");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    size_t pos = 0;
    while (true) {
      size_t c = line.find(',', pos);
      cells.push_back(line.substr(pos, c == std::string::npos ? std::string::npos
                                                              : c - pos));
      if (c == std::string::npos) break;
      pos = c + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

json cmd_plot(const json& config, const std::string& out_dir) {
  std::string kind = config.at("plot").at("kind");
  std::string path = config.at("plot").at("path");
  if (path.empty()) throw validation_error("config: $.plot.path required");
  fs::create_directories(out_dir);
  json made = json::array();

  if (kind == "lead_table") {
    auto rows = read_csv(path);
    plot::Series s;
    s.name = "rmse";
    s.color = plot::palette_color(0);
    for (size_t i = 1; i < rows.size(); ++i) {
      s.xs.push_back(std::stod(rows[i][0]));
      s.ys.push_back(std::stod(rows[i][3]));
    }
    std::string out = (fs::path(out_dir) / "lead_rmse.ppm").string();
    plot::write_ppm(out, plot::render_lines({s}));
    made.push_back(out);
  } else if (kind == "map") {
    ArrayFile f = ArrayFile::load(path);
    for (const auto& [name, arr] : f.arrays) {
      if (arr.rank() != 2) continue;
      std::string out = (fs::path(out_dir) / (name + ".ppm")).string();
      plot::write_ppm(out, plot::render_heatmap(arr, config.at("plot").at("scale")));
      made.push_back(out);
    }
    if (made.empty()) throw validation_error("no 2-D fields in \"" + path + "\"");
  } else if (kind == "pc_series") {
    auto rows = read_csv(path);  // kind,mode,t,obs_pc,pred_pc
    std::map<std::string, plot::Series> series;
    int color = 0;
    for (size_t i = 1; i < rows.size(); ++i) {
      for (int col : {3, 4}) {
        std::string key = rows[i][0] + "/m" + rows[i][1] +
                          (col == 3 ? "/obs" : "/pred");
        auto [it, inserted] = series.try_emplace(key);
        if (inserted) {
          it->second.name = key;
          it->second.color = plot::palette_color(color++);
        }
        it->second.xs.push_back(std::stod(rows[i][2]));
        it->second.ys.push_back(std::stod(rows[i][col]));
      }
    }
    std::vector<plot::Series> all;
    for (auto& [k, s] : series) all.push_back(std::move(s));
    std::string out = (fs::path(out_dir) / "pc_series.ppm").string();
    plot::write_ppm(out, plot::render_lines(all));
    made.push_back(out);
  } else if (kind == "scatter") {
    auto rows = read_csv(path);
    std::vector<double> xs, ys;
    for (size_t i = 1; i < rows.size(); ++i) {
      xs.push_back(std::stod(rows[i][0]));
      ys.push_back(std::stod(rows[i][1]));
    }
    std::string out = (fs::path(out_dir) / "scatter.ppm").string();
    plot::write_ppm(out, plot::render_scatter(xs, ys));
    made.push_back(out);
  } else {
    throw validation_error("config: $.plot.kind unknown: \"" + kind + "\"");
  }
  cfg::write_resolved(config, out_dir);
  return json{{"images", made}};
}

namespace {

json with_overrides(const json& base, const json& patch, int cell_index) {
  json c = base;
  c.merge_patch(patch);
  c["seed"] = int64_t(base.at("seed")) + 1000 * (cell_index + 1);
  return c;
}

}  // namespace

json cmd_suite(const json& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  json report = json::object();
  int cell_idx = 0;
  auto cell_dir = [&](const std::string& name) {
    return (fs::path(out_dir) / "cells" / name).string();
  };

  // 1. Four architectures, static mapping, window [t-1, t].
  json archs = json::array();
  for (const std::string arch : {"cnn", "convlstm", "afno", "unet"}) {
    json c = with_overrides(
        config,
        json{{"model",
              {{"arch", arch},
               {"mode", "static"},
               {"window", {{"delta_minus", 1}, {"delta_plus", 0}}}}}},
        cell_idx++);
    std::string dir = cell_dir("static_" + arch);
    json tr = cmd_train(c, dir);
    c["evaluate"]["checkpoint"] = tr.at("checkpoint");
    json ev = cmd_evaluate(c, dir);
    json row = ev.at("metrics").at(0);
    row["cell"] = "static_" + arch;
    row["parameters"] = tr.at("parameters");
    archs.push_back(std::move(row));
  }
  report["static_architectures"] = archs;

  // 2. UNet predictor windows.
  json windows = json::array();
  const std::pair<int, int> wins[] = {{0, 0}, {1, 0}, {2, 0}, {1, 1}};
  for (auto [dm, dp] : wins) {
    std::string name =
        "unet_w" + std::to_string(dm) + std::to_string(dp);
    json c = with_overrides(
        config,
        json{{"model",
              {{"arch", "unet"},
               {"mode", "static"},
               {"window", {{"delta_minus", dm}, {"delta_plus", dp}}}}}},
        cell_idx++);
    std::string dir = cell_dir(name);
    json tr = cmd_train(c, dir);
    c["evaluate"]["checkpoint"] = tr.at("checkpoint");
    json ev = cmd_evaluate(c, dir);
    json row = ev.at("metrics").at(0);
    row["cell"] = name;
    windows.push_back(std::move(row));
  }
  report["unet_windows"] = windows;

  // 3. Forecasting: persistence, AR-1, AR-6 at leads 1..11.
  json fc = json::object();
  {
    json c = with_overrides(config,
                            json{{"forecast",
                                  {{"predictor", "persistence"},
                                   {"horizon", 11}}}},
                            cell_idx++);
    fc["persistence"] = cmd_forecast(c, cell_dir("persistence")).at("leads");
  }
  for (int k : {1, 6}) {
    std::string name = "unet_ar" + std::to_string(k);
    json c = with_overrides(
        config,
        json{{"model",
              {{"arch", "unet"},
               {"mode", "ar"},
               {"window", {{"delta_minus", 0}, {"delta_plus", 0}}}}},
             {"training", {{"rollout_k", k}}},
             {"forecast", {{"predictor", "checkpoint"}, {"horizon", 11}}}},
        cell_idx++);
    std::string dir = cell_dir(name);
    json tr = cmd_train(c, dir);
    c["forecast"]["checkpoint"] = tr.at("checkpoint");
    fc[name] = cmd_forecast(c, dir).at("leads");
  }
  report["forecast"] = fc;

  write_text(fs::path(out_dir) / "suite_report.json", report.dump(2) + "\n");

  std::string csv = "section,cell,scope,n,r2,rmse,slope,mae\n";
  for (const char* section : {"static_architectures", "unet_windows"})
    for (const auto& row : report.at(section))
      csv += std::string(section) + "," + std::string(row.at("cell")) + "," +
             std::string(row.at("scope")) + "," +
             std::to_string(int64_t(row.at("n"))) + "," +
             fmt(row.at("r2")) + "," + fmt(row.at("rmse")) + "," +
             fmt(row.at("slope")) + "," + fmt(row.at("mae")) + "\n";
  for (const auto& [name, leads] : report.at("forecast").items())
    for (const auto& row : leads)
      csv += "forecast," + name + ",lead_" +
             std::to_string(int(row.at("lead"))) + "," +
             std::to_string(int64_t(row.at("n"))) + "," + fmt(row.at("r2")) +
             "," + fmt(row.at("rmse")) + "," + fmt(row.at("slope")) + "," +
             fmt(row.at("mae")) + "\n";
  write_text(fs::path(out_dir) / "suite_report.csv", csv);
  cfg::write_resolved(config, out_dir);
  return report;
}

json run_command(const std::string& name, const json& config,
                 const std::string& out_dir) {
  if (name == "synth") return cmd_synth(config, out_dir);
  if (name == "train") return cmd_train(config, out_dir);
  if (name == "evaluate") return cmd_evaluate(config, out_dir);
  if (name == "forecast") return cmd_forecast(config, out_dir);
  if (name == "eof") return cmd_eof(config, out_dir);
  if (name == "plot") return cmd_plot(config, out_dir);
  if (name == "suite") return cmd_suite(config, out_dir);
  throw validation_error("unknown command \"" + name + "\"");
}

}  // namespace geoemu::cmd
