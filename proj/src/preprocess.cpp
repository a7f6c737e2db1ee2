#include "geoemu/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace geoemu {

Tensor log_transform(const Tensor& field, const std::vector<uint8_t>& mask,
                     Direction dir) {
  if (field.size() != int64_t(mask.size()))
    throw validation_error("log_transform: mask size mismatch");
  Tensor out = field;
  for (int64_t i = 0; i < out.size(); ++i) {
    if (mask[size_t(i)] == 0) continue;
    if (dir == Direction::forward) {
      double v = out[i];
      if (!(v > 0.0) || !std::isfinite(v))
        throw validation_error("log_transform: non-positive value " +
                               std::to_string(v) + " at observed cell index " +
                               std::to_string(i));
      out[i] = std::log(v);
    } else {
      out[i] = std::exp(out[i]);
    }
  }
  return out;
}

NormStats compute_stats(const Tensor& values, const std::vector<uint8_t>& valid,
                        int epoch_start, int epoch_end) {
  if (values.size() != int64_t(valid.size()))
    throw validation_error("compute_stats: mask size mismatch");
  if (epoch_start > epoch_end || epoch_start < 0 || epoch_end >= values.dim(0))
    throw validation_error("compute_stats: empty or out-of-range epoch");
  const int C = values.rank() == 4 ? values.dim(1) : 1;
  const int64_t per_step = values.size() / values.dim(0);
  const int64_t per_chan = per_step / C;

  NormStats s;
  s.epoch_start = epoch_start;
  s.epoch_end = epoch_end;
  s.mean.assign(size_t(C), 0.0);
  s.std.assign(size_t(C), 0.0);
  for (int c = 0; c < C; ++c) {
    double sum = 0, sum2 = 0;
    int64_t n = 0;
    for (int t = epoch_start; t <= epoch_end; ++t) {
      int64_t base = int64_t(t) * per_step + int64_t(c) * per_chan;
      for (int64_t i = 0; i < per_chan; ++i) {
        if (valid[size_t(base + i)] == 0) continue;
        double v = values[base + i];
        sum += v;
        sum2 += v * v;
        ++n;
      }
    }
    if (n == 0)
      throw validation_error("compute_stats: channel " + std::to_string(c) +
                             " has zero valid samples in epoch");
    double mean = sum / double(n);
    double var = sum2 / double(n) - mean * mean;  // population variance
    if (var < 0) var = 0;
    s.mean[size_t(c)] = mean;
    s.std[size_t(c)] = std::max(std::sqrt(var), NormStats::kStdFloor);
  }
  return s;
}

Tensor standardize(const Tensor& values, const NormStats& stats, Direction dir) {
  const int C = values.rank() == 4 ? values.dim(1) : 1;
  if (int(stats.mean.size()) != C)
    throw validation_error("standardize: stats have " +
                           std::to_string(stats.mean.size()) + " channels, field has " +
                           std::to_string(C));
  const int64_t per_step = values.size() / values.dim(0);
  const int64_t per_chan = per_step / C;
  Tensor out = values;
  for (int t = 0; t < values.dim(0); ++t) {
    for (int c = 0; c < C; ++c) {
      double m = stats.mean[size_t(c)], sd = stats.std[size_t(c)];
      int64_t base = int64_t(t) * per_step + int64_t(c) * per_chan;
      if (dir == Direction::forward)
        for (int64_t i = 0; i < per_chan; ++i) out[base + i] = (out[base + i] - m) / sd;
      else
        for (int64_t i = 0; i < per_chan; ++i) out[base + i] = out[base + i] * sd + m;
    }
  }
  return out;
}

void fill_missing(Tensor& values, const std::vector<uint8_t>& missing) {
  if (values.size() != int64_t(missing.size()))
    throw validation_error("fill_missing: mask size mismatch");
  for (int64_t i = 0; i < values.size(); ++i)
    if (missing[size_t(i)] != 0) values[i] = 0.0;
}

Tensor window_predictors(const Tensor& pred_norm, int t, const WindowSpec& w) {
  const int T = pred_norm.dim(0), C = pred_norm.dim(1);
  const int L = pred_norm.dim(2), W = pred_norm.dim(3);
  if (t - w.delta_minus < 0 || t + w.delta_plus > T - 1)
    throw IncompleteWindow("incomplete window for step " + std::to_string(t) +
                           " (delta- " + std::to_string(w.delta_minus) +
                           ", delta+ " + std::to_string(w.delta_plus) + ", T " +
                           std::to_string(T) + ")");
  Tensor out({C * w.size(), L, W});
  int oc = 0;
  for (int s = t - w.delta_minus; s <= t + w.delta_plus; ++s) {
    for (int c = 0; c < C; ++c, ++oc) {
      for (int y = 0; y < L; ++y)
        for (int x = 0; x < W; ++x) out.at(oc, y, x) = pred_norm.at4(s, c, y, x);
    }
  }
  return out;
}

Preprocessed preprocess(const Dataset& ds, const std::vector<int>& train_idx,
                        const PreprocessOptions& opt) {
  if (train_idx.empty()) throw validation_error("preprocess: empty train index list");
  const GridSpec& g = ds.grid;
  const int T = g.n_steps, L = g.length, W = g.width;

  int ep0 = 0, ep1 = T - 1;
  if (!opt.stats_full_period) {
    ep0 = *std::min_element(train_idx.begin(), train_idx.end());
    ep1 = *std::max_element(train_idx.begin(), train_idx.end());
  }

  Preprocessed p;
  // Predictors: valid = not missing AND ocean. Land cells never reach the
  // statistics and are zero-filled, whatever values the source carries there.
  const int C = ds.predictors.channels();
  std::vector<uint8_t> pred_valid(ds.predictors.missing.size());
  std::vector<uint8_t> pred_fill(ds.predictors.missing.size());
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < L; ++y)
        for (int x = 0; x < W; ++x) {
          size_t i = ((size_t(t) * C + c) * L + y) * W + x;
          bool ok = !ds.predictors.missing[i] && g.valid_at(y, x);
          pred_valid[i] = ok ? 1 : 0;
          pred_fill[i] = ok ? 0 : 1;
        }
  p.pred_stats = compute_stats(ds.predictors.values, pred_valid, ep0, ep1);
  p.pred = standardize(ds.predictors.values, p.pred_stats, Direction::forward);
  fill_missing(p.pred, pred_fill);

  // Observed means observed AND ocean; land never counts as a target cell.
  p.obs_mask.assign(ds.target.obs_mask.size(), 0);
  for (int t = 0; t < T; ++t)
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x) {
        size_t i = (size_t(t) * L + y) * W + x;
        p.obs_mask[i] = (ds.target.obs_mask[i] && g.valid_at(y, x)) ? 1 : 0;
      }
  // Target: optional log, then standardization in log space.
  Tensor targ = opt.log_target
                    ? log_transform(ds.target.values, p.obs_mask, Direction::forward)
                    : ds.target.values;
  p.targ_stats = compute_stats(targ, p.obs_mask, ep0, ep1);
  if (!opt.standardize_target) {
    p.targ_stats.mean.assign(1, 0.0);
    p.targ_stats.std.assign(1, 1.0);
  }
  p.targ = standardize(targ, p.targ_stats, Direction::forward);
  // Unobserved cells carry no signal downstream.
  std::vector<uint8_t> unobs(p.obs_mask.size());
  for (size_t i = 0; i < unobs.size(); ++i) unobs[i] = p.obs_mask[i] ? 0 : 1;
  fill_missing(p.targ, unobs);

  // AR previous-state channel: observed value, else per-cell monthly train
  // climatology, else zero (land and never-observed cells).
  const bool has_cal = g.calendar_start.has_value();
  const int n_bins = has_cal ? 12 : 1;
  std::vector<double> clim_sum(size_t(n_bins) * L * W, 0.0);
  std::vector<int> clim_n(size_t(n_bins) * L * W, 0);
  for (int t : train_idx) {
    int b = has_cal ? g.month_of(t) : 0;
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x) {
        if (!ds.target.observed(t, y, x, W, L)) continue;
        size_t i = (size_t(b) * L + y) * W + x;
        clim_sum[i] += p.targ.at(t, y, x);
        clim_n[i] += 1;
      }
  }
  p.ar_state = Tensor({T, L, W});
  for (int t = 0; t < T; ++t) {
    int b = has_cal ? g.month_of(t) : 0;
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x) {
        if (!g.valid_at(y, x)) continue;
        if (ds.target.observed(t, y, x, W, L)) {
          p.ar_state.at(t, y, x) = p.targ.at(t, y, x);
        } else {
          size_t i = (size_t(b) * L + y) * W + x;
          p.ar_state.at(t, y, x) = clim_n[i] > 0 ? clim_sum[i] / clim_n[i] : 0.0;
        }
      }
  }
  return p;
}

}  // namespace geoemu
