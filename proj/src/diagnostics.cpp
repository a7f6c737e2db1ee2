#include "geoemu/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "geoemu/error.hpp"

namespace geoemu {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct PairStats {
  int64_t n = 0;
  double sp = 0, so = 0, spp = 0, soo = 0, spo = 0;
  double se2 = 0, sae = 0;

  void add(double p, double o) {
    ++n;
    sp += p;
    so += o;
    spp += p * p;
    soo += o * o;
    spo += p * o;
    se2 += (p - o) * (p - o);
    sae += std::fabs(p - o);
  }
  double var_p() const { return spp / n - (sp / n) * (sp / n); }
  double var_o() const { return soo / n - (so / n) * (so / n); }
  double cov() const { return spo / n - (sp / n) * (so / n); }
};

MetricReport finish(const PairStats& s, const std::string& scope) {
  if (s.n < 2)
    throw validation_error("compute_metrics: need at least 2 pairs, got " +
                           std::to_string(s.n));
  MetricReport r;
  r.scope = scope;
  r.n_samples = s.n;
  r.rmse = std::sqrt(s.se2 / s.n);
  r.mae = s.sae / s.n;
  double vp = s.var_p(), vo = s.var_o(), cv = s.cov();
  r.slope = vo > 0 ? cv / vo : 0.0;
  r.r2 = (vp > 0 && vo > 0) ? (cv * cv) / (vp * vo) : 0.0;
  return r;
}

}  // namespace

MetricReport compute_metrics(const Tensor& pred, const Tensor& obs,
                             const Tensor& mask, const std::string& scope) {
  require_same_shape(pred, obs, "compute_metrics");
  require_same_shape(pred, mask, "compute_metrics");
  PairStats s;
  for (int64_t i = 0; i < pred.size(); ++i)
    if (mask[i] != 0) s.add(pred[i], obs[i]);
  return finish(s, scope);
}

MetricReport compute_metrics(const std::vector<double>& pred,
                             const std::vector<double>& obs,
                             const std::string& scope) {
  if (pred.size() != obs.size())
    throw validation_error("compute_metrics: series length mismatch");
  PairStats s;
  for (size_t i = 0; i < pred.size(); ++i) s.add(pred[i], obs[i]);
  return finish(s, scope);
}

namespace {

Tensor per_cell_map(const Tensor& pred, const Tensor& obs, const Tensor& mask,
                    bool correlation) {
  require_same_shape(pred, obs, "cell map");
  require_same_shape(pred, mask, "cell map");
  if (pred.rank() != 3) throw validation_error("cell map: expected [N,L,W] input");
  const int N = pred.dim(0), L = pred.dim(1), W = pred.dim(2);
  Tensor out({L, W});
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < W; ++x) {
      PairStats s;
      for (int t = 0; t < N; ++t)
        if (mask.at(t, y, x) != 0) s.add(pred.at(t, y, x), obs.at(t, y, x));
      double v = kNaN;
      if (s.n >= 3) {
        double vo = s.var_o();
        if (correlation) {
          double vp = s.var_p();
          if (vp > 0 && vo > 0) v = s.cov() / std::sqrt(vp * vo);
        } else if (vo > 0) {
          v = std::sqrt(s.se2 / s.n) / std::sqrt(vo);
        }
      }
      out.at2(y, x) = v;
    }
  return out;
}

}  // namespace

Tensor correlation_map(const Tensor& pred, const Tensor& obs, const Tensor& mask) {
  return per_cell_map(pred, obs, mask, true);
}

Tensor nrmse_map(const Tensor& pred, const Tensor& obs, const Tensor& mask) {
  return per_cell_map(pred, obs, mask, false);
}

AnomalySeries compute_anomalies(const Tensor& series,
                                const std::vector<uint8_t>& obs_mask,
                                const GridSpec& grid, AnomalyKind kind,
                                bool alt_annual_mean) {
  if (series.rank() != 3) throw validation_error("compute_anomalies: expected [T,L,W]");
  const int T = series.dim(0), L = series.dim(1), W = series.dim(2);
  if (L != grid.length || W != grid.width)
    throw validation_error("compute_anomalies: series does not match grid " +
                           std::to_string(grid.length) + "x" + std::to_string(grid.width));
  if (obs_mask.size() != size_t(series.size()))
    throw validation_error("compute_anomalies: obs_mask size mismatch");

  const int start_month = grid.month_of(0);
  AnomalySeries a;
  a.kind = kind;
  a.values = Tensor({T, L, W});
  a.cell_valid.assign(size_t(L) * W, 0);

  std::vector<double> sum, cnt;
  const int n_years = int((start_month + T + 11) / 12);
  const int n_groups = kind == AnomalyKind::seasonal
                           ? (alt_annual_mean ? 1 : n_years)
                           : 12;
  sum.assign(size_t(n_groups), 0.0);
  cnt.assign(size_t(n_groups), 0.0);

  auto group_of = [&](int t) -> int {
    if (kind == AnomalyKind::nonseasonal) return int((start_month + t) % 12);
    return alt_annual_mean ? 0 : int((start_month + t) / 12);
  };

  for (int y = 0; y < L; ++y)
    for (int x = 0; x < W; ++x) {
      if (!grid.valid_at(y, x)) continue;
      std::fill(sum.begin(), sum.end(), 0.0);
      std::fill(cnt.begin(), cnt.end(), 0.0);
      for (int t = 0; t < T; ++t) {
        if (obs_mask[(size_t(t) * L + y) * W + x] == 0) continue;
        int g = group_of(t);
        sum[size_t(g)] += series.at(t, y, x);
        cnt[size_t(g)] += 1.0;
      }
      // Pass 1: raw anomaly; pass 2: normalize by its temporal std.
      double s1 = 0, s2 = 0;
      int64_t n = 0;
      for (int t = 0; t < T; ++t) {
        if (obs_mask[(size_t(t) * L + y) * W + x] == 0) continue;
        int g = group_of(t);
        if (cnt[size_t(g)] == 0) continue;
        double an = series.at(t, y, x) - sum[size_t(g)] / cnt[size_t(g)];
        a.values.at(t, y, x) = an;
        s1 += an;
        s2 += an * an;
        ++n;
      }
      if (n < 2) continue;
      double var = s2 / n - (s1 / n) * (s1 / n);
      if (var < 1e-24) {
        for (int t = 0; t < T; ++t) a.values.at(t, y, x) = 0.0;
        continue;
      }
      double inv_sd = 1.0 / std::sqrt(var);
      for (int t = 0; t < T; ++t) a.values.at(t, y, x) *= inv_sd;
      a.cell_valid[size_t(y) * W + x] = 1;
    }
  return a;
}

EOFResult eof(const AnomalySeries& anom, int n_modes) {
  const int T = anom.values.dim(0), L = anom.values.dim(1), W = anom.values.dim(2);
  std::vector<int64_t> cells;
  for (int64_t i = 0; i < int64_t(L) * W; ++i)
    if (anom.cell_valid[size_t(i)]) cells.push_back(i);
  const int64_t N = int64_t(cells.size());
  if (N == 0) throw validation_error("eof: no valid cells");
  if (n_modes < 1 || n_modes > std::min(int64_t(T), N))
    throw validation_error("eof: n_modes " + std::to_string(n_modes) +
                           " exceeds min(steps, cells) = " +
                           std::to_string(std::min(int64_t(T), N)));

  Eigen::MatrixXd X(T, N);
  for (int t = 0; t < T; ++t)
    for (int64_t j = 0; j < N; ++j)
      X(t, j) = anom.values[int64_t(t) * L * W + cells[size_t(j)]];

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double total = 0;
  for (int64_t i = 0; i < sv.size(); ++i) total += sv(i) * sv(i);
  if (total <= 0) throw validation_error("eof: anomaly matrix is identically zero");

  EOFResult r;
  r.kind = anom.kind;
  r.cell_valid = anom.cell_valid;
  r.patterns = Tensor({n_modes, L, W});
  r.pcs = Tensor({n_modes, T});
  r.explained.resize(size_t(n_modes));
  for (int m = 0; m < n_modes; ++m) {
    r.explained[size_t(m)] = sv(m) * sv(m) / total;
    // Sign convention: the loading with the largest magnitude is positive.
    double peak = 0;
    for (int64_t j = 0; j < N; ++j)
      if (std::fabs(svd.matrixV()(j, m)) > std::fabs(peak)) peak = svd.matrixV()(j, m);
    double sgn = peak < 0 ? -1.0 : 1.0;
    for (int64_t j = 0; j < N; ++j)
      r.patterns[int64_t(m) * L * W + cells[size_t(j)]] = sgn * svd.matrixV()(j, m);
    for (int t = 0; t < T; ++t)
      r.pcs.at2(m, t) = sgn * svd.matrixU()(t, m) * sv(m);
  }
  return r;
}

Tensor project(const AnomalySeries& anom, const EOFResult& basis) {
  const int T = anom.values.dim(0), L = anom.values.dim(1), W = anom.values.dim(2);
  if (basis.patterns.dim(1) != L || basis.patterns.dim(2) != W)
    throw validation_error("project: grid mismatch between anomalies and basis");
  const int M = basis.patterns.dim(0);
  Tensor pcs({M, T});
  for (int m = 0; m < M; ++m)
    for (int t = 0; t < T; ++t) {
      double acc = 0;
      for (int64_t i = 0; i < int64_t(L) * W; ++i)
        if (basis.cell_valid[size_t(i)])
          acc += anom.values[int64_t(t) * L * W + i] *
                 basis.patterns[int64_t(m) * L * W + i];
      pcs.at2(m, t) = acc;
    }
  return pcs;
}

PcComparison pc_compare(const std::vector<double>& pc_a,
                        const std::vector<double>& pc_b) {
  if (pc_a.size() != pc_b.size() || pc_a.size() < 2)
    throw validation_error("pc_compare: need two equal-length series of >= 2 points");
  PairStats s;
  for (size_t i = 0; i < pc_a.size(); ++i) s.add(pc_a[i], pc_b[i]);
  PcComparison c;
  c.rmse = std::sqrt(s.se2 / s.n);
  double vp = s.var_p(), vo = s.var_o();
  c.correlation = (vp > 0 && vo > 0) ? s.cov() / std::sqrt(vp * vo) : kNaN;
  return c;
}

std::map<std::string, std::vector<uint8_t>> basin_masks(
    const GridSpec& grid, const std::vector<BasinBox>& boxes) {
  if (grid.lat_edges.size() != size_t(grid.length) + 1 ||
      grid.lon_edges.size() != size_t(grid.width) + 1)
    throw validation_error("basin_masks: grid lacks lat/lon edges");

  auto wrap360 = [](double lon) {
    double v = std::fmod(lon, 360.0);
    return v < 0 ? v + 360.0 : v;
  };

  std::map<std::string, std::vector<uint8_t>> out;
  std::vector<uint8_t> claimed(size_t(grid.cells()), 0);
  for (const auto& box : boxes) {
    if (out.count(box.name))
      throw validation_error("basin_masks: duplicate basin \"" + box.name + "\"");
    std::vector<uint8_t> mask(size_t(grid.cells()), 0);
    for (int y = 0; y < grid.length; ++y) {
      double lat = 0.5 * (grid.lat_edges[size_t(y)] + grid.lat_edges[size_t(y) + 1]);
      if (lat < box.lat_min || lat > box.lat_max) continue;
      for (int x = 0; x < grid.width; ++x) {
        if (!grid.valid_at(y, x)) continue;
        double lon = wrap360(
            0.5 * (grid.lon_edges[size_t(x)] + grid.lon_edges[size_t(x) + 1]));
        double lo = wrap360(box.lon_min), hi = wrap360(box.lon_max);
        bool in = lo <= hi ? (lon >= lo && lon <= hi) : (lon >= lo || lon <= hi);
        if (!in) continue;
        size_t i = size_t(y) * grid.width + x;
        if (claimed[i])
          throw validation_error("basin_masks: basin \"" + box.name +
                                 "\" overlaps an earlier basin at cell (" +
                                 std::to_string(y) + ", " + std::to_string(x) + ")");
        claimed[i] = 1;
        mask[i] = 1;
      }
    }
    out.emplace(box.name, std::move(mask));
  }
  return out;
}

}  // namespace geoemu
