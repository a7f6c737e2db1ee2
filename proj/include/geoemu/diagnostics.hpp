#pragma once

#include <map>
#include <string>
#include <vector>

#include "geoemu/grid.hpp"
#include "geoemu/tensor.hpp"

namespace geoemu {

struct MetricReport {
  double r2 = 0;      // squared Pearson correlation (0 when undefined)
  double rmse = 0;    // log-space units
  double slope = 0;   // least-squares slope of pred regressed on obs
  double mae = 0;
  int64_t n_samples = 0;
  std::string scope = "global";
};

// Pooled over all (element) pairs where mask != 0. Throws below 2 pairs.
MetricReport compute_metrics(const Tensor& pred, const Tensor& obs,
                             const Tensor& mask, const std::string& scope = "global");
MetricReport compute_metrics(const std::vector<double>& pred,
                             const std::vector<double>& obs,
                             const std::string& scope = "global");

// Per-cell temporal Pearson correlation / RMSE normalized by the observed
// temporal std. Inputs are [N,L,W] series with a matching mask; cells with
// fewer than 3 pairs or zero variance carry NaN.
Tensor correlation_map(const Tensor& pred, const Tensor& obs, const Tensor& mask);
Tensor nrmse_map(const Tensor& pred, const Tensor& obs, const Tensor& mask);

enum class AnomalyKind { seasonal, nonseasonal };

struct AnomalySeries {
  Tensor values;                  // [T,L,W], 0 at unobserved steps
  std::vector<uint8_t> cell_valid;  // L*W, 0 = degenerate/land cell
  AnomalyKind kind = AnomalyKind::seasonal;
};

// Seasonal: remove each cell's per-calendar-year mean (retains the seasonal
// cycle). Non-seasonal: remove the cell's monthly climatology (retains the
// interannual signal). Both are then normalized by the anomaly's temporal
// std. alt_annual_mean replaces the per-year mean with the all-time mean.
AnomalySeries compute_anomalies(const Tensor& series,
                                const std::vector<uint8_t>& obs_mask,
                                const GridSpec& grid, AnomalyKind kind,
                                bool alt_annual_mean = false);

struct EOFResult {
  Tensor patterns;  // [M,L,W], unit-norm over valid cells, zero elsewhere
  Tensor pcs;       // [M,T]
  std::vector<double> explained;  // variance fractions, non-increasing
  std::vector<uint8_t> cell_valid;
  AnomalyKind kind = AnomalyKind::seasonal;
};

EOFResult eof(const AnomalySeries& anom, int n_modes);

// pc_i(t) = <anomaly field at t, pattern_i> over the EOF's valid cells.
Tensor project(const AnomalySeries& anom, const EOFResult& basis);

struct PcComparison {
  double correlation = 0;  // NaN when either series has zero variance
  double rmse = 0;
};
PcComparison pc_compare(const std::vector<double>& pc_a,
                        const std::vector<double>& pc_b);

struct BasinBox {
  std::string name;
  double lat_min = -90, lat_max = 90;
  double lon_min = 0, lon_max = 360;  // lon_min > lon_max wraps the seam
};

// One mask per basin, intersected with valid_mask. Boxes must not overlap.
std::map<std::string, std::vector<uint8_t>> basin_masks(
    const GridSpec& grid, const std::vector<BasinBox>& boxes);

}  // namespace geoemu
