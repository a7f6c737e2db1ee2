#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geoemu/tensor.hpp"

namespace geoemu {

// Spatial/temporal geometry. valid_mask is row-major [L][W], true = ocean
// cell that participates in losses and metrics. The mask is static in time.
struct GridSpec {
  int width = 0;    // W, longitude axis
  int length = 0;   // L, latitude axis
  int n_steps = 0;  // T, monthly steps
  std::vector<uint8_t> valid_mask;         // L*W
  std::vector<double> lat_edges;           // L+1, optional (empty = none)
  std::vector<double> lon_edges;           // W+1, optional
  std::optional<std::string> calendar_start;  // "YYYY-MM"

  bool valid_at(int y, int x) const {
    return valid_mask[size_t(y) * width + x] != 0;
  }
  int64_t cells() const { return int64_t(length) * width; }
  void validate() const;
  // Calendar month (0..11) of step t; requires calendar_start.
  int month_of(int t) const;
};

// Predictor fields, values laid out [T][C][L][W]. Missing cells are tracked
// by the explicit mask, never by sentinels.
struct PredictorStack {
  Tensor values;  // [T,C,L,W]
  std::vector<uint8_t> missing;  // T*C*L*W, 1 = missing before fill
  std::vector<std::string> channel_names;
  std::vector<std::string> units;

  int channels() const { return values.dim(1); }
};

// Log-space target with per-timestep observation mask [T][L][W].
struct TargetSeries {
  Tensor values;  // [T,L,W]
  std::vector<uint8_t> obs_mask;  // T*L*W, 1 = observed
  bool observed(int t, int y, int x, int width, int length) const {
    return obs_mask[(size_t(t) * length + y) * width + x] != 0;
  }
};

struct SplitSpec {
  int train_start = 0;
  int train_end = 0;  // inclusive
  double val_fraction = 0.20;
  int test_start = 0;
  int test_end = 0;  // inclusive
};

struct SplitResult {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

SplitResult split_dataset(const SplitSpec& spec, int n_steps, uint64_t seed);

// Documented synthetic ground truth:
//   Y(t) = a*tanh(b*Z_f1(t)) + c_lag*Z_f2(t-1)^2 + d*Z_f3(t) + eps(t)
// with eps an AR(1) noise of std sigma and lag correlation rho.
struct GroundTruth {
  double a = 1.0, b = 1.0;
  double c_lag = 0.5;
  double d = 0.5;
  int f1 = 0, f2 = 1, f3 = 2;  // predictor channel indices

  double eval(double z1_t, double z2_tm1, double z3_t) const {
    return a * std::tanh(b * z1_t) + c_lag * z2_tm1 * z2_tm1 + d * z3_t;
  }
};

struct SyntheticConfig {
  int width = 16;
  int length = 8;
  int n_steps = 72;  // multiple of 12
  int n_channels = 8;
  double land_fraction = 0.2;
  double seasonal_amp = 1.0;       // 12-month sinusoid amplitude
  double lowfreq_amp = 0.5;        // multi-year sinusoid amplitude
  double lowfreq_period_years = 4.0;
  double spatial_amp = 0.5;        // additive smooth spatial pattern
  double spatial_mod = 0.0;        // multiplicative spatial modulation of the sinusoids
  double predictor_noise = 0.05;
  double target_noise = 0.0;       // sigma of eps
  double target_noise_rho = 0.0;   // AR(1) correlation of eps
  double obs_gap_fraction = 0.0;   // random target dropouts
  std::string calendar_start = "2000-01";
  GroundTruth truth;
};

struct SyntheticDataset {
  GridSpec grid;
  PredictorStack predictors;
  TargetSeries target;
  GroundTruth truth;
};

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, uint64_t seed);

struct Dataset {
  GridSpec grid;
  PredictorStack predictors;
  TargetSeries target;
};

// Self-describing gridded container (see container.hpp for the byte format).
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

}  // namespace geoemu
