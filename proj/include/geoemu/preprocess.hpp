#pragma once

#include <string>
#include <vector>

#include "geoemu/grid.hpp"
#include "geoemu/tensor.hpp"

namespace geoemu {

// Per-channel standardization statistics. std is epsilon-floored at 1e-8 so
// constant channels survive.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  int epoch_start = 0;
  int epoch_end = 0;  // inclusive

  static constexpr double kStdFloor = 1e-8;
};

struct WindowSpec {
  int delta_minus = 0;
  int delta_plus = 0;
  int size() const { return delta_minus + delta_plus + 1; }
};

enum class Direction { forward, inverse };

// Natural log / exp on a target field; forward requires strictly positive
// observed values. mask: 1 = observed (others untouched).
Tensor log_transform(const Tensor& field, const std::vector<uint8_t>& mask,
                     Direction dir);

// Stats over [epoch_start, epoch_end] steps, restricted to mask-valid cells.
// Predictors: [T,C,L,W] with per-cell missing mask. Target: [T,L,W].
NormStats compute_stats(const Tensor& values, const std::vector<uint8_t>& valid,
                        int epoch_start, int epoch_end);

// Forward: (x - mean) / std per channel; inverse is the exact round trip.
// values [T,C,L,W] or [T,L,W] (single channel).
Tensor standardize(const Tensor& values, const NormStats& stats, Direction dir);

// Zeroes every masked-missing cell; valid cells untouched. Idempotent.
void fill_missing(Tensor& values, const std::vector<uint8_t>& missing);

// Time-lagged predictor window for target step t: channels concatenated
// oldest -> newest, output [C*(dm+dp+1), L, W]. Throws on incomplete window.
Tensor window_predictors(const Tensor& pred_norm, int t, const WindowSpec& w);

class IncompleteWindow : public Error {
 public:
  explicit IncompleteWindow(const std::string& msg)
      : Error(ErrorKind::validation, msg) {}
};

// Fully preprocessed dataset in normalized log space.
struct Preprocessed {
  Tensor pred;        // [T,C,L,W], standardized, missing cells zero-filled
  Tensor targ;        // [T,L,W], standardized log target (0 where unobserved)
  std::vector<uint8_t> obs_mask;  // T*L*W
  NormStats pred_stats;
  NormStats targ_stats;
  // Previous-state channel for auto-regressive inputs: observed target where
  // available, per-cell monthly train climatology at observation gaps, zero
  // on land. Normalized space, [T,L,W].
  Tensor ar_state;
};

struct PreprocessOptions {
  bool stats_full_period = false;  // true = paper mode (whole record)
  bool standardize_target = true;
  bool log_target = false;  // apply log first (target stored in linear space)
};

Preprocessed preprocess(const Dataset& ds, const std::vector<int>& train_idx,
                        const PreprocessOptions& opt);

}  // namespace geoemu
