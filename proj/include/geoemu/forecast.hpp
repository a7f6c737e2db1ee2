#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geoemu/grid.hpp"
#include "geoemu/models.hpp"
#include "geoemu/preprocess.hpp"

namespace geoemu {

enum class ForecastMode { statical, autoregressive, persistence };

// One roll-out chain from start t0: predictions for leads 1..H (possibly
// truncated when predictor windows run out). Fields are [L,W] in log space.
struct ForecastSlice {
  int t0 = 0;
  std::vector<Tensor> leads;
  std::vector<std::string> warnings;
};

Tensor destandardize_field(const Tensor& field, const NormStats& stats);

// Sequential roll-out: lead 1 consumes the observed state at t0 (observation
// gaps climatology-filled, flagged); later leads consume the model's own
// previous prediction. Predictors are the observed values at all leads.
ForecastSlice rollout_forecast(const EmulatorModel& model, const Preprocessed& p,
                               const GridSpec& grid, int t0, int horizon);

// Persistence: every lead repeats the state at t0.
ForecastSlice persistence_forecast(const Preprocessed& p, const GridSpec& grid,
                                   int t0, int horizon);

// Per-month independent reconstruction over the given steps; incomplete
// windows are skipped and recorded.
struct StaticReconstruction {
  std::map<int, Tensor> fields;  // t -> [L,W] log space
  std::vector<std::string> skipped;
};
StaticReconstruction static_reconstruct(const EmulatorModel& model,
                                        const Preprocessed& p, const GridSpec& grid,
                                        const std::vector<int>& steps);

// Lead-k prediction series pooled over sliding starts: for every timestamp t
// in [test_start, test_end] with t-k >= 0, the lead-k prediction targeting t.
// fields[k-1][t - test_start] is empty where no valid start/window exists.
struct LeadFieldSeries {
  int test_start = 0;
  int test_end = 0;
  int horizon = 0;
  std::vector<std::vector<std::optional<Tensor>>> fields;
};

LeadFieldSeries lead_fields(ForecastMode mode, const EmulatorModel* model,
                            const Preprocessed& p, const GridSpec& grid,
                            int test_start, int test_end, int horizon);

}  // namespace geoemu
