#include "geoemu/forecast.hpp"

#include <algorithm>

#include "geoemu/training.hpp"

namespace geoemu {

Tensor destandardize_field(const Tensor& field, const NormStats& stats) {
  Tensor out = field;
  double m = stats.mean.at(0), sd = stats.std.at(0);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] * sd + m;
  return out;
}

namespace {

// Initial state at t0 in normalized space: observed target, climatology at
// observation gaps (recorded as a warning), zero on land.
Tensor initial_state(const Preprocessed& p, const GridSpec& grid, int t0,
                     std::vector<std::string>* warnings) {
  const int L = grid.length, W = grid.width;
  Tensor st({1, L, W});
  int gaps = 0;
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < W; ++x) {
      st.at(0, y, x) = p.ar_state.at(t0, y, x);
      if (grid.valid_at(y, x) && p.obs_mask[(size_t(t0) * L + y) * W + x] == 0) ++gaps;
    }
  if (gaps > 0 && warnings)
    warnings->push_back("start " + std::to_string(t0) + ": " + std::to_string(gaps) +
                        " unobserved cells climatology-filled");
  return st;
}

Tensor to_2d(const Tensor& field_1lw) {
  Tensor out({field_1lw.dim(1), field_1lw.dim(2)});
  for (int64_t i = 0; i < out.size(); ++i) out[i] = field_1lw[i];
  return out;
}

}  // namespace

ForecastSlice rollout_forecast(const EmulatorModel& model, const Preprocessed& p,
                               const GridSpec& grid, int t0, int horizon) {
  if (!model.autoregressive)
    throw validation_error("rollout_forecast: model is not auto-regressive");
  if (horizon < 1) throw validation_error("rollout_forecast: horizon must be >= 1");
  if (t0 < 0 || t0 >= grid.n_steps)
    throw validation_error("rollout_forecast: start index out of range");

  ForecastSlice slice;
  slice.t0 = t0;
  Tensor state = initial_state(p, grid, t0, &slice.warnings);
  for (int k = 1; k <= horizon; ++k) {
    int t = t0 + k;
    if (t >= grid.n_steps) {
      slice.warnings.push_back("horizon truncated at lead " + std::to_string(k - 1) +
                               ": record ends");
      break;
    }
    Tensor input;
    try {
      input = ar_input(p, t, model.window, state);
    } catch (const IncompleteWindow&) {
      slice.warnings.push_back("horizon truncated at lead " + std::to_string(k - 1) +
                               ": incomplete predictor window at step " +
                               std::to_string(t));
      break;
    }
    Tensor out = model.forward_eval(input);
    // The chain feeds itself in normalized space with the same state clip as
    // roll-out training; stored leads are the raw output in log space.
    state = out;
    for (int64_t i = 0; i < state.size(); ++i)
      state[i] = std::clamp(state[i], -kStateClip, kStateClip);
    slice.leads.push_back(destandardize_field(to_2d(out), p.targ_stats));
  }
  return slice;
}

ForecastSlice persistence_forecast(const Preprocessed& p, const GridSpec& grid,
                                   int t0, int horizon) {
  if (horizon < 1) throw validation_error("persistence_forecast: horizon must be >= 1");
  if (t0 < 0 || t0 >= grid.n_steps)
    throw validation_error("persistence_forecast: start index out of range");
  ForecastSlice slice;
  slice.t0 = t0;
  Tensor state =
      destandardize_field(to_2d(initial_state(p, grid, t0, &slice.warnings)),
                          p.targ_stats);
  for (int k = 1; k <= horizon; ++k) slice.leads.push_back(state);
  return slice;
}

StaticReconstruction static_reconstruct(const EmulatorModel& model,
                                        const Preprocessed& p, const GridSpec& grid,
                                        const std::vector<int>& steps) {
  if (model.autoregressive)
    throw validation_error("static_reconstruct: model is auto-regressive");
  StaticReconstruction rec;
  for (int t : steps) {
    Tensor input;
    try {
      input = static_input(p, t, model.window);
    } catch (const IncompleteWindow&) {
      rec.skipped.push_back("step " + std::to_string(t) + ": incomplete window");
      continue;
    }
    rec.fields[t] = destandardize_field(to_2d(model.forward_eval(input)), p.targ_stats);
  }
  return rec;
}

LeadFieldSeries lead_fields(ForecastMode mode, const EmulatorModel* model,
                            const Preprocessed& p, const GridSpec& grid,
                            int test_start, int test_end, int horizon) {
  if (test_start < 0 || test_end >= grid.n_steps || test_start > test_end)
    throw validation_error("lead_fields: bad test range");
  if (horizon < 1) throw validation_error("lead_fields: horizon must be >= 1");
  const int n = test_end - test_start + 1;
  LeadFieldSeries s;
  s.test_start = test_start;
  s.test_end = test_end;
  s.horizon = horizon;
  s.fields.assign(size_t(horizon), std::vector<std::optional<Tensor>>(size_t(n)));

  if (mode == ForecastMode::statical) {
    if (!model) throw validation_error("lead_fields: static mode needs a model");
    std::vector<int> steps;
    for (int t = test_start; t <= test_end; ++t) steps.push_back(t);
    StaticReconstruction rec = static_reconstruct(*model, p, grid, steps);
    // A static emulator has no notion of lead: the same reconstruction
    // serves every lead column.
    for (auto& [t, f] : rec.fields)
      for (int k = 1; k <= horizon; ++k)
        s.fields[size_t(k - 1)][size_t(t - test_start)] = f;
    return s;
  }

  // Pool sliding starts: every t0 with some t0+k inside the test range.
  for (int t0 = std::max(0, test_start - horizon); t0 <= test_end - 1; ++t0) {
    int h_needed = std::min(horizon, test_end - t0);
    if (h_needed < 1) continue;
    ForecastSlice slice = mode == ForecastMode::autoregressive
                              ? rollout_forecast(*model, p, grid, t0, h_needed)
                              : persistence_forecast(p, grid, t0, h_needed);
    for (size_t ki = 0; ki < slice.leads.size(); ++ki) {
      int k = int(ki) + 1;
      int t = t0 + k;
      if (t < test_start || t > test_end) continue;
      s.fields[size_t(k - 1)][size_t(t - test_start)] = slice.leads[ki];
    }
  }
  return s;
}

}  // namespace geoemu
