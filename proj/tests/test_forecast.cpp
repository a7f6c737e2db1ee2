#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "geoemu/error.hpp"
#include "geoemu/forecast.hpp"
#include "geoemu/grid.hpp"
#include "geoemu/preprocess.hpp"
#include "geoemu/rng.hpp"
#include "geoemu/training.hpp"

using namespace geoemu;

namespace {

struct Fixture {
  GridSpec grid;
  Preprocessed prep;
  SplitResult splits;
  Dataset ds;
};

Fixture make_fixture(uint64_t seed, double gap = 0.0) {
  SyntheticConfig cfg;
  cfg.width = 16;
  cfg.length = 8;
  cfg.n_steps = 36;
  cfg.obs_gap_fraction = gap;
  SyntheticDataset sd = generate_synthetic(cfg, seed);
  Fixture f;
  f.ds = Dataset{sd.grid, sd.predictors, sd.target};
  SplitSpec sp;
  sp.train_start = 0;
  sp.train_end = 23;
  sp.val_fraction = 0.2;
  sp.test_start = 24;
  sp.test_end = 35;
  f.splits = split_dataset(sp, cfg.n_steps, seed);
  f.grid = sd.grid;
  f.prep = preprocess(f.ds, f.splits.train, PreprocessOptions{});
  return f;
}

// AR CNN whose output is exactly `scale * state` (the last input channel):
// unit 0 takes relu(s), unit 1 relu(-s), head recombines with +-scale.
EmulatorModel scaled_copy_model(int in_ch, double scale) {
  ArchConfig ac;
  ac.cnn_depth = 2;
  ac.cnn_width = 4;
  EmulatorModel m = build_cnn(in_ch, ac);
  m.autoregressive = true;
  m.window = WindowSpec{0, 0};
  m.init_params(1);
  for (auto& [name, t] : m.params)
    for (int64_t i = 0; i < t.size(); ++i) t[i] = 0.0;
  Tensor& c0 = m.params.at("conv00/w");  // [4, in_ch, 3, 3]
  c0.at4(0, in_ch - 1, 1, 1) = 1.0;
  c0.at4(1, in_ch - 1, 1, 1) = -1.0;
  Tensor& out = m.params.at("out/w");  // [1, 4, 3, 3]
  out.at4(0, 0, 1, 1) = scale;
  out.at4(0, 1, 1, 1) = -scale;
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double d = 0;
  for (int64_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("destandardize inverts standardization") {
  NormStats s;
  s.mean = {2.5};
  s.std = {0.75};
  Tensor x({1, 2, 2});
  x[0] = -1.0;
  x[1] = 0.0;
  x[2] = 1.0;
  x[3] = 2.0;
  Tensor y = destandardize_field(x, s);
  CHECK(y[0] == doctest::Approx(2.5 - 0.75));
  CHECK(y[1] == doctest::Approx(2.5));
  CHECK(y[3] == doctest::Approx(4.0));
}

TEST_CASE("persistence repeats the launch state at every lead") {
  Fixture f = make_fixture(41);
  const int t0 = 24, H = 5;
  ForecastSlice s = persistence_forecast(f.prep, f.grid, t0, H);
  REQUIRE(int(s.leads.size()) == H);
  for (int k = 1; k < H; ++k)
    CHECK(max_abs_diff(s.leads[size_t(k)], s.leads[0]) == 0.0);
  // And the state is the observed target at t0 (log space) on observed cells.
  for (int y = 0; y < f.grid.length; ++y)
    for (int x = 0; x < f.grid.width; ++x)
      if (f.grid.valid_at(y, x) &&
          f.ds.target.observed(t0, y, x, f.grid.width, f.grid.length))
        CHECK(s.leads[0].at2(y, x) ==
              doctest::Approx(f.ds.target.values.at(t0, y, x)).epsilon(1e-12));
}

TEST_CASE("an identity model rolls out exactly like persistence") {
  Fixture f = make_fixture(42);
  EmulatorModel m = scaled_copy_model(8 + 1, 1.0);
  const int t0 = 24, H = 6;
  ForecastSlice ar = rollout_forecast(m, f.prep, f.grid, t0, H);
  ForecastSlice pe = persistence_forecast(f.prep, f.grid, t0, H);
  REQUIRE(ar.leads.size() == pe.leads.size());
  for (size_t k = 0; k < ar.leads.size(); ++k)
    CHECK(max_abs_diff(ar.leads[k], pe.leads[k]) < 1e-12);
}

TEST_CASE("a half-gain model decays geometrically down the roll-out") {
  Fixture f = make_fixture(43);
  EmulatorModel m = scaled_copy_model(8 + 1, 0.5);
  const int t0 = 24, H = 3;
  ForecastSlice s = rollout_forecast(m, f.prep, f.grid, t0, H);
  REQUIRE(int(s.leads.size()) == H);
  const NormStats& ts = f.prep.targ_stats;
  for (int k = 1; k <= H; ++k) {
    double factor = std::pow(0.5, k);
    for (int y = 0; y < f.grid.length; ++y)
      for (int x = 0; x < f.grid.width; ++x) {
        if (!f.grid.valid_at(y, x)) continue;
        double s0 = f.prep.ar_state.at(t0, y, x);
        double want = ts.mean[0] + ts.std[0] * factor * s0;
        CHECK(s.leads[size_t(k - 1)].at2(y, x) ==
              doctest::Approx(want).epsilon(1e-10));
      }
  }
}

TEST_CASE("roll-out lead 1 equals a teacher-forced single step") {
  Fixture f = make_fixture(44, 0.1);
  ArchConfig ac;
  ac.cnn_depth = 2;
  ac.cnn_width = 6;
  EmulatorModel m = build_cnn(9, ac);
  m.autoregressive = true;
  m.window = WindowSpec{0, 0};
  m.init_params(21);

  const int t0 = 24;
  ForecastSlice s = rollout_forecast(m, f.prep, f.grid, t0, 1);
  REQUIRE(s.leads.size() == 1);

  Tensor state({1, f.grid.length, f.grid.width});
  for (int y = 0; y < f.grid.length; ++y)
    for (int x = 0; x < f.grid.width; ++x)
      state.at(0, y, x) = f.prep.ar_state.at(t0, y, x);
  Tensor in = ar_input(f.prep, t0 + 1, m.window, state);
  Tensor out = m.forward_eval(in);
  Tensor want = destandardize_field(out, f.prep.targ_stats);
  CHECK(max_abs_diff(s.leads[0], want) == 0.0);
}

TEST_CASE("persistence at lead 12 is exact on a 12-periodic field") {
  Fixture f = make_fixture(45);
  // Overwrite the target with a strictly 12-periodic signal.
  for (int t = 0; t < f.grid.n_steps; ++t)
    for (int y = 0; y < f.grid.length; ++y)
      for (int x = 0; x < f.grid.width; ++x)
        f.ds.target.values.at(t, y, x) =
            std::sin(2 * M_PI * (t % 12) / 12.0) + 0.01 * (y + x);
  f.prep = preprocess(f.ds, f.splits.train, PreprocessOptions{});

  LeadFieldSeries lf = lead_fields(ForecastMode::persistence, nullptr, f.prep,
                                   f.grid, 24, 35, 12);
  double rmse12 = 0, rmse6 = 0;
  int64_t n12 = 0, n6 = 0;
  for (int t = 24; t <= 35; ++t) {
    auto accum = [&](int lead, double& acc, int64_t& n) {
      const auto& cell = lf.fields[size_t(lead - 1)][size_t(t - 24)];
      if (!cell.has_value()) return;
      for (int y = 0; y < f.grid.length; ++y)
        for (int x = 0; x < f.grid.width; ++x)
          if (f.grid.valid_at(y, x)) {
            double d = cell->at2(y, x) - f.ds.target.values.at(t, y, x);
            acc += d * d;
            ++n;
          }
    };
    accum(12, rmse12, n12);
    accum(6, rmse6, n6);
  }
  REQUIRE(n12 > 0);
  REQUIRE(n6 > 0);
  CHECK(std::sqrt(rmse12 / double(n12)) < 1e-10);
  CHECK(std::sqrt(rmse6 / double(n6)) > 0.1);
}

TEST_CASE("static reconstruction is per-month and idempotent") {
  Fixture f = make_fixture(46);
  ArchConfig ac;
  ac.cnn_depth = 2;
  ac.cnn_width = 6;
  EmulatorModel m = build_cnn(16, ac);  // 8 channels x window 2
  m.window = WindowSpec{1, 0};
  m.init_params(22);

  std::vector<int> steps{0, 24, 25, 30};
  StaticReconstruction a = static_reconstruct(m, f.prep, f.grid, steps);
  StaticReconstruction b = static_reconstruct(m, f.prep, f.grid, steps);
  // t=0 has no complete window with delta_minus=1: skipped, not fatal.
  CHECK(a.fields.count(0) == 0);
  CHECK(a.skipped.size() == 1);
  CHECK(a.fields.size() == 3);
  for (const auto& [t, field] : a.fields)
    CHECK(max_abs_diff(field, b.fields.at(t)) == 0.0);

  StaticReconstruction empty = static_reconstruct(m, f.prep, f.grid, {});
  CHECK(empty.fields.empty());

  // Months are independent: a subset recomputes to the same fields.
  StaticReconstruction sub = static_reconstruct(m, f.prep, f.grid, {25});
  CHECK(max_abs_diff(sub.fields.at(25), a.fields.at(25)) == 0.0);
}

TEST_CASE("static lead series replicates the reconstruction at every lead") {
  Fixture f = make_fixture(47);
  ArchConfig ac;
  ac.cnn_depth = 2;
  ac.cnn_width = 6;
  EmulatorModel m = build_cnn(8, ac);
  m.window = WindowSpec{0, 0};
  m.init_params(23);

  LeadFieldSeries lf =
      lead_fields(ForecastMode::statical, &m, f.prep, f.grid, 24, 35, 3);
  REQUIRE(lf.fields.size() == 3);
  for (int t = 24; t <= 35; ++t) {
    const auto& l1 = lf.fields[0][size_t(t - 24)];
    REQUIRE(l1.has_value());
    for (int k = 2; k <= 3; ++k) {
      const auto& lk = lf.fields[size_t(k - 1)][size_t(t - 24)];
      REQUIRE(lk.has_value());
      CHECK(max_abs_diff(*lk, *l1) == 0.0);
    }
  }
}

TEST_CASE("roll-out flags climatology-filled launch states") {
  Fixture f = make_fixture(48, 0.3);
  EmulatorModel m = scaled_copy_model(8 + 1, 1.0);
  ForecastSlice s = rollout_forecast(m, f.prep, f.grid, 24, 2);
  CHECK(!s.warnings.empty());

  Fixture g = make_fixture(48, 0.0);
  ForecastSlice t = rollout_forecast(m, g.prep, g.grid, 24, 2);
  CHECK(t.warnings.empty());
}

TEST_CASE("forecast input validation") {
  Fixture f = make_fixture(49);
  EmulatorModel m = scaled_copy_model(8 + 1, 1.0);
  CHECK_THROWS_AS(rollout_forecast(m, f.prep, f.grid, -1, 2), Error);
  CHECK_THROWS_AS(rollout_forecast(m, f.prep, f.grid, 24, 0), Error);
  CHECK_THROWS_AS(persistence_forecast(f.prep, f.grid, 99, 2), Error);
}
