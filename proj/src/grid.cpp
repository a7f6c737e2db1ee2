#include "geoemu/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geoemu/container.hpp"
#include "geoemu/error.hpp"
#include "geoemu/rng.hpp"

namespace geoemu {

void GridSpec::validate() const {
  if (width < 4 || length < 4)
    throw validation_error("grid must be at least 4x4, got " +
                           std::to_string(length) + "x" + std::to_string(width));
  if (width % 4 != 0 || length % 4 != 0)
    throw validation_error("grid dimensions must be divisible by 4, got " +
                           std::to_string(length) + "x" + std::to_string(width));
  if (int64_t(valid_mask.size()) != cells())
    throw validation_error("valid_mask size does not match grid");
  if (std::find(valid_mask.begin(), valid_mask.end(), uint8_t(1)) == valid_mask.end())
    throw validation_error("valid_mask has no valid cell");
}

int GridSpec::month_of(int t) const {
  if (!calendar_start)
    throw validation_error("calendar metadata required but not set");
  const std::string& s = *calendar_start;
  if (s.size() != 7 || s[4] != '-')
    throw validation_error("bad calendar_start \"" + s + "\", expected YYYY-MM");
  int m = std::stoi(s.substr(5)) - 1;
  if (m < 0 || m > 11) throw validation_error("bad calendar_start month");
  return (m + t) % 12;
}

SplitResult split_dataset(const SplitSpec& spec, int n_steps, uint64_t seed) {
  auto in_range = [n_steps](int t) { return t >= 0 && t < n_steps; };
  if (!in_range(spec.train_start) || !in_range(spec.train_end) ||
      !in_range(spec.test_start) || !in_range(spec.test_end) ||
      spec.train_start > spec.train_end || spec.test_start > spec.test_end)
    throw validation_error("split ranges out of [0," + std::to_string(n_steps) + ")");
  if (spec.train_end >= spec.test_start && spec.test_end >= spec.train_start)
    throw validation_error("overlapping ranges: train [" +
                           std::to_string(spec.train_start) + "," +
                           std::to_string(spec.train_end) + "] vs test [" +
                           std::to_string(spec.test_start) + "," +
                           std::to_string(spec.test_end) + "]");
  if (spec.val_fraction < 0 || spec.val_fraction >= 1)
    throw validation_error("val_fraction must be in [0,1)");

  std::vector<int> pool;
  for (int t = spec.train_start; t <= spec.train_end; ++t) pool.push_back(t);
  int n_val = int(std::floor(spec.val_fraction * double(pool.size())));
  Rng rng(seed);
  rng.shuffle(pool);
  SplitResult r;
  r.val.assign(pool.begin(), pool.begin() + n_val);
  r.train.assign(pool.begin() + n_val, pool.end());
  std::sort(r.val.begin(), r.val.end());
  std::sort(r.train.begin(), r.train.end());
  for (int t = spec.test_start; t <= spec.test_end; ++t) r.test.push_back(t);
  return r;
}

namespace {

// Smooth random spatial pattern: a few low-order Fourier modes over the grid.
Tensor smooth_pattern(int length, int width, Rng& rng) {
  Tensor p({length, width});
  for (int mode = 0; mode < 3; ++mode) {
    double ay = 1 + std::floor(rng.uniform() * 3);  // 1..3 half-waves
    double ax = 1 + std::floor(rng.uniform() * 3);
    double phy = 2 * M_PI * rng.uniform();
    double phx = 2 * M_PI * rng.uniform();
    double amp = 0.4 + 0.6 * rng.uniform();
    for (int y = 0; y < length; ++y)
      for (int x = 0; x < width; ++x)
        p[int64_t(y) * width + x] +=
            amp * std::sin(M_PI * ay * (y + 0.5) / length + phy) *
            std::sin(2 * M_PI * ax * (x + 0.5) / width + phx);
  }
  return p;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, uint64_t seed) {
  if (cfg.n_steps < 13)
    throw validation_error("n_steps must be >= 13 (lag-1 target needs spin-up)");
  if (cfg.n_steps % 12 != 0)
    throw validation_error("n_steps must be a multiple of 12");
  if (cfg.land_fraction >= 1.0)
    throw validation_error("land_fraction must be < 1");
  if (cfg.land_fraction < 0.0)
    throw validation_error("land_fraction must be >= 0");
  if (cfg.n_channels < 3)
    throw validation_error("need at least 3 predictor channels for the target functional");

  const int W = cfg.width, L = cfg.length, T = cfg.n_steps, C = cfg.n_channels;
  Rng rng(seed);

  SyntheticDataset ds;
  ds.truth = cfg.truth;
  GridSpec& grid = ds.grid;
  grid.width = W;
  grid.length = L;
  grid.n_steps = T;
  grid.calendar_start = cfg.calendar_start;
  grid.lat_edges.resize(size_t(L) + 1);
  grid.lon_edges.resize(size_t(W) + 1);
  for (int i = 0; i <= L; ++i) grid.lat_edges[size_t(i)] = -50.0 + 100.0 * i / L;
  for (int i = 0; i <= W; ++i) grid.lon_edges[size_t(i)] = 360.0 * i / W;

  // Land mask: threshold a smooth field at the requested quantile.
  Tensor landfield = smooth_pattern(L, W, rng);
  std::vector<double> sorted(landfield.data(), landfield.data() + landfield.size());
  std::sort(sorted.begin(), sorted.end());
  int n_land = int(std::floor(cfg.land_fraction * double(sorted.size())));
  if (n_land >= int(sorted.size())) n_land = int(sorted.size()) - 1;
  double thresh = n_land > 0 ? sorted[size_t(n_land) - 1]
                             : -std::numeric_limits<double>::infinity();
  grid.valid_mask.assign(size_t(L) * W, 1);
  {
    int assigned = 0;
    for (int64_t i = 0; i < landfield.size() && assigned < n_land; ++i) {
      if (landfield[i] <= thresh) {
        grid.valid_mask[size_t(i)] = 0;
        ++assigned;
      }
    }
  }
  grid.validate();

  PredictorStack& pred = ds.predictors;
  pred.values = Tensor({T, C, L, W});
  pred.missing.assign(size_t(T) * C * L * W, 0);
  static const char* kRefNames[8] = {"SLA", "SST", "SSR", "U", "V", "U10", "V10", "MDT"};
  for (int c = 0; c < C; ++c) {
    pred.channel_names.push_back(c < 8 ? kRefNames[c] : "X" + std::to_string(c));
    pred.units.push_back("synthetic");
  }

  const double lf_omega = 2 * M_PI / (12.0 * cfg.lowfreq_period_years);
  for (int c = 0; c < C; ++c) {
    Tensor pat = smooth_pattern(L, W, rng);
    Tensor modp = smooth_pattern(L, W, rng);
    double phase = 2 * M_PI * c / C;
    double phase_lf = 2 * M_PI * rng.uniform();
    double fac = 1.0 + 0.1 * c;
    for (int t = 0; t < T; ++t) {
      double seas = cfg.seasonal_amp * fac * std::sin(2 * M_PI * t / 12.0 + phase);
      double lowf = cfg.lowfreq_amp * fac * std::sin(lf_omega * t + phase_lf);
      for (int y = 0; y < L; ++y) {
        for (int x = 0; x < W; ++x) {
          double modv = 1.0 + cfg.spatial_mod * modp[int64_t(y) * W + x];
          double v = modv * (seas + lowf) + cfg.spatial_amp * pat[int64_t(y) * W + x] +
                     cfg.predictor_noise * rng.normal();
          bool land = !grid.valid_at(y, x);
          pred.values.at4(t, c, y, x) = land ? 0.0 : v;
          if (land)
            pred.missing[((size_t(t) * C + c) * L + y) * W + x] = 1;
        }
      }
    }
  }

  TargetSeries& targ = ds.target;
  targ.values = Tensor({T, L, W});
  targ.obs_mask.assign(size_t(T) * L * W, 0);
  const GroundTruth& gt = cfg.truth;
  if (gt.f1 >= C || gt.f2 >= C || gt.f3 >= C)
    throw validation_error("ground-truth channel index out of range");
  Tensor eps({L, W});
  double innov = cfg.target_noise * std::sqrt(std::max(0.0, 1.0 - cfg.target_noise_rho * cfg.target_noise_rho));
  for (int t = 0; t < T; ++t) {
    int tl = t > 0 ? t - 1 : 0;  // t=0 uses Z(0) in place of the lag term
    for (int y = 0; y < L; ++y) {
      for (int x = 0; x < W; ++x) {
        int64_t ci = int64_t(y) * W + x;
        double e = rng.normal();
        eps[ci] = (t == 0) ? cfg.target_noise * e
                           : cfg.target_noise_rho * eps[ci] + innov * e;
        if (!grid.valid_at(y, x)) {
          targ.values.at(t, y, x) = 0.0;
          continue;
        }
        double v = gt.eval(pred.values.at4(t, gt.f1, y, x),
                           pred.values.at4(tl, gt.f2, y, x),
                           pred.values.at4(t, gt.f3, y, x)) +
                   eps[ci];
        bool gap = cfg.obs_gap_fraction > 0 && rng.uniform() < cfg.obs_gap_fraction;
        targ.values.at(t, y, x) = gap ? 0.0 : v;
        if (!gap) targ.obs_mask[(size_t(t) * L + y) * W + x] = 1;
      }
    }
  }
  return ds;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += v[i];
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  const GridSpec& g = ds.grid;
  const int T = g.n_steps, L = g.length, W = g.width, C = ds.predictors.channels();
  ArrayFile f;
  f.dims["time"] = T;
  f.dims["y"] = L;
  f.dims["x"] = W;
  f.attrs["channel_names"] = join(ds.predictors.channel_names);
  f.attrs["units"] = join(ds.predictors.units);
  f.attrs["target_space"] = "log";
  if (g.calendar_start) f.attrs["calendar_start"] = *g.calendar_start;
  f.byte_arrays["valid_mask"] = g.valid_mask;
  if (!g.lat_edges.empty()) {
    Tensor lat({int(g.lat_edges.size())});
    for (size_t i = 0; i < g.lat_edges.size(); ++i) lat[int64_t(i)] = g.lat_edges[i];
    f.arrays["lat_edges"] = std::move(lat);
  }
  if (!g.lon_edges.empty()) {
    Tensor lon({int(g.lon_edges.size())});
    for (size_t i = 0; i < g.lon_edges.size(); ++i) lon[int64_t(i)] = g.lon_edges[i];
    f.arrays["lon_edges"] = std::move(lon);
  }
  Tensor time_ax({T});
  for (int t = 0; t < T; ++t) time_ax[t] = t;
  f.arrays["time"] = std::move(time_ax);

  // Missing cells go to file as NaN sentinels.
  for (int c = 0; c < C; ++c) {
    Tensor v({T, L, W});
    for (int t = 0; t < T; ++t)
      for (int y = 0; y < L; ++y)
        for (int x = 0; x < W; ++x) {
          bool miss = ds.predictors.missing[((size_t(t) * C + c) * L + y) * W + x] != 0;
          v.at(t, y, x) = miss ? kNaN : ds.predictors.values.at4(t, c, y, x);
        }
    f.arrays[ds.predictors.channel_names[size_t(c)]] = std::move(v);
  }
  Tensor tv({T, L, W});
  for (int t = 0; t < T; ++t)
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x)
        tv.at(t, y, x) = ds.target.observed(t, y, x, W, L) ? ds.target.values.at(t, y, x) : kNaN;
  f.arrays["target"] = std::move(tv);
  f.save(path);
}

Dataset load_dataset(const std::string& path) {
  ArrayFile f = ArrayFile::load(path);
  for (const char* d : {"time", "y", "x"})
    if (f.dims.find(d) == f.dims.end())
      throw validation_error("container missing dimension \"" + std::string(d) + "\"");
  const int T = int(f.dims["time"]), L = int(f.dims["y"]), W = int(f.dims["x"]);

  Dataset ds;
  GridSpec& g = ds.grid;
  g.width = W;
  g.length = L;
  g.n_steps = T;
  auto vm = f.byte_arrays.find("valid_mask");
  if (vm == f.byte_arrays.end())
    throw validation_error("container missing variable \"valid_mask\"");
  g.valid_mask = vm->second;
  if (auto it = f.attrs.find("calendar_start"); it != f.attrs.end())
    g.calendar_start = it->second;
  if (f.has_array("lat_edges")) {
    const Tensor& lat = f.array("lat_edges");
    g.lat_edges.assign(lat.data(), lat.data() + lat.size());
  }
  if (f.has_array("lon_edges")) {
    const Tensor& lon = f.array("lon_edges");
    g.lon_edges.assign(lon.data(), lon.data() + lon.size());
  }
  g.validate();
  if (f.has_array("time")) {
    const Tensor& tax = f.array("time");
    if (tax.size() != T) throw validation_error("time axis length mismatch");
    for (int t = 1; t < T; ++t)
      if (!(tax[t] > tax[t - 1]))
        throw validation_error("time axis is not strictly increasing at index " +
                               std::to_string(t));
  }

  auto names = split_csv(f.attr("channel_names"));
  if (names.empty()) throw validation_error("container declares no predictor channels");
  const int C = int(names.size());
  PredictorStack& pred = ds.predictors;
  pred.channel_names = names;
  if (auto it = f.attrs.find("units"); it != f.attrs.end())
    pred.units = split_csv(it->second);
  pred.units.resize(size_t(C));
  pred.values = Tensor({T, C, L, W});
  pred.missing.assign(size_t(T) * C * L * W, 0);
  for (int c = 0; c < C; ++c) {
    if (!f.has_array(names[size_t(c)]))
      throw validation_error("container missing variable \"" + names[size_t(c)] + "\"");
    const Tensor& v = f.array(names[size_t(c)]);
    if (v.rank() != 3 || v.dim(0) != T || v.dim(1) != L || v.dim(2) != W)
      throw validation_error("variable \"" + names[size_t(c)] + "\" has shape " +
                             v.shape_str() + ", expected [" + std::to_string(T) +
                             "," + std::to_string(L) + "," + std::to_string(W) + "]");
    for (int t = 0; t < T; ++t)
      for (int y = 0; y < L; ++y)
        for (int x = 0; x < W; ++x) {
          double val = v.at(t, y, x);
          bool miss = std::isnan(val);
          pred.values.at4(t, c, y, x) = miss ? 0.0 : val;
          if (miss) pred.missing[((size_t(t) * C + c) * L + y) * W + x] = 1;
        }
  }

  if (!f.has_array("target"))
    throw validation_error("container missing variable \"target\"");
  const Tensor& tv = f.array("target");
  if (tv.rank() != 3 || tv.dim(0) != T || tv.dim(1) != L || tv.dim(2) != W)
    throw validation_error("variable \"target\" has shape " + tv.shape_str());
  TargetSeries& targ = ds.target;
  targ.values = Tensor({T, L, W});
  targ.obs_mask.assign(size_t(T) * L * W, 0);
  for (int t = 0; t < T; ++t)
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x) {
        double val = tv.at(t, y, x);
        bool obs = !std::isnan(val) && g.valid_at(y, x);
        targ.values.at(t, y, x) = obs ? val : 0.0;
        if (obs) targ.obs_mask[(size_t(t) * L + y) * W + x] = 1;
      }
  return ds;
}

}  // namespace geoemu
