#include "geoemu/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "geoemu/rng.hpp"

namespace geoemu {

void TrainConfig::validate() const {
  if (learning_rate < 0) throw validation_error("learning_rate must be >= 0");
  if (batch_size < 1) throw validation_error("batch_size must be >= 1");
  if (max_epochs < 1) throw validation_error("max_epochs must be >= 1");
  if (rollout_k < 1) throw validation_error("rollout_k must be >= 1");
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GEOEMU_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

MaskedLossResult masked_loss(const Tensor& pred, const Tensor& target,
                             const Tensor& mask) {
  if (pred.size() != target.size() || pred.size() != mask.size())
    throw validation_error("masked_loss: shape mismatch");
  double acc = 0;
  int64_t n = 0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    if (mask[i] == 0.0) continue;
    double d = pred[i] - target[i];
    acc += d * d;
    ++n;
  }
  if (n == 0) throw validation_error("masked_loss: no contributing cells");
  return {acc / double(n), n};
}

Tensor static_input(const Preprocessed& p, int t, const WindowSpec& w) {
  return window_predictors(p.pred, t, w);
}

Tensor ar_input(const Preprocessed& p, int t, const WindowSpec& w,
                const Tensor& state) {
  Tensor win = window_predictors(p.pred, t, w);
  const int L = win.dim(1), W = win.dim(2);
  if (state.size() != int64_t(L) * W)
    throw validation_error("ar_input: state size mismatch");
  Tensor out({win.dim(0) + 1, L, W});
  for (int64_t i = 0; i < win.size(); ++i) out[i] = win[i];
  for (int64_t i = 0; i < state.size(); ++i) out[win.size() + i] = state[i];
  return out;
}

Tensor sample_mask(const GridSpec& grid, const Preprocessed& p, int t) {
  const int L = grid.length, W = grid.width;
  Tensor m({1, L, W});
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < W; ++x)
      m.at(0, y, x) = (grid.valid_at(y, x) &&
                       p.obs_mask[(size_t(t) * L + y) * W + x] != 0)
                          ? 1.0
                          : 0.0;
  return m;
}

Tensor sample_target(const Preprocessed& p, int t) {
  const int L = p.targ.dim(1), W = p.targ.dim(2);
  Tensor out({1, L, W});
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < W; ++x) out.at(0, y, x) = p.targ.at(t, y, x);
  return out;
}

namespace {

using GradVec = std::vector<Tensor>;  // aligned with model.params iteration order

struct SampleResult {
  double loss = 0;
  GradVec grads;
};

class Optim {
 public:
  Optim(const TrainConfig& cfg, const EmulatorModel& model) : cfg_(cfg) {
    for (const auto& [name, t] : model.params) {
      m_.emplace_back(t.shape());
      v_.emplace_back(t.shape());
    }
  }

  void step(EmulatorModel& model, const GradVec& grads) {
    ++t_;
    size_t i = 0;
    // Global-norm gradient clipping.
    double scale = 1.0;
    if (cfg_.grad_clip > 0) {
      double norm2 = 0;
      for (const Tensor& gt : grads)
        for (int64_t j = 0; j < gt.size(); ++j) norm2 += gt[j] * gt[j];
      double norm = std::sqrt(norm2);
      if (norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;
    }
    for (auto& [name, p] : model.params) {
      const Tensor& gt = grads[i];
      if (cfg_.optimizer == Optimizer::adam) {
        double bc1 = 1.0 - std::pow(0.9, t_);
        double bc2 = 1.0 - std::pow(0.999, t_);
        for (int64_t j = 0; j < p.size(); ++j) {
          double gv = gt[j] * scale;
          m_[i][j] = 0.9 * m_[i][j] + 0.1 * gv;
          v_[i][j] = 0.999 * v_[i][j] + 0.001 * gv * gv;
          double mh = m_[i][j] / bc1, vh = v_[i][j] / bc2;
          p[j] -= cfg_.learning_rate * mh / (std::sqrt(vh) + 1e-8);
        }
      } else {
        for (int64_t j = 0; j < p.size(); ++j) {
          double gv = gt[j] * scale;
          m_[i][j] = 0.9 * m_[i][j] + gv;
          p[j] -= cfg_.learning_rate * m_[i][j];
        }
      }
      ++i;
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<Tensor> m_, v_;
  int t_ = 0;
};

GradVec extract_grads(ad::Graph& g, const EmulatorModel& model, const ParamVars& pv) {
  GradVec out;
  out.reserve(model.params.size());
  for (const auto& [name, t] : model.params) {
    ad::Var v = pv.at(name);
    if (g.has_grad(v))
      out.push_back(g.grad(v));
    else
      out.emplace_back(t.shape());
  }
  return out;
}

void add_grads(GradVec& acc, const GradVec& g, double w) {
  if (acc.empty()) {
    acc = g;
    for (Tensor& t : acc)
      for (int64_t j = 0; j < t.size(); ++j) t[j] *= w;
    return;
  }
  for (size_t i = 0; i < acc.size(); ++i)
    for (int64_t j = 0; j < acc[i].size(); ++j) acc[i][j] += w * g[i][j];
}

// Deterministic parallel map over samples: results land in index order.
template <typename Fn>
void parallel_samples(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  int nt = std::min(threads, n);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

struct CommonTrain {
  EmulatorModel& model;
  const TrainConfig& cfg;
  int threads;

  // Runs the optimization loop given per-sample loss/grad evaluators.
  template <typename LossGradFn, typename LossFn>
  TrainHistory run(const std::vector<int>& train_ids, const std::vector<int>& val_ids,
                   LossGradFn&& loss_grad, LossFn&& loss_only) {
    TrainHistory hist;
    Optim opt(cfg, model);
    Rng shuffle_rng(cfg.seed + 0x9e3779b97f4a7c15ULL);
    std::map<std::string, Tensor> best_params = model.params;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::vector<int> order = train_ids;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      auto t0 = std::chrono::steady_clock::now();
      shuffle_rng.shuffle(order);
      double epoch_loss = 0;
      int epoch_n = 0;
      for (size_t b = 0; b < order.size(); b += size_t(cfg.batch_size)) {
        size_t e = std::min(order.size(), b + size_t(cfg.batch_size));
        int nb = int(e - b);
        std::vector<SampleResult> results(static_cast<size_t>(nb));
        parallel_samples(nb, threads, [&](int i) {
          results[size_t(i)] = loss_grad(order[b + size_t(i)]);
        });
        GradVec acc;
        double batch_loss = 0;
        for (int i = 0; i < nb; ++i) {
          add_grads(acc, results[size_t(i)].grads, 1.0 / nb);
          batch_loss += results[size_t(i)].loss / nb;
        }
        opt.step(model, acc);
        epoch_loss += batch_loss * nb;
        epoch_n += nb;
      }
      epoch_loss /= std::max(1, epoch_n);

      double val_loss;
      if (val_ids.empty()) {
        val_loss = epoch_loss;
      } else {
        std::vector<double> vls(val_ids.size());
        parallel_samples(int(val_ids.size()), threads,
                         [&](int i) { vls[size_t(i)] = loss_only(val_ids[size_t(i)]); });
        val_loss = 0;
        for (double v : vls) val_loss += v;
        val_loss /= double(vls.size());
      }

      auto t1 = std::chrono::steady_clock::now();
      hist.epochs.push_back(
          {epoch_loss, val_loss, std::chrono::duration<double>(t1 - t0).count()});
      if (!model.params_finite())
        throw geoemu::runtime_error("non-finite parameters after optimizer step");
      if (val_loss < best_val) {
        best_val = val_loss;
        best_params = model.params;
        hist.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best > cfg.early_stop_patience) {
        break;
      }
    }
    model.params = best_params;
    return hist;
  }
};

}  // namespace

TrainHistory train_static(EmulatorModel& model, const GridSpec& grid,
                          const Preprocessed& p, const SplitResult& splits,
                          const TrainConfig& cfg) {
  cfg.validate();
  if (model.autoregressive)
    throw validation_error("train_static: model is auto-regressive");

  auto usable = [&](int t) {
    if (t - model.window.delta_minus < 0 ||
        t + model.window.delta_plus > grid.n_steps - 1)
      return false;
    const int L = grid.length, W = grid.width;
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x)
        if (grid.valid_at(y, x) && p.obs_mask[(size_t(t) * L + y) * W + x]) return true;
    return false;
  };
  std::vector<int> train_ids, val_ids;
  for (int t : splits.train)
    if (usable(t)) train_ids.push_back(t);
  for (int t : splits.val)
    if (usable(t)) val_ids.push_back(t);
  if (train_ids.empty())
    throw validation_error("train_static: no usable training samples (all windows incomplete or unobserved)");

  int threads = resolve_threads(cfg.threads);
  auto loss_grad = [&](int t) {
    ad::Graph g;
    ParamVars pv = model.lift_params(g, true);
    ad::Var in = g.leaf(static_input(p, t, model.window));
    ad::Var out = model.forward(g, pv, in);
    ad::Var loss = ad::masked_mse(g, out, sample_target(p, t), sample_mask(grid, p, t));
    g.backward(loss);
    SampleResult r;
    r.loss = g.value(loss)[0];
    r.grads = extract_grads(g, model, pv);
    return r;
  };
  auto loss_only = [&](int t) {
    Tensor out = model.forward_eval(static_input(p, t, model.window));
    return masked_loss(out, sample_target(p, t), sample_mask(grid, p, t)).loss;
  };

  CommonTrain ct{model, cfg, threads};
  return ct.run(train_ids, val_ids, loss_grad, loss_only);
}

namespace {

// Sequence start usability for AR training: all windows complete and every
// rollout target month inside the record with at least one observed cell.
// Observation gaps in the initial state are fine — ar_state already fills
// them with the train-period climatology.
bool ar_start_usable(const GridSpec& grid, const Preprocessed& p,
                     const WindowSpec& w, int t0, int k_steps, int range_end) {
  const int L = grid.length, W = grid.width;
  if (t0 + k_steps > range_end) return false;
  for (int k = 1; k <= k_steps; ++k) {
    int t = t0 + k;
    if (t - w.delta_minus < 0 || t + w.delta_plus > grid.n_steps - 1) return false;
    bool any = false;
    const size_t base = size_t(t) * L * W;
    for (int64_t i = 0; i < int64_t(L) * W && !any; ++i)
      any = grid.valid_mask[size_t(i)] && p.obs_mask[base + size_t(i)];
    if (!any) return false;
  }
  return true;
}

}  // namespace

TrainHistory train_autoregressive(EmulatorModel& model, const GridSpec& grid,
                                  const Preprocessed& p, const SplitResult& splits,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (!model.autoregressive)
    throw validation_error("train_autoregressive: model is not auto-regressive");
  const int K = cfg.rollout_k;

  // Sequences start at every usable t0 with stride 1; validation sequences
  // start at validation steps. Roll-out targets stay inside the train range.
  int range_end = splits.train.empty() ? 0 : splits.train.back();
  if (!splits.val.empty()) range_end = std::max(range_end, splits.val.back());
  std::vector<int> train_ids, val_ids;
  for (int t : splits.train)
    if (ar_start_usable(grid, p, model.window, t, K, range_end)) train_ids.push_back(t);
  for (int t : splits.val)
    if (ar_start_usable(grid, p, model.window, t, K, range_end)) val_ids.push_back(t);
  if (train_ids.empty())
    throw validation_error("train_autoregressive: no usable training sequences");

  int threads = resolve_threads(cfg.threads);
  const int L = grid.length, W = grid.width;

  auto build_loss = [&](ad::Graph& g, const ParamVars& pv, int t0) {
    Tensor init({1, L, W});
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < W; ++x) init.at(0, y, x) = p.ar_state.at(t0, y, x);
    ad::Var state = g.leaf(std::move(init));  // teacher-forced observed initial state
    ad::Var total = -1;
    for (int k = 1; k <= K; ++k) {
      int t = t0 + k;
      ad::Var win_v = g.leaf(window_predictors(p.pred, t, model.window));
      // Previous state enters as the final input channel.
      ad::Var in = ad::concat_channels(g, {win_v, state});
      ad::Var out = model.forward(g, pv, in);  // [1,L,W]
      ad::Var lk = ad::masked_mse(g, out, sample_target(p, t), sample_mask(grid, p, t));
      total = (total < 0) ? lk : ad::add(g, total, lk);
      // Self-feeding from step 2 onward; the fed state is clipped so one
      // out-of-range cell cannot blow up the rest of the roll-out.
      state = ad::clamp(g, out, -kStateClip, kStateClip);
    }
    return ad::scale(g, total, 1.0 / K);
  };

  auto loss_grad = [&](int t0) {
    ad::Graph g;
    ParamVars pv = model.lift_params(g, true);
    ad::Var loss = build_loss(g, pv, t0);
    g.backward(loss);
    SampleResult r;
    r.loss = g.value(loss)[0];
    r.grads = extract_grads(g, model, pv);
    return r;
  };
  auto loss_only = [&](int t0) {
    ad::Graph g;
    ParamVars pv = model.lift_params(g, false);
    return g.value(build_loss(g, pv, t0))[0];
  };

  CommonTrain ct{model, cfg, threads};
  return ct.run(train_ids, val_ids, loss_grad, loss_only);
}

void export_history_csv(const std::string& path, const TrainHistory& h) {
  std::ofstream os(path);
  if (!os) throw geoemu::runtime_error("cannot write " + path);
  os << "epoch,train_loss,val_loss,wall_seconds\n";
  for (size_t i = 0; i < h.epochs.size(); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.3f\n", i,
                  h.epochs[i].train_loss, h.epochs[i].val_loss,
                  h.epochs[i].wall_seconds);
    os << buf;
  }
}

}  // namespace geoemu
