#pragma once

// Independent reference implementations used to cross-check the library:
// finite-difference gradients, a cyclic Jacobi eigensolver, and brute-force
// statistics. Deliberately written in the most naive way possible.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "geoemu/autodiff.hpp"
#include "geoemu/models.hpp"
#include "geoemu/rng.hpp"
#include "geoemu/tensor.hpp"

namespace oracles {

using geoemu::EmulatorModel;
using geoemu::Tensor;

inline double masked_mse_plain(const Tensor& pred, const Tensor& target,
                               const Tensor& mask) {
  double s = 0;
  int64_t n = 0;
  for (int64_t i = 0; i < pred.size(); ++i)
    if (mask[i] != 0) {
      double d = pred[i] - target[i];
      s += d * d;
      ++n;
    }
  return s / double(n);
}

// Mean of per-step masked MSEs over a self-fed roll-out chain, evaluated with
// plain forwards (no tape). windows[k] is the predictor block for step k.
inline double rollout_loss_plain(const EmulatorModel& m, const Tensor& state0,
                                 const std::vector<Tensor>& windows,
                                 const std::vector<Tensor>& targets,
                                 const std::vector<Tensor>& masks) {
  const int K = int(windows.size());
  Tensor state = state0;
  double total = 0;
  for (int k = 0; k < K; ++k) {
    const Tensor& w = windows[size_t(k)];
    Tensor input({w.dim(0) + 1, w.dim(1), w.dim(2)});
    for (int64_t i = 0; i < w.size(); ++i) input[i] = w[i];
    for (int64_t i = 0; i < state.size(); ++i) input[w.size() + i] = state[i];
    Tensor out = m.forward_eval(input);
    total += masked_mse_plain(out, targets[size_t(k)], masks[size_t(k)]);
    state = out;
  }
  return total / K;
}

// Analytic gradients of the same roll-out loss through the tape (K = 1 gives
// the plain masked loss).
inline std::map<std::string, Tensor> rollout_grads(
    const EmulatorModel& m, const Tensor& state0,
    const std::vector<Tensor>& windows, const std::vector<Tensor>& targets,
    const std::vector<Tensor>& masks, double* loss_out = nullptr) {
  namespace ad = geoemu::ad;
  const int K = int(windows.size());
  ad::Graph g;
  geoemu::ParamVars pv = m.lift_params(g, true);
  ad::Var state = g.leaf(state0);
  ad::Var loss = -1;
  for (int k = 0; k < K; ++k) {
    ad::Var w = g.leaf(windows[size_t(k)]);
    ad::Var input = ad::concat_channels(g, {w, state});
    ad::Var out = m.forward(g, pv, input);
    ad::Var l = ad::masked_mse(g, out, targets[size_t(k)], masks[size_t(k)]);
    loss = k == 0 ? l : ad::add(g, loss, l);
    state = out;
  }
  loss = ad::scale(g, loss, 1.0 / K);
  g.backward(loss);
  if (loss_out) *loss_out = g.value(loss)[0];
  std::map<std::string, Tensor> grads;
  for (auto& [name, v] : pv)
    grads[name] = g.has_grad(v) ? g.grad(v)
                                : Tensor(g.value(v).shape());
  return grads;
}

// Analytic gradients of masked_mse(forward(input)) for a static model.
inline std::map<std::string, Tensor> static_grads(const EmulatorModel& m,
                                                  const Tensor& input,
                                                  const Tensor& target,
                                                  const Tensor& mask,
                                                  double* loss_out = nullptr) {
  namespace ad = geoemu::ad;
  ad::Graph g;
  geoemu::ParamVars pv = m.lift_params(g, true);
  ad::Var out = m.forward(g, pv, g.leaf(input));
  ad::Var loss = ad::masked_mse(g, out, target, mask);
  g.backward(loss);
  if (loss_out) *loss_out = g.value(loss)[0];
  std::map<std::string, Tensor> grads;
  for (auto& [name, v] : pv)
    grads[name] = g.has_grad(v) ? g.grad(v) : Tensor(g.value(v).shape());
  return grads;
}

// Central-difference check on n randomly sampled parameters. Returns the
// worst symmetric relative error.
template <typename LossFn>
double gradcheck(EmulatorModel& m, const std::map<std::string, Tensor>& grads,
                 LossFn loss, int n, uint64_t seed, double h = 1e-5,
                 int* checked_out = nullptr) {
  std::vector<std::pair<std::string, int64_t>> coords;
  for (const auto& [name, t] : m.params)
    for (int64_t i = 0; i < t.size(); ++i) coords.emplace_back(name, i);
  geoemu::Rng rng(seed);
  double worst = 0;
  int checked = 0;
  int attempts = std::min<int>(int(coords.size()), n * 8);
  for (int a = 0; a < attempts && checked < n; ++a) {
    auto [name, i] = coords[size_t(rng.below(uint64_t(coords.size())))];
    double g_an = grads.at(name)[i];
    double save = m.params[name][i];
    m.params[name][i] = save + h;
    double lp = loss(m);
    m.params[name][i] = save - h;
    double lm = loss(m);
    m.params[name][i] = save;
    double g_fd = (lp - lm) / (2 * h);
    double scale = std::max({std::fabs(g_an), std::fabs(g_fd), 1e-3});
    if (std::fabs(g_an) < 1e-7 && std::fabs(g_fd) < 1e-7) continue;
    worst = std::max(worst, std::fabs(g_an - g_fd) / scale);
    ++checked;
  }
  if (checked_out) *checked_out = checked;
  return worst;
}

// Cyclic Jacobi eigensolver for a symmetric matrix (row-major n x n).
// Returns eigenvalues descending; V columns are the eigenvectors.
inline void jacobi_eig(std::vector<double> A, int n, std::vector<double>& evals,
                       std::vector<double>& V) {
  V.assign(size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) V[size_t(i) * n + i] = 1.0;
  auto at = [&](std::vector<double>& M, int r, int c) -> double& {
    return M[size_t(r) * n + c];
  };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(A, p, q) * at(A, p, q);
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        double apq = at(A, p, q);
        if (std::fabs(apq) < 1e-300) continue;
        double theta = (at(A, q, q) - at(A, p, p)) / (2 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1));
        double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = at(A, k, p), akq = at(A, k, q);
          at(A, k, p) = c * akp - s * akq;
          at(A, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = at(A, p, k), aqk = at(A, q, k);
          at(A, p, k) = c * apk - s * aqk;
          at(A, q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = at(V, k, p), vkq = at(V, k, q);
          at(V, k, p) = c * vkp - s * vkq;
          at(V, k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[size_t(i)] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return at(A, a, a) > at(A, b, b);
  });
  evals.resize(size_t(n));
  std::vector<double> Vs(size_t(n) * n);
  for (int j = 0; j < n; ++j) {
    evals[size_t(j)] = at(A, order[size_t(j)], order[size_t(j)]);
    for (int i = 0; i < n; ++i) Vs[size_t(i) * n + j] = at(V, i, order[size_t(j)]);
  }
  V = std::move(Vs);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(a.size());
  mb /= double(b.size());
  double saa = 0, sbb = 0, sab = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace oracles
