#pragma once

#include <functional>
#include <vector>

#include "geoemu/tensor.hpp"

namespace geoemu::ad {

// Reverse-mode tape. Vars are indices into the graph's node list; creation
// order is the topological order, so backward() is a single reverse sweep.
using Var = int;

class Graph {
 public:
  using BackFn = std::function<void(Graph&, Var)>;

  Var leaf(Tensor value, bool requires_grad = false);
  Var make(Tensor value, std::vector<Var> parents, BackFn bwd);

  const Tensor& value(Var id) const { return nodes_[size_t(id)].value; }
  Tensor& value(Var id) { return nodes_[size_t(id)].value; }
  bool requires_grad(Var id) const { return nodes_[size_t(id)].rg; }
  const std::vector<Var>& parents(Var id) const {
    return nodes_[size_t(id)].parents;
  }

  // Gradient buffer, zero-allocated on first touch.
  Tensor& grad(Var id);
  bool has_grad(Var id) const { return !nodes_[size_t(id)].grad.empty(); }

  // Seeds d(root)/d(root) = 1 (root must be scalar) and sweeps the tape.
  void backward(Var root);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> parents;
    BackFn bwd;
    bool rg = false;
  };
  std::vector<Node> nodes_;
};

// Elementwise / scalar ops.
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);
Var relu(Graph& g, Var a);
Var sigmoid(Graph& g, Var a);
Var tanh_op(Graph& g, Var a);
Var softshrink(Graph& g, Var a, double lambda);
// Elementwise clip to [lo, hi]; gradient passes through strictly inside the
// interval and is zero outside.
Var clamp(Graph& g, Var a, double lo, double hi);

// 2-D convolution on [Cin,H,W] with weights [Cout,Cin,kh,kw] and optional
// bias [Cout] (pass -1 for none). Zero padding.
Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int pad);

Var avgpool2(Graph& g, Var x);             // [C,H,W] -> [C,H/2,W/2]
Var upsample_bilinear2(Graph& g, Var x);   // [C,H,W] -> [C,2H,2W]
Var concat_channels(Graph& g, const std::vector<Var>& xs);
Var slice_channels(Graph& g, Var x, int c0, int c1);  // [c0,c1)

// Zero-pads a [C,H,W] field on the bottom/right to [C,Hp,Wp]; crop inverts.
Var pad_field(Graph& g, Var x, int hp, int wp);
Var crop_field(Graph& g, Var x, int h, int w);

// Inverse of patch embedding: [p*p, Gh, Gw] -> [1, Gh*p, Gw*p].
Var depatchify(Graph& g, Var x, int p);

// AFNO spatial mixer: per-channel 2-D DFT over the token grid, complex
// per-frequency diagonal weighting (wr/wi shaped like x), soft-threshold on
// real and imaginary parts, inverse transform, real part.
Var afno_mix(Graph& g, Var x, Var wr, Var wi, double lambda);

// Mean squared error over cells where mask != 0, as a scalar Var. target and
// mask are constants. n_contrib receives the contributing-cell count.
Var masked_mse(Graph& g, Var pred, const Tensor& target, const Tensor& mask,
               int64_t* n_contrib = nullptr);

}  // namespace geoemu::ad
