#include "geoemu/autodiff.hpp"

#include <cmath>
#include <memory>
#include <utility>

namespace geoemu::ad {

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.rg = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Var Graph::make(Tensor value, std::vector<Var> parents, BackFn bwd) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (Var p : n.parents) {
    if (nodes_[size_t(p)].rg) {
      n.rg = true;
      break;
    }
  }
  if (n.rg) n.bwd = std::move(bwd);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Tensor& Graph::grad(Var id) {
  Node& n = nodes_[size_t(id)];
  if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor(n.value.shape());
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());  // rank-0 scalar
  return n.grad;
}

void Graph::backward(Var root) {
  if (value(root).size() != 1) {
    throw validation_error("backward: root must be scalar");
  }
  grad(root)[0] = 1.0;
  for (Var id = root; id >= 0; --id) {
    Node& n = nodes_[size_t(id)];
    if (!n.rg || n.grad.empty() || !n.bwd) continue;
    n.bwd(*this, id);
  }
}

namespace {

void axpy(Tensor& dst, const Tensor& src, double a = 1.0) {
  for (int64_t i = 0; i < src.size(); ++i) dst[i] += a * src[i];
}

}  // namespace

Var add(Graph& g, Var a, Var b) {
  require_same_shape(g.value(a), g.value(b), "add");
  Tensor out = g.value(a);
  axpy(out, g.value(b));
  return g.make(std::move(out), {a, b}, [a, b](Graph& gg, Var id) {
    const Tensor& dy = gg.grad(id);
    if (gg.requires_grad(a)) axpy(gg.grad(a), dy);
    if (gg.requires_grad(b)) axpy(gg.grad(b), dy);
  });
}

Var sub(Graph& g, Var a, Var b) {
  require_same_shape(g.value(a), g.value(b), "sub");
  Tensor out = g.value(a);
  axpy(out, g.value(b), -1.0);
  return g.make(std::move(out), {a, b}, [a, b](Graph& gg, Var id) {
    const Tensor& dy = gg.grad(id);
    if (gg.requires_grad(a)) axpy(gg.grad(a), dy);
    if (gg.requires_grad(b)) axpy(gg.grad(b), dy, -1.0);
  });
}

Var mul(Graph& g, Var a, Var b) {
  require_same_shape(g.value(a), g.value(b), "mul");
  Tensor out = g.value(a);
  const Tensor& vb = g.value(b);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  return g.make(std::move(out), {a, b}, [a, b](Graph& gg, Var id) {
    const Tensor& dy = gg.grad(id);
    const Tensor& va = gg.value(a);
    const Tensor& vb2 = gg.value(b);
    if (gg.requires_grad(a)) {
      Tensor& da = gg.grad(a);
      for (int64_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * vb2[i];
    }
    if (gg.requires_grad(b)) {
      Tensor& db = gg.grad(b);
      for (int64_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * va[i];
    }
  });
}

Var scale(Graph& g, Var a, double s) {
  Tensor out = g.value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return g.make(std::move(out), {a}, [a, s](Graph& gg, Var id) {
    if (gg.requires_grad(a)) axpy(gg.grad(a), gg.grad(id), s);
  });
}

Var relu(Graph& g, Var a) {
  Tensor out = g.value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0 ? out[i] : 0.0;
  return g.make(std::move(out), {a}, [a](Graph& gg, Var id) {
    if (!gg.requires_grad(a)) return;
    const Tensor& dy = gg.grad(id);
    const Tensor& va = gg.value(a);
    Tensor& da = gg.grad(a);
    for (int64_t i = 0; i < dy.size(); ++i)
      if (va[i] > 0) da[i] += dy[i];
  });
}

Var sigmoid(Graph& g, Var a) {
  Tensor out = g.value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return g.make(std::move(out), {a}, [a](Graph& gg, Var id) {
    if (!gg.requires_grad(a)) return;
    const Tensor& dy = gg.grad(id);
    const Tensor& y = gg.value(id);
    Tensor& da = gg.grad(a);
    for (int64_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh_op(Graph& g, Var a) {
  Tensor out = g.value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return g.make(std::move(out), {a}, [a](Graph& gg, Var id) {
    if (!gg.requires_grad(a)) return;
    const Tensor& dy = gg.grad(id);
    const Tensor& y = gg.value(id);
    Tensor& da = gg.grad(a);
    for (int64_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * (1.0 - y[i] * y[i]);
  });
}

Var softshrink(Graph& g, Var a, double lambda) {
  Tensor out = g.value(a);
  for (int64_t i = 0; i < out.size(); ++i) {
    double v = out[i];
    out[i] = v > lambda ? v - lambda : (v < -lambda ? v + lambda : 0.0);
  }
  return g.make(std::move(out), {a}, [a, lambda](Graph& gg, Var id) {
    if (!gg.requires_grad(a)) return;
    const Tensor& dy = gg.grad(id);
    const Tensor& va = gg.value(a);
    Tensor& da = gg.grad(a);
    for (int64_t i = 0; i < dy.size(); ++i)
      if (std::abs(va[i]) > lambda) da[i] += dy[i];
  });
}

Var clamp(Graph& g, Var a, double lo, double hi) {
  Tensor out = g.value(a);
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = out[i] < lo ? lo : (out[i] > hi ? hi : out[i]);
  return g.make(std::move(out), {a}, [a, lo, hi](Graph& gg, Var id) {
    if (!gg.requires_grad(a)) return;
    const Tensor& dy = gg.grad(id);
    const Tensor& va = gg.value(a);
    Tensor& da = gg.grad(a);
    for (int64_t i = 0; i < dy.size(); ++i)
      if (va[i] > lo && va[i] < hi) da[i] += dy[i];
  });
}

Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int pad) {
  const Tensor& vx = g.value(x);
  const Tensor& vw = g.value(w);
  if (vx.rank() != 3 || vw.rank() != 4)
    throw validation_error("conv2d: expected x [C,H,W], w [O,I,kh,kw]");
  int cin = vx.dim(0), h = vx.dim(1), wi = vx.dim(2);
  int cout = vw.dim(0), win = vw.dim(1), kh = vw.dim(2), kw = vw.dim(3);
  if (win != cin)
    throw validation_error("conv2d: input channels " + std::to_string(cin) +
                           " do not match kernel channels " + std::to_string(win));
  int ho = (h + 2 * pad - kh) / stride + 1;
  int wo = (wi + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw validation_error("conv2d: empty output");

  Tensor out({cout, ho, wo});
  for (int o = 0; o < cout; ++o) {
    double bias = (b >= 0) ? g.value(b)[o] : 0.0;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double acc = bias;
        for (int i = 0; i < cin; ++i) {
          for (int u = 0; u < kh; ++u) {
            int iy = oy * stride - pad + u;
            if (iy < 0 || iy >= h) continue;
            for (int v = 0; v < kw; ++v) {
              int ix = ox * stride - pad + v;
              if (ix < 0 || ix >= wi) continue;
              acc += vx.at(i, iy, ix) * vw.at4(o, i, u, v);
            }
          }
        }
        out.at(o, oy, ox) = acc;
      }
    }
  }

  std::vector<Var> parents = {x, w};
  if (b >= 0) parents.push_back(b);
  return g.make(std::move(out), std::move(parents),
                [x, w, b, stride, pad](Graph& gg, Var id) {
    const Tensor& dy = gg.grad(id);
    const Tensor& vx2 = gg.value(x);
    const Tensor& vw2 = gg.value(w);
    int cin = vx2.dim(0), h = vx2.dim(1), wi = vx2.dim(2);
    int cout = vw2.dim(0), kh = vw2.dim(2), kw = vw2.dim(3);
    int ho = dy.dim(1), wo = dy.dim(2);
    bool need_x = gg.requires_grad(x);
    bool need_w = gg.requires_grad(w);
    bool need_b = b >= 0 && gg.requires_grad(b);
    Tensor* dx = need_x ? &gg.grad(x) : nullptr;
    Tensor* dw = need_w ? &gg.grad(w) : nullptr;
    Tensor* db = need_b ? &gg.grad(b) : nullptr;
    for (int o = 0; o < cout; ++o) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double gy = dy.at(o, oy, ox);
          if (gy == 0.0) continue;
          if (db) (*db)[o] += gy;
          if (!need_x && !need_w) continue;
          for (int i = 0; i < cin; ++i) {
            for (int u = 0; u < kh; ++u) {
              int iy = oy * stride - pad + u;
              if (iy < 0 || iy >= h) continue;
              for (int v = 0; v < kw; ++v) {
                int ix = ox * stride - pad + v;
                if (ix < 0 || ix >= wi) continue;
                if (dw) dw->at4(o, i, u, v) += gy * vx2.at(i, iy, ix);
                if (dx) dx->at(i, iy, ix) += gy * vw2.at4(o, i, u, v);
              }
            }
          }
        }
      }
    }
  });
}

Var avgpool2(Graph& g, Var x) {
  const Tensor& vx = g.value(x);
  if (vx.rank() != 3) throw validation_error("avgpool2: expected [C,H,W]");
  int c = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
  if (h % 2 != 0 || w % 2 != 0)
    throw validation_error("avgpool2: odd spatial size " + vx.shape_str());
  Tensor out({c, h / 2, w / 2});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j)
        out.at(ch, i, j) = 0.25 * (vx.at(ch, 2 * i, 2 * j) + vx.at(ch, 2 * i, 2 * j + 1) +
                                   vx.at(ch, 2 * i + 1, 2 * j) + vx.at(ch, 2 * i + 1, 2 * j + 1));
  return g.make(std::move(out), {x}, [x](Graph& gg, Var id) {
    if (!gg.requires_grad(x)) return;
    const Tensor& dy = gg.grad(id);
    Tensor& dx = gg.grad(x);
    int c = dy.dim(0), ho = dy.dim(1), wo = dy.dim(2);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          double gv = 0.25 * dy.at(ch, i, j);
          dx.at(ch, 2 * i, 2 * j) += gv;
          dx.at(ch, 2 * i, 2 * j + 1) += gv;
          dx.at(ch, 2 * i + 1, 2 * j) += gv;
          dx.at(ch, 2 * i + 1, 2 * j + 1) += gv;
        }
  });
}

namespace {

// align_corners=false source coordinate and weights for 2x upsampling.
inline void up2_coords(int dst, int src_n, int& i0, int& i1, double& w1) {
  double s = (dst + 0.5) / 2.0 - 0.5;
  if (s < 0) s = 0;
  if (s > src_n - 1) s = src_n - 1;
  i0 = static_cast<int>(std::floor(s));
  i1 = i0 + 1 < src_n ? i0 + 1 : i0;
  w1 = s - i0;
}

}  // namespace

Var upsample_bilinear2(Graph& g, Var x) {
  const Tensor& vx = g.value(x);
  if (vx.rank() != 3) throw validation_error("upsample: expected [C,H,W]");
  int c = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int i = 0; i < 2 * h; ++i) {
    int y0, y1;
    double wy;
    up2_coords(i, h, y0, y1, wy);
    for (int j = 0; j < 2 * w; ++j) {
      int x0, x1;
      double wx;
      up2_coords(j, w, x0, x1, wx);
      for (int ch = 0; ch < c; ++ch) {
        out.at(ch, i, j) = (1 - wy) * ((1 - wx) * vx.at(ch, y0, x0) + wx * vx.at(ch, y0, x1)) +
                           wy * ((1 - wx) * vx.at(ch, y1, x0) + wx * vx.at(ch, y1, x1));
      }
    }
  }
  return g.make(std::move(out), {x}, [x, h, w, c](Graph& gg, Var id) {
    if (!gg.requires_grad(x)) return;
    const Tensor& dy = gg.grad(id);
    Tensor& dx = gg.grad(x);
    for (int i = 0; i < 2 * h; ++i) {
      int y0, y1;
      double wy;
      up2_coords(i, h, y0, y1, wy);
      for (int j = 0; j < 2 * w; ++j) {
        int x0, x1;
        double wx;
        up2_coords(j, w, x0, x1, wx);
        for (int ch = 0; ch < c; ++ch) {
          double gv = dy.at(ch, i, j);
          dx.at(ch, y0, x0) += gv * (1 - wy) * (1 - wx);
          dx.at(ch, y0, x1) += gv * (1 - wy) * wx;
          dx.at(ch, y1, x0) += gv * wy * (1 - wx);
          dx.at(ch, y1, x1) += gv * wy * wx;
        }
      }
    }
  });
}

Var concat_channels(Graph& g, const std::vector<Var>& xs) {
  if (xs.empty()) throw validation_error("concat: empty input list");
  int h = g.value(xs[0]).dim(1), w = g.value(xs[0]).dim(2);
  int ctot = 0;
  for (Var v : xs) {
    const Tensor& t = g.value(v);
    if (t.rank() != 3 || t.dim(1) != h || t.dim(2) != w)
      throw validation_error("concat: incompatible field shapes");
    ctot += t.dim(0);
  }
  Tensor out({ctot, h, w});
  int off = 0;
  for (Var v : xs) {
    const Tensor& t = g.value(v);
    for (int64_t i = 0; i < t.size(); ++i)
      out[int64_t(off) * h * w + i] = t[i];
    off += t.dim(0);
  }
  std::vector<Var> parents = xs;
  return g.make(std::move(out), std::move(parents), [xs, h, w](Graph& gg, Var id) {
    const Tensor& dy = gg.grad(id);
    int off = 0;
    for (Var v : xs) {
      int c = gg.value(v).dim(0);
      if (gg.requires_grad(v)) {
        Tensor& dx = gg.grad(v);
        for (int64_t i = 0; i < dx.size(); ++i)
          dx[i] += dy[int64_t(off) * h * w + i];
      }
      off += c;
    }
  });
}

Var slice_channels(Graph& g, Var x, int c0, int c1) {
  const Tensor& vx = g.value(x);
  if (vx.rank() != 3 || c0 < 0 || c1 > vx.dim(0) || c0 >= c1)
    throw validation_error("slice_channels: bad range");
  int h = vx.dim(1), w = vx.dim(2);
  Tensor out({c1 - c0, h, w});
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = vx[int64_t(c0) * h * w + i];
  return g.make(std::move(out), {x}, [x, c0, h, w](Graph& gg, Var id) {
    if (!gg.requires_grad(x)) return;
    const Tensor& dy = gg.grad(id);
    Tensor& dx = gg.grad(x);
    for (int64_t i = 0; i < dy.size(); ++i)
      dx[int64_t(c0) * h * w + i] += dy[i];
  });
}

Var pad_field(Graph& g, Var x, int hp, int wp) {
  const Tensor& vx = g.value(x);
  int c = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
  if (hp < h || wp < w) throw validation_error("pad_field: target smaller than input");
  if (hp == h && wp == w) return x;
  Tensor out({c, hp, wp});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(ch, i, j) = vx.at(ch, i, j);
  return g.make(std::move(out), {x}, [x, h, w](Graph& gg, Var id) {
    if (!gg.requires_grad(x)) return;
    const Tensor& dy = gg.grad(id);
    Tensor& dx = gg.grad(x);
    int c = dx.dim(0);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) dx.at(ch, i, j) += dy.at(ch, i, j);
  });
}

Var crop_field(Graph& g, Var x, int h, int w) {
  const Tensor& vx = g.value(x);
  int c = vx.dim(0), hp = vx.dim(1), wp = vx.dim(2);
  if (h > hp || w > wp) throw validation_error("crop_field: target larger than input");
  if (hp == h && wp == w) return x;
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(ch, i, j) = vx.at(ch, i, j);
  return g.make(std::move(out), {x}, [x, h, w](Graph& gg, Var id) {
    if (!gg.requires_grad(x)) return;
    const Tensor& dy = gg.grad(id);
    Tensor& dx = gg.grad(x);
    int c = dx.dim(0);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) dx.at(ch, i, j) += dy.at(ch, i, j);
  });
}

Var depatchify(Graph& g, Var x, int p) {
  const Tensor& vx = g.value(x);
  if (vx.rank() != 3 || vx.dim(0) != p * p)
    throw validation_error("depatchify: expected [p*p,Gh,Gw]");
  int gh = vx.dim(1), gw = vx.dim(2);
  Tensor out({1, gh * p, gw * p});
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx)
      for (int u = 0; u < p; ++u)
        for (int v = 0; v < p; ++v)
          out.at(0, gy * p + u, gx * p + v) = vx.at(u * p + v, gy, gx);
  return g.make(std::move(out), {x}, [x, p, gh, gw](Graph& gg, Var id) {
    if (!gg.requires_grad(x)) return;
    const Tensor& dy = gg.grad(id);
    Tensor& dx = gg.grad(x);
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx)
        for (int u = 0; u < p; ++u)
          for (int v = 0; v < p; ++v)
            dx.at(u * p + v, gy, gx) += dy.at(0, gy * p + u, gx * p + v);
  });
}

namespace {

// Naive separable 2-D DFT on [C,H,W] with per-channel transforms.
// sign = -1 forward, +1 inverse; scale applied uniformly.
void dft2(const Tensor& re_in, const Tensor* im_in, Tensor& re_out,
          Tensor& im_out, int sign, double scl) {
  int c = re_in.dim(0), h = re_in.dim(1), w = re_in.dim(2);
  re_out = Tensor({c, h, w});
  im_out = Tensor({c, h, w});
  // Transform along W, then along H.
  std::vector<double> cw(size_t(w) * w), sw(size_t(w) * w);
  for (int k = 0; k < w; ++k)
    for (int n = 0; n < w; ++n) {
      double th = 2.0 * M_PI * k * n / w;
      cw[size_t(k) * w + n] = std::cos(th);
      sw[size_t(k) * w + n] = sign * std::sin(th);
    }
  std::vector<double> ch_(size_t(h) * h), sh(size_t(h) * h);
  for (int k = 0; k < h; ++k)
    for (int n = 0; n < h; ++n) {
      double th = 2.0 * M_PI * k * n / h;
      ch_[size_t(k) * h + n] = std::cos(th);
      sh[size_t(k) * h + n] = sign * std::sin(th);
    }
  Tensor tr({c, h, w}), ti({c, h, w});
  for (int chn = 0; chn < c; ++chn) {
    for (int i = 0; i < h; ++i) {
      for (int k = 0; k < w; ++k) {
        double ar = 0, ai = 0;
        for (int n = 0; n < w; ++n) {
          double xr = re_in.at(chn, i, n);
          double xi = im_in ? im_in->at(chn, i, n) : 0.0;
          double cc = cw[size_t(k) * w + n], ss = sw[size_t(k) * w + n];
          ar += xr * cc - xi * ss;
          ai += xr * ss + xi * cc;
        }
        tr.at(chn, i, k) = ar;
        ti.at(chn, i, k) = ai;
      }
    }
    for (int k2 = 0; k2 < h; ++k2) {
      for (int k = 0; k < w; ++k) {
        double ar = 0, ai = 0;
        for (int n = 0; n < h; ++n) {
          double cc = ch_[size_t(k2) * h + n], ss = sh[size_t(k2) * h + n];
          ar += tr.at(chn, n, k) * cc - ti.at(chn, n, k) * ss;
          ai += tr.at(chn, n, k) * ss + ti.at(chn, n, k) * cc;
        }
        re_out.at(chn, k2, k) = scl * ar;
        im_out.at(chn, k2, k) = scl * ai;
      }
    }
  }
}

}  // namespace

Var afno_mix(Graph& g, Var x, Var wr, Var wi, double lambda) {
  const Tensor& vx = g.value(x);
  require_same_shape(vx, g.value(wr), "afno_mix weights");
  require_same_shape(vx, g.value(wi), "afno_mix weights");
  int h = vx.dim(1), w = vx.dim(2);
  double invn = 1.0 / (double(h) * double(w));

  // Forward: A = DFT(x); B = W*A; C = shrink(B); y = Re(IDFT(C)/N).
  Tensor ar, ai, br, bi, cr, ci, yr, yi;
  dft2(vx, nullptr, ar, ai, -1, 1.0);
  const Tensor& vwr = g.value(wr);
  const Tensor& vwi = g.value(wi);
  br = Tensor(vx.shape());
  bi = Tensor(vx.shape());
  for (int64_t i = 0; i < vx.size(); ++i) {
    br[i] = vwr[i] * ar[i] - vwi[i] * ai[i];
    bi[i] = vwr[i] * ai[i] + vwi[i] * ar[i];
  }
  auto shrink = [lambda](double v) {
    return v > lambda ? v - lambda : (v < -lambda ? v + lambda : 0.0);
  };
  cr = Tensor(vx.shape());
  ci = Tensor(vx.shape());
  for (int64_t i = 0; i < vx.size(); ++i) {
    cr[i] = shrink(br[i]);
    ci[i] = shrink(bi[i]);
  }
  dft2(cr, &ci, yr, yi, +1, invn);

  // Keep intermediates needed by backward.
  auto sar = std::make_shared<Tensor>(std::move(ar));
  auto sai = std::make_shared<Tensor>(std::move(ai));
  auto sbr = std::make_shared<Tensor>(std::move(br));
  auto sbi = std::make_shared<Tensor>(std::move(bi));

  return g.make(std::move(yr), {x, wr, wi},
                [x, wr, wi, lambda, invn, sar, sai, sbr, sbi](Graph& gg, Var id) {
    const Tensor& dy = gg.grad(id);
    // dC = DFT(dy)/N (forward transform of the real output gradient).
    Tensor dcr, dci;
    dft2(dy, nullptr, dcr, dci, -1, invn);
    // Through shrink.
    for (int64_t i = 0; i < dcr.size(); ++i) {
      if (std::abs((*sbr)[i]) <= lambda) dcr[i] = 0.0;
      if (std::abs((*sbi)[i]) <= lambda) dci[i] = 0.0;
    }
    const Tensor& vwr = gg.value(wr);
    const Tensor& vwi = gg.value(wi);
    // dW = conj(A) * dB ; dA = conj(W) * dB.
    if (gg.requires_grad(wr)) {
      Tensor& dwr = gg.grad(wr);
      for (int64_t i = 0; i < dcr.size(); ++i)
        dwr[i] += (*sar)[i] * dcr[i] + (*sai)[i] * dci[i];
    }
    if (gg.requires_grad(wi)) {
      Tensor& dwi = gg.grad(wi);
      for (int64_t i = 0; i < dcr.size(); ++i)
        dwi[i] += -(*sai)[i] * dcr[i] + (*sar)[i] * dci[i];
    }
    if (gg.requires_grad(x)) {
      Tensor dar(dcr.shape()), dai(dcr.shape());
      for (int64_t i = 0; i < dcr.size(); ++i) {
        dar[i] = vwr[i] * dcr[i] + vwi[i] * dci[i];
        dai[i] = -vwi[i] * dcr[i] + vwr[i] * dci[i];
      }
      // dx = Re(IDFT_unnorm(dA)).
      Tensor dxr, dxi;
      dft2(dar, &dai, dxr, dxi, +1, 1.0);
      axpy(gg.grad(x), dxr);
    }
  });
}

Var masked_mse(Graph& g, Var pred, const Tensor& target, const Tensor& mask,
               int64_t* n_contrib) {
  const Tensor& vp = g.value(pred);
  if (vp.size() != target.size() || vp.size() != mask.size())
    throw validation_error("masked_mse: shape mismatch");
  int64_t n = 0;
  double acc = 0;
  for (int64_t i = 0; i < vp.size(); ++i) {
    if (mask[i] == 0.0) continue;
    double d = vp[i] - target[i];
    acc += d * d;
    ++n;
  }
  if (n == 0) throw validation_error("masked_mse: no contributing cells");
  if (n_contrib) *n_contrib = n;
  Tensor out = Tensor::scalar(acc / double(n));
  auto tgt = std::make_shared<Tensor>(target);
  auto msk = std::make_shared<Tensor>(mask);
  return g.make(std::move(out), {pred}, [pred, tgt, msk, n](Graph& gg, Var id) {
    if (!gg.requires_grad(pred)) return;
    double gy = gg.grad(id)[0];
    const Tensor& vp2 = gg.value(pred);
    Tensor& dp = gg.grad(pred);
    double c = 2.0 * gy / double(n);
    for (int64_t i = 0; i < vp2.size(); ++i) {
      if ((*msk)[i] == 0.0) continue;
      dp[i] += c * (vp2[i] - (*tgt)[i]);
    }
  });
}

}  // namespace geoemu::ad
