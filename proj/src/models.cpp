#include "geoemu/models.hpp"

#include <cmath>

#include "geoemu/container.hpp"
#include "geoemu/rng.hpp"

namespace geoemu {

using ad::Graph;
using ad::Var;

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::CNN: return "cnn";
    case Arch::ConvLSTM: return "convlstm";
    case Arch::AFNO: return "afno";
    case Arch::UNet: return "unet";
  }
  return "?";
}

Arch arch_from_name(const std::string& name) {
  if (name == "cnn") return Arch::CNN;
  if (name == "convlstm") return Arch::ConvLSTM;
  if (name == "afno") return Arch::AFNO;
  if (name == "unet") return Arch::UNet;
  throw validation_error("unknown architecture \"" + name +
                         "\" (expected cnn|convlstm|afno|unet)");
}

namespace {

int ceil_to(int v, int m) { return (v + m - 1) / m * m; }

// Per-frame input channels for ConvLSTM. An auto-regressive previous-state
// channel (in_channels % seq_len == 1) is broadcast into every frame.
int lstm_frame_channels(int in_channels, int seq_len) {
  int rem = in_channels % seq_len;
  if (rem != 0 && rem != 1)
    throw validation_error("convlstm: in_channels " + std::to_string(in_channels) +
                           " not compatible with sequence length " +
                           std::to_string(seq_len));
  return in_channels / seq_len + (rem ? 1 : 0);
}

}  // namespace

void EmulatorModel::init_params(uint64_t seed) {
  params.clear();
  auto conv = [this](const std::string& name, int co, int ci, int k) {
    params[name + "/w"] = Tensor({co, ci, k, k});
    params[name + "/b"] = Tensor({co});
  };
  switch (arch) {
    case Arch::CNN: {
      if (cfg.cnn_depth < 2) throw validation_error("cnn: depth must be >= 2");
      int w = cfg.cnn_width;
      for (int l = 0; l + 1 < cfg.cnn_depth; ++l) {
        char name[16];
        std::snprintf(name, sizeof(name), "conv%02d", l);
        conv(name, w, l == 0 ? in_channels : w, 3);
      }
      conv("out", 1, w, 3);
      break;
    }
    case Arch::ConvLSTM: {
      if (cfg.lstm_seq_len < 1)
        throw validation_error("convlstm: sequence length must be >= 1");
      int cf = lstm_frame_channels(in_channels, cfg.lstm_seq_len);
      int hdim = cfg.lstm_hidden;
      for (int l = 0; l < cfg.lstm_layers; ++l) {
        std::string p = "lstm" + std::to_string(l);
        int ci = l == 0 ? cf : hdim;
        params[p + "/wx"] = Tensor({4 * hdim, ci, 3, 3});
        params[p + "/wh"] = Tensor({4 * hdim, hdim, 3, 3});
        params[p + "/b"] = Tensor({4 * hdim});
      }
      conv("out", 1, hdim, 3);
      break;
    }
    case Arch::AFNO: {
      if (cfg.field_height <= 0 || cfg.field_width <= 0)
        throw validation_error("afno: field_height/field_width must be set");
      int p = cfg.afno_patch;
      if ((cfg.field_height % p != 0 || cfg.field_width % p != 0) && !cfg.allow_padding)
        throw validation_error("afno: grid " + std::to_string(cfg.field_height) + "x" +
                               std::to_string(cfg.field_width) +
                               " not divisible by patch size " + std::to_string(p));
      int gh = ceil_to(cfg.field_height, p) / p;
      int gw = ceil_to(cfg.field_width, p) / p;
      int d = cfg.afno_embed, m = cfg.afno_mlp_hidden;
      params["embed/w"] = Tensor({d, in_channels, p, p});
      params["embed/b"] = Tensor({d});
      params["pos"] = Tensor({d, gh, gw});
      for (int n = 0; n < cfg.afno_blocks; ++n) {
        std::string pre = "blk" + std::to_string(n);
        params[pre + "/freq_r"] = Tensor({d, gh, gw});
        params[pre + "/freq_i"] = Tensor({d, gh, gw});
        params[pre + "/mlp1/w"] = Tensor({m, d, 1, 1});
        params[pre + "/mlp1/b"] = Tensor({m});
        params[pre + "/mlp2/w"] = Tensor({d, m, 1, 1});
        params[pre + "/mlp2/b"] = Tensor({d});
      }
      params["head/w"] = Tensor({p * p, d, 1, 1});
      params["head/b"] = Tensor({p * p});
      break;
    }
    case Arch::UNet: {
      int w = cfg.unet_width;
      auto block = [&](const std::string& pre, int ci, int co) {
        conv(pre + "/a", co, ci, 3);
        conv(pre + "/b", co, ci, 3);
        conv(pre + "/c", co, ci, 3);
        conv(pre + "/p", co, ci, 1);
      };
      block("enc1", in_channels, w);
      block("enc2", w, 2 * w);
      block("bott", 2 * w, 4 * w);
      conv("up1", 2 * w, 4 * w, 3);
      block("dec2", 4 * w, 2 * w);
      conv("up2", w, 2 * w, 3);
      block("dec1", 2 * w, w);
      conv("out", 1, w, 1);
      break;
    }
  }

  Rng rng(seed);
  for (auto& [name, t] : params) {
    if (name.size() >= 2 && name.compare(name.size() - 2, 2, "/b") == 0) continue;
    if (name == "pos") continue;
    if (name.find("freq_r") != std::string::npos) {
      for (int64_t i = 0; i < t.size(); ++i) t[i] = 1.0;  // identity mixer init
      continue;
    }
    if (name.find("freq_i") != std::string::npos) continue;
    // He fan-in for conv kernels [O,I,kh,kw]. The UNet's multiplicative
    // gates (b*c) and residual projections get reduced gains so the block is
    // variance-preserving at init; same for the AFNO residual FFN.
    auto ends_with = [&](const char* suffix) {
      std::string s(suffix);
      return name.size() >= s.size() &&
             name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    double gain = 2.0;
    if (arch == Arch::UNet) {
      if (ends_with("/a/w"))
        gain = 1.0;
      else if (ends_with("/b/w") || ends_with("/c/w"))
        gain = 0.5;
      else if (ends_with("/p/w"))
        gain = 0.4;
      else if (name == "out/w")
        // Keep the init map contractive: the gated blocks are super-linear in
        // input scale, so an autoregressive roll-out at init diverges unless
        // the output projection starts well below unit gain.
        gain = 0.05;
      else
        gain = 1.0;  // up1, up2
    } else if (arch == Arch::AFNO) {
      if (name.find("/mlp2/") != std::string::npos)
        gain = 0.1;
      else if (name == "head/w" || name == "embed/w")
        gain = 1.0;
    }
    double fan_in = double(t.dim(1)) * t.dim(2) * t.dim(3);
    double sd = std::sqrt(gain / fan_in);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = sd * rng.normal();
  }
}

ParamVars EmulatorModel::lift_params(Graph& g, bool requires_grad) const {
  ParamVars pv;
  for (const auto& [name, t] : params) pv[name] = g.leaf(t, requires_grad);
  return pv;
}

int64_t EmulatorModel::count_parameters(std::map<std::string, int64_t>* groups) const {
  int64_t total = 0;
  for (const auto& [name, t] : params) {
    total += t.size();
    if (groups) {
      std::string group = name.substr(0, name.find('/'));
      (*groups)[group] += t.size();
    }
  }
  return total;
}

bool EmulatorModel::params_finite() const {
  for (const auto& [name, t] : params)
    for (int64_t i = 0; i < t.size(); ++i)
      if (!std::isfinite(t[i])) return false;
  return true;
}

namespace {

Var pconv(Graph& g, const ParamVars& pv, const std::string& name, Var x,
          int stride = 1, int pad = 1) {
  return ad::conv2d(g, x, pv.at(name + "/w"), pv.at(name + "/b"), stride, pad);
}

Var forward_cnn(const EmulatorModel& m, Graph& g, const ParamVars& pv, Var x) {
  Var h = x;
  for (int l = 0; l + 1 < m.cfg.cnn_depth; ++l) {
    char name[16];
    std::snprintf(name, sizeof(name), "conv%02d", l);
    h = ad::relu(g, pconv(g, pv, name, h));
  }
  return pconv(g, pv, "out", h);
}

Var forward_convlstm(const EmulatorModel& m, Graph& g, const ParamVars& pv, Var x) {
  const int S = m.cfg.lstm_seq_len;
  const int hdim = m.cfg.lstm_hidden;
  const Tensor& vx = g.value(x);
  int L = vx.dim(1), W = vx.dim(2);
  int base = m.in_channels / S;  // channels per frame before the AR extra
  bool extra = (m.in_channels % S) == 1;

  // Assemble the frame sequence (oldest -> newest).
  std::vector<Var> frames;
  Var state = -1;
  if (extra) state = ad::slice_channels(g, x, m.in_channels - 1, m.in_channels);
  for (int s = 0; s < S; ++s) {
    Var f = ad::slice_channels(g, x, s * base, (s + 1) * base);
    if (extra) f = ad::concat_channels(g, {f, state});
    frames.push_back(f);
  }

  std::vector<Var> h(size_t(m.cfg.lstm_layers)), c(size_t(m.cfg.lstm_layers));
  for (int l = 0; l < m.cfg.lstm_layers; ++l) {
    h[size_t(l)] = g.leaf(Tensor({hdim, L, W}));
    c[size_t(l)] = g.leaf(Tensor({hdim, L, W}));
  }
  for (int s = 0; s < S; ++s) {
    Var xin = frames[size_t(s)];
    for (int l = 0; l < m.cfg.lstm_layers; ++l) {
      std::string p = "lstm" + std::to_string(l);
      Var gx = ad::conv2d(g, xin, pv.at(p + "/wx"), pv.at(p + "/b"), 1, 1);
      Var gh = ad::conv2d(g, h[size_t(l)], pv.at(p + "/wh"), -1, 1, 1);
      Var gates = ad::add(g, gx, gh);
      Var gi = ad::sigmoid(g, ad::slice_channels(g, gates, 0, hdim));
      Var gf = ad::sigmoid(g, ad::slice_channels(g, gates, hdim, 2 * hdim));
      Var gg = ad::tanh_op(g, ad::slice_channels(g, gates, 2 * hdim, 3 * hdim));
      Var go = ad::sigmoid(g, ad::slice_channels(g, gates, 3 * hdim, 4 * hdim));
      c[size_t(l)] = ad::add(g, ad::mul(g, gf, c[size_t(l)]), ad::mul(g, gi, gg));
      h[size_t(l)] = ad::mul(g, go, ad::tanh_op(g, c[size_t(l)]));
      xin = h[size_t(l)];
    }
  }
  return pconv(g, pv, "out", h[size_t(m.cfg.lstm_layers - 1)]);
}

Var forward_afno(const EmulatorModel& m, Graph& g, const ParamVars& pv, Var x) {
  const int p = m.cfg.afno_patch;
  const Tensor& vx = g.value(x);
  int L = vx.dim(1), W = vx.dim(2);
  if (L != m.cfg.field_height || W != m.cfg.field_width)
    throw validation_error("afno: expected field " + std::to_string(m.cfg.field_height) +
                           "x" + std::to_string(m.cfg.field_width) + ", got " +
                           std::to_string(L) + "x" + std::to_string(W));
  int lp = ceil_to(L, p), wp = ceil_to(W, p);
  if ((lp != L || wp != W) && !m.cfg.allow_padding)
    throw validation_error("afno: grid not divisible by patch size " + std::to_string(p));
  Var xin = ad::pad_field(g, x, lp, wp);

  Var tok = ad::conv2d(g, xin, pv.at("embed/w"), pv.at("embed/b"), p, 0);
  tok = ad::add(g, tok, pv.at("pos"));
  for (int n = 0; n < m.cfg.afno_blocks; ++n) {
    std::string pre = "blk" + std::to_string(n);
    Var mixed = ad::afno_mix(g, tok, pv.at(pre + "/freq_r"), pv.at(pre + "/freq_i"),
                             m.cfg.afno_lambda);
    Var ff = ad::conv2d(g, mixed, pv.at(pre + "/mlp1/w"), pv.at(pre + "/mlp1/b"), 1, 0);
    ff = ad::relu(g, ff);
    ff = ad::conv2d(g, ff, pv.at(pre + "/mlp2/w"), pv.at(pre + "/mlp2/b"), 1, 0);
    tok = ad::add(g, mixed, ff);
  }
  Var out = ad::conv2d(g, tok, pv.at("head/w"), pv.at("head/b"), 1, 0);
  out = ad::depatchify(g, out, p);
  return ad::crop_field(g, out, L, W);
}

Var forward_unet(const EmulatorModel& m, Graph& g, const ParamVars& pv, Var x) {
  const Tensor& vx = g.value(x);
  int L = vx.dim(1), W = vx.dim(2);
  int lp = ceil_to(L, 4), wp = ceil_to(W, 4);
  if ((lp != L || wp != W) && !m.cfg.allow_padding)
    throw validation_error("unet: grid " + std::to_string(L) + "x" + std::to_string(W) +
                           " not divisible by 4");
  Var xin = ad::pad_field(g, x, lp, wp);

  // Residual block with an elementwise bilinear interaction:
  //   relu(a(x) + b(x) * c(x)) + proj(x)
  auto block = [&](const std::string& pre, Var in) {
    Var a = pconv(g, pv, pre + "/a", in);
    Var b = pconv(g, pv, pre + "/b", in);
    Var c = pconv(g, pv, pre + "/c", in);
    Var y = ad::relu(g, ad::add(g, a, ad::mul(g, b, c)));
    Var pr = pconv(g, pv, pre + "/p", in, 1, 0);
    return ad::add(g, y, pr);
  };

  Var e1 = block("enc1", xin);
  Var e2 = block("enc2", ad::avgpool2(g, e1));
  Var bt = block("bott", ad::avgpool2(g, e2));
  Var u1 = pconv(g, pv, "up1", ad::upsample_bilinear2(g, bt));
  Var d2 = block("dec2", ad::concat_channels(g, {u1, e2}));
  Var u2 = pconv(g, pv, "up2", ad::upsample_bilinear2(g, d2));
  Var d1 = block("dec1", ad::concat_channels(g, {u2, e1}));
  Var out = pconv(g, pv, "out", d1, 1, 0);
  return ad::crop_field(g, out, L, W);
}

}  // namespace

Var EmulatorModel::forward(Graph& g, const ParamVars& pv, Var input) const {
  const Tensor& vin = g.value(input);
  if (vin.rank() != 3 || vin.dim(0) != in_channels)
    throw validation_error("forward: expected input [" + std::to_string(in_channels) +
                           ",L,W], got " + vin.shape_str());
  for (int64_t i = 0; i < vin.size(); ++i)
    if (!std::isfinite(vin[i]))
      throw validation_error("forward: non-finite value in input");
  switch (arch) {
    case Arch::CNN: return forward_cnn(*this, g, pv, input);
    case Arch::ConvLSTM: return forward_convlstm(*this, g, pv, input);
    case Arch::AFNO: return forward_afno(*this, g, pv, input);
    case Arch::UNet: return forward_unet(*this, g, pv, input);
  }
  throw runtime_error("unreachable");
}

Tensor EmulatorModel::forward_eval(const Tensor& input) const {
  Graph g;
  ParamVars pv = lift_params(g, false);
  Var out = forward(g, pv, g.leaf(input));
  return g.value(out);
}

namespace {

EmulatorModel build_common(Arch arch, int in_channels, const ArchConfig& cfg) {
  if (in_channels < 1) throw validation_error("in_channels must be >= 1");
  EmulatorModel m;
  m.arch = arch;
  m.in_channels = in_channels;
  m.cfg = cfg;
  m.init_params(0);
  return m;
}

}  // namespace

EmulatorModel build_cnn(int in_channels, const ArchConfig& cfg) {
  return build_common(Arch::CNN, in_channels, cfg);
}
EmulatorModel build_convlstm(int in_channels, const ArchConfig& cfg) {
  return build_common(Arch::ConvLSTM, in_channels, cfg);
}
EmulatorModel build_afno(int in_channels, const ArchConfig& cfg) {
  return build_common(Arch::AFNO, in_channels, cfg);
}
EmulatorModel build_unet(int in_channels, const ArchConfig& cfg) {
  return build_common(Arch::UNet, in_channels, cfg);
}
EmulatorModel build_model(Arch arch, int in_channels, const ArchConfig& cfg) {
  return build_common(arch, in_channels, cfg);
}

namespace {

void put_int(std::map<std::string, std::string>& a, const std::string& k, int64_t v) {
  a[k] = std::to_string(v);
}
int64_t get_int(const ArrayFile& f, const std::string& k) {
  return std::stoll(f.attr(k));
}

Tensor vec_to_tensor(const std::vector<double>& v) {
  Tensor t({int(v.size())});
  for (size_t i = 0; i < v.size(); ++i) t[int64_t(i)] = v[i];
  return t;
}
std::vector<double> tensor_to_vec(const Tensor& t) {
  return std::vector<double>(t.data(), t.data() + t.size());
}

}  // namespace

void save_checkpoint(const std::string& path, const EmulatorModel& m,
                     const NormStats& pred_stats, const NormStats& targ_stats) {
  ArrayFile f;
  f.attrs["kind"] = "checkpoint";
  f.attrs["arch"] = arch_name(m.arch);
  put_int(f.attrs, "autoregressive", m.autoregressive ? 1 : 0);
  put_int(f.attrs, "delta", m.delta);
  put_int(f.attrs, "window_dm", m.window.delta_minus);
  put_int(f.attrs, "window_dp", m.window.delta_plus);
  put_int(f.attrs, "in_channels", m.in_channels);
  const ArchConfig& c = m.cfg;
  put_int(f.attrs, "cfg_cnn_depth", c.cnn_depth);
  put_int(f.attrs, "cfg_cnn_width", c.cnn_width);
  put_int(f.attrs, "cfg_lstm_hidden", c.lstm_hidden);
  put_int(f.attrs, "cfg_lstm_layers", c.lstm_layers);
  put_int(f.attrs, "cfg_lstm_seq_len", c.lstm_seq_len);
  put_int(f.attrs, "cfg_afno_patch", c.afno_patch);
  put_int(f.attrs, "cfg_afno_embed", c.afno_embed);
  put_int(f.attrs, "cfg_afno_blocks", c.afno_blocks);
  put_int(f.attrs, "cfg_afno_mlp_hidden", c.afno_mlp_hidden);
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", c.afno_lambda);
    f.attrs["cfg_afno_lambda"] = buf;
  }
  put_int(f.attrs, "cfg_field_height", c.field_height);
  put_int(f.attrs, "cfg_field_width", c.field_width);
  put_int(f.attrs, "cfg_unet_width", c.unet_width);
  put_int(f.attrs, "cfg_allow_padding", c.allow_padding ? 1 : 0);
  put_int(f.attrs, "pred_epoch_start", pred_stats.epoch_start);
  put_int(f.attrs, "pred_epoch_end", pred_stats.epoch_end);
  put_int(f.attrs, "targ_epoch_start", targ_stats.epoch_start);
  put_int(f.attrs, "targ_epoch_end", targ_stats.epoch_end);
  for (const auto& [name, t] : m.params) f.arrays["param/" + name] = t;
  f.arrays["norm/pred_mean"] = vec_to_tensor(pred_stats.mean);
  f.arrays["norm/pred_std"] = vec_to_tensor(pred_stats.std);
  f.arrays["norm/targ_mean"] = vec_to_tensor(targ_stats.mean);
  f.arrays["norm/targ_std"] = vec_to_tensor(targ_stats.std);
  f.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  ArrayFile f = ArrayFile::load(path);
  if (f.attrs.count("kind") == 0 || f.attrs.at("kind") != "checkpoint")
    throw validation_error("not a checkpoint file: " + path);
  Checkpoint ck;
  EmulatorModel& m = ck.model;
  m.arch = arch_from_name(f.attr("arch"));
  m.autoregressive = get_int(f, "autoregressive") != 0;
  m.delta = int(get_int(f, "delta"));
  m.window.delta_minus = int(get_int(f, "window_dm"));
  m.window.delta_plus = int(get_int(f, "window_dp"));
  m.in_channels = int(get_int(f, "in_channels"));
  ArchConfig& c = m.cfg;
  c.cnn_depth = int(get_int(f, "cfg_cnn_depth"));
  c.cnn_width = int(get_int(f, "cfg_cnn_width"));
  c.lstm_hidden = int(get_int(f, "cfg_lstm_hidden"));
  c.lstm_layers = int(get_int(f, "cfg_lstm_layers"));
  c.lstm_seq_len = int(get_int(f, "cfg_lstm_seq_len"));
  c.afno_patch = int(get_int(f, "cfg_afno_patch"));
  c.afno_embed = int(get_int(f, "cfg_afno_embed"));
  c.afno_blocks = int(get_int(f, "cfg_afno_blocks"));
  c.afno_mlp_hidden = int(get_int(f, "cfg_afno_mlp_hidden"));
  c.afno_lambda = std::stod(f.attr("cfg_afno_lambda"));
  c.field_height = int(get_int(f, "cfg_field_height"));
  c.field_width = int(get_int(f, "cfg_field_width"));
  c.unet_width = int(get_int(f, "cfg_unet_width"));
  c.allow_padding = get_int(f, "cfg_allow_padding") != 0;
  for (const auto& [name, t] : f.arrays) {
    if (name.rfind("param/", 0) == 0) m.params[name.substr(6)] = t;
  }
  ck.pred_stats.mean = tensor_to_vec(f.array("norm/pred_mean"));
  ck.pred_stats.std = tensor_to_vec(f.array("norm/pred_std"));
  ck.pred_stats.epoch_start = int(get_int(f, "pred_epoch_start"));
  ck.pred_stats.epoch_end = int(get_int(f, "pred_epoch_end"));
  ck.targ_stats.mean = tensor_to_vec(f.array("norm/targ_mean"));
  ck.targ_stats.std = tensor_to_vec(f.array("norm/targ_std"));
  ck.targ_stats.epoch_start = int(get_int(f, "targ_epoch_start"));
  ck.targ_stats.epoch_end = int(get_int(f, "targ_epoch_end"));
  return ck;
}

}  // namespace geoemu
