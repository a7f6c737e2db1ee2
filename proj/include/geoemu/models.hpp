#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "geoemu/autodiff.hpp"
#include "geoemu/preprocess.hpp"
#include "geoemu/tensor.hpp"

namespace geoemu {

enum class Arch { CNN, ConvLSTM, AFNO, UNet };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);

// One flat config struct for all four architectures; only the fields of the
// selected arch matter. field_height/field_width size the AFNO token grid
// (positional encodings are grid-specific).
struct ArchConfig {
  int cnn_depth = 5;
  int cnn_width = 56;

  int lstm_hidden = 16;
  int lstm_layers = 3;
  int lstm_seq_len = 3;

  int afno_patch = 8;
  int afno_embed = 64;
  int afno_blocks = 4;
  int afno_mlp_hidden = 128;
  double afno_lambda = 0.01;
  int field_height = 0;  // L, required for AFNO
  int field_width = 0;   // W, required for AFNO

  int unet_width = 16;

  // Pad indivisible grids internally (UNet/AFNO) instead of erroring; the
  // output is cropped back to the input size.
  bool allow_padding = false;
};

using ParamVars = std::map<std::string, ad::Var>;

// Auto-regressive roll-outs clip the fed-back state to this many standard
// deviations. The gated blocks are super-linear in input scale, so an
// unbounded self-feeding loop can diverge from a single out-of-range cell;
// the bound sits far outside physical values, leaving normal operation
// untouched.
inline constexpr double kStateClip = 6.0;

class EmulatorModel {
 public:
  Arch arch = Arch::CNN;
  bool autoregressive = false;
  int delta = 1;
  WindowSpec window;
  int in_channels = 8;  // C * window size, +1 in auto-regressive mode
  ArchConfig cfg;
  std::map<std::string, Tensor> params;  // ordered: deterministic init/update

  // He fan-in init for conv weights, zeros for biases, identity for the
  // AFNO frequency weights. Deterministic under seed.
  void init_params(uint64_t seed);

  // Builds the forward graph for one input field [in_channels, L, W].
  ad::Var forward(ad::Graph& g, const ParamVars& pv, ad::Var input) const;

  // Convenience: single forward without gradients.
  Tensor forward_eval(const Tensor& input) const;

  ParamVars lift_params(ad::Graph& g, bool requires_grad) const;

  int64_t count_parameters(std::map<std::string, int64_t>* groups = nullptr) const;

  bool params_finite() const;
};

EmulatorModel build_cnn(int in_channels, const ArchConfig& cfg);
EmulatorModel build_convlstm(int in_channels, const ArchConfig& cfg);
EmulatorModel build_afno(int in_channels, const ArchConfig& cfg);
EmulatorModel build_unet(int in_channels, const ArchConfig& cfg);
EmulatorModel build_model(Arch arch, int in_channels, const ArchConfig& cfg);

// Checkpoint: architecture tag, config, parameters, normalization stats,
// window spec and AR flag. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const EmulatorModel& model,
                     const NormStats& pred_stats, const NormStats& targ_stats);
struct Checkpoint {
  EmulatorModel model;
  NormStats pred_stats;
  NormStats targ_stats;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace geoemu
