#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoemu/grid.hpp"
#include "geoemu/models.hpp"
#include "geoemu/preprocess.hpp"

namespace geoemu {

enum class Optimizer { adam, sgd_momentum };

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  int batch_size = 4;
  int max_epochs = 100;
  int early_stop_patience = 20;
  int rollout_k = 1;
  double grad_clip = 1.0;  // global norm; <= 0 disables
  uint64_t seed = 0;
  int threads = 0;  // 0 = GEOEMU_THREADS env or 1

  void validate() const;
};

struct EpochRecord {
  double train_loss = 0;
  double val_loss = 0;
  double wall_seconds = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // argmin validation loss
};

struct MaskedLossResult {
  double loss = 0;
  int64_t n_cells = 0;
};

// Mean squared error over cells where mask != 0. Shapes must match.
MaskedLossResult masked_loss(const Tensor& pred, const Tensor& target,
                             const Tensor& mask);

// Input assembly shared by training and forecasting. Static input is the
// predictor window; AR input appends the previous-state channel last.
Tensor static_input(const Preprocessed& p, int t, const WindowSpec& w);
Tensor ar_input(const Preprocessed& p, int t, const WindowSpec& w,
                const Tensor& state);
// Loss/metric mask for target step t: valid_mask AND obs_mask(t), as [1,L,W].
Tensor sample_mask(const GridSpec& grid, const Preprocessed& p, int t);
// Target field for step t as [1,L,W] (normalized space).
Tensor sample_target(const Preprocessed& p, int t);

TrainHistory train_static(EmulatorModel& model, const GridSpec& grid,
                          const Preprocessed& p, const SplitResult& splits,
                          const TrainConfig& cfg);

TrainHistory train_autoregressive(EmulatorModel& model, const GridSpec& grid,
                                  const Preprocessed& p, const SplitResult& splits,
                                  const TrainConfig& cfg);

void export_history_csv(const std::string& path, const TrainHistory& h);

int resolve_threads(int requested);

}  // namespace geoemu
