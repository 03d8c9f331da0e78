#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ael/dataset.hpp"
#include "ael/gating.hpp"
#include "ael/model.hpp"
#include "ael/numerics.hpp"

namespace ael {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 200;
  double corruption_prob = 0.3;
  double l2_lambda = 1e-5;
  double w_importance = 1e-2;
  double w_load = 1e-2;
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t pretrain_epochs = 0;
  std::size_t early_stop_patience = 10;
  /// Per-user share of the train rows held out for early stopping.
  double validation_fraction = 0.1;
  /// Seeds the validation carve-out; independent of `seed` so repeated runs share it.
  std::uint64_t validation_seed = 17;
  HiddenDims dims;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct LossComponents {
  double reconstruction = 0.0;
  double importance = 0.0;
  double load = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossComponents loss;  // means over the epoch's batches
  double val_recall_at_5 = 0.0;
  std::array<double, kNumExperts> importance_share{};
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  /// Per pretraining stage (Large, Medium, Small), the mean loss of each epoch.
  std::vector<std::vector<double>> pretrain_losses;
  double initial_val_recall_at_5 = 0.0;
  double best_val_recall_at_5 = 0.0;
  std::size_t best_epoch = 0;  // 0 means the untrained parameters were best
  double wall_seconds = 0.0;
  std::filesystem::path checkpoint_path;
};

/// Mask-out corruption: each positive is zeroed with probability q, zeros stay zero,
/// survivors are not rescaled.
Vector corrupt(std::span<const double> x, double q, Rng& rng);

/// (λ/2) · sum of squares over every model and gate parameter.
double l2_regularizer(const AelModel& model, const GatingParams& gating, double lambda);

/// Adds the regularizer's gradient λ·θ.
void l2_regularizer_gradient(const AelModel& model, const GatingParams& gating, double lambda,
                             AelModel& model_grads, GatingParams& gate_grads);

/// Model and gate initialized from cfg.seed (gate matrices zero).
AelModel make_model(std::size_t num_users, std::size_t num_items, const TrainConfig& cfg);

struct BatchOutputs {
  LossComponents loss;
  Vector importance;  // per-expert gate-weight sums over the batch
};

/// Joint objective on one batch: corrupt each user's row, gate on the corrupted vector
/// with noise, mix the selected parents, and score against the clean row. Draws from
/// `rng` in a fixed order so a copy of the generator replays the same batch.
BatchOutputs batch_loss(const AelModel& model, const GatingParams& gating, std::span<const UserIndex> batch,
                        const InteractionMatrix& train, const TrainConfig& cfg, Rng& rng);

/// batch_loss plus gradients. The gradient buffers are overwritten.
BatchOutputs batch_loss_gradients(const AelModel& model, const GatingParams& gating,
                                  std::span<const UserIndex> batch, const InteractionMatrix& train,
                                  const TrainConfig& cfg, Rng& rng, AelModel& model_grads,
                                  GatingParams& gate_grads);

/// Greedy stage-wise pretraining of Large, then Medium (Large frozen), then Small, each
/// for cfg.pretrain_epochs. No-op when pretrain_epochs is 0.
TrainReport pretrain_layerwise(AelModel& model, const InteractionMatrix& train, const TrainConfig& cfg);

/// Splits the train rows into a fit part and a validation part.
SplitDataset validation_carve(const InteractionMatrix& train, const TrainConfig& cfg);

/// Full training run. Model and gate are left at the parameters with the best validation
/// Recall@5 (the initial parameters count as epoch 0). Throws NumericError on a
/// non-finite loss. When `checkpoint` is non-empty the best parameters are saved there.
TrainReport train(AelModel& model, GatingParams& gating, const SplitDataset& split, const TrainConfig& cfg,
                  const std::filesystem::path& checkpoint = {});

/// CSV with header
/// epoch,recon_loss,importance_loss,load_loss,reg,val_recall@5,importance_share_mild,importance_share_moderate,importance_share_strong
void write_training_log(const std::filesystem::path& path, const TrainReport& report);

}  // namespace ael
