#include "ael/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ael/aggregation.hpp"
#include "ael/checkpoint.hpp"
#include "ael/errors.hpp"
#include "ael/evaluation.hpp"

namespace ael {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid training config: " + what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(corruption_prob >= 0.0 && corruption_prob <= 1.0)) fail("corruption_prob must be in [0,1]");
  if (!(l2_lambda >= 0.0)) fail("l2_lambda must be non-negative");
  if (!(w_importance >= 0.0) || !(w_load >= 0.0)) fail("balancing weights must be non-negative");
  if (k < 1 || k > kNumExperts) fail("k must be 1, 2 or 3");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) fail("validation_fraction must be in (0,1)");
  if (dims.large == 0 || dims.medium == 0 || dims.small == 0) fail("hidden dims must be positive");
}

Vector corrupt(std::span<const double> x, double q, Rng& rng) {
  Vector out(x.begin(), x.end());
  for (double& v : out) {
    if (v != 0.0 && rng.uniform() < q) v = 0.0;
  }
  return out;
}

double l2_regularizer(const AelModel& model, const GatingParams& gating, double lambda) {
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (auto b : model.blocks()) {
    for (double v : b) sum += v * v;
  }
  for (auto b : gating.blocks()) {
    for (double v : b) sum += v * v;
  }
  return 0.5 * lambda * sum;
}

void l2_regularizer_gradient(const AelModel& model, const GatingParams& gating, double lambda,
                             AelModel& model_grads, GatingParams& gate_grads) {
  if (lambda == 0.0) return;
  auto add = [lambda](auto params, auto grads) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size(); ++i) grads[b][i] += lambda * params[b][i];
    }
  };
  add(model.blocks(), model_grads.blocks());
  add(gating.blocks(), gate_grads.blocks());
}

AelModel make_model(std::size_t num_users, std::size_t num_items, const TrainConfig& cfg) {
  AelModel model(num_users, num_items, cfg.dims);
  Rng init = Rng(cfg.seed).split(0);
  model.initialize(init);
  return model;
}

namespace {

BatchOutputs run_batch(const AelModel& model, const GatingParams& gating, std::span<const UserIndex> batch,
                       const InteractionMatrix& train, const TrainConfig& cfg, Rng& rng,
                       AelModel* model_grads, GatingParams* gate_grads) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const std::size_t n_experts = gating.num_experts();
  const bool want_grads = model_grads && gate_grads;
  if (want_grads) {
    model_grads->set_zero();
    gate_grads->set_zero();
  }

  std::vector<Vector> corrupted;
  std::vector<GateDecision> decisions;
  corrupted.reserve(batch.size());
  decisions.reserve(batch.size());
  for (UserIndex u : batch) {
    corrupted.push_back(corrupt(train.dense_row(u), cfg.corruption_prob, rng));
    decisions.push_back(gate_forward(gating, corrupted.back(), &rng));
  }

  BatchOutputs out;
  out.importance = importance(decisions);
  const double cv_imp = coefficient_of_variation(out.importance);
  out.loss.importance = cfg.w_importance * cv_imp * cv_imp;
  const bool has_load = gating.k < n_experts;
  Vector load_sums;
  if (has_load) {
    load_sums = load(decisions, gating.k);
    const double cv_load = coefficient_of_variation(load_sums);
    out.loss.load = cfg.w_load * cv_load * cv_load;
  }

  Vector grad_importance(n_experts, 0.0), grad_load;
  if (want_grads) {
    if (cfg.w_importance != 0.0) {
      grad_importance = cv_squared_gradient(out.importance);
      for (double& g : grad_importance) g *= cfg.w_importance;
    }
    if (has_load && cfg.w_load != 0.0) {
      grad_load = cv_squared_gradient(load_sums);
      for (double& g : grad_load) g *= cfg.w_load;
    }
  }

  const double batch_n = static_cast<double>(batch.size());
  const double items = static_cast<double>(train.num_items());
  std::vector<ParentActivations> acts(n_experts);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const UserIndex u = batch[b];
    const Vector x = train.dense_row(u);
    const auto& d = decisions[b];
    Vector mixed(x.size(), 0.0);
    for (std::size_t e : d.selected) {
      acts[e] = parent_forward_cached(model, parent_at(e), u, corrupted[b]);
      const Vector& y = acts[e].output();
      for (std::size_t i = 0; i < y.size(); ++i) mixed[i] += d.weights[e] * y[i];
    }
    out.loss.reconstruction += mse(mixed, x) / batch_n;
    if (!want_grads) continue;

    Vector grad_mixed(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) grad_mixed[i] = 2.0 * (mixed[i] - x[i]) / (batch_n * items);
    Vector grad_weights(grad_importance);
    for (std::size_t e : d.selected) {
      const Vector& y = acts[e].output();
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += grad_mixed[i] * y[i];
      grad_weights[e] += dot;
      Vector grad_out(grad_mixed);
      for (double& g : grad_out) g *= d.weights[e];
      parent_backward(model, acts[e], u, corrupted[b], grad_out, *model_grads);
    }
    gate_backward(gating, corrupted[b], d, grad_weights, grad_load, *gate_grads);
  }

  out.loss.regularizer = l2_regularizer(model, gating, cfg.l2_lambda);
  if (want_grads) l2_regularizer_gradient(model, gating, cfg.l2_lambda, *model_grads, *gate_grads);
  out.loss.total = out.loss.reconstruction + out.loss.importance + out.loss.load + out.loss.regularizer;
  return out;
}

std::vector<std::size_t> block_sizes(const std::vector<std::span<double>>& blocks) {
  std::vector<std::size_t> sizes;
  for (auto b : blocks) sizes.push_back(b.size());
  return sizes;
}

std::vector<std::span<const double>> const_blocks(const std::vector<std::span<double>>& blocks) {
  return {blocks.begin(), blocks.end()};
}

bool finite(const LossComponents& l) {
  return std::isfinite(l.reconstruction) && std::isfinite(l.importance) && std::isfinite(l.load) &&
         std::isfinite(l.regularizer) && std::isfinite(l.total);
}

std::vector<UserIndex> active_users(const InteractionMatrix& m) {
  std::vector<UserIndex> users;
  for (UserIndex u = 0; u < m.num_users(); ++u) {
    if (!m.row(u).empty()) users.push_back(u);
  }
  return users;
}

double validation_recall(const AelModel& model, const GatingParams& gating, const SplitDataset& carve) {
  const std::size_t cutoffs[] = {5};
  return evaluate(gated_ranker(model, gating), carve, cutoffs).recall_at(5);
}

/// One level trained as a standalone autoencoder: reconstruct `target` from `input`.
double pretrain_level_step(const SubAEParams& level, UserIndex u, std::span<const double> input,
                           std::span<const double> target, double scale, SubAEParams& grads) {
  const Vector code = encode_level(level, u, input);
  const Vector recon = decode_level(level, code);
  const double loss = mse(recon, target);
  Vector g(recon.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = scale * 2.0 * (recon[i] - target[i]) / static_cast<double>(g.size()) * recon[i] * (1.0 - recon[i]);
  }
  Vector g_code(code.size(), 0.0);
  dense_backward_accumulate(level.decoder, code, g, grads.decoder.weight, grads.decoder.bias, g_code);
  for (std::size_t j = 0; j < code.size(); ++j) g_code[j] *= code[j] * (1.0 - code[j]);
  auto emb = grads.user_embedding.row(u);
  for (std::size_t j = 0; j < code.size(); ++j) emb[j] += g_code[j];
  dense_backward_accumulate(level.encoder, input, g_code, grads.encoder.weight, grads.encoder.bias, {});
  return loss;
}

}  // namespace

BatchOutputs batch_loss(const AelModel& model, const GatingParams& gating, std::span<const UserIndex> batch,
                        const InteractionMatrix& train, const TrainConfig& cfg, Rng& rng) {
  return run_batch(model, gating, batch, train, cfg, rng, nullptr, nullptr);
}

BatchOutputs batch_loss_gradients(const AelModel& model, const GatingParams& gating,
                                  std::span<const UserIndex> batch, const InteractionMatrix& train,
                                  const TrainConfig& cfg, Rng& rng, AelModel& model_grads,
                                  GatingParams& gate_grads) {
  return run_batch(model, gating, batch, train, cfg, rng, &model_grads, &gate_grads);
}

TrainReport pretrain_layerwise(AelModel& model, const InteractionMatrix& train, const TrainConfig& cfg) {
  TrainReport report;
  if (cfg.pretrain_epochs == 0) return report;
  const auto start = std::chrono::steady_clock::now();
  std::vector<UserIndex> users = active_users(train);
  Rng root = Rng(cfg.seed).split(3);

  for (std::size_t l = 0; l < kNumLevels; ++l) {
    auto params = model.level_blocks(l);
    OptimizerState state(AdamConfig{cfg.learning_rate}, block_sizes(params));
    AelModel grads = model.zeros_like();
    Rng order_rng = root.split(2 * l);
    Rng corrupt_rng = root.split(2 * l + 1);
    std::vector<double> epoch_losses;

    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
      order_rng.shuffle(std::span<UserIndex>(users));
      double epoch_loss = 0.0;
      std::size_t batches = 0;
      for (std::size_t start_idx = 0; start_idx < users.size(); start_idx += cfg.batch_size) {
        const std::size_t end = std::min(users.size(), start_idx + cfg.batch_size);
        const double scale = 1.0 / static_cast<double>(end - start_idx);
        grads.set_zero();
        double loss = 0.0;
        for (std::size_t b = start_idx; b < end; ++b) {
          const UserIndex u = users[b];
          Vector x = train.dense_row(u);
          if (l == 0) {
            const Vector noisy = corrupt(x, cfg.corruption_prob, corrupt_rng);
            loss += scale * pretrain_level_step(model.level(l), u, noisy, x, scale, grads.level(l));
          } else {
            // Frozen lower levels see the clean input.
            Vector code = std::move(x);
            for (std::size_t below = 0; below < l; ++below) code = encode_level(model.level(below), u, code);
            loss += scale * pretrain_level_step(model.level(l), u, code, code, scale, grads.level(l));
          }
        }
        double reg = 0.0;
        auto grad_blocks = grads.level_blocks(l);
        for (std::size_t b = 0; b < params.size(); ++b) {
          for (std::size_t i = 0; i < params[b].size(); ++i) {
            reg += params[b][i] * params[b][i];
            grad_blocks[b][i] += cfg.l2_lambda * params[b][i];
          }
        }
        loss += 0.5 * cfg.l2_lambda * reg;
        if (!std::isfinite(loss)) throw NumericError("pretraining: non-finite loss at level " + std::to_string(l));
        optimizer_step(state, params, const_blocks(grad_blocks));
        epoch_loss += loss;
        ++batches;
      }
      epoch_losses.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
    }
    report.pretrain_losses.push_back(std::move(epoch_losses));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

SplitDataset validation_carve(const InteractionMatrix& train, const TrainConfig& cfg) {
  return split_train_test(train, 1.0 - cfg.validation_fraction, cfg.validation_seed);
}

TrainReport train(AelModel& model, GatingParams& gating, const SplitDataset& split, const TrainConfig& cfg,
                  const std::filesystem::path& checkpoint) {
  cfg.validate();
  if (split.train.num_positives() == 0) throw DataError("train: empty training matrix");
  if (model.num_users() != split.train.num_users() || model.num_items() != split.train.num_items() ||
      gating.input_dim() != split.train.num_items()) {
    throw std::invalid_argument("train: model shape does not match the dataset");
  }
  const auto start = std::chrono::steady_clock::now();
  const SplitDataset carve = validation_carve(split.train, cfg);
  const InteractionMatrix& fit = carve.train;

  TrainReport report;
  if (cfg.pretrain_epochs > 0) report.pretrain_losses = pretrain_layerwise(model, fit, cfg).pretrain_losses;

  report.initial_val_recall_at_5 = validation_recall(model, gating, carve);
  report.best_val_recall_at_5 = report.initial_val_recall_at_5;
  AelModel best_model = model;
  GatingParams best_gating = gating;

  auto params = model.blocks();
  for (auto b : gating.blocks()) params.push_back(b);
  OptimizerState state(AdamConfig{cfg.learning_rate}, block_sizes(params));
  AelModel model_grads = model.zeros_like();
  GatingParams gate_grads = gating.zeros_like();
  auto grad_blocks = model_grads.blocks();
  for (auto b : gate_grads.blocks()) grad_blocks.push_back(b);
  const auto grads_view = const_blocks(grad_blocks);

  Rng root(cfg.seed);
  Rng order_rng = root.split(1);
  Rng noise_rng = root.split(2);
  std::vector<UserIndex> users = active_users(fit);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span<UserIndex>(users));
    EpochRecord rec;
    rec.epoch = epoch;
    Vector epoch_importance(gating.num_experts(), 0.0);
    std::size_t batches = 0;
    for (std::size_t s = 0; s < users.size(); s += cfg.batch_size) {
      const std::span<const UserIndex> batch(users.data() + s, std::min(cfg.batch_size, users.size() - s));
      const BatchOutputs out =
          batch_loss_gradients(model, gating, batch, fit, cfg, noise_rng, model_grads, gate_grads);
      if (!finite(out.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batches << " (recon "
            << out.loss.reconstruction << ", importance " << out.loss.importance << ", load " << out.loss.load
            << ", reg " << out.loss.regularizer << ")";
        throw NumericError(msg.str());
      }
      optimizer_step(state, params, grads_view);
      rec.loss.reconstruction += out.loss.reconstruction;
      rec.loss.importance += out.loss.importance;
      rec.loss.load += out.loss.load;
      rec.loss.regularizer += out.loss.regularizer;
      rec.loss.total += out.loss.total;
      for (std::size_t e = 0; e < epoch_importance.size(); ++e) epoch_importance[e] += out.importance[e];
      ++batches;
    }
    const double nb = static_cast<double>(std::max<std::size_t>(batches, 1));
    for (double* v : {&rec.loss.reconstruction, &rec.loss.importance, &rec.loss.load, &rec.loss.regularizer,
                      &rec.loss.total}) {
      *v /= nb;
    }
    double total_importance = 0.0;
    for (double v : epoch_importance) total_importance += v;
    for (std::size_t e = 0; e < kNumExperts; ++e) {
      rec.importance_share[e] = total_importance > 0.0 ? epoch_importance[e] / total_importance : 0.0;
    }
    rec.val_recall_at_5 = validation_recall(model, gating, carve);
    report.epochs.push_back(rec);

    if (rec.val_recall_at_5 > report.best_val_recall_at_5) {
      report.best_val_recall_at_5 = rec.val_recall_at_5;
      report.best_epoch = epoch;
      best_model = model;
      best_gating = gating;
      since_best = 0;
    } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
      break;
    }
  }

  model = std::move(best_model);
  gating = std::move(best_gating);
  if (!checkpoint.empty()) {
    save_checkpoint(checkpoint, model, &gating);
    report.checkpoint_path = checkpoint;
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_training_log(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write training log '" + path.string() + "'");
  out << "epoch,recon_loss,importance_loss,load_loss,reg,val_recall@5,importance_share_mild,"
         "importance_share_moderate,importance_share_strong\n";
  out << std::setprecision(10);
  for (const auto& r : report.epochs) {
    out << r.epoch << ',' << r.loss.reconstruction << ',' << r.loss.importance << ',' << r.loss.load << ','
        << r.loss.regularizer << ',' << r.val_recall_at_5 << ',' << r.importance_share[0] << ','
        << r.importance_share[1] << ',' << r.importance_share[2] << '\n';
  }
}

}  // namespace ael
