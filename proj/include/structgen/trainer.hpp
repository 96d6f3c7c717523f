#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "structgen/autograd.hpp"
#include "structgen/corpus.hpp"
#include "structgen/model.hpp"

namespace structgen {

// Training hyperparameters. Defaults are the full-size biography setup
// (word 400, field 50, position 5, hidden 500, batch 32, Adam at 5e-4).
struct TrainConfig {
  std::size_t word_dim = 400;
  std::size_t field_dim = 50;
  std::size_t pos_dim = 5;
  std::size_t pos_cap = 30;
  std::size_t hidden = 500;
  std::size_t attn_dim = 0;
  std::string encoder_mode = "fieldgate";
  std::string attention = "dual";
  bool tie_embeddings = true;
  std::string decoder_init = "encoder";

  std::size_t batch_size = 32;
  double learning_rate = 0.0005;
  std::string optimizer = "adam";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;  // global norm; 0 disables
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  // Stop once an epoch's mean training loss falls below this (0 disables).
  double target_loss = 0.0;
  // Save last.ckpt every this many optimizer steps (0: only at epoch end).
  std::size_t checkpoint_every = 0;

  std::size_t word_limit = 20000;
  std::uint64_t field_min_count = 100;
  std::size_t max_decode_len = 60;
  std::size_t beam_size = 5;

  std::vector<std::string> validate() const;
  ModelConfig model_config(const Vocabularies& vocab) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Unknown keys and type errors are reported together as a ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base = {});
TrainConfig load_train_config(const std::string& path, const TrainConfig& base = {});

// Sum of per-token cross entropies for one table/description pair under
// teacher forcing, and the number of predicted tokens.
struct SequenceNll {
  ad::Var total;
  std::size_t tokens = 0;
};
SequenceNll example_nll(const BoundModel& m, std::span<const PositionedToken> table,
                        std::span<const WordId> decoder_input, std::span<const WordId> decoder_target);

// Mean cross entropy over the non-PAD target positions of the batch.
// Throws std::invalid_argument when every target is padding.
ad::Var sequence_loss(const Batch& batch, const BoundModel& m);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;  // aligned with ModelParams::names()
  std::vector<std::vector<double>> v;

  static AdamState for_params(const ModelParams& params);
};

// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
// Throws NumericError naming the first parameter with a non-finite gradient.
void adam_step(ModelParams& params, AdamState& state, double lr, const AdamHyper& hyper = {});

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ModelParams& params, double max_norm);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double train_loss = 0.0;
  std::optional<double> valid_loss;
};

struct TrainState {
  std::uint64_t step = 0;
  std::size_t epoch = 0;           // epoch in progress
  std::size_t batch_in_epoch = 0;  // next batch to run within `epoch`
  double epoch_loss_sum = 0.0;
  std::uint64_t epoch_tokens = 0;
  std::optional<double> best_loss;
};

struct TrainOptions {
  std::string out_dir;                      // empty: keep everything in memory
  std::optional<std::string> resume;        // checkpoint to continue from
  std::optional<std::uint64_t> stop_after_steps;  // simulate an interruption
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  Model model;
  Vocabularies vocab;
  AdamState adam;
  TrainState state;
  std::vector<EpochMetrics> metrics;
  bool interrupted = false;
  Model best_model;
};

// Mean per-token negative log-likelihood of `examples` (no gradients).
double evaluate_loss(const Model& model, const std::vector<Example>& examples, std::size_t batch_size);

// Maximum-likelihood training with Adam. Fully deterministic given the
// config seed. With out_dir set, writes last.ckpt, best.ckpt and
// metrics.jsonl there (plus timing.jsonl with wall-clock times).
TrainResult train(const TrainConfig& config, const Vocabularies& vocab,
                  const std::vector<Example>& train_set, const std::vector<Example>& valid_set,
                  const TrainOptions& options = {});

std::string metrics_line(const EpochMetrics& m);

}  // namespace structgen
