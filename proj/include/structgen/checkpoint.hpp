#pragma once

#include <string>

#include "structgen/corpus.hpp"
#include "structgen/model.hpp"
#include "structgen/trainer.hpp"

namespace structgen {

// Everything needed to resume training or to run inference.
struct Checkpoint {
  TrainConfig config;
  Vocabularies vocab;
  Model model;
  AdamState adam;
  TrainState state;
  std::string rng_state;
};

// Binary container: the 8-byte magic "SGCKPT01", a little-endian u64 header
// length, a JSON header (config, model shape, vocabularies, train state and a
// tensor directory), then each tensor's values as little-endian doubles in
// directory order. Identical inputs give identical bytes.
void save_checkpoint(const std::string& path, const TrainConfig& config, const Vocabularies& vocab,
                     const Model& model, const AdamState& adam, const TrainState& state,
                     const std::string& rng_state = {});

Checkpoint load_checkpoint(const std::string& path);

}  // namespace structgen
