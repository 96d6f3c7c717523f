#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "structgen/gradcheck.hpp"
#include "structgen/model.hpp"

namespace structgen {

// Sizes for the whole-model finite-difference check.
struct GradCheckDims {
  std::size_t vocab = 20;
  std::size_t field_vocab = 6;
  std::size_t word_dim = 6;
  std::size_t field_dim = 4;
  std::size_t pos_dim = 2;
  std::size_t pos_cap = 4;
  std::size_t hidden = 8;
  std::size_t table_len = 6;
  std::size_t decode_steps = 3;
};

// "tiny" or "small"; throws std::invalid_argument otherwise.
GradCheckDims gradcheck_dims(const std::string& name);

struct ModelGradCheck {
  std::string variant;
  ModelConfig config;
  GradCheckReport report;
};

// Random table, random target, parameters drawn from U(-0.5, 0.5) so every
// gate sits away from saturation. Covers each encoder mode with both
// attention kinds, plus untied embeddings and zero decoder init.
std::vector<ModelGradCheck> run_model_gradcheck(const GradCheckDims& dims, std::uint64_t seed,
                                                const GradCheckOptions& options = {});

}  // namespace structgen
