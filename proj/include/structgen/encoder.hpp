#pragma once

#include <span>
#include <vector>

#include "structgen/autograd.hpp"
#include "structgen/corpus.hpp"
#include "structgen/model.hpp"

namespace structgen {

struct LstmState {
  ad::Var h;
  ad::Var c;
};

// Standard LSTM step:
//   [i; f; o; c^] = [sigmoid; sigmoid; sigmoid; tanh](W·[x; h_prev] + b)
//   c = f ⊙ c_prev + i ⊙ c^
//   h = o ⊙ tanh(c)
LstmState lstm_cell(ad::Var x, ad::Var h_prev, ad::Var c_prev, const LstmWeights& w);

// LSTM step whose cell also receives the field embedding z through a gate:
//   [l; z^] = [sigmoid; tanh](W_d·z + b_d)
//   c' = f ⊙ c_prev + i ⊙ c^ + l ⊙ z^
//   h = o ⊙ tanh(c')
// With W_d and b_d all zero this is exactly lstm_cell.
LstmState field_gated_cell(ad::Var x, ad::Var z, ad::Var h_prev, ad::Var c_prev,
                           const LstmWeights& w, const FieldGateWeights& gate);

struct EncoderOutput {
  ad::Var H;                   // [L x hidden]
  std::optional<ad::Var> Z;    // [L x z_dim], present when the model has field embeddings
  std::vector<ad::Var> z_rows;
  LstmState final;
  std::size_t length = 0;
};

// Field embedding z = [field; pos+; pos-] of one table token.
ad::Var field_embedding(const BoundModel& m, const PositionedToken& token);

// Runs the configured encoder over the flattened table from h0 = c0 = 0.
// Throws std::invalid_argument on an empty table and IndexError on ids
// outside the vocabularies.
EncoderOutput encode_table(const BoundModel& m, std::span<const PositionedToken> tokens);

}  // namespace structgen
