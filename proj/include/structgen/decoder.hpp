#pragma once

#include <optional>
#include <vector>

#include "structgen/autograd.hpp"
#include "structgen/encoder.hpp"
#include "structgen/model.hpp"
#include "structgen/vocab.hpp"

namespace structgen {

// g(s, v) = <tanh(P·v), tanh(Q·s)>
ad::Var relevance_score(ad::Var s, ad::Var v, ad::Var P, ad::Var Q);

// Projections of the encoder side that do not depend on the decoder state,
// computed once per table: rows tanh(W_p·h_i) and tanh(W_x·z_i).
struct AttentionMemory {
  ad::Var H;
  ad::Var word_keys;                 // [L x attn]
  std::optional<ad::Var> field_keys; // [L x attn], dual attention only
  std::size_t length = 0;
};

AttentionMemory prepare_attention(const BoundModel& m, const EncoderOutput& enc);

struct WordAttention {
  ad::Var alpha;    // [L]
  ad::Var context;  // Σ alpha_i h_i
};

// alpha = softmax_i g(s, h_i; W_p, W_q); context = Σ alpha_i h_i.
WordAttention word_attention(const BoundModel& m, ad::Var s, const AttentionMemory& memory);

// beta = softmax_i g(s, z_i; W_x, W_y).
ad::Var field_attention(const BoundModel& m, ad::Var s, const AttentionMemory& memory);

struct DualAttention {
  ad::Var gamma;    // alpha ⊙ beta renormalised
  ad::Var context;  // Σ gamma_i h_i
};

// Falls back to gamma = alpha when Σ alpha_j beta_j underflows to zero.
DualAttention dual_attention(ad::Var alpha, ad::Var beta, ad::Var H);

struct AttentionStep {
  ad::Var alpha;
  std::optional<ad::Var> beta;  // dual attention only
  ad::Var gamma;                // == alpha in word mode
  ad::Var context;
};

struct StepOutput {
  ad::Var logits;  // W_s·g_t, before softmax
  LstmState state;
  AttentionStep attention;
};

// Initial decoder state: the encoder's final (h, c), or zeros.
LstmState initial_decoder_state(const BoundModel& m, const EncoderOutput& enc);

// One decoder step:
//   s_t = LSTM(embed(w_prev), s_{t-1})
//   context from word or dual attention
//   g_t = tanh(W_t·[s_t; context])
//   logits = W_s·g_t
StepOutput decode_step(const BoundModel& m, WordId prev, const LstmState& state,
                       const AttentionMemory& memory);

// softmax(logits).
std::vector<double> step_distribution(const StepOutput& step);

}  // namespace structgen
