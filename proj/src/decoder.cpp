#include "structgen/decoder.hpp"

#include <string>

#include "structgen/errors.hpp"

namespace structgen {

ad::Var relevance_score(ad::Var s, ad::Var v, ad::Var P, ad::Var Q) {
  return ad::dot(ad::tanh(ad::matmul(P, v)), ad::tanh(ad::matmul(Q, s)));
}

AttentionMemory prepare_attention(const BoundModel& m, const EncoderOutput& enc) {
  AttentionMemory mem;
  mem.H = enc.H;
  mem.length = enc.length;
  mem.word_keys = ad::tanh(ad::matmul_nt(enc.H, m.att_p));
  if (m.config->attention == AttentionMode::kDual) {
    if (!enc.Z) throw std::invalid_argument("dual attention needs field embeddings");
    mem.field_keys = ad::tanh(ad::matmul_nt(*enc.Z, m.att_x));
  }
  return mem;
}

WordAttention word_attention(const BoundModel& m, ad::Var s, const AttentionMemory& memory) {
  ad::Var query = ad::tanh(ad::matmul(m.att_q, s));
  ad::Var alpha = ad::softmax(ad::matmul(memory.word_keys, query));
  return {alpha, ad::matmul(alpha, memory.H)};
}

ad::Var field_attention(const BoundModel& m, ad::Var s, const AttentionMemory& memory) {
  if (!memory.field_keys) throw std::invalid_argument("field_attention: memory has no field keys");
  ad::Var query = ad::tanh(ad::matmul(m.att_y, s));
  return ad::softmax(ad::matmul(*memory.field_keys, query));
}

DualAttention dual_attention(ad::Var alpha, ad::Var beta, ad::Var H) {
  if (alpha.shape() != beta.shape() || H.value().rank() != 2 || H.shape()[0] != alpha.size()) {
    throw ShapeError("dual_attention: alpha " + shape_to_string(alpha.shape()) + ", beta " +
                     shape_to_string(beta.shape()) + ", H " + shape_to_string(H.shape()));
  }
  ad::Var gamma = ad::normalized_product(alpha, beta);
  return {gamma, ad::matmul(gamma, H)};
}

LstmState initial_decoder_state(const BoundModel& m, const EncoderOutput& enc) {
  if (m.config->decoder_init == DecoderInit::kEncoderFinal) return enc.final;
  const std::size_t n = m.config->hidden;
  return {m.tape->constant(Tensor(Shape{n})), m.tape->constant(Tensor(Shape{n}))};
}

StepOutput decode_step(const BoundModel& m, WordId prev, const LstmState& state,
                       const AttentionMemory& memory) {
  const std::size_t vocab = m.decoder_word_emb.shape()[0];
  if (prev < 0 || static_cast<std::size_t>(prev) >= vocab) {
    throw IndexError("decode_step: token id " + std::to_string(prev) + " outside vocabulary of " +
                     std::to_string(vocab));
  }
  ad::Var x = ad::row(m.decoder_word_emb, static_cast<std::size_t>(prev));
  const LstmState next = lstm_cell(x, state.h, state.c, m.decoder);

  StepOutput out;
  out.state = next;
  const WordAttention word = word_attention(m, next.h, memory);
  out.attention.alpha = word.alpha;
  if (m.config->attention == AttentionMode::kDual) {
    ad::Var beta = field_attention(m, next.h, memory);
    const DualAttention dual = dual_attention(word.alpha, beta, memory.H);
    out.attention.beta = beta;
    out.attention.gamma = dual.gamma;
    out.attention.context = dual.context;
  } else {
    out.attention.gamma = word.alpha;
    out.attention.context = word.context;
  }

  ad::Var g = ad::tanh(ad::matmul(m.out_t, ad::concat({next.h, out.attention.context})));
  out.logits = ad::matmul(m.out_s, g);
  return out;
}

std::vector<double> step_distribution(const StepOutput& step) {
  return ad::softmax_values(step.logits.value().values());
}

}  // namespace structgen
