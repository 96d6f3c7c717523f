#include "structgen/encoder.hpp"

#include <algorithm>
#include <string>

#include "structgen/errors.hpp"

namespace structgen {

namespace {

struct Gates {
  ad::Var i, f, o, candidate;
};

Gates lstm_gates(ad::Var x, ad::Var h_prev, const LstmWeights& w) {
  const Shape& ws = w.W.shape();
  const std::size_t n = h_prev.size();
  if (ws.size() != 2 || ws[0] != 4 * n || ws[1] != x.size() + n || w.b.size() != 4 * n) {
    throw ShapeError("lstm_cell: weights " + shape_to_string(ws) + " / bias " +
                     shape_to_string(w.b.shape()) + " do not fit input " + shape_to_string(x.shape()) +
                     " and state " + shape_to_string(h_prev.shape()));
  }
  ad::Var pre = ad::add(ad::matmul(w.W, ad::concat({x, h_prev})), w.b);
  ad::Var act = ad::sigmoid(ad::slice(pre, 0, 3 * n));
  return {ad::slice(act, 0, n), ad::slice(act, n, n), ad::slice(act, 2 * n, n),
          ad::tanh(ad::slice(pre, 3 * n, n))};
}

void check_state(ad::Var h_prev, ad::Var c_prev) {
  if (h_prev.shape() != c_prev.shape() || h_prev.value().rank() != 1) {
    throw ShapeError("lstm state shapes " + shape_to_string(h_prev.shape()) + " and " +
                     shape_to_string(c_prev.shape()) + " differ");
  }
}

std::size_t checked_index(int id, std::size_t rows, const char* what) {
  if (id < 0 || static_cast<std::size_t>(id) >= rows) {
    throw IndexError(std::string(what) + " id " + std::to_string(id) + " outside [0, " +
                     std::to_string(rows) + ")");
  }
  return static_cast<std::size_t>(id);
}

// Positions are 1-based and already capped; row p-1 of the position table.
std::size_t position_row(int pos, std::size_t cap) {
  const int clamped = std::clamp(pos, 1, static_cast<int>(cap));
  return static_cast<std::size_t>(clamped - 1);
}

}  // namespace

LstmState lstm_cell(ad::Var x, ad::Var h_prev, ad::Var c_prev, const LstmWeights& w) {
  check_state(h_prev, c_prev);
  const Gates g = lstm_gates(x, h_prev, w);
  ad::Var c = ad::add(ad::mul(g.f, c_prev), ad::mul(g.i, g.candidate));
  ad::Var h = ad::mul(g.o, ad::tanh(c));
  return {h, c};
}

LstmState field_gated_cell(ad::Var x, ad::Var z, ad::Var h_prev, ad::Var c_prev,
                           const LstmWeights& w, const FieldGateWeights& gate) {
  check_state(h_prev, c_prev);
  const std::size_t n = h_prev.size();
  const Shape& gs = gate.W.shape();
  if (gs.size() != 2 || gs[0] != 2 * n || gs[1] != z.size() || gate.b.size() != 2 * n) {
    throw ShapeError("field_gated_cell: gate weights " + shape_to_string(gs) + " do not fit z " +
                     shape_to_string(z.shape()) + " and hidden " + std::to_string(n));
  }
  const Gates g = lstm_gates(x, h_prev, w);
  ad::Var field_pre = ad::add(ad::matmul(gate.W, z), gate.b);
  ad::Var l = ad::sigmoid(ad::slice(field_pre, 0, n));
  ad::Var z_hat = ad::tanh(ad::slice(field_pre, n, n));
  ad::Var c = ad::add(ad::mul(g.f, c_prev), ad::mul(g.i, g.candidate));
  ad::Var c_field = ad::add(c, ad::mul(l, z_hat));
  ad::Var h = ad::mul(g.o, ad::tanh(c_field));
  return {h, c_field};
}

ad::Var field_embedding(const BoundModel& m, const PositionedToken& token) {
  const std::size_t cap = m.pos_begin_emb.shape()[0];
  const std::size_t f = checked_index(token.field, m.field_emb.shape()[0], "field");
  return ad::concat({ad::row(m.field_emb, f), ad::row(m.pos_begin_emb, position_row(token.pos_begin, cap)),
                     ad::row(m.pos_end_emb, position_row(token.pos_end, cap))});
}

EncoderOutput encode_table(const BoundModel& m, std::span<const PositionedToken> tokens) {
  if (tokens.empty()) throw std::invalid_argument("encode_table: empty table");
  const ModelConfig& cfg = *m.config;
  const EncoderMode mode = cfg.encoder_mode;
  ad::Tape& tape = *m.tape;
  const std::size_t n = cfg.hidden;
  const std::size_t vocab = m.word_emb.shape()[0];

  EncoderOutput out;
  out.length = tokens.size();
  LstmState state{tape.constant(Tensor(Shape{n})), tape.constant(Tensor(Shape{n}))};
  std::vector<ad::Var> h_rows;
  h_rows.reserve(tokens.size());

  for (const PositionedToken& tok : tokens) {
    ad::Var word = ad::row(m.word_emb, checked_index(tok.word, vocab, "word"));
    std::optional<ad::Var> z;
    if (m.has_field_embeddings()) {
      z = field_embedding(m, tok);
      out.z_rows.push_back(*z);
    }

    ad::Var x = word;
    if (concatenates_position(mode)) {
      x = ad::concat({word, *z});
    } else if (concatenates_field(mode)) {
      x = ad::concat({word, ad::slice(*z, 0, cfg.field_dim)});
    }

    if (uses_field_gate(mode)) {
      state = field_gated_cell(x, *z, state.h, state.c, m.encoder, *m.field_gate);
    } else {
      state = lstm_cell(x, state.h, state.c, m.encoder);
    }
    h_rows.push_back(state.h);
  }

  out.H = ad::stack_rows(h_rows);
  if (!out.z_rows.empty()) out.Z = ad::stack_rows(out.z_rows);
  out.final = state;
  return out;
}

}  // namespace structgen
