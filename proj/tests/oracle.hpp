#pragma once

// Plain-double re-implementation of the model forward pass, written
// directly from the cell and attention formulas with no tape involved.

#include <algorithm>
#include <cmath>
#include <vector>

#include "structgen/corpus.hpp"
#include "structgen/model.hpp"
#include "structgen/random.hpp"
#include "test_util.hpp"

namespace oracle {

using Vec = std::vector<double>;
using testutil::cat;
using testutil::matvec;
using testutil::sigm;

inline Vec row(const structgen::Tensor& m, std::size_t r) {
  Vec out(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) out[j] = m.at(r, j);
  return out;
}

inline Vec add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vec vtanh(Vec a) {
  for (double& v : a) v = std::tanh(v);
  return a;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec softmax(const Vec& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  Vec e(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (e[i] = std::exp(x[i] - mx));
  for (double& v : e) v /= z;
  return e;
}

struct State {
  Vec h, c;
};

// gates ordered i, f, o, c^
inline State lstm(const Vec& x, const State& prev, const structgen::Tensor& W, const structgen::Tensor& b,
                  const Vec* gate_add = nullptr) {
  const std::size_t n = prev.h.size();
  const Vec pre = add(matvec(W, cat(x, prev.h)), Vec(b.values().begin(), b.values().end()));
  State s{Vec(n), Vec(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const double i = sigm(pre[k]);
    const double f = sigm(pre[n + k]);
    const double o = sigm(pre[2 * n + k]);
    const double g = std::tanh(pre[3 * n + k]);
    s.c[k] = f * prev.c[k] + i * g + (gate_add ? (*gate_add)[k] : 0.0);
    s.h[k] = o * std::tanh(s.c[k]);
  }
  return s;
}

inline State gated_lstm(const Vec& x, const Vec& z, const State& prev, const structgen::Tensor& W,
                        const structgen::Tensor& b, const structgen::Tensor& Wd, const structgen::Tensor& bd) {
  const std::size_t n = prev.h.size();
  const Vec pre = add(matvec(Wd, z), Vec(bd.values().begin(), bd.values().end()));
  Vec extra(n);
  for (std::size_t k = 0; k < n; ++k) extra[k] = sigm(pre[k]) * std::tanh(pre[n + k]);
  return lstm(x, prev, W, b, &extra);
}

inline std::size_t pos_row(int p, std::size_t cap) {
  return static_cast<std::size_t>(std::min<int>(p, static_cast<int>(cap))) - 1;
}

struct Encoded {
  std::vector<Vec> H, Z;
  State final;
};

inline Vec z_of(const structgen::Model& m, const structgen::PositionedToken& t) {
  const auto& P = m.params;
  const std::size_t cap = m.config.pos_cap;
  return cat(cat(row(P.get(structgen::pname::kFieldEmb), static_cast<std::size_t>(t.field)),
                 row(P.get(structgen::pname::kPosBeginEmb), pos_row(t.pos_begin, cap))),
             row(P.get(structgen::pname::kPosEndEmb), pos_row(t.pos_end, cap)));
}

inline Encoded encode(const structgen::Model& m, const std::vector<structgen::PositionedToken>& table) {
  using namespace structgen;
  const auto& P = m.params;
  const auto& cfg = m.config;
  const std::size_t n = cfg.hidden;
  Encoded out;
  State s{Vec(n, 0.0), Vec(n, 0.0)};
  for (const auto& t : table) {
    const Vec w = row(P.get(pname::kWordEmb), static_cast<std::size_t>(t.word));
    Vec z;
    if (cfg.needs_field_embeddings()) {
      z = z_of(m, t);
      out.Z.push_back(z);
    }
    Vec x = w;
    if (concatenates_position(cfg.encoder_mode)) {
      x = cat(w, z);
    } else if (concatenates_field(cfg.encoder_mode)) {
      x = cat(w, Vec(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(cfg.field_dim)));
    }
    s = uses_field_gate(cfg.encoder_mode)
            ? gated_lstm(x, z, s, P.get(pname::kEncW), P.get(pname::kEncB), P.get(pname::kGateW), P.get(pname::kGateB))
            : lstm(x, s, P.get(pname::kEncW), P.get(pname::kEncB));
    out.H.push_back(s.h);
  }
  out.final = s;
  return out;
}

inline double score(const Vec& s, const Vec& v, const structgen::Tensor& P, const structgen::Tensor& Q) {
  return dot(vtanh(matvec(P, v)), vtanh(matvec(Q, s)));
}

struct Step {
  Vec probs;
  State state;
  Vec alpha, beta, gamma;
};

inline Step decode(const structgen::Model& m, const Encoded& enc, structgen::WordId prev, const State& st) {
  using namespace structgen;
  const auto& P = m.params;
  const auto& cfg = m.config;
  const auto& emb = cfg.tie_embeddings ? P.get(pname::kWordEmb) : P.get(pname::kDecWordEmb);
  Step out;
  out.state = lstm(row(emb, static_cast<std::size_t>(prev)), st, P.get(pname::kDecW), P.get(pname::kDecB));
  const Vec& s = out.state.h;
  const std::size_t L = enc.H.size();
  Vec sc(L);
  for (std::size_t i = 0; i < L; ++i) sc[i] = score(s, enc.H[i], P.get(pname::kAttP), P.get(pname::kAttQ));
  out.alpha = softmax(sc);
  out.gamma = out.alpha;
  if (cfg.attention == AttentionMode::kDual) {
    for (std::size_t i = 0; i < L; ++i) sc[i] = score(s, enc.Z[i], P.get(pname::kAttX), P.get(pname::kAttY));
    out.beta = softmax(sc);
    double z = 0.0;
    for (std::size_t i = 0; i < L; ++i) z += out.alpha[i] * out.beta[i];
    for (std::size_t i = 0; i < L; ++i) out.gamma[i] = out.alpha[i] * out.beta[i] / z;
  }
  Vec ctx(cfg.hidden, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t k = 0; k < cfg.hidden; ++k) ctx[k] += out.gamma[i] * enc.H[i][k];
  }
  const Vec g = vtanh(matvec(P.get(pname::kOutT), cat(s, ctx)));
  out.probs = softmax(matvec(P.get(pname::kOutS), g));
  return out;
}

inline State initial(const structgen::Model& m, const Encoded& enc) {
  if (m.config.decoder_init == structgen::DecoderInit::kZero) {
    return {Vec(m.config.hidden, 0.0), Vec(m.config.hidden, 0.0)};
  }
  return enc.final;
}

// Model with every parameter drawn from U(-r, r), so tests are not tied to
// the library's initialiser.
inline structgen::Model random_model(const structgen::ModelConfig& cfg, std::uint64_t seed, double r = 0.5) {
  structgen::Model m = structgen::Model::initialize(cfg, seed);
  structgen::Rng rng(seed ^ 0x5eedULL);
  for (const auto& name : m.params.names()) {
    for (double& v : m.params.get(name).values()) v = rng.uniform(-r, r);
  }
  return m;
}

inline std::vector<structgen::PositionedToken> random_table(std::size_t L, const structgen::ModelConfig& cfg,
                                                            structgen::Rng& rng) {
  std::vector<structgen::PositionedToken> t(L);
  for (auto& tok : t) {
    tok.word = static_cast<structgen::WordId>(rng.uniform_index(cfg.word_vocab));
    tok.field = static_cast<structgen::FieldId>(rng.uniform_index(std::max<std::size_t>(cfg.field_vocab, 1)));
    tok.pos_begin = 1 + static_cast<int>(rng.uniform_index(cfg.pos_cap + 3));
    tok.pos_end = 1 + static_cast<int>(rng.uniform_index(cfg.pos_cap + 3));
  }
  return t;
}

inline structgen::ModelConfig tiny_config(structgen::EncoderMode enc = structgen::EncoderMode::kFieldGate,
                                          structgen::AttentionMode att = structgen::AttentionMode::kDual) {
  structgen::ModelConfig c;
  c.word_vocab = 12;
  c.field_vocab = 5;
  c.word_dim = 6;
  c.field_dim = 4;
  c.pos_dim = 2;
  c.pos_cap = 4;
  c.hidden = 8;
  c.encoder_mode = enc;
  c.attention = att;
  return c;
}

}  // namespace oracle
