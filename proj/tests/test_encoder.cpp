#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "structgen/encoder.hpp"
#include "structgen/errors.hpp"
#include "structgen/gradcheck.hpp"
#include "test_util.hpp"

using namespace structgen;
using testutil::random_tensor;
using testutil::random_vector;

namespace {

std::vector<double> vals(ad::Var v) { return {v.value().values().begin(), v.value().values().end()}; }

struct Cell {
  Tensor W, b, Wd, bd;
};

Cell random_cell(std::size_t in, std::size_t n, std::size_t z, Rng& rng) {
  return {random_tensor({4 * n, in + n}, rng), random_tensor({4 * n}, rng), random_tensor({2 * n, z}, rng),
          random_tensor({2 * n}, rng)};
}

}  // namespace

TEST(LstmCell, MatchesFormulaOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 5, n = 8;
    Cell cell = random_cell(in, n, 6, rng);
    const auto x = random_vector(in, rng), h = random_vector(n, rng), c = random_vector(n, rng, -2, 2);
    ad::Tape tape;
    const auto out = lstm_cell(tape.constant(Tensor::vector(x)), tape.constant(Tensor::vector(h)),
                               tape.constant(Tensor::vector(c)), {tape.frozen(cell.W), tape.frozen(cell.b)});
    const auto ref = oracle::lstm(x, {h, c}, cell.W, cell.b);
    EXPECT_LT(testutil::max_abs_diff(vals(out.h), ref.h), 1e-12);
    EXPECT_LT(testutil::max_abs_diff(vals(out.c), ref.c), 1e-12);
  }
}

TEST(LstmCell, ZeroWeightsGiveZeroState) {
  const std::size_t in = 3, n = 4;
  Tensor W(Shape{4 * n, in + n}), b(Shape{4 * n});
  ad::Tape tape;
  const auto out = lstm_cell(tape.constant(Tensor::vector({1, -2, 3})), tape.constant(Tensor::vector({.1, .2, .3, .4})),
                             tape.constant(Tensor(Shape{n})), {tape.frozen(W), tape.frozen(b)});
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_EQ(out.h[k], 0.0);
    EXPECT_EQ(out.c[k], 0.0);
  }
}

TEST(LstmCell, SaturatedGatesKeepCell) {
  const std::size_t in = 2, n = 3;
  Tensor W(Shape{4 * n, in + n}), b(Shape{4 * n});
  for (std::size_t k = 0; k < n; ++k) {
    b[k] = -100.0;     // input gate closed
    b[n + k] = 100.0;  // forget gate open
  }
  const std::vector<double> c_prev{0.7, -1.3, 2.0};
  ad::Tape tape;
  const auto out = lstm_cell(tape.constant(Tensor::vector({5, -5})), tape.constant(Tensor::vector({1, 1, 1})),
                             tape.constant(Tensor::vector(c_prev)), {tape.frozen(W), tape.frozen(b)});
  for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(out.c[k], c_prev[k], 1e-30);
}

TEST(LstmCell, ShapeMismatchThrows) {
  Tensor W(Shape{16, 7}), b(Shape{16});
  ad::Tape tape;
  EXPECT_THROW(lstm_cell(tape.constant(Tensor(Shape{4})), tape.constant(Tensor(Shape{4})),
                         tape.constant(Tensor(Shape{4})), {tape.frozen(W), tape.frozen(b)}),
               ShapeError);
}

TEST(FieldGatedCell, MatchesFormulaOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 5, n = 8, zd = 6;
    Cell cell = random_cell(in, n, zd, rng);
    const auto x = random_vector(in, rng), z = random_vector(zd, rng), h = random_vector(n, rng),
               c = random_vector(n, rng);
    ad::Tape tape;
    const auto out = field_gated_cell(tape.constant(Tensor::vector(x)), tape.constant(Tensor::vector(z)),
                                      tape.constant(Tensor::vector(h)), tape.constant(Tensor::vector(c)),
                                      {tape.frozen(cell.W), tape.frozen(cell.b)},
                                      {tape.frozen(cell.Wd), tape.frozen(cell.bd)});
    const auto ref = oracle::gated_lstm(x, z, {h, c}, cell.W, cell.b, cell.Wd, cell.bd);
    EXPECT_LT(testutil::max_abs_diff(vals(out.h), ref.h), 1e-12);
    EXPECT_LT(testutil::max_abs_diff(vals(out.c), ref.c), 1e-12);
  }
}

// Zero gate weights, or a zero field vector with zero bias, reduce the
// gated cell to the plain one bit for bit.
TEST(FieldGatedCell, ReducesToLstmCellExactly) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = 1 + rng.uniform_index(6), n = 1 + rng.uniform_index(9), zd = 1 + rng.uniform_index(7);
    Cell cell = random_cell(in, n, zd, rng);
    const auto x = random_vector(in, rng), h = random_vector(n, rng), c = random_vector(n, rng);
    auto z = random_vector(zd, rng);
    Tensor Wd = cell.Wd;
    Tensor bd(Shape{2 * n});
    if (trial % 2 == 0) {
      Wd = Tensor(Shape{2 * n, zd});
    } else {
      std::fill(z.begin(), z.end(), 0.0);
    }
    ad::Tape tape;
    const auto X = tape.constant(Tensor::vector(x)), H = tape.constant(Tensor::vector(h)),
               C = tape.constant(Tensor::vector(c));
    const LstmWeights w{tape.frozen(cell.W), tape.frozen(cell.b)};
    const auto plain = lstm_cell(X, H, C, w);
    const auto gated = field_gated_cell(X, tape.constant(Tensor::vector(z)), H, C, w, {tape.frozen(Wd), tape.frozen(bd)});
    for (std::size_t k = 0; k < n; ++k) {
      ASSERT_EQ(plain.h[k], gated.h[k]);
      ASSERT_EQ(plain.c[k], gated.c[k]);
    }
  }
}

TEST(FieldGatedCell, GateGradientMatchesFiniteDifferences) {
  Rng rng(4);
  const std::size_t in = 4, n = 8, zd = 6;
  Cell cell = random_cell(in, n, zd, rng);
  const Tensor x = random_tensor({in}, rng), z = random_tensor({zd}, rng), h = random_tensor({n}, rng),
               c = random_tensor({n}, rng);
  const auto report = grad_check(
      [&](ad::Tape& t) {
        auto leaf = [&](Tensor& p) { return t.records_grad() ? t.param(p) : t.frozen(p); };
        const auto s = field_gated_cell(t.constant(x), t.constant(z), t.constant(h), t.constant(c),
                                        {leaf(cell.W), leaf(cell.b)}, {leaf(cell.Wd), leaf(cell.bd)});
        return ad::add(ad::sum(ad::mul(s.h, s.h)), ad::sum(s.c));
      },
      {{"W_d", &cell.Wd}, {"b_d", &cell.bd}, {"W_c", &cell.W}, {"b_c", &cell.b}});
  EXPECT_TRUE(report.passed()) << report.max_rel_error;
  EXPECT_LT(report.max_rel_error, 1e-4);
}

// ---- whole encoder ----------------------------------------------------------

TEST(EncodeTable, MatchesUnrolledOracleInEveryMode) {
  for (auto mode : {EncoderMode::kWordOnly, EncoderMode::kConcatField, EncoderMode::kConcatFieldPos,
                    EncoderMode::kFieldGate, EncoderMode::kFieldGateConcat}) {
    const auto cfg = oracle::tiny_config(mode, AttentionMode::kWord);
    const Model m = oracle::random_model(cfg, 5);
    Rng rng(6);
    const auto table = oracle::random_table(5, cfg, rng);
    ad::Tape tape(ad::Tape::Mode::kNoGrad);
    const auto bm = bind(m, tape);
    const auto enc = encode_table(bm, table);
    const auto ref = oracle::encode(m, table);
    ASSERT_EQ(enc.length, 5u);
    ASSERT_EQ(enc.H.shape(), (Shape{5, cfg.hidden}));
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t k = 0; k < cfg.hidden; ++k) {
        EXPECT_NEAR(enc.H.value().at(t, k), ref.H[t][k], 1e-12) << to_string(mode);
      }
    }
    EXPECT_LT(testutil::max_abs_diff(vals(enc.final.c), ref.final.c), 1e-12);
    if (cfg.needs_field_embeddings()) {
      ASSERT_TRUE(enc.Z.has_value());
      for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(vals(enc.z_rows[t]), ref.Z[t]);
    }
  }
}

TEST(EncodeTable, LengthOneIsOneCell) {
  const auto cfg = oracle::tiny_config();
  const Model m = oracle::random_model(cfg, 7);
  const std::vector<PositionedToken> table{{4, 2, 1, 1}};
  ad::Tape tape(ad::Tape::Mode::kNoGrad);
  const auto enc = encode_table(bind(m, tape), table);
  const auto& P = m.params;
  const auto s = oracle::gated_lstm(oracle::row(P.get(pname::kWordEmb), 4), oracle::z_of(m, table[0]),
                                    {oracle::Vec(8, 0.0), oracle::Vec(8, 0.0)}, P.get(pname::kEncW),
                                    P.get(pname::kEncB), P.get(pname::kGateW), P.get(pname::kGateB));
  EXPECT_EQ(enc.H.shape(), (Shape{1, 8}));
  EXPECT_LT(testutil::max_abs_diff(enc.H.value().values(), s.h), 1e-12);
}

TEST(EncodeTable, FieldGateWithZeroGateEqualsWordOnly) {
  const auto gated_cfg = oracle::tiny_config(EncoderMode::kFieldGate, AttentionMode::kWord);
  auto word_cfg = gated_cfg;
  word_cfg.encoder_mode = EncoderMode::kWordOnly;
  Model gated = oracle::random_model(gated_cfg, 8);
  Model word = Model::initialize(word_cfg, 8);
  for (const auto& name : word.params.names()) word.params.get(name) = gated.params.get(name);
  for (double& v : gated.params.get(pname::kGateW).values()) v = 0.0;
  for (double& v : gated.params.get(pname::kGateB).values()) v = 0.0;
  Rng rng(9);
  const auto table = oracle::random_table(6, gated_cfg, rng);
  ad::Tape t1(ad::Tape::Mode::kNoGrad), t2(ad::Tape::Mode::kNoGrad);
  const auto a = encode_table(bind(gated, t1), table);
  const auto b = encode_table(bind(word, t2), table);
  for (std::size_t i = 0; i < a.H.size(); ++i) ASSERT_EQ(a.H[i], b.H[i]);
}

TEST(EncodeTable, HiddenStatesBounded) {
  const auto cfg = oracle::tiny_config();
  const Model m = oracle::random_model(cfg, 10, 3.0);
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto table = oracle::random_table(1 + rng.uniform_index(12), cfg, rng);
    ad::Tape tape(ad::Tape::Mode::kNoGrad);
    const auto enc = encode_table(bind(m, tape), table);
    for (double v : enc.H.value().values()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(EncodeTable, EmptyAndBadIdsThrow) {
  const auto cfg = oracle::tiny_config();
  const Model m = oracle::random_model(cfg, 12);
  ad::Tape tape(ad::Tape::Mode::kNoGrad);
  const auto bm = bind(m, tape);
  EXPECT_THROW(encode_table(bm, std::vector<PositionedToken>{}), std::invalid_argument);
  EXPECT_THROW(encode_table(bm, std::vector<PositionedToken>{{99, 2, 1, 1}}), IndexError);
  EXPECT_THROW(encode_table(bm, std::vector<PositionedToken>{{4, 99, 1, 1}}), IndexError);
}

// Swapping records moves hidden states but each token's z stays the same.
TEST(EncodeTable, ShuffleKeepsFieldVectors) {
  const auto cfg = oracle::tiny_config();
  const Model m = oracle::random_model(cfg, 13);
  const std::vector<PositionedToken> a{{4, 2, 1, 2}, {5, 2, 2, 1}, {6, 3, 1, 1}};
  const std::vector<PositionedToken> b{{6, 3, 1, 1}, {4, 2, 1, 2}, {5, 2, 2, 1}};
  ad::Tape t1(ad::Tape::Mode::kNoGrad), t2(ad::Tape::Mode::kNoGrad);
  const auto ea = encode_table(bind(m, t1), a);
  const auto eb = encode_table(bind(m, t2), b);
  EXPECT_EQ(vals(ea.z_rows[0]), vals(eb.z_rows[1]));
  EXPECT_EQ(vals(ea.z_rows[1]), vals(eb.z_rows[2]));
  EXPECT_EQ(vals(ea.z_rows[2]), vals(eb.z_rows[0]));
  EXPECT_GT(testutil::max_abs_diff(vals(ea.final.h), vals(eb.final.h)), 1e-6);
}

TEST(EncodeTable, FullGradientCheck) {
  auto cfg = oracle::tiny_config();
  Model m = oracle::random_model(cfg, 14);
  Rng rng(15);
  const auto table = oracle::random_table(6, cfg, rng);
  const std::vector<std::string> enc_params{pname::kWordEmb, pname::kFieldEmb, pname::kPosBeginEmb,
                                            pname::kPosEndEmb, pname::kEncW,     pname::kEncB,
                                            pname::kGateW,     pname::kGateB};
  std::vector<NamedTensor> refs;
  for (const auto& name : enc_params) refs.push_back({name, &m.params.get(name)});
  const auto report = grad_check(
      [&](ad::Tape& t) {
        const auto enc = encode_table(bind(m, t), table);
        return ad::add(ad::sum(ad::mul(enc.H, enc.H)), ad::sum(enc.final.c));
      },
      refs);
  for (const auto& e : report.entries) EXPECT_LT(e.max_rel_error, 1e-4) << e.name;
}
