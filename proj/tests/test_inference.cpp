#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracle.hpp"
#include "structgen/inference.hpp"

using namespace structgen;

namespace {

// A fixed conditional language model over a small vocabulary: the next-token
// distribution depends on the whole prefix and is looked up in a table.
class TableLm {
 public:
  TableLm(std::size_t vocab, std::uint64_t seed, double spread = 3.0) : vocab_(vocab), rng_(seed), spread_(spread) {}

  SearchStep operator()(std::size_t state, WordId prev) {
    std::vector<WordId> prefix = prefixes_.empty() ? std::vector<WordId>{} : prefixes_.at(state);
    if (prefixes_.empty()) prefixes_.push_back({});
    if (state != 0 || prev != word_ids::kSos) prefix.push_back(prev);
    SearchStep r;
    r.log_probs = dist(prefix);
    r.state = prefixes_.size();
    prefixes_.push_back(prefix);
    r.alpha = r.gamma = {1.0};
    return r;
  }

  std::vector<double> dist(const std::vector<WordId>& prefix) {
    auto it = cache_.find(prefix);
    if (it != cache_.end()) return it->second;
    std::vector<double> logits(vocab_);
    for (double& v : logits) v = rng_.uniform(-spread_, spread_);
    return cache_[prefix] = ad::log_softmax_values(logits);
  }

  double score(const std::vector<WordId>& tokens) {
    double s = 0.0;
    std::vector<WordId> prefix;
    for (WordId t : tokens) {
      s += dist(prefix)[static_cast<std::size_t>(t)];
      prefix.push_back(t);
    }
    return s;
  }

 private:
  std::size_t vocab_;
  Rng rng_;
  double spread_;
  std::vector<std::vector<WordId>> prefixes_;
  std::map<std::vector<WordId>, std::vector<double>> cache_;
};

StepFn as_step(TableLm& lm) {
  return [&lm](std::size_t s, WordId p) { return lm(s, p); };
}

// Best sequence under the search's semantics: sequences end at the first
// <eos> or at max_len tokens.
std::pair<std::vector<WordId>, double> exhaustive_best(TableLm& lm, std::size_t vocab, std::size_t max_len) {
  std::vector<WordId> best;
  double best_score = -INFINITY;
  std::vector<WordId> cur;
  std::function<void(double)> rec = [&](double acc) {
    const auto d = lm.dist(cur);
    for (std::size_t t = 0; t < vocab; ++t) {
      cur.push_back(static_cast<WordId>(t));
      const double s = acc + d[t];
      if (static_cast<WordId>(t) == word_ids::kEos || cur.size() == max_len) {
        if (s > best_score) {
          best_score = s;
          best = cur;
        }
      } else {
        rec(s);
      }
      cur.pop_back();
    }
  };
  rec(0.0);
  return {best, best_score};
}

}  // namespace

TEST(BeamSearch, HandSetModelWhereGreedyLoses) {
  // Vocabulary {pad, unk, sos, eos, A, B}. Step 1: A 0.6, B 0.4.
  // After A: A 0.3, B 0.3, eos 0.4. After B: eos 0.9.
  auto lp = [](std::map<WordId, double> p) {
    std::vector<double> v(6, std::log(1e-300));
    for (auto [k, x] : p) v[static_cast<std::size_t>(k)] = std::log(x);
    return v;
  };
  std::vector<std::vector<WordId>> prefixes{{}};
  StepFn step = [&](std::size_t state, WordId prev) {
    auto prefix = prefixes.at(state);
    if (!(state == 0 && prev == word_ids::kSos)) prefix.push_back(prev);
    SearchStep r;
    if (prefix.empty()) {
      r.log_probs = lp({{4, 0.6}, {5, 0.4}});
    } else if (prefix.back() == 4) {
      r.log_probs = lp({{4, 0.3}, {5, 0.3}, {3, 0.4}});
    } else {
      r.log_probs = lp({{3, 0.9}, {4, 0.1}});
    }
    r.state = prefixes.size();
    prefixes.push_back(prefix);
    return r;
  };
  const auto g = greedy_search(step, 2);
  EXPECT_EQ(g.tokens, (std::vector<WordId>{4, word_ids::kEos}));
  EXPECT_NEAR(g.log_prob, std::log(0.24), 1e-12);
  const auto beam = beam_search(step, 2, 2);
  EXPECT_EQ(beam.front().tokens, (std::vector<WordId>{5, word_ids::kEos}));
  EXPECT_NEAR(beam.front().log_prob, std::log(0.36), 1e-12);
  EXPECT_GT(beam.front().log_prob, g.log_prob);
}

TEST(BeamSearch, BeamOneEqualsGreedyOnTableModels) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TableLm a(7, seed), b(7, seed);
    const auto g = greedy_search(as_step(a), 6);
    const auto k1 = beam_search(as_step(b), 1, 6);
    ASSERT_EQ(g.tokens, k1.front().tokens) << seed;
    ASSERT_EQ(g.log_prob, k1.front().log_prob);
  }
}

TEST(BeamSearch, ExhaustiveBeamFindsArgmax) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TableLm lm(6, 1000 + seed, 2.0);
    const auto [best, score] = exhaustive_best(lm, 6, 4);
    const auto beam = beam_search(as_step(lm), 1296, 4);
    EXPECT_EQ(beam.front().tokens, best) << seed;
    EXPECT_NEAR(beam.front().log_prob, score, 1e-12);
  }
}

TEST(BeamSearch, ScoresSortedAndConsistent) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    TableLm lm(8, 50 + seed);
    const auto hyps = beam_search(as_step(lm), 4, 5);
    ASSERT_FALSE(hyps.empty());
    for (std::size_t i = 1; i < hyps.size(); ++i) EXPECT_GE(hyps[i - 1].score, hyps[i].score);
    for (const auto& h : hyps) {
      EXPECT_LE(h.tokens.size(), 5u);
      EXPECT_EQ(h.trace.steps(), h.tokens.size());
      EXPECT_EQ(h.finished, !h.tokens.empty() && h.tokens.back() == word_ids::kEos);
      double s = 0;
      for (double x : h.step_log_probs) s += x;
      EXPECT_NEAR(s, h.log_prob, 1e-12);
      EXPECT_NEAR(lm.score(h.tokens), h.log_prob, 1e-9);
    }
  }
}

TEST(BeamSearch, LengthPenaltyRanksByNormalisedScore) {
  TableLm lm(8, 3);
  const auto hyps = beam_search(as_step(lm), 4, 6, 1.0);
  for (const auto& h : hyps) EXPECT_NEAR(h.score, h.log_prob / static_cast<double>(h.tokens.size()), 1e-12);
  for (std::size_t i = 1; i < hyps.size(); ++i) EXPECT_GE(hyps[i - 1].score, hyps[i].score);
}

TEST(BeamSearch, RejectsZeroBeam) {
  TableLm lm(6, 1);
  EXPECT_THROW(beam_search(as_step(lm), 0, 3), std::invalid_argument);
}

// ---- on the model ----------------------------------------------------------

TEST(Decode, BeamOneEqualsGreedyOnRandomModels) {
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto cfg = oracle::tiny_config(seed % 2 ? EncoderMode::kFieldGate : EncoderMode::kConcatFieldPos,
                                   seed % 3 ? AttentionMode::kDual : AttentionMode::kWord);
    const Model m = oracle::random_model(cfg, seed, 1.0);
    const auto table = oracle::random_table(1 + rng.uniform_index(6), cfg, rng);
    const auto g = greedy_decode(m, table, 8);
    const auto b = beam_decode(m, table, 1, 8);
    ASSERT_EQ(g.tokens, b.front().tokens);
    ASSERT_EQ(g.log_prob, b.front().log_prob);
  }
}

TEST(Decode, ScoresMatchRescoringAndTraceIsValid) {
  const auto cfg = oracle::tiny_config();
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Model m = oracle::random_model(cfg, 70 + seed, 1.0);
    const auto table = oracle::random_table(4, cfg, rng);
    for (const auto& h : beam_decode(m, table, 3, 7)) {
      EXPECT_NEAR(rescore(m, table, h.tokens), h.log_prob, 1e-9);
      ASSERT_EQ(h.trace.steps(), h.tokens.size());
      for (std::size_t t = 0; t < h.trace.steps(); ++t) {
        double s = 0;
        for (double x : h.trace.gamma[t]) s += x;
        EXPECT_NEAR(s, 1.0, 1e-9);
        EXPECT_EQ(h.trace.gamma[t].size(), 4u);
      }
    }
  }
}

TEST(Decode, GreedyRespectsMaxLen) {
  const auto cfg = oracle::tiny_config();
  Rng rng(10);
  std::size_t hit_limit = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Model m = oracle::random_model(cfg, 300 + seed, 1.0);
    const auto table = oracle::random_table(3, cfg, rng);
    const auto g = greedy_decode(m, table, 3);
    EXPECT_LE(g.tokens.size(), 3u);
    EXPECT_TRUE(g.finished || g.tokens.size() == 3u);
    if (!g.finished) ++hit_limit;
    for (const auto& h : beam_decode(m, table, 2, 3)) EXPECT_LE(h.tokens.size(), 3u);
  }
  EXPECT_GT(hit_limit, 0u);
}

// ---- UNK replacement -----------------------------------------------------

TEST(UnkReplace, CopiesMostAttendedTableWord) {
  DecodeTrace trace;
  trace.gamma = {{0, 1, 0}, {1, 0, 0}};
  const auto r = unk_replace({"<unk>", "is"}, trace, {"george", "mikell", "actor"});
  EXPECT_EQ(r.words, (std::vector<std::string>{"mikell", "is"}));
  EXPECT_EQ(r.replaced, 1u);
}

TEST(UnkReplace, NoUnkUnchanged) {
  DecodeTrace trace;
  trace.gamma = {{.5, .5}, {.5, .5}};
  const std::vector<std::string> words{"an", "actor"};
  EXPECT_EQ(unk_replace(words, trace, {"x", "y"}).words, words);
}

TEST(UnkReplace, TieGoesToEarliestPosition) {
  DecodeTrace trace;
  trace.gamma = {{0.1, 0.3, 0.1, 0.1, 0.3, 0.1}};
  EXPECT_EQ(unk_replace({"<unk>"}, trace, {"a", "b", "c", "d", "e", "f"}).words.front(), "b");
}

TEST(UnkReplace, EmptyTableLeavesUnk) {
  DecodeTrace trace;
  trace.gamma = {{}};
  const auto r = unk_replace({"<unk>"}, trace, {});
  EXPECT_EQ(r.words.front(), "<unk>");
  EXPECT_EQ(r.unresolved, 1u);
}

TEST(Generate, NoUnkLeftWhenTableNonEmpty) {
  auto cfg = oracle::tiny_config();
  Model m = oracle::random_model(cfg, 11);
  // Strongly favour <unk> so every output token needs replacing.
  auto& Ws = m.params.get(pname::kOutS);
  for (std::size_t j = 0; j < Ws.cols(); ++j) Ws.at(word_ids::kUnk, j) = 30.0 * (m.params.get(pname::kOutS).at(4, j) > 0 ? 1 : -1);
  Vocabularies vocab;
  for (int i = 0; i < 8; ++i) vocab.words.add("w" + std::to_string(i));
  for (int i = 0; i < 3; ++i) vocab.fields.add("f" + std::to_string(i));
  std::vector<RawExample> raws{{InfoboxTable({{"f0", {"zed", "qux"}}, {"f1", {"w1"}}}), {"w1"}}};
  auto examples = make_examples(raws, vocab);
  for (std::size_t beam : {1u, 3u}) {
    GenerateOptions opts;
    opts.beam_size = beam;
    opts.max_len = 6;
    const auto out = generate(m, vocab, examples, opts);
    for (const auto& w : out[0].words) EXPECT_NE(w, "<unk>");
    EXPECT_EQ(out[0].unresolved_unk, 0u);
  }
}
