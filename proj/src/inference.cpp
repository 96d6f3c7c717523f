#include "structgen/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "structgen/decoder.hpp"
#include "structgen/encoder.hpp"

namespace structgen {

namespace {

// Encoder side of one table, bound to a no-grad tape, plus every decoder
// state reached so far (handle = index).
struct Session {
  ad::Tape tape{ad::Tape::Mode::kNoGrad};
  BoundModel m;
  EncoderOutput enc;
  AttentionMemory memory;
  std::vector<LstmState> states;

  Session(const Model& model, std::span<const PositionedToken> table) {
    m = bind(model, tape);
    enc = encode_table(m, table);
    memory = prepare_attention(m, enc);
    states.push_back(initial_decoder_state(m, enc));
  }

  SearchStep operator()(std::size_t state, WordId prev) {
    const StepOutput out = decode_step(m, prev, states.at(state), memory);
    SearchStep r;
    r.log_probs = ad::log_softmax_values(out.logits.value().values());
    r.state = states.size();
    states.push_back(out.state);
    r.alpha = copy_values(out.attention.alpha);
    if (out.attention.beta) r.beta = copy_values(*out.attention.beta);
    r.gamma = copy_values(out.attention.gamma);
    return r;
  }

  static std::vector<double> copy_values(ad::Var v) {
    const auto s = v.value().values();
    return {s.begin(), s.end()};
  }
};

StepFn step_fn(Session& s) {
  return [&s](std::size_t state, WordId prev) { return s(state, prev); };
}

void push_trace(DecodeTrace& trace, const SearchStep& r) {
  trace.alpha.push_back(r.alpha);
  if (!r.beta.empty()) trace.beta.push_back(r.beta);
  trace.gamma.push_back(r.gamma);
}

// Indices of the k largest entries, larger first, lower index first on ties.
std::vector<std::size_t> top_k(const std::vector<double>& x, std::size_t k) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return x[a] > x[b] || (x[a] == x[b] && a < b); });
  idx.resize(k);
  return idx;
}

double length_score(double log_prob, std::size_t length, double penalty) {
  if (penalty == 0.0) return log_prob;
  return log_prob / std::pow(static_cast<double>(std::max<std::size_t>(length, 1)), penalty);
}

}  // namespace

Hypothesis greedy_search(const StepFn& step, std::size_t max_len) {
  Hypothesis h;
  std::size_t state = 0;
  WordId prev = word_ids::kSos;
  for (std::size_t t = 0; t < max_len; ++t) {
    const SearchStep r = step(state, prev);
    const auto best = top_k(r.log_probs, 1).front();
    const auto tok = static_cast<WordId>(best);
    h.tokens.push_back(tok);
    h.step_log_probs.push_back(r.log_probs[best]);
    h.log_prob += r.log_probs[best];
    push_trace(h.trace, r);
    state = r.state;
    prev = tok;
    if (tok == word_ids::kEos) {
      h.finished = true;
      break;
    }
  }
  h.score = h.log_prob;
  return h;
}

std::vector<Hypothesis> beam_search(const StepFn& step, std::size_t k, std::size_t max_len, double length_penalty) {
  if (k < 1) throw std::invalid_argument("beam_search: beam size must be >= 1");
  struct Live {
    Hypothesis hyp;
    std::size_t state = 0;
  };
  std::vector<Live> live(1);
  std::vector<Hypothesis> done;

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    struct Candidate {
      double log_prob;
      std::size_t parent;
      WordId token;
    };
    std::vector<Candidate> cands;
    std::vector<SearchStep> results;
    results.reserve(live.size());
    for (std::size_t p = 0; p < live.size(); ++p) {
      const WordId prev = live[p].hyp.tokens.empty() ? word_ids::kSos : live[p].hyp.tokens.back();
      results.push_back(step(live[p].state, prev));
      for (std::size_t tok : top_k(results.back().log_probs, k)) {
        cands.push_back({live[p].hyp.log_prob + results.back().log_probs[tok], p, static_cast<WordId>(tok)});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });
    if (cands.size() > k) cands.resize(k);

    std::vector<Live> next;
    for (const Candidate& c : cands) {
      const SearchStep& r = results[c.parent];
      Live child{live[c.parent].hyp, r.state};
      child.hyp.tokens.push_back(c.token);
      child.hyp.step_log_probs.push_back(r.log_probs[static_cast<std::size_t>(c.token)]);
      child.hyp.log_prob = c.log_prob;
      child.hyp.score = length_score(c.log_prob, child.hyp.tokens.size(), length_penalty);
      push_trace(child.hyp.trace, r);
      if (c.token == word_ids::kEos) {
        child.hyp.finished = true;
        done.push_back(std::move(child.hyp));
      } else {
        next.push_back(std::move(child));
      }
    }
    live = std::move(next);

    // Scores only fall as hypotheses grow, so once k finished ones beat the
    // best live one nothing can change the top k.
    if (length_penalty == 0.0 && done.size() >= k && !live.empty()) {
      std::vector<double> scores;
      for (const auto& d : done) scores.push_back(d.score);
      std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k - 1), scores.end(),
                       std::greater<>());
      double best_live = live.front().hyp.score;
      for (const auto& l : live) best_live = std::max(best_live, l.hyp.score);
      if (scores[k - 1] >= best_live) live.clear();
    }
  }
  for (auto& l : live) done.push_back(std::move(l.hyp));
  std::stable_sort(done.begin(), done.end(), [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  return done;
}

Hypothesis greedy_decode(const Model& model, std::span<const PositionedToken> table, std::size_t max_len) {
  Session s(model, table);
  return greedy_search(step_fn(s), max_len);
}

std::vector<Hypothesis> beam_decode(const Model& model, std::span<const PositionedToken> table, std::size_t k,
                                    std::size_t max_len, double length_penalty) {
  if (k < 1) throw std::invalid_argument("beam_decode: beam size must be >= 1");
  Session s(model, table);
  return beam_search(step_fn(s), k, max_len, length_penalty);
}

double rescore(const Model& model, std::span<const PositionedToken> table, std::span<const WordId> tokens) {
  Session s(model, table);
  std::size_t state = 0;
  WordId prev = word_ids::kSos;
  double total = 0.0;
  for (WordId tok : tokens) {
    const SearchStep r = s(state, prev);
    total += r.log_probs.at(static_cast<std::size_t>(tok));
    state = r.state;
    prev = tok;
  }
  return total;
}

std::vector<std::string> to_words(std::span<const WordId> tokens, const Vocabulary& words) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == word_ids::kEos && i + 1 == tokens.size()) break;
    out.push_back(words.token(tokens[i]));
  }
  return out;
}

UnkReplacement unk_replace(const std::vector<std::string>& words, const DecodeTrace& trace,
                           const std::vector<std::string>& table_surface) {
  static const std::string kUnk = Vocabulary::reserved_tokens(Vocabulary::Kind::kWord)[word_ids::kUnk];
  UnkReplacement r;
  r.words = words;
  for (std::size_t i = 0; i < r.words.size(); ++i) {
    if (r.words[i] != kUnk) continue;
    if (table_surface.empty() || i >= trace.gamma.size()) {
      ++r.unresolved;
      continue;
    }
    const auto& g = trace.gamma[i];
    const std::size_t n = std::min(g.size(), table_surface.size());
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (g[j] > g[best]) best = j;
    }
    r.words[i] = table_surface[best];
    ++r.replaced;
  }
  if (r.unresolved > 0) {
    std::cerr << "warning: " << r.unresolved << " <unk> token(s) left in place: no table to copy from\n";
  }
  return r;
}

std::vector<Generation> generate(const Model& model, const Vocabularies& vocab,
                                 const std::vector<Example>& examples, const GenerateOptions& options) {
  if (options.beam_size < 1) throw std::invalid_argument("generate: beam size must be >= 1");
  std::vector<Generation> out(examples.size());
  const auto n = static_cast<std::ptrdiff_t>(examples.size());
  bool failed = false;
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const Example& ex = examples[static_cast<std::size_t>(i)];
      Generation& g = out[static_cast<std::size_t>(i)];
      if (ex.tokens.empty()) {
        g.empty_table = true;
        continue;
      }
      g.best = options.beam_size == 1
                   ? greedy_decode(model, ex.tokens, options.max_len)
                   : beam_decode(model, ex.tokens, options.beam_size, options.max_len, options.length_penalty)
                         .front();
      g.raw_words = to_words(g.best.tokens, vocab.words);
      if (options.replace_unk) {
        UnkReplacement rep = unk_replace(g.raw_words, g.best.trace, ex.surface);
        g.words = std::move(rep.words);
        g.unresolved_unk = rep.unresolved;
      } else {
        g.words = g.raw_words;
      }
    } catch (const std::exception& e) {
#pragma omp critical(structgen_generate_error)
      {
        if (!failed) {
          failed = true;
          failure = "table " + std::to_string(i + 1) + ": " + e.what();
        }
      }
    }
  }
  if (failed) throw std::runtime_error(failure);
  return out;
}

}  // namespace structgen
