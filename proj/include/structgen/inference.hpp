#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "structgen/corpus.hpp"
#include "structgen/model.hpp"

namespace structgen {

// Attention weights recorded at every decode step, one row per step.
// beta is empty in word-attention mode; gamma equals alpha there.
struct DecodeTrace {
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> beta;
  std::vector<std::vector<double>> gamma;

  std::size_t steps() const { return gamma.size(); }
};

struct Hypothesis {
  std::vector<WordId> tokens;  // generated ids, including the final <eos> when finished
  std::vector<double> step_log_probs;
  double log_prob = 0.0;  // sum of step_log_probs
  double score = 0.0;     // log_prob, optionally length-normalised
  bool finished = false;  // ended in <eos> (otherwise stopped at max_len)
  DecodeTrace trace;      // one row per token
};

// One expansion of the search: log-probabilities of the next token given
// the prefix behind `state`, plus a handle for the state after the step and
// the attention used. The decoders below only see this interface.
struct SearchStep {
  std::vector<double> log_probs;
  std::size_t state = 0;
  std::vector<double> alpha, beta, gamma;
};
// (state handle, previous token) -> step. The initial handle is 0 and the
// first previous token is <sos>.
using StepFn = std::function<SearchStep(std::size_t state, WordId prev)>;

Hypothesis greedy_search(const StepFn& step, std::size_t max_len);
std::vector<Hypothesis> beam_search(const StepFn& step, std::size_t k, std::size_t max_len,
                                    double length_penalty = 0.0);

// Argmax decoding from <sos>. Stops after emitting <eos> or after max_len
// tokens. Ties go to the lowest token id.
Hypothesis greedy_decode(const Model& model, std::span<const PositionedToken> table, std::size_t max_len);

// Beam search over cumulative log-probabilities. Finished hypotheses move to
// a done set; live ones still running at max_len are added to it. Returned
// best first. With length_penalty a > 0 hypotheses are ranked by
// log_prob / length^a instead. Throws std::invalid_argument for k < 1.
std::vector<Hypothesis> beam_decode(const Model& model, std::span<const PositionedToken> table, std::size_t k,
                                    std::size_t max_len, double length_penalty = 0.0);

// Teacher-forced log-probability of `tokens` (as produced by the decoders).
double rescore(const Model& model, std::span<const PositionedToken> table, std::span<const WordId> tokens);

// Ids to words, dropping a trailing <eos>.
std::vector<std::string> to_words(std::span<const WordId> tokens, const Vocabulary& words);

struct UnkReplacement {
  std::vector<std::string> words;
  std::size_t replaced = 0;
  std::size_t unresolved = 0;  // UNKs left because the table was empty
};

// Replaces each <unk> in `words` (aligned with the trace rows) by the table
// word with the largest gamma at that step; earliest position wins ties.
UnkReplacement unk_replace(const std::vector<std::string>& words, const DecodeTrace& trace,
                           const std::vector<std::string>& table_surface);

struct GenerateOptions {
  std::size_t beam_size = 5;
  std::size_t max_len = 60;
  double length_penalty = 0.0;
  bool replace_unk = true;
};

struct Generation {
  std::vector<std::string> words;      // final output
  std::vector<std::string> raw_words;  // before UNK replacement
  Hypothesis best;
  std::size_t unresolved_unk = 0;
  bool empty_table = false;
};

// Decodes every example independently; tables are spread over OpenMP
// threads, each with its own tape. Output order matches the input.
std::vector<Generation> generate(const Model& model, const Vocabularies& vocab,
                                 const std::vector<Example>& examples, const GenerateOptions& options);

}  // namespace structgen
