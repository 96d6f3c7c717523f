#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

namespace structgen {

using Sentence = std::vector<std::string>;

struct BleuScore {
  double bleu = 0.0;                      // percent
  std::array<double, 4> precisions{};     // percent, n = 1..4
  std::array<std::size_t, 4> matches{};   // clipped n-gram matches
  std::array<std::size_t, 4> totals{};    // candidate n-grams
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

// Corpus BLEU-4 with one reference per candidate, no smoothing:
// BP * exp(mean log p_n), BP = exp(min(0, 1 - r/c)); 0 when any p_n is 0.
// Throws std::invalid_argument when the lists differ in length.
BleuScore bleu4(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references);

struct RougeScore {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f = 0.0;
};

// ROUGE-4 on clipped 4-gram overlap, averaged over sentence pairs (P, R and F
// each averaged separately). No stemming, no stopword removal. A pair with
// no 4-grams on either side scores 0.
RougeScore rouge4(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references);
RougeScore rouge4_sentence(const Sentence& candidate, const Sentence& reference);

struct ScoreReport {
  std::string config_id;
  std::size_t examples = 0;
  BleuScore bleu;
  RougeScore rouge;
};

ScoreReport score_corpus(const std::string& config_id, const std::vector<Sentence>& candidates,
                         const std::vector<Sentence>& references);

nlohmann::json to_json(const ScoreReport& r);
// Aligned text table, one row per report, scores with two decimals.
std::string format_reports(const std::vector<ScoreReport>& reports);

std::string format_percent(double v);

}  // namespace structgen
