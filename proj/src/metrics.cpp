#include "structgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace structgen {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts out;
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++out[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                   s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

std::size_t clipped_matches(const NgramCounts& cand, const NgramCounts& ref) {
  std::size_t m = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

void check_sizes(const char* who, std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(a) + " candidates but " +
                                std::to_string(b) + " references");
  }
}

}  // namespace

BleuScore bleu4(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references) {
  check_sizes("bleu4", candidates.size(), references.size());
  BleuScore s;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    s.hyp_length += candidates[i].size();
    s.ref_length += references[i].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts c = count_ngrams(candidates[i], n);
      s.matches[n - 1] += clipped_matches(c, count_ngrams(references[i], n));
      s.totals[n - 1] += candidates[i].size() >= n ? candidates[i].size() - n + 1 : 0;
    }
  }
  bool zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.totals[n] == 0 || s.matches[n] == 0) {
      zero = true;
      s.precisions[n] = 0.0;
      continue;
    }
    const double p = static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]);
    s.precisions[n] = 100.0 * p;
    log_sum += std::log(p);
  }
  if (s.hyp_length == 0) {
    s.brevity_penalty = 0.0;
  } else if (s.hyp_length < s.ref_length) {
    s.brevity_penalty = std::exp(1.0 - static_cast<double>(s.ref_length) / static_cast<double>(s.hyp_length));
  } else {
    s.brevity_penalty = 1.0;
  }
  s.bleu = zero ? 0.0 : 100.0 * s.brevity_penalty * std::exp(log_sum / 4.0);
  return s;
}

RougeScore rouge4_sentence(const Sentence& candidate, const Sentence& reference) {
  RougeScore r;
  const NgramCounts c = count_ngrams(candidate, 4);
  const NgramCounts ref = count_ngrams(reference, 4);
  const std::size_t cand_total = candidate.size() >= 4 ? candidate.size() - 3 : 0;
  const std::size_t ref_total = reference.size() >= 4 ? reference.size() - 3 : 0;
  if (cand_total == 0 || ref_total == 0) return r;
  const auto m = static_cast<double>(clipped_matches(c, ref));
  const double p = m / static_cast<double>(cand_total);
  const double rec = m / static_cast<double>(ref_total);
  r.precision = 100.0 * p;
  r.recall = 100.0 * rec;
  r.f = (p + rec) > 0.0 ? 100.0 * (2.0 * p * rec / (p + rec)) : 0.0;
  return r;
}

RougeScore rouge4(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references) {
  check_sizes("rouge4", candidates.size(), references.size());
  RougeScore total;
  if (candidates.empty()) return total;
  std::vector<RougeScore> per(candidates.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(candidates.size()); ++i) {
    per[static_cast<std::size_t>(i)] =
        rouge4_sentence(candidates[static_cast<std::size_t>(i)], references[static_cast<std::size_t>(i)]);
  }
  for (const auto& s : per) {
    total.precision += s.precision;
    total.recall += s.recall;
    total.f += s.f;
  }
  const auto n = static_cast<double>(candidates.size());
  total.precision /= n;
  total.recall /= n;
  total.f /= n;
  return total;
}

ScoreReport score_corpus(const std::string& config_id, const std::vector<Sentence>& candidates,
                         const std::vector<Sentence>& references) {
  ScoreReport r;
  r.config_id = config_id;
  r.examples = candidates.size();
  r.bleu = bleu4(candidates, references);
  r.rouge = rouge4(candidates, references);
  return r;
}

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json p = nlohmann::json::array();
  for (double x : r.bleu.precisions) p.push_back(x);
  return {
      {"config", r.config_id},
      {"examples", r.examples},
      {"bleu4", r.bleu.bleu},
      {"precisions", p},
      {"brevity_penalty", r.bleu.brevity_penalty},
      {"hyp_length", r.bleu.hyp_length},
      {"ref_length", r.bleu.ref_length},
      {"rouge4_p", r.rouge.precision},
      {"rouge4_r", r.rouge.recall},
      {"rouge4_f", r.rouge.f},
      {"rouge_stemming", false},
  };
}

std::string format_reports(const std::vector<ScoreReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"config", "n", "BLEU-4", "p1", "p2", "p3", "p4", "BP", "ROUGE-4 P", "ROUGE-4 R", "ROUGE-4 F"});
  for (const auto& r : reports) {
    char bp[32];
    std::snprintf(bp, sizeof bp, "%.4f", r.bleu.brevity_penalty);
    rows.push_back({r.config_id, std::to_string(r.examples), format_percent(r.bleu.bleu),
                    format_percent(r.bleu.precisions[0]), format_percent(r.bleu.precisions[1]),
                    format_percent(r.bleu.precisions[2]), format_percent(r.bleu.precisions[3]), bp,
                    format_percent(r.rouge.precision), format_percent(r.rouge.recall), format_percent(r.rouge.f)});
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        out << row[c] << std::string(width[c] - row[c].size(), ' ');
      } else {
        out << "  " << std::string(width[c] - row[c].size(), ' ') << row[c];
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace structgen
