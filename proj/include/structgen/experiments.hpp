#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "structgen/corpus.hpp"
#include "structgen/metrics.hpp"
#include "structgen/trainer.hpp"

namespace structgen {

struct ExperimentData {
  std::vector<RawExample> train;
  std::vector<RawExample> valid;  // may be empty
  std::vector<RawExample> test;
};

struct ExperimentConfig {
  std::string name;
  TrainConfig train;
  std::size_t beam_size = 1;  // 1: greedy
  // Evaluate this checkpoint instead of training (single seed only).
  std::optional<std::string> checkpoint;
};

// The ablation ladder: word-only seq2seq, + field concat, + field & position
// concat, field gating, + dual attention, + beam search (k = 5).
std::vector<ExperimentConfig> standard_ablation_grid(const TrainConfig& base);

struct RunScores {
  std::uint64_t seed = 0;
  ScoreReport plain;     // without UNK replacement
  ScoreReport replaced;  // with UNK replacement
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single run
};
MeanStd mean_std(const std::vector<double>& xs);
std::string format_mean_std(const MeanStd& m);

struct AblationRow {
  std::string name;
  std::vector<RunScores> runs;
  MeanStd bleu, rouge;          // without UNK replacement
  MeanStd bleu_unk, rouge_unk;  // with UNK replacement
};

// Trains (or loads) and scores every config once per seed on the test split.
// A configured checkpoint that does not exist raises IoError naming the config.
std::vector<AblationRow> run_ablation(const ExperimentData& data, const std::vector<ExperimentConfig>& configs,
                                      const std::vector<std::uint64_t>& seeds);

// Maps a table to its disordered version for one seed.
using TableShuffler = std::function<InfoboxTable(const InfoboxTable&, std::uint64_t seed)>;
InfoboxTable shuffle_table_records(const InfoboxTable& table, std::uint64_t seed);
InfoboxTable identity_shuffle(const InfoboxTable& table, std::uint64_t seed);

struct DisorderRow {
  std::string name;
  std::vector<RunScores> ordered;
  std::vector<RunScores> disordered;
  std::vector<double> bleu_delta;  // disordered - ordered, with UNK replacement
  MeanStd bleu_ordered, bleu_disordered;
  double mean_delta = 0.0;
  double mean_abs_delta = 0.0;
};

// For each config and seed: train and test on the data as given, then on a
// copy whose train and test tables have their records shuffled.
std::vector<DisorderRow> run_disorder_experiment(const ExperimentData& data,
                                                 const std::vector<ExperimentConfig>& configs,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 const TableShuffler& shuffler = shuffle_table_records);

// Scores one trained model on `test` (vocabulary from training).
RunScores score_model(const Model& model, const Vocabularies& vocab, const std::vector<RawExample>& test,
                      const ExperimentConfig& config, std::uint64_t seed);

std::string format_ablation(const std::vector<AblationRow>& rows);
std::string format_disorder(const std::vector<DisorderRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);
nlohmann::json disorder_json(const std::vector<DisorderRow>& rows);

}  // namespace structgen
