#include "structgen/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "structgen/checkpoint.hpp"
#include "structgen/errors.hpp"
#include "structgen/inference.hpp"
#include "structgen/random.hpp"

namespace structgen {

std::vector<ExperimentConfig> standard_ablation_grid(const TrainConfig& base) {
  auto make = [&](const std::string& name, const char* enc, const char* att, std::size_t beam) {
    ExperimentConfig c;
    c.name = name;
    c.train = base;
    c.train.encoder_mode = enc;
    c.train.attention = att;
    c.beam_size = beam;
    return c;
  };
  return {
      make("seq2seq", "word-only", "word", 1),
      make("+field(concat)", "concat-field", "word", 1),
      make("+field&pos(concat)", "concat-input", "word", 1),
      make("fieldgate", "fieldgate", "word", 1),
      make("fieldgate+dual", "fieldgate", "dual", 1),
      make("fieldgate+dual+beam", "fieldgate", "dual", base.beam_size),
  };
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

std::string format_mean_std(const MeanStd& m) { return format_percent(m.mean) + " ± " + format_percent(m.stddev); }

InfoboxTable shuffle_table_records(const InfoboxTable& table, std::uint64_t seed) {
  return shuffle_records(table, seed);
}

InfoboxTable identity_shuffle(const InfoboxTable& table, std::uint64_t) { return table; }

namespace {

struct Trained {
  Model model;
  Vocabularies vocab;
};

Trained train_or_load(const ExperimentData& data, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.checkpoint) {
    if (!std::filesystem::exists(*cfg.checkpoint)) {
      throw IoError(*cfg.checkpoint, "checkpoint for config '" + cfg.name + "' not found");
    }
    Checkpoint ck = load_checkpoint(*cfg.checkpoint);
    return {std::move(ck.model), std::move(ck.vocab)};
  }
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const Vocabularies vocab = build_vocabularies(data.train, tc.word_limit, tc.field_min_count);
  const int cap = static_cast<int>(tc.pos_cap);
  const auto train_set = make_examples(data.train, vocab, cap);
  const auto valid_set = make_examples(data.valid, vocab, cap);
  TrainResult r = train(tc, vocab, train_set, valid_set);
  return {std::move(r.best_model), vocab};
}

std::vector<RawExample> disorder(const std::vector<RawExample>& xs, const TableShuffler& shuffler,
                                 std::uint64_t seed) {
  std::vector<RawExample> out = xs;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].table = shuffler(xs[i].table, derive_seed(seed, i));
  return out;
}

constexpr std::uint64_t kTrainShuffleSalt = 0x7261;
constexpr std::uint64_t kTestShuffleSalt = 0x7465;

}  // namespace

RunScores score_model(const Model& model, const Vocabularies& vocab, const std::vector<RawExample>& test,
                      const ExperimentConfig& config, std::uint64_t seed) {
  const auto examples = make_examples(test, vocab, static_cast<int>(model.config.pos_cap));
  GenerateOptions opts;
  opts.beam_size = config.beam_size;
  opts.max_len = config.train.max_decode_len;
  opts.replace_unk = true;
  const auto gens = generate(model, vocab, examples, opts);
  std::vector<Sentence> plain, replaced, refs;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    plain.push_back(gens[i].raw_words);
    replaced.push_back(gens[i].words);
    refs.push_back(test[i].description);
  }
  RunScores s;
  s.seed = seed;
  s.plain = score_corpus(config.name, plain, refs);
  s.replaced = score_corpus(config.name, replaced, refs);
  return s;
}

std::vector<AblationRow> run_ablation(const ExperimentData& data, const std::vector<ExperimentConfig>& configs,
                                      const std::vector<std::uint64_t>& seeds) {
  if (data.train.empty() || data.test.empty()) throw std::invalid_argument("run_ablation: empty train or test split");
  std::vector<AblationRow> rows;
  for (const auto& cfg : configs) {
    AblationRow row;
    row.name = cfg.name;
    std::vector<double> b, r, bu, ru;
    const std::vector<std::uint64_t> run_seeds =
        cfg.checkpoint ? std::vector<std::uint64_t>{cfg.train.seed} : seeds;
    for (std::uint64_t seed : run_seeds) {
      const Trained t = train_or_load(data, cfg, seed);
      row.runs.push_back(score_model(t.model, t.vocab, data.test, cfg, seed));
      b.push_back(row.runs.back().plain.bleu.bleu);
      r.push_back(row.runs.back().plain.rouge.f);
      bu.push_back(row.runs.back().replaced.bleu.bleu);
      ru.push_back(row.runs.back().replaced.rouge.f);
    }
    row.bleu = mean_std(b);
    row.rouge = mean_std(r);
    row.bleu_unk = mean_std(bu);
    row.rouge_unk = mean_std(ru);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DisorderRow> run_disorder_experiment(const ExperimentData& data,
                                                 const std::vector<ExperimentConfig>& configs,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 const TableShuffler& shuffler) {
  if (data.train.empty() || data.test.empty()) {
    throw std::invalid_argument("run_disorder_experiment: empty train or test split");
  }
  std::vector<DisorderRow> rows;
  for (const auto& cfg : configs) {
    if (cfg.checkpoint) {
      throw std::invalid_argument("run_disorder_experiment: config '" + cfg.name +
                                  "' names a checkpoint; the disorder experiment trains its own models");
    }
    DisorderRow row;
    row.name = cfg.name;
    std::vector<double> ordered, disordered;
    for (std::uint64_t seed : seeds) {
      const Trained a = train_or_load(data, cfg, seed);
      row.ordered.push_back(score_model(a.model, a.vocab, data.test, cfg, seed));

      ExperimentData shuffled;
      shuffled.train = disorder(data.train, shuffler, derive_seed(seed, kTrainShuffleSalt));
      shuffled.valid = disorder(data.valid, shuffler, derive_seed(seed, kTrainShuffleSalt + 1));
      shuffled.test = disorder(data.test, shuffler, derive_seed(seed, kTestShuffleSalt));
      const Trained b = train_or_load(shuffled, cfg, seed);
      row.disordered.push_back(score_model(b.model, b.vocab, shuffled.test, cfg, seed));

      const double x = row.ordered.back().replaced.bleu.bleu;
      const double y = row.disordered.back().replaced.bleu.bleu;
      ordered.push_back(x);
      disordered.push_back(y);
      row.bleu_delta.push_back(y - x);
    }
    row.bleu_ordered = mean_std(ordered);
    row.bleu_disordered = mean_std(disordered);
    for (double d : row.bleu_delta) {
      row.mean_delta += d;
      row.mean_abs_delta += std::fabs(d);
    }
    if (!row.bleu_delta.empty()) {
      row.mean_delta /= static_cast<double>(row.bleu_delta.size());
      row.mean_abs_delta /= static_cast<double>(row.bleu_delta.size());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t pad = width[c] - row[c].size();
      if (c == 0) out << row[c] << std::string(pad, ' ');
      else out << "  " << std::string(pad, ' ') << row[c];
    }
    out << '\n';
  }
  return out.str();
}

std::string signed_delta(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "(%+.2f)", d);
  return buf;
}

nlohmann::json run_json(const RunScores& s) {
  return {{"seed", s.seed}, {"plain", to_json(s.plain)}, {"unk_replaced", to_json(s.replaced)}};
}

nlohmann::json ms_json(const MeanStd& m) { return {{"mean", m.mean}, {"stddev", m.stddev}}; }

}  // namespace

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::vector<std::vector<std::string>> t{
      {"config", "runs", "BLEU-4", "ROUGE-4", "BLEU-4 (unk repl.)", "ROUGE-4 (unk repl.)"}};
  for (const auto& r : rows) {
    t.push_back({r.name, std::to_string(r.runs.size()), format_mean_std(r.bleu), format_mean_std(r.rouge),
                 format_mean_std(r.bleu_unk), format_mean_std(r.rouge_unk)});
  }
  return table(t);
}

std::string format_disorder(const std::vector<DisorderRow>& rows) {
  std::vector<std::vector<std::string>> t{{"config", "runs", "ordered BLEU-4", "disordered BLEU-4", "mean |delta|"}};
  for (const auto& r : rows) {
    t.push_back({r.name, std::to_string(r.bleu_delta.size()), format_mean_std(r.bleu_ordered),
                 format_percent(r.bleu_disordered.mean) + " " + signed_delta(r.mean_delta),
                 format_percent(r.mean_abs_delta)});
  }
  return table(t);
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& s : r.runs) runs.push_back(run_json(s));
    out.push_back({{"config", r.name},
                   {"bleu4", ms_json(r.bleu)},
                   {"rouge4_f", ms_json(r.rouge)},
                   {"bleu4_unk_replaced", ms_json(r.bleu_unk)},
                   {"rouge4_f_unk_replaced", ms_json(r.rouge_unk)},
                   {"runs", runs}});
  }
  return out;
}

nlohmann::json disorder_json(const std::vector<DisorderRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json ordered = nlohmann::json::array(), disordered = nlohmann::json::array();
    for (const auto& s : r.ordered) ordered.push_back(run_json(s));
    for (const auto& s : r.disordered) disordered.push_back(run_json(s));
    out.push_back({{"config", r.name},
                   {"bleu4_ordered", ms_json(r.bleu_ordered)},
                   {"bleu4_disordered", ms_json(r.bleu_disordered)},
                   {"bleu4_delta", r.bleu_delta},
                   {"mean_delta", r.mean_delta},
                   {"mean_abs_delta", r.mean_abs_delta},
                   {"ordered", ordered},
                   {"disordered", disordered}});
  }
  return out;
}

}  // namespace structgen
