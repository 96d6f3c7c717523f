// structgen command-line tool.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "structgen/checkpoint.hpp"
#include "structgen/corpus.hpp"
#include "structgen/errors.hpp"
#include "structgen/experiments.hpp"
#include "structgen/inference.hpp"
#include "structgen/kernels.hpp"
#include "structgen/manifest.hpp"
#include "structgen/metrics.hpp"
#include "structgen/model_check.hpp"
#include "structgen/random.hpp"
#include "structgen/toy.hpp"
#include "structgen/trainer.hpp"

namespace fs = std::filesystem;
using namespace structgen;

namespace {

// Bad flags, missing inputs, failed validation: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

std::string parent_dir(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  return p.empty() ? "." : p.string();
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  if (const fs::path dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError(path, "write failed");
}

std::vector<std::vector<std::string>> read_token_lines(const std::string& path) { return read_sent_file(path); }

// <dir>/<name>.box + .sent, or <dir>/<name>.jsonl. Empty when neither exists.
std::vector<RawExample> load_split(const fs::path& dir, const std::string& name, bool required) {
  const fs::path box = dir / (name + ".box"), sent = dir / (name + ".sent"), jsonl = dir / (name + ".jsonl");
  if (fs::exists(box)) {
    require_file(sent.string(), (name + ".sent").c_str());
    return read_corpus(box.string(), sent.string());
  }
  if (fs::exists(jsonl)) return read_jsonl_corpus(jsonl.string());
  if (required) throw UsageError("no " + name + ".box/.sent or " + name + ".jsonl in " + dir.string());
  return {};
}

TrainConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets,
                           std::optional<std::size_t> epochs, std::optional<std::uint64_t> seed) {
  nlohmann::json j = nlohmann::json::object();
  if (!config_path.empty()) {
    require_file(config_path, "config file");
    std::ifstream in(config_path);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError({config_path + ": " + e.what()});
    }
    if (!j.is_object()) throw ConfigError({config_path + ": configuration must be a JSON object"});
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq), value = s.substr(eq + 1);
    auto parsed = nlohmann::json::parse(value, nullptr, false);
    j[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
  }
  if (epochs) j["epochs"] = *epochs;
  if (seed) j["seed"] = *seed;
  return train_config_from_json(j);
}

std::vector<std::string> problems_of(const ConfigError& e) { return e.problems(); }

// ---- commands ----------------------------------------------------------------

struct BuildVocabArgs {
  std::string boxes, sents, out;
  std::size_t word_limit = 20000;
  std::uint64_t field_min_count = 100;
};

int cmd_build_vocab(const BuildVocabArgs& a) {
  RunManifest man = RunManifest::begin("build-vocab");
  require_file(a.boxes, "--boxes file");
  require_file(a.sents, "--sents file");
  if (a.word_limit < 1) throw UsageError("--word-limit must be >= 1");
  const auto corpus = read_corpus(a.boxes, a.sents);
  const Vocabularies v = build_vocabularies(corpus, a.word_limit, a.field_min_count);
  fs::create_directories(a.out);
  const std::string wp = (fs::path(a.out) / "vocab.word").string(), fp = (fs::path(a.out) / "vocab.field").string();
  v.words.save(wp);
  v.fields.save(fp);
  std::cout << "words: " << v.words.size() << " (" << v.words.reserved_count() << " reserved)\n"
            << "fields: " << v.fields.size() << " (" << v.fields.reserved_count() << " reserved)\n";
  man.config = {{"word_limit", a.word_limit}, {"field_min_count", a.field_min_count}};
  man.inputs = {{"boxes", a.boxes}, {"sents", a.sents}};
  man.outputs = {{"vocab.word", wp}, {"vocab.field", fp}};
  man.finished_at = utc_timestamp();
  man.write(a.out);
  return 0;
}

struct TrainArgs {
  std::string config, data, out;
  std::string resume;
  std::vector<std::string> sets;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> stop_after_steps;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  RunManifest man = RunManifest::begin("train");
  const TrainConfig cfg = resolve_config(a.config, a.sets, a.epochs, a.seed);
  if (!fs::is_directory(a.data)) throw UsageError("--data directory not found: " + a.data);
  if (!a.resume.empty()) require_file(a.resume, "--resume checkpoint");
  const auto train_raw = load_split(a.data, "train", true);
  const auto valid_raw = load_split(a.data, "valid", false);
  if (train_raw.empty()) throw UsageError("training split in " + a.data + " is empty");

  Vocabularies vocab;
  const fs::path wv = fs::path(a.data) / "vocab.word", fv = fs::path(a.data) / "vocab.field";
  if (fs::exists(wv) && fs::exists(fv)) {
    vocab.words = Vocabulary::load(wv.string(), Vocabulary::Kind::kWord);
    vocab.fields = Vocabulary::load(fv.string(), Vocabulary::Kind::kField);
    man.inputs["vocab.word"] = wv.string();
    man.inputs["vocab.field"] = fv.string();
  } else {
    vocab = build_vocabularies(train_raw, cfg.word_limit, cfg.field_min_count);
  }
  const int cap = static_cast<int>(cfg.pos_cap);
  const auto train_set = make_examples(train_raw, vocab, cap);
  const auto valid_set = make_examples(valid_raw, vocab, cap);

  TrainOptions opts;
  opts.out_dir = a.out;
  if (!a.resume.empty()) opts.resume = a.resume;
  opts.stop_after_steps = a.stop_after_steps;
  if (!a.quiet) {
    opts.on_epoch = [](const EpochMetrics& m) { std::cout << metrics_line(m) << std::endl; };
  }
  const TrainResult r = train(cfg, vocab, train_set, valid_set, opts);

  if (r.interrupted) {
    std::cout << "stopped after step " << r.state.step << " (epoch " << r.state.epoch + 1 << ", batch "
              << r.state.batch_in_epoch << ")\n";
  } else if (!r.metrics.empty()) {
    std::printf("final train loss %.6f after %zu epochs, %llu steps\n", r.metrics.back().train_loss,
                r.metrics.back().epoch, static_cast<unsigned long long>(r.state.step));
  }
  nlohmann::json cj;
  to_json(cj, cfg);
  man.config = cj;
  man.seed = cfg.seed;
  man.inputs["data"] = a.data;
  if (!a.config.empty()) man.inputs["config"] = a.config;
  if (!a.resume.empty()) man.inputs["resume"] = a.resume;
  for (const char* f : {"last.ckpt", "best.ckpt", "metrics.jsonl", "timing.jsonl"}) {
    man.outputs[f] = (fs::path(a.out) / f).string();
  }
  man.finished_at = utc_timestamp();
  man.write(a.out);
  return 0;
}

struct GenerateArgs {
  std::string ckpt, boxes, out, dump_attention, vocab_dir;
  std::size_t beam = 5;
  std::size_t max_len = 60;
  double length_penalty = 0.0;
  bool no_unk_replace = false;
};

nlohmann::json matrix_json(const std::vector<std::vector<double>>& rows) {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& r : rows) m.push_back(r);
  return m;
}

int cmd_generate(const GenerateArgs& a) {
  RunManifest man = RunManifest::begin("generate");
  require_file(a.ckpt, "--ckpt checkpoint");
  require_file(a.boxes, "--boxes file");
  if (a.beam < 1) throw UsageError("--beam must be >= 1");
  if (a.max_len < 1) throw UsageError("--max-len must be >= 1");
  Checkpoint ck = load_checkpoint(a.ckpt);
  if (!a.vocab_dir.empty()) {
    const auto words = Vocabulary::load((fs::path(a.vocab_dir) / "vocab.word").string(), Vocabulary::Kind::kWord);
    const auto fields = Vocabulary::load((fs::path(a.vocab_dir) / "vocab.field").string(), Vocabulary::Kind::kField);
    if (!(words == ck.vocab.words) || !(fields == ck.vocab.fields)) {
      throw UsageError("vocabulary in " + a.vocab_dir + " does not match checkpoint " + a.ckpt);
    }
  }
  if (ck.vocab.words.size() != ck.model.config.word_vocab || ck.vocab.fields.size() != ck.model.config.field_vocab) {
    throw UsageError("checkpoint " + a.ckpt + " vocabulary does not match its model");
  }

  std::vector<RawExample> raw;
  for (auto& t : read_box_file(a.boxes)) raw.push_back({std::move(t), {}});
  const auto examples = make_examples(raw, ck.vocab, static_cast<int>(ck.model.config.pos_cap));

  GenerateOptions opts;
  opts.beam_size = a.beam;
  opts.max_len = a.max_len;
  opts.length_penalty = a.length_penalty;
  opts.replace_unk = !a.no_unk_replace;
  const auto gens = generate(ck.model, ck.vocab, examples, opts);

  std::vector<std::string> lines;
  std::size_t empty = 0;
  for (const auto& g : gens) {
    lines.push_back(join_tokens(g.words));
    if (g.empty_table) ++empty;
  }
  if (empty > 0) std::cerr << "warning: " << empty << " empty table(s) produced empty output lines\n";
  write_lines(a.out, lines);
  man.outputs["sentences"] = a.out;

  if (!a.dump_attention.empty()) {
    std::vector<std::string> dump;
    for (std::size_t i = 0; i < gens.size(); ++i) {
      const auto& g = gens[i];
      nlohmann::json j{{"line", i + 1},
                       {"table", examples[i].surface},
                       {"tokens", to_words(g.best.tokens, ck.vocab.words)},
                       {"output", g.words},
                       {"log_prob", g.best.log_prob},
                       {"alpha", matrix_json(g.best.trace.alpha)},
                       {"beta", matrix_json(g.best.trace.beta)},
                       {"gamma", matrix_json(g.best.trace.gamma)}};
      dump.push_back(j.dump());
    }
    write_lines(a.dump_attention, dump);
    man.outputs["attention"] = a.dump_attention;
  }
  man.config = {{"beam", a.beam},
                {"max_len", a.max_len},
                {"length_penalty", a.length_penalty},
                {"unk_replace", !a.no_unk_replace}};
  man.inputs = {{"ckpt", a.ckpt}, {"boxes", a.boxes}};
  man.finished_at = utc_timestamp();
  man.write(parent_dir(a.out));
  std::cout << "wrote " << lines.size() << " sentences to " << a.out << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string hyp, ref, out, config_id = "hyp", manifest_dir;
};

int cmd_evaluate(const EvaluateArgs& a) {
  RunManifest man = RunManifest::begin("evaluate");
  require_file(a.hyp, "--hyp file");
  require_file(a.ref, "--ref file");
  const auto hyp = read_token_lines(a.hyp);
  const auto ref = read_token_lines(a.ref);
  if (hyp.size() != ref.size()) {
    throw UsageError(a.hyp + " has " + std::to_string(hyp.size()) + " lines but " + a.ref + " has " +
                     std::to_string(ref.size()));
  }
  const ScoreReport r = score_corpus(a.config_id, hyp, ref);
  std::cout << format_reports({r}) << "(ROUGE-4 without stemming or stopword removal)\n";
  if (!a.out.empty()) {
    write_lines(a.out, {to_json(r).dump(2)});
    man.outputs["report"] = a.out;
  }
  man.config = {{"name", a.config_id}, {"rouge_stemming", false}};
  man.inputs = {{"hyp", a.hyp}, {"ref", a.ref}};
  man.finished_at = utc_timestamp();
  man.write(!a.manifest_dir.empty() ? a.manifest_dir : a.out.empty() ? "." : parent_dir(a.out));
  return 0;
}

struct DisorderArgs {
  std::string boxes, out;
  std::uint64_t seed = 1;
};

int cmd_disorder(const DisorderArgs& a) {
  RunManifest man = RunManifest::begin("disorder");
  require_file(a.boxes, "--boxes file");
  auto tables = read_box_file(a.boxes);
  for (std::size_t i = 0; i < tables.size(); ++i) tables[i] = shuffle_records(tables[i], derive_seed(a.seed, i));
  if (const fs::path dir = fs::path(a.out).parent_path(); !dir.empty()) fs::create_directories(dir);
  write_box_file(a.out, tables);
  man.seed = a.seed;
  man.inputs = {{"boxes", a.boxes}};
  man.outputs = {{"boxes", a.out}};
  man.finished_at = utc_timestamp();
  man.write(parent_dir(a.out));
  std::cout << "shuffled " << tables.size() << " tables into " << a.out << "\n";
  return 0;
}

struct GradcheckArgs {
  std::string dims = "tiny";
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  double floor = 1e-6;
  std::string manifest_dir = ".";
};

int cmd_gradcheck(const GradcheckArgs& a) {
  RunManifest man = RunManifest::begin("gradcheck");
  GradCheckDims dims;
  try {
    dims = gradcheck_dims(a.dims);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  GradCheckOptions opts;
  opts.tolerance = a.tolerance;
  opts.floor = a.floor;
  const auto results = run_model_gradcheck(dims, a.seed, opts);
  bool ok = true;
  double worst = 0.0;
  for (const auto& r : results) {
    std::printf("%-32s max rel err %.3e  %s\n", r.variant.c_str(), r.report.max_rel_error,
                r.report.passed() ? "ok" : "FAIL");
    for (const auto& e : r.report.entries) {
      if (e.flagged) {
        std::printf("    %-16s rel err %.3e at %zu (analytic %.10g, numeric %.10g)\n", e.name.c_str(),
                    e.max_rel_error, e.worst_index, e.worst_analytic, e.worst_numeric);
      }
    }
    ok = ok && r.report.passed();
    worst = std::max(worst, r.report.max_rel_error);
  }
  std::printf("gradcheck %s: %zu variants, worst relative error %.3e (tolerance %.1e)\n", ok ? "passed" : "FAILED",
              results.size(), worst, a.tolerance);
  man.config = {{"dims", a.dims}, {"tolerance", a.tolerance}, {"floor", a.floor}, {"step", opts.step}};
  man.seed = a.seed;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", worst);
  man.outputs = {{"passed", ok ? "true" : "false"}, {"worst_rel_error", buf},
                 {"variants", std::to_string(results.size())}};
  man.finished_at = utc_timestamp();
  man.write(a.manifest_dir);
  return ok ? 0 : 1;
}

struct MakeToyArgs {
  std::string out;
  std::size_t n = 50;
  std::uint64_t seed = 1;
};

// Training setup that overfits the 50-pair toy corpus within 500 epochs.
// The word limit is above the toy vocabulary, so nothing maps to <unk>.
nlohmann::json toy_train_config(std::uint64_t seed) {
  return {{"word_dim", 32},  {"field_dim", 16},       {"pos_dim", 5},         {"hidden", 64},
          {"batch_size", 10}, {"learning_rate", 0.003}, {"epochs", 500},       {"target_loss", 0.05},
          {"seed", seed},     {"word_limit", 5000},   {"field_min_count", 0}, {"max_decode_len", 30},
          {"grad_clip", 5.0}};
}

int cmd_make_toy(const MakeToyArgs& a) {
  RunManifest man = RunManifest::begin("make-toy");
  if (a.out.empty()) throw UsageError("missing --out");
  if (a.n < 1) throw UsageError("--n must be >= 1");
  const ToyCorpus toy = make_toy(a.n, a.seed);
  write_split(a.out, "train", toy.train);
  write_split(a.out, "valid", toy.valid);
  write_split(a.out, "test", toy.test);
  const std::string cfg_path = (fs::path(a.out) / "toy_config.json").string();
  write_lines(cfg_path, {toy_train_config(a.seed).dump(2)});
  man.seed = a.seed;
  man.config = {{"n", a.n}};
  for (const char* s : {"train", "valid", "test"}) {
    man.outputs[std::string(s) + ".box"] = (fs::path(a.out) / (std::string(s) + ".box")).string();
    man.outputs[std::string(s) + ".sent"] = (fs::path(a.out) / (std::string(s) + ".sent")).string();
  }
  man.outputs["toy_config.json"] = cfg_path;
  man.finished_at = utc_timestamp();
  man.write(a.out);
  std::cout << "wrote " << toy.train.box_lines.size() << " train, " << toy.valid.box_lines.size() << " valid, "
            << toy.test.box_lines.size() << " test pairs to " << a.out << "\n";
  return 0;
}

struct StatsArgs {
  std::string boxes, sents, manifest_dir = ".";
  bool json = false;
};

int cmd_stats(const StatsArgs& a) {
  RunManifest man = RunManifest::begin("stats");
  require_file(a.boxes, "--boxes file");
  require_file(a.sents, "--sents file");
  const CorpusStats s = corpus_stats(read_corpus(a.boxes, a.sents));
  if (a.json) {
    std::cout << nlohmann::json{{"examples", s.examples},
                                {"tokens_per_sentence", s.tokens_per_sentence},
                                {"table_tokens_per_sentence", s.table_tokens_per_sentence},
                                {"tokens_per_table", s.tokens_per_table},
                                {"fields_per_table", s.fields_per_table}}
                     .dump(2)
              << "\n";
  } else {
    std::printf("examples                    %zu\n", s.examples);
    std::printf("tokens per sentence         %.2f\n", s.tokens_per_sentence);
    std::printf("table tokens per sentence   %.2f\n", s.table_tokens_per_sentence);
    std::printf("tokens per table            %.2f\n", s.tokens_per_table);
    std::printf("fields per table            %.2f\n", s.fields_per_table);
  }
  man.inputs = {{"boxes", a.boxes}, {"sents", a.sents}};
  man.finished_at = utc_timestamp();
  man.write(a.manifest_dir);
  return 0;
}

struct ExperimentArgs {
  std::string data, config, out, kind = "ablation";
  std::vector<std::string> sets;
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

int cmd_experiment(const ExperimentArgs& a) {
  RunManifest man = RunManifest::begin("experiment-" + a.kind);
  if (!fs::is_directory(a.data)) throw UsageError("--data directory not found: " + a.data);
  if (a.seeds.empty()) throw UsageError("--seeds needs at least one seed");
  const TrainConfig base = resolve_config(a.config, a.sets, std::nullopt, std::nullopt);
  ExperimentData data;
  data.train = load_split(a.data, "train", true);
  data.valid = load_split(a.data, "valid", false);
  data.test = load_split(a.data, "test", true);

  std::string text;
  nlohmann::json report;
  if (a.kind == "ablation") {
    const auto rows = run_ablation(data, standard_ablation_grid(base), a.seeds);
    text = format_ablation(rows);
    report = ablation_json(rows);
  } else if (a.kind == "disorder") {
    auto grid = standard_ablation_grid(base);
    const std::vector<ExperimentConfig> configs{grid[0], grid[4]};
    const auto rows = run_disorder_experiment(data, configs, a.seeds);
    text = format_disorder(rows);
    report = disorder_json(rows);
  } else {
    throw UsageError("--kind must be ablation or disorder");
  }
  std::cout << text;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_lines((fs::path(a.out) / ("report." + a.kind + ".txt")).string(), {text});
    write_lines((fs::path(a.out) / ("report." + a.kind + ".json")).string(), {report.dump(2)});
    man.outputs = {{"report", (fs::path(a.out) / ("report." + a.kind + ".json")).string()}};
  }
  nlohmann::json cj;
  to_json(cj, base);
  man.config = cj;
  man.inputs = {{"data", a.data}};
  man.finished_at = utc_timestamp();
  man.write(a.out.empty() ? "." : a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();

  CLI::App app{"structgen: structure-aware table-to-text generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  BuildVocabArgs bv;
  auto* c_bv = app.add_subcommand("build-vocab", "Build word and field vocabularies");
  c_bv->add_option("--boxes", bv.boxes, "Table file (.box)")->required();
  c_bv->add_option("--sents", bv.sents, "Description file (.sent)")->required();
  c_bv->add_option("--out", bv.out, "Output directory")->required();
  c_bv->add_option("--word-limit", bv.word_limit, "Most frequent words to keep")->capture_default_str();
  c_bv->add_option("--field-min-count", bv.field_min_count, "Keep fields seen more often than this")
      ->capture_default_str();

  TrainArgs tr;
  std::size_t tr_epochs = 0;
  std::uint64_t tr_seed = 0, tr_stop = 0;
  auto* c_tr = app.add_subcommand("train", "Train a model");
  c_tr->add_option("--config", tr.config, "JSON config file");
  c_tr->add_option("--data", tr.data, "Directory with train.box/.sent (and optional valid.*)")->required();
  c_tr->add_option("--out", tr.out, "Output directory")->required();
  c_tr->add_option("--resume", tr.resume, "Checkpoint to continue from");
  c_tr->add_option("--set", tr.sets, "Override a config key (key=value)");
  auto* o_epochs = c_tr->add_option("--epochs", tr_epochs, "Override epochs");
  auto* o_seed = c_tr->add_option("--seed", tr_seed, "Override seed");
  auto* o_stop = c_tr->add_option("--stop-after-steps", tr_stop, "Stop (as if interrupted) after this many steps");
  c_tr->add_flag("--quiet", tr.quiet, "Do not print per-epoch metrics");

  GenerateArgs ge;
  auto* c_ge = app.add_subcommand("generate", "Generate descriptions for tables");
  c_ge->add_option("--ckpt", ge.ckpt, "Checkpoint")->required();
  c_ge->add_option("--boxes", ge.boxes, "Table file (.box)")->required();
  c_ge->add_option("--out", ge.out, "Output sentence file")->required();
  c_ge->add_option("--beam", ge.beam, "Beam size (1 = greedy)")->capture_default_str();
  c_ge->add_option("--max-len", ge.max_len, "Maximum tokens per sentence")->capture_default_str();
  c_ge->add_option("--length-penalty", ge.length_penalty, "Length normalisation exponent")->capture_default_str();
  c_ge->add_option("--dump-attention", ge.dump_attention, "Write per-step attention as JSON lines");
  c_ge->add_option("--vocab", ge.vocab_dir, "Vocabulary directory to check against the checkpoint");
  c_ge->add_flag("--no-unk-replace", ge.no_unk_replace, "Keep <unk> tokens");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Score hypotheses with BLEU-4 and ROUGE-4");
  c_ev->add_option("--hyp", ev.hyp, "Hypothesis file")->required();
  c_ev->add_option("--ref", ev.ref, "Reference file")->required();
  c_ev->add_option("--out", ev.out, "Write the report as JSON");
  c_ev->add_option("--name", ev.config_id, "Row label")->capture_default_str();
  c_ev->add_option("--manifest-dir", ev.manifest_dir, "Where to write the run manifest (default: next to --out, else .)");

  DisorderArgs di;
  auto* c_di = app.add_subcommand("disorder", "Shuffle the record order of every table");
  c_di->add_option("--boxes", di.boxes, "Table file (.box)")->required();
  c_di->add_option("--seed", di.seed, "Shuffle seed")->capture_default_str();
  c_di->add_option("--out", di.out, "Output table file")->required();

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
  c_gc->add_option("--dims", gc.dims, "tiny or small")->capture_default_str();
  c_gc->add_option("--seed", gc.seed, "Seed for parameters and data")->capture_default_str();
  c_gc->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
  c_gc->add_option("--floor", gc.floor, "Relative error denominator floor")->capture_default_str();
  c_gc->add_option("--manifest-dir", gc.manifest_dir, "Where to write the run manifest")->capture_default_str();

  MakeToyArgs mt;
  auto* c_mt = app.add_subcommand("make-toy", "Write a synthetic biography corpus");
  c_mt->add_option("--out", mt.out, "Output directory")->required();
  c_mt->add_option("--n", mt.n, "Training pairs")->capture_default_str();
  c_mt->add_option("--seed", mt.seed, "Seed")->capture_default_str();

  StatsArgs st;
  auto* c_st = app.add_subcommand("stats", "Corpus statistics");
  c_st->add_option("--boxes", st.boxes, "Table file (.box)")->required();
  c_st->add_option("--sents", st.sents, "Description file (.sent)")->required();
  c_st->add_flag("--json", st.json, "Print JSON");
  c_st->add_option("--manifest-dir", st.manifest_dir, "Where to write the run manifest")->capture_default_str();

  ExperimentArgs ex;
  auto* c_ex = app.add_subcommand("experiment", "Ablation grid or disordered-table experiment");
  c_ex->add_option("--data", ex.data, "Directory with train/valid/test splits")->required();
  c_ex->add_option("--kind", ex.kind, "ablation or disorder")->capture_default_str();
  c_ex->add_option("--config", ex.config, "Base JSON config");
  c_ex->add_option("--set", ex.sets, "Override a config key (key=value)");
  c_ex->add_option("--seeds", ex.seeds, "Seeds")->delimiter(',')->capture_default_str();
  c_ex->add_option("--out", ex.out, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_bv) return cmd_build_vocab(bv);
    if (*c_tr) {
      if (*o_epochs) tr.epochs = tr_epochs;
      if (*o_seed) tr.seed = tr_seed;
      if (*o_stop) tr.stop_after_steps = tr_stop;
      return cmd_train(tr);
    }
    if (*c_ge) return cmd_generate(ge);
    if (*c_ev) return cmd_evaluate(ev);
    if (*c_di) return cmd_disorder(di);
    if (*c_gc) return cmd_gradcheck(gc);
    if (*c_mt) return cmd_make_toy(mt);
    if (*c_st) return cmd_stats(st);
    if (*c_ex) return cmd_experiment(ex);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid configuration\n";
    for (const auto& p : problems_of(e)) std::cerr << "  - " << p << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
