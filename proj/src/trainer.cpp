#include "structgen/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "structgen/checkpoint.hpp"
#include "structgen/decoder.hpp"
#include "structgen/encoder.hpp"
#include "structgen/errors.hpp"
#include "structgen/random.hpp"

namespace structgen {

namespace fs = std::filesystem;

// ---- config ------------------------------------------------------------------

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> p;
  auto positive = [&](const char* name, std::size_t v) {
    if (v < 1) p.push_back(std::string(name) + " must be >= 1");
  };
  positive("word_dim", word_dim);
  positive("field_dim", field_dim);
  positive("pos_dim", pos_dim);
  positive("pos_cap", pos_cap);
  positive("hidden", hidden);
  positive("batch_size", batch_size);
  positive("epochs", epochs);
  positive("word_limit", word_limit);
  positive("max_decode_len", max_decode_len);
  positive("beam_size", beam_size);
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) p.push_back("learning_rate must be > 0");
  if (optimizer != "adam") p.push_back("optimizer must be \"adam\" (got \"" + optimizer + "\")");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) p.push_back("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) p.push_back("adam_beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) p.push_back("adam_eps must be > 0");
  if (!(grad_clip >= 0.0)) p.push_back("grad_clip must be >= 0");
  if (!(target_loss >= 0.0)) p.push_back("target_loss must be >= 0");
  if (!parse_encoder_mode(encoder_mode)) {
    p.push_back("encoder_mode must be one of word-only, concat-field, concat-input, fieldgate, "
                "fieldgate+concat (got \"" + encoder_mode + "\")");
  }
  if (!parse_attention_mode(attention)) p.push_back("attention must be word or dual (got \"" + attention + "\")");
  if (!parse_decoder_init(decoder_init)) {
    p.push_back("decoder_init must be encoder or zero (got \"" + decoder_init + "\")");
  }
  if (attention == "dual" && encoder_mode == "word-only") {
    p.push_back("dual attention needs field embeddings; word-only encoder has none");
  }
  return p;
}

ModelConfig TrainConfig::model_config(const Vocabularies& vocab) const {
  ModelConfig c;
  c.word_vocab = vocab.words.size();
  c.field_vocab = vocab.fields.size();
  c.word_dim = word_dim;
  c.field_dim = field_dim;
  c.pos_dim = pos_dim;
  c.pos_cap = pos_cap;
  c.hidden = hidden;
  c.attn_dim = attn_dim;
  c.encoder_mode = parse_encoder_mode(encoder_mode).value();
  c.attention = parse_attention_mode(attention).value();
  c.tie_embeddings = tie_embeddings;
  c.decoder_init = parse_decoder_init(decoder_init).value();
  return c;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"word_dim", c.word_dim},
      {"field_dim", c.field_dim},
      {"pos_dim", c.pos_dim},
      {"pos_cap", c.pos_cap},
      {"hidden", c.hidden},
      {"attn_dim", c.attn_dim},
      {"encoder_mode", c.encoder_mode},
      {"attention", c.attention},
      {"tie_embeddings", c.tie_embeddings},
      {"decoder_init", c.decoder_init},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"optimizer", c.optimizer},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"grad_clip", c.grad_clip},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"target_loss", c.target_loss},
      {"checkpoint_every", c.checkpoint_every},
      {"word_limit", c.word_limit},
      {"field_min_count", c.field_min_count},
      {"max_decode_len", c.max_decode_len},
      {"beam_size", c.beam_size},
  };
}

namespace {

template <typename T>
void read_field(const nlohmann::json& v, const std::string& key, T& out, std::vector<std::string>& problems) {
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned())) {
        problems.push_back(key + ": expected a non-negative integer");
        return;
      }
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) {
        problems.push_back(key + ": expected true or false");
        return;
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) {
        problems.push_back(key + ": expected a number");
        return;
      }
    } else {
      if (!v.is_string()) {
        problems.push_back(key + ": expected a string");
        return;
      }
    }
    out = v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    problems.push_back(key + ": " + e.what());
  }
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError({"configuration must be a JSON object"});
  TrainConfig c = base;
  std::vector<std::string> problems;
  for (const auto& [key, v] : j.items()) {
    if (key == "word_dim") read_field(v, key, c.word_dim, problems);
    else if (key == "field_dim") read_field(v, key, c.field_dim, problems);
    else if (key == "pos_dim") read_field(v, key, c.pos_dim, problems);
    else if (key == "pos_cap") read_field(v, key, c.pos_cap, problems);
    else if (key == "hidden") read_field(v, key, c.hidden, problems);
    else if (key == "attn_dim") read_field(v, key, c.attn_dim, problems);
    else if (key == "encoder_mode") read_field(v, key, c.encoder_mode, problems);
    else if (key == "attention") read_field(v, key, c.attention, problems);
    else if (key == "tie_embeddings") read_field(v, key, c.tie_embeddings, problems);
    else if (key == "decoder_init") read_field(v, key, c.decoder_init, problems);
    else if (key == "batch_size") read_field(v, key, c.batch_size, problems);
    else if (key == "learning_rate") read_field(v, key, c.learning_rate, problems);
    else if (key == "optimizer") read_field(v, key, c.optimizer, problems);
    else if (key == "adam_beta1") read_field(v, key, c.adam_beta1, problems);
    else if (key == "adam_beta2") read_field(v, key, c.adam_beta2, problems);
    else if (key == "adam_eps") read_field(v, key, c.adam_eps, problems);
    else if (key == "grad_clip") read_field(v, key, c.grad_clip, problems);
    else if (key == "epochs") read_field(v, key, c.epochs, problems);
    else if (key == "seed") read_field(v, key, c.seed, problems);
    else if (key == "target_loss") read_field(v, key, c.target_loss, problems);
    else if (key == "checkpoint_every") read_field(v, key, c.checkpoint_every, problems);
    else if (key == "word_limit") read_field(v, key, c.word_limit, problems);
    else if (key == "field_min_count") read_field(v, key, c.field_min_count, problems);
    else if (key == "max_decode_len") read_field(v, key, c.max_decode_len, problems);
    else if (key == "beam_size") read_field(v, key, c.beam_size, problems);
    else problems.push_back(key + ": unknown key");
  }
  for (auto& p : c.validate()) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

TrainConfig load_train_config(const std::string& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return train_config_from_json(j, base);
}

// ---- loss --------------------------------------------------------------------

SequenceNll example_nll(const BoundModel& m, std::span<const PositionedToken> table,
                        std::span<const WordId> decoder_input, std::span<const WordId> decoder_target) {
  if (decoder_input.size() != decoder_target.size()) {
    throw ShapeError("example_nll: decoder input has " + std::to_string(decoder_input.size()) +
                     " steps, target has " + std::to_string(decoder_target.size()));
  }
  const EncoderOutput enc = encode_table(m, table);
  const AttentionMemory memory = prepare_attention(m, enc);
  LstmState state = initial_decoder_state(m, enc);
  std::vector<ad::Var> terms;
  terms.reserve(decoder_input.size());
  for (std::size_t t = 0; t < decoder_input.size(); ++t) {
    if (decoder_target[t] == word_ids::kPad) continue;
    const StepOutput step = decode_step(m, decoder_input[t], state, memory);
    state = step.state;
    terms.push_back(ad::cross_entropy(step.logits, static_cast<std::size_t>(decoder_target[t])));
  }
  if (terms.empty()) return {m.tape->constant(Tensor::scalar(0.0)), 0};
  return {ad::add_n(terms), terms.size()};
}

namespace {

struct BatchLoss {
  ad::Var mean;
  std::size_t tokens = 0;
};

BatchLoss batch_loss(const Batch& batch, const BoundModel& m) {
  std::vector<ad::Var> totals;
  std::size_t tokens = 0;
  std::vector<PositionedToken> table;
  for (std::size_t r = 0; r < batch.size; ++r) {
    table.clear();
    for (std::size_t c = 0; c < batch.table_lengths[r]; ++c) table.push_back(batch.table_token(r, c));
    const std::size_t steps = batch.target_lengths[r];
    const auto off = static_cast<std::ptrdiff_t>(r * batch.steps);
    std::span<const WordId> in(batch.decoder_input.data() + off, steps);
    std::span<const WordId> tgt(batch.decoder_target.data() + off, steps);
    if (steps == 0) continue;
    SequenceNll nll = example_nll(m, table, in, tgt);
    if (nll.tokens == 0) continue;
    totals.push_back(nll.total);
    tokens += nll.tokens;
  }
  if (tokens == 0) throw std::invalid_argument("sequence_loss: every target position is padding");
  return {ad::scale(ad::add_n(totals), 1.0 / static_cast<double>(tokens)), tokens};
}

}  // namespace

ad::Var sequence_loss(const Batch& batch, const BoundModel& m) { return batch_loss(batch, m).mean; }

// ---- optimiser ---------------------------------------------------------------

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState s;
  for (const auto& name : params.names()) {
    const std::size_t n = params.get(name).size();
    s.m.emplace_back(n, 0.0);
    s.v.emplace_back(n, 0.0);
  }
  return s;
}

void adam_step(ModelParams& params, AdamState& state, double lr, const AdamHyper& hyper) {
  const auto& names = params.names();
  if (state.m.size() != names.size() || state.v.size() != names.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match the parameter list");
  }
  for (const auto& name : names) {
    const Tensor& t = params.get(name);
    if (!t.has_grad()) continue;
    const auto g = t.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        std::ostringstream msg;
        msg << "non-finite gradient in parameter " << name << " " << shape_to_string(t.shape()) << " at flat index "
            << i << " (value " << g[i] << ", optimizer step " << state.step + 1 << ")";
        throw NumericError(msg.str());
      }
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < names.size(); ++p) {
    Tensor& t = params.get(names[p]);
    auto theta = t.values();
    auto& m = state.m[p];
    auto& v = state.v[p];
    const bool has = t.has_grad();
    const std::span<const double> g = has ? std::span<const double>(t.grad()) : std::span<const double>();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = has ? g[i] : 0.0;
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
}

double clip_grad_norm(ModelParams& params, double max_norm) {
  double sq = 0.0;
  for (const auto& name : params.names()) {
    const Tensor& t = params.get(name);
    if (!t.has_grad()) continue;
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    // Slightly under the exact ratio so rounding cannot leave the norm above max_norm.
    const double s = max_norm / norm * (1.0 - 1e-12);
    for (const auto& name : params.names()) {
      Tensor& t = params.get(name);
      if (!t.has_grad()) continue;
      for (double& g : t.grad()) g *= s;
    }
  }
  return norm;
}

// ---- loop --------------------------------------------------------------------

double evaluate_loss(const Model& model, const std::vector<Example>& examples, std::size_t batch_size) {
  if (examples.empty()) throw std::invalid_argument("evaluate_loss: no examples");
  double sum = 0.0;
  std::size_t tokens = 0;
  for (const Batch& batch : make_batches(examples, batch_size, std::nullopt)) {
    ad::Tape tape(ad::Tape::Mode::kNoGrad);
    const BoundModel m = bind(model, tape);
    const BatchLoss loss = batch_loss(batch, m);
    sum += loss.mean.item() * static_cast<double>(loss.tokens);
    tokens += loss.tokens;
  }
  return sum / static_cast<double>(tokens);
}

std::string metrics_line(const EpochMetrics& m) {
  nlohmann::json j{{"epoch", m.epoch}, {"step", m.step}, {"train_loss", m.train_loss}};
  j["valid_loss"] = m.valid_loss ? nlohmann::json(*m.valid_loss) : nlohmann::json(nullptr);
  return j.dump();
}

namespace {

constexpr std::uint64_t kInitSalt = 0x1417;

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch) {
  return derive_seed(seed, static_cast<std::uint64_t>(epoch) + 1);
}

std::vector<EpochMetrics> read_metrics(const fs::path& path, std::size_t completed_epochs) {
  std::vector<EpochMetrics> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw IoError(path.string(), "malformed metrics line: " + line);
    EpochMetrics m;
    m.epoch = j.at("epoch");
    m.step = j.at("step");
    m.train_loss = j.at("train_loss");
    if (!j.at("valid_loss").is_null()) m.valid_loss = j.at("valid_loss").get<double>();
    if (m.epoch <= completed_epochs) out.push_back(m);
  }
  return out;
}

void write_metrics(const fs::path& path, const std::vector<EpochMetrics>& metrics) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError(tmp.string(), "cannot open for writing");
    for (const auto& m : metrics) out << metrics_line(m) << '\n';
    if (!out) throw IoError(tmp.string(), "write failed");
  }
  fs::rename(tmp, path);
}

void append_timing(const fs::path& path, std::size_t epoch, double seconds) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << nlohmann::json{{"epoch", epoch}, {"wall_time", seconds}}.dump() << '\n';
}

bool same_layout(const ModelParams& a, const ModelParams& b) {
  if (a.names() != b.names()) return false;
  for (const auto& n : a.names()) {
    if (a.get(n).shape() != b.get(n).shape()) return false;
  }
  return true;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Vocabularies& vocab, const std::vector<Example>& train_set,
                  const std::vector<Example>& valid_set, const TrainOptions& options) {
  if (auto problems = config.validate(); !problems.empty()) throw ConfigError(std::move(problems));
  if (train_set.empty()) throw std::invalid_argument("train: training corpus is empty");

  const ModelConfig mc = config.model_config(vocab);
  TrainResult r;
  r.vocab = vocab;
  r.model = Model::initialize(mc, derive_seed(config.seed, kInitSalt));

  const bool to_disk = !options.out_dir.empty();
  const fs::path dir = options.out_dir;
  if (to_disk) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), "cannot create output directory: " + ec.message());
  }
  const fs::path last_path = dir / "last.ckpt";
  const fs::path best_path = dir / "best.ckpt";
  const fs::path metrics_path = dir / "metrics.jsonl";
  const fs::path timing_path = dir / "timing.jsonl";

  if (options.resume) {
    Checkpoint ck = load_checkpoint(*options.resume);
    if (!(ck.vocab.words == vocab.words) || !(ck.vocab.fields == vocab.fields)) {
      throw ConfigError({"checkpoint " + *options.resume + " was trained with different vocabularies"});
    }
    if (!same_layout(ck.model.params, r.model.params)) {
      throw ConfigError({"checkpoint " + *options.resume + " does not match the configured model shape"});
    }
    r.model = std::move(ck.model);
    r.adam = std::move(ck.adam);
    r.state = ck.state;
    r.best_model = r.model;
    if (to_disk) {
      r.metrics = read_metrics(metrics_path, r.state.epoch);
      if (fs::exists(best_path)) r.best_model = load_checkpoint(best_path.string()).model;
    }
  } else {
    r.adam = AdamState::for_params(r.model.params);
    r.best_model = r.model;
    if (to_disk) {
      std::error_code ec;
      fs::remove(timing_path, ec);
      write_metrics(metrics_path, {});
    }
  }

  const AdamHyper hyper{config.adam_beta1, config.adam_beta2, config.adam_eps};
  auto rng_state = [&] { return Rng(epoch_shuffle_seed(config.seed, r.state.epoch)).state(); };
  auto save_last = [&] {
    if (to_disk) save_checkpoint(last_path.string(), config, vocab, r.model, r.adam, r.state, rng_state());
  };

  bool done = false;
  if (r.state.epoch > 0 && config.target_loss > 0.0 && !r.metrics.empty() &&
      r.metrics.back().train_loss < config.target_loss && r.state.batch_in_epoch == 0) {
    done = true;
  }

  while (!done && r.state.epoch < config.epochs) {
    const auto started = std::chrono::steady_clock::now();
    const std::vector<Batch> batches =
        make_batches(train_set, config.batch_size, epoch_shuffle_seed(config.seed, r.state.epoch));

    for (std::size_t b = r.state.batch_in_epoch; b < batches.size(); ++b) {
      if (options.stop_after_steps && r.state.step >= *options.stop_after_steps) {
        save_last();
        r.interrupted = true;
        return r;
      }
      r.model.params.zero_grad();
      ad::Tape tape(ad::Tape::Mode::kGrad);
      const BoundModel m = bind(r.model, tape);
      const BatchLoss loss = batch_loss(batches[b], m);
      const double value = loss.mean.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at step " + std::to_string(r.state.step + 1) + " (epoch " +
                           std::to_string(r.state.epoch + 1) + ", batch " + std::to_string(b) + ")");
      }
      tape.backward(loss.mean);
      if (config.grad_clip > 0.0) clip_grad_norm(r.model.params, config.grad_clip);
      adam_step(r.model.params, r.adam, config.learning_rate, hyper);

      r.state.epoch_loss_sum += value * static_cast<double>(loss.tokens);
      r.state.epoch_tokens += loss.tokens;
      r.state.step += 1;
      r.state.batch_in_epoch = b + 1;
      if (config.checkpoint_every > 0 && r.state.step % config.checkpoint_every == 0) save_last();
    }
    r.model.params.zero_grad();

    EpochMetrics em;
    em.epoch = r.state.epoch + 1;
    em.step = r.state.step;
    em.train_loss = r.state.epoch_loss_sum / static_cast<double>(r.state.epoch_tokens);
    if (!valid_set.empty()) em.valid_loss = evaluate_loss(r.model, valid_set, config.batch_size);
    r.metrics.push_back(em);

    const double criterion = em.valid_loss.value_or(em.train_loss);
    const bool improved = !r.state.best_loss || criterion < *r.state.best_loss;
    if (improved) {
      r.state.best_loss = criterion;
      r.best_model = r.model;
    }

    r.state.epoch += 1;
    r.state.batch_in_epoch = 0;
    r.state.epoch_loss_sum = 0.0;
    r.state.epoch_tokens = 0;

    if (to_disk) {
      if (improved) save_checkpoint(best_path.string(), config, vocab, r.model, r.adam, r.state, rng_state());
      save_last();
      write_metrics(metrics_path, r.metrics);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      append_timing(timing_path, em.epoch, secs);
    }
    if (options.on_epoch) options.on_epoch(em);
    if (config.target_loss > 0.0 && em.train_loss < config.target_loss) done = true;
  }
  return r;
}

}  // namespace structgen
