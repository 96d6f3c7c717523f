#include "structgen/model.hpp"

#include <numeric>

#include "structgen/errors.hpp"
#include "structgen/random.hpp"

namespace structgen {

std::string to_string(EncoderMode m) {
  switch (m) {
    case EncoderMode::kWordOnly: return "word-only";
    case EncoderMode::kConcatField: return "concat-field";
    case EncoderMode::kConcatFieldPos: return "concat-input";
    case EncoderMode::kFieldGate: return "fieldgate";
    case EncoderMode::kFieldGateConcat: return "fieldgate+concat";
  }
  return "?";
}

std::string to_string(AttentionMode m) { return m == AttentionMode::kWord ? "word" : "dual"; }

std::string to_string(DecoderInit m) { return m == DecoderInit::kEncoderFinal ? "encoder" : "zero"; }

std::optional<EncoderMode> parse_encoder_mode(const std::string& s) {
  for (auto m : {EncoderMode::kWordOnly, EncoderMode::kConcatField, EncoderMode::kConcatFieldPos,
                 EncoderMode::kFieldGate, EncoderMode::kFieldGateConcat}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

std::optional<AttentionMode> parse_attention_mode(const std::string& s) {
  if (s == "word") return AttentionMode::kWord;
  if (s == "dual") return AttentionMode::kDual;
  return std::nullopt;
}

std::optional<DecoderInit> parse_decoder_init(const std::string& s) {
  if (s == "encoder") return DecoderInit::kEncoderFinal;
  if (s == "zero") return DecoderInit::kZero;
  return std::nullopt;
}

bool uses_field_gate(EncoderMode m) {
  return m == EncoderMode::kFieldGate || m == EncoderMode::kFieldGateConcat;
}

bool concatenates_field(EncoderMode m) {
  return m == EncoderMode::kConcatField || m == EncoderMode::kConcatFieldPos ||
         m == EncoderMode::kFieldGateConcat;
}

bool concatenates_position(EncoderMode m) {
  return m == EncoderMode::kConcatFieldPos || m == EncoderMode::kFieldGateConcat;
}

std::size_t ModelConfig::encoder_input_dim() const {
  std::size_t d = word_dim;
  if (concatenates_field(encoder_mode)) d += field_dim;
  if (concatenates_position(encoder_mode)) d += 2 * pos_dim;
  return d;
}

bool ModelConfig::needs_field_embeddings() const {
  return encoder_mode != EncoderMode::kWordOnly || attention == AttentionMode::kDual;
}

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> p;
  auto positive = [&p](const char* name, std::size_t v) {
    if (v < 1) p.push_back(std::string(name) + " must be >= 1");
  };
  positive("word_vocab", word_vocab);
  positive("word_dim", word_dim);
  positive("hidden", hidden);
  if (needs_field_embeddings()) {
    positive("field_vocab", field_vocab);
    positive("field_dim", field_dim);
    positive("pos_dim", pos_dim);
    positive("pos_cap", pos_cap);
  }
  if (word_vocab > 0 && word_vocab < 4) p.push_back("word_vocab must include the 4 reserved tokens");
  return p;
}

// ---- ModelParams -----------------------------------------------------------

Tensor& ModelParams::add(const std::string& name, Shape shape) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  index_.emplace(name, tensors_.size());
  names_.push_back(name);
  tensors_.emplace_back(std::move(shape));
  return tensors_.back();
}

Tensor& ModelParams::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return tensors_[it->second];
}

const Tensor& ModelParams::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return tensors_[it->second];
}

std::size_t ModelParams::total_size() const {
  return std::accumulate(tensors_.begin(), tensors_.end(), std::size_t{0},
                         [](std::size_t n, const Tensor& t) { return n + t.size(); });
}

std::vector<NamedTensor> ModelParams::refs() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < names_.size(); ++i) out.push_back({names_[i], &tensors_[i]});
  return out;
}

void ModelParams::zero_grad() {
  for (auto& t : tensors_) {
    t.ensure_grad();
    t.zero_grad();
  }
}

// ---- Model -----------------------------------------------------------------

Model Model::initialize(const ModelConfig& config, std::uint64_t seed) {
  if (auto problems = config.validate(); !problems.empty()) throw ConfigError(std::move(problems));

  Model m;
  m.config = config;
  const std::size_t n = config.hidden;
  const std::size_t a = config.attention_dim();
  auto& p = m.params;

  p.add(pname::kWordEmb, {config.word_vocab, config.word_dim});
  if (config.needs_field_embeddings()) {
    p.add(pname::kFieldEmb, {config.field_vocab, config.field_dim});
    p.add(pname::kPosBeginEmb, {config.pos_cap, config.pos_dim});
    p.add(pname::kPosEndEmb, {config.pos_cap, config.pos_dim});
  }
  p.add(pname::kEncW, {4 * n, config.encoder_input_dim() + n});
  p.add(pname::kEncB, {4 * n});
  if (uses_field_gate(config.encoder_mode)) {
    p.add(pname::kGateW, {2 * n, config.z_dim()});
    p.add(pname::kGateB, {2 * n});
  }
  if (!config.tie_embeddings) p.add(pname::kDecWordEmb, {config.word_vocab, config.word_dim});
  p.add(pname::kDecW, {4 * n, config.word_dim + n});
  p.add(pname::kDecB, {4 * n});
  p.add(pname::kAttP, {a, n});
  p.add(pname::kAttQ, {a, n});
  if (config.attention == AttentionMode::kDual) {
    p.add(pname::kAttX, {a, config.z_dim()});
    p.add(pname::kAttY, {a, n});
  }
  p.add(pname::kOutT, {n, 2 * n});
  p.add(pname::kOutS, {config.word_vocab, n});

  Rng rng(seed);
  for (const auto& name : p.names()) {
    Tensor& t = p.get(name);
    const bool is_bias = name.find(".b_") != std::string::npos;
    if (is_bias) continue;
    for (double& v : t.values()) v = rng.uniform(-0.08, 0.08);
  }
  for (const auto* bias : {&pname::kEncB, &pname::kDecB}) {
    Tensor& b = p.get(*bias);
    for (std::size_t i = n; i < 2 * n; ++i) b[i] = 1.0;
  }
  return m;
}

namespace {

template <typename ModelT, typename Leaf>
BoundModel bind_impl(ModelT& model, ad::Tape& tape, Leaf leaf) {
  BoundModel b;
  b.config = &model.config;
  b.tape = &tape;
  auto& p = model.params;
  b.word_emb = leaf(p.get(pname::kWordEmb));
  if (p.contains(pname::kFieldEmb)) {
    b.field_emb = leaf(p.get(pname::kFieldEmb));
    b.pos_begin_emb = leaf(p.get(pname::kPosBeginEmb));
    b.pos_end_emb = leaf(p.get(pname::kPosEndEmb));
  }
  b.encoder = {leaf(p.get(pname::kEncW)), leaf(p.get(pname::kEncB))};
  if (p.contains(pname::kGateW)) {
    b.field_gate = FieldGateWeights{leaf(p.get(pname::kGateW)), leaf(p.get(pname::kGateB))};
  }
  b.decoder_word_emb = p.contains(pname::kDecWordEmb) ? leaf(p.get(pname::kDecWordEmb)) : b.word_emb;
  b.decoder = {leaf(p.get(pname::kDecW)), leaf(p.get(pname::kDecB))};
  b.att_p = leaf(p.get(pname::kAttP));
  b.att_q = leaf(p.get(pname::kAttQ));
  if (p.contains(pname::kAttX)) {
    b.att_x = leaf(p.get(pname::kAttX));
    b.att_y = leaf(p.get(pname::kAttY));
  }
  b.out_t = leaf(p.get(pname::kOutT));
  b.out_s = leaf(p.get(pname::kOutS));
  return b;
}

}  // namespace

BoundModel bind(Model& model, ad::Tape& tape) {
  return bind_impl(model, tape, [&tape](Tensor& t) { return tape.param(t); });
}

BoundModel bind(const Model& model, ad::Tape& tape) {
  return bind_impl(model, tape, [&tape](const Tensor& t) { return tape.frozen(t); });
}

}  // namespace structgen
