#include "structgen/model_check.hpp"

#include <stdexcept>

#include "structgen/corpus.hpp"
#include "structgen/random.hpp"
#include "structgen/trainer.hpp"

namespace structgen {

GradCheckDims gradcheck_dims(const std::string& name) {
  if (name == "tiny") return {};
  if (name == "small") return {50, 10, 12, 8, 3, 6, 16, 10, 5};
  throw std::invalid_argument("unknown gradcheck dims '" + name + "' (expected tiny or small)");
}

std::vector<ModelGradCheck> run_model_gradcheck(const GradCheckDims& dims, std::uint64_t seed,
                                                const GradCheckOptions& options) {
  struct Variant {
    EncoderMode enc;
    AttentionMode att;
    bool tie;
    DecoderInit init;
  };
  std::vector<Variant> variants;
  for (EncoderMode e : {EncoderMode::kWordOnly, EncoderMode::kConcatField, EncoderMode::kConcatFieldPos,
                        EncoderMode::kFieldGate, EncoderMode::kFieldGateConcat}) {
    variants.push_back({e, AttentionMode::kWord, true, DecoderInit::kEncoderFinal});
    if (e != EncoderMode::kWordOnly) variants.push_back({e, AttentionMode::kDual, true, DecoderInit::kEncoderFinal});
  }
  variants.push_back({EncoderMode::kFieldGate, AttentionMode::kDual, false, DecoderInit::kZero});

  Rng data_rng(derive_seed(seed, 1));
  std::vector<PositionedToken> table;
  for (std::size_t i = 0; i < dims.table_len; ++i) {
    PositionedToken t;
    t.word = static_cast<WordId>(1 + data_rng.uniform_index(dims.vocab - 1));
    t.field = static_cast<FieldId>(1 + data_rng.uniform_index(dims.field_vocab - 1));
    // Some positions past the cap exercise the clamping.
    t.pos_begin = static_cast<int>(1 + data_rng.uniform_index(dims.pos_cap + 2));
    t.pos_end = static_cast<int>(1 + data_rng.uniform_index(dims.pos_cap + 2));
    table.push_back(t);
  }
  std::vector<WordId> target;
  for (std::size_t i = 0; i < dims.decode_steps; ++i) {
    target.push_back(static_cast<WordId>(3 + data_rng.uniform_index(dims.vocab - 3)));
  }
  target.back() = word_ids::kEos;
  std::vector<WordId> input{word_ids::kSos};
  input.insert(input.end(), target.begin(), target.end() - 1);

  std::vector<ModelGradCheck> out;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    ModelConfig c;
    c.word_vocab = dims.vocab;
    c.field_vocab = dims.field_vocab;
    c.word_dim = dims.word_dim;
    c.field_dim = dims.field_dim;
    c.pos_dim = dims.pos_dim;
    c.pos_cap = dims.pos_cap;
    c.hidden = dims.hidden;
    c.encoder_mode = variants[v].enc;
    c.attention = variants[v].att;
    c.tie_embeddings = variants[v].tie;
    c.decoder_init = variants[v].init;

    Model model = Model::initialize(c, derive_seed(seed, 100 + v));
    Rng rng(derive_seed(seed, 200 + v));
    for (const auto& name : model.params.names()) {
      for (double& x : model.params.get(name).values()) x = rng.uniform(-0.5, 0.5);
    }

    auto build = [&](ad::Tape& tape) {
      const BoundModel m = tape.records_grad() ? bind(model, tape) : bind(static_cast<const Model&>(model), tape);
      const SequenceNll nll = example_nll(m, table, input, target);
      return ad::scale(nll.total, 1.0 / static_cast<double>(nll.tokens));
    };
    ModelGradCheck r;
    r.variant = to_string(c.encoder_mode) + "/" + to_string(c.attention) + (c.tie_embeddings ? "" : "/untied") +
                (c.decoder_init == DecoderInit::kZero ? "/zero-init" : "");
    r.config = c;
    r.report = grad_check(build, model.params.refs(), options);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace structgen
