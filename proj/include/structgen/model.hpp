#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "structgen/autograd.hpp"
#include "structgen/gradcheck.hpp"
#include "structgen/tensor.hpp"

namespace structgen {

// How table tokens enter the encoder LSTM.
enum class EncoderMode {
  kWordOnly,         // vanilla cell on word embeddings
  kConcatField,      // vanilla cell on [word; field]
  kConcatFieldPos,   // vanilla cell on [word; field; pos+; pos-]
  kFieldGate,        // word embedding input, field embedding through the field gate
  kFieldGateConcat,  // concatenated input and the field gate
};

enum class AttentionMode { kWord, kDual };

enum class DecoderInit { kEncoderFinal, kZero };

std::string to_string(EncoderMode m);
std::string to_string(AttentionMode m);
std::string to_string(DecoderInit m);
std::optional<EncoderMode> parse_encoder_mode(const std::string& s);
std::optional<AttentionMode> parse_attention_mode(const std::string& s);
std::optional<DecoderInit> parse_decoder_init(const std::string& s);

bool uses_field_gate(EncoderMode m);
bool concatenates_field(EncoderMode m);
bool concatenates_position(EncoderMode m);

struct ModelConfig {
  std::size_t word_vocab = 0;
  std::size_t field_vocab = 0;
  std::size_t word_dim = 400;
  std::size_t field_dim = 50;
  std::size_t pos_dim = 5;
  std::size_t pos_cap = 30;
  std::size_t hidden = 500;
  std::size_t attn_dim = 0;  // 0 means `hidden`
  EncoderMode encoder_mode = EncoderMode::kFieldGate;
  AttentionMode attention = AttentionMode::kDual;
  bool tie_embeddings = true;
  DecoderInit decoder_init = DecoderInit::kEncoderFinal;

  std::size_t attention_dim() const { return attn_dim == 0 ? hidden : attn_dim; }
  // Field embedding z_t = [field; pos+; pos-].
  std::size_t z_dim() const { return field_dim + 2 * pos_dim; }
  std::size_t encoder_input_dim() const;
  bool needs_field_embeddings() const;

  std::vector<std::string> validate() const;
};

// Every trainable tensor, addressable by name, in a fixed creation order.
class ModelParams {
 public:
  Tensor& add(const std::string& name, Shape shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t count() const { return names_.size(); }
  std::size_t total_size() const;

  std::vector<NamedTensor> refs();
  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

// Parameter names.
namespace pname {
inline const std::string kWordEmb = "emb.word";
inline const std::string kFieldEmb = "emb.field";
inline const std::string kPosBeginEmb = "emb.pos_begin";
inline const std::string kPosEndEmb = "emb.pos_end";
inline const std::string kEncW = "enc.W_c";
inline const std::string kEncB = "enc.b_c";
inline const std::string kGateW = "enc.W_d";
inline const std::string kGateB = "enc.b_d";
inline const std::string kDecWordEmb = "dec.emb.word";
inline const std::string kDecW = "dec.W_c";
inline const std::string kDecB = "dec.b_c";
inline const std::string kAttP = "att.W_p";
inline const std::string kAttQ = "att.W_q";
inline const std::string kAttX = "att.W_x";
inline const std::string kAttY = "att.W_y";
inline const std::string kOutT = "out.W_t";
inline const std::string kOutS = "out.W_s";
}  // namespace pname

struct Model {
  ModelConfig config;
  ModelParams params;

  // Allocates every tensor for `config`: weights uniform(-0.08, 0.08),
  // biases 0, forget-gate biases 1. Throws ConfigError on a bad config.
  static Model initialize(const ModelConfig& config, std::uint64_t seed);
};

struct LstmWeights {
  ad::Var W;  // [4n x (input + n)], gate rows ordered i, f, o, c^
  ad::Var b;  // [4n]
};

struct FieldGateWeights {
  ad::Var W;  // [2n x z_dim], rows ordered l, z^
  ad::Var b;  // [2n]
};

// Model parameters placed on a tape. In kGrad mode gradients flow back into
// the model's tensors; in kNoGrad mode the tensors are only read.
struct BoundModel {
  const ModelConfig* config = nullptr;
  ad::Tape* tape = nullptr;
  ad::Var word_emb;
  ad::Var field_emb;
  ad::Var pos_begin_emb;
  ad::Var pos_end_emb;
  LstmWeights encoder;
  std::optional<FieldGateWeights> field_gate;
  ad::Var decoder_word_emb;
  LstmWeights decoder;
  ad::Var att_p, att_q, att_x, att_y;
  ad::Var out_t, out_s;

  bool has_field_embeddings() const { return field_emb.tape != nullptr; }
};

BoundModel bind(Model& model, ad::Tape& tape);
BoundModel bind(const Model& model, ad::Tape& tape);

}  // namespace structgen
