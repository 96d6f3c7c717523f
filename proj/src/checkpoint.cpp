#include "structgen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "structgen/errors.hpp"

namespace structgen {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'G', 'C', 'K', 'P', 'T', '0', '1'};

nlohmann::json vocab_json(const Vocabulary& v) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = v.reserved_count(); i < v.size(); ++i) {
    const auto id = static_cast<std::int32_t>(i);
    out.push_back({v.token(id), v.count(id)});
  }
  return out;
}

Vocabulary vocab_from_json(const nlohmann::json& j, Vocabulary::Kind kind) {
  Vocabulary v(kind);
  for (const auto& e : j) v.add(e.at(0).get<std::string>(), e.at(1).get<std::uint64_t>());
  return v;
}

nlohmann::json model_config_json(const ModelConfig& c) {
  return {{"word_vocab", c.word_vocab},   {"field_vocab", c.field_vocab},
          {"word_dim", c.word_dim},       {"field_dim", c.field_dim},
          {"pos_dim", c.pos_dim},         {"pos_cap", c.pos_cap},
          {"hidden", c.hidden},           {"attn_dim", c.attn_dim},
          {"encoder_mode", to_string(c.encoder_mode)},
          {"attention", to_string(c.attention)},
          {"tie_embeddings", c.tie_embeddings},
          {"decoder_init", to_string(c.decoder_init)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.word_vocab = j.at("word_vocab");
  c.field_vocab = j.at("field_vocab");
  c.word_dim = j.at("word_dim");
  c.field_dim = j.at("field_dim");
  c.pos_dim = j.at("pos_dim");
  c.pos_cap = j.at("pos_cap");
  c.hidden = j.at("hidden");
  c.attn_dim = j.at("attn_dim");
  c.encoder_mode = parse_encoder_mode(j.at("encoder_mode")).value();
  c.attention = parse_attention_mode(j.at("attention")).value();
  c.tie_embeddings = j.at("tie_embeddings");
  c.decoder_init = parse_decoder_init(j.at("decoder_init")).value();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainConfig& config, const Vocabularies& vocab,
                     const Model& model, const AdamState& adam, const TrainState& state,
                     const std::string& rng_state) {
  std::vector<std::pair<std::string, const std::vector<double>*>> blobs;
  nlohmann::json directory = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto add = [&](const std::string& name, const Shape& shape, const std::vector<double>* data) {
    directory.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
    offset += data->size();
    blobs.emplace_back(name, data);
  };

  // Values are copied out so the directory can point at contiguous vectors.
  std::vector<std::vector<double>> param_values;
  param_values.reserve(model.params.count());
  for (const auto& name : model.params.names()) {
    const Tensor& t = model.params.get(name);
    param_values.emplace_back(t.values().begin(), t.values().end());
  }
  const auto& names = model.params.names();
  for (std::size_t i = 0; i < names.size(); ++i) add("param/" + names[i], model.params.get(names[i]).shape(), &param_values[i]);
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    add("adam.m/" + names[i], model.params.get(names[i]).shape(), &adam.m[i]);
    add("adam.v/" + names[i], model.params.get(names[i]).shape(), &adam.v[i]);
  }

  nlohmann::json cfg;
  to_json(cfg, config);
  nlohmann::json header = {
      {"format", 1},
      {"config", cfg},
      {"model", model_config_json(model.config)},
      {"vocab", {{"words", vocab_json(vocab.words)}, {"fields", vocab_json(vocab.fields)}}},
      {"state",
       {{"step", state.step},
        {"epoch", state.epoch},
        {"batch_in_epoch", state.batch_in_epoch},
        {"epoch_loss_sum", state.epoch_loss_sum},
        {"epoch_tokens", state.epoch_tokens},
        {"best_loss", state.best_loss ? nlohmann::json(*state.best_loss) : nlohmann::json(nullptr)},
        {"adam_step", adam.step}}},
      {"rng_state", rng_state},
      {"tensors", directory},
  };
  const std::string text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp, "cannot open checkpoint for writing");
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, data] : blobs) {
      out.write(reinterpret_cast<const char*>(data->data()),
                static_cast<std::streamsize>(data->size() * sizeof(double)));
    }
    if (!out) throw IoError(tmp, "checkpoint write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path, "cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open checkpoint");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IoError(path, "not a structgen checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError(path, "truncated checkpoint header");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(text);
    ck.config = train_config_from_json(header.at("config"));
    ck.vocab.words = vocab_from_json(header.at("vocab").at("words"), Vocabulary::Kind::kWord);
    ck.vocab.fields = vocab_from_json(header.at("vocab").at("fields"), Vocabulary::Kind::kField);
    const ModelConfig mc = model_config_from_json(header.at("model"));
    ck.model = Model::initialize(mc, 0);
    ck.adam = AdamState::for_params(ck.model.params);
    const auto& st = header.at("state");
    ck.state.step = st.at("step");
    ck.state.epoch = st.at("epoch");
    ck.state.batch_in_epoch = st.at("batch_in_epoch");
    ck.state.epoch_loss_sum = st.at("epoch_loss_sum");
    ck.state.epoch_tokens = st.at("epoch_tokens");
    if (!st.at("best_loss").is_null()) ck.state.best_loss = st.at("best_loss").get<double>();
    ck.adam.step = st.at("adam_step");
    ck.rng_state = header.at("rng_state");

    const auto& names = ck.model.params.names();
    for (const auto& entry : header.at("tensors")) {
      const std::string name = entry.at("name");
      const Shape shape = entry.at("shape").get<Shape>();
      const std::size_t count = shape_size(shape);
      std::vector<double> data(count);
      in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double)));
      if (!in) throw IoError(path, "truncated tensor data for " + name);

      const auto slash = name.find('/');
      const std::string kind = name.substr(0, slash);
      const std::string pname = name.substr(slash + 1);
      Tensor& target = ck.model.params.get(pname);
      if (target.shape() != shape) {
        throw IoError(path, "tensor " + name + " has shape " + shape_to_string(shape) + ", expected " +
                                shape_to_string(target.shape()));
      }
      if (kind == "param") {
        std::copy(data.begin(), data.end(), target.values().begin());
      } else {
        const auto idx = static_cast<std::size_t>(std::find(names.begin(), names.end(), pname) - names.begin());
        (kind == "adam.m" ? ck.adam.m : ck.adam.v).at(idx) = std::move(data);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw IoError(path, std::string("checkpoint does not match its model: ") + e.what());
  }
  return ck;
}

}  // namespace structgen
