#include "structgen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "structgen/errors.hpp"
#include "structgen/random.hpp"

namespace structgen {

namespace {

struct Tally {
  std::uint64_t count = 0;
  std::size_t first_seen = 0;
};

class Counter {
 public:
  void see(const std::string& token) {
    auto [it, inserted] = tally_.try_emplace(token, Tally{0, order_});
    if (inserted) ++order_;
    ++it->second.count;
  }

  // (token, count) sorted by count desc, first occurrence, then token.
  std::vector<std::pair<std::string, Tally>> ranked() const {
    std::vector<std::pair<std::string, Tally>> out(tally_.begin(), tally_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      if (a.second.count != b.second.count) return a.second.count > b.second.count;
      if (a.second.first_seen != b.second.first_seen) return a.second.first_seen < b.second.first_seen;
      return a.first < b.first;
    });
    return out;
  }

 private:
  std::unordered_map<std::string, Tally> tally_;
  std::size_t order_ = 0;
};

bool is_reserved(const std::string& token, Vocabulary::Kind kind) {
  const auto& r = Vocabulary::reserved_tokens(kind);
  return std::find(r.begin(), r.end(), token) != r.end();
}

}  // namespace

Vocabularies build_vocabularies(const std::vector<RawExample>& corpus, std::size_t word_limit,
                                std::uint64_t field_min_count) {
  if (corpus.empty()) throw std::invalid_argument("build_vocabularies: empty corpus");
  Counter words;
  Counter fields;
  for (const auto& ex : corpus) {
    for (const auto& w : ex.description) {
      if (!is_reserved(w, Vocabulary::Kind::kWord)) words.see(w);
    }
    for (const auto& r : ex.table.records()) {
      if (!is_reserved(r.field, Vocabulary::Kind::kField)) fields.see(r.field);
      for (const auto& w : r.tokens) {
        if (!is_reserved(w, Vocabulary::Kind::kWord)) words.see(w);
      }
    }
  }

  Vocabularies v;
  std::size_t taken = 0;
  for (const auto& [token, tally] : words.ranked()) {
    if (taken == word_limit) break;
    v.words.add(token, tally.count);
    ++taken;
  }
  for (const auto& [token, tally] : fields.ranked()) {
    if (tally.count > field_min_count) v.fields.add(token, tally.count);
  }
  return v;
}

std::vector<PositionedToken> encode_table(const InfoboxTable& table, const Vocabularies& vocab, int cap) {
  std::vector<PositionedToken> out;
  for (const auto& t : table.flatten(cap)) {
    out.push_back({vocab.words.id(t.word), vocab.fields.id(t.field), t.pos_begin, t.pos_end});
  }
  return out;
}

Example make_example(const RawExample& raw, const Vocabularies& vocab, int cap) {
  Example ex;
  ex.table = raw.table;
  ex.tokens = encode_table(raw.table, vocab, cap);
  for (const auto& t : raw.table.flatten(cap)) ex.surface.push_back(t.word);
  ex.description = raw.description;
  ex.target.reserve(raw.description.size() + 2);
  ex.target.push_back(word_ids::kSos);
  for (const auto& w : raw.description) ex.target.push_back(vocab.words.id(w));
  ex.target.push_back(word_ids::kEos);
  return ex;
}

std::vector<Example> make_examples(const std::vector<RawExample>& raw, const Vocabularies& vocab, int cap) {
  std::vector<Example> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(make_example(r, vocab, cap));
  return out;
}

PositionedToken Batch::table_token(std::size_t row, std::size_t col) const {
  const std::size_t i = row * table_len + col;
  return {words[i], fields[i], pos_begin[i], pos_end[i]};
}

std::size_t Batch::target_count() const {
  return std::accumulate(target_lengths.begin(), target_lengths.end(), std::size_t{0});
}

Batch make_batch(const std::vector<Example>& examples, const std::vector<std::size_t>& indices) {
  Batch b;
  b.size = indices.size();
  for (std::size_t idx : indices) {
    const Example& ex = examples.at(idx);
    b.table_len = std::max(b.table_len, ex.tokens.size());
    b.steps = std::max(b.steps, ex.target.size() > 0 ? ex.target.size() - 1 : 0);
  }
  const std::size_t tcells = b.size * b.table_len;
  const std::size_t dcells = b.size * b.steps;
  b.words.assign(tcells, word_ids::kPad);
  b.fields.assign(tcells, field_ids::kPad);
  b.pos_begin.assign(tcells, 0);
  b.pos_end.assign(tcells, 0);
  b.decoder_input.assign(dcells, word_ids::kPad);
  b.decoder_target.assign(dcells, word_ids::kPad);
  b.loss_mask.assign(dcells, 0.0);

  for (std::size_t r = 0; r < b.size; ++r) {
    const Example& ex = examples[indices[r]];
    b.example_index.push_back(indices[r]);
    b.table_lengths.push_back(ex.tokens.size());
    for (std::size_t c = 0; c < ex.tokens.size(); ++c) {
      const std::size_t i = r * b.table_len + c;
      b.words[i] = ex.tokens[c].word;
      b.fields[i] = ex.tokens[c].field;
      b.pos_begin[i] = ex.tokens[c].pos_begin;
      b.pos_end[i] = ex.tokens[c].pos_end;
    }
    const std::size_t steps = ex.target.size() > 0 ? ex.target.size() - 1 : 0;
    b.target_lengths.push_back(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t i = r * b.steps + t;
      b.decoder_input[i] = ex.target[t];
      b.decoder_target[i] = ex.target[t + 1];
      b.loss_mask[i] = 1.0;
    }
  }
  return b;
}

std::vector<Batch> make_batches(const std::vector<Example>& examples, std::size_t batch_size,
                                std::optional<std::uint64_t> seed) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  if (examples.empty()) throw std::invalid_argument("make_batches: no examples");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (seed) {
    Rng rng(*seed);
    rng.shuffle(std::span<std::size_t>(order));
  }
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.push_back(make_batch(examples, {order.begin() + static_cast<std::ptrdiff_t>(start),
                                        order.begin() + static_cast<std::ptrdiff_t>(end)}));
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<RawExample>& corpus) {
  CorpusStats s;
  s.examples = corpus.size();
  if (corpus.empty()) return s;
  std::size_t sent_tokens = 0, overlap = 0, table_tokens = 0, fields = 0;
  for (const auto& ex : corpus) {
    sent_tokens += ex.description.size();
    table_tokens += ex.table.num_tokens();
    fields += ex.table.records().size();
    std::unordered_set<std::string> in_table;
    for (const auto& r : ex.table.records()) in_table.insert(r.tokens.begin(), r.tokens.end());
    for (const auto& w : ex.description) overlap += in_table.count(w);
  }
  const double n = static_cast<double>(corpus.size());
  s.tokens_per_sentence = static_cast<double>(sent_tokens) / n;
  s.table_tokens_per_sentence = static_cast<double>(overlap) / n;
  s.tokens_per_table = static_cast<double>(table_tokens) / n;
  s.fields_per_table = static_cast<double>(fields) / n;
  return s;
}

// ---- files -------------------------------------------------------------------

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  return out;
}

}  // namespace

std::vector<InfoboxTable> read_box_file(const std::string& path) {
  auto in = open_in(path);
  std::vector<InfoboxTable> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      out.push_back(parse_box_record_line(line, line_no));
    } catch (const ParseError& e) {
      throw IoError(path, e.what());
    }
  }
  return out;
}

std::vector<std::vector<std::string>> read_sent_file(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(tokenize(line));
  return out;
}

void write_box_file(const std::string& path, const std::vector<InfoboxTable>& tables) {
  auto out = open_out(path);
  for (const auto& t : tables) out << serialize_box_line(t) << '\n';
  if (!out) throw IoError(path, "write failed");
}

void write_sent_file(const std::string& path, const std::vector<std::vector<std::string>>& sentences) {
  auto out = open_out(path);
  for (const auto& s : sentences) out << join_tokens(s) << '\n';
  if (!out) throw IoError(path, "write failed");
}

std::vector<RawExample> read_corpus(const std::string& box_path, const std::string& sent_path) {
  auto tables = read_box_file(box_path);
  auto sents = read_sent_file(sent_path);
  if (tables.size() != sents.size()) {
    throw IoError(sent_path, "has " + std::to_string(sents.size()) + " lines but " + box_path +
                                 " has " + std::to_string(tables.size()));
  }
  std::vector<RawExample> out;
  out.reserve(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i) out.push_back({std::move(tables[i]), std::move(sents[i])});
  return out;
}

std::vector<RawExample> read_jsonl_corpus(const std::string& path) {
  auto in = open_in(path);
  std::vector<RawExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<Record> records;
      for (const auto& rec : j.at("records")) {
        Record r{rec.at(0).get<std::string>(), {}};
        for (const auto& tok : rec.at(1)) {
          auto words = tokenize(tok.get<std::string>());
          r.tokens.insert(r.tokens.end(), words.begin(), words.end());
        }
        records.push_back(std::move(r));
      }
      out.push_back({InfoboxTable(std::move(records)), tokenize(j.at("description").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl_corpus(const std::string& path, const std::vector<RawExample>& corpus) {
  auto out = open_out(path);
  for (const auto& ex : corpus) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : ex.table.records()) records.push_back({r.field, r.tokens});
    nlohmann::json j{{"records", records}, {"description", join_tokens(ex.description)}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError(path, "write failed");
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace structgen
