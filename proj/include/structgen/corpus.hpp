#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "structgen/table.hpp"
#include "structgen/vocab.hpp"

namespace structgen {

// Table token after vocabulary lookup.
struct PositionedToken {
  WordId word = word_ids::kUnk;
  FieldId field = field_ids::kUnk;
  int pos_begin = 1;
  int pos_end = 1;

  bool operator==(const PositionedToken&) const = default;
};

// A table with its description, as read from disk.
struct RawExample {
  InfoboxTable table;
  std::vector<std::string> description;
};

// Model-ready pair. `surface` keeps the original table words aligned with
// `tokens` so generated UNKs can be replaced by out-of-vocabulary words.
struct Example {
  InfoboxTable table;
  std::vector<PositionedToken> tokens;
  std::vector<std::string> surface;
  std::vector<std::string> description;
  // <sos> w_1 ... w_p <eos>
  std::vector<WordId> target;
};

struct Vocabularies {
  Vocabulary words{Vocabulary::Kind::kWord};
  Vocabulary fields{Vocabulary::Kind::kField};
};

// Word vocabulary: the `word_limit` most frequent description and table
// tokens. Field vocabulary: fields seen in more than `field_min_count`
// records. Ties are broken by first occurrence, then lexicographically.
Vocabularies build_vocabularies(const std::vector<RawExample>& corpus, std::size_t word_limit,
                                std::uint64_t field_min_count);

std::vector<PositionedToken> encode_table(const InfoboxTable& table, const Vocabularies& vocab,
                                          int cap = kDefaultPositionCap);
Example make_example(const RawExample& raw, const Vocabularies& vocab, int cap = kDefaultPositionCap);
std::vector<Example> make_examples(const std::vector<RawExample>& raw, const Vocabularies& vocab,
                                   int cap = kDefaultPositionCap);

// Padded, row-major matrices for a group of examples. Rows are examples.
struct Batch {
  std::size_t size = 0;
  std::size_t table_len = 0;  // columns of the table matrices
  std::size_t steps = 0;      // columns of the decoder matrices
  std::vector<WordId> words;
  std::vector<FieldId> fields;
  std::vector<int> pos_begin;
  std::vector<int> pos_end;
  std::vector<std::size_t> table_lengths;
  std::vector<WordId> decoder_input;
  std::vector<WordId> decoder_target;
  std::vector<double> loss_mask;  // 0 exactly on PAD target positions
  std::vector<std::size_t> target_lengths;
  std::vector<std::size_t> example_index;

  PositionedToken table_token(std::size_t row, std::size_t col) const;
  std::size_t target_count() const;
};

Batch make_batch(const std::vector<Example>& examples, const std::vector<std::size_t>& indices);

// Splits `examples` into batches of at most `batch_size`, padding each to its
// own longest sequence. With a seed the example order is shuffled first.
std::vector<Batch> make_batches(const std::vector<Example>& examples, std::size_t batch_size,
                                std::optional<std::uint64_t> seed);

struct CorpusStats {
  std::size_t examples = 0;
  double tokens_per_sentence = 0.0;
  double table_tokens_per_sentence = 0.0;  // description tokens that occur in the table
  double tokens_per_table = 0.0;
  double fields_per_table = 0.0;
};

CorpusStats corpus_stats(const std::vector<RawExample>& corpus);

// ---- files -------------------------------------------------------------------

std::vector<InfoboxTable> read_box_file(const std::string& path);
std::vector<std::vector<std::string>> read_sent_file(const std::string& path);
void write_box_file(const std::string& path, const std::vector<InfoboxTable>& tables);
void write_sent_file(const std::string& path, const std::vector<std::vector<std::string>>& sentences);

// Aligns a .box and a .sent file line by line.
std::vector<RawExample> read_corpus(const std::string& box_path, const std::string& sent_path);

// JSON-lines alternative: {"records": [[field, [tokens...]], ...], "description": "..."}
std::vector<RawExample> read_jsonl_corpus(const std::string& path);
void write_jsonl_corpus(const std::string& path, const std::vector<RawExample>& corpus);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace structgen
