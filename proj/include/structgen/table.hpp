#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace structgen {

inline constexpr int kDefaultPositionCap = 30;
inline constexpr std::string_view kEmptyFieldMarker = "<none>";

// One field-value record of an infobox, e.g. (birthname, [jurgis, mikelatitis]).
struct Record {
  std::string field;
  std::vector<std::string> tokens;

  bool operator==(const Record&) const = default;
};

// A table word with its field and its positions counted from the start and
// from the end of the field value, before vocabulary lookup.
struct FlatToken {
  std::string word;
  std::string field;
  int pos_begin = 1;
  int pos_end = 1;
};

// Ordered field-value records. Empty fields are never stored.
class InfoboxTable {
 public:
  InfoboxTable() = default;
  // Drops records whose value is empty or the <none> marker.
  explicit InfoboxTable(std::vector<Record> records);

  const std::vector<Record>& records() const { return records_; }
  std::size_t num_tokens() const;
  bool empty() const { return records_.empty(); }

  // Record tokens in table order with capped (pos_begin, pos_end) labels.
  std::vector<FlatToken> flatten(int cap = kDefaultPositionCap) const;

  bool operator==(const InfoboxTable&) const = default;

 private:
  std::vector<Record> records_;
};

// (min(i, cap), min(m + 1 - i, cap)) for the i-th (1-based) of m tokens.
// Throws std::invalid_argument on an empty value.
std::vector<std::pair<int, int>> annotate_positions(const std::vector<std::string>& value,
                                                    int cap = kDefaultPositionCap);

// Parses one line of the tab-separated `field_k:token` box format. Keys
// without a numeric `_k` suffix are single-token fields. `line_no` is used
// in ParseError messages.
InfoboxTable parse_box_record_line(std::string_view line, std::size_t line_no = 1);

std::string serialize_box_line(const InfoboxTable& table);

// Permutes record order with a seeded generator; record contents untouched.
InfoboxTable shuffle_records(const InfoboxTable& table, std::uint64_t seed);

// Lowercased whitespace split.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace structgen
