#include "structgen/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>
#include <stdexcept>

#include "structgen/errors.hpp"
#include "structgen/random.hpp"

namespace structgen {

namespace {

bool is_empty_value(const std::vector<std::string>& tokens) {
  return tokens.empty() || (tokens.size() == 1 && tokens[0] == kEmptyFieldMarker);
}

}  // namespace

InfoboxTable::InfoboxTable(std::vector<Record> records) {
  for (auto& r : records) {
    if (!is_empty_value(r.tokens)) records_.push_back(std::move(r));
  }
}

std::size_t InfoboxTable::num_tokens() const {
  return std::accumulate(records_.begin(), records_.end(), std::size_t{0},
                         [](std::size_t n, const Record& r) { return n + r.tokens.size(); });
}

std::vector<FlatToken> InfoboxTable::flatten(int cap) const {
  std::vector<FlatToken> out;
  out.reserve(num_tokens());
  for (const auto& r : records_) {
    const auto positions = annotate_positions(r.tokens, cap);
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      out.push_back({r.tokens[i], r.field, positions[i].first, positions[i].second});
    }
  }
  return out;
}

std::vector<std::pair<int, int>> annotate_positions(const std::vector<std::string>& value, int cap) {
  if (value.empty()) throw std::invalid_argument("annotate_positions: empty field value");
  if (cap < 1) throw std::invalid_argument("annotate_positions: cap must be >= 1");
  const int m = static_cast<int>(value.size());
  std::vector<std::pair<int, int>> out;
  out.reserve(value.size());
  for (int i = 1; i <= m; ++i) out.emplace_back(std::min(i, cap), std::min(m + 1 - i, cap));
  return out;
}

InfoboxTable parse_box_record_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

  std::vector<Record> records;
  int last_k = 0;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find('\t', start);
    if (end == std::string_view::npos) end = line.size();
    const std::string_view pair = line.substr(start, end - start);
    const std::size_t column = start + 1;
    start = end + 1;
    if (pair.empty()) {
      if (end == line.size()) break;
      continue;
    }

    const std::size_t colon = pair.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError("malformed pair '" + std::string(pair) + "' (expected field_k:token)", line_no,
                       column);
    }
    const std::string_view key = pair.substr(0, colon);
    std::string token(pair.substr(colon + 1));
    if (key.empty()) throw ParseError("empty field name", line_no, column);
    if (token.empty()) throw ParseError("empty token for '" + std::string(key) + "'", line_no, column);

    std::string field(key);
    int k = 1;
    bool indexed = false;
    if (const std::size_t us = key.rfind('_'); us != std::string_view::npos && us + 1 < key.size()) {
      const std::string_view digits = key.substr(us + 1);
      int parsed = 0;
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), parsed);
      if (ec == std::errc() && ptr == digits.data() + digits.size()) {
        if (parsed < 1) throw ParseError("position index must be >= 1 in '" + std::string(key) + "'", line_no, column);
        field = std::string(key.substr(0, us));
        if (field.empty()) throw ParseError("empty field name", line_no, column);
        k = parsed;
        indexed = true;
      }
    }
    std::transform(token.begin(), token.end(), token.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    const bool continues = indexed && !records.empty() && records.back().field == field && k > 1;
    if (continues) {
      if (k != last_k + 1) {
        throw ParseError("non-monotonic position " + std::to_string(k) + " after " +
                             std::to_string(last_k) + " in field '" + field + "'",
                         line_no, column);
      }
      records.back().tokens.push_back(std::move(token));
    } else {
      if (k != 1) {
        throw ParseError("field '" + field + "' starts at position " + std::to_string(k), line_no,
                         column);
      }
      records.push_back({std::move(field), {std::move(token)}});
    }
    last_k = k;
    if (end == line.size()) break;
  }
  return InfoboxTable(std::move(records));
}

std::string serialize_box_line(const InfoboxTable& table) {
  std::string out;
  for (const auto& r : table.records()) {
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      if (!out.empty()) out += '\t';
      out += r.field;
      out += '_';
      out += std::to_string(i + 1);
      out += ':';
      out += r.tokens[i];
    }
  }
  return out;
}

InfoboxTable shuffle_records(const InfoboxTable& table, std::uint64_t seed) {
  std::vector<Record> records = table.records();
  Rng rng(seed);
  rng.shuffle(std::span<Record>(records));
  return InfoboxTable(std::move(records));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::string tok(text.substr(i, j - i));
      std::transform(tok.begin(), tok.end(), tok.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

}  // namespace structgen
