#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace structgen {

using WordId = std::int32_t;
using FieldId = std::int32_t;

// Reserved ids, fixed for every vocabulary of the given kind.
namespace word_ids {
inline constexpr WordId kPad = 0;
inline constexpr WordId kUnk = 1;
inline constexpr WordId kSos = 2;
inline constexpr WordId kEos = 3;
}  // namespace word_ids

namespace field_ids {
inline constexpr FieldId kPad = 0;
inline constexpr FieldId kUnk = 1;
}  // namespace field_ids

// Token <-> id map. Reserved entries occupy the lowest ids; the remaining
// entries are bijective and ordered by rank.
class Vocabulary {
 public:
  enum class Kind { kWord, kField };

  explicit Vocabulary(Kind kind = Kind::kWord);

  Kind kind() const { return kind_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t reserved_count() const { return reserved_; }

  // Appends a token; returns its id. Existing tokens keep their id.
  std::int32_t add(const std::string& token, std::uint64_t count = 0);

  // Id of `token`, or the kind's UNK id.
  std::int32_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  // Throws IndexError for an id outside [0, size).
  const std::string& token(std::int32_t id) const;
  std::uint64_t count(std::int32_t id) const { return counts_.at(static_cast<std::size_t>(id)); }
  std::int32_t unk_id() const;

  // token<TAB>count per line, line number = id.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path, Kind kind);

  bool operator==(const Vocabulary& other) const {
    return kind_ == other.kind_ && tokens_ == other.tokens_ && counts_ == other.counts_;
  }

  static const std::vector<std::string>& reserved_tokens(Kind kind);

 private:
  Kind kind_;
  std::size_t reserved_ = 0;
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::int32_t> index_;
};

}  // namespace structgen
