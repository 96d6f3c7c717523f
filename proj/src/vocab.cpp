#include "structgen/vocab.hpp"

#include <fstream>
#include <string>

#include "structgen/errors.hpp"

namespace structgen {

const std::vector<std::string>& Vocabulary::reserved_tokens(Kind kind) {
  static const std::vector<std::string> words = {"<pad>", "<unk>", "<sos>", "<eos>"};
  static const std::vector<std::string> fields = {"<pad>", "<unk_field>"};
  return kind == Kind::kWord ? words : fields;
}

Vocabulary::Vocabulary(Kind kind) : kind_(kind) {
  for (const auto& t : reserved_tokens(kind)) add(t);
  reserved_ = tokens_.size();
}

std::int32_t Vocabulary::add(const std::string& token, std::uint64_t count) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(token);
  counts_.push_back(count);
  index_.emplace(token, id);
  return id;
}

std::int32_t Vocabulary::unk_id() const {
  return kind_ == Kind::kWord ? word_ids::kUnk : field_ids::kUnk;
}

std::int32_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("vocabulary id " + std::to_string(id) + " out of range [0, " +
                     std::to_string(tokens_.size()) + ")");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << counts_[i] << '\n';
  if (!out) throw IoError(path, "write failed");
}

Vocabulary Vocabulary::load(const std::string& path, Kind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open vocabulary");
  Vocabulary v(kind);
  const auto& reserved = reserved_tokens(kind);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path + ": expected token<TAB>count", line_no, 1);
    const std::string token = line.substr(0, tab);
    std::uint64_t count = 0;
    try {
      count = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(path + ": bad count", line_no, tab + 2);
    }
    const std::size_t idx = line_no - 1;
    if (idx < reserved.size()) {
      if (token != reserved[idx]) {
        throw ParseError(path + ": expected reserved token " + reserved[idx], line_no, 1);
      }
      v.counts_[idx] = count;
      continue;
    }
    if (v.contains(token)) throw ParseError(path + ": duplicate token '" + token + "'", line_no, 1);
    v.add(token, count);
  }
  return v;
}

}  // namespace structgen
