#include "structgen/toy.hpp"

#include <array>
#include <filesystem>
#include <fstream>

#include "structgen/errors.hpp"
#include "structgen/random.hpp"

namespace structgen {

namespace {

constexpr std::array kFirstNames{"john",  "mary",   "peter",  "anna",   "james", "maria", "paul",
                                 "laura", "robert", "sofia",  "thomas", "elena", "david", "clara",
                                 "mark",  "helen",  "george", "irene",  "simon", "julia"};
constexpr std::array kOnsets{"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr std::array kVowels{"a", "e", "i", "o", "u"};
constexpr std::array kCodas{"", "n", "r", "s", "k", "l"};
constexpr std::array kMonths{"january", "february", "march",     "april",   "may",      "june",
                             "july",    "august",   "september", "october", "november", "december"};
constexpr std::array kNationalities{"american", "british", "french",  "german", "italian",
                                    "spanish",  "dutch",   "swedish", "polish", "irish"};
constexpr std::array kOccupations{"painter", "poet",     "footballer", "politician", "singer",  "actor",
                                  "writer",  "engineer", "physicist",  "composer",   "chemist", "architect"};

std::string surname(Rng& rng) {
  std::string s;
  const std::size_t syllables = 2 + rng.uniform_index(2);
  for (std::size_t i = 0; i < syllables; ++i) {
    s += kOnsets[rng.uniform_index(kOnsets.size())];
    s += kVowels[rng.uniform_index(kVowels.size())];
  }
  s += kCodas[rng.uniform_index(kCodas.size())];
  return s;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

void add_field(std::string& line, const std::string& field, const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!line.empty()) line += '\t';
    line += field + "_" + std::to_string(i + 1) + ":" + tokens[i];
  }
}

void add_none(std::string& line, const std::string& field) {
  if (!line.empty()) line += '\t';
  line += field + ":" + std::string(kEmptyFieldMarker);
}

}  // namespace

ToySplit make_toy_split(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  ToySplit split;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> name{kFirstNames[rng.uniform_index(kFirstNames.size())], surname(rng)};
    const bool has_birth = rng.uniform_index(5) != 0;
    std::vector<std::string> birth{std::to_string(1 + rng.uniform_index(28)),
                                   kMonths[rng.uniform_index(kMonths.size())],
                                   std::to_string(1900 + rng.uniform_index(100))};
    std::vector<std::string> nationality{kNationalities[rng.uniform_index(kNationalities.size())]};
    std::vector<std::string> occupation{kOccupations[rng.uniform_index(kOccupations.size())]};

    std::string line;
    add_field(line, "name", name);
    add_none(line, "image");
    if (has_birth) add_field(line, "birth_date", birth);
    add_field(line, "nationality", nationality);
    add_field(line, "occupation", occupation);
    if (rng.uniform_index(2) == 0) add_none(line, "spouse");

    std::vector<std::string> sent = name;
    if (has_birth) {
      sent.push_back("(");
      sent.push_back("born");
      sent.insert(sent.end(), birth.begin(), birth.end());
      sent.push_back(")");
    }
    sent.push_back("is");
    sent.push_back("a");
    sent.push_back(nationality.front());
    sent.push_back(occupation.front());
    sent.push_back(".");

    split.box_lines.push_back(std::move(line));
    split.sent_lines.push_back(join(sent));
  }
  return split;
}

ToyCorpus make_toy(std::size_t n, std::uint64_t seed) {
  const std::size_t held_out = std::max<std::size_t>(1, n / 5);
  return {make_toy_split(n, derive_seed(seed, 1)), make_toy_split(held_out, derive_seed(seed, 2)),
          make_toy_split(held_out, derive_seed(seed, 3))};
}

std::vector<RawExample> parse_split(const ToySplit& split) {
  std::vector<RawExample> out;
  for (std::size_t i = 0; i < split.box_lines.size(); ++i) {
    out.push_back({parse_box_record_line(split.box_lines[i], i + 1), tokenize(split.sent_lines[i])});
  }
  return out;
}

void write_split(const std::string& dir, const std::string& name, const ToySplit& split) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& ext, const std::vector<std::string>& lines) {
    const std::string path = (std::filesystem::path(dir) / (name + ext)).string();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw IoError(path, "write failed");
  };
  write(".box", split.box_lines);
  write(".sent", split.sent_lines);
}

}  // namespace structgen
