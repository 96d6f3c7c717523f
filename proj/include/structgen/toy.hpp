#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "structgen/corpus.hpp"

namespace structgen {

// Synthetic biographies. Each table has name, birth_date (most of the
// time), nationality and occupation records plus empty `<none>` fields;
// the description is a fixed function of the records:
//   NAME ( born DAY MONTH YEAR ) is a NATIONALITY OCCUPATION .
//   NAME is a NATIONALITY OCCUPATION .          (no birth_date)
// Surnames are drawn from a large pool so that most occur once, which puts
// them outside a small word vocabulary.
struct ToySplit {
  std::vector<std::string> box_lines;  // box format, including <none> fields
  std::vector<std::string> sent_lines;
};

struct ToyCorpus {
  ToySplit train;
  ToySplit valid;
  ToySplit test;
};

ToySplit make_toy_split(std::size_t n, std::uint64_t seed);
// n training pairs, and n/5 (at least 1) validation and test pairs.
ToyCorpus make_toy(std::size_t n, std::uint64_t seed);

std::vector<RawExample> parse_split(const ToySplit& split);
void write_split(const std::string& dir, const std::string& name, const ToySplit& split);

}  // namespace structgen
