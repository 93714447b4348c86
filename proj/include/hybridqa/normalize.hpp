#ifndef HYBRIDQA_NORMALIZE_HPP
#define HYBRIDQA_NORMALIZE_HPP

#include <string>
#include <string_view>
#include <vector>

#include "hybridqa/common.hpp"

namespace hybridqa {

// SQuAD-style answer normalization: lowercase, strip ASCII punctuation, drop
// the articles a/an/the, collapse whitespace.
inline std::string normalize_answer(std::string_view text) {
  std::string no_punct;
  no_punct.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool punct = (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
                       (c >= 123 && c <= 126);
    if (!punct) no_punct.push_back(util::ascii_lower(ch));
  }
  std::string out;
  for (const auto& w : util::split_words(no_punct)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

inline std::vector<std::string> answer_tokens(std::string_view text) {
  return util::split_words(normalize_answer(text));
}

}  // namespace hybridqa

#endif  // HYBRIDQA_NORMALIZE_HPP
