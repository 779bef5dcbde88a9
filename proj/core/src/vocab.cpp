#include "cotools/vocab.hpp"

#include "cotools/errors.hpp"

namespace cotools {

Vocab::Vocab() {
  for (int& c : char_to_id_) c = -1;
  for (int c = 32; c <= 126; ++c) {
    char_to_id_[c] = static_cast<int>(chars_.size());
    chars_.push_back(static_cast<char>(c));
  }
  char_to_id_[static_cast<int>('\n')] = static_cast<int>(chars_.size());
  chars_.push_back('\n');
  end_id_ = static_cast<int>(chars_.size());
  unk_id_ = end_id_ + 1;
  size_ = chars_.size() + 2;
}

std::vector<int> Vocab::tokenize(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b = static_cast<unsigned char>(text[i]);
    if (b < 0x80) {
      const int id = char_to_id_[b];
      ids.push_back(id >= 0 ? id : unk_id_);
      ++i;
      continue;
    }
    std::size_t len = 1;
    if ((b & 0xE0) == 0xC0) {
      len = 2;
    } else if ((b & 0xF0) == 0xE0) {
      len = 3;
    } else if ((b & 0xF8) == 0xF0) {
      len = 4;
    }
    std::size_t k = 1;
    while (k < len && i + k < text.size() &&
           (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80) {
      ++k;
    }
    // A truncated sequence only swallows the bytes that were well formed.
    ids.push_back(unk_id_);
    i += k;
  }
  return ids;
}

std::string Vocab::token_text(int id) const {
  if (id >= 0 && static_cast<std::size_t>(id) < chars_.size()) return std::string(1, chars_[id]);
  if (id == end_id_) return std::string(kEndLiteral);
  if (id == unk_id_) return std::string(kUnkGlyph);
  throw Error(Errc::OutOfRange, "token id " + std::to_string(id) + " outside vocabulary");
}

std::string Vocab::detokenize(std::span<const int> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) out += token_text(id);
  return out;
}

}  // namespace cotools
