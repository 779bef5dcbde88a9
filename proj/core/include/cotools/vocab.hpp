#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cotools {

// Character vocabulary: printable ASCII (32..126) and '\n', then END and UNK.
class Vocab {
 public:
  Vocab();

  std::size_t size() const noexcept { return size_; }
  int end_id() const noexcept { return end_id_; }
  int unk_id() const noexcept { return unk_id_; }

  // Every non-vocab code point (or invalid UTF-8 byte) becomes one UNK.
  std::vector<int> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const int> ids) const;
  std::string token_text(int id) const;

  static constexpr std::string_view kEndLiteral = "</s>";
  static constexpr std::string_view kUnkGlyph = "\xEF\xBF\xBD";  // U+FFFD

 private:
  int char_to_id_[128];
  std::vector<char> chars_;
  std::size_t size_;
  int end_id_;
  int unk_id_;
};

}  // namespace cotools
