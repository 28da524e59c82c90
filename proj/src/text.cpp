#include "btvalid/text.hpp"

#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/uscript.h>
#include <unicode/unistr.h>

namespace btvalid::text {

std::string to_lower(std::string_view s) {
  auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u.toLower(icu::Locale::getRoot());
  std::string out;
  u.toUTF8String(out);
  return out;
}

bool is_decimal_digit(char32_t c) {
  return u_charType(static_cast<UChar32>(c)) == U_DECIMAL_DIGIT_NUMBER;
}

bool is_whitespace(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

bool is_punctuation(char32_t c) { return u_ispunct(static_cast<UChar32>(c)); }

bool is_pictographic(char32_t c) {
  return u_hasBinaryProperty(static_cast<UChar32>(c), UCHAR_EXTENDED_PICTOGRAPHIC);
}

bool is_han(char32_t c) {
  UErrorCode err = U_ZERO_ERROR;
  return uscript_getScript(static_cast<UChar32>(c), &err) == USCRIPT_HAN && U_SUCCESS(err);
}

std::u32string decode(std::string_view s) {
  auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  std::u32string out;
  out.reserve(static_cast<size_t>(u.countChar32()));
  for (int32_t i = 0; i < u.length();) {
    UChar32 c = u.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

std::string encode(std::u32string_view s) {
  auto u = icu::UnicodeString::fromUTF32(reinterpret_cast<const UChar32*>(s.data()),
                                         static_cast<int32_t>(s.size()));
  std::string out;
  u.toUTF8String(out);
  return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> parts;
  std::u32string cur;
  for (char32_t c : decode(s)) {
    if (is_whitespace(c)) {
      if (!cur.empty()) parts.push_back(encode(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(encode(cur));
  return parts;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  for (const auto& piece : split_whitespace(s)) {
    std::u32string w = decode(piece);
    size_t b = 0, e = w.size();
    while (b < e && is_punctuation(w[b])) ++b;
    while (e > b && is_punctuation(w[e - 1])) --e;
    std::u32string cur;
    for (size_t i = b; i < e; ++i) {
      if (is_han(w[i])) {
        if (!cur.empty()) tokens.push_back(encode(cur));
        cur.clear();
        tokens.push_back(encode(std::u32string(1, w[i])));
      } else {
        cur.push_back(w[i]);
      }
    }
    if (!cur.empty()) tokens.push_back(encode(cur));
  }
  return tokens;
}

bool contains_pictographic(std::string_view token) {
  for (char32_t c : decode(token))
    if (is_pictographic(c)) return true;
  return false;
}

}  // namespace btvalid::text
