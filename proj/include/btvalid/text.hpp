#pragma once

// Unicode helpers shared by every analytic. All strings are UTF-8; invalid
// byte sequences are decoded as U+FFFD.

#include <string>
#include <string_view>
#include <vector>

namespace btvalid::text {

/// Unicode default full lowercase mapping (root locale, not tailored).
std::string to_lower(std::string_view s);

bool is_decimal_digit(char32_t c);   // general category Nd
bool is_whitespace(char32_t c);      // White_Space property
bool is_punctuation(char32_t c);     // general category P*
bool is_pictographic(char32_t c);    // Extended_Pictographic property
bool is_han(char32_t c);             // Han script

std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);

/// Splits on Unicode whitespace; never yields empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

/// Word tokenizer used by sentiment, topics and embeddings: whitespace split,
/// leading/trailing punctuation stripped, and every Han character emitted as
/// its own token.
std::vector<std::string> tokenize(std::string_view s);

bool contains_pictographic(std::string_view token);

}  // namespace btvalid::text
