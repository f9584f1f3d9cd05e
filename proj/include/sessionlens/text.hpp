#pragma once

#include <set>
#include <string>
#include <vector>

namespace sessionlens {

// Lowercases and splits on maximal runs of non-alphanumeric characters;
// empty tokens are dropped. ASCII letters/digits delimit tokens; any other
// byte (including multi-byte UTF-8) acts as a separator.
//   "Sun-Tzu's Art" -> {sun, tzu, s, art}
std::vector<std::string> tokenize(const std::string& text);

std::set<std::string> unique_terms(const std::vector<std::string>& terms);

// Host part of a URL, lowercased, leading "www." stripped. No public-suffix
// handling beyond that.
std::string domain_of_url(const std::string& url);

// Number of Unicode code points in a UTF-8 string (continuation bytes are
// not counted). Used for title lengths.
std::size_t codepoint_count(const std::string& text);

}  // namespace sessionlens
