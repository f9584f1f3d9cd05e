#include "sessionlens/text.hpp"

namespace sessionlens {

namespace {

bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char to_lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      current.push_back(to_lower_ascii(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::set<std::string> unique_terms(const std::vector<std::string>& terms) {
  return {terms.begin(), terms.end()};
}

std::string domain_of_url(const std::string& url) {
  std::size_t start = 0;
  const std::size_t scheme = url.find("://");
  if (scheme != std::string::npos) start = scheme + 3;
  std::size_t end = url.find_first_of("/?#", start);
  if (end == std::string::npos) end = url.size();
  std::string host = url.substr(start, end - start);
  if (const std::size_t at = host.rfind('@'); at != std::string::npos) {
    host = host.substr(at + 1);
  }
  if (const std::size_t colon = host.find(':'); colon != std::string::npos) {
    host = host.substr(0, colon);
  }
  for (char& c : host) c = to_lower_ascii(static_cast<unsigned char>(c));
  if (host.rfind("www.", 0) == 0) host = host.substr(4);
  return host;
}

std::size_t codepoint_count(const std::string& text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

}  // namespace sessionlens
