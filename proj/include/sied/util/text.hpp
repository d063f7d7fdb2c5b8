#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace sied {

using Tokens = std::vector<std::string>;

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// Whitespace split without any normalization.
inline Tokens split_ws(std::string_view s) {
  Tokens out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Lowercases and splits punctuation into separate tokens. Bracketed slot
// tokens like [LOCATION-0] and [kb-search] survive intact (case preserved).
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char ch = static_cast<unsigned char>(text[i]);
    if (ch == '[') {
      const auto close = text.find(']', i);
      if (close != std::string_view::npos) {
        const auto inner = text.substr(i + 1, close - i - 1);
        bool ok = !inner.empty();
        for (char c : inner) ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '-');
        if (ok) {
          flush();
          out.emplace_back(text.substr(i, close - i + 1));
          i = close + 1;
          continue;
        }
      }
    }
    if (std::isspace(ch)) {
      flush();
    } else if (std::isalnum(ch) || ch == '\'' || ch >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(ch));
    }
    ++i;
  }
  flush();
  return out;
}

inline std::string join(const Tokens& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

inline Tokens concat(Tokens a, const Tokens& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace sied
