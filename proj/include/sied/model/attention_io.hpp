#pragma once

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "sied/model/sied_model.hpp"

namespace sied::model {

// Header row holds the generated tokens; each following row is one turn.
inline void write_attention_csv(const AttentionMatrix& m, std::ostream& out) {
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  out << "turn";
  for (const auto& t : m.tokens) out << ',' << quote(t);
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < m.turns; ++i) {
    out << i;
    for (double w : m.weights[i]) out << ',' << w;
    out << '\n';
  }
}

// Shade ramp from 0 to 1, one character per cell, one line per turn.
inline std::string render_heatmap(const AttentionMatrix& m, const std::vector<std::string>& turn_labels = {}) {
  static const std::string ramp = " .:-=+*#%@";
  std::ostringstream os;
  std::size_t label_w = 6;
  for (const auto& l : turn_labels) label_w = std::max(label_w, std::min<std::size_t>(l.size(), 40));
  for (std::size_t i = 0; i < m.turns; ++i) {
    std::string label = i < turn_labels.size() ? turn_labels[i].substr(0, 40) : "turn " + std::to_string(i);
    os << std::left << std::setw(static_cast<int>(label_w)) << label << " |";
    for (double w : m.weights[i]) {
      const auto k = static_cast<std::size_t>(std::clamp(w, 0.0, 1.0) * static_cast<double>(ramp.size() - 1) + 0.5);
      os << ramp[k];
    }
    os << "|\n";
  }
  os << std::string(label_w, ' ') << "  ";
  for (std::size_t j = 0; j < m.tokens.size(); ++j) os << (j % 10);
  os << '\n';
  for (std::size_t j = 0; j < m.tokens.size(); ++j) os << std::setw(4) << j << "  " << m.tokens[j] << '\n';
  return os.str();
}

}  // namespace sied::model
