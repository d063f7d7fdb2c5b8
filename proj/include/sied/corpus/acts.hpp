#pragma once

#include <algorithm>
#include <array>
#include <string_view>

namespace sied::corpus {

// System dialog acts of the bus domain.
inline constexpr std::array<std::string_view, 14> kDialogActs{
    "welcome",      "request-departure", "request-arrival", "request-time", "implicit-confirm",
    "explicit-confirm", "inform-result", "kb-query",        "goodbye",      "cant-help",
    "repeat",       "restart",           "chat-response",   "instructions"};

inline bool is_dialog_act(std::string_view a) {
  return std::find(kDialogActs.begin(), kDialogActs.end(), a) != kDialogActs.end();
}

}  // namespace sied::corpus
