#pragma once

#include <string>

#include "sied/service/session.hpp"

namespace sied::service {

// A cooperative caller that answers each system prompt from its goal,
// confirms, and says goodbye once a schedule (or a no-route answer) arrives.
// Anything it does not understand gets its previous answer again.
class ScriptedUser {
 public:
  explicit ScriptedUser(Goal goal) : goal_(std::move(goal)) {}

  std::string respond(const std::string& system_reply) {
    const auto r = split_ws(system_reply);
    auto has = [&](const std::string& phrase) { return entity::find_span(r, split_ws(phrase)).has_value(); };
    std::string say;
    if (has("the next bus is") || has(kb::kNoRouteText))
      say = "goodbye";
    else if (has("is that right ?"))
      say = "yes";
    else if (has(corpus::synth::request_text(corpus::synth::kDep)))
      say = "from " + goal_.departure;
    else if (has(corpus::synth::request_text(corpus::synth::kArr)))
      say = "to " + goal_.arrival;
    else if (has(corpus::synth::request_text(corpus::synth::kTime)))
      say = "at " + time_text();
    else
      say = last_.empty() ? "from " + goal_.departure : last_;
    last_ = say;
    return say;
  }

  std::string time_text() const {
    return std::to_string(goal_.time.hour) + ":" + entity::two_digits(goal_.time.minute) + " " +
           kb::to_string(goal_.time.meridiem);
  }

  const Goal& goal() const { return goal_; }

 private:
  Goal goal_;
  std::string last_;
};

}  // namespace sied::service
