#pragma once

#include <stdexcept>
#include <string>

namespace margjoint {

// Optimizer failed to meet its tolerance; carries the best iterate seen so
// callers can still inspect it.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_value, double best_objective)
      : std::runtime_error(what), best_value_(best_value), best_objective_(best_objective) {}

  double best_value() const { return best_value_; }
  double best_objective() const { return best_objective_; }

 private:
  double best_value_;
  double best_objective_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace margjoint
