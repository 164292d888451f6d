#pragma once
// Error types shared by all modules.

#include <stdexcept>
#include <string>

namespace relaxfree {

// Precondition violation by the caller (bad shapes, out-of-range parameters).
class contract_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine could not produce a trustworthy answer.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Adaptive step size underflowed; the controls are too stiff at `time()`.
class stiff_control_error : public numerical_error {
 public:
  explicit stiff_control_error(double t)
      : numerical_error("step size underflow near t=" + std::to_string(t)), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw contract_error(what);
}
}  // namespace detail

}  // namespace relaxfree
