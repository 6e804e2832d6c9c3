#pragma once

#include <stdexcept>
#include <string>

namespace reclab {

// Training produced a non-finite loss or logits. The CLI maps this to its
// own exit code, distinct from validation failures.
class divergence_error : public std::runtime_error {
 public:
  explicit divergence_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace reclab
