#pragma once

#include <stdexcept>
#include <string>

namespace ntiqa {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A metric is undefined for the given inputs (e.g. rank correlation of a
// constant score list).
class DegenerateInput : public Error {
 public:
  explicit DegenerateInput(const std::string& what)
      : Error("DEGENERATE: " + what) {}
};

}  // namespace ntiqa
