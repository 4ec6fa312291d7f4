#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mvpp {

// Exit-code classes used by the CLI: input errors (2), numerical failures (1)
// and cross-file consistency errors (3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::vector<double> trace = {})
      : Error(what), trace_(std::move(trace)) {}

  /// Per-iteration diagnostic (gradient norm or objective) leading to the failure.
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvpp
