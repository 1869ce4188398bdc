#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace labelstrat {

/// Invalid configuration or arguments. The command line tool maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tick data that cannot be aggregated. `index()` is the first offending tick.
class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& message, std::size_t index)
      : std::runtime_error(message), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Raised when optimisation diverges (non-finite loss) or training data is unusable.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace labelstrat
