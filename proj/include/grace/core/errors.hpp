#pragma once

#include <stdexcept>
#include <string>

namespace grace {

// Base class for every error raised by the library. `kind()` is a short
// machine-readable tag used by the CLI when it reports a failed stage.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error("shape", w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error("numeric", w) {}
};
struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error("usage", w) {}
};
struct SingularityError : Error {
  explicit SingularityError(const std::string& w) : Error("singular", w) {}
};
struct LoadError : Error {
  explicit LoadError(const std::string& w) : Error("load", w) {}
};
struct HistoryError : Error {
  explicit HistoryError(const std::string& w) : Error("history", w) {}
};
struct ConditionError : Error {
  explicit ConditionError(const std::string& w) : Error("condition", w) {}
};
struct SampleSizeError : Error {
  explicit SampleSizeError(const std::string& w) : Error("sample", w) {}
};
struct PipelineError : Error {
  explicit PipelineError(const std::string& w) : Error("pipeline", w) {}
};
struct SpecError : Error {
  explicit SpecError(const std::string& w) : Error("spec", w) {}
};

}  // namespace grace
