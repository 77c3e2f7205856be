#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coacor {

/// Failure categories. The CLI prints the category name as the
/// machine-parsable error class.
enum class ErrorKind {
  kDimension,
  kArgument,
  kCorpus,
  kDataset,
  kConfig,
  kDependency,
  kCheckpoint,
  kDivergence,
  kIo,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kCorpus: return "corpus";
    case ErrorKind::kDataset: return "dataset";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kDependency: return "dependency";
    case ErrorKind::kCheckpoint: return "checkpoint";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace coacor
