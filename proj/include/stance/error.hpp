#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stance {

// Machine-readable failure kinds shared by every module.
enum class ErrorCode {
  UndefinedComposition,
  UndefinedAlignment,
  MissingColumn,
  UnmappedLabel,
  EncodingError,
  InsufficientDiversity,
  NoDisalignedObject,
  LengthMismatch,
  EmptyAfterFiltering,
  DimensionMismatch,
  FileUnreadable,
  NonFiniteLoss,
  SizeExceedsPool,
  PreconditionViolated,
  UnknownSession,
  DuplicateVote,
  InvalidLabel,
  UnknownItem,
  UnknownCommand,
  ConfigError,
  FormatError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stance
