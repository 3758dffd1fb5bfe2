#pragma once

#include <stdexcept>
#include <string>

namespace vnv {

enum class ErrorCode {
  kOutOfRange,
  kPowerFailureInjected,
  kConfigInvalid,
  kObjectTooLarge,
  kOutOfNvm,
  kDirtyBudgetUnsatisfiable,
  kCachePressureUnresolvable,
  kWriteGuardActive,
  kGuardActive,
  kStillPinned,
  kInvalidHandle,
  kGuardReleased,
  kPreconditionViolated,
  kNoValidCheckpoint,
  kQueueEmpty,
  kRamCapacityExceeded,
  kKeyNotFound,
  kSizeMismatch,
  kInvalidArgument,
  kIo,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vnv
