#include "vnv/error.hpp"

namespace vnv {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kPowerFailureInjected: return "PowerFailureInjected";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kObjectTooLarge: return "ObjectTooLarge";
    case ErrorCode::kOutOfNvm: return "OutOfNvm";
    case ErrorCode::kDirtyBudgetUnsatisfiable: return "DirtyBudgetUnsatisfiable";
    case ErrorCode::kCachePressureUnresolvable: return "CachePressureUnresolvable";
    case ErrorCode::kWriteGuardActive: return "WriteGuardActive";
    case ErrorCode::kGuardActive: return "GuardActive";
    case ErrorCode::kStillPinned: return "StillPinned";
    case ErrorCode::kInvalidHandle: return "InvalidHandle";
    case ErrorCode::kGuardReleased: return "GuardReleased";
    case ErrorCode::kPreconditionViolated: return "PreconditionViolated";
    case ErrorCode::kNoValidCheckpoint: return "NoValidCheckpoint";
    case ErrorCode::kQueueEmpty: return "QueueEmpty";
    case ErrorCode::kRamCapacityExceeded: return "RamCapacityExceeded";
    case ErrorCode::kKeyNotFound: return "KeyNotFound";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace vnv
