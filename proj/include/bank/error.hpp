#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bank {

// Closed set of error codes shared by every layer. The wire name of each
// code is its enumerator spelled in UPPER_SNAKE.
enum class ErrorCode {
  Validation,
  Unauthenticated,
  BadCredentials,
  LockedOut,
  Forbidden,
  NotOwner,
  UnknownCustomer,
  UnknownAccount,
  UnknownBiller,
  UnknownRequest,
  BillerRetired,
  InsufficientFunds,
  Frozen,
  SelfTransfer,
  AlreadyDecided,
  DuplicateUsername,
  Unbalanced,
  StorageFailure,
  CorruptRecord,
  MalformedJson,
  NotFound,
  MethodNotAllowed,
  Internal,
};

std::string_view code_name(ErrorCode code) noexcept;

// HTTP status for an error code.
int http_status(ErrorCode code) noexcept;

class BankError : public std::runtime_error {
 public:
  BankError(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by journal replay when a record fails its checksum or sequence
// check somewhere other than the final line.
class CorruptRecordError : public BankError {
 public:
  CorruptRecordError(std::uint64_t seq, const std::string& detail)
      : BankError(ErrorCode::CorruptRecord,
                  "corrupt journal record " + std::to_string(seq) + ": " + detail),
        seq_(seq) {}

  std::uint64_t seq() const noexcept { return seq_; }

 private:
  std::uint64_t seq_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw BankError(code, message);
}

}  // namespace bank
