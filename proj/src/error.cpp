#include "bank/error.hpp"

namespace bank {

std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation: return "VALIDATION";
    case ErrorCode::Unauthenticated: return "UNAUTHENTICATED";
    case ErrorCode::BadCredentials: return "BAD_CREDENTIALS";
    case ErrorCode::LockedOut: return "LOCKED_OUT";
    case ErrorCode::Forbidden: return "FORBIDDEN";
    case ErrorCode::NotOwner: return "NOT_OWNER";
    case ErrorCode::UnknownCustomer: return "UNKNOWN_CUSTOMER";
    case ErrorCode::UnknownAccount: return "UNKNOWN_ACCOUNT";
    case ErrorCode::UnknownBiller: return "UNKNOWN_BILLER";
    case ErrorCode::UnknownRequest: return "UNKNOWN_REQUEST";
    case ErrorCode::BillerRetired: return "BILLER_RETIRED";
    case ErrorCode::InsufficientFunds: return "INSUFFICIENT_FUNDS";
    case ErrorCode::Frozen: return "FROZEN";
    case ErrorCode::SelfTransfer: return "SELF_TRANSFER";
    case ErrorCode::AlreadyDecided: return "ALREADY_DECIDED";
    case ErrorCode::DuplicateUsername: return "DUPLICATE_USERNAME";
    case ErrorCode::Unbalanced: return "UNBALANCED";
    case ErrorCode::StorageFailure: return "STORAGE_FAILURE";
    case ErrorCode::CorruptRecord: return "CORRUPT_RECORD";
    case ErrorCode::MalformedJson: return "MALFORMED_JSON";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::MethodNotAllowed: return "METHOD_NOT_ALLOWED";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "INTERNAL";
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation:
    case ErrorCode::Unbalanced:
      return 422;
    case ErrorCode::Unauthenticated:
    case ErrorCode::BadCredentials:
      return 401;
    case ErrorCode::LockedOut:
      return 423;
    case ErrorCode::Forbidden:
    case ErrorCode::NotOwner:
      return 403;
    case ErrorCode::UnknownCustomer:
    case ErrorCode::UnknownAccount:
    case ErrorCode::UnknownBiller:
    case ErrorCode::UnknownRequest:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::InsufficientFunds:
    case ErrorCode::Frozen:
    case ErrorCode::SelfTransfer:
    case ErrorCode::AlreadyDecided:
    case ErrorCode::DuplicateUsername:
    case ErrorCode::BillerRetired:
      return 409;
    case ErrorCode::MalformedJson:
      return 400;
    case ErrorCode::MethodNotAllowed:
      return 405;
    case ErrorCode::StorageFailure:
      return 503;
    case ErrorCode::CorruptRecord:
    case ErrorCode::Internal:
      return 500;
  }
  return 500;
}

}  // namespace bank
