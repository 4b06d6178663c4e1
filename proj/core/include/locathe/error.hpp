#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace locathe {

enum class ErrorCode {
  // crypto_suite
  LengthTooLarge,
  EmptySecret,
  InvalidKey,
  InvalidScalar,
  InvalidPoint,
  InvalidPeerPoint,
  AuthenticationFailed,
  MalformedSignature,
  // abe_engine
  InvalidPolicy,
  DuplicateAuthority,
  ForeignAttribute,
  UnknownAuthority,
  UnknownAttribute,
  PolicyNotSatisfied,
  KeyExpired,
  MalformedCiphertext,
  // registration
  AlreadyRegistered,
  UnknownUser,
  Expired,
  // key_schedule
  IdentitySharedSecret,
  DegenerateGE,
  // protocol_engine
  MalformedMessage,
  UnknownHandle,
  BadSignature,
  AuthMismatch,
  DecryptFailed,
  AuthTier2Mismatch,
  FinalAuthFailed,
  Timeout,
  PeerError,
  // sim_harness / io
  ScenarioMisconfigured,
  Io,
  Format,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  explicit Error(ErrorCode code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace locathe
