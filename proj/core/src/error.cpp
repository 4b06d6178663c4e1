#include "locathe/error.hpp"

namespace locathe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::LengthTooLarge: return "LengthTooLarge";
    case ErrorCode::EmptySecret: return "EmptySecret";
    case ErrorCode::InvalidKey: return "InvalidKey";
    case ErrorCode::InvalidScalar: return "InvalidScalar";
    case ErrorCode::InvalidPoint: return "InvalidPoint";
    case ErrorCode::InvalidPeerPoint: return "InvalidPeerPoint";
    case ErrorCode::AuthenticationFailed: return "AuthenticationFailed";
    case ErrorCode::MalformedSignature: return "MalformedSignature";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::DuplicateAuthority: return "DuplicateAuthority";
    case ErrorCode::ForeignAttribute: return "ForeignAttribute";
    case ErrorCode::UnknownAuthority: return "UnknownAuthority";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::PolicyNotSatisfied: return "PolicyNotSatisfied";
    case ErrorCode::KeyExpired: return "KeyExpired";
    case ErrorCode::MalformedCiphertext: return "MalformedCiphertext";
    case ErrorCode::AlreadyRegistered: return "AlreadyRegistered";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::Expired: return "Expired";
    case ErrorCode::IdentitySharedSecret: return "IdentitySharedSecret";
    case ErrorCode::DegenerateGE: return "DegenerateGE";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
    case ErrorCode::UnknownHandle: return "UnknownHandle";
    case ErrorCode::BadSignature: return "BadSignature";
    case ErrorCode::AuthMismatch: return "AuthMismatch";
    case ErrorCode::DecryptFailed: return "DecryptFailed";
    case ErrorCode::AuthTier2Mismatch: return "AuthTier2Mismatch";
    case ErrorCode::FinalAuthFailed: return "FinalAuthFailed";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::PeerError: return "PeerError";
    case ErrorCode::ScenarioMisconfigured: return "ScenarioMisconfigured";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace locathe
