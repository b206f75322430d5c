#pragma once

#include <stdexcept>
#include <string>

namespace ssrecon {

enum class ErrorKind {
  Parse,
  Config,
  Io,
  ShapeMismatch,
  TooSmall,
  NonFinite,
  NonRigidPose,
  NonUnitQuaternion,
  UnsupportedCameraModel,
  MissingPose,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

  /// Same kind, message prefixed with `context`.
  Error with_context(const std::string& context) const { return Error(kind_, context + ": " + message_); }

 private:
  ErrorKind kind_;
  std::string message_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NonRigidPose: return "NonRigidPose";
    case ErrorKind::NonUnitQuaternion: return "NonUnitQuaternion";
    case ErrorKind::UnsupportedCameraModel: return "UnsupportedCameraModel";
    case ErrorKind::MissingPose: return "MissingPose";
  }
  return "Error";
}

}  // namespace ssrecon
