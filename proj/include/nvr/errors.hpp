#pragma once

#include <stdexcept>
#include <string>

namespace nvr {

// Bad arguments or unusable input data (CLI exit code 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures while reading or writing.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during optimization (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CodecErrc {
  kBadMagic,
  kUnsupportedVersion,
  kCrcMismatch,
  kTruncated,
  kMalformed,
};

const char* to_string(CodecErrc code);

// Invalid or damaged .nvrc stream (CLI exit code 4).
class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  CodecErrc code() const noexcept { return code_; }

 private:
  CodecErrc code_;
};

}  // namespace nvr
