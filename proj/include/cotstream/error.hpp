#pragma once

#include <stdexcept>
#include <string>

namespace cotstream {

enum class ErrorKind {
  Validation,  // bad arguments or configuration
  Io,          // unreadable/unwritable files
  Parse,       // malformed records, config or JSON
  Budget,      // token budget cannot hold even the bare question
  Backend,     // transport or model failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cotstream
