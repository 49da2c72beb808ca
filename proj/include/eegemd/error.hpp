#pragma once

#include <stdexcept>
#include <string>

namespace eegemd {

/// Base for all library errors. `kind()` is a stable machine-readable tag
/// ("invalid_input", "io", "format", "convergence", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

inline Error invalid_input(const std::string& what) { return Error("invalid_input", what); }
inline Error format_error(const std::string& what) { return Error("format", what); }
inline Error io_error(const std::string& what) { return Error("io", what); }

}  // namespace eegemd
