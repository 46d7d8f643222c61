#pragma once

#include <stdexcept>
#include <string>

namespace bavart {

// Configuration errors map to CLI exit code 2, everything else to 1.
enum class ErrorKind { Config, Runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string key, const std::string& what)
      : std::runtime_error(what), kind_(kind), key_(std::move(key)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Dotted identifier of the offending setting or input, e.g. `config.sweeps`.
  const std::string& key() const noexcept { return key_; }

 private:
  ErrorKind kind_;
  std::string key_;
};

inline Error config_error(std::string key, const std::string& what) {
  return Error(ErrorKind::Config, std::move(key), what);
}

inline Error runtime_error(std::string key, const std::string& what) {
  return Error(ErrorKind::Runtime, std::move(key), what);
}

}  // namespace bavart
