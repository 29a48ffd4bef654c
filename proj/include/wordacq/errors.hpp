#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wordacq {

// Error taxonomy mirrors the CLI exit codes: config/input problems (2),
// missing upstream stage artifacts (3), numerical failures (4).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IngestError : ConfigError {
  IngestError(const std::string& msg, size_t offset)
      : ConfigError(msg + " at byte offset " + std::to_string(offset)),
        byte_offset(offset) {}
  size_t byte_offset;
};

struct MissingUpstreamError : std::runtime_error {
  explicit MissingUpstreamError(const std::string& msg)
      : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wordacq
