#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eam {

/// Error categories surfaced to callers and mapped to CLI exit codes.
enum class ErrorCode {
  invalid_argument = 1,
  not_found = 2,
  io = 3,
  schema_mismatch = 4,
  cyclic_graph = 5,
  size_guard = 6,
  bias_inconsistent = 7,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline constexpr int kSchemaVersion = 1;

// Stable 64-bit hashing used for feature hashing and reproducible ids.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0) noexcept;
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Child seed for stream `counter` of a root seed (counter mode).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter) noexcept {
  return mix64(root ^ mix64(counter + 0x9e3779b97f4a7c15ULL));
}

std::string hex64(std::uint64_t value);

}  // namespace eam
