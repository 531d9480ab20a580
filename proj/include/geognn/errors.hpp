#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace geognn {

enum class ErrorCode {
  Validation,
  InvalidConfig,
  InvalidInput,
  ContractViolation,
  UnsupportedOp,
  DegenerateInput,
  AntipodalAmbiguity,
  RankDeficient,
  SamplingExhausted,
  Format,
  Corruption,
  Io,
  NumericFailure,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Zero-norm or otherwise unusable input row. `node()` names the offending
/// row when the failure is attributable to one.
class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what,
                                std::optional<std::size_t> node = std::nullopt)
      : Error(ErrorCode::DegenerateInput, what), node_(node) {}

  std::optional<std::size_t> node() const noexcept { return node_; }

 private:
  std::optional<std::size_t> node_;
};

class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, std::size_t achieved_rank)
      : Error(ErrorCode::RankDeficient, what), achieved_rank_(achieved_rank) {}

  std::size_t achieved_rank() const noexcept { return achieved_rank_; }

 private:
  std::size_t achieved_rank_;
};

/// CLI exit code for an error: 3 for numeric failure, 2 for everything else.
int exit_code_for(ErrorCode code) noexcept;

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace geognn
