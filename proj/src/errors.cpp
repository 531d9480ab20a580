#include "geognn/errors.hpp"

namespace geognn {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation: return "validation error";
    case ErrorCode::InvalidConfig: return "invalid configuration";
    case ErrorCode::InvalidInput: return "invalid input";
    case ErrorCode::ContractViolation: return "contract violation";
    case ErrorCode::UnsupportedOp: return "unsupported operation";
    case ErrorCode::DegenerateInput: return "degenerate input";
    case ErrorCode::AntipodalAmbiguity: return "antipodal ambiguity";
    case ErrorCode::RankDeficient: return "rank deficient";
    case ErrorCode::SamplingExhausted: return "sampling exhausted";
    case ErrorCode::Format: return "format error";
    case ErrorCode::Corruption: return "corrupt file";
    case ErrorCode::Io: return "I/O error";
    case ErrorCode::NumericFailure: return "numeric failure";
  }
  return "unknown error";
}

int exit_code_for(ErrorCode code) noexcept {
  return code == ErrorCode::NumericFailure ? 3 : 2;
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace geognn
