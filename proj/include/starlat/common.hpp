#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace starlat {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class Side { kReflection = 0, kTransmission = 1 };
enum class AccessMode { kSdma, kFdma };

const char* to_string(Side side);
const char* to_string(AccessMode mode);

enum class ErrorCode {
  kInvalidParams,
  kBoundaryUser,
  kCountMismatch,
  kNonPositiveAuxiliary,
  kInfeasible,
  kInfeasibleEnergy,
  kPenaltyStall,
  kRankTooHigh,
  kBudgetExceeded,
  kConfig,
  kIo,
};

const char* to_string(ErrorCode code);

// Every failure the library reports carries a machine-readable code. `user`
// and `block` are filled when the failure can be pinned to one AR user or to
// one optimization block; otherwise they stay at -1 / empty.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, int user = -1, std::string block = {})
      : std::runtime_error(what), code_(code), user_(user), block_(std::move(block)) {}

  ErrorCode code() const { return code_; }
  int user() const { return user_; }
  const std::string& block() const { return block_; }

 private:
  ErrorCode code_;
  int user_;
  std::string block_;
};

}  // namespace starlat
