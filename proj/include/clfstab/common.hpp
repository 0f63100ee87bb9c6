#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clfstab {

// Upper bound on state/control dimension. Vectors live inline (no heap) so
// the inner simulation loops stay allocation free.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using StateVector = Vec;
using ControlVector = Vec;

// Scalar function of a nonnegative argument (rates, gains, positive-definite bounds).
using RealFn = std::function<double(double)>;
using ScalarField = std::function<double(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;

enum class ErrorKind {
  DimensionMismatch,
  NonFinite,
  NotAffine,
  UnknownName,
  InvalidParams,
  InversionOutOfRange,
  UnboundedBundle,
  CLFPremiseViolated,
  NonConvergence,
  RefusedDiscontinuous,
  PreconditionFailed,
  NotHurwitz,
  InverseConsistency,
  InvalidCandidate,
  Validation,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline Vec zeros(Eigen::Index n) { return Vec::Zero(n); }

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require_dim(const Vec& v, Eigen::Index n, std::string_view what) {
  if (v.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + ": expected dimension " +
                                                  std::to_string(n) + ", got " +
                                                  std::to_string(v.size()));
  }
}

}  // namespace clfstab
