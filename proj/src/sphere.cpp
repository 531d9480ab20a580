#include "geognn/sphere.hpp"

#include "geognn/errors.hpp"

#include <algorithm>
#include <cmath>

namespace geognn::sphere {

double clamp_cos(double dot) noexcept {
  return std::clamp(dot, -1.0 + kClampEps, 1.0 - kClampEps);
}

Vector project_to_sphere(const Vector& v) {
  const double n = v.norm();
  if (!(n > kZeroNorm)) throw DegenerateInputError("cannot project a zero-norm vector to the sphere");
  return v / n;
}

double geodesic_distance(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) fail(ErrorCode::ContractViolation, "geodesic_distance: length mismatch");
  return std::acos(clamp_cos(x.dot(y)));
}

double theta_over_sin(double theta) noexcept {
  if (theta < kSeriesTheta) return 1.0 + theta * theta / 6.0;
  return theta / std::sin(theta);
}

Vector log_map(const Vector& x, const Vector& y, AntipodalPolicy policy,
               std::size_t* antipodal_count) {
  if (x.size() != y.size()) fail(ErrorCode::ContractViolation, "log_map: length mismatch");
  const double dot = x.dot(y);
  if (dot < -1.0 + kAntipodalEps) {
    if (policy == AntipodalPolicy::Strict) {
      fail(ErrorCode::AntipodalAmbiguity, "log_map: points are (nearly) antipodal");
    }
    if (antipodal_count != nullptr) ++*antipodal_count;
  }
  const double theta = std::acos(clamp_cos(dot));
  return theta_over_sin(theta) * (y - dot * x);
}

Vector exp_map_unnormalized(const Vector& x, const Vector& u, double alpha) {
  if (x.size() != u.size()) fail(ErrorCode::ContractViolation, "exp_map: length mismatch");
  const double n = u.norm();
  if (n < 1e-12) return x;
  const double t = alpha * n;
  return std::cos(t) * x + (std::sin(t) / n) * u;
}

Vector exp_map(const Vector& x, const Vector& u, double alpha) {
  if (u.norm() < 1e-12) return x;
  const Vector out = exp_map_unnormalized(x, u, alpha);
  return out / out.norm();
}

}  // namespace geognn::sphere
