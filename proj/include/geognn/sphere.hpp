#pragma once

#include "geognn/types.hpp"

#include <cstddef>

namespace geognn::sphere {

/// Dot products are clamped to [-1 + kClampEps, 1 - kClampEps] before arccos.
inline constexpr double kClampEps = 1e-7;
/// Below this angle theta/sin(theta) is replaced by 1 + theta^2 / 6.
inline constexpr double kSeriesTheta = 1e-4;
/// x.y below -1 + kAntipodalEps is treated as an antipodal pair.
inline constexpr double kAntipodalEps = 1e-6;
/// Norms at or below this are zero.
inline constexpr double kZeroNorm = 1e-12;

enum class AntipodalPolicy {
  Strict,  ///< throw AntipodalAmbiguity
  Clamp,   ///< proceed with the clamped angle and count the pair
};

double clamp_cos(double dot) noexcept;

/// v / |v|; throws DegenerateInputError when |v| <= kZeroNorm.
Vector project_to_sphere(const Vector& v);

/// arccos of the clamped dot product, in [0, pi].
double geodesic_distance(const Vector& x, const Vector& y);

/// theta / sin(theta) with the small-angle series.
double theta_over_sin(double theta) noexcept;

/// Tangent vector at x pointing to y with length theta. The angle comes from
/// the clamped dot; the projection y - (x.y) x uses the raw dot so that
/// log_map(x, x) is exactly zero and the result stays orthogonal to x.
/// `antipodal_count` is incremented for near-antipodal pairs under Clamp.
Vector log_map(const Vector& x, const Vector& y,
               AntipodalPolicy policy = AntipodalPolicy::Strict,
               std::size_t* antipodal_count = nullptr);

/// cos(a|u|) x + sin(a|u|) u/|u| without the final renormalization.
Vector exp_map_unnormalized(const Vector& x, const Vector& u, double alpha);

/// exp_map_unnormalized followed by renormalization; x itself when |u| < 1e-12.
Vector exp_map(const Vector& x, const Vector& u, double alpha);

}  // namespace geognn::sphere
