// Copyright 2026 The amp-motion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AMP__GEOMETRY_HPP_
#define AMP__GEOMETRY_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace amp
{

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

struct Point2D
{
  double x{0.0};
  double y{0.0};

  bool operator==(const Point2D &) const = default;
};

/**
 * @brief SE(2) reference frame: origin (x, y) in meters and heading theta in radians.
 *
 * theta is kept wrapped to (-pi, pi]; use make() or wrap on assignment.
 */
struct Pose2D
{
  double x{0.0};
  double y{0.0};
  double theta{0.0};

  static Pose2D make(double x, double y, double theta) { return {x, y, wrap_angle(theta)}; }

  bool operator==(const Pose2D &) const = default;
};

/// Displacement of one frame as seen from another.
struct RelativeTransform
{
  double dx{0.0};
  double dy{0.0};
  double dtheta{0.0};

  bool operator==(const RelativeTransform &) const = default;
};

/// How relative transforms between token frames are measured.
enum class DeltaMode {
  /// Translation rotated into the source frame; invariant under global rigid motion.
  kLocal,
  /// Raw global-frame difference (x_j - x_i, y_j - y_i, theta_j - theta_i).
  kGlobal,
};

/// dtheta lies in (-pi, pi]; differences within 1e-9 of +-pi are reported as pi.
RelativeTransform relative_transform(const Pose2D & src, const Pose2D & dst);
RelativeTransform relative_transform(const Pose2D & src, const Pose2D & dst, DeltaMode mode);

/// Composition a ∘ b: b expressed in a's frame, mapped to a's parent frame.
Pose2D compose(const Pose2D & a, const Pose2D & b);
Pose2D inverse(const Pose2D & p);

/// Local point in `frame` to the global frame.
Point2D apply_pose(const Pose2D & frame, const Point2D & local_point);
/// Global point into `frame` coordinates. Exact inverse of apply_pose up to rounding.
Point2D to_local(const Pose2D & frame, const Point2D & global_point);
/// Global pose into `frame` coordinates.
Pose2D to_local(const Pose2D & frame, const Pose2D & global_pose);

/// Rotates a free vector (e.g. a velocity) by `angle`.
Point2D rotate(const Point2D & v, double angle);

/// Geometric schedule f_k = f0 * 2^k, k = 0..count-1.
std::vector<double> geometric_frequencies(double f0, std::size_t count);

/// Width of fourier_encode output for the given frequency count.
constexpr std::size_t fourier_width(std::size_t num_frequencies) { return 2 * num_frequencies * 3; }

/**
 * @brief Sinusoidal features of a relative transform.
 *
 * Layout: for d in (dx, dy, dtheta), for f in frequencies: [sin(f*d), cos(f*d)].
 * Throws ConfigError on an empty frequency list.
 */
std::vector<double> fourier_encode(const RelativeTransform & rel, std::span<const double> frequencies);

/// Same as above, writing into `out` (must hold fourier_width(frequencies.size()) values).
void fourier_encode(
  const RelativeTransform & rel, std::span<const double> frequencies, std::span<double> out);

}  // namespace amp

#endif  // AMP__GEOMETRY_HPP_
