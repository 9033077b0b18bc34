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

#include "amp/geometry.hpp"

#include "amp/errors.hpp"

#include <cmath>

namespace amp
{
namespace
{
void require_finite(double v, const char * what)
{
  if (!std::isfinite(v)) {
    throw DomainError(std::string("non-finite ") + what);
  }
}

void require_finite(const Pose2D & p)
{
  require_finite(p.x, "pose x");
  require_finite(p.y, "pose y");
  require_finite(p.theta, "pose theta");
}
}  // namespace

double wrap_angle(double angle)
{
  if (!std::isfinite(angle)) {
    throw DomainError("non-finite angle");
  }
  if (angle > -M_PI && angle <= M_PI) {
    return angle;
  }
  double a = std::remainder(angle, 2.0 * M_PI);  // [-pi, pi]
  if (a <= -M_PI) {
    a += 2.0 * M_PI;
  }
  return a;
}

Point2D rotate(const Point2D & v, double angle)
{
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

namespace
{
constexpr double kOppositeHeadingTolerance = 1e-9;
}  // namespace

RelativeTransform relative_transform(const Pose2D & src, const Pose2D & dst)
{
  return relative_transform(src, dst, DeltaMode::kLocal);
}

RelativeTransform relative_transform(const Pose2D & src, const Pose2D & dst, DeltaMode mode)
{
  require_finite(src);
  require_finite(dst);
  const double gx = dst.x - src.x;
  const double gy = dst.y - src.y;
  double dtheta = wrap_angle(dst.theta - src.theta);
  // Opposite headings land on either side of the cut depending on rounding.
  if (M_PI - std::abs(dtheta) < kOppositeHeadingTolerance) {
    dtheta = M_PI;
  }
  if (mode == DeltaMode::kGlobal) {
    return {gx, gy, dtheta};
  }
  const double c = std::cos(src.theta);
  const double s = std::sin(src.theta);
  return {c * gx + s * gy, -s * gx + c * gy, dtheta};
}

Pose2D compose(const Pose2D & a, const Pose2D & b)
{
  const Point2D p = apply_pose(a, {b.x, b.y});
  return {p.x, p.y, wrap_angle(a.theta + b.theta)};
}

Pose2D inverse(const Pose2D & p)
{
  const Point2D t = rotate({-p.x, -p.y}, -p.theta);
  return {t.x, t.y, wrap_angle(-p.theta)};
}

Point2D apply_pose(const Pose2D & frame, const Point2D & local_point)
{
  require_finite(frame);
  require_finite(local_point.x, "point x");
  require_finite(local_point.y, "point y");
  const Point2D r = rotate(local_point, frame.theta);
  return {r.x + frame.x, r.y + frame.y};
}

Point2D to_local(const Pose2D & frame, const Point2D & global_point)
{
  require_finite(frame);
  require_finite(global_point.x, "point x");
  require_finite(global_point.y, "point y");
  const double gx = global_point.x - frame.x;
  const double gy = global_point.y - frame.y;
  const double c = std::cos(frame.theta);
  const double s = std::sin(frame.theta);
  return {c * gx + s * gy, -s * gx + c * gy};
}

Pose2D to_local(const Pose2D & frame, const Pose2D & global_pose)
{
  const Point2D p = to_local(frame, Point2D{global_pose.x, global_pose.y});
  return {p.x, p.y, wrap_angle(global_pose.theta - frame.theta)};
}

std::vector<double> geometric_frequencies(double f0, std::size_t count)
{
  if (count == 0 || !(f0 > 0.0)) {
    throw ConfigError("frequency schedule needs count >= 1 and f0 > 0");
  }
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = std::ldexp(f0, static_cast<int>(k));
  }
  return out;
}

std::vector<double> fourier_encode(const RelativeTransform & rel, std::span<const double> frequencies)
{
  if (frequencies.empty()) {
    throw ConfigError("fourier_encode: empty frequency list");
  }
  std::vector<double> out(fourier_width(frequencies.size()));
  fourier_encode(rel, frequencies, out);
  return out;
}

void fourier_encode(
  const RelativeTransform & rel, std::span<const double> frequencies, std::span<double> out)
{
  if (frequencies.empty()) {
    throw ConfigError("fourier_encode: empty frequency list");
  }
  if (out.size() != fourier_width(frequencies.size())) {
    throw ShapeError("fourier_encode: output buffer width mismatch");
  }
  const double inputs[3] = {rel.dx, rel.dy, rel.dtheta};
  std::size_t o = 0;
  for (double d : inputs) {
    for (double f : frequencies) {
      out[o++] = std::sin(f * d);
      out[o++] = std::cos(f * d);
    }
  }
}

}  // namespace amp
