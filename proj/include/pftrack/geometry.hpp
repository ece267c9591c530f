#pragma once

#include <cmath>
#include <stdexcept>

namespace pftrack {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec2 xy() const { return {x, y}; }
};

// Wraps an angle into (-pi, pi].
inline double normalize_yaw(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("normalize_yaw: non-finite angle");
  double r = std::remainder(theta, 2.0 * M_PI);  // [-pi, pi], ties may land on -pi
  if (r <= -M_PI) r += 2.0 * M_PI;
  if (r > M_PI) r -= 2.0 * M_PI;
  return r;
}

}  // namespace pftrack
