#pragma once

#include <cmath>

namespace bnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// wrap to (-pi, pi]
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]

  Vec2 position() const { return {x, y}; }

  // global point -> this pose's frame
  Vec2 to_frame(const Vec2& p) const {
    double dx = p.x - x, dy = p.y - y;
    double c = std::cos(theta), s = std::sin(theta);
    return {c * dx + s * dy, -s * dx + c * dy};
  }

  // point in this pose's frame -> global
  Vec2 from_frame(const Vec2& p) const {
    double c = std::cos(theta), s = std::sin(theta);
    return {x + c * p.x - s * p.y, y + s * p.x + c * p.y};
  }
};

inline double distance(const Pose& a, const Pose& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline double heading_error(const Pose& a, const Pose& b) {
  return wrap_angle(a.theta - b.theta);
}

}  // namespace bnav
