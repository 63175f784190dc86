#pragma once

// Phase-space primitives on A^m = T^m x R^m: angle reduction, the action
// projection, resonance half-circles on the unit action sphere, and the
// set-proximity predicates (Hausdorff distance, delta-density) used by the
// coverage reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdl/linalg.hpp"

namespace hdl {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Reduce to the fundamental domain [0, 2pi).
inline double reduce_angle(double x) {
  if (!std::isfinite(x)) throw std::domain_error("reduce_angle: non-finite input");
  double y = std::fmod(x, two_pi);
  if (y < 0) y += two_pi;
  // fmod of a negative epsilon can land exactly on 2pi after the shift
  if (y >= two_pi) y -= two_pi;
  return y;
}

// Signed minimal angular difference, in (-pi, pi].
inline double angle_diff(double a, double b) {
  double d = std::fmod(a - b, two_pi);
  if (d <= -std::numbers::pi) d += two_pi;
  if (d > std::numbers::pi) d -= two_pi;
  return d;
}

template <std::size_t M>
struct PhasePoint {
  std::array<double, M> theta{};  // each in [0, 2pi)
  std::array<double, M> r{};

  PhasePoint() = default;
  PhasePoint(std::array<double, M> th, std::array<double, M> rr) : theta(th), r(rr) {
    for (auto& a : theta) a = reduce_angle(a);
  }
};

template <std::size_t M>
inline double torus_dist(const PhasePoint<M>& a, const PhasePoint<M>& b) {
  double s = 0;
  for (std::size_t i = 0; i < M; ++i) {
    double d = angle_diff(a.theta[i], b.theta[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Product metric on T^m x R^m.
template <std::size_t M>
inline double phase_dist(const PhasePoint<M>& a, const PhasePoint<M>& b) {
  double s = 0;
  for (std::size_t i = 0; i < M; ++i) {
    double d = angle_diff(a.theta[i], b.theta[i]);
    s += d * d;
    double e = a.r[i] - b.r[i];
    s += e * e;
  }
  return std::sqrt(s);
}

inline Vec<3> project_actions(const PhasePoint<3>& p) {
  return Vec<3>{{p.r[0], p.r[1], p.r[2]}};
}

// Primitive integer vector (k2, k3) labelling a simple resonance.
struct ResonanceClass {
  int k2, k3;

  ResonanceClass(int a, int b) : k2(a), k3(b) {
    if (k2 == 0 && k3 == 0) throw std::invalid_argument("resonance class: k = (0,0)");
    if (std::gcd(std::abs(k2), std::abs(k3)) != 1)
      throw std::invalid_argument("resonance class: k not primitive");
  }

  double norm() const { return std::hypot(double(k2), double(k3)); }

  bool operator==(const ResonanceClass& o) const { return k2 == o.k2 && k3 == o.k3; }
};

struct PointCloud {
  std::vector<Vec<3>> points;
  std::string tag;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

// The half great circle of the unit action sphere cut out by
//   rbar . k = 0,   (-r3, r2) . k >= 0,
// joining (1,0,0) to (-1,0,0). Parameterized by phi in [0, pi]:
//   r(phi) = (cos phi, sin phi * k3/|k|, -sin phi * k2/|k|).
inline Vec<3> half_circle_point(const ResonanceClass& k, double phi) {
  double nk = k.norm();
  return Vec<3>{{std::cos(phi), std::sin(phi) * k.k3 / nk, -std::sin(phi) * k.k2 / nk}};
}

inline PointCloud resonance_half_circle(const ResonanceClass& k, std::size_t n_samples) {
  if (n_samples < 2) throw std::invalid_argument("resonance_half_circle: need >= 2 samples");
  PointCloud c;
  c.tag = "resonance circle";
  c.points.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    double phi = std::numbers::pi * double(i) / double(n_samples - 1);
    c.points.push_back(half_circle_point(k, phi));
  }
  return c;
}

inline double dist3(const Vec<3>& a, const Vec<3>& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

// min_{x in cloud} |y - x|, with an early-out threshold for the scans below.
inline double dist_to_cloud(const Vec<3>& y, const PointCloud& s) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : s.points) {
    double d0 = y[0] - x[0], d1 = y[1] - x[1], d2 = y[2] - x[2];
    double d = d0 * d0 + d1 * d1 + d2 * d2;
    if (d < best) best = d;
  }
  return std::sqrt(best);
}

// One-sided: sup_{y in f} dist(y, s).
inline double directed_hausdorff(const PointCloud& f, const PointCloud& s) {
  if (f.empty() || s.empty()) throw std::invalid_argument("hausdorff: empty cloud");
  double worst = 0;
  for (const auto& y : f.points) worst = std::max(worst, dist_to_cloud(y, s));
  return worst;
}

inline double hausdorff_distance(const PointCloud& a, const PointCloud& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

struct DensityResult {
  bool dense;
  double worst_gap;  // sup over f of the distance to s
};

// Is every point of f within delta of the sample cloud s?
inline DensityResult delta_dense(const PointCloud& s, const PointCloud& f, double delta) {
  if (delta <= 0) throw std::invalid_argument("delta_dense: delta must be positive");
  double gap = directed_hausdorff(f, s);
  return {gap <= delta, gap};
}

// --- serialization -------------------------------------------------------

inline void write_clouds_csv(std::ostream& os, const std::vector<PointCloud>& clouds) {
  os << "x,y,z,tag\n";
  char buf[128];
  for (const auto& c : clouds)
    for (const auto& p : c.points) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,", p[0], p[1], p[2]);
      os << buf << c.tag << "\n";
    }
}

inline void write_clouds_csv(const std::string& path, const std::vector<PointCloud>& clouds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_clouds_csv(os, clouds);
}

inline std::vector<PointCloud> read_clouds_csv(std::istream& is) {
  std::vector<PointCloud> out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("point cloud csv: empty file");
  if (line.rfind("x,y,z,tag", 0) != 0) throw std::runtime_error("point cloud csv: bad header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Vec<3> p;
    char comma;
    std::string tag;
    if (!(ls >> p[0] >> comma >> p[1] >> comma >> p[2] >> comma))
      throw std::runtime_error("point cloud csv: bad row: " + line);
    std::getline(ls, tag);
    if (out.empty() || out.back().tag != tag) {
      out.push_back({{}, tag});
    }
    out.back().points.push_back(p);
  }
  return out;
}

inline std::vector<PointCloud> read_clouds_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_clouds_csv(is);
}

// JSON array form [[x,y,z],...] for programmatic consumers.
inline std::string cloud_json(const PointCloud& c) {
  std::string s = "[";
  char buf[96];
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    std::snprintf(buf, sizeof buf, "%s[%.17g,%.17g,%.17g]", i ? "," : "", p[0], p[1], p[2]);
    s += buf;
  }
  s += "]";
  return s;
}

}  // namespace hdl
