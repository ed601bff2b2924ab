#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "hover/common.hpp"

namespace hover::test {

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f at p along coordinate i.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                 Eigen::VectorXd p, Eigen::Index i, double h = 1e-6) {
  const double x = p[i];
  p[i] = x + h;
  const double up = f(p);
  p[i] = x - h;
  const double down = f(p);
  return (up - down) / (2.0 * h);
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(dist(rng), dist(rng), dist(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

}  // namespace hover::test
