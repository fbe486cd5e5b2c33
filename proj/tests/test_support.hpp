#pragma once

#include <random>

#include "cosserat/algebra.hpp"
#include "cosserat/grid.hpp"

namespace cosserat::testing {

inline UnitQuat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return UnitQuat::normalized(Vec4(n(rng), n(rng), n(rng), n(rng)));
}

inline Mat3 random_mat(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i) = n(rng);
  return m;
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return Vec3(n(rng), n(rng), n(rng));
}

/// Random tangent vector at q.
inline Vec4 random_tangent(std::mt19937_64& rng, const UnitQuat& q) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Vec4 v(n(rng), n(rng), n(rng), n(rng));
  return v - v.dot(q.coeffs()) * q.coeffs();
}

/// Orthonormal basis of T_q S^3: q * (0, e_k).
inline std::array<Vec4, 3> tangent_basis(const UnitQuat& q) {
  std::array<Vec4, 3> b;
  for (int k = 0; k < 3; ++k) {
    Vec4 e = Vec4::Zero();
    e[k + 1] = 1.0;
    b[k] = quat_mul(q.coeffs(), e);
  }
  return b;
}

/// phi = x + amp * noise and random rotations on every free node.
inline GridState random_state(const Grid& g, std::mt19937_64& rng, double phi_noise = 0.1,
                              bool random_boundary = true) {
  GridState s = GridState::identity(g);
  for (std::size_t id : g.active_nodes()) {
    if (!random_boundary && s.dirichlet[id]) continue;
    s.phi[id] = g.x(id) + random_vec(rng, phi_noise);
    s.rot[id] = random_quat(rng);
  }
  return s;
}

}  // namespace cosserat::testing
