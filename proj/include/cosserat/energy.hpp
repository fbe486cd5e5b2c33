#pragma once

// Discrete Cosserat energy
//   J = sum_n w_n ( |P(R^t D phi - I)|^2 + |DR|^p + phi . f + R : M ),
// its exact gradient with respect to node values, and the pointwise
// Euler-Lagrange residuals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cosserat/algebra.hpp"
#include "cosserat/grid.hpp"

namespace cosserat {

struct EnergyBreakdown {
  double translational = 0.0;
  double curvature = 0.0;
  double force = 0.0;
  double moment = 0.0;
  double total = 0.0;
};

/// Force density f and moment density M per node; empty vectors mean zero.
struct LoadSpec {
  std::vector<Vec3> f;
  std::vector<Mat3> m;

  bool has_force() const { return !f.empty(); }
  bool has_moment() const { return !m.empty(); }

  static LoadSpec constant(const Grid& g, const Vec3& f0, const Mat3& m0) {
    LoadSpec l;
    l.f.assign(g.size(), f0);
    l.m.assign(g.size(), m0);
    return l;
  }

  void validate(const Grid& g) const {
    if (has_force() && f.size() != g.size()) throw ValidationError("force field size mismatch");
    if (has_moment() && m.size() != g.size()) throw ValidationError("moment field size mismatch");
    for (std::size_t id : g.active_nodes()) {
      if (has_force() && !f[id].allFinite()) throw ValidationError("non-finite force density");
      if (has_moment() && !m[id].allFinite()) throw ValidationError("non-finite moment density");
    }
  }
};

/// |t|^(p-2) with the value 0 at t = 0 for p > 2 and 1 for p = 2.
inline double p_factor(double norm_sq, double p) {
  if (p == 2.0) return 1.0;
  if (norm_sq == 0.0) return 0.0;
  return std::pow(norm_sq, 0.5 * (p - 2.0));
}

/// Local kinematics at one node, from finite differences of the node fields.
struct NodeKinematics {
  Mat3 r;
  Mat3 dphi;
  Tensor3 dr;
};

inline NodeKinematics kinematics_at(const Grid& g, const GridState& s, std::size_t id) {
  NodeKinematics k;
  k.r = cover(s.rot[id]).matrix();
  const auto& st = g.stencils(id);
  for (int a = 0; a < 3; ++a) {
    k.dphi.col(a) = (s.phi[st[a].hi] - s.phi[st[a].lo]) * st[a].inv;
    k.dr[a] = (cover(s.rot[st[a].hi]).matrix() - cover(s.rot[st[a].lo]).matrix()) * st[a].inv;
  }
  return k;
}

/// Energy restricted to the listed nodes. The discrete energy is a sum of
/// node terms, so differences of this quantity equal differences of J
/// whenever the listed nodes cover every term that changed.
inline EnergyBreakdown energy_on(const Grid& g, const GridState& s, const MaterialParams& c,
                                 const LoadSpec& loads, std::span<const std::size_t> nodes) {
  EnergyBreakdown e;
  const Mat3 id3 = Mat3::Identity();
  for (std::size_t id : nodes) {
    if (!g.active(id)) continue;
    const double w = g.weight(id);
    const NodeKinematics k = kinematics_at(g, s, id);
    e.translational += w * apply_p(k.r.transpose() * k.dphi - id3, c).squaredNorm();
    e.curvature += w * std::pow(norm2(k.dr), 0.5 * c.p);
    if (loads.has_force()) e.force += w * s.phi[id].dot(loads.f[id]);
    if (loads.has_moment()) e.moment += w * frob_dot(k.r, loads.m[id]);
  }
  e.total = e.translational + e.curvature + e.force + e.moment;
  return e;
}

inline EnergyBreakdown total_energy(const Grid& g, const GridState& s, const MaterialParams& c,
                                    const LoadSpec& loads = {}) {
  c.validate();
  g.require_derivable();
  loads.validate(g);
  return energy_on(g, s, c, loads, g.active_nodes());
}

/// Gradient with respect to node deformations and quaternion coordinates.
/// g_rot is projected onto T_q S^3; both parts vanish on Dirichlet nodes.
struct EnergyGradient {
  std::vector<Vec3> phi;
  std::vector<Vec4> rot;

  double norm_sq() const {
    double s = 0.0;
    for (const auto& v : phi) s += v.squaredNorm();
    for (const auto& v : rot) s += v.squaredNorm();
    return s;
  }
};

inline EnergyGradient gradient(const Grid& g, const GridState& s, const MaterialParams& c,
                               const LoadSpec& loads = {}) {
  c.validate();
  g.require_derivable();
  loads.validate(g);
  const std::size_t total = g.size();
  const std::vector<Mat3> rmat = rotation_matrices(g, s.rot);
  std::vector<Vec3> g_phi(total, Vec3::Zero());
  std::vector<Mat3> g_r(total, Mat3::Zero());  // dJ/dR entrywise
  const Mat3 id3 = Mat3::Identity();

  for (std::size_t id : g.active_nodes()) {
    const double w = g.weight(id);
    const auto& st = g.stencils(id);
    Mat3 dphi;
    Tensor3 dr;
    for (int a = 0; a < 3; ++a) {
      dphi.col(a) = (s.phi[st[a].hi] - s.phi[st[a].lo]) * st[a].inv;
      dr[a] = (rmat[st[a].hi] - rmat[st[a].lo]) * st[a].inv;
    }
    const Mat3& r = rmat[id];
    const Mat3 strain = r.transpose() * dphi - id3;
    const Mat3 p2 = apply_p2(strain, c);

    // d/d(D phi) |P(R^t D phi - I)|^2 = 2 R P^2(R^t D phi - I)
    const Mat3 stress = 2.0 * w * r * p2;
    for (int a = 0; a < 3; ++a) {
      const Vec3 col = stress.col(a) * st[a].inv;
      g_phi[st[a].hi] += col;
      g_phi[st[a].lo] -= col;
    }
    // d/dR |P(R^t D phi - I)|^2 = 2 D phi (P^2(R^t D phi - I))^t
    g_r[id] += 2.0 * w * dphi * p2.transpose();

    // d/d(d_k R) |DR|^p = p |DR|^(p-2) d_k R
    const double scale = w * c.p * p_factor(norm2(dr), c.p);
    if (scale != 0.0) {
      for (int a = 0; a < 3; ++a) {
        const Mat3 flux = scale * dr[a] * st[a].inv;
        g_r[st[a].hi] += flux;
        g_r[st[a].lo] -= flux;
      }
    }
    if (loads.has_force()) g_phi[id] += w * loads.f[id];
    if (loads.has_moment()) g_r[id] += w * loads.m[id];
  }

  EnergyGradient out;
  out.phi.assign(total, Vec3::Zero());
  out.rot.assign(total, Vec4::Zero());
  for (std::size_t id : g.active_nodes()) {
    if (s.dirichlet[id]) continue;
    out.phi[id] = g_phi[id];
    const auto d = cover_jacobian(s.rot[id].coeffs());
    Vec4 gq;
    for (int a = 0; a < 4; ++a) gq[a] = frob_dot(g_r[id], d[a]);
    out.rot[id] = sphere_project(s.rot[id], gq);
  }
  return out;
}

/// Relative l2 mismatch between `gradient` and central differences of the
/// energy along every free coordinate (phi components, and the tangent
/// directions q (0, e_k) followed by retraction).
struct GradientCheck {
  double rel_error = 0.0;
  double fd_norm = 0.0;
  std::size_t coordinates = 0;
};

inline GradientCheck gradient_check(const Grid& g, const GridState& s, const MaterialParams& c,
                                    const LoadSpec& loads = {}, double step = 1e-5) {
  const EnergyGradient grad = gradient(g, s, c, loads);
  GridState work = s;
  double diff_sq = 0.0, ref_sq = 0.0;
  GradientCheck out;
  std::vector<std::size_t> local;
  for (std::size_t id : g.active_nodes()) {
    if (s.dirichlet[id]) continue;
    // Terms that read node `id`: the node itself and its stencil partners.
    local.assign(1, id);
    const auto ijk = g.ijk(id);
    for (int a = 0; a < 3; ++a)
      for (int d : {-1, 1}) {
        auto nb = ijk;
        nb[a] += d;
        if (g.is_active(nb[0], nb[1], nb[2])) local.push_back(g.index(nb[0], nb[1], nb[2]));
      }
    auto energy = [&] { return energy_on(g, work, c, loads, local).total; };
    auto accumulate = [&](double fd, double an) {
      diff_sq += (fd - an) * (fd - an);
      ref_sq += fd * fd;
      ++out.coordinates;
    };
    for (int a = 0; a < 3; ++a) {
      work.phi[id][a] = s.phi[id][a] + step;
      const double ep = energy();
      work.phi[id][a] = s.phi[id][a] - step;
      const double em = energy();
      work.phi[id][a] = s.phi[id][a];
      accumulate((ep - em) / (2.0 * step), grad.phi[id][a]);
    }
    for (int k = 1; k < 4; ++k) {
      Vec4 e = Vec4::Zero();
      e[k] = 1.0;
      const Vec4 dir = quat_mul(s.rot[id].coeffs(), e);
      work.rot[id] = retract(s.rot[id], step * dir);
      const double ep = energy();
      work.rot[id] = retract(s.rot[id], -step * dir);
      const double em = energy();
      work.rot[id] = s.rot[id];
      accumulate((ep - em) / (2.0 * step), grad.rot[id].dot(dir));
    }
  }
  out.fd_norm = std::sqrt(ref_sq);
  out.rel_error = ref_sq > 0.0 ? std::sqrt(diff_sq / ref_sq) : std::sqrt(diff_sq);
  return out;
}

/// Pointwise Euler-Lagrange residuals
///   res_phi = div(R P^2(R^t D phi - I)) - f
///   res_rot = proj_R( div(|DR|^(p-2) DR) - (2/p) D phi P^2((D phi)^t R - I) - M/p ),
/// evaluated only where every stencil involved is central.
struct ElResiduals {
  std::vector<Vec3> phi;
  std::vector<Mat3> rot;
  std::vector<std::uint8_t> evaluated;
  std::size_t evaluated_count = 0;
  std::size_t skipped_count = 0;  ///< active nodes without complete stencils
};

inline ElResiduals el_residuals(const Grid& g, const GridState& s, const MaterialParams& c,
                                const LoadSpec& loads = {}) {
  c.validate();
  g.require_derivable();
  loads.validate(g);
  const std::size_t total = g.size();
  const std::vector<Mat3> rmat = rotation_matrices(g, s.rot);
  const std::vector<Mat3> dphi = gradient_vector(g, s.phi);
  const std::vector<Tensor3> dr = gradient_matrix(g, rmat);
  const Mat3 id3 = Mat3::Identity();

  std::vector<Mat3> stress(total, Mat3::Zero());
  std::vector<Tensor3> flux(total, Tensor3{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()});
  for (std::size_t id : g.active_nodes()) {
    stress[id] = rmat[id] * apply_p2(rmat[id].transpose() * dphi[id] - id3, c);
    const double f = p_factor(norm2(dr[id]), c.p);
    for (int a = 0; a < 3; ++a) flux[id][a] = f * dr[id][a];
  }
  const std::vector<Vec3> div_stress = divergence(g, stress);
  const std::vector<Mat3> div_flux = divergence(g, flux);

  ElResiduals out;
  out.phi.assign(total, Vec3::Zero());
  out.rot.assign(total, Mat3::Zero());
  out.evaluated.assign(total, 0);
  for (std::size_t id : g.active_nodes()) {
    if (!g.stencil_complete(id)) {
      ++out.skipped_count;
      continue;
    }
    Vec3 rp = div_stress[id];
    if (loads.has_force()) rp -= loads.f[id];
    Mat3 rr = div_flux[id] -
              (2.0 / c.p) * dphi[id] * apply_p2(dphi[id].transpose() * rmat[id] - id3, c);
    if (loads.has_moment()) rr -= loads.m[id] / c.p;
    out.phi[id] = rp;
    out.rot[id] = tangent_project(rmat[id], rr);
    out.evaluated[id] = 1;
    ++out.evaluated_count;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Growth and convexity probes of the integrand
//   W(y, z) = mu_e |dev sym B|^2 + mu_c |skew B|^2 + mu_0 (tr B - 3)^2 + |z_2|^2,
// with B = y_2^t z_1, y_2 in SO(3), z_1 in R^{3x3}, z_2 in R^{27}.

struct IntegrandArg {
  Mat3 z1;
  Tensor3 z2;

  double norm_sq() const { return z1.squaredNorm() + norm2(z2); }
  IntegrandArg midpoint(const IntegrandArg& o) const {
    IntegrandArg m;
    m.z1 = 0.5 * (z1 + o.z1);
    for (int k = 0; k < 3; ++k) m.z2[k] = 0.5 * (z2[k] + o.z2[k]);
    return m;
  }
};

inline double integrand_w(const Mat3& y2, const IntegrandArg& z, const MaterialParams& c) {
  const Mat3 b = y2.transpose() * z.z1;
  const double tr = b.trace();
  const double shift = c.convention == DeviatorConvention::trace_free ? tr / 3.0 : tr;
  const Mat3 dev = sym(b) - shift * Mat3::Identity();
  return c.mu_e * dev.squaredNorm() + c.mu_c * skew(b).squaredNorm() +
         c.mu_0 * (tr - 3.0) * (tr - 3.0) + norm2(z.z2);
}

struct GrowthReport {
  std::size_t samples = 0;
  double c = 0.0;
  std::size_t lower_violations = 0;
  std::size_t upper_violations = 0;
  std::size_t convexity_violations = 0;
  double worst_lower_margin = 0.0;      ///< min of W - (|z|^2/c - 18)
  double worst_upper_margin = 0.0;      ///< min of c|z|^2 + 18 - W
  double worst_convexity_margin = 0.0;  ///< min of (W(z)+W(z'))/2 - W((z+z')/2)

  bool ok() const { return lower_violations + upper_violations + convexity_violations == 0; }
};

/// The growth constant max{mu_c, mu_e, mu_0, 1}.
inline double growth_constant(const MaterialParams& c) {
  return std::max({c.mu_c, c.mu_e, c.mu_0, 1.0});
}

/// Samples y_2 uniformly on SO(3) and z with i.i.d. N(0, sigma^2) entries.
inline GrowthReport check_growth_convexity(const MaterialParams& c, std::size_t sample_count,
                                           std::uint64_t seed = 1, double sigma = 1.0,
                                           std::optional<double> c_override = std::nullopt) {
  c.validate();
  if (c.p != 2.0) throw ConfigError("growth/convexity probes assume p = 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_z = [&] {
    IntegrandArg z;
    for (int i = 0; i < 9; ++i) z.z1(i) = sigma * normal(rng);
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 9; ++i) z.z2[k](i) = sigma * normal(rng);
    return z;
  };
  GrowthReport rep;
  rep.c = c_override.value_or(growth_constant(c));
  rep.samples = sample_count;
  rep.worst_lower_margin = rep.worst_upper_margin = rep.worst_convexity_margin =
      std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sample_count; ++i) {
    const Vec4 qv(normal(rng), normal(rng), normal(rng), normal(rng));
    const Mat3 y2 = cover(UnitQuat::normalized(qv)).matrix();
    const IntegrandArg z = draw_z();
    const IntegrandArg z2 = draw_z();
    const double w = integrand_w(y2, z, c);
    const double nz = z.norm_sq();
    const double lower = w - (nz / rep.c - 18.0);
    const double upper = rep.c * nz + 18.0 - w;
    const double conv =
        0.5 * (w + integrand_w(y2, z2, c)) - integrand_w(y2, z.midpoint(z2), c);
    rep.worst_lower_margin = std::min(rep.worst_lower_margin, lower);
    rep.worst_upper_margin = std::min(rep.worst_upper_margin, upper);
    rep.worst_convexity_margin = std::min(rep.worst_convexity_margin, conv);
    if (lower < 0.0) ++rep.lower_violations;
    if (upper < 0.0) ++rep.upper_violations;
    // Midpoint convexity up to rounding of the three evaluations.
    if (conv < -1e-12 * (1.0 + std::abs(w))) ++rep.convexity_violations;
  }
  return rep;
}

}  // namespace cosserat
