#pragma once

// Diagnostics around the explicit singular solution, the monotonicity
// quantities of minimizers, and the Kato-type nonexistence criterion for
// p-minimizing tangent maps into S^3.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "cosserat/energy.hpp"
#include "cosserat/grid.hpp"

namespace cosserat {

// ---------------------------------------------------------------------------
// Closed forms of the singular pair phi = (4/3) x log|x|, R = 2 xhat xhat - I

struct SingularBundle {
  Vec3 phi;
  Mat3 rot;
  Mat3 d_phi;   ///< column i = d_i phi
  Vec3 lap_phi;
  Vec3 div_rot;
  Tensor3 d_rot;  ///< slot k = d_k R
  Mat3 div_stress_paper;      ///< 2^p |x|^-p (I - 3 xhat xhat)
  Mat3 div_stress_frobenius;  ///< same quantity with |DR| measured entrywise
};

inline SingularBundle singular_bundle(const Vec3& x, double p) {
  const double r = x.norm();
  if (!(r > 1e-8)) throw DomainError("singular_bundle: |x| must exceed 1e-8");
  if (!(p >= 2.0 && p <= 3.0)) throw DomainError("singular_bundle: p must lie in [2, 3]");
  const double r2 = r * r;
  const Vec3 u = x / r;
  const Mat3 id3 = Mat3::Identity();
  SingularBundle b;
  b.phi = singular_phi_at(x);
  b.rot = 2.0 * u * u.transpose() - id3;
  b.d_phi = (4.0 / 3.0) * (std::log(r) * id3 + u * u.transpose());
  b.lap_phi = 4.0 * x / r2;
  b.div_rot = 4.0 * x / r2;
  for (int k = 0; k < 3; ++k) {
    Mat3 d;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        d(i, j) = 2.0 / r2 * ((j == k ? x[i] : 0.0) + (i == k ? x[j] : 0.0)) -
                  4.0 * x[i] * x[j] * x[k] / (r2 * r2);
    b.d_rot[k] = d;
  }
  const Mat3 shape = id3 - 3.0 * u * u.transpose();
  b.div_stress_paper = std::pow(2.0, p) / std::pow(r, p) * shape;
  b.div_stress_frobenius = std::pow(2.0, 2.0 * p - 2.0) / std::pow(r, p) * shape;
  return b;
}

/// Grid holding the sampled singular pair.
inline GridState sample_singular_pair(const Grid& g) {
  GridState s = GridState::identity(g);
  sample(FieldTag::singular_phi, g, s);
  sample(FieldTag::singular_rot, g, s);
  return s;
}

struct ResidualNorms {
  int n = 0;
  double h = 0.0;
  std::size_t nodes = 0;  ///< nodes inside the evaluation shell
  std::size_t skipped = 0;
  double max_phi = 0.0;
  double l2_phi = 0.0;
  double max_rot = 0.0;
  double l2_rot = 0.0;
};

struct SingularVerification {
  double p = 2.0;
  std::vector<ResidualNorms> levels;
  /// Observed orders between consecutive levels, log(e_coarse/e_fine)/log(h_coarse/h_fine).
  std::vector<double> order_max_phi, order_l2_phi, order_max_rot, order_l2_rot;
  double orthogonality_max = 0.0;  ///< max |proj_R(aI + b x x^t)| over sampled points
  std::size_t orthogonality_samples = 0;

  double min_order() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto* v : {&order_max_phi, &order_l2_phi, &order_max_rot, &order_l2_rot})
      for (double o : *v) m = std::min(m, o);
    return m;
  }
};

struct VerifyOptions {
  double shell_inner = 0.55;  ///< evaluation shell, as fractions of the extent
  double shell_outer = 0.8;
  double puncture_factor = 3.0;  ///< puncture radius in units of h
  std::size_t orthogonality_samples = 1000;
  std::uint64_t seed = 7;
};

inline ResidualNorms residual_norms(const Grid& g, const GridState& s, const MaterialParams& c,
                                    const VerifyOptions& opt) {
  const ElResiduals res = el_residuals(g, s, c);
  ResidualNorms out;
  out.n = g.n();
  out.h = g.h();
  out.skipped = res.skipped_count;
  const double lo = opt.shell_inner * g.spec().extent;
  const double hi = opt.shell_outer * g.spec().extent;
  for (std::size_t id : g.active_nodes()) {
    const double r = g.x(id).norm();
    if (r < lo || r > hi || !res.evaluated[id]) continue;
    ++out.nodes;
    const double w = g.weight(id);
    out.max_phi = std::max(out.max_phi, res.phi[id].norm());
    out.max_rot = std::max(out.max_rot, res.rot[id].norm());
    out.l2_phi += w * res.phi[id].squaredNorm();
    out.l2_rot += w * res.rot[id].squaredNorm();
  }
  out.l2_phi = std::sqrt(out.l2_phi);
  out.l2_rot = std::sqrt(out.l2_rot);
  return out;
}

/// Samples the singular pair on punctured unit-ball grids of the given sizes
/// and measures interior Euler-Lagrange residuals and their convergence.
inline SingularVerification verify_singular(const std::vector<int>& sizes, const MaterialParams& c,
                                            const VerifyOptions& opt = {}) {
  c.validate();
  if (!(c.p >= 2.0 && c.p < 3.0)) throw ConfigError("verify_singular: p must lie in [2, 3)");
  if (sizes.size() < 2) throw ConfigError("verify_singular: need at least two grid sizes");
  SingularVerification out;
  out.p = c.p;
  for (int n : sizes) {
    GridSpec spec;
    spec.n = n;
    spec.extent = 1.0;
    spec.shape = DomainShape::ball;
    spec.puncture_radius = opt.puncture_factor * spec.spacing();
    const Grid g(spec);
    const GridState s = sample_singular_pair(g);
    out.levels.push_back(residual_norms(g, s, c, opt));
  }
  auto order = [](double ec, double ef, double hc, double hf) { return std::log(ec / ef) / std::log(hc / hf); };
  for (std::size_t i = 1; i < out.levels.size(); ++i) {
    const auto& a = out.levels[i - 1];
    const auto& b = out.levels[i];
    out.order_max_phi.push_back(order(a.max_phi, b.max_phi, a.h, b.h));
    out.order_l2_phi.push_back(order(a.l2_phi, b.l2_phi, a.h, b.h));
    out.order_max_rot.push_back(order(a.max_rot, b.max_rot, a.h, b.h));
    out.order_l2_rot.push_back(order(a.l2_rot, b.l2_rot, a.h, b.h));
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t taken = 0;
  while (taken < opt.orthogonality_samples) {
    const Vec3 x(box(rng), box(rng), box(rng));
    if (x.norm() < 1e-3 || x.norm() > 1.0) continue;
    ++taken;
    const Mat3 r = cover(equator_quat_at(x)).matrix();
    const Mat3 normal_dir = normal(rng) * Mat3::Identity() + normal(rng) * x * x.transpose();
    out.orthogonality_max = std::max(out.orthogonality_max, tangent_project(r, normal_dir).cwiseAbs().maxCoeff());
  }
  out.orthogonality_samples = taken;
  return out;
}

// ---------------------------------------------------------------------------
// Monotonicity quantities

/// Per-node densities entering the monotonicity formula around a center.
struct MonotonicityDensities {
  std::vector<double> energy;     ///< |P(R^t D phi)|^2 + |DR|^p
  std::vector<double> q;          ///< Q(phi, R)
  std::vector<double> radial;     ///< |DR|^(p-2) |d_rad R|^2
  std::vector<double> tangential_phi;  ///< |P(R^t (D phi - d_rad phi (x) xhat))|^2
  std::vector<double> tangential_rot;  ///< |DR|^(p-2) (|DR|^2 - |d_rad R|^2)
};

/// Q(phi, R) = |P(R^t D phi)|^2 - |P(R^t (D phi - d_rad phi (x) xhat))|^2 at one point.
inline double q_density(const Mat3& r, const Mat3& dphi, const Vec3& xhat, const MaterialParams& c) {
  const Mat3 radial_part = (dphi * xhat) * xhat.transpose();
  return apply_p(r.transpose() * dphi, c).squaredNorm() -
         apply_p(r.transpose() * (dphi - radial_part), c).squaredNorm();
}

inline MonotonicityDensities monotonicity_densities(const Grid& g, const GridState& s, const Vec3& center,
                                                    const MaterialParams& c) {
  c.validate();
  g.require_derivable();
  const std::size_t total = g.size();
  MonotonicityDensities d;
  d.energy.assign(total, 0.0);
  d.q.assign(total, 0.0);
  d.radial.assign(total, 0.0);
  d.tangential_phi.assign(total, 0.0);
  d.tangential_rot.assign(total, 0.0);
  for (std::size_t id : g.active_nodes()) {
    const NodeKinematics k = kinematics_at(g, s, id);
    const Vec3 rel = g.x(id) - center;
    const double rn = rel.norm();
    const Vec3 xhat = rn > 0.0 ? Vec3(rel / rn) : Vec3::Zero();
    const double dr2 = norm2(k.dr);
    const double pf = p_factor(dr2, c.p);
    const Mat3 drad = xhat[0] * k.dr[0] + xhat[1] * k.dr[1] + xhat[2] * k.dr[2];
    const double full = apply_p(k.r.transpose() * k.dphi, c).squaredNorm();
    const double tang = apply_p(k.r.transpose() * (k.dphi - (k.dphi * xhat) * xhat.transpose()), c).squaredNorm();
    d.energy[id] = full + std::pow(dr2, 0.5 * c.p);
    d.q[id] = full - tang;
    d.radial[id] = pf * drad.squaredNorm();
    d.tangential_phi[id] = tang;
    d.tangential_rot[id] = pf * (dr2 - drad.squaredNorm());
  }
  return d;
}

struct MonotonicityReport {
  Vec3 center = Vec3::Zero();
  double p = 2.0;
  std::vector<double> radii;
  std::vector<double> ball_energy;  ///< integral of the energy density over B_r (incl. core)
  std::vector<double> phi_profile;  ///< r^(p-3) ball_energy
  std::vector<double> deficit;      ///< annulus (r_{i-1}, r_i]: |x|^(p-3)(|DR|^(p-2)|d_rad R|^2 + Q); deficit[0] over B_{r_0}
  double q_min = 0.0;
  double core_energy = 0.0;  ///< homogeneous closure of the masked puncture
  double core_radius = 0.0;
};

/// Smoothed ball indicator: 1 inside, 0 outside, linear across one spacing.
inline double ball_fraction(double dist, double radius, double h) {
  return std::clamp((radius - dist) / h + 0.5, 0.0, 1.0);
}

/// Integrates monotonicity densities over balls around `center`. When the
/// grid is punctured at the center, the masked core is closed by the radially
/// constant extension of the innermost node shell (energy rho/(3-p) times the
/// sphere integral of the tangential rotation density, rho times that of the
/// tangential deformation density).
inline MonotonicityReport monotonicity_from_densities(const Grid& g, const MonotonicityDensities& d,
                                                      const Vec3& center, const std::vector<double>& radii,
                                                      double p) {
  if (!(p >= 2.0 && p < 3.0)) throw DomainError("monotonicity: p must lie in [2, 3)");
  const double h = g.h();
  for (double r : radii) {
    if (!(r > 0.0)) throw DomainError("monotonicity: radii must be positive");
    const double reach = center.cwiseAbs().maxCoeff() + r;
    const double limit = g.spec().extent;
    const double reach_ball = center.norm() + r;
    if ((g.spec().shape == DomainShape::cube && reach > limit + 1e-12) ||
        (g.spec().shape == DomainShape::ball && reach_ball > limit + 1e-12)) {
      throw DomainError("monotonicity: radius exceeds the domain");
    }
  }
  if (!std::is_sorted(radii.begin(), radii.end())) throw DomainError("monotonicity: radii must be sorted");

  MonotonicityReport rep;
  rep.center = center;
  rep.p = p;
  rep.radii = radii;
  rep.q_min = std::numeric_limits<double>::infinity();
  for (std::size_t id : g.active_nodes()) rep.q_min = std::min(rep.q_min, d.q[id]);

  const double puncture = g.spec().puncture_radius;
  if (puncture > 0.0 && center.norm() < 1e-12) {
    const double rho = g.effective_puncture_radius();
    double sum_rot = 0.0, sum_phi = 0.0;
    std::size_t count = 0;
    for (std::size_t id : g.active_nodes()) {
      const double dist = g.x(id).norm();
      if (dist >= puncture + h) continue;
      sum_rot += d.tangential_rot[id] * std::pow(dist / rho, p);
      sum_phi += d.tangential_phi[id] * (dist / rho) * (dist / rho);
      ++count;
    }
    if (count > 0) {
      const double area = 4.0 * M_PI * rho * rho;
      rep.core_energy = rho * area * (sum_phi / count + sum_rot / count / (3.0 - p));
      rep.core_radius = rho;
    }
  }

  double previous = 0.0;
  for (double r : radii) {
    double e = rep.core_energy;
    double def = 0.0;
    for (std::size_t id : g.active_nodes()) {
      const double dist = (g.x(id) - center).norm();
      const double in = ball_fraction(dist, r, h);
      if (in == 0.0) continue;
      const double w = g.weight(id);
      e += w * in * d.energy[id];
      const double shell = in - ball_fraction(dist, previous, h) * (previous > 0.0 ? 1.0 : 0.0);
      if (shell > 0.0 && dist > 0.0) def += w * shell * std::pow(dist, p - 3.0) * (d.radial[id] + d.q[id]);
    }
    rep.ball_energy.push_back(e);
    rep.phi_profile.push_back(std::pow(r, p - 3.0) * e);
    rep.deficit.push_back(def);
    previous = r;
  }
  return rep;
}

inline MonotonicityReport monotonicity_profile(const Grid& g, const GridState& s, const Vec3& center,
                                               const std::vector<double>& radii, const MaterialParams& c) {
  return monotonicity_from_densities(g, monotonicity_densities(g, s, center, c), center, radii, c.p);
}

/// Densities of the pair (phi = 0, R = 2 xhat xhat - I) from the closed-form
/// derivatives of R instead of finite differences.
inline MonotonicityDensities equator_densities(const Grid& g, double p) {
  const std::size_t total = g.size();
  MonotonicityDensities d;
  d.energy.assign(total, 0.0);
  d.q.assign(total, 0.0);
  d.radial.assign(total, 0.0);
  d.tangential_phi.assign(total, 0.0);
  d.tangential_rot.assign(total, 0.0);
  for (std::size_t id : g.active_nodes()) {
    const double dr2 = norm2(singular_bundle(g.x(id), p).d_rot);
    d.energy[id] = std::pow(dr2, 0.5 * p);
    d.tangential_rot[id] = d.energy[id];
  }
  return d;
}

/// Radial comparison map: inside B_t(center) every node takes the value at
/// its radial projection onto the sphere of radius t (trilinear
/// interpolation, quaternions sign-aligned and renormalized). The center node
/// itself takes the value at center + t e_1.
inline GridState radial_comparison(const Grid& g, const GridState& s, double t, const Vec3& center) {
  if (!(t > 0.0)) throw DomainError("radial_comparison: t must be positive");
  const double L = g.spec().extent;
  const double h = g.h();
  auto interpolate = [&](const Vec3& y, Vec3& phi_out, UnitQuat& q_out) {
    const Vec3 u = (y + Vec3::Constant(L)) / h;
    std::array<int, 3> base;
    Vec3 frac;
    for (int a = 0; a < 3; ++a) {
      base[a] = std::clamp(static_cast<int>(std::floor(u[a])), 0, g.n() - 2);
      frac[a] = u[a] - base[a];
    }
    double wsum = 0.0;
    Vec3 phi = Vec3::Zero();
    Vec4 q = Vec4::Zero();
    std::optional<Vec4> ref;
    for (int c = 0; c < 8; ++c) {
      const int i = base[0] + (c & 1), j = base[1] + ((c >> 1) & 1), k = base[2] + ((c >> 2) & 1);
      const double w = ((c & 1) ? frac[0] : 1 - frac[0]) * (((c >> 1) & 1) ? frac[1] : 1 - frac[1]) *
                       (((c >> 2) & 1) ? frac[2] : 1 - frac[2]);
      if (w <= 0.0 || !g.is_active(i, j, k)) continue;
      const std::size_t id = g.index(i, j, k);
      Vec4 qc = s.rot[id].coeffs();
      if (!ref) ref = qc;
      if (qc.dot(*ref) < 0.0) qc = -qc;
      phi += w * s.phi[id];
      q += w * qc;
      wsum += w;
    }
    if (!(wsum > 0.0)) throw DomainError("radial_comparison: interpolation point outside the active region");
    phi_out = phi / wsum;
    q_out = UnitQuat::normalized(q);
  };

  GridState out = s;
  for (std::size_t id : g.active_nodes()) {
    const Vec3 rel = g.x(id) - center;
    const double dist = rel.norm();
    if (dist >= t) continue;
    const Vec3 dir = dist > 0.0 ? Vec3(rel / dist) : Vec3::UnitX();
    interpolate(center + t * dir, out.phi[id], out.rot[id]);
  }
  return out;
}

/// Node indices with |x - center| < t.
inline std::vector<std::size_t> nodes_in_ball(const Grid& g, const Vec3& center, double t) {
  std::vector<std::size_t> ids;
  for (std::size_t id : g.active_nodes())
    if ((g.x(id) - center).norm() < t) ids.push_back(id);
  return ids;
}

// ---------------------------------------------------------------------------
// Kato-type coefficients and the nonexistence scan

/// kappa = (m - 1 + (1/eps - 1)(p - 2)^2) / (m - eps).
inline double kato_kappa(int m, double p, double eps) {
  if (m < 2) throw DomainError("kato_kappa: m must be >= 2");
  if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("kato_kappa: eps must lie in (0, 1]");
  const double d = (p - 2.0) * (p - 2.0);
  return (m - 1.0 + (1.0 / eps - 1.0) * d) / (m - eps);
}

/// eps = ((p-2)^2 + sqrt((p-2)^4 + m(m-1-(p-2)^2)(p-2)^2)) / (m-1-(p-2)^2), clamped to [0, 1].
/// Returns 0 at p = 2; callers floor it before use.
inline double optimal_eps(int m, double p) {
  const double d = (p - 2.0) * (p - 2.0);
  const double den = m - 1.0 - d;
  if (!(den > 0.0)) throw DomainError("optimal_eps: m - 1 - (p-2)^2 must be positive");
  const double eps = (d + std::sqrt(d * d + m * den * d)) / den;
  return std::clamp(eps, 0.0, 1.0);
}

/// The stationary point of eps -> kappa(m, p, eps): the positive root of
/// (m-1-d) eps^2 + 2 d eps - m d = 0 with d = (p-2)^2, clamped to [0, 1].
inline double kappa_minimizing_eps(int m, double p) {
  const double d = (p - 2.0) * (p - 2.0);
  const double den = m - 1.0 - d;
  if (!(den > 0.0)) throw DomainError("kappa_minimizing_eps: m - 1 - (p-2)^2 must be positive");
  const double eps = (-d + std::sqrt(d * d + m * den * d)) / den;
  return std::clamp(eps, 0.0, 1.0);
}

struct NonexistenceCoefficients {
  double a = 0.0;  ///< coefficient of the |Du|^(p+2) integral
  double b = 0.0;  ///< coefficient of the |Du|^p integral
  bool admissible() const { return a > 0.0 && b <= 0.0; }
};

/// For k = n = 3 with G = (2 - eps)/(1 + (1/eps - 1)(p-2)^2) + p - 2:
/// A = (3-p)/(1+p) G - 1/2 and B = (3-p)^2/4 G - 1.
inline NonexistenceCoefficients nonexistence_coefficients(double p, double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("nonexistence_coefficients: eps must lie in (0, 1]");
  if (!(p >= 2.0 && p < 3.0)) throw DomainError("nonexistence_coefficients: p must lie in [2, 3)");
  const double d = (p - 2.0) * (p - 2.0);
  const double gsum = (2.0 - eps) / (1.0 + (1.0 / eps - 1.0) * d) + p - 2.0;
  return {(3.0 - p) / (1.0 + p) * gsum - 0.5, (3.0 - p) * (3.0 - p) / 4.0 * gsum - 1.0};
}

struct ScanRow {
  double p = 0.0;
  double eps = 0.0;
  double kappa = 0.0;
  double a = 0.0;
  double b = 0.0;
  bool admissible = false;
};

struct ScanReport {
  std::vector<ScanRow> rows;
  std::optional<double> threshold;  ///< last p of the admissible prefix starting at p_min
};

inline constexpr double kEpsFloor = 1e-9;

/// Rows at p_min + i step up to p_max; eps from `optimal_eps` with m = 2,
/// floored at kEpsFloor.
inline ScanReport scan_nonexistence(double p_min = 2.0, double p_max = 2.5, double step = 1e-3,
                                    const std::function<double(int, double)>& eps_rule = optimal_eps) {
  if (!(p_min >= 2.0 && p_min < p_max && p_max < 3.0)) throw DomainError("scan: need 2 <= p_min < p_max < 3");
  if (!(step > 0.0)) throw DomainError("scan: step must be positive");
  constexpr int kSphereDim = 2;  // tangent maps restricted to S^2
  const auto count = static_cast<std::size_t>(std::floor((p_max - p_min) / step + 1e-9)) + 1;
  ScanReport rep;
  bool prefix = true;
  for (std::size_t i = 0; i < count; ++i) {
    ScanRow row;
    row.p = p_min + static_cast<double>(i) * step;
    row.eps = std::max(eps_rule(kSphereDim, row.p), kEpsFloor);
    row.kappa = kato_kappa(kSphereDim, row.p, row.eps);
    const auto co = nonexistence_coefficients(row.p, row.eps);
    row.a = co.a;
    row.b = co.b;
    row.admissible = co.admissible();
    if (prefix && row.admissible) rep.threshold = row.p;
    prefix = prefix && row.admissible;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// p-Dirichlet energy of the equator map x -> (0, x/|x|) into S^3

struct EquatorEnergy {
  double numeric = 0.0;
  double closed_form = 0.0;       ///< puncture-corrected
  double closed_form_full = 0.0;  ///< 2^(p/2) 4 pi / (3 - p)
  double puncture_radius = 0.0;   ///< volume-equivalent radius of the masked core
  double rel_error() const { return std::abs(numeric - closed_form) / closed_form; }
};

/// Quadrature of |Du|^p over a punctured unit-ball grid with n nodes per axis,
/// Du from finite differences of the quaternion components.
inline EquatorEnergy equator_energy(double p, int n, double puncture_factor = 6.0) {
  if (!(p >= 2.0 && p < 3.0)) throw DomainError("equator_energy: p must lie in [2, 3)");
  GridSpec spec;
  spec.n = n;
  spec.extent = 1.0;
  spec.shape = DomainShape::ball;
  spec.puncture_radius = puncture_factor * spec.spacing();
  const Grid g(spec);
  g.require_derivable();
  GridState s = GridState::identity(g);
  sample(FieldTag::equator_quat, g, s);

  EquatorEnergy out;
  for (std::size_t id : g.active_nodes()) {
    const auto& st = g.stencils(id);
    double du2 = 0.0;
    for (int a = 0; a < 3; ++a)
      du2 += ((s.rot[st[a].hi].coeffs() - s.rot[st[a].lo].coeffs()) * st[a].inv).squaredNorm();
    out.numeric += g.weight(id) * std::pow(du2, 0.5 * p);
  }
  out.puncture_radius = g.effective_puncture_radius();
  out.closed_form_full = std::pow(2.0, 0.5 * p) * 4.0 * M_PI / (3.0 - p);
  out.closed_form = out.closed_form_full * (1.0 - std::pow(out.puncture_radius, 3.0 - p));
  return out;
}

}  // namespace cosserat
