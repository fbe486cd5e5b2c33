// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cosserat/cosserat.hpp"
#include "test_support.hpp"

using namespace cosserat;

namespace {

constexpr double kThreshold = 32.0 / 15.0;
const MaterialParams kUnitP{1.0, 1.0, 1.0, 2.0, DeviatorConvention::full_trace};

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      detail << " FAILED(" << what << ")";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Grid punctured_ball(int n) {
  GridSpec s;
  s.n = n;
  s.shape = DomainShape::ball;
  s.puncture_radius = 3.0 * s.spacing();
  return Grid(s);
}

// Kato-type nonexistence scan
void kato_scan(Outcome& o) {
  const auto t0 = Clock::now();
  const auto rep = scan_nonexistence(2.0, 2.5, 1e-3);
  std::size_t checked = 0;
  bool all = true;
  for (const auto& r : rep.rows) {
    if (r.p > kThreshold) break;
    ++checked;
    all = all && r.a > 0.0 && r.b <= 0.0;
  }
  const double eps = std::max(optimal_eps(2, kThreshold), kEpsFloor);
  const auto at = nonexistence_coefficients(kThreshold, eps);
  const double elapsed = seconds_since(t0);
  o.require(checked == 134, "row count up to 32/15");
  o.require(all, "A > 0 and B <= 0 on [2, 32/15]");
  o.require(at.a > 0.0 && at.a < 5e-3, "A(32/15) in (0, 5e-3)");
  o.require(at.b > -0.7 && at.b < -0.6, "B(32/15) in (-0.7, -0.6)");
  o.require(rep.threshold && *rep.threshold >= kThreshold - 1e-9, "threshold >= 32/15");
  o.require(elapsed < 1.0, "runtime < 1 s");
  o.detail << "rows<=32/15=" << checked << " A(32/15)=" << at.a << " B(32/15)=" << at.b
           << " threshold=" << (rep.threshold ? *rep.threshold : -1.0) << " time=" << elapsed << "s";
}

// Explicit singular solution
void singular_solution(Outcome& o) {
  const auto t0 = Clock::now();
  for (double p : {2.0, 2.5, 2.9}) {
    MaterialParams c = kUnitP;
    c.p = p;
    const auto v = verify_singular({17, 33}, c);
    const auto& a = v.levels[0];
    const auto& b = v.levels[1];
    const bool shrink = b.max_phi < a.max_phi && b.l2_phi < a.l2_phi && b.max_rot < a.max_rot && b.l2_rot < a.l2_rot;
    o.require(shrink, "residuals shrink at p=" + std::to_string(p));
    o.require(v.min_order() >= 1.0, "order >= 1 at p=" + std::to_string(p));
    o.require(v.orthogonality_max <= 1e-12 && v.orthogonality_samples == 1000, "orthogonality");
    o.detail << "p=" << p << " order=" << v.min_order() << " ortho=" << v.orthogonality_max << "; ";
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 60.0, "runtime < 1 min");
  o.detail << "time=" << elapsed << "s";
}

// Central differences of the energy along every free coordinate.
double fd_rel_error(const Grid& g, const GridState& s, const MaterialParams& c) {
  const double step = 1e-5;
  const EnergyGradient grad = gradient(g, s, c);
  GridState work = s;
  double diff = 0.0, ref = 0.0;
  for (std::size_t id : g.active_nodes()) {
    if (s.dirichlet[id]) continue;
    std::vector<std::size_t> local{id};
    const auto ijk = g.ijk(id);
    for (int a = 0; a < 3; ++a)
      for (int d : {-1, 1}) {
        auto nb = ijk;
        nb[a] += d;
        if (g.is_active(nb[0], nb[1], nb[2])) local.push_back(g.index(nb[0], nb[1], nb[2]));
      }
    auto e = [&] { return energy_on(g, work, c, {}, local).total; };
    for (int a = 0; a < 3; ++a) {
      work.phi[id][a] += step;
      const double ep = e();
      work.phi[id][a] = s.phi[id][a] - step;
      const double em = e();
      work.phi[id][a] = s.phi[id][a];
      const double fd = (ep - em) / (2.0 * step);
      diff += (fd - grad.phi[id][a]) * (fd - grad.phi[id][a]);
      ref += fd * fd;
    }
    for (const Vec4& b : testing::tangent_basis(s.rot[id])) {
      work.rot[id] = retract(s.rot[id], step * b);
      const double ep = e();
      work.rot[id] = retract(s.rot[id], -step * b);
      const double em = e();
      work.rot[id] = s.rot[id];
      const double fd = (ep - em) / (2.0 * step);
      const double an = grad.rot[id].dot(b);
      diff += (fd - an) * (fd - an);
      ref += fd * fd;
    }
  }
  return std::sqrt(diff / ref);
}

// Gradient correctness
void gradient_correctness(Outcome& o) {
  const auto t0 = Clock::now();
  GridSpec spec;
  spec.n = 9;
  const Grid g(spec);
  std::mt19937_64 rng(2024);
  for (double p : {2.0, 2.3, 3.0}) {
    const MaterialParams c{1.3, 0.7, 0.4, p};
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) worst = std::max(worst, fd_rel_error(g, testing::random_state(g, rng, 0.2), c));
    o.require(worst < 1e-6, "relative error at p=" + std::to_string(p));
    o.detail << "p=" << p << " max_rel=" << worst << "; ";
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 60.0, "runtime < 1 min");
  o.detail << "time=" << elapsed << "s";
}

GridState perturbed_start(const Grid& g, double amp) {
  GridState s = GridState::identity(g);
  for (std::size_t id : g.active_nodes()) {
    if (s.dirichlet[id]) continue;
    const Vec3& x = g.x(id);
    const double bump = std::cos(0.5 * M_PI * x[0]) * std::cos(0.5 * M_PI * x[1]) * std::cos(0.5 * M_PI * x[2]);
    s.phi[id] = x + amp * bump * Vec3(1.0, -0.5, 0.25);
  }
  return s;
}

// Minimizer sanity
void minimizer_sanity(Outcome& o) {
  const auto t0 = Clock::now();
  GridSpec spec;
  spec.n = 17;
  const Grid g(spec);
  const GridState s0 = perturbed_start(g, 0.05);
  const MaterialParams c{};
  const double e0 = total_energy(g, s0, c).total;
  OptimizerParams op;
  op.grad_tol = 1e-10;
  op.max_iters = 50000;
  const auto res = minimize(g, s0, c, {}, op);
  bool decreasing = true;
  for (std::size_t i = 1; i < res.trace.size(); ++i) decreasing = decreasing && res.trace[i].energy < res.trace[i - 1].energy;
  const double e_final = res.trace.back().energy;
  o.require(decreasing, "strictly decreasing trace");
  o.require(e_final < 1e-10 * e0, "final energy < 1e-10 x initial");
  bool pinned = true;
  for (std::size_t id : g.active_nodes())
    if (s0.dirichlet[id]) pinned = pinned && res.state.phi[id] == s0.phi[id] && res.state.rot[id] == s0.rot[id];
  o.require(pinned, "Dirichlet nodes untouched");
  o.detail << "perturbed: " << to_string(res.status) << " iters=" << res.iterations << " E0=" << e0
           << " E=" << e_final << "; ";

  const Grid gb = punctured_ball(17);
  const GridState pair = sample_singular_pair(gb);
  const double e_pair = total_energy(gb, pair, kUnitP).total;
  OptimizerParams op2;
  op2.max_iters = 2000;
  const auto res2 = minimize(gb, initial_guess(gb, pair), kUnitP, {}, op2);
  const double e2 = res2.trace.back().energy;
  o.require(e2 <= e_pair, "singular boundary data: final <= sampled pair");
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 300.0, "runtime < 5 min");
  o.detail << "singular boundary: E_pair=" << e_pair << " E=" << e2 << " (" << to_string(res2.status)
           << ") time=" << elapsed << "s";
}

// Monotonicity diagnostics
void monotonicity(Outcome& o) {
  double q_min = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(77);
  GridSpec spec;
  spec.n = 9;
  const Grid g(spec);
  for (int i = 0; i < 20; ++i) {
    const GridState s = testing::random_state(g, rng, 0.5);
    const auto d = monotonicity_densities(g, s, 0.2 * testing::random_vec(rng), kUnitP);
    for (std::size_t id : g.active_nodes()) q_min = std::min(q_min, d.q[id]);
  }
  // A computed minimizer with non-trivial rotation boundary data.
  GridState bd = GridState::identity(g);
  for (std::size_t id : g.active_nodes()) {
    const Vec3& x = g.x(id);
    bd.rot[id] = UnitQuat::normalized(Vec4(1.0, 0.4 * x[1], 0.3 * x[2] * x[0], 0.2 * x[0]));
    bd.phi[id] = x + 0.1 * Vec3(x[1] * x[2], 0.0, x[0] * x[0]);
  }
  OptimizerParams op;
  op.grad_tol = 1e-6;
  op.max_iters = 20000;
  const auto res = minimize(g, initial_guess(g, bd), kUnitP, {}, op);
  const auto dm = monotonicity_densities(g, res.state, Vec3::Zero(), kUnitP);
  for (std::size_t id : g.active_nodes()) q_min = std::min(q_min, dm.q[id]);
  o.require(q_min >= -1e-12, "Q >= -1e-12");
  o.detail << "q_min=" << q_min << "; ";

  const Grid gb = punctured_ball(33);
  const std::vector<double> radii{0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  for (double p : {2.0, 2.5, 2.9}) {
    const auto rep = monotonicity_from_densities(gb, equator_densities(gb, p), Vec3::Zero(), radii, p);
    const auto [lo, hi] = std::minmax_element(rep.phi_profile.begin(), rep.phi_profile.end());
    const double variation = (*hi - *lo) / *lo;
    const double exact = 4.0 * M_PI * std::pow(16.0, 0.5 * p) / (3.0 - p);
    o.require(variation < 0.02, "flat profile at p=" + std::to_string(p));
    o.detail << "p=" << p << " variation=" << variation << " mean/exact=" << rep.phi_profile[3] / exact << "; ";
  }
}

// Covering map
void covering_map(Outcome& o) {
  std::mt19937_64 rng(31);
  double hom = 0.0, orth = 0.0, half_turn = 0.0;
  bool even = true;
  std::vector<double> ratios, fd_ratios;
  for (int i = 0; i < 1000; ++i) {
    const UnitQuat a = testing::random_quat(rng), b = testing::random_quat(rng);
    const Mat3 ra = cover(a).matrix();
    hom = std::max(hom, (cover(a * b).matrix() - ra * cover(b).matrix()).cwiseAbs().maxCoeff());
    even = even && cover(-a).matrix() == ra;
    orth = std::max(orth, (ra.transpose() * ra - Mat3::Identity()).cwiseAbs().maxCoeff());
    orth = std::max(orth, std::abs(ra.determinant() - 1.0));
    const Vec4 v = testing::random_tangent(rng, a);
    ratios.push_back(cover_differential(a, v).squaredNorm() / v.squaredNorm());
    const double t = 1e-6;
    const Mat3 fd = (cover_matrix(a.coeffs() + t * v) - cover_matrix(a.coeffs() - t * v)) / (2.0 * t);
    fd_ratios.push_back(fd.squaredNorm() / v.squaredNorm());
    const Vec3 x = testing::random_vec(rng);
    const Vec3 u = x / x.norm();
    half_turn = std::max(half_turn, (cover(Vec4(0.0, u[0], u[1], u[2])).matrix() -
                                     (2.0 * u * u.transpose() - Mat3::Identity()))
                                        .cwiseAbs()
                                        .maxCoeff());
  }
  auto mean_sd = [](const std::vector<double>& v) {
    double m = 0.0, s = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, std::sqrt(s / (v.size() - 1))};
  };
  const auto [c_fd, sd_fd] = mean_sd(fd_ratios);
  const auto [c_pi, sd] = mean_sd(ratios);
  o.require(hom < 1e-10, "homomorphism");
  o.require(even, "evenness");
  o.require(orth < 1e-10, "SO(3) validity");
  o.require(sd < 1e-8 && std::abs(c_pi - std::round(c_fd)) < 1e-8, "constant conformal factor");
  o.require(half_turn < 1e-12, "half-turn form");
  o.detail << "hom=" << hom << " orth=" << orth << " c_pi(fd)=" << c_fd << " c_pi=" << c_pi << " sd=" << sd
           << " half_turn=" << half_turn;
}

// Equator energy
void equator(Outcome& o) {
  o.require(std::abs(equator_energy(2.0, 17).closed_form_full - 8.0 * M_PI) < 1e-12, "8 pi at p=2");
  for (double p : {2.0, 2.5}) {
    const auto e = equator_energy(p, 65);
    o.require(e.rel_error() < 0.01, "within 1% at p=" + std::to_string(p));
    o.detail << "p=" << p << " numeric=" << e.numeric << " closed=" << e.closed_form << " rel=" << e.rel_error()
             << "; ";
  }
}

// Growth and convexity probes
void growth(Outcome& o) {
  for (const MaterialParams& c : {MaterialParams{1.0, 1.0, 1.0, 2.0}, MaterialParams{2.5, 0.4, 1.5, 2.0},
                                  MaterialParams{0.3, 0.6, 0.2, 2.0}}) {
    const auto rep = check_growth_convexity(c, 10000);
    o.require(rep.ok(), "zero violations with c=" + std::to_string(rep.c));
    o.detail << "mu=(" << c.mu_e << "," << c.mu_c << "," << c.mu_0 << ") c=" << rep.c
             << " lower/upper/convexity violations=" << rep.lower_violations << "/" << rep.upper_violations << "/"
             << rep.convexity_violations << "; ";
  }
  IntegrandArg z;
  z.z1 = -2.0 * Mat3::Identity();
  for (auto& m : z.z2) m.setZero();
  o.detail << "W(I, -2I)=" << integrand_w(Mat3::Identity(), z, MaterialParams{}) << " vs c|z|^2+18="
           << growth_constant(MaterialParams{}) * z.norm_sq() + 18.0 << "; ";
  const MaterialParams c{};
  const auto wrong = check_growth_convexity(c, 10000, 1, 1.0, 0.5 * growth_constant(c));
  o.require(wrong.upper_violations > 0, "halved constant detected");
  o.detail << "halved-c upper violations=" << wrong.upper_violations;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"kato_nonexistence_scan", kato_scan},
      {"singular_solution_residuals", singular_solution},
      {"gradient_vs_finite_differences", gradient_correctness},
      {"minimizer_sanity", minimizer_sanity},
      {"monotonicity_diagnostics", monotonicity},
      {"covering_map_suite", covering_map},
      {"equator_energy", equator},
      {"growth_and_convexity", growth},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
