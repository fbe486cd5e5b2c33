#pragma once

// Riemannian steepest descent on (R^3 x S^3)^nodes with Armijo backtracking.
// Deformations move linearly; quaternions move by the retraction
// q <- (q + v)/|q + v|. Dirichlet nodes never change.

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cosserat/energy.hpp"

namespace cosserat {

struct OptimizerParams {
  int max_iters = 5000;
  double grad_tol = 1e-8;  ///< on |g| / h^{3/2}
  double step0 = 1.0;      ///< first trial step
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;

  void validate() const {
    if (max_iters < 0) throw ConfigError("optimizer: max_iters must be >= 0");
    if (!(grad_tol > 0.0)) throw ConfigError("optimizer: grad_tol must be > 0");
    if (!(step0 > 0.0)) throw ConfigError("optimizer: step0 must be > 0");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("optimizer: armijo_c must lie in (0,1)");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("optimizer: backtrack must lie in (0,1)");
    if (max_backtracks < 0) throw ConfigError("optimizer: max_backtracks must be >= 0");
  }
};

struct TraceRow {
  int iter = 0;
  double energy = 0.0;
  double grad_norm = 0.0;  ///< scaled gradient norm at this iterate
  double step = 0.0;       ///< step that produced this iterate (0 for the start)
};

enum class MinimizeStatus { converged, max_iterations, line_search_failed };

inline const char* to_string(MinimizeStatus s) {
  switch (s) {
    case MinimizeStatus::converged: return "converged";
    case MinimizeStatus::max_iterations: return "max_iterations";
    case MinimizeStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

/// A tangent-bundle element: per-node R^3 and per-node T_q S^3 vectors.
struct Direction {
  std::vector<Vec3> phi;
  std::vector<Vec4> rot;
};

/// Moves along `dir` by `step`; Dirichlet nodes are copied unchanged.
inline GridState step_along(const Grid& g, const GridState& s, const Direction& dir, double step) {
  GridState out = s;
  for (std::size_t id : g.active_nodes()) {
    if (s.dirichlet[id]) continue;
    out.phi[id] = s.phi[id] + step * dir.phi[id];
    out.rot[id] = retract(s.rot[id], step * dir.rot[id]);
  }
  return out;
}

struct LineSearchResult {
  bool accepted = false;
  double step = 0.0;
  double energy = 0.0;
  int backtracks = 0;
  GridState state;
};

/// Tries step0 * backtrack^k, k = 0..max_backtracks, and accepts the first
/// step with E(new) <= E - armijo_c * step * |slope|, where slope is the
/// directional derivative <g, dir>.
inline LineSearchResult line_search(const Grid& g, const GridState& s, const Direction& dir,
                                    double current_energy, double slope, const MaterialParams& c,
                                    const LoadSpec& loads, const OptimizerParams& op,
                                    std::optional<double> step0 = std::nullopt) {
  double step = step0.value_or(op.step0);
  LineSearchResult res;
  for (int k = 0; k <= op.max_backtracks; ++k, step *= op.backtrack) {
    GridState trial;
    try {
      trial = step_along(g, s, dir, step);
    } catch (const DomainError&) {
      continue;  // retraction blew up: step far too long
    }
    const double e = total_energy(g, trial, c, loads).total;
    if (std::isfinite(e) && e <= current_energy - op.armijo_c * step * std::abs(slope)) {
      res.accepted = true;
      res.step = step;
      res.energy = e;
      res.backtracks = k;
      res.state = std::move(trial);
      return res;
    }
  }
  res.backtracks = op.max_backtracks;
  return res;
}

struct MinimizeResult {
  GridState state;
  std::vector<TraceRow> trace;
  MinimizeStatus status = MinimizeStatus::max_iterations;
  int iterations = 0;
};

inline double scaled_grad_norm(const Grid& g, const EnergyGradient& grad) {
  return std::sqrt(grad.norm_sq()) / std::pow(g.h(), 1.5);
}

inline MinimizeResult minimize(const Grid& g, const GridState& state0, const MaterialParams& c,
                               const LoadSpec& loads, const OptimizerParams& op) {
  op.validate();
  c.validate();
  state0.validate(g);
  bool any_pinned = false;
  for (std::size_t id : g.active_nodes()) any_pinned = any_pinned || state0.dirichlet[id];
  if (!any_pinned) throw ConfigError("minimize: Dirichlet mask is empty");

  MinimizeResult out;
  out.state = state0;
  double energy = total_energy(g, out.state, c, loads).total;
  if (!std::isfinite(energy)) throw DomainError("minimize: initial energy is not finite");
  out.trace.push_back({0, energy, 0.0, 0.0});

  double trial = op.step0;
  for (int it = 0;; ++it) {
    const EnergyGradient grad = gradient(g, out.state, c, loads);
    const double gnorm = scaled_grad_norm(g, grad);
    out.trace.back().grad_norm = gnorm;
    out.iterations = it;
    if (!std::isfinite(gnorm)) throw DomainError("minimize: gradient is not finite");
    if (gnorm <= op.grad_tol) {
      out.status = MinimizeStatus::converged;
      return out;
    }
    if (it >= op.max_iters) {
      out.status = MinimizeStatus::max_iterations;
      return out;
    }
    Direction dir{std::vector<Vec3>(g.size(), Vec3::Zero()), std::vector<Vec4>(g.size(), Vec4::Zero())};
    for (std::size_t id : g.active_nodes()) {
      dir.phi[id] = -grad.phi[id];
      dir.rot[id] = -grad.rot[id];
    }
    LineSearchResult ls = line_search(g, out.state, dir, energy, -grad.norm_sq(), c, loads, op, trial);
    if (!ls.accepted) {
      out.status = MinimizeStatus::line_search_failed;
      return out;
    }
    if (!(ls.energy < energy)) {
      // Armijo held only up to rounding; no further progress is possible.
      out.status = MinimizeStatus::line_search_failed;
      return out;
    }
    out.state = std::move(ls.state);
    energy = ls.energy;
    out.trace.push_back({it + 1, energy, 0.0, ls.step});
    // Warm start: next search begins one notch above the accepted step.
    trial = ls.step / op.backtrack;
  }
}

/// Deterministic start from boundary data: phi = x and each rotation copied
/// from the nearest Dirichlet node (graph distance over axis neighbours).
inline GridState initial_guess(const Grid& g, const GridState& boundary) {
  GridState s = boundary;
  std::vector<long> owner(g.size(), -1);
  std::deque<std::size_t> queue;
  for (std::size_t id : g.active_nodes()) {
    if (boundary.dirichlet[id]) {
      owner[id] = static_cast<long>(id);
      queue.push_back(id);
    } else {
      s.phi[id] = g.x(id);
    }
  }
  while (!queue.empty()) {
    const std::size_t id = queue.front();
    queue.pop_front();
    const auto ijk = g.ijk(id);
    for (int a = 0; a < 3; ++a)
      for (int d : {-1, 1}) {
        auto nb = ijk;
        nb[a] += d;
        if (!g.is_active(nb[0], nb[1], nb[2])) continue;
        const std::size_t nid = g.index(nb[0], nb[1], nb[2]);
        if (owner[nid] >= 0) continue;
        owner[nid] = owner[id];
        queue.push_back(nid);
      }
  }
  for (std::size_t id : g.active_nodes()) {
    if (!boundary.dirichlet[id] && owner[id] >= 0) s.rot[id] = boundary.rot[static_cast<std::size_t>(owner[id])];
  }
  return s;
}

}  // namespace cosserat
