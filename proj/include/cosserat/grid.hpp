#pragma once

// Uniform 3-D grids over a cube or a (punctured) ball, per-node fields and
// finite-difference calculus on them.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cosserat/algebra.hpp"
#include "cosserat/error.hpp"

namespace cosserat {

enum class DomainShape { cube, ball };

inline const char* to_string(DomainShape s) { return s == DomainShape::cube ? "cube" : "ball"; }

inline DomainShape parse_shape(const std::string& s) {
  if (s == "cube") return DomainShape::cube;
  if (s == "ball") return DomainShape::ball;
  throw ConfigError("unknown domain shape '" + s + "' (expected cube or ball)");
}

struct GridSpec {
  int n = 17;              ///< nodes per axis, odd and >= 5
  double extent = 1.0;     ///< half-width L of [-L, L]^3
  DomainShape shape = DomainShape::cube;
  double puncture_radius = 0.0;  ///< nodes with |x| < puncture_radius are masked out

  double spacing() const { return 2.0 * extent / (n - 1); }

  void validate() const {
    if (n < 5 || n % 2 == 0) {
      std::ostringstream os;
      os << "grid: n must be odd and >= 5 (got " << n << ")";
      throw ConfigError(os.str());
    }
    if (!(extent > 0.0)) throw ConfigError("grid: extent must be > 0");
    if (!(puncture_radius >= 0.0) || !(puncture_radius < extent)) {
      throw ConfigError("grid: puncture_radius must lie in [0, extent)");
    }
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// First-derivative stencil of one node along one axis:
/// d f = (f[hi] - f[lo]) * inv.
struct Stencil {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double inv = 0.0;
  bool central = false;
};

/// Immutable grid geometry. Node index is i + n (j + n k) (x fastest).
class Grid {
 public:
  explicit Grid(const GridSpec& spec) : spec_(spec) {
    spec_.validate();
    const int n = spec_.n;
    h_ = spec_.spacing();
    const std::size_t total = static_cast<std::size_t>(n) * n * n;
    coords_.resize(total);
    active_.assign(total, 0);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const std::size_t id = index(i, j, k);
          const Vec3 x(-spec_.extent + i * h_, -spec_.extent + j * h_, -spec_.extent + k * h_);
          coords_[id] = x;
          const double r = x.norm();
          bool in = true;
          // Relative slack keeps nodes that sit on a sphere up to rounding.
          const double slack = 1e-12 * spec_.extent;
          if (spec_.shape == DomainShape::ball && r > spec_.extent + slack) in = false;
          if (spec_.puncture_radius > 0.0 && r < spec_.puncture_radius - slack) in = false;
          active_[id] = in ? 1 : 0;
        }
    // Drop nodes that have no neighbour along some axis (ball poles).
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t id = 0; id < total; ++id) {
        if (!active_[id]) continue;
        const auto c = ijk(id);
        for (int a = 0; a < 3; ++a) {
          auto lo = c, hi = c;
          --lo[a];
          ++hi[a];
          if (!is_active(lo[0], lo[1], lo[2]) && !is_active(hi[0], hi[1], hi[2])) {
            active_[id] = 0;
            changed = true;
            break;
          }
        }
      }
    }

    boundary_.assign(total, 0);
    weight_.assign(total, 0.0);
    stencils_.assign(total, {});
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const std::size_t id = index(i, j, k);
          if (!active_[id]) continue;
          active_list_.push_back(id);
          const std::array<int, 3> ijk{i, j, k};
          double w = h_ * h_ * h_;
          bool shell = false;
          for (int a = 0; a < 3; ++a) {
            auto nb = ijk;
            nb[a] = ijk[a] - 1;
            const bool has_lo = is_active(nb[0], nb[1], nb[2]);
            const std::size_t lo_id = has_lo ? index(nb[0], nb[1], nb[2]) : id;
            nb[a] = ijk[a] + 1;
            const bool has_hi = is_active(nb[0], nb[1], nb[2]);
            const std::size_t hi_id = has_hi ? index(nb[0], nb[1], nb[2]) : id;
            Stencil& s = stencils_[id][a];
            if (has_lo && has_hi) {
              s = {lo_id, hi_id, 0.5 / h_, true};
            } else if (has_hi) {
              s = {id, hi_id, 1.0 / h_, false};
            } else if (has_lo) {
              s = {lo_id, id, 1.0 / h_, false};
            } else {
              s = {id, id, 0.0, false};
              isolated_ = true;
            }
            if (!(has_lo && has_hi)) shell = true;
            if (spec_.shape == DomainShape::cube && (ijk[a] == 0 || ijk[a] == n - 1)) w *= 0.5;
          }
          boundary_[id] = shell ? 1 : 0;
          weight_[id] = w;
        }
  }

  const GridSpec& spec() const { return spec_; }
  int n() const { return spec_.n; }
  double h() const { return h_; }
  std::size_t size() const { return coords_.size(); }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(spec_.n) *
                                             (static_cast<std::size_t>(j) +
                                              static_cast<std::size_t>(spec_.n) * k);
  }
  bool in_range(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < spec_.n && j < spec_.n && k < spec_.n;
  }
  bool is_active(int i, int j, int k) const { return in_range(i, j, k) && active_[index(i, j, k)]; }

  const Vec3& x(std::size_t id) const { return coords_[id]; }
  bool active(std::size_t id) const { return active_[id] != 0; }
  /// Active node with a missing axis neighbour (outer shell or puncture shell).
  bool boundary(std::size_t id) const { return boundary_[id] != 0; }
  /// Quadrature weight: h^3, halved per clipped axis on cube faces.
  double weight(std::size_t id) const { return weight_[id]; }
  const std::array<Stencil, 3>& stencils(std::size_t id) const { return stencils_[id]; }
  const std::vector<std::size_t>& active_nodes() const { return active_list_; }

  /// True when some active node has no active neighbour along an axis.
  bool has_isolated_nodes() const { return isolated_; }
  void require_derivable() const {
    if (isolated_) throw ConfigError("grid has an isolated active node; derivatives undefined");
  }

  /// Node and its six axis neighbours all carry central stencils on every axis.
  bool stencil_complete(std::size_t id) const {
    if (!active(id) || boundary(id)) return false;
    for (const Stencil& s : stencils_[id]) {
      if (boundary(s.lo) || boundary(s.hi)) return false;
    }
    return true;
  }

  /// Volume-equivalent radius of the masked puncture.
  double effective_puncture_radius() const {
    if (spec_.puncture_radius <= 0.0) return 0.0;
    std::size_t masked = 0;
    for (std::size_t id = 0; id < size(); ++id) {
      if (coords_[id].norm() < spec_.puncture_radius - 1e-12 * spec_.extent) ++masked;
    }
    return std::cbrt(3.0 * static_cast<double>(masked) * h_ * h_ * h_ / (4.0 * M_PI));
  }

  /// Integer coordinates of node `id`.
  std::array<int, 3> ijk(std::size_t id) const {
    const auto n = static_cast<std::size_t>(spec_.n);
    return {static_cast<int>(id % n), static_cast<int>((id / n) % n), static_cast<int>(id / (n * n))};
  }

 private:
  GridSpec spec_;
  double h_ = 0.0;
  std::vector<Vec3> coords_;
  std::vector<std::uint8_t> active_;
  std::vector<std::uint8_t> boundary_;
  std::vector<double> weight_;
  std::vector<std::array<Stencil, 3>> stencils_;
  std::vector<std::size_t> active_list_;
  bool isolated_ = false;
};

/// Rank-3 tensor per node: element k is the matrix of partial derivatives d_k R.
using Tensor3 = std::array<Mat3, 3>;

inline double norm2(const Tensor3& t) {
  return t[0].squaredNorm() + t[1].squaredNorm() + t[2].squaredNorm();
}

/// Deformation and microrotation fields on every grid node. Inactive slots
/// hold phi = 0 and the identity quaternion.
struct GridState {
  GridSpec spec;
  std::vector<Vec3> phi;
  std::vector<UnitQuat> rot;
  std::vector<std::uint8_t> dirichlet;

  /// Fresh state: phi = x, identity rotations, Dirichlet on the shell nodes.
  static GridState identity(const Grid& g) {
    GridState s;
    s.spec = g.spec();
    s.phi.assign(g.size(), Vec3::Zero());
    s.rot.assign(g.size(), UnitQuat());
    s.dirichlet.assign(g.size(), 0);
    for (std::size_t id : g.active_nodes()) {
      s.phi[id] = g.x(id);
      s.dirichlet[id] = g.boundary(id) ? 1 : 0;
    }
    return s;
  }

  Mat3 rot_matrix(std::size_t id) const { return cover(rot[id]).matrix(); }

  void validate(const Grid& g) const {
    if (!(spec == g.spec())) throw ValidationError("state spec does not match grid");
    if (phi.size() != g.size() || rot.size() != g.size() || dirichlet.size() != g.size()) {
      throw ValidationError("state field sizes do not match grid node count");
    }
    for (std::size_t id : g.active_nodes()) {
      if (g.boundary(id) && !dirichlet[id]) {
        throw ValidationError("dirichlet mask must cover every shell node");
      }
      if (!phi[id].allFinite()) throw ValidationError("non-finite deformation value");
    }
  }
};

// ---------------------------------------------------------------------------
// Analytic samples

enum class FieldTag { identity_phi, zero_phi, constant_rot, singular_phi, singular_rot, equator_quat };

inline FieldTag parse_field_tag(const std::string& s) {
  if (s == "identity_phi") return FieldTag::identity_phi;
  if (s == "zero_phi") return FieldTag::zero_phi;
  if (s == "constant_rot") return FieldTag::constant_rot;
  if (s == "singular_phi") return FieldTag::singular_phi;
  if (s == "singular_rot") return FieldTag::singular_rot;
  if (s == "equator_quat") return FieldTag::equator_quat;
  throw ConfigError("unknown field tag '" + s + "'");
}

inline bool is_singular(FieldTag t) {
  return t == FieldTag::singular_phi || t == FieldTag::singular_rot || t == FieldTag::equator_quat;
}

/// phi(x) = (4/3) x log|x|.
inline Vec3 singular_phi_at(const Vec3& x) { return (4.0 / 3.0) * x * std::log(x.norm()); }

/// Lift of 2 xhat (x) xhat - I: the quaternion (0, x/|x|).
inline UnitQuat equator_quat_at(const Vec3& x) {
  const Vec3 u = x / x.norm();
  return UnitQuat::normalized(Vec4(0.0, u[0], u[1], u[2]));
}

/// Evaluates an analytic field on every active node of `state`.
inline void sample(FieldTag tag, const Grid& g, GridState& state, const UnitQuat& q0 = UnitQuat()) {
  if (is_singular(tag) && !(g.spec().puncture_radius > 0.0)) {
    throw DomainError("singular fields need a punctured grid (origin evaluation undefined)");
  }
  for (std::size_t id : g.active_nodes()) {
    const Vec3& x = g.x(id);
    switch (tag) {
      case FieldTag::identity_phi: state.phi[id] = x; break;
      case FieldTag::zero_phi: state.phi[id] = Vec3::Zero(); break;
      case FieldTag::constant_rot: state.rot[id] = q0; break;
      case FieldTag::singular_phi: state.phi[id] = singular_phi_at(x); break;
      case FieldTag::singular_rot:
      case FieldTag::equator_quat: state.rot[id] = equator_quat_at(x); break;
    }
  }
}

// ---------------------------------------------------------------------------
// Finite differences

/// Column a of the result is d_a phi, i.e. (D phi)_{ia} = d_a phi_i.
inline std::vector<Mat3> gradient_vector(const Grid& g, const std::vector<Vec3>& phi) {
  g.require_derivable();
  std::vector<Mat3> out(g.size(), Mat3::Zero());
  for (std::size_t id : g.active_nodes()) {
    const auto& st = g.stencils(id);
    for (int a = 0; a < 3; ++a) out[id].col(a) = (phi[st[a].hi] - phi[st[a].lo]) * st[a].inv;
  }
  return out;
}

/// Entrywise derivatives of a matrix field.
inline std::vector<Tensor3> gradient_matrix(const Grid& g, const std::vector<Mat3>& m) {
  g.require_derivable();
  std::vector<Tensor3> out(g.size(), Tensor3{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()});
  for (std::size_t id : g.active_nodes()) {
    const auto& st = g.stencils(id);
    for (int a = 0; a < 3; ++a) out[id][a] = (m[st[a].hi] - m[st[a].lo]) * st[a].inv;
  }
  return out;
}

/// Rotation matrices of every node (identity on inactive slots).
inline std::vector<Mat3> rotation_matrices(const Grid& g, const std::vector<UnitQuat>& rot) {
  std::vector<Mat3> out(g.size(), Mat3::Identity());
  for (std::size_t id : g.active_nodes()) out[id] = cover(rot[id]).matrix();
  return out;
}

/// Differentiates the reconstructed rotation matrices, not the quaternions.
inline std::vector<Tensor3> gradient_rotation(const Grid& g, const std::vector<UnitQuat>& rot) {
  return gradient_matrix(g, rotation_matrices(g, rot));
}

/// (div T)_i = sum_a d_a T_{ia}.
inline std::vector<Vec3> divergence(const Grid& g, const std::vector<Mat3>& t) {
  g.require_derivable();
  std::vector<Vec3> out(g.size(), Vec3::Zero());
  for (std::size_t id : g.active_nodes()) {
    const auto& st = g.stencils(id);
    Vec3 d = Vec3::Zero();
    for (int a = 0; a < 3; ++a) d += (t[st[a].hi].col(a) - t[st[a].lo].col(a)) * st[a].inv;
    out[id] = d;
  }
  return out;
}

/// div T = sum_k d_k T[k] for a tensor field whose slot k is the k-th flux.
inline std::vector<Mat3> divergence(const Grid& g, const std::vector<Tensor3>& t) {
  g.require_derivable();
  std::vector<Mat3> out(g.size(), Mat3::Zero());
  for (std::size_t id : g.active_nodes()) {
    const auto& st = g.stencils(id);
    Mat3 d = Mat3::Zero();
    for (int a = 0; a < 3; ++a) d += (t[st[a].hi][a] - t[st[a].lo][a]) * st[a].inv;
    out[id] = d;
  }
  return out;
}

}  // namespace cosserat
