#pragma once

// JSON state files:
//   {"format": "cosserat-state/1",
//    "spec": {"n", "extent", "shape", "puncture_radius"},
//    "phi": [3 n^3 reals], "quat": [4 n^3 reals],
//    "active": [n^3 0/1], "dirichlet": [n^3 0/1]}
// Arrays are in x-fastest node order; inactive slots hold zeros.

#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cosserat/grid.hpp"

namespace cosserat {

inline constexpr const char* kStateFormat = "cosserat-state/1";

/// Quaternions read from files may drift this far from unit length before
/// they are rejected.
inline constexpr double kFileUnitTol = 1e-6;

inline nlohmann::json spec_to_json(const GridSpec& s) {
  return {{"n", s.n}, {"extent", s.extent}, {"shape", to_string(s.shape)}, {"puncture_radius", s.puncture_radius}};
}

inline GridSpec spec_from_json(const nlohmann::json& j) {
  GridSpec s;
  try {
    s.n = j.at("n").get<int>();
    s.extent = j.at("extent").get<double>();
    s.shape = parse_shape(j.at("shape").get<std::string>());
    s.puncture_radius = j.at("puncture_radius").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("state file: bad spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline nlohmann::json state_to_json(const Grid& g, const GridState& st) {
  st.validate(g);
  const std::size_t total = g.size();
  std::vector<double> phi(3 * total, 0.0), quat(4 * total, 0.0);
  std::vector<int> active(total, 0), dirichlet(total, 0);
  for (std::size_t id : g.active_nodes()) {
    for (int a = 0; a < 3; ++a) phi[3 * id + a] = st.phi[id][a];
    for (int a = 0; a < 4; ++a) quat[4 * id + a] = st.rot[id].coeffs()[a];
    active[id] = 1;
    dirichlet[id] = st.dirichlet[id] ? 1 : 0;
  }
  return {{"format", kStateFormat}, {"spec", spec_to_json(st.spec)}, {"phi", phi},
          {"quat", quat},          {"active", active},               {"dirichlet", dirichlet}};
}

inline GridState state_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string()) != kStateFormat) {
    throw ValidationError("state file: missing or unknown format tag");
  }
  GridState st;
  st.spec = spec_from_json(j.at("spec"));
  const Grid g(st.spec);
  const std::size_t total = g.size();
  std::vector<double> phi, quat;
  std::vector<int> active, dirichlet;
  try {
    phi = j.at("phi").get<std::vector<double>>();
    quat = j.at("quat").get<std::vector<double>>();
    active = j.at("active").get<std::vector<int>>();
    dirichlet = j.at("dirichlet").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("state file: malformed arrays: ") + e.what());
  }
  if (phi.size() != 3 * total || quat.size() != 4 * total || active.size() != total ||
      dirichlet.size() != total) {
    throw ValidationError("state file: array lengths do not match the node count of the spec");
  }
  st.phi.assign(total, Vec3::Zero());
  st.rot.assign(total, UnitQuat());
  st.dirichlet.assign(total, 0);
  for (std::size_t id = 0; id < total; ++id) {
    if ((active[id] != 0) != g.active(id)) {
      throw ValidationError("state file: active mask does not match the spec geometry");
    }
    if (!g.active(id)) continue;
    st.phi[id] = Vec3(phi[3 * id], phi[3 * id + 1], phi[3 * id + 2]);
    const Vec4 q(quat[4 * id], quat[4 * id + 1], quat[4 * id + 2], quat[4 * id + 3]);
    const double dev = std::abs(q.norm() - 1.0);
    if (!(dev <= kFileUnitTol)) throw ValidationError("state file: non-unit quaternion");
    st.rot[id] = dev <= UnitQuat::kUnitTol ? UnitQuat::from(q) : UnitQuat::normalized(q);
    st.dirichlet[id] = dirichlet[id] != 0 ? 1 : 0;
  }
  st.validate(g);
  return st;
}

inline void write_state(const Grid& g, const GridState& st, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << state_to_json(g, st).dump() << '\n';
}

inline GridState read_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open state file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("state file: parse error: ") + e.what());
  }
  return state_from_json(j);
}

}  // namespace cosserat
