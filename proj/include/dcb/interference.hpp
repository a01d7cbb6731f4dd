#pragma once

// Two-ring hexagonal interferer geometry, co-channel gating, the three
// mitigation strategies, and the SINR / capacity / outage formulas.
//
// The plane is tiled with the cluster's reuse-3 coloring: ring 1 holds the
// six adjacent cells (Y and Z alternating), ring 2 holds the six co-channel
// X sites at 3R plus six more Y/Z sites at 2*sqrt(3)*R. Outage follows the
// closed form for an exponentially faded serving signal against fixed
// interferer powers (Rayleigh fading on the serving path).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dcb/cluster.hpp"
#include "dcb/propagation.hpp"

namespace dcb {

enum class Strategy : std::uint8_t {
  None,
  ReferenceBifurcation,
  BlockInterfering,
  AdjacentBifurcation,
};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::ReferenceBifurcation: return "reference_bifurcation";
    case Strategy::BlockInterfering: return "block_interfering";
    default: return "adjacent_bifurcation";
  }
}

constexpr int kNumInterferers = 18;  // 6 in ring 1, 12 in ring 2

struct Site {
  int index = 0;
  int tier = 1;
  int cell_id = 0;  // 2..7 for ring-1 cluster members, 0 beyond
  double x_km = 0.0;
  double y_km = 0.0;
  double range_km = 0.0;     // distance from the reference site
  double azimuth_deg = 0.0;
  Band band = Band::X;
};

class HexGeometry {
 public:
  explicit HexGeometry(double radius_km) : HexGeometry(radius_km, default_band_map()) {}

  HexGeometry(double radius_km, const std::array<Band, kNumInterferers>& band_map)
      : radius_km_(radius_km) {
    if (radius_km <= 0.0) throw std::invalid_argument("HexGeometry: radius must be > 0");
    const double d = intersite_km();
    int idx = 0;
    auto put = [&](int tier, int cell_id, double range, double azimuth_deg) {
      Site s;
      s.index = idx;
      s.tier = tier;
      s.cell_id = cell_id;
      s.range_km = range;
      s.azimuth_deg = azimuth_deg;
      const double rad = azimuth_deg * std::numbers::pi / 180.0;
      s.x_km = range * std::cos(rad);
      s.y_km = range * std::sin(rad);
      s.band = band_map[static_cast<std::size_t>(idx)];
      sites_[static_cast<std::size_t>(idx)] = s;
      ++idx;
    };
    // Ring 1: the six adjacent cells, ids 2..7 counterclockwise from 30 deg.
    for (int k = 0; k < 6; ++k) put(1, 2 + k, d, 30.0 + 60.0 * k);
    // Ring 2: co-channel ring of the center at 3R, then the 2*sqrt(3)*R ring.
    for (int k = 0; k < 6; ++k) put(2, 0, 3.0 * radius_km, 60.0 * k);
    for (int k = 0; k < 6; ++k) put(2, 0, 2.0 * d, 30.0 + 60.0 * k);
  }

  double radius_km() const { return radius_km_; }
  double intersite_km() const { return std::numbers::sqrt3 * radius_km_; }
  const std::array<Site, kNumInterferers>& sites() const { return sites_; }

  /// Band labels the reuse-3 tiling induces on the two rings.
  static std::array<Band, kNumInterferers> default_band_map() {
    std::array<Band, kNumInterferers> m{};
    for (int k = 0; k < 6; ++k) m[static_cast<std::size_t>(k)] = k % 2 == 0 ? Band::Y : Band::Z;
    for (int k = 6; k < 12; ++k) m[static_cast<std::size_t>(k)] = Band::X;
    for (int k = 12; k < 18; ++k) m[static_cast<std::size_t>(k)] = k % 2 == 0 ? Band::Z : Band::Y;
    return m;
  }

 private:
  double radius_km_ = 1.0;
  std::array<Site, kNumInterferers> sites_{};
};

/// Euclidean distance from a user at (d, azimuth) in the reference cell to
/// each of the 18 sites, in site order.
inline std::array<double, kNumInterferers> interferer_distances(const HexGeometry& geometry,
                                                                double d_km,
                                                                double azimuth_deg) {
  if (d_km < 0.0 || d_km > geometry.radius_km())
    throw std::invalid_argument("interferer_distances: user must lie inside the reference cell");
  const double rad = azimuth_deg * std::numbers::pi / 180.0;
  const double ux = d_km * std::cos(rad);
  const double uy = d_km * std::sin(rad);
  std::array<double, kNumInterferers> out{};
  for (const auto& s : geometry.sites())
    out[static_cast<std::size_t>(s.index)] = std::hypot(s.x_km - ux, s.y_km - uy);
  return out;
}

struct SceneInterferer {
  int site_index = 0;
  double distance_km = 0.0;       // to the user
  Band band = Band::X;
  double occupied_fraction = 1.0; // of the contested sub-range, in [0, 1]
  bool serving_band_donor = false;  // lends the user's sub-range; transmits nothing on it
  bool inner_restricted = false;    // serves the sub-range to inner users at reduced power
};

struct InterferenceScene {
  double user_distance_km = 0.0;
  double user_azimuth_deg = 0.0;
  Band serving_band = Band::X;
  bool serving_borrowed = false;  // user sits on a borrowed sub-range
  Strategy strategy = Strategy::None;
  double r_inner_km = 0.5;
  std::vector<SceneInterferer> interferers;

  void validate() const {
    if (user_distance_km <= 0.0)
      throw std::domain_error("scene: user distance must be > 0");
    if (strategy == Strategy::ReferenceBifurcation && serving_borrowed &&
        user_distance_km > r_inner_km)
      throw std::invalid_argument(
          "scene: borrowed-band users sit inside r_inner under reference bifurcation");
    for (const auto& itf : interferers)
      if (itf.occupied_fraction < 0.0 || itf.occupied_fraction > 1.0)
        throw std::invalid_argument("scene: occupied_fraction must lie in [0, 1]");
  }
};

/// Binary co-channel gate: 1 iff the interferer shares the user's band and
/// its contested sub-range transmits at all under the scene's strategy.
inline int z_indicator(const InterferenceScene& scene, const SceneInterferer& itf) {
  if (itf.band != scene.serving_band) return 0;
  if (itf.serving_band_donor && !itf.inner_restricted) return 0;
  switch (scene.strategy) {
    case Strategy::None:
    case Strategy::ReferenceBifurcation:
      // No management of the adjacent cells; a co-channel range is assumed live,
      // except where the transmitter itself is inner-restricted and idle.
      return itf.inner_restricted && itf.occupied_fraction <= 0.0 ? 0 : 1;
    case Strategy::BlockInterfering:
    case Strategy::AdjacentBifurcation:
      return itf.occupied_fraction > 0.0 ? 1 : 0;
  }
  return 0;
}

struct EffectiveInterferer {
  int site_index = 0;
  double distance_km = 0.0;
  double tx_power_dbm = 0.0;   // after any inner-restriction reduction
  double power_scale = 1.0;    // linear weight from sub-range occupancy
};

/// How far a sub-range serving only inner users can back its power off while
/// still giving the inner edge full cell-edge received power.
inline double inner_power_reduction_db(const RfEnvironment& env, double r_inner_km) {
  if (r_inner_km <= 0.0 || r_inner_km > env.cell_radius_km)
    throw std::invalid_argument("r_inner must lie in (0, cell_radius]");
  return hata_distance_slope_db(env.bs_height_m) * std::log10(env.cell_radius_km / r_inner_km);
}

/// Resolves the scene's strategy into the co-channel interferers that
/// actually transmit toward the user, with their effective powers.
inline std::vector<EffectiveInterferer> apply_strategy(const InterferenceScene& scene,
                                                       const RfEnvironment& env) {
  scene.validate();
  const double reduction = inner_power_reduction_db(env, scene.r_inner_km);
  std::vector<EffectiveInterferer> out;
  for (const auto& itf : scene.interferers) {
    if (z_indicator(scene, itf) == 0) continue;
    EffectiveInterferer e;
    e.site_index = itf.site_index;
    e.distance_km = itf.distance_km;
    e.tx_power_dbm = env.tx_power_dbm;
    if (itf.inner_restricted) {
      e.tx_power_dbm -= reduction;
      e.power_scale = itf.occupied_fraction;
      out.push_back(e);
      continue;
    }
    switch (scene.strategy) {
      case Strategy::None:
      case Strategy::ReferenceBifurcation:
        break;  // full power, occupancy ignored
      case Strategy::BlockInterfering:
        e.power_scale = itf.occupied_fraction;
        break;
      case Strategy::AdjacentBifurcation:
        e.power_scale = itf.occupied_fraction;
        e.tx_power_dbm -= reduction;
        break;
    }
    out.push_back(e);
  }
  return out;
}

namespace detail {

inline double serving_power_mw(const InterferenceScene& scene, const RfEnvironment& env) {
  return db_to_linear(
      received_power_dbm(env.tx_power_dbm, path_loss_db(env, scene.user_distance_km)));
}

inline double interference_mw(const std::vector<EffectiveInterferer>& interferers,
                              const RfEnvironment& env) {
  double total = 0.0;
  for (const auto& e : interferers)
    total += e.power_scale *
             db_to_linear(received_power_dbm(e.tx_power_dbm, path_loss_db(env, e.distance_km)));
  return total;
}

}  // namespace detail

/// Received SINR in dB. Interference adds in linear milliwatts; the noise
/// floor joins the sum unless the environment disables it.
inline double sinr_db(const InterferenceScene& scene, const RfEnvironment& env) {
  scene.validate();
  const double s = detail::serving_power_mw(scene, env);
  const double denom = detail::interference_mw(apply_strategy(scene, env), env) +
                       (env.noise_enabled ? db_to_linear(env.noise_floor_dbm) : 0.0);
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return linear_to_db(s / denom);
}

/// Shannon capacity in bps/Hz from a linear SINR.
inline double capacity_bps_hz(double sinr_linear) {
  if (sinr_linear < 0.0) throw std::invalid_argument("capacity: SINR must be >= 0");
  return std::log2(1.0 + sinr_linear);
}

/// Outage probability of an exponentially faded serving signal against the
/// summed co-channel interference: 1 - prod_i exp(-(gamma/S_o) I_i) over the
/// interferers the strategy leaves transmitting. Empty product gives 0.
inline double outage_probability(const InterferenceScene& scene, const RfEnvironment& env,
                                 double gamma_db) {
  scene.validate();
  const double s = detail::serving_power_mw(scene, env);
  if (s <= 0.0) throw std::domain_error("outage: serving power must be > 0");
  const double i_total = detail::interference_mw(apply_strategy(scene, env), env);
  const double gamma_linear = db_to_linear(gamma_db);
  return -std::expm1(-gamma_linear * i_total / s);
}

// ---------------------------------------------------------------------------
// Scene construction

struct SceneSpec {
  Band serving_band = Band::Y;
  bool serving_borrowed = true;
  int donor_cell = 2;  // lends the serving sub-range; 0 = none
  Strategy strategy = Strategy::None;
  double r_inner_km = 0.5;
  double user_distance_km = 0.5;
  double user_azimuth_deg = std::numeric_limits<double>::quiet_NaN();  // NaN = worst case
  // Contested-range occupancy probability per ring-1 cell id (index = id).
  std::array<double, 8> cell_occupancy{1, 1, 1, 1, 1, 1, 1, 1};
  bool donor_inner_reuse = false;
  double donor_reuse_occupancy = 0.0;
};

/// Azimuth of the nearest co-channel site that actually transmits toward a
/// user of the given band; breaks ties toward the lower azimuth.
inline double worst_case_azimuth(const HexGeometry& geometry, Band serving_band, int donor_cell) {
  double best_range = std::numeric_limits<double>::infinity();
  double best_azimuth = 0.0;
  for (const auto& s : geometry.sites()) {
    if (s.band != serving_band || s.cell_id == donor_cell) continue;
    if (s.range_km < best_range ||
        (s.range_km == best_range && s.azimuth_deg < best_azimuth)) {
      best_range = s.range_km;
      best_azimuth = s.azimuth_deg;
    }
  }
  return std::isinf(best_range) ? 0.0 : best_azimuth;
}

/// Builds the evaluation scene for one user position. Ring-2 sites of the
/// serving band inherit the mean occupancy of the transmitting ring-1 cells
/// of that band (a homogeneous-network reading of the outer clusters).
inline InterferenceScene build_scene(const HexGeometry& geometry, const SceneSpec& spec) {
  InterferenceScene scene;
  scene.serving_band = spec.serving_band;
  scene.serving_borrowed = spec.serving_borrowed;
  scene.strategy = spec.strategy;
  scene.r_inner_km = spec.r_inner_km;
  scene.user_distance_km = spec.user_distance_km;
  scene.user_azimuth_deg = std::isnan(spec.user_azimuth_deg)
                               ? worst_case_azimuth(geometry, spec.serving_band, spec.donor_cell)
                               : spec.user_azimuth_deg;

  double ring1_occ_sum = 0.0;
  int ring1_occ_n = 0;
  for (const auto& s : geometry.sites()) {
    if (s.tier == 1 && s.band == spec.serving_band && s.cell_id != spec.donor_cell) {
      ring1_occ_sum += spec.cell_occupancy[static_cast<std::size_t>(s.cell_id)];
      ++ring1_occ_n;
    }
  }
  const double ring2_occ = ring1_occ_n > 0 ? ring1_occ_sum / ring1_occ_n : 1.0;

  const auto distances =
      interferer_distances(geometry, spec.user_distance_km, scene.user_azimuth_deg);
  for (const auto& s : geometry.sites()) {
    SceneInterferer itf;
    itf.site_index = s.index;
    itf.distance_km = distances[static_cast<std::size_t>(s.index)];
    itf.band = s.band;
    if (s.cell_id == spec.donor_cell && spec.donor_cell != 0 && s.band == spec.serving_band) {
      itf.serving_band_donor = true;
      itf.inner_restricted = spec.donor_inner_reuse;
      itf.occupied_fraction = spec.donor_reuse_occupancy;
    } else if (s.band == Band::X) {
      itf.occupied_fraction = 1.0;  // reference-role cells carry the heaviest load
    } else if (s.tier == 1) {
      itf.occupied_fraction = spec.cell_occupancy[static_cast<std::size_t>(s.cell_id)];
    } else {
      itf.occupied_fraction = s.band == spec.serving_band ? ring2_occ : 1.0;
    }
    scene.interferers.push_back(itf);
  }
  return scene;
}

}  // namespace dcb
