#pragma once

// Okumura-Hata path loss and the dB-domain link budget.
//
// Everything here works in dB/dBm; conversion to linear milliwatts happens
// only where interference powers have to be summed (see interference.hpp).

#include <cmath>
#include <stdexcept>
#include <string>

namespace dcb {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double x) {
  if (x < 0.0) throw std::domain_error("linear_to_db: negative power");
  return 10.0 * std::log10(x);
}

/// Transmit power in watts -> dBm.
inline double watts_to_dbm(double watts) {
  if (watts <= 0.0) throw std::domain_error("watts_to_dbm: power must be > 0");
  return 10.0 * std::log10(watts * 1e3);
}

/// Mobile antenna height correction a(h_m), medium/large city form.
/// Valid for any f_c > 0; range checking belongs to RfEnvironment.
inline double antenna_correction_db(double carrier_mhz, double mobile_height_m) {
  if (carrier_mhz <= 0.0)
    throw std::domain_error("antenna_correction_db: carrier must be > 0 MHz");
  const double lf = std::log10(carrier_mhz);
  return 1.1 * (lf - 0.7) * mobile_height_m - (1.56 * lf - 0.8);
}

/// Distance slope of the Hata formula, dB per decade of km.
inline double hata_distance_slope_db(double bs_height_m) {
  return 44.9 - 6.55 * std::log10(bs_height_m);
}

struct RfEnvironment {
  double carrier_mhz = 1800.0;
  double bs_height_m = 100.0;
  double mobile_height_m = 5.0;
  double penetration_loss_db = 20.0;
  double tx_power_dbm = 61.76091259055681;  // 1.5 kW
  double cell_radius_km = 1.0;
  double noise_floor_dbm = -121.0;  // -174 dBm/Hz over a 200 kHz carrier
  bool noise_enabled = true;

  void validate() const {
    if (carrier_mhz < 150.0 || carrier_mhz > 2000.0)
      throw std::invalid_argument("rf.carrier_mhz outside Hata validity range [150, 2000]");
    if (bs_height_m <= 0.0) throw std::invalid_argument("rf.bs_height_m must be > 0");
    if (mobile_height_m <= 0.0) throw std::invalid_argument("rf.mobile_height_m must be > 0");
    if (cell_radius_km <= 0.0) throw std::invalid_argument("rf.cell_radius_km must be > 0");
  }
};

/// Urban Okumura-Hata loss including the penetration term. d in km.
inline double path_loss_db(const RfEnvironment& env, double distance_km) {
  if (distance_km <= 0.0)
    throw std::domain_error("path_loss_db: distance must be > 0 km");
  const double lf = std::log10(env.carrier_mhz);
  const double lhb = std::log10(env.bs_height_m);
  return 69.55 + 26.16 * lf - 13.82 * lhb -
         antenna_correction_db(env.carrier_mhz, env.mobile_height_m) +
         hata_distance_slope_db(env.bs_height_m) * std::log10(distance_km) +
         env.penetration_loss_db;
}

inline double received_power_dbm(double tx_power_dbm, double loss_db) {
  return tx_power_dbm - loss_db;
}

}  // namespace dcb
