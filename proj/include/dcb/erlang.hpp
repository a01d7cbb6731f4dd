#pragma once

// M/M/K/K loss-system analytics: steady-state occupancy distribution,
// per-cell Erlang blocking, two overall-blocking aggregates, and the
// bandwidth-utilization figure of merit.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dcb {

struct TrafficProfile {
  double lambda = 0.0;  // call arrival rate, calls/s
  double mu = 1.0;      // service rate, 1/s (holding time 1/mu)
  int capacity = 0;     // usable channels

  double offered_erlangs() const { return lambda / mu; }

  void validate() const {
    if (lambda < 0.0) throw std::invalid_argument("TrafficProfile: lambda must be >= 0");
    if (mu <= 0.0) throw std::invalid_argument("TrafficProfile: mu must be > 0");
    if (capacity < 0) throw std::invalid_argument("TrafficProfile: capacity must be >= 0");
  }
};

struct ClusterTraffic {
  std::array<TrafficProfile, 7> profiles{};  // ordered by cell id 1..7
  double mu_total = 1.0;                     // system average channel release rate

  void validate() const {
    for (const auto& p : profiles) p.validate();
    if (mu_total <= 0.0) throw std::invalid_argument("ClusterTraffic: mu_total must be > 0");
  }
};

/// Assembles ClusterTraffic with mu_total as the arrival-weighted mean of
/// the per-cell service rates (all scenarios here use a uniform mu, so the
/// weighting collapses to that common value).
inline ClusterTraffic make_cluster_traffic(const std::array<TrafficProfile, 7>& profiles) {
  double lam_sum = 0.0, weighted = 0.0, plain = 0.0;
  for (const auto& p : profiles) {
    p.validate();
    lam_sum += p.lambda;
    weighted += p.lambda * p.mu;
    plain += p.mu;
  }
  ClusterTraffic ct;
  ct.profiles = profiles;
  ct.mu_total = lam_sum > 0.0 ? weighted / lam_sum : plain / 7.0;
  return ct;
}

/// Occupancy distribution P(0..K). Terms grow by the running ratio a/i and
/// are rescaled long before they can overflow, so capacities up to 1e4 stay
/// finite at any load.
inline std::vector<double> steady_state(const TrafficProfile& profile) {
  profile.validate();
  const int cap = profile.capacity;
  const double a = profile.lambda / profile.mu;
  std::vector<double> p(static_cast<std::size_t>(cap) + 1);
  p[0] = 1.0;
  double term = 1.0;
  double sum = 1.0;
  for (int i = 1; i <= cap; ++i) {
    term *= a / i;
    p[static_cast<std::size_t>(i)] = term;
    sum += term;
    if (term > 1e280) {
      for (int j = 0; j <= i; ++j) p[static_cast<std::size_t>(j)] /= term;
      sum /= term;
      term = 1.0;
    }
  }
  for (auto& v : p) v /= sum;
  return p;
}

/// Erlang-B loss probability: the top state of the occupancy distribution.
inline double blocking(const TrafficProfile& profile) {
  return steady_state(profile).back();
}

/// P(occupancy > threshold): the chance the top (capacity - threshold)
/// channels are in use under lowest-first packing.
inline double occupancy_tail_probability(const TrafficProfile& profile, int threshold) {
  const auto p = steady_state(profile);
  if (threshold < 0) return 1.0;
  if (threshold >= profile.capacity) return 0.0;
  double tail = 0.0;
  for (int i = threshold + 1; i <= profile.capacity; ++i)
    tail += p[static_cast<std::size_t>(i)];
  return std::min(1.0, tail);
}

/// Overall blocking evaluated exactly as the aggregate formula is written,
/// with per-cell loads expressed in Erlangs so the ratio is dimensionless:
/// 1 - sum a_m (1 - P_Bm) / sum N'_m. Does not vanish at low load; see
/// overall_blocking_weighted for the traffic-weighted alternative.
inline double overall_blocking_paper(const ClusterTraffic& traffic) {
  traffic.validate();
  double carried = 0.0;
  double cap_sum = 0.0;
  for (const auto& p : traffic.profiles) {
    carried += p.offered_erlangs() * (1.0 - blocking(p));
    cap_sum += p.capacity;
  }
  if (cap_sum <= 0.0)
    throw std::invalid_argument("overall_blocking_paper: cluster has no channels");
  return std::clamp(1.0 - carried / cap_sum, 0.0, 1.0);
}

/// Arrival-weighted mean of per-cell blocking. Zero offered traffic maps to
/// zero by convention.
inline double overall_blocking_weighted(const ClusterTraffic& traffic) {
  traffic.validate();
  double lam_sum = 0.0;
  double acc = 0.0;
  for (const auto& p : traffic.profiles) {
    lam_sum += p.lambda;
    acc += p.lambda * blocking(p);
  }
  return lam_sum > 0.0 ? acc / lam_sum : 0.0;
}

/// Bandwidth utilization B_W = (1 - P_BT) sum(lambda) / (mu_T sum(N')),
/// clamped to [0, 1].
inline double bandwidth_utilization(const ClusterTraffic& traffic, double p_bt) {
  traffic.validate();
  if (p_bt < 0.0 || p_bt > 1.0)
    throw std::invalid_argument("bandwidth_utilization: p_bt must lie in [0, 1]");
  double lam_sum = 0.0;
  double cap_sum = 0.0;
  for (const auto& p : traffic.profiles) {
    lam_sum += p.lambda;
    cap_sum += p.capacity;
  }
  if (traffic.mu_total <= 0.0)
    throw std::invalid_argument("bandwidth_utilization: mu_total must be > 0");
  if (cap_sum <= 0.0)
    throw std::invalid_argument("bandwidth_utilization: cluster has no channels");
  return std::clamp((1.0 - p_bt) * lam_sum / (traffic.mu_total * cap_sum), 0.0, 1.0);
}

}  // namespace dcb
