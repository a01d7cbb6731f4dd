#pragma once

// Seeded discrete-event simulation of the cluster under Poisson arrivals and
// exponential holding, with per-arrival borrowing by the reference cell.
//
// Reproducibility contract: one generator per cell, split off the run seed,
// and every arrival draws its interarrival gap and holding time as a pair in
// cell-local order. Admission outcomes therefore never perturb the random
// sequences, and a given seed yields bit-identical statistics.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>
#include <vector>

#include "dcb/borrow.hpp"
#include "dcb/cluster.hpp"
#include "dcb/erlang.hpp"

namespace dcb {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct SimConfig {
  ClusterTraffic traffic;  // capacity fields are ignored; the cluster decides
  int n_per_cell = 100;
  int n_threshold = 70;
  bool borrowing_enabled = true;
  std::uint64_t seed = 1;
  std::uint64_t max_arrivals = 1'000'000;  // horizon by arrival count
  double max_time_s = 0.0;                 // optional cap in simulated seconds (0 = off)
  double warmup_fraction = 0.1;            // leading arrivals dropped from statistics
  bool check_invariants = false;           // conservation + donor floor at every event
  std::uint64_t corrupt_at_arrival = 0;    // test hook: breaks conservation at this arrival
};

struct CellSimStats {
  std::uint64_t offered = 0;
  std::uint64_t blocked = 0;
  std::uint64_t carried = 0;
  double blocking = 0.0;
  double blocking_stderr = 0.0;
  double mean_occupancy = 0.0;             // time-averaged busy channels
  double mean_capacity = 0.0;              // time-averaged N'_m
  double contested_unoccupied_fraction = 1.0;  // cells 4..7: top-of-range loan slice idle

  bool operator==(const CellSimStats&) const = default;
};

struct SimStats {
  std::array<CellSimStats, 7> cells{};
  std::uint64_t total_offered = 0;
  std::uint64_t total_blocked = 0;
  std::uint64_t generated_arrivals = 0;  // includes warmup
  double overall_blocking = 0.0;
  double overall_blocking_stderr = 0.0;
  double utilization = 0.0;  // time-averaged busy channels over total capacity
  double measured_time_s = 0.0;
  std::uint64_t borrow_events = 0;

  bool operator==(const SimStats&) const = default;
};

namespace detail {

struct SimEvent {
  double t = 0.0;
  std::uint64_t seq = 0;
  int cell = 0;
  int slot = -1;       // departure: slot being released
  bool departure = false;

  bool operator>(const SimEvent& other) const {
    if (t != other.t) return t > other.t;
    return seq > other.seq;
  }
};

struct CellStream {
  std::mt19937_64 rng;
  double lambda = 0.0;
  double mu = 1.0;

  double uniform() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
};

// Batch-means accumulator for a blocking ratio; batches absorb the serial
// correlation a plain binomial error bar would ignore.
struct RatioBatches {
  std::vector<std::array<std::uint64_t, 2>> batches;  // {offered, blocked}

  void ensure(std::size_t idx) {
    if (batches.size() <= idx) batches.resize(idx + 1, {0, 0});
  }
  void add(std::size_t idx, bool blocked) {
    ensure(idx);
    ++batches[idx][0];
    if (blocked) ++batches[idx][1];
  }
  double stderr_of_ratio() const {
    std::vector<double> r;
    for (const auto& b : batches)
      if (b[0] > 0) r.push_back(static_cast<double>(b[1]) / static_cast<double>(b[0]));
    if (r.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(r.size());
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(r.size() - 1);
    return std::sqrt(var / static_cast<double>(r.size()));
  }
};

}  // namespace detail

/// Runs one seeded simulation. An arrival that finds the reference cell full
/// triggers a one-channel borrow when enabled; a call served on a borrowed
/// channel returns it to the donor the moment it ends.
inline SimStats run(const SimConfig& config) {
  config.traffic.validate();
  if (config.max_arrivals == 0 && config.max_time_s <= 0.0)
    throw std::invalid_argument("sim: horizon must be positive");
  if (config.warmup_fraction < 0.0 || config.warmup_fraction >= 1.0)
    throw std::invalid_argument("sim: warmup_fraction must lie in [0, 1)");

  Cluster cluster = build_cluster(config.n_per_cell, config.n_threshold);

  std::array<detail::CellStream, 7> streams;
  std::uint64_t seed_chain = config.seed;
  for (int m = 0; m < 7; ++m) {
    streams[static_cast<std::size_t>(m)].rng.seed(splitmix64(seed_chain));
    streams[static_cast<std::size_t>(m)].lambda = config.traffic.profiles[static_cast<std::size_t>(m)].lambda;
    streams[static_cast<std::size_t>(m)].mu = config.traffic.profiles[static_cast<std::size_t>(m)].mu;
  }

  std::priority_queue<detail::SimEvent, std::vector<detail::SimEvent>, std::greater<>> queue;
  std::uint64_t seq = 0;

  auto schedule_arrival = [&](int cell_idx, double now) {
    auto& s = streams[static_cast<std::size_t>(cell_idx)];
    if (s.lambda <= 0.0) return;
    queue.push(detail::SimEvent{now + s.exponential(s.lambda), ++seq, cell_idx + 1, -1, false});
  };

  for (int m = 0; m < 7; ++m) schedule_arrival(m, 0.0);

  const std::uint64_t warmup_count =
      config.max_arrivals > 0
          ? static_cast<std::uint64_t>(config.warmup_fraction * static_cast<double>(config.max_arrivals))
          : 0;

  SimStats stats;
  std::array<detail::RatioBatches, 7> cell_batches;
  detail::RatioBatches overall_batches;
  const std::uint64_t post_total = config.max_arrivals > warmup_count
                                       ? config.max_arrivals - warmup_count
                                       : std::uint64_t{1};
  const std::uint64_t batch_stride =
      config.max_arrivals > 0 ? std::max<std::uint64_t>(1, post_total / 20) : 10'000;

  std::uint64_t arrivals = 0;        // generated, incl. warmup
  std::uint64_t post_arrivals = 0;   // counted in statistics
  bool measuring = warmup_count == 0;
  double measure_start = 0.0;
  double last_event_t = 0.0;

  // Time integrals, accumulated post-warmup.
  std::array<double, 7> busy_area{};
  std::array<double, 7> capacity_area{};
  std::array<double, 7> contested_idle_area{};
  double busy_total_area = 0.0;

  const int total_channels = config.n_per_cell * kNumCells;
  std::uint64_t events_since_recount = 0;

  auto accumulate_time = [&](double now) {
    const double dt = now - last_event_t;
    if (measuring && dt > 0.0) {
      int busy_sum = 0;
      const int lent_a = cluster.lent_by_group(CellGroup::A);
      const int lent_b = cluster.lent_by_group(CellGroup::B);
      for (int m = 1; m <= 7; ++m) {
        const Cell& c = cluster.cell(m);
        busy_area[static_cast<std::size_t>(m - 1)] += c.busy_count() * dt;
        capacity_area[static_cast<std::size_t>(m - 1)] += c.capacity() * dt;
        busy_sum += c.busy_count();
        if (m >= 4) {
          const int contested = c.group() == CellGroup::A ? lent_a : lent_b;
          if (available(c) + cluster.lent_by(m) >= contested)
            contested_idle_area[static_cast<std::size_t>(m - 1)] += dt;
        }
      }
      busy_total_area += busy_sum * dt;
    }
    last_event_t = now;
  };

  auto check_invariants = [&](double now) {
    if (!config.check_invariants) return;
    if (!cluster.conservation_holds())
      throw std::logic_error("sim: channel conservation violated at t=" + std::to_string(now));
    if (!cluster.donor_floor_holds())
      throw std::logic_error("sim: donor dropped below lending floor at t=" + std::to_string(now));
    if (++events_since_recount >= 65536) {
      events_since_recount = 0;
      cluster.verify_counts();
    }
  };

  while (!queue.empty()) {
    const detail::SimEvent ev = queue.top();
    queue.pop();
    if (config.max_time_s > 0.0 && ev.t > config.max_time_s) break;

    accumulate_time(ev.t);

    if (ev.departure) {
      const int home = cluster.cell(ev.cell).slots()[static_cast<std::size_t>(ev.slot)].home;
      cluster.release(ev.cell, ev.slot);
      if (ev.cell == kReferenceCell && home != kReferenceCell)
        release_loaned(cluster, home, 1);
      check_invariants(ev.t);
      continue;
    }

    // Arrival.
    ++arrivals;
    const int m = ev.cell;
    auto& stream = streams[static_cast<std::size_t>(m - 1)];
    const double holding = stream.exponential(stream.mu);
    schedule_arrival(m - 1, ev.t);

    if (config.corrupt_at_arrival > 0 && arrivals == config.corrupt_at_arrival)
      cluster.drop_channel_unchecked(2);

    if (!measuring && arrivals > warmup_count) {
      measuring = true;
      measure_start = ev.t;
      last_event_t = ev.t;
    }

    bool blocked = false;
    if (available(cluster.cell(m)) > 0) {
      const int slot = cluster.occupy(m);
      queue.push(detail::SimEvent{ev.t + holding, ++seq, m, slot, true});
    } else if (m == kReferenceCell && config.borrowing_enabled) {
      const BorrowPlan plan = plan_borrow(cluster, 1);
      if (plan.granted() == 1) {
        execute_plan(cluster, plan);
        ++stats.borrow_events;
        const int slot = cluster.occupy(m);  // the freshly granted channel
        queue.push(detail::SimEvent{ev.t + holding, ++seq, m, slot, true});
      } else {
        blocked = true;
      }
    } else {
      blocked = true;
    }

    if (measuring) {
      auto& cs = stats.cells[static_cast<std::size_t>(m - 1)];
      ++cs.offered;
      if (blocked) ++cs.blocked;
      const std::size_t batch = static_cast<std::size_t>(post_arrivals / batch_stride);
      cell_batches[static_cast<std::size_t>(m - 1)].add(batch, blocked);
      overall_batches.add(batch, blocked);
      ++post_arrivals;
    }

    check_invariants(ev.t);
    if (config.max_arrivals > 0 && arrivals >= config.max_arrivals) break;
  }

  cluster.verify_counts();

  stats.generated_arrivals = arrivals;
  stats.measured_time_s = last_event_t - measure_start;
  const double span = stats.measured_time_s > 0.0 ? stats.measured_time_s : 1.0;
  for (int m = 0; m < 7; ++m) {
    auto& cs = stats.cells[static_cast<std::size_t>(m)];
    cs.carried = cs.offered - cs.blocked;
    cs.blocking = cs.offered > 0 ? static_cast<double>(cs.blocked) / static_cast<double>(cs.offered) : 0.0;
    cs.blocking_stderr = cell_batches[static_cast<std::size_t>(m)].stderr_of_ratio();
    cs.mean_occupancy = busy_area[static_cast<std::size_t>(m)] / span;
    cs.mean_capacity = capacity_area[static_cast<std::size_t>(m)] / span;
    if (m + 1 >= 4)
      cs.contested_unoccupied_fraction = contested_idle_area[static_cast<std::size_t>(m)] / span;
    stats.total_offered += cs.offered;
    stats.total_blocked += cs.blocked;
  }
  stats.overall_blocking = stats.total_offered > 0
                               ? static_cast<double>(stats.total_blocked) / static_cast<double>(stats.total_offered)
                               : 0.0;
  stats.overall_blocking_stderr = overall_batches.stderr_of_ratio();
  stats.utilization = total_channels > 0 ? busy_total_area / span / total_channels : 0.0;
  return stats;
}

struct CellComparison {
  double analytic = 0.0;
  double empirical = 0.0;
  double stderr_est = 0.0;
  double z = 0.0;
  bool comparable = false;
  bool flagged = false;  // |z| > 3
};

struct ZReport {
  std::array<CellComparison, 7> cells{};
  CellComparison overall{};
  bool any_flagged = false;
  bool any_incomparable = false;
};

/// Per-cell and overall z-scores of empirical blocking against analytic
/// values. Cells with zero standard error are reported incomparable.
inline ZReport compare(const std::array<double, 7>& analytic_blocking, const SimStats& stats) {
  ZReport report;
  auto score = [](double analytic, double empirical, double se) {
    CellComparison c;
    c.analytic = analytic;
    c.empirical = empirical;
    c.stderr_est = se;
    if (se > 0.0) {
      c.comparable = true;
      c.z = (empirical - analytic) / se;
      c.flagged = std::abs(c.z) > 3.0;
    }
    return c;
  };
  double overall_analytic = 0.0;
  for (int m = 0; m < 7; ++m) {
    const auto& cs = stats.cells[static_cast<std::size_t>(m)];
    report.cells[static_cast<std::size_t>(m)] =
        score(analytic_blocking[static_cast<std::size_t>(m)], cs.blocking, cs.blocking_stderr);
    if (stats.total_offered > 0)
      overall_analytic += analytic_blocking[static_cast<std::size_t>(m)] *
                          static_cast<double>(cs.offered) / static_cast<double>(stats.total_offered);
  }
  report.overall = score(overall_analytic, stats.overall_blocking, stats.overall_blocking_stderr);
  for (const auto& c : report.cells) {
    report.any_flagged = report.any_flagged || c.flagged;
    report.any_incomparable = report.any_incomparable || !c.comparable;
  }
  report.any_flagged = report.any_flagged || report.overall.flagged;
  return report;
}

}  // namespace dcb
