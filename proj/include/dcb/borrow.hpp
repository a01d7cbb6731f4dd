#pragma once

// Donor selection and threshold-capped channel borrowing for the reference
// cell: plan (pure), execute (commits against the ledger), release.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcb/cluster.hpp"

namespace dcb {

struct Grant {
  int donor = 0;
  int count = 0;
  bool operator==(const Grant&) const = default;
};

struct BorrowPlan {
  int requested = 0;
  std::vector<Grant> grants;  // at most one per donor group, group A first
  int shortfall = 0;

  int granted() const {
    int g = 0;
    for (const auto& gr : grants) g += gr.count;
    return g;
  }
};

/// Raised when a plan no longer fits the cluster it is executed against.
class StalePlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Group member with the most lendable channels; ties go to the lowest cell
/// id. Empty when nobody in the group can lend.
inline std::optional<int> select_donor(const Cluster& cluster, CellGroup group) {
  if (group == CellGroup::Reference)
    throw std::invalid_argument("select_donor: group must be A or B");
  int best_id = -1;
  int best = 0;
  for (int id : group_members(group)) {
    const int l = lendable(cluster.cell(id), cluster);
    if (l > best) {
      best = l;
      best_id = id;
    }
  }
  if (best_id < 0) return std::nullopt;
  return best_id;
}

/// Plans a borrow of n_req channels for the reference cell: first from the
/// best group-A donor, then any remainder from the best group-B donor.
/// Never mutates the cluster; an unmet remainder is reported as shortfall.
inline BorrowPlan plan_borrow(const Cluster& cluster, int n_req) {
  if (n_req < 0) throw std::invalid_argument("plan_borrow: n_req must be >= 0");
  BorrowPlan plan;
  plan.requested = n_req;
  int remaining = n_req;
  for (CellGroup group : {CellGroup::A, CellGroup::B}) {
    if (remaining == 0) break;
    const auto donor = select_donor(cluster, group);
    if (!donor) continue;
    const int grant = std::min(remaining, lendable(cluster.cell(*donor), cluster));
    if (grant > 0) {
      plan.grants.push_back(Grant{*donor, grant});
      remaining -= grant;
    }
  }
  plan.shortfall = remaining;
  return plan;
}

/// Commits a plan. Every grant is re-checked against the current state;
/// a grant that no longer fits aborts before any mutation.
inline void execute_plan(Cluster& cluster, const BorrowPlan& plan) {
  for (const auto& g : plan.grants) {
    if (g.count > lendable(cluster.cell(g.donor), cluster))
      throw StalePlanError("execute_plan: grant of " + std::to_string(g.count) +
                           " from cell " + std::to_string(g.donor) +
                           " exceeds its current lendable capacity");
  }
  for (const auto& g : plan.grants) cluster.lend(g.donor, g.count);
}

/// Returns `count` borrowed channels to their donor.
inline void release_loaned(Cluster& cluster, int donor_id, int count) {
  cluster.return_loan(donor_id, count);
}

}  // namespace dcb
