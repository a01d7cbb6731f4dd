#pragma once

// Seven-cell cluster state: three reused frequency bands, per-channel state
// tracking, and the lending-capacity arithmetic.
//
// Channels are discrete, individually tracked units. A loan moves usable
// capacity: the donor marks channels Lent (they stay in its slot vector but
// stop counting toward capacity) and the reference cell gains slots tagged
// with the donor's id. Returned slots in the reference cell are tombstoned
// rather than erased so outstanding slot indices stay stable.

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcb {

enum class Band : std::uint8_t { X, Y, Z };
enum class ChannelState : std::uint8_t { Free, Busy, Lent, Inactivated, InnerOnly };
enum class CellGroup : std::uint8_t { Reference, A, B };

constexpr int kNumCells = 7;
constexpr int kReferenceCell = 1;

inline const char* band_name(Band b) {
  switch (b) {
    case Band::X: return "X";
    case Band::Y: return "Y";
    default: return "Z";
  }
}

/// Cell 1 carries band X; the odd ring positions {2,4,6} share Y and
/// {3,5,7} share Z.
inline Band cell_band(int id) {
  if (id == kReferenceCell) return Band::X;
  return id % 2 == 0 ? Band::Y : Band::Z;
}

inline CellGroup cell_group(int id) {
  if (id == kReferenceCell) return CellGroup::Reference;
  return id % 2 == 0 ? CellGroup::A : CellGroup::B;
}

inline const std::array<int, 3>& group_members(CellGroup g) {
  static const std::array<int, 3> a{2, 4, 6};
  static const std::array<int, 3> b{3, 5, 7};
  if (g == CellGroup::Reference)
    throw std::invalid_argument("group_members: reference cell is not a donor group");
  return g == CellGroup::A ? a : b;
}

struct Channel {
  ChannelState state = ChannelState::Free;
  int home = 0;      // owning cell; differs from the holder only while on loan
  bool live = true;  // tombstoned slots keep later indices stable
};

struct Loan {
  int donor = 0;
  int borrower = kReferenceCell;
  int count = 0;
};

class Cluster;

class Cell {
 public:
  Cell() = default;
  Cell(int id, int n_channels)
      : id_(id),
        band_(cell_band(id)),
        group_(cell_group(id)),
        n_original_(n_channels),
        live_(n_channels),
        channels_(static_cast<std::size_t>(n_channels), Channel{ChannelState::Free, id, true}) {
    counts_[static_cast<int>(ChannelState::Free)] = n_channels;
  }

  int id() const { return id_; }
  Band band() const { return band_; }
  CellGroup group() const { return group_; }
  int n_original() const { return n_original_; }

  /// Live slots, i.e. the channels the cell currently holds.
  int size() const { return live_; }

  /// Usable capacity N'_m: live slots minus channels currently lent out.
  int capacity() const { return live_ - counts_[static_cast<int>(ChannelState::Lent)]; }

  int count(ChannelState s) const { return counts_[static_cast<int>(s)]; }
  int free_count() const { return count(ChannelState::Free); }
  int busy_count() const { return count(ChannelState::Busy); }
  int lent_count() const { return count(ChannelState::Lent); }

  const std::vector<Channel>& slots() const { return channels_; }

  /// Live channel states in slot order (tombstones skipped); used to compare
  /// whole-cell state in tests.
  std::vector<ChannelState> state_vector() const {
    std::vector<ChannelState> v;
    v.reserve(static_cast<std::size_t>(live_));
    for (const auto& c : channels_)
      if (c.live) v.push_back(c.state);
    return v;
  }

 private:
  friend class Cluster;

  static bool legal_transition(ChannelState from, ChannelState to) {
    if (from == ChannelState::Free) return to != ChannelState::Free;
    return to == ChannelState::Free;
  }

  void set_state(int slot, ChannelState to) {
    Channel& c = channels_.at(static_cast<std::size_t>(slot));
    if (!c.live) throw std::logic_error("set_state: dead slot");
    if (!legal_transition(c.state, to))
      throw std::logic_error("illegal channel transition in cell " + std::to_string(id_));
    --counts_[static_cast<int>(c.state)];
    c.state = to;
    ++counts_[static_cast<int>(to)];
    if (to == ChannelState::Free && slot < free_hint_) free_hint_ = slot;
  }

  /// Lowest-index live Free slot, or -1. Calls pack into low indices so the
  /// top of the range empties first.
  int lowest_free() const {
    for (std::size_t i = static_cast<std::size_t>(free_hint_); i < channels_.size(); ++i) {
      if (channels_[i].live && channels_[i].state == ChannelState::Free) {
        free_hint_ = static_cast<int>(i);
        return static_cast<int>(i);
      }
    }
    free_hint_ = static_cast<int>(channels_.size());
    return -1;
  }

  int highest_with(ChannelState s) const {
    for (int i = static_cast<int>(channels_.size()) - 1; i >= 0; --i)
      if (channels_[static_cast<std::size_t>(i)].live &&
          channels_[static_cast<std::size_t>(i)].state == s)
        return i;
    return -1;
  }

  int lowest_with(ChannelState s) const {
    for (std::size_t i = 0; i < channels_.size(); ++i)
      if (channels_[i].live && channels_[i].state == s) return static_cast<int>(i);
    return -1;
  }

  int add_slot(int home) {
    // Reuse a tombstone if one exists.
    for (std::size_t i = 0; i < channels_.size(); ++i) {
      if (!channels_[i].live) {
        channels_[i] = Channel{ChannelState::Free, home, true};
        ++live_;
        ++counts_[static_cast<int>(ChannelState::Free)];
        if (static_cast<int>(i) < free_hint_) free_hint_ = static_cast<int>(i);
        return static_cast<int>(i);
      }
    }
    channels_.push_back(Channel{ChannelState::Free, home, true});
    ++live_;
    ++counts_[static_cast<int>(ChannelState::Free)];
    return static_cast<int>(channels_.size()) - 1;
  }

  void kill_slot(int slot) {
    Channel& c = channels_.at(static_cast<std::size_t>(slot));
    if (!c.live || c.state != ChannelState::Free)
      throw std::logic_error("kill_slot: slot must be live and Free");
    c.live = false;
    --live_;
    --counts_[static_cast<int>(ChannelState::Free)];
    while (!channels_.empty() && !channels_.back().live) channels_.pop_back();
  }

  int id_ = 0;
  Band band_ = Band::X;
  CellGroup group_ = CellGroup::Reference;
  int n_original_ = 0;
  int live_ = 0;
  std::array<int, 5> counts_{};
  mutable int free_hint_ = 0;
  std::vector<Channel> channels_;
};

class Cluster {
 public:
  Cluster(int n_per_cell, int n_th) : n_per_cell_(n_per_cell), n_th_(n_th) {
    if (n_per_cell < 0) throw std::invalid_argument("build_cluster: n_per_cell must be >= 0");
    if (n_th < 0 || n_th > n_per_cell)
      throw std::invalid_argument("build_cluster: need 0 <= n_th <= n_per_cell");
    for (int id = 1; id <= kNumCells; ++id)
      cells_[static_cast<std::size_t>(id - 1)] = Cell(id, n_per_cell);
    total_capacity_ = n_per_cell * kNumCells;
  }

  int n_per_cell() const { return n_per_cell_; }
  int n_th() const { return n_th_; }

  Cell& cell(int id) { return cells_.at(static_cast<std::size_t>(id - 1)); }
  const Cell& cell(int id) const { return cells_.at(static_cast<std::size_t>(id - 1)); }

  const std::vector<Loan>& ledger() const { return ledger_; }

  int lent_by(int donor) const {
    for (const auto& l : ledger_)
      if (l.donor == donor) return l.count;
    return 0;
  }

  /// Channels currently on loan from the given donor group (the size of the
  /// contested sub-range on that group's band).
  int lent_by_group(CellGroup g) const {
    int total = 0;
    for (int id : group_members(g)) total += lent_by(id);
    return total;
  }

  /// Sum of per-cell usable capacity; conserved at 7 * n_per_cell.
  int total_capacity() const { return total_capacity_; }

  bool conservation_holds() const { return total_capacity_ == n_per_cell_ * kNumCells; }

  bool donor_floor_holds() const {
    for (int id = 2; id <= kNumCells; ++id)
      if (cell(id).capacity() < n_th_) return false;
    return true;
  }

  /// Occupies the lowest-index Free channel; returns its slot index.
  int occupy(int cell_id) {
    Cell& c = cell(cell_id);
    const int slot = c.lowest_free();
    if (slot < 0) throw std::logic_error("occupy: no free channel in cell " + std::to_string(cell_id));
    c.set_state(slot, ChannelState::Busy);
    return slot;
  }

  void release(int cell_id, int slot) { cell(cell_id).set_state(slot, ChannelState::Free); }

  /// Marks `count` top-of-range Free channels Lent in the donor and grants
  /// that many slots (tagged with the donor id) to the reference cell.
  void lend(int donor_id, int count) {
    if (count < 0) throw std::invalid_argument("lend: negative count");
    if (count == 0) return;
    Cell& donor = cell(donor_id);
    if (donor.group() == CellGroup::Reference)
      throw std::invalid_argument("lend: reference cell cannot be a donor");
    const int room = donor.n_original() - n_th_ - lent_by(donor_id);
    if (count > std::min(donor.free_count(), room))
      throw std::logic_error("lend: grant exceeds current lendable capacity of cell " +
                             std::to_string(donor_id));
    for (int k = 0; k < count; ++k) {
      const int slot = donor.highest_with(ChannelState::Free);
      donor.set_state(slot, ChannelState::Lent);
      cell(kReferenceCell).add_slot(donor_id);
    }
    for (auto& l : ledger_) {
      if (l.donor == donor_id) {
        l.count += count;
        return;
      }
    }
    ledger_.push_back(Loan{donor_id, kReferenceCell, count});
  }

  /// Returns `count` loaned channels to the donor. The reference cell must
  /// hold that many Free slots tagged with the donor id.
  void return_loan(int donor_id, int count) {
    if (count < 0) throw std::invalid_argument("return_loan: negative count");
    if (count == 0) return;
    auto entry = std::find_if(ledger_.begin(), ledger_.end(),
                              [&](const Loan& l) { return l.donor == donor_id; });
    if (entry == ledger_.end() || entry->count < count)
      throw std::logic_error("return_loan: ledger records fewer than " + std::to_string(count) +
                             " channels loaned by cell " + std::to_string(donor_id));
    Cell& ref = cell(kReferenceCell);
    for (int k = 0; k < count; ++k) {
      int slot = -1;
      for (int i = static_cast<int>(ref.slots().size()) - 1; i >= 0; --i) {
        const Channel& c = ref.slots()[static_cast<std::size_t>(i)];
        if (c.live && c.home == donor_id && c.state == ChannelState::Free) {
          slot = i;
          break;
        }
      }
      if (slot < 0)
        throw std::logic_error("return_loan: no free loaned channel from cell " +
                               std::to_string(donor_id) + " to return");
      ref.kill_slot(slot);
      Cell& donor = cell(donor_id);
      donor.set_state(donor.lowest_with(ChannelState::Lent), ChannelState::Free);
    }
    entry->count -= count;
    if (entry->count == 0) ledger_.erase(entry);
  }

  /// Strategy-2 bookkeeping: locks `count` top-of-range Free channels.
  void inactivate_top(int cell_id, int count) {
    mark_top(cell_id, count, ChannelState::Inactivated);
  }

  void reactivate(int cell_id, int count) { unmark(cell_id, count, ChannelState::Inactivated); }

  /// Strategy-1/3 bookkeeping: restricts `count` top-of-range Free channels
  /// to inner-zone service.
  void set_inner_only_top(int cell_id, int count) {
    mark_top(cell_id, count, ChannelState::InnerOnly);
  }

  void clear_inner_only(int cell_id, int count) { unmark(cell_id, count, ChannelState::InnerOnly); }

  /// Full recount of cached tallies; throws on any mismatch.
  void verify_counts() const {
    int cap_sum = 0;
    for (const auto& c : cells_) {
      std::array<int, 5> fresh{};
      int live = 0;
      for (const auto& ch : c.channels_) {
        if (!ch.live) continue;
        ++live;
        ++fresh[static_cast<int>(ch.state)];
      }
      if (fresh != c.counts_ || live != c.live_)
        throw std::logic_error("verify_counts: cached tallies diverged in cell " +
                               std::to_string(c.id()));
      cap_sum += c.capacity();
    }
    if (cap_sum != total_capacity_)
      throw std::logic_error("verify_counts: capacity sum diverged from cached total");
    if (cap_sum != n_per_cell_ * kNumCells)
      throw std::logic_error("verify_counts: channel conservation violated");
  }

  /// Test hook: removes a Free channel outside the ledger so the invariant
  /// checks have something to catch.
  void drop_channel_unchecked(int cell_id) {
    Cell& c = cell(cell_id);
    const int slot = c.lowest_free();
    if (slot < 0) return;
    c.kill_slot(slot);
    --total_capacity_;
  }

 private:
  void mark_top(int cell_id, int count, ChannelState s) {
    if (count < 0) throw std::invalid_argument("mark_top: negative count");
    Cell& c = cell(cell_id);
    if (c.free_count() < count)
      throw std::logic_error("cell " + std::to_string(cell_id) + " has too few free channels");
    for (int k = 0; k < count; ++k) c.set_state(c.highest_with(ChannelState::Free), s);
  }

  void unmark(int cell_id, int count, ChannelState s) {
    Cell& c = cell(cell_id);
    if (c.count(s) < count)
      throw std::logic_error("cell " + std::to_string(cell_id) + " has too few marked channels");
    for (int k = 0; k < count; ++k) c.set_state(c.lowest_with(s), ChannelState::Free);
  }

  int n_per_cell_ = 0;
  int n_th_ = 0;
  int total_capacity_ = 0;
  std::array<Cell, kNumCells> cells_{};
  std::vector<Loan> ledger_;
};

inline Cluster build_cluster(int n_per_cell, int n_th) { return Cluster(n_per_cell, n_th); }

/// Count of unused (Free) channels in the cell.
inline int available(const Cell& cell) { return cell.free_count(); }

/// How much the donor can lend right now: free channels, capped so the cell
/// never drops below the lending floor.
inline int lendable(const Cell& cell, const Cluster& cluster) {
  if (cell.group() == CellGroup::Reference)
    throw std::invalid_argument("lendable: the reference cell does not lend");
  const int room = cell.n_original() - cluster.n_th() - cluster.lent_by(cell.id());
  return std::max(0, std::min(available(cell), room));
}

}  // namespace dcb
