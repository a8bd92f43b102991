#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wcn/model.hpp"
#include "wcn/rng.hpp"

namespace wcn {

// Per-node per-commodity backlogs, real-valued.
struct BacklogState {
  int commodities = 0;
  std::vector<double> q;

  BacklogState() = default;
  explicit BacklogState(const Model& m)
      : commodities(static_cast<int>(m.commodities.size())),
        q(m.nodes.size() * m.commodities.size(), 0.0) {}

  double& at(int node, int comm) {
    return q[static_cast<std::size_t>(node) * commodities + comm];
  }
  double at(int node, int comm) const {
    return q[static_cast<std::size_t>(node) * commodities + comm];
  }
  double total() const {
    double s = 0.0;
    for (double v : q) s += v;
    return s;
  }
};

// Exogenous arrivals, merged per (source node, source commodity).
class ArrivalProcess {
 public:
  ArrivalProcess(const Model& m, const StreamFactory& streams)
      : kind_(m.control.arrivals), stream_(streams.stream("arrivals")) {
    std::map<std::pair<int, int>, double> merged;
    for (int s = 0; s < static_cast<int>(m.services.size()); ++s)
      for (const Client& c : m.services[s].clients) {
        const int comm = m.commodity_index(Commodity{c.dst, s, 0});
        merged[{c.src, comm}] += m.control.lambda;
      }
    for (const auto& [key, lambda] : merged)
      entries_.push_back(Entry{key.first, key.second, lambda});
  }

  // Adds one slot of arrivals into `batch` (same layout as BacklogState::q);
  // returns the raw mass added.
  double generate(const BacklogState& shape, std::vector<double>& batch) {
    double mass = 0.0;
    for (const Entry& e : entries_) {
      double a;
      if (kind_ == ArrivalKind::deterministic) {
        a = e.lambda;
      } else {
        a = static_cast<double>(sample_poisson(stream_, e.lambda));
      }
      if (a != 0.0) {
        batch[static_cast<std::size_t>(e.node) * shape.commodities + e.comm] += a;
        mass += a;
      }
    }
    return mass;
  }

  double mean_mass_per_slot() const {
    double s = 0.0;
    for (const Entry& e : entries_) s += e.lambda;
    return s;
  }

 private:
  struct Entry {
    int node;
    int comm;
    double lambda;
  };
  ArrivalKind kind_;
  std::mt19937_64 stream_;
  std::vector<Entry> entries_;
};

// One slot's realized flows, accumulated by the engine before the update.
struct SlotFlows {
  std::vector<double> outflow;   // transmitted away + processing input consumed
  std::vector<double> inflow;    // received transfers + scaled processing output
  std::vector<double> arrivals;

  explicit SlotFlows(const BacklogState& shape)
      : outflow(shape.q.size(), 0.0),
        inflow(shape.q.size(), 0.0),
        arrivals(shape.q.size(), 0.0) {}

  void clear() {
    std::fill(outflow.begin(), outflow.end(), 0.0);
    std::fill(inflow.begin(), inflow.end(), 0.0);
    std::fill(arrivals.begin(), arrivals.end(), 0.0);
  }
};

// Q(t+1) = Q(t) - outflow + inflow + arrivals, then absorb final commodities
// at their destinations.  The caller must have capped outflows by Q(t); this
// asserts that and faults rather than let conservation silently break.
// `delivered` receives the absorbed amount per commodity index.
inline double apply_slot_update(const Model& m, BacklogState& Q,
                                const SlotFlows& f,
                                std::vector<double>& delivered) {
  for (std::size_t i = 0; i < Q.q.size(); ++i) {
    const double before = Q.q[i];
    if (f.outflow[i] > before + 1e-9 * (1.0 + before))
      throw EngineError("slot update: outflow " + std::to_string(f.outflow[i]) +
                        " exceeds backlog " + std::to_string(before));
    double v = before - f.outflow[i];
    if (v < 0.0) v = 0.0;
    Q.q[i] = v + f.inflow[i] + f.arrivals[i];
  }
  double absorbed = 0.0;
  for (int c = 0; c < static_cast<int>(m.commodities.size()); ++c) {
    const Commodity& com = m.commodities[c];
    if (com.stage != m.stages(com.svc)) continue;
    double& slot = Q.at(com.dst, c);
    if (slot != 0.0) {
      absorbed += slot;
      delivered[static_cast<std::size_t>(c)] += slot;
      slot = 0.0;
    }
  }
  return absorbed;
}

// Conservation ledger in final-stage-equivalent mass: stage-m units count as
// the product of the scaling factors of all later functions.  Arrivals add,
// deliveries subtract, and processing moves mass between stages at exactly
// zero net weight, so arrived - delivered - queued stays at zero up to
// floating-point noise.
class MassLedger {
 public:
  explicit MassLedger(const Model& m) {
    weight_.reserve(m.commodities.size());
    for (const Commodity& c : m.commodities)
      weight_.push_back(m.final_equivalent(c.svc, c.stage));
  }

  void add_arrivals(const std::vector<double>& batch) {
    const std::size_t C = weight_.size();
    for (std::size_t i = 0; i < batch.size(); ++i)
      if (batch[i] != 0.0) arrived_ += batch[i] * weight_[i % C];
  }

  void add_delivered(double final_units) { delivered_ += final_units; }

  double queued_mass(const BacklogState& Q) const {
    long double s = 0.0L;
    const std::size_t C = weight_.size();
    for (std::size_t i = 0; i < Q.q.size(); ++i)
      if (Q.q[i] != 0.0) s += static_cast<long double>(Q.q[i]) * weight_[i % C];
    return static_cast<double>(s);
  }

  double residual(const BacklogState& Q) const {
    return static_cast<double>(arrived_ - delivered_ -
                               static_cast<long double>(queued_mass(Q)));
  }

  double arrived() const { return static_cast<double>(arrived_); }
  double delivered() const { return static_cast<double>(delivered_); }

  // Breach threshold: the specified absolute budget per thousand slots plus
  // a relative term for large runs.
  double tolerance(std::uint64_t slots_elapsed) const {
    return 1e-9 * (1.0 + static_cast<double>(slots_elapsed) / 1000.0) +
           1e-11 * static_cast<double>(arrived_);
  }

 private:
  std::vector<double> weight_;
  long double arrived_ = 0.0L;
  long double delivered_ = 0.0L;
};

}  // namespace wcn
