#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wcn/channel.hpp"
#include "wcn/coding.hpp"
#include "wcn/config.hpp"
#include "wcn/control.hpp"
#include "wcn/model.hpp"
#include "wcn/queueing.hpp"
#include "wcn/rng.hpp"

namespace wcn {

struct TracePoint {
  std::uint64_t t = 0;
  double cost = 0.0;
  double occupancy = 0.0;
  double delivered = 0.0;
};

struct StabilityReport {
  bool stable = true;
  double slope = 0.0;             // occupancy units per slot
  double normalized_slope = 0.0;  // slope / mean arrival mass per slot
};

// Least-squares slope of the occupancy series restricted to the last half of
// the run; the verdict compares it against a fraction of the per-slot
// arrival mass.
inline StabilityReport stability_estimate(
    const std::vector<TracePoint>& series, double arrival_mass_per_slot,
    double unstable_frac = 0.05) {
  StabilityReport rep;
  if (series.empty()) return rep;
  const std::uint64_t t_end = series.back().t;
  const std::uint64_t t_mid = t_end / 2;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  double n = 0.0;
  for (const TracePoint& p : series) {
    if (p.t < t_mid) continue;
    const double x = static_cast<double>(p.t - t_mid);
    sx += x;
    sy += p.occupancy;
    sxx += x * x;
    sxy += x * p.occupancy;
    n += 1.0;
  }
  if (n < 2.0) return rep;
  const double det = n * sxx - sx * sx;
  if (det <= 0.0) return rep;
  rep.slope = (n * sxy - sx * sy) / det;
  const double denom = arrival_mass_per_slot > 0.0 ? arrival_mass_per_slot : 1.0;
  rep.normalized_slope = rep.slope / denom;
  rep.stable = rep.normalized_slope <= unstable_frac;
  return rep;
}

struct RunMetrics {
  double avg_cost = 0.0;
  double avg_occupancy = 0.0;
  double cost_se = 0.0;       // batch-means standard error
  double occupancy_se = 0.0;
  double delivered_rate = 0.0;  // final units per slot, post-warmup
  std::vector<double> delivered_rate_by_commodity;
  std::vector<double> processing_input_rate;  // per (node, commodity)
  StabilityReport stability;
  double arrival_mass_rate = 0.0;  // raw units per slot, full run
  std::uint64_t gain_checksum = 0;
  std::uint64_t slots = 0;
  std::uint64_t warmup = 0;
  double ledger_residual = 0.0;
  double max_ledger_residual = 0.0;
};

// Worst-case per-slot queue change, squared and maximized over nodes: the
// drift bound constant.  a_max is the largest per-slot arrival mass any
// single node can see.
inline double drift_bound_B(
    const Model& m, const std::vector<std::vector<std::vector<double>>>& rates,
    double a_max) {
  double r_min = std::numeric_limits<double>::infinity();
  double xi_max = 0.0;
  for (const Service& s : m.services)
    for (const FunctionSpec& f : s.functions) {
      r_min = std::min(r_min, f.complexity);
      xi_max = std::max(xi_max, f.scaling);
    }
  if (!std::isfinite(r_min)) {
    r_min = 1.0;
    xi_max = 0.0;
  }
  double B = 0.0;
  for (int i = 0; i < m.node_count(); ++i) {
    const Node& n = m.nodes[static_cast<std::size_t>(i)];
    const double pr_top = n.pr_menu.back().rate / r_min;
    double out_top = 0.0;
    for (int li : m.out_links[static_cast<std::size_t>(i)])
      out_top = std::max(out_top,
                         rates[static_cast<std::size_t>(li)].back().back());
    double in_sum = 0.0;
    for (int li : m.in_links[static_cast<std::size_t>(i)])
      in_sum += rates[static_cast<std::size_t>(li)].back().back();
    const double out_term = out_top + pr_top;
    const double in_term = in_sum + xi_max * pr_top + a_max;
    B = std::max(B, 0.5 * (out_term * out_term + in_term * in_term));
  }
  return B;
}

inline double drift_bound_B(const Model& m) {
  const auto rates = effective_rate_tables(m, m.control.scheme);
  std::vector<double> node_mass(m.nodes.size(), 0.0);
  for (const Service& s : m.services)
    for (const Client& c : s.clients)
      node_mass[static_cast<std::size_t>(c.src)] += m.control.lambda;
  const double a_max =
      node_mass.empty()
          ? 0.0
          : *std::max_element(node_mass.begin(), node_mass.end());
  return drift_bound_B(m, rates, a_max);
}

// One simulation run: slot phases are (1) backlog snapshot, (2) control
// decisions from Q(t) and statistical CSI, (3) channel realization,
// (4) partition build and layer fill, (5) feedback-driven forwarding,
// (6) queue update with arrivals and destination absorption.
class Engine {
 public:
  explicit Engine(const Model& m)
      : model_(&m),
        streams_(m.control.seed),
        rates_(effective_rate_tables(m, m.control.scheme)),
        channel_(m, streams_),
        arrivals_(m, streams_),
        controller_(m, rates_),
        Q_(m),
        flows_(Q_),
        ledger_(m) {
    delivered_by_comm_.assign(m.commodities.size(), 0.0);
    pr_input_.assign(Q_.q.size(), 0.0);
    pr_decisions_.resize(m.nodes.size());
    tx_decisions_.resize(m.nodes.size());
    warmup_ = static_cast<std::uint64_t>(
        static_cast<double>(m.control.slots) * m.control.warmup_frac);
    if (warmup_ >= m.control.slots)
      throw EngineError("empty measurement window: warmup covers the horizon");
  }

  TracePoint run_slot(std::uint64_t t) {
    const Model& m = *model_;
    flows_.clear();
    TracePoint pt;
    pt.t = t;
    pt.occupancy = Q_.total();

    // Phase 2: all decisions read the frozen Q(t) and the previous channel
    // state (through the per-link conditional CSI rows).
    double cost = 0.0;
    for (int i = 0; i < m.node_count(); ++i) {
      const Node& n = m.nodes[static_cast<std::size_t>(i)];
      ProcessingDecision& pd = pr_decisions_[static_cast<std::size_t>(i)];
      TransmissionDecision& td = tx_decisions_[static_cast<std::size_t>(i)];
      pd = controller_.processing_decision(i, Q_, m.control.V);
      td = controller_.transmission_decision(i, Q_, m.control.V, channel_);
      cost += n.pr_menu[static_cast<std::size_t>(pd.k)].cost +
              n.tx_menu[static_cast<std::size_t>(td.k)].cost;
      if (pd.k > 0) {
        const double have = Q_.at(i, pd.comm);
        const double consumed = std::min(pd.mu, have);
        if (consumed > 0.0) {
          const Commodity& c = m.commodities[static_cast<std::size_t>(pd.comm)];
          const double scaling = m.function(c.svc, c.stage + 1).scaling;
          flows_.outflow[flat(i, pd.comm)] += consumed;
          flows_.inflow[flat(i, pd.comm + 1)] += scaling * consumed;
          if (t >= warmup_) pr_input_[flat(i, pd.comm)] += consumed;
        }
      }
    }
    pt.cost = cost;

    // Phase 3: realize this slot's channel.
    const ChannelSnapshot& snap = channel_.step(t);

    // Phases 4-5: per transmitter, build partitions over realized rates,
    // fill the lowest layers first with whatever backlog remains after
    // processing, and hand each filled partition to the best decoder.
    for (int i = 0; i < m.node_count(); ++i) {
      const TransmissionDecision& td = tx_decisions_[static_cast<std::size_t>(i)];
      if (td.k == 0) continue;
      const ProcessingDecision& pd = pr_decisions_[static_cast<std::size_t>(i)];
      double avail = Q_.at(i, td.comm);
      if (pd.k > 0 && pd.comm == td.comm)
        avail -= std::min(pd.mu, avail);
      if (avail <= 0.0) continue;
      receivers_.clear();
      for (int li : m.out_links[static_cast<std::size_t>(i)])
        receivers_.emplace_back(
            li, rates_[static_cast<std::size_t>(li)]
                      [static_cast<std::size_t>(td.k)]
                      [static_cast<std::size_t>(
                          snap.state[static_cast<std::size_t>(li)])]);
      const PartitionStructure parts = build_partitions(receivers_);
      double remaining = std::min(avail, parts.best_rate());
      if (remaining <= 0.0) continue;
      const ForwardingAssignment fa =
          controller_.forwarding_assignment(parts, td.comm, Q_);
      for (std::size_t n = 0; n < parts.size() && remaining > 0.0; ++n) {
        const double fill = std::min(parts.width[n], remaining);
        if (fill <= 0.0) continue;
        remaining -= fill;
        const int li = fa.assignee[n];
        if (li < 0) continue;  // nobody useful decoded: transmitter retains
        flows_.outflow[flat(i, td.comm)] += fill;
        flows_.inflow[flat(m.links[static_cast<std::size_t>(li)].rx, td.comm)] +=
            fill;
      }
    }

    // Phase 6: arrivals, update, absorption, conservation check.
    arrival_mass_ += arrivals_.generate(Q_, flows_.arrivals);
    ledger_.add_arrivals(flows_.arrivals);
    pt.delivered = apply_slot_update(m, Q_, flows_, delivered_by_comm_);
    ledger_.add_delivered(pt.delivered);
    const double residual = ledger_.residual(Q_);
    max_residual_ = std::max(max_residual_, std::abs(residual));
    if (std::abs(residual) > ledger_.tolerance(t + 1))
      throw EngineError("conservation ledger breach at slot " +
                        std::to_string(t) + ": residual " +
                        std::to_string(residual));
    return pt;
  }

  RunMetrics run(std::vector<TracePoint>* trace = nullptr) {
    const Model& m = *model_;
    const std::uint64_t T = m.control.slots;
    const std::uint64_t stride =
        m.control.trace_stride > 0
            ? m.control.trace_stride
            : std::max<std::uint64_t>(1, T / 20000);

    const std::uint64_t window = T - warmup_;
    const std::uint64_t batches = std::min<std::uint64_t>(32, window);
    const std::uint64_t batch_len = std::max<std::uint64_t>(1, window / batches);

    double cost_sum = 0.0, occ_sum = 0.0, delivered_sum = 0.0;
    std::vector<double> cost_batches, occ_batches;
    double bc = 0.0, bo = 0.0;
    std::uint64_t bn = 0;
    series_.clear();

    for (std::uint64_t t = 0; t < T; ++t) {
      // Per-commodity deliveries are measured over the same window as the
      // scalar averages, so the warmup portion is dropped here.
      if (t == warmup_ && t > 0)
        std::fill(delivered_by_comm_.begin(), delivered_by_comm_.end(), 0.0);
      const TracePoint pt = run_slot(t);
      if (t % stride == 0) {
        series_.push_back(pt);
        if (trace) trace->push_back(pt);
      }
      if (t >= warmup_) {
        cost_sum += pt.cost;
        occ_sum += pt.occupancy;
        delivered_sum += pt.delivered;
        bc += pt.cost;
        bo += pt.occupancy;
        if (++bn == batch_len) {
          cost_batches.push_back(bc / static_cast<double>(bn));
          occ_batches.push_back(bo / static_cast<double>(bn));
          bc = bo = 0.0;
          bn = 0;
        }
      }
    }

    RunMetrics r;
    r.slots = T;
    r.warmup = warmup_;
    const double W = static_cast<double>(window);
    r.avg_cost = cost_sum / W;
    r.avg_occupancy = occ_sum / W;
    r.delivered_rate = delivered_sum / W;
    r.cost_se = batch_se(cost_batches);
    r.occupancy_se = batch_se(occ_batches);
    r.delivered_rate_by_commodity.assign(delivered_by_comm_.begin(),
                                         delivered_by_comm_.end());
    for (double& v : r.delivered_rate_by_commodity) v /= W;
    r.processing_input_rate.assign(pr_input_.begin(), pr_input_.end());
    for (double& v : r.processing_input_rate) v /= W;
    r.arrival_mass_rate = arrival_mass_ / static_cast<double>(T);
    r.stability = stability_estimate(series_, r.arrival_mass_rate,
                                     m.control.stability_frac);
    r.gain_checksum = channel_.gain_checksum();
    r.ledger_residual = ledger_.residual(Q_);
    r.max_ledger_residual = max_residual_;
    return r;
  }

  const BacklogState& backlogs() const { return Q_; }
  BacklogState& backlogs() { return Q_; }
  const Controller& controller() const { return controller_; }
  const ChannelProcess& channel() const { return channel_; }
  const MassLedger& ledger() const { return ledger_; }
  const Model& model() const { return *model_; }

 private:
  std::size_t flat(int node, int comm) const {
    return static_cast<std::size_t>(node) * model_->commodities.size() +
           static_cast<std::size_t>(comm);
  }

  static double batch_se(const std::vector<double>& b) {
    if (b.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : b) mean += v;
    mean /= static_cast<double>(b.size());
    double ss = 0.0;
    for (double v : b) ss += (v - mean) * (v - mean);
    const double nb = static_cast<double>(b.size());
    return std::sqrt(ss / (nb * (nb - 1.0)));
  }

  const Model* model_;
  StreamFactory streams_;
  std::vector<std::vector<std::vector<double>>> rates_;
  ChannelProcess channel_;
  ArrivalProcess arrivals_;
  Controller controller_;
  BacklogState Q_;
  SlotFlows flows_;
  MassLedger ledger_;
  std::vector<double> delivered_by_comm_;
  std::vector<double> pr_input_;
  std::vector<ProcessingDecision> pr_decisions_;
  std::vector<TransmissionDecision> tx_decisions_;
  std::vector<std::pair<int, double>> receivers_;
  std::vector<TracePoint> series_;
  std::uint64_t warmup_ = 0;
  double arrival_mass_ = 0.0;
  double max_residual_ = 0.0;
};

inline void write_trace_csv(std::ostream& os,
                            const std::vector<TracePoint>& trace) {
  os << "t,cost,occupancy,delivered\n";
  char buf[160];
  for (const TracePoint& p : trace) {
    std::snprintf(buf, sizeof(buf), "%llu,%.10g,%.10g,%.10g\n",
                  static_cast<unsigned long long>(p.t), p.cost, p.occupancy,
                  p.delivered);
    os << buf;
  }
}

inline nlohmann::json metrics_to_json(const RunMetrics& r, const Model& m) {
  nlohmann::json j;
  j["avg_cost"] = r.avg_cost;
  j["avg_occupancy"] = r.avg_occupancy;
  j["cost_se"] = r.cost_se;
  j["occupancy_se"] = r.occupancy_se;
  j["delivered_rate"] = r.delivered_rate;
  j["arrival_mass_rate"] = r.arrival_mass_rate;
  j["slots"] = r.slots;
  j["warmup"] = r.warmup;
  j["stable"] = r.stability.stable;
  j["occupancy_slope"] = r.stability.slope;
  j["normalized_slope"] = r.stability.normalized_slope;
  j["gain_checksum"] = r.gain_checksum;
  j["ledger_residual"] = r.ledger_residual;
  j["max_ledger_residual"] = r.max_ledger_residual;
  nlohmann::json by_comm = nlohmann::json::array();
  for (std::size_t c = 0; c < m.commodities.size(); ++c) {
    if (r.delivered_rate_by_commodity[c] == 0.0) continue;
    const Commodity& com = m.commodities[c];
    by_comm.push_back({{"dst", m.nodes[static_cast<std::size_t>(com.dst)].id},
                       {"service", m.services[static_cast<std::size_t>(com.svc)].id},
                       {"stage", com.stage},
                       {"rate", r.delivered_rate_by_commodity[c]}});
  }
  j["delivered_by_commodity"] = std::move(by_comm);
  nlohmann::json pr = nlohmann::json::array();
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    for (std::size_t c = 0; c < m.commodities.size(); ++c) {
      const double rate = r.processing_input_rate[i * m.commodities.size() + c];
      if (rate == 0.0) continue;
      const Commodity& com = m.commodities[c];
      pr.push_back({{"node", m.nodes[i].id},
                    {"dst", m.nodes[static_cast<std::size_t>(com.dst)].id},
                    {"service", m.services[static_cast<std::size_t>(com.svc)].id},
                    {"stage", com.stage},
                    {"rate", rate}});
    }
  j["processing_by_commodity"] = std::move(pr);
  j["config"] = save_config(m);
  return j;
}

}  // namespace wcn
