#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wcn/channel.hpp"
#include "wcn/coding.hpp"
#include "wcn/model.hpp"
#include "wcn/queueing.hpp"

namespace wcn {

// Scheme-resolved per-link rate tables: broadcast keeps the layered table,
// outage collapses it to a single all-or-nothing rate at the profile's
// threshold layer.
inline std::vector<std::vector<std::vector<double>>> effective_rate_tables(
    const Model& m, Scheme scheme) {
  auto tables = m.link_rates;
  if (scheme == Scheme::outage) {
    for (std::size_t li = 0; li < tables.size(); ++li) {
      const int l_star = m.profiles[m.links[li].profile].outage_layer;
      for (std::size_t k = 0; k < tables[li].size(); ++k) {
        auto& row = tables[li][k];
        const double r_out =
            k == 0 ? 0.0 : row[static_cast<std::size_t>(l_star)];
        for (std::size_t s = 0; s < row.size(); ++s)
          row[s] = static_cast<int>(s) >= l_star ? r_out : 0.0;
      }
    }
  }
  return tables;
}

inline double processing_weight(double q_in, double q_out, double scaling,
                                double complexity) {
  const double diff = q_in - scaling * q_out;
  return diff > 0.0 ? diff / complexity : 0.0;
}

inline double differential_backlog(double q_i, double q_j) {
  const double d = q_i - q_j;
  return d > 0.0 ? d : 0.0;
}

// Probability that receiver j decodes a layer and every better-ranked
// receiver does not.  `better_survival` carries the decode probabilities of
// the receivers ranked strictly ahead of j by differential backlog.
inline double decode_probability(double own_survival,
                                 const std::vector<double>& better_survival,
                                 bool links_independent = true) {
  if (!links_independent)
    throw std::invalid_argument(
        "decode_probability requires independent links; use the "
        "exact joint-state enumeration path instead");
  double phi = own_survival;
  for (double p : better_survival) phi *= 1.0 - p;
  return phi;
}

struct ProcessingDecision {
  int k = 0;
  int comm = -1;      // commodity index, -1 = idle
  double mu = 0.0;    // assigned input rate R_{i,k}/r^(m+1)
  double metric = 0.0;
};

struct TransmissionDecision {
  int k = 0;
  int comm = -1;      // -1 = silent
  double weight = 0.0;  // W_{i,k,tr} of the chosen pair
  double metric = 0.0;
};

// Per-partition forwarding responsibility: entry n holds the receiving link
// index, or -1 when the transmitter retains that partition.
struct ForwardingAssignment {
  std::vector<int> assignee;
};

// Evaluates the per-node control rules.  One instance serves one simulation
// run; the scratch buffers make the per-slot calls allocation-free, so a
// single instance must not be shared across threads.
class Controller {
 public:
  Controller(const Model& m,
             const std::vector<std::vector<std::vector<double>>>& rates)
      : model_(&m), rates_(&rates) {
    const std::size_t N = m.nodes.size();
    grids_.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      const auto& out = m.out_links[i];
      const std::size_t K = m.nodes[i].tx_menu.size();
      grids_[i].resize(K);
      for (std::size_t k = 1; k < K; ++k) {
        RateGrid& grid = grids_[i][k];
        for (int li : out)
          for (double r : rates[static_cast<std::size_t>(li)][k])
            if (r > 0.0) grid.levels.push_back(r);
        std::sort(grid.levels.begin(), grid.levels.end());
        grid.levels.erase(
            std::unique(grid.levels.begin(), grid.levels.end()),
            grid.levels.end());
        grid.min_state.resize(out.size());
        for (std::size_t oi = 0; oi < out.size(); ++oi) {
          const auto& row = rates[static_cast<std::size_t>(out[oi])][k];
          grid.min_state[oi].resize(grid.levels.size());
          for (std::size_t g = 0; g < grid.levels.size(); ++g) {
            std::size_t s = 0;
            while (s < row.size() && row[s] < grid.levels[g]) ++s;
            // s == row.size() means this link can never reach the level.
            grid.min_state[oi][g] = static_cast<int>(s);
          }
        }
      }
    }
    // Commodity bookkeeping for the processing rule.
    for (const Commodity& c : m.commodities) {
      CommodityInfo info;
      info.final_stage = c.stage == m.stages(c.svc);
      if (!info.final_stage) {
        const FunctionSpec& f = m.function(c.svc, c.stage + 1);
        info.next_scaling = f.scaling;
        info.next_complexity = f.complexity;
      }
      info.dst = c.dst;
      comm_.push_back(info);
    }
  }

  // Processing rule: maximize R_{i,k} * W - V * w over menu levels and
  // processable commodities; ties prefer smaller k, then the earlier
  // commodity in (d, service, stage) order.
  ProcessingDecision processing_decision(int node, const BacklogState& Q,
                                         double V) const {
    const Node& n = model_->nodes[static_cast<std::size_t>(node)];
    ProcessingDecision best;
    const int C = static_cast<int>(comm_.size());
    for (int c = 0; c < C; ++c) {
      const CommodityInfo& info = comm_[c];
      if (info.final_stage) continue;
      const double w = processing_weight(Q.at(node, c), Q.at(node, c + 1),
                                         info.next_scaling,
                                         info.next_complexity);
      if (w <= 0.0) continue;
      for (int k = 1; k < static_cast<int>(n.pr_menu.size()); ++k) {
        const double metric =
            n.pr_menu[static_cast<std::size_t>(k)].rate * w -
            V * n.pr_menu[static_cast<std::size_t>(k)].cost;
        if (better(metric, k, c, best.metric, best.k, best.comm)) {
          best.metric = metric;
          best.k = k;
          best.comm = c;
        }
      }
    }
    if (best.k > 0)
      best.mu = model_->nodes[static_cast<std::size_t>(node)]
                    .pr_menu[static_cast<std::size_t>(best.k)]
                    .rate /
                comm_[best.comm].next_complexity;
    return best;
  }

  // Transmission utility weight of (node, k, commodity): the expected
  // backlog-weighted delivery under the decode-probability model, summed
  // over the distinct rate levels reachable by the node's receivers.
  double transmission_weight(int node, int k, int comm, const BacklogState& Q,
                             const ChannelProcess& ch) const {
    sort_receivers(node, comm, Q);
    return weight_from_sorted(node, k, ch);
  }

  TransmissionDecision transmission_decision(int node, const BacklogState& Q,
                                             double V,
                                             const ChannelProcess& ch) const {
    const Node& n = model_->nodes[static_cast<std::size_t>(node)];
    TransmissionDecision best;
    if (model_->out_links[static_cast<std::size_t>(node)].empty()) return best;
    const int C = static_cast<int>(comm_.size());
    for (int c = 0; c < C; ++c) {
      if (Q.at(node, c) <= 0.0) continue;
      sort_receivers(node, c, Q);
      if (sorted_.empty()) continue;
      for (int k = 1; k < static_cast<int>(n.tx_menu.size()); ++k) {
        const double w = weight_from_sorted(node, k, ch);
        const double metric =
            w - V * n.tx_menu[static_cast<std::size_t>(k)].cost;
        if (better(metric, k, c, best.metric, best.k, best.comm)) {
          best.metric = metric;
          best.k = k;
          best.comm = c;
          best.weight = w;
        }
      }
    }
    return best;
  }

  // Post-feedback assignment: partition n goes to the decoder with the
  // largest positive differential backlog, ties to the smaller node id,
  // otherwise the transmitter retains it.  `parts.order` carries link
  // indices; only partitions with positive width matter.
  ForwardingAssignment forwarding_assignment(const PartitionStructure& parts,
                                             int comm,
                                             const BacklogState& Q) const {
    ForwardingAssignment fa;
    const std::size_t n = parts.size();
    fa.assignee.assign(n, -1);
    // Suffix scan: partition n is decodable by receivers at positions >= n-1.
    int best_link = -1;
    double best_w = 0.0;
    int best_id = 0;
    for (std::size_t pos = n; pos-- > 0;) {
      const int li = parts.order[pos];
      const Link& link = model_->links[static_cast<std::size_t>(li)];
      const double w =
          differential_backlog(Q.at(link.tx, comm), Q.at(link.rx, comm));
      const int id = model_->nodes[static_cast<std::size_t>(link.rx)].id;
      if (w > 0.0 &&
          (best_link < 0 || w > best_w || (w == best_w && id < best_id))) {
        best_link = li;
        best_w = w;
        best_id = id;
      }
      fa.assignee[pos] = best_link;
    }
    return fa;
  }

  // Exact transmission utility weight by enumeration of the joint state
  // space of the node's receivers.  Test oracle; refuses blowups.
  double transmission_weight_exact(int node, int k, int comm,
                                   const BacklogState& Q,
                                   const ChannelProcess& ch,
                                   std::size_t max_states = 1 << 12) const {
    const auto& out = model_->out_links[static_cast<std::size_t>(node)];
    std::size_t total = 1;
    for (int li : out) {
      const auto& rows = ch.csi(static_cast<std::size_t>(li)).rows;
      total *= rows.empty() ? 1 : rows[0].size();
      if (total > max_states)
        throw std::invalid_argument(
            "transmission_weight_exact: joint state space too large");
    }
    std::vector<std::size_t> states(out.size(), 0);
    std::vector<std::pair<int, double>> rx;
    double expect = 0.0;
    for (;;) {
      double prob = 1.0;
      rx.clear();
      for (std::size_t oi = 0; oi < out.size(); ++oi) {
        const int li = out[oi];
        const int prev = ch.current().state[static_cast<std::size_t>(li)];
        prob *= ch.csi(static_cast<std::size_t>(li))
                    .rows[static_cast<std::size_t>(prev)][states[oi]];
        rx.emplace_back(li, (*rates_)[static_cast<std::size_t>(li)]
                                     [static_cast<std::size_t>(k)]
                                     [states[oi]]);
      }
      if (prob > 0.0) {
        PartitionStructure parts = build_partitions(rx);
        double metric = 0.0;
        double best_suffix = 0.0;
        for (std::size_t pos = parts.size(); pos-- > 0;) {
          const Link& link =
              model_->links[static_cast<std::size_t>(parts.order[pos])];
          best_suffix = std::max(
              best_suffix,
              differential_backlog(Q.at(link.tx, comm), Q.at(link.rx, comm)));
          metric += parts.width[pos] * best_suffix;
        }
        expect += prob * metric;
      }
      std::size_t oi = 0;
      for (; oi < out.size(); ++oi) {
        const auto& rows = ch.csi(static_cast<std::size_t>(out[oi])).rows;
        if (++states[oi] < rows[0].size()) break;
        states[oi] = 0;
      }
      if (oi == out.size()) break;
    }
    return expect;
  }

 private:
  struct RateGrid {
    std::vector<double> levels;              // distinct positive rate values
    std::vector<std::vector<int>> min_state; // [out index][level] lowest state
  };
  struct CommodityInfo {
    bool final_stage = false;
    double next_scaling = 1.0;
    double next_complexity = 1.0;
    int dst = -1;
  };
  struct SortedReceiver {
    double w;
    int id;
    std::size_t out_index;
  };

  static bool better(double metric, int k, int comm, double best_metric,
                     int best_k, int best_comm) {
    if (metric > best_metric) return true;
    if (metric < best_metric) return false;
    if (best_comm < 0) return false;  // never displace "idle" on a 0 metric
    if (k != best_k) return k < best_k;
    return comm < best_comm;
  }

  // Receivers with positive differential backlog, ranked W descending with
  // node-id ascending tie-break; the rank order defines the competitor sets.
  void sort_receivers(int node, int comm, const BacklogState& Q) const {
    sorted_.clear();
    const auto& out = model_->out_links[static_cast<std::size_t>(node)];
    for (std::size_t oi = 0; oi < out.size(); ++oi) {
      const Link& link = model_->links[static_cast<std::size_t>(out[oi])];
      const double w =
          differential_backlog(Q.at(link.tx, comm), Q.at(link.rx, comm));
      if (w > 0.0)
        sorted_.push_back(SortedReceiver{
            w, model_->nodes[static_cast<std::size_t>(link.rx)].id, oi});
    }
    std::sort(sorted_.begin(), sorted_.end(),
              [](const SortedReceiver& a, const SortedReceiver& b) {
                if (a.w != b.w) return a.w > b.w;
                return a.id < b.id;
              });
  }

  double weight_from_sorted(int node, int k, const ChannelProcess& ch) const {
    if (sorted_.empty()) return 0.0;
    const RateGrid& grid =
        grids_[static_cast<std::size_t>(node)][static_cast<std::size_t>(k)];
    const auto& out = model_->out_links[static_cast<std::size_t>(node)];
    double total = 0.0;
    double prev_level = 0.0;
    for (std::size_t g = 0; g < grid.levels.size(); ++g) {
      const double width = grid.levels[g] - prev_level;
      prev_level = grid.levels[g];
      double sum = 0.0;
      double prefix = 1.0;  // probability that all better-ranked miss
      for (const SortedReceiver& r : sorted_) {
        const int li = out[r.out_index];
        const LinkCSI& csi = ch.csi(static_cast<std::size_t>(li));
        const int prev = ch.current().state[static_cast<std::size_t>(li)];
        const int ms = grid.min_state[r.out_index][g];
        const double p =
            csi.survival[static_cast<std::size_t>(prev)]
                        [static_cast<std::size_t>(ms)];
        sum += r.w * p * prefix;
        prefix *= 1.0 - p;
      }
      total += width * sum;
    }
    return total;
  }

  const Model* model_;
  const std::vector<std::vector<std::vector<double>>>* rates_;
  std::vector<std::vector<RateGrid>> grids_;
  std::vector<CommodityInfo> comm_;
  mutable std::vector<SortedReceiver> sorted_;
};

}  // namespace wcn
