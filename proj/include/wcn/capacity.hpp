#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "wcn/channel.hpp"
#include "wcn/coding.hpp"
#include "wcn/control.hpp"
#include "wcn/model.hpp"
#include "wcn/simplex.hpp"

namespace wcn {

enum class CapacityMode { max_throughput, min_cost };

// Long-run per-state probabilities for one link: stationary distribution of
// the transition matrix when present, else the explicit pmf, else the one
// induced by the fading law and thresholds.
inline std::vector<double> link_state_pmf(const Model& m, int li) {
  const Link& l = m.links[static_cast<std::size_t>(li)];
  const ChannelProfile& p = m.profiles[static_cast<std::size_t>(l.profile)];
  if (!p.transition.empty()) {
    std::vector<double> v = p.state_probs;
    std::vector<double> next(v.size(), 0.0);
    for (int it = 0; it < 100000; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t a = 0; a < v.size(); ++a)
        for (std::size_t b = 0; b < v.size(); ++b)
          next[b] += v[a] * p.transition[a][b];
      double diff = 0.0;
      for (std::size_t a = 0; a < v.size(); ++a)
        diff += std::abs(next[a] - v[a]);
      v.swap(next);
      if (diff < 1e-14) break;
    }
    return v;
  }
  if (!p.state_probs.empty()) return p.state_probs;
  return state_distribution(p, l.mean_gain);
}

// The throughput/cost LP. Products of allocation probabilities are replaced
// by joint mass variables with nested simplex constraints; feasibility is
// preserved in both directions by time sharing.
struct CapacityLp {
  LpProblem lp;
  std::vector<std::string> var_names;
  std::vector<std::string> row_names;
  CapacityMode mode = CapacityMode::max_throughput;
  int eps_var = -1;
  double cost_offset = 0.0;       // always-paid idle cost, added to h
  std::vector<int> f_link;        // li*C+c -> var index or -1
  std::vector<int> f_ipr;         // i*C+c  -> var index or -1
  std::vector<int> f_pri;         // i*C+c  -> var index or -1
};

struct CapacityResult {
  LpStatus status = LpStatus::optimal;
  CapacityMode mode = CapacityMode::max_throughput;
  double value = 0.0;  // max uniform client rate, or min average cost
  LpSolution solution;
};

namespace detail {

inline std::string comm_tag(const Model& m, int c) {
  const Commodity& com = m.commodities[static_cast<std::size_t>(c)];
  return "d" + std::to_string(m.nodes[static_cast<std::size_t>(com.dst)].id) +
         ".s" +
         std::to_string(m.services[static_cast<std::size_t>(com.svc)].id) +
         ".m" + std::to_string(com.stage);
}

}  // namespace detail

inline CapacityLp build_capacity_lp(const Model& m, CapacityMode mode,
                                    double lambda) {
  const auto rates = effective_rate_tables(m, m.control.scheme);
  const int N = m.node_count();
  const int C = static_cast<int>(m.commodities.size());

  CapacityLp out;
  out.mode = mode;
  LpProblem& lp = out.lp;
  auto add_var = [&](std::string name, double cost) {
    out.var_names.push_back(std::move(name));
    return lp.add_variable(cost);
  };

  if (mode == CapacityMode::max_throughput)
    out.eps_var = add_var("eps", -1.0);

  // Exogenous load per (node, commodity), in client counts.
  std::vector<double> clients(static_cast<std::size_t>(N * C), 0.0);
  for (std::size_t s = 0; s < m.services.size(); ++s)
    for (const Client& cl : m.services[s].clients) {
      const int c = m.commodity_index(Commodity{cl.dst, static_cast<int>(s), 0});
      clients[static_cast<std::size_t>(cl.src * C + c)] += 1.0;
    }

  auto flat = [&](int i, int c) { return static_cast<std::size_t>(i * C + c); };

  // Flow variables. The final commodity may not leave its destination, the
  // final stage is never sent to processing, and stage 0 is never produced
  // by processing.
  out.f_link.assign(m.links.size() * static_cast<std::size_t>(C), -1);
  out.f_ipr.assign(static_cast<std::size_t>(N * C), -1);
  out.f_pri.assign(static_cast<std::size_t>(N * C), -1);
  for (std::size_t li = 0; li < m.links.size(); ++li)
    for (int c = 0; c < C; ++c) {
      const Commodity& com = m.commodities[static_cast<std::size_t>(c)];
      const bool final_at_src = com.stage == m.stages(com.svc) &&
                                m.links[li].tx == com.dst;
      if (final_at_src) continue;
      out.f_link[li * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)] =
          add_var("f.link" + std::to_string(li) + "." + detail::comm_tag(m, c),
                  0.0);
    }
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c) {
      const Commodity& com = m.commodities[static_cast<std::size_t>(c)];
      if (com.stage < m.stages(com.svc))
        out.f_ipr[flat(i, c)] = add_var(
            "f.pr.in.n" + std::to_string(m.nodes[static_cast<std::size_t>(i)].id) +
                "." + detail::comm_tag(m, c),
            0.0);
      if (com.stage > 0)
        out.f_pri[flat(i, c)] = add_var(
            "f.pr.out.n" + std::to_string(m.nodes[static_cast<std::size_t>(i)].id) +
                "." + detail::comm_tag(m, c),
            0.0);
    }

  auto add_row = [&](std::string name,
                     const std::vector<std::pair<int, double>>& terms,
                     RowSense s, double rhs) {
    out.row_names.push_back(std::move(name));
    lp.add_row(terms, s, rhs);
  };

  // Processing allocation masses and their nested simplexes; rate rows are
  // accumulated per commodity.
  std::vector<std::vector<std::pair<int, double>>> pr_rate_terms(
      static_cast<std::size_t>(N * C));
  for (int i = 0; i < N; ++i) {
    const Node& nd = m.nodes[static_cast<std::size_t>(i)];
    const int Kpr = static_cast<int>(nd.pr_menu.size()) - 1;
    if (Kpr < 1) continue;
    const double w0 = nd.pr_menu[0].cost;
    out.cost_offset += w0;
    std::vector<std::pair<int, double>> asum;
    for (int k = 1; k <= Kpr; ++k) {
      const double wk = nd.pr_menu[static_cast<std::size_t>(k)].cost - w0;
      const int a = add_var("a.pr.n" + std::to_string(nd.id) + ".k" +
                                std::to_string(k),
                            mode == CapacityMode::min_cost ? wk : 0.0);
      asum.emplace_back(a, 1.0);
      std::vector<std::pair<int, double>> bsum{{a, -1.0}};
      for (int c = 0; c < C; ++c) {
        const Commodity& com = m.commodities[static_cast<std::size_t>(c)];
        if (com.stage >= m.stages(com.svc)) continue;
        const int b = add_var("b.pr.n" + std::to_string(nd.id) + ".k" +
                                  std::to_string(k) + "." +
                                  detail::comm_tag(m, c),
                              0.0);
        bsum.emplace_back(b, 1.0);
        const double r = m.function(com.svc, com.stage + 1).complexity;
        pr_rate_terms[flat(i, c)].emplace_back(
            b, -nd.pr_menu[static_cast<std::size_t>(k)].rate / r);
      }
      add_row("bsum.pr.n" + std::to_string(nd.id) + ".k" + std::to_string(k),
              bsum, RowSense::le, 0.0);
    }
    add_row("asum.pr.n" + std::to_string(nd.id), asum, RowSense::le, 1.0);
  }

  // Transmission side: per transmitter, enumerate the joint state of its
  // outgoing links (independent links, product pmf).
  std::vector<std::vector<std::pair<int, double>>> tx_rate_terms(
      m.links.size() * static_cast<std::size_t>(C));
  std::vector<std::vector<double>> pmf(m.links.size());
  for (std::size_t li = 0; li < m.links.size(); ++li)
    pmf[li] = link_state_pmf(m, static_cast<int>(li));

  for (int i = 0; i < N; ++i) {
    const Node& nd = m.nodes[static_cast<std::size_t>(i)];
    const auto& out_links = m.out_links[static_cast<std::size_t>(i)];
    const int Ktr = static_cast<int>(nd.tx_menu.size()) - 1;
    if (Ktr < 1 || out_links.empty()) continue;
    const double w0 = nd.tx_menu[0].cost;
    out.cost_offset += w0;

    double joint = 1.0;
    for (int li : out_links)
      joint *= static_cast<double>(pmf[static_cast<std::size_t>(li)].size());
    if (joint > 1e5)
      throw EngineError("state space too large: " +
                        std::to_string(static_cast<std::uint64_t>(joint)) +
                        " joint states at node " + std::to_string(nd.id));
    const int S = static_cast<int>(joint);

    std::vector<std::vector<std::pair<int, double>>> asum(
        static_cast<std::size_t>(S));
    std::vector<int> state(out_links.size(), 0);
    for (int sidx = 0; sidx < S; ++sidx) {
      double pi = 1.0;
      for (std::size_t p = 0; p < out_links.size(); ++p)
        pi *= pmf[static_cast<std::size_t>(out_links[p])]
                 [static_cast<std::size_t>(state[p])];
      const std::string stag =
          "n" + std::to_string(nd.id) + ".s" + std::to_string(sidx);
      for (int k = 1; k <= Ktr && pi > 0.0; ++k) {
        const double wk = nd.tx_menu[static_cast<std::size_t>(k)].cost - w0;
        const int a = add_var("a.tr." + stag + ".k" + std::to_string(k),
                              mode == CapacityMode::min_cost ? wk * pi : 0.0);
        asum[static_cast<std::size_t>(sidx)].emplace_back(a, 1.0);

        std::vector<std::pair<int, double>> receivers;
        for (std::size_t p = 0; p < out_links.size(); ++p)
          receivers.emplace_back(
              out_links[p],
              rates[static_cast<std::size_t>(out_links[p])]
                   [static_cast<std::size_t>(k)]
                   [static_cast<std::size_t>(state[p])]);
        const PartitionStructure parts = build_partitions(receivers);

        std::vector<std::pair<int, double>> bsum{{a, -1.0}};
        for (int c = 0; c < C; ++c) {
          if (m.commodities[static_cast<std::size_t>(c)].dst == i &&
              m.commodities[static_cast<std::size_t>(c)].stage ==
                  m.stages(m.commodities[static_cast<std::size_t>(c)].svc))
            continue;  // final commodity never leaves its destination
          const int b = add_var("b.tr." + stag + ".k" + std::to_string(k) +
                                    "." + detail::comm_tag(m, c),
                                0.0);
          bsum.emplace_back(b, 1.0);
          for (std::size_t n = 0; n < parts.size(); ++n) {
            if (parts.width[n] <= 0.0) continue;
            std::vector<std::pair<int, double>> zsum{{b, -1.0}};
            for (std::size_t pos = n; pos < parts.size(); ++pos) {
              const int li = parts.order[pos];
              const std::size_t fl =
                  static_cast<std::size_t>(li) * static_cast<std::size_t>(C) +
                  static_cast<std::size_t>(c);
              if (out.f_link[fl] < 0) continue;
              const int z = add_var(
                  "z." + stag + ".k" + std::to_string(k) + ".p" +
                      std::to_string(n) + ".link" + std::to_string(li) + "." +
                      detail::comm_tag(m, c),
                  0.0);
              zsum.emplace_back(z, 1.0);
              tx_rate_terms[fl].emplace_back(z, -pi * parts.width[n]);
            }
            if (zsum.size() > 1)
              add_row("zsum." + stag + ".k" + std::to_string(k) + ".p" +
                          std::to_string(n) + ".c" + std::to_string(c),
                      zsum, RowSense::le, 0.0);
          }
        }
        if (bsum.size() > 1)
          add_row("bsum.tr." + stag + ".k" + std::to_string(k), bsum,
                  RowSense::le, 0.0);
      }
      // odometer over per-link states
      for (std::size_t p = 0; p < out_links.size(); ++p) {
        if (++state[p] <
            static_cast<int>(pmf[static_cast<std::size_t>(out_links[p])].size()))
          break;
        state[p] = 0;
      }
    }
    for (int sidx = 0; sidx < S; ++sidx)
      if (!asum[static_cast<std::size_t>(sidx)].empty())
        add_row("asum.tr.n" + std::to_string(nd.id) + ".s" +
                    std::to_string(sidx),
                asum[static_cast<std::size_t>(sidx)], RowSense::le, 1.0);
  }

  // Link rate rows: average decodable mass bounds the average flow.
  for (std::size_t li = 0; li < m.links.size(); ++li)
    for (int c = 0; c < C; ++c) {
      const std::size_t fl =
          li * static_cast<std::size_t>(C) + static_cast<std::size_t>(c);
      if (out.f_link[fl] < 0) continue;
      std::vector<std::pair<int, double>> terms = tx_rate_terms[fl];
      terms.emplace_back(out.f_link[fl], 1.0);
      add_row("rate.link" + std::to_string(li) + "." + detail::comm_tag(m, c),
              terms, RowSense::le, 0.0);
    }

  // Processing rate rows.
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c)
      if (out.f_ipr[flat(i, c)] >= 0) {
        std::vector<std::pair<int, double>> terms = pr_rate_terms[flat(i, c)];
        terms.emplace_back(out.f_ipr[flat(i, c)], 1.0);
        add_row("rate.pr.n" +
                    std::to_string(m.nodes[static_cast<std::size_t>(i)].id) +
                    "." + detail::comm_tag(m, c),
                terms, RowSense::le, 0.0);
      }

  // Chaining: processing output of stage m+1 equals scaled input of stage m.
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c) {
      const Commodity& com = m.commodities[static_cast<std::size_t>(c)];
      if (com.stage >= m.stages(com.svc)) continue;
      const double xi = m.function(com.svc, com.stage + 1).scaling;
      add_row("chain.n" +
                  std::to_string(m.nodes[static_cast<std::size_t>(i)].id) +
                  "." + detail::comm_tag(m, c),
              {{out.f_pri[flat(i, c + 1)], 1.0},
               {out.f_ipr[flat(i, c)], -xi}},
              RowSense::eq, 0.0);
    }

  // Flow conservation: inflow + exogenous load <= outflow, for every node
  // and commodity, except the final commodity at its own destination.
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c) {
      const Commodity& com = m.commodities[static_cast<std::size_t>(c)];
      const bool final_stage = com.stage == m.stages(com.svc);
      if (final_stage && com.dst == i) continue;
      std::vector<std::pair<int, double>> terms;
      for (int li : m.in_links[static_cast<std::size_t>(i)]) {
        const int v = out.f_link[static_cast<std::size_t>(li) *
                                     static_cast<std::size_t>(C) +
                                 static_cast<std::size_t>(c)];
        if (v >= 0) terms.emplace_back(v, 1.0);
      }
      for (int li : m.out_links[static_cast<std::size_t>(i)]) {
        const int v = out.f_link[static_cast<std::size_t>(li) *
                                     static_cast<std::size_t>(C) +
                                 static_cast<std::size_t>(c)];
        if (v >= 0) terms.emplace_back(v, -1.0);
      }
      if (out.f_pri[flat(i, c)] >= 0)
        terms.emplace_back(out.f_pri[flat(i, c)], 1.0);
      if (out.f_ipr[flat(i, c)] >= 0)
        terms.emplace_back(out.f_ipr[flat(i, c)], -1.0);
      double rhs = 0.0;
      const double cl = clients[flat(i, c)];
      if (cl > 0.0) {
        if (mode == CapacityMode::max_throughput)
          terms.emplace_back(out.eps_var, cl);
        else
          rhs = -lambda * cl;
      }
      add_row("cons.n" +
                  std::to_string(m.nodes[static_cast<std::size_t>(i)].id) +
                  "." + detail::comm_tag(m, c),
              terms, RowSense::le, rhs);
    }

  return out;
}

inline CapacityResult solve_capacity(const Model& m, CapacityMode mode,
                                     double lambda = 0.0) {
  const CapacityLp built = build_capacity_lp(m, mode, lambda);
  CapacityResult r;
  r.mode = mode;
  r.solution = solve_lp(built.lp);
  r.status = r.solution.status;
  if (r.status == LpStatus::unbounded)
    throw EngineError("capacity LP unbounded: modeling bug");
  if (r.status != LpStatus::optimal) return r;
  if (mode == CapacityMode::max_throughput)
    r.value = built.eps_var >= 0
                  ? r.solution.x[static_cast<std::size_t>(built.eps_var)]
                  : 0.0;
  else
    r.value = r.solution.objective + built.cost_offset;
  return r;
}

// Plain-text export: one variable per "var" line, one constraint per "row"
// line as name, sense, rhs, then idx:coef pairs over nonzeros.
inline void write_lp_text(std::ostream& os, const CapacityLp& built) {
  const LpProblem& lp = built.lp;
  os << "# minimize c.x subject to rows, x >= 0\n";
  os << "vars " << lp.n << "\n";
  for (int v = 0; v < lp.n; ++v)
    os << "var " << v << " " << built.var_names[static_cast<std::size_t>(v)]
       << " obj " << lp.c[static_cast<std::size_t>(v)] << "\n";
  os << "rows " << lp.rows.size() << "\n";
  for (std::size_t r = 0; r < lp.rows.size(); ++r) {
    os << "row " << built.row_names[r] << " "
       << (lp.sense[r] == RowSense::le ? "<="
           : lp.sense[r] == RowSense::eq ? "=" : ">=")
       << " " << lp.b[r] << " :";
    std::map<int, double> coeffs;
    for (const auto& [var, coef] : lp.rows[r]) coeffs[var] += coef;
    for (const auto& [var, coef] : coeffs)
      if (coef != 0.0) os << " " << var << ":" << coef;
    os << "\n";
  }
  if (built.cost_offset != 0.0)
    os << "offset " << built.cost_offset << "\n";
}

}  // namespace wcn
