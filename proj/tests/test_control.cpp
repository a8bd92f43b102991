#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "wcn/channel.hpp"
#include "wcn/coding.hpp"
#include "wcn/config.hpp"
#include "wcn/control.hpp"
#include "wcn/model.hpp"
#include "wcn/queueing.hpp"
#include "wcn/rng.hpp"

using namespace wcn;

TEST_CASE("processing weight is the clamped per-operation gain", "[control]") {
  CHECK(processing_weight(100.0, 10.0, 4.0, 1.0) == Catch::Approx(60.0));
  CHECK(processing_weight(9.0, 2.0, 2.0, 5.0) == Catch::Approx(1.0));
  CHECK(processing_weight(10.0, 100.0, 4.0, 1.0) == 0.0);  // downstream full
  CHECK(processing_weight(0.0, 0.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("differential backlog clamps at zero", "[control]") {
  CHECK(differential_backlog(7.0, 4.0) == Catch::Approx(3.0));
  CHECK(differential_backlog(4.0, 7.0) == 0.0);
  CHECK(differential_backlog(5.0, 5.0) == 0.0);
}

TEST_CASE("decode probabilities factor over better-ranked receivers", "[control]") {
  CHECK(decode_probability(0.6, {}) == Catch::Approx(0.6));
  CHECK(decode_probability(0.5, {0.6}) == Catch::Approx(0.2));
  CHECK(decode_probability(0.9, {0.5, 0.4}) == Catch::Approx(0.9 * 0.5 * 0.6));
  CHECK(decode_probability(0.0, {0.3}) == 0.0);
}

TEST_CASE("ranked decode probabilities sum to the union probability", "[control]") {
  // "Some receiver decodes" has probability 1 - prod(1 - p_i); splitting by
  // which receiver is the best-ranked decoder must recover exactly that.
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> p(1 + trial % 5);
    for (double& v : p) v = u(rng);
    double sum = 0.0;
    double miss_all = 1.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      std::vector<double> better(p.begin(), p.begin() + static_cast<long>(j));
      sum += decode_probability(p[j], better);
      miss_all *= 1.0 - p[j];
    }
    CHECK(sum == Catch::Approx(1.0 - miss_all).margin(1e-12));
  }
}

namespace {

// Star with one transmitter feeding two receivers over independent two-state
// links; one two-stage commodity toward node 3. rate_b picks the top rate of
// the second link so tests can choose homogeneous or uneven grids.
Model star_model(double rate_b) {
  std::string text = R"({
    "nodes": [
      {"id": 1, "x": 0, "y": 0, "role": "src",
       "pr_menu": {"cost": [0, 2], "rate": [0, 20]},
       "tx_menu": {"cost": [0, 1]}},
      {"id": 2, "x": 1, "y": 0, "role": "relay",
       "pr_menu": {"cost": [0], "rate": [0]}, "tx_menu": {"cost": [0]}},
      {"id": 3, "x": 2, "y": 0, "role": "dst",
       "pr_menu": {"cost": [0], "rate": [0]}, "tx_menu": {"cost": [0]}}
    ],
    "profiles": [
      {"name": "pa", "fading": "discrete", "state_probs": [0.4, 0.6],
       "rate_table": [[0, 0], [0, 10]]},
      {"name": "pb", "fading": "discrete", "state_probs": [0.5, 0.5],
       "rate_table": [[0, 0], [0, )" +
                     std::to_string(rate_b) + R"(]]}
    ],
    "links": [
      {"tx": 1, "rx": 2, "profile": "pa"},
      {"tx": 1, "rx": 3, "profile": "pb"}
    ],
    "services": [
      {"id": 1,
       "functions": [{"scaling": 1.0, "complexity": 2.0}],
       "clients": [{"src": 1, "dst": 3}]}
    ],
    "control": {"V": 0, "scheme": "broadcast", "arrivals": "deterministic",
                "lambda": 1, "slots": 10, "seed": 21}})";
  return load_config_text(text);
}

struct ControllerRig {
  Model m;
  std::vector<std::vector<std::vector<double>>> rates;
  StreamFactory streams;
  ChannelProcess ch;
  Controller ctl;

  explicit ControllerRig(double rate_b)
      : m(star_model(rate_b)),
        rates(effective_rate_tables(m, Scheme::broadcast)),
        streams(m.control.seed),
        ch(m, streams),
        ctl(m, rates) {
    ch.step(0);
  }
};

}  // namespace

TEST_CASE("outage tables flatten to the design layer", "[control]") {
  Model m = load_config_text(R"({
    "nodes": [
      {"id": 1, "x": 0, "y": 0, "role": "src",
       "pr_menu": {"cost": [0], "rate": [0]}, "tx_menu": {"cost": [0, 1]}},
      {"id": 2, "x": 1, "y": 0, "role": "dst",
       "pr_menu": {"cost": [0], "rate": [0]}, "tx_menu": {"cost": [0]}}
    ],
    "profiles": [
      {"name": "p", "fading": "discrete",
       "state_probs": [0.1, 0.2, 0.3, 0.4],
       "rate_table": [[0, 0, 0, 0], [0, 12.1, 20.6, 48.3]],
       "outage_layer": 2}
    ],
    "links": [{"tx": 1, "rx": 2, "profile": "p"}],
    "services": [
      {"id": 1, "functions": [{"scaling": 1.0, "complexity": 1.0}],
       "clients": [{"src": 1, "dst": 2}]}
    ],
    "control": {"V": 0, "scheme": "outage", "arrivals": "deterministic",
                "lambda": 1, "slots": 10, "seed": 3}})");

  auto bc = effective_rate_tables(m, Scheme::broadcast);
  CHECK(bc == m.link_rates);

  auto out = effective_rate_tables(m, Scheme::outage);
  REQUIRE(out.size() == 1);
  CHECK(out[0][0] == std::vector<double>{0.0, 0.0, 0.0, 0.0});
  CHECK(out[0][1][0] == 0.0);
  CHECK(out[0][1][1] == 0.0);
  CHECK(out[0][1][2] == Catch::Approx(20.6));
  CHECK(out[0][1][3] == Catch::Approx(20.6));
}

TEST_CASE("processing decision picks the profitable level", "[control]") {
  ControllerRig rig(10.0);
  BacklogState Q(rig.m);
  Q.at(0, 0) = 5.0;  // stage-0 backlog at the source
  Q.at(0, 1) = 2.0;  // stage-1 backlog, scaled out at 1.0

  // w = (5 - 1*2)/2 = 1.5; level 1: 20 * 1.5 - V * 2.
  ProcessingDecision pd = rig.ctl.processing_decision(0, Q, 10.0);
  CHECK(pd.k == 1);
  CHECK(pd.comm == 0);
  CHECK(pd.metric == Catch::Approx(10.0));
  CHECK(pd.mu == Catch::Approx(10.0));  // 20 / complexity 2

  SECTION("a high enough price idles the processor") {
    ProcessingDecision idle = rig.ctl.processing_decision(0, Q, 1e6);
    CHECK(idle.k == 0);
    CHECK(idle.mu == 0.0);
  }
  SECTION("no weight means no work even for free") {
    BacklogState empty(rig.m);
    ProcessingDecision idle = rig.ctl.processing_decision(0, empty, 0.0);
    CHECK(idle.k == 0);
  }
  SECTION("final stages are never processed") {
    BacklogState fin(rig.m);
    fin.at(0, 1) = 50.0;  // only final-stage mass
    ProcessingDecision idle = rig.ctl.processing_decision(0, fin, 0.0);
    CHECK(idle.k == 0);
  }
}

TEST_CASE("transmission weight mixes ranked backlogs with decode odds", "[control]") {
  ControllerRig rig(10.0);
  BacklogState Q(rig.m);
  Q.at(0, 0) = 10.0;
  Q.at(1, 0) = 5.0;  // W = 5 behind a 0.6 link
  Q.at(2, 0) = 7.0;  // W = 3 behind a 0.5 link

  // Single 10-rate level: 10 * (5*0.6 + 3*0.5*0.4) = 36.
  CHECK(rig.ctl.transmission_weight(0, 1, 0, Q, rig.ch) ==
        Catch::Approx(36.0));

  TransmissionDecision td = rig.ctl.transmission_decision(0, Q, 10.0, rig.ch);
  CHECK(td.k == 1);
  CHECK(td.comm == 0);
  CHECK(td.weight == Catch::Approx(36.0));
  CHECK(td.metric == Catch::Approx(26.0));  // 36 - 10 * cost 1

  SECTION("a high enough price keeps the radio silent") {
    TransmissionDecision idle = rig.ctl.transmission_decision(0, Q, 1e6, rig.ch);
    CHECK(idle.k == 0);
  }
  SECTION("empty queues keep the radio silent") {
    BacklogState empty(rig.m);
    TransmissionDecision idle = rig.ctl.transmission_decision(0, empty, 0.0, rig.ch);
    CHECK(idle.k == 0);
  }
  SECTION("nodes without out-links never transmit") {
    TransmissionDecision idle = rig.ctl.transmission_decision(2, Q, 0.0, rig.ch);
    CHECK(idle.k == 0);
  }
  SECTION("weight grows with the transmitter backlog") {
    double w1 = rig.ctl.transmission_weight(0, 1, 0, Q, rig.ch);
    Q.at(0, 0) = 20.0;
    double w2 = rig.ctl.transmission_weight(0, 1, 0, Q, rig.ch);
    CHECK(w2 > w1);
  }
}

TEST_CASE("forwarding assigns each partition to its best decoder", "[control]") {
  ControllerRig rig(10.0);
  BacklogState Q(rig.m);
  Q.at(0, 0) = 10.0;

  SECTION("larger differential wins") {
    Q.at(1, 0) = 4.0;  // W = 6 on link 0
    Q.at(2, 0) = 1.0;  // W = 9 on link 1
    PartitionStructure parts = build_partitions({{0, 10.0}, {1, 10.0}});
    ForwardingAssignment fa = rig.ctl.forwarding_assignment(parts, 0, Q);
    REQUIRE(fa.assignee.size() == 2);
    CHECK(fa.assignee[0] == 1);  // both decode, link 1 is heavier
    CHECK(fa.assignee[1] == 1);
  }
  SECTION("ties go to the smaller receiver id") {
    Q.at(1, 0) = 4.0;
    Q.at(2, 0) = 4.0;
    PartitionStructure parts = build_partitions({{0, 10.0}, {1, 10.0}});
    ForwardingAssignment fa = rig.ctl.forwarding_assignment(parts, 0, Q);
    CHECK(fa.assignee[0] == 0);  // node 2 beats node 3 at equal W
    CHECK(fa.assignee[1] == 1);  // only link 1 decodes the top partition
  }
  SECTION("nothing positive means the transmitter retains") {
    Q.at(1, 0) = 20.0;
    Q.at(2, 0) = 20.0;
    PartitionStructure parts = build_partitions({{0, 10.0}, {1, 10.0}});
    ForwardingAssignment fa = rig.ctl.forwarding_assignment(parts, 0, Q);
    CHECK(fa.assignee[0] == -1);
    CHECK(fa.assignee[1] == -1);
  }
  SECTION("a decoder outside the top partition still takes lower ones") {
    Q.at(1, 0) = 1.0;  // W = 9 but only decodes partition 1
    Q.at(2, 0) = 9.0;  // W = 1, decodes everything
    PartitionStructure parts = build_partitions({{0, 6.0}, {1, 10.0}});
    ForwardingAssignment fa = rig.ctl.forwarding_assignment(parts, 0, Q);
    CHECK(fa.assignee[0] == 0);  // link 0 sits at position 0
    CHECK(fa.assignee[1] == 1);  // top partition reachable only by link 1
  }
}

TEST_CASE("decisions maximize their metric over all pairs", "[control]") {
  // Brute-force the (level, commodity) grid with the same tie rules and
  // require exact agreement with the controller on random backlogs.
  for (double rate_b : {10.0, 25.0}) {
    ControllerRig rig(rate_b);
    const Model& m = rig.m;
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    const int C = static_cast<int>(m.commodities.size());
    for (int trial = 0; trial < 200; ++trial) {
      BacklogState Q(m);
      for (double& v : Q.q) v = u(rng) < 6.0 ? 0.0 : u(rng);
      const double V = (trial % 4) * 7.0;

      const Node& n = m.nodes[0];
      ProcessingDecision pd = rig.ctl.processing_decision(0, Q, V);
      double best = 0.0;
      int bk = 0, bc = -1;
      for (int c = 0; c < C; ++c) {
        const Commodity& com = m.commodities[static_cast<std::size_t>(c)];
        if (com.stage >= m.stages(com.svc)) continue;
        const FunctionSpec& fn = m.function(com.svc, com.stage + 1);
        double w = processing_weight(Q.at(0, c), Q.at(0, c + 1), fn.scaling,
                                     fn.complexity);
        if (w <= 0.0) continue;
        for (int k = 1; k < static_cast<int>(n.pr_menu.size()); ++k) {
          double metric = n.pr_menu[static_cast<std::size_t>(k)].rate * w -
                          V * n.pr_menu[static_cast<std::size_t>(k)].cost;
          bool take = metric > best ||
                      (metric == best && bc >= 0 &&
                       (k < bk || (k == bk && c < bc)));
          if (take) {
            best = metric;
            bk = k;
            bc = c;
          }
        }
      }
      CHECK(pd.k == bk);
      if (bk > 0) {
        CHECK(pd.comm == bc);
        CHECK(pd.metric == Catch::Approx(best));
      }

      TransmissionDecision td = rig.ctl.transmission_decision(0, Q, V, rig.ch);
      best = 0.0;
      bk = 0;
      bc = -1;
      for (int c = 0; c < C; ++c) {
        if (Q.at(0, c) <= 0.0) continue;
        for (int k = 1; k < static_cast<int>(n.tx_menu.size()); ++k) {
          double w = rig.ctl.transmission_weight(0, k, c, Q, rig.ch);
          if (w == 0.0) continue;
          double metric = w - V * n.tx_menu[static_cast<std::size_t>(k)].cost;
          bool take = metric > best ||
                      (metric == best && bc >= 0 &&
                       (k < bk || (k == bk && c < bc)));
          if (take) {
            best = metric;
            bk = k;
            bc = c;
          }
        }
      }
      CHECK(td.k == bk);
      if (bk > 0) {
        CHECK(td.comm == bc);
        CHECK(td.metric == Catch::Approx(best));
      }
    }
  }
}

TEST_CASE("grid weight equals the exact joint-state expectation", "[control]") {
  // The per-level ranked sum is E[max of decodable backlogs] for independent
  // links, so the fast path must reproduce the exhaustive enumeration even
  // with uneven rate tables.
  for (double rate_b : {10.0, 20.0}) {
    ControllerRig rig(rate_b);
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    for (int trial = 0; trial < 100; ++trial) {
      BacklogState Q(rig.m);
      Q.at(0, 0) = u(rng);
      Q.at(1, 0) = u(rng);
      Q.at(2, 0) = u(rng);
      double fast = rig.ctl.transmission_weight(0, 1, 0, Q, rig.ch);
      double exact = rig.ctl.transmission_weight_exact(0, 1, 0, Q, rig.ch);
      CHECK(fast == Catch::Approx(exact).margin(1e-12));
    }
  }
}

TEST_CASE("exact weight matches a monte carlo of realized forwarding", "[control]") {
  ControllerRig rig(20.0);
  const Model& m = rig.m;
  BacklogState Q(m);
  Q.at(0, 0) = 12.0;
  Q.at(1, 0) = 5.0;
  Q.at(2, 0) = 3.0;
  const double exact = rig.ctl.transmission_weight_exact(0, 1, 0, Q, rig.ch);

  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> rx;
    for (int li : m.out_links[0]) {
      const ChannelProfile& p = m.profiles[m.links[static_cast<std::size_t>(li)].profile];
      int state = u(rng) < p.state_probs[1] ? 1 : 0;
      rx.emplace_back(li, m.link_rates[static_cast<std::size_t>(li)][1]
                                      [static_cast<std::size_t>(state)]);
    }
    PartitionStructure parts = build_partitions(rx);
    double metric = 0.0;
    double best = 0.0;
    for (std::size_t pos = parts.size(); pos-- > 0;) {
      const Link& link = m.links[static_cast<std::size_t>(parts.order[pos])];
      best = std::max(best,
                      differential_backlog(Q.at(link.tx, 0), Q.at(link.rx, 0)));
      metric += parts.width[pos] * best;
    }
    sum += metric;
    sumsq += metric * metric;
  }
  double mean = sum / n;
  double se = std::sqrt((sumsq / n - mean * mean) / n);
  CHECK(std::abs(mean - exact) <= 3.0 * se + 1e-9);
}

TEST_CASE("exact weight refuses oversized joint spaces", "[control]") {
  ControllerRig rig(10.0);
  BacklogState Q(rig.m);
  Q.at(0, 0) = 5.0;
  CHECK_THROWS_AS(rig.ctl.transmission_weight_exact(0, 1, 0, Q, rig.ch, 1),
                  std::invalid_argument);
}
