#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace wcn {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FadingKind { rayleigh, rician, discrete };
enum class Scheme { broadcast, outage };
enum class ArrivalKind { poisson, deterministic };
enum class ChannelMemory { iid, markov };

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline const char* scheme_name(Scheme s) {
  return s == Scheme::broadcast ? "broadcast" : "outage";
}

// Processing resource level: spending cost buys rate operations per slot.
struct PrLevel {
  double cost = 0.0;
  double rate = 0.0;

  friend bool operator==(const PrLevel&, const PrLevel&) = default;
};

// Transmission resource level: cost plus optional per-layer transmit powers
// (used only when the layer-rate table is computed rather than given).
struct TxLevel {
  double cost = 0.0;
  std::vector<double> layer_power;

  friend bool operator==(const TxLevel&, const TxLevel&) = default;
};

// A channel class shared by links: fading law, discretization thresholds and
// the per-resource-level layer-rate table.  Either the table is given
// directly in config, or it is computed from the transmitter's layer powers
// against these thresholds.
struct ChannelProfile {
  std::string name;
  FadingKind fading = FadingKind::rayleigh;
  double rice_k = 0.0;           // linear; converted from dB at load
  double pathloss_exponent = 3.0;
  double reference_gain = 1.0;   // linear gain at unit distance
  std::vector<double> thresholds;              // ḡ_1..ḡ_L ascending, positive
  std::vector<std::vector<double>> rate_table; // [k][l], l = 0..L; empty if computed
  int outage_layer = 0;          // threshold layer index l* for the outage scheme
  // Discrete channels bypass the fading law entirely.
  std::vector<double> state_probs;              // size L+1, or empty
  std::vector<std::vector<double>> transition;  // (L+1)x(L+1) Markov rows, or empty

  friend bool operator==(const ChannelProfile&, const ChannelProfile&) = default;
};

struct Link {
  int tx = -1;  // node index
  int rx = -1;  // node index
  int profile = -1;
  double mean_gain = 0.0;

  friend bool operator==(const Link&, const Link&) = default;
};

struct Node {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  std::string role;  // informational: "ap" | "ue" | ...
  std::vector<TxLevel> tx_menu;  // index k, k=0 free and silent
  std::vector<PrLevel> pr_menu;  // index k, k=0 free and idle

  friend bool operator==(const Node&, const Node&) = default;
};

struct FunctionSpec {
  double scaling = 1.0;     // ξ: output units per input unit
  double complexity = 1.0;  // r: operations per input unit

  friend bool operator==(const FunctionSpec&, const FunctionSpec&) = default;
};

struct Client {
  int src = -1;  // node index
  int dst = -1;  // node index

  friend bool operator==(const Client&, const Client&) = default;
};

struct Service {
  int id = 0;
  std::vector<FunctionSpec> functions;
  std::vector<Client> clients;

  friend bool operator==(const Service&, const Service&) = default;
};

// Commodity (d, φ, m): output of stage m of service φ bound for destination d.
// Stage 0 is exogenous input, stage M the final product.
struct Commodity {
  int dst = -1;  // node index
  int svc = -1;  // service index
  int stage = 0;

  friend auto operator<=>(const Commodity&, const Commodity&) = default;
};

struct ControlConfig {
  double V = 0.0;
  Scheme scheme = Scheme::broadcast;
  ArrivalKind arrivals = ArrivalKind::poisson;
  ChannelMemory memory = ChannelMemory::iid;
  double lambda = 0.0;        // mean arrival per client per slot
  std::uint64_t slots = 1;
  double warmup_frac = 0.1;
  std::uint64_t seed = 1;
  double log_base = 0.0;      // 0 = natural log in rate computations
  std::uint64_t trace_stride = 0;  // 0 = auto
  double stability_frac = 0.05;

  friend bool operator==(const ControlConfig&, const ControlConfig&) = default;
};

// Immutable after load_config; shared freely across threads.
struct Model {
  std::vector<Node> nodes;
  std::vector<ChannelProfile> profiles;
  std::vector<Link> links;
  std::vector<Service> services;
  ControlConfig control;

  // Derived at load.
  std::vector<Commodity> commodities;           // sorted (d, φ, m)
  std::map<int, int> node_index;                // external id -> index
  std::vector<std::vector<int>> out_links;      // node index -> link indices
  std::vector<std::vector<int>> in_links;       // node index -> link indices
  // Resolved layer-rate tables, one per link: rates[k][l].
  std::vector<std::vector<std::vector<double>>> link_rates;

  friend bool operator==(const Model&, const Model&) = default;

  int node_count() const { return static_cast<int>(nodes.size()); }

  int commodity_index(const Commodity& c) const {
    auto it = std::lower_bound(commodities.begin(), commodities.end(), c);
    if (it == commodities.end() || !(*it == c))
      throw EngineError("unknown commodity");
    return static_cast<int>(it - commodities.begin());
  }

  int require_node(int external_id) const {
    auto it = node_index.find(external_id);
    if (it == node_index.end())
      throw ConfigError("unknown node id " + std::to_string(external_id));
    return it->second;
  }

  const FunctionSpec& function(int svc, int stage_out) const {
    // stage_out in 1..M: the function producing that stage.
    return services[svc].functions[static_cast<std::size_t>(stage_out) - 1];
  }

  int stages(int svc) const {
    return static_cast<int>(services[svc].functions.size());
  }

  // Scaling from stage-m units to final-stage-equivalent units: the product
  // of the scaling factors of all later functions.  Used by the mass ledger.
  double final_equivalent(int svc, int stage) const {
    double w = 1.0;
    for (int m = stage + 1; m <= stages(svc); ++m)
      w *= services[svc].functions[static_cast<std::size_t>(m) - 1].scaling;
    return w;
  }
};

inline void enumerate_commodities(Model& model) {
  model.commodities.clear();
  for (int s = 0; s < static_cast<int>(model.services.size()); ++s) {
    const Service& svc = model.services[s];
    std::vector<int> dests;
    for (const Client& c : svc.clients) dests.push_back(c.dst);
    std::sort(dests.begin(), dests.end());
    dests.erase(std::unique(dests.begin(), dests.end()), dests.end());
    const int M = static_cast<int>(svc.functions.size());
    for (int d : dests)
      for (int m = 0; m <= M; ++m)
        model.commodities.push_back(Commodity{d, s, m});
  }
  std::sort(model.commodities.begin(), model.commodities.end());
}

}  // namespace wcn
