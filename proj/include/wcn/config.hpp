#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "wcn/coding.hpp"
#include "wcn/model.hpp"

namespace wcn {

namespace detail {

using nlohmann::json;

inline const json& member(const json& obj, const char* key,
                          const std::string& path) {
  if (!obj.is_object())
    throw ConfigError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigError(path + "." + key + ": missing required field");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  return v.get<double>();
}

inline double number_or(const json& obj, const char* key, double fallback,
                        const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return number(obj.at(key), path + "." + key);
}

inline std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path + ": expected a string");
  return v.get<std::string>();
}

inline std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::vector<double>> matrix(const json& v,
                                               const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of arrays");
  std::vector<std::vector<double>> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number_list(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline void check_nondecreasing(const std::vector<double>& v,
                                const std::string& path) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1])
      throw ConfigError(path + ": values must be nondecreasing");
}

}  // namespace detail

inline int profile_state_count(const ChannelProfile& p) {
  if (!p.thresholds.empty()) return static_cast<int>(p.thresholds.size()) + 1;
  if (!p.state_probs.empty()) return static_cast<int>(p.state_probs.size());
  if (!p.rate_table.empty()) return static_cast<int>(p.rate_table[0].size());
  return 0;
}

inline Model load_config(const nlohmann::json& doc);

inline Model load_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return load_config(doc);
}

inline Model load_config(const nlohmann::json& doc) {
  using detail::member;
  using detail::number;
  using detail::number_or;
  using detail::text;
  using nlohmann::json;

  Model m;

  // --- nodes ---
  const json& jnodes = member(doc, "nodes", "config");
  if (!jnodes.is_array() || jnodes.empty())
    throw ConfigError("config.nodes: expected a nonempty array");
  for (std::size_t ni = 0; ni < jnodes.size(); ++ni) {
    const std::string path = "nodes[" + std::to_string(ni) + "]";
    const json& jn = jnodes[ni];
    Node n;
    n.id = static_cast<int>(number(member(jn, "id", path), path + ".id"));
    n.x = number_or(jn, "x", 0.0, path);
    n.y = number_or(jn, "y", 0.0, path);
    if (jn.contains("role")) n.role = text(jn.at("role"), path + ".role");

    const json& jpr = member(jn, "pr_menu", path);
    auto pr_cost = detail::number_list(member(jpr, "cost", path + ".pr_menu"),
                                       path + ".pr_menu.cost");
    auto pr_rate = detail::number_list(member(jpr, "rate", path + ".pr_menu"),
                                       path + ".pr_menu.rate");
    if (pr_cost.size() != pr_rate.size() || pr_cost.empty())
      throw ConfigError(path + ".pr_menu: cost and rate need equal nonzero length");
    if (pr_cost[0] != 0.0 || pr_rate[0] != 0.0)
      throw ConfigError(path + ".pr_menu: level k=0 must have zero cost and rate");
    detail::check_nondecreasing(pr_cost, path + ".pr_menu.cost");
    detail::check_nondecreasing(pr_rate, path + ".pr_menu.rate");
    for (std::size_t k = 0; k < pr_cost.size(); ++k)
      n.pr_menu.push_back(PrLevel{pr_cost[k], pr_rate[k]});

    const json& jtx = member(jn, "tx_menu", path);
    auto tx_cost = detail::number_list(member(jtx, "cost", path + ".tx_menu"),
                                       path + ".tx_menu.cost");
    if (tx_cost.empty() || tx_cost[0] != 0.0)
      throw ConfigError(path + ".tx_menu: level k=0 must exist with zero cost");
    detail::check_nondecreasing(tx_cost, path + ".tx_menu.cost");
    std::vector<std::vector<double>> powers;
    if (jtx.contains("layer_power"))
      powers = detail::matrix(jtx.at("layer_power"), path + ".tx_menu.layer_power");
    if (!powers.empty() && powers.size() != tx_cost.size())
      throw ConfigError(path + ".tx_menu: layer_power rows must match cost length");
    for (std::size_t k = 0; k < tx_cost.size(); ++k) {
      TxLevel lvl;
      lvl.cost = tx_cost[k];
      if (!powers.empty()) lvl.layer_power = powers[k];
      n.tx_menu.push_back(std::move(lvl));
    }
    if (!powers.empty())
      for (double p : powers[0])
        if (p != 0.0)
          throw ConfigError(path + ".tx_menu.layer_power[0]: k=0 must be silent");

    if (m.node_index.count(n.id))
      throw ConfigError(path + ".id: duplicate node id " + std::to_string(n.id));
    m.node_index[n.id] = static_cast<int>(m.nodes.size());
    m.nodes.push_back(std::move(n));
  }

  // --- channel profiles ---
  std::map<std::string, int> profile_index;
  if (doc.contains("profiles")) {
    const json& jps = doc.at("profiles");
    if (!jps.is_array()) throw ConfigError("config.profiles: expected an array");
    for (std::size_t pi = 0; pi < jps.size(); ++pi) {
      const std::string path = "profiles[" + std::to_string(pi) + "]";
      const json& jp = jps[pi];
      ChannelProfile p;
      p.name = text(member(jp, "name", path), path + ".name");
      const std::string fading =
          jp.contains("fading") ? text(jp.at("fading"), path + ".fading")
                                : "rayleigh";
      if (fading == "rayleigh") p.fading = FadingKind::rayleigh;
      else if (fading == "rician") p.fading = FadingKind::rician;
      else if (fading == "discrete") p.fading = FadingKind::discrete;
      else throw ConfigError(path + ".fading: unknown kind '" + fading + "'");

      if (jp.contains("rice_factor"))
        p.rice_k = number(jp.at("rice_factor"), path + ".rice_factor");
      else if (jp.contains("rice_factor_db"))
        p.rice_k = db_to_linear(
            number(jp.at("rice_factor_db"), path + ".rice_factor_db"));
      if (p.fading == FadingKind::rician && p.rice_k < 0.0)
        throw ConfigError(path + ": negative Rice factor");

      p.pathloss_exponent = number_or(jp, "pathloss_exponent", 3.0, path);
      if (jp.contains("reference_gain_db"))
        p.reference_gain = db_to_linear(
            number(jp.at("reference_gain_db"), path + ".reference_gain_db"));
      else
        p.reference_gain = number_or(jp, "reference_gain", 1.0, path);

      if (jp.contains("thresholds"))
        p.thresholds = detail::number_list(jp.at("thresholds"), path + ".thresholds");
      else if (jp.contains("thresholds_db"))
        for (double t : detail::number_list(jp.at("thresholds_db"), path + ".thresholds_db"))
          p.thresholds.push_back(db_to_linear(t));
      for (std::size_t l = 0; l < p.thresholds.size(); ++l)
        if (p.thresholds[l] <= 0.0 ||
            (l > 0 && p.thresholds[l] <= p.thresholds[l - 1]))
          throw ConfigError(path + ".thresholds: must be positive and strictly increasing");

      if (jp.contains("rate_table"))
        p.rate_table = detail::matrix(jp.at("rate_table"), path + ".rate_table");
      if (jp.contains("state_probs"))
        p.state_probs = detail::number_list(jp.at("state_probs"), path + ".state_probs");
      if (jp.contains("transition"))
        p.transition = detail::matrix(jp.at("transition"), path + ".transition");

      if (p.fading == FadingKind::discrete && p.state_probs.empty())
        throw ConfigError(path + ": discrete profile requires state_probs");
      if (!p.transition.empty() && p.state_probs.empty())
        throw ConfigError(path + ": transition requires state_probs as the initial law");

      const int L1 = profile_state_count(p);
      if (L1 < 1) throw ConfigError(path + ": cannot infer the state count");
      if (!p.state_probs.empty()) {
        double sum = 0.0;
        for (double v : p.state_probs) {
          if (v < 0.0) throw ConfigError(path + ".state_probs: negative entry");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw ConfigError(path + ".state_probs: must sum to 1");
        if (static_cast<int>(p.state_probs.size()) != L1)
          throw ConfigError(path + ".state_probs: length inconsistent with state count");
      }
      if (!p.transition.empty()) {
        if (static_cast<int>(p.transition.size()) != L1)
          throw ConfigError(path + ".transition: row count inconsistent with state count");
        for (const auto& row : p.transition) {
          if (static_cast<int>(row.size()) != L1)
            throw ConfigError(path + ".transition: rows must be square");
          double sum = 0.0;
          for (double v : row) {
            if (v < 0.0) throw ConfigError(path + ".transition: negative entry");
            sum += v;
          }
          if (std::abs(sum - 1.0) > 1e-12)
            throw ConfigError(path + ".transition: rows must sum to 1");
        }
      }
      if (!p.rate_table.empty()) {
        for (const auto& row : p.rate_table)
          if (static_cast<int>(row.size()) != L1)
            throw ConfigError(path + ".rate_table: rows must have one rate per state");
        for (std::size_t k = 0; k < p.rate_table.size(); ++k) {
          const auto& row = p.rate_table[k];
          if (row[0] != 0.0)
            throw ConfigError(path + ".rate_table: state-0 rate must be 0");
          detail::check_nondecreasing(row, path + ".rate_table");
          for (std::size_t l = 0; l < row.size(); ++l) {
            if (row[l] < 0.0)
              throw ConfigError(path + ".rate_table: negative rate");
            if (k > 0 && row[l] < p.rate_table[k - 1][l])
              throw ConfigError(path + ".rate_table: rates must be nondecreasing in k");
          }
        }
        for (double r : p.rate_table[0])
          if (r != 0.0)
            throw ConfigError(path + ".rate_table: k=0 row must be all zeros");
      }

      if (p.fading != FadingKind::discrete && p.thresholds.empty())
        throw ConfigError(path + ": fading profile requires thresholds");
      // Synthetic interval bounds for discrete profiles keep gain labels
      // roughly equal to the state index.
      if (p.fading == FadingKind::discrete && p.thresholds.empty())
        for (int l = 1; l < L1; ++l)
          p.thresholds.push_back(static_cast<double>(l) - 0.5);

      if (jp.contains("outage_layer"))
        p.outage_layer = static_cast<int>(
            number(jp.at("outage_layer"), path + ".outage_layer"));
      else
        p.outage_layer = std::min(2, L1 - 1);
      if (p.outage_layer < 1 || p.outage_layer > L1 - 1)
        throw ConfigError(path + ".outage_layer: must lie in 1..L");

      if (profile_index.count(p.name))
        throw ConfigError(path + ".name: duplicate profile '" + p.name + "'");
      profile_index[p.name] = static_cast<int>(m.profiles.size());
      m.profiles.push_back(std::move(p));
    }
  }

  // --- links ---
  auto push_link = [&](int tx_id, int rx_id, int profile, double mean_gain,
                       const std::string& path) {
    if (tx_id == rx_id)
      throw ConfigError(path + ": self link at node " + std::to_string(tx_id));
    Link l;
    l.tx = m.require_node(tx_id);
    l.rx = m.require_node(rx_id);
    l.profile = profile;
    if (mean_gain > 0.0) {
      l.mean_gain = mean_gain;
    } else {
      const Node& a = m.nodes[l.tx];
      const Node& b = m.nodes[l.rx];
      const double d = std::hypot(a.x - b.x, a.y - b.y);
      const ChannelProfile& p = m.profiles[profile];
      if (p.fading == FadingKind::discrete) {
        l.mean_gain = 1.0;
      } else {
        if (d <= 0.0)
          throw ConfigError(path + ": coincident nodes need an explicit mean_gain");
        l.mean_gain = p.reference_gain * std::pow(d, -p.pathloss_exponent);
      }
    }
    if (l.mean_gain <= 0.0)
      throw ConfigError(path + ": mean gain must be positive");
    m.links.push_back(l);
  };

  auto profile_ref = [&](const json& j, const std::string& path) {
    const std::string name = text(j, path);
    auto it = profile_index.find(name);
    if (it == profile_index.end())
      throw ConfigError(path + ": unknown profile '" + name + "'");
    return it->second;
  };

  if (doc.contains("links")) {
    const json& jls = doc.at("links");
    if (!jls.is_array()) throw ConfigError("config.links: expected an array");
    for (std::size_t li = 0; li < jls.size(); ++li) {
      const std::string path = "links[" + std::to_string(li) + "]";
      const json& jl = jls[li];
      const int tx = static_cast<int>(number(member(jl, "tx", path), path + ".tx"));
      const int rx = static_cast<int>(number(member(jl, "rx", path), path + ".rx"));
      const int prof = profile_ref(member(jl, "profile", path), path + ".profile");
      const double mg = number_or(jl, "mean_gain", 0.0, path);
      push_link(tx, rx, prof, mg, path);
      if (jl.contains("bidir") && jl.at("bidir").is_boolean() &&
          jl.at("bidir").get<bool>())
        push_link(rx, tx, prof, mg, path);
    }
  } else {
    // No adjacency list: every ordered pair is an active link.
    const json& jd = member(doc, "link_defaults", "config");
    const int prof = profile_ref(member(jd, "profile", "link_defaults"),
                                 "link_defaults.profile");
    for (int a = 0; a < m.node_count(); ++a)
      for (int b = 0; b < m.node_count(); ++b)
        if (a != b)
          push_link(m.nodes[a].id, m.nodes[b].id, prof, 0.0, "link_defaults");
  }

  // --- services ---
  const json& jss = member(doc, "services", "config");
  if (!jss.is_array() || jss.empty())
    throw ConfigError("config.services: no services");
  for (std::size_t si = 0; si < jss.size(); ++si) {
    const std::string path = "services[" + std::to_string(si) + "]";
    const json& js = jss[si];
    Service s;
    s.id = static_cast<int>(number_or(js, "id", static_cast<double>(si + 1), path));
    const json& jf = member(js, "functions", path);
    if (!jf.is_array() || jf.empty())
      throw ConfigError(path + ".functions: must be a nonempty array");
    for (std::size_t fi = 0; fi < jf.size(); ++fi) {
      const std::string fpath = path + ".functions[" + std::to_string(fi) + "]";
      FunctionSpec f;
      f.scaling = number(member(jf[fi], "scaling", fpath), fpath + ".scaling");
      f.complexity =
          number(member(jf[fi], "complexity", fpath), fpath + ".complexity");
      if (f.scaling <= 0.0 || f.complexity <= 0.0)
        throw ConfigError(fpath + ": scaling and complexity must be positive");
      s.functions.push_back(f);
    }
    const json& jc = member(js, "clients", path);
    if (jc.is_object() && jc.contains("all_ordered_pairs_role")) {
      const std::string role =
          text(jc.at("all_ordered_pairs_role"), path + ".clients");
      for (int a = 0; a < m.node_count(); ++a)
        for (int b = 0; b < m.node_count(); ++b)
          if (a != b && m.nodes[a].role == role && m.nodes[b].role == role)
            s.clients.push_back(Client{a, b});
    } else if (jc.is_array()) {
      for (std::size_t ci = 0; ci < jc.size(); ++ci) {
        const std::string cpath = path + ".clients[" + std::to_string(ci) + "]";
        const int src = static_cast<int>(
            number(member(jc[ci], "src", cpath), cpath + ".src"));
        const int dst = static_cast<int>(
            number(member(jc[ci], "dst", cpath), cpath + ".dst"));
        if (src == dst)
          throw ConfigError(cpath + ": client source equals destination");
        s.clients.push_back(Client{m.require_node(src), m.require_node(dst)});
      }
    } else {
      throw ConfigError(path + ".clients: expected an array or a role selector");
    }
    m.services.push_back(std::move(s));
  }

  // --- control ---
  const json& jctl = member(doc, "control", "config");
  ControlConfig c;
  c.V = number_or(jctl, "V", 0.0, "control");
  if (c.V < 0.0) throw ConfigError("control.V: must be nonnegative");
  if (jctl.contains("scheme")) {
    const std::string s = text(jctl.at("scheme"), "control.scheme");
    if (s == "broadcast") c.scheme = Scheme::broadcast;
    else if (s == "outage") c.scheme = Scheme::outage;
    else throw ConfigError("control.scheme: unknown scheme '" + s + "'");
  }
  if (jctl.contains("arrivals")) {
    const std::string a = text(jctl.at("arrivals"), "control.arrivals");
    if (a == "poisson") c.arrivals = ArrivalKind::poisson;
    else if (a == "deterministic") c.arrivals = ArrivalKind::deterministic;
    else throw ConfigError("control.arrivals: unknown model '" + a + "'");
  }
  c.lambda = number_or(jctl, "lambda", 0.0, "control");
  if (c.lambda < 0.0) throw ConfigError("control.lambda: must be nonnegative");
  c.slots = static_cast<std::uint64_t>(
      number_or(jctl, "slots", 1.0, "control"));
  if (c.slots < 1) throw ConfigError("control.slots: must be at least 1");
  c.warmup_frac = number_or(jctl, "warmup_frac", 0.1, "control");
  if (c.warmup_frac < 0.0 || c.warmup_frac >= 1.0)
    throw ConfigError("control.warmup_frac: must lie in [0, 1)");
  c.seed = static_cast<std::uint64_t>(number_or(jctl, "seed", 1.0, "control"));
  c.log_base = number_or(jctl, "log_base", 0.0, "control");
  c.trace_stride = static_cast<std::uint64_t>(
      number_or(jctl, "trace_stride", 0.0, "control"));
  c.stability_frac = number_or(jctl, "stability_frac", 0.05, "control");
  m.control = c;

  // --- resolved per-link rate tables ---
  m.out_links.assign(m.nodes.size(), {});
  m.in_links.assign(m.nodes.size(), {});
  m.link_rates.reserve(m.links.size());
  for (std::size_t li = 0; li < m.links.size(); ++li) {
    const Link& l = m.links[li];
    const ChannelProfile& p = m.profiles[l.profile];
    const Node& tx = m.nodes[l.tx];
    const int states = profile_state_count(p);
    std::vector<std::vector<double>> table;
    if (!p.rate_table.empty()) {
      table = p.rate_table;
    } else {
      for (const TxLevel& lvl : tx.tx_menu) {
        if (static_cast<int>(lvl.layer_power.size()) != states - 1)
          throw ConfigError("links[" + std::to_string(li) +
                            "]: node " + std::to_string(tx.id) +
                            " lacks layer powers matching profile '" + p.name + "'");
        table.push_back(layer_rates(lvl.layer_power, p.thresholds,
                                    m.control.log_base));
      }
    }
    if (table.size() != tx.tx_menu.size())
      throw ConfigError("links[" + std::to_string(li) + "]: rate table of '" +
                        p.name + "' has " + std::to_string(table.size()) +
                        " levels but node " + std::to_string(tx.id) + " has " +
                        std::to_string(tx.tx_menu.size()));
    m.link_rates.push_back(std::move(table));
    m.out_links[static_cast<std::size_t>(l.tx)].push_back(static_cast<int>(li));
    m.in_links[static_cast<std::size_t>(l.rx)].push_back(static_cast<int>(li));
  }

  enumerate_commodities(m);
  return m;
}

// Normalized form: explicit links and clients, linear-domain channel values.
// load_config(save_config(m)) reproduces m exactly.
inline nlohmann::json save_config(const Model& m) {
  using nlohmann::json;
  json doc;
  doc["nodes"] = json::array();
  for (const Node& n : m.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["x"] = n.x;
    jn["y"] = n.y;
    if (!n.role.empty()) jn["role"] = n.role;
    json pr_cost = json::array(), pr_rate = json::array();
    for (const PrLevel& l : n.pr_menu) {
      pr_cost.push_back(l.cost);
      pr_rate.push_back(l.rate);
    }
    jn["pr_menu"] = {{"cost", pr_cost}, {"rate", pr_rate}};
    json tx_cost = json::array();
    bool has_powers = false;
    json powers = json::array();
    for (const TxLevel& l : n.tx_menu) {
      tx_cost.push_back(l.cost);
      powers.push_back(l.layer_power);
      if (!l.layer_power.empty()) has_powers = true;
    }
    jn["tx_menu"] = {{"cost", tx_cost}};
    if (has_powers) jn["tx_menu"]["layer_power"] = powers;
    doc["nodes"].push_back(std::move(jn));
  }
  doc["profiles"] = json::array();
  for (const ChannelProfile& p : m.profiles) {
    json jp;
    jp["name"] = p.name;
    jp["fading"] = p.fading == FadingKind::rayleigh  ? "rayleigh"
                   : p.fading == FadingKind::rician ? "rician"
                                                    : "discrete";
    if (p.fading == FadingKind::rician) jp["rice_factor"] = p.rice_k;
    jp["pathloss_exponent"] = p.pathloss_exponent;
    jp["reference_gain"] = p.reference_gain;
    if (!p.thresholds.empty()) jp["thresholds"] = p.thresholds;
    if (!p.rate_table.empty()) jp["rate_table"] = p.rate_table;
    if (!p.state_probs.empty()) jp["state_probs"] = p.state_probs;
    if (!p.transition.empty()) jp["transition"] = p.transition;
    jp["outage_layer"] = p.outage_layer;
    doc["profiles"].push_back(std::move(jp));
  }
  doc["links"] = json::array();
  for (const Link& l : m.links) {
    json jl;
    jl["tx"] = m.nodes[l.tx].id;
    jl["rx"] = m.nodes[l.rx].id;
    jl["profile"] = m.profiles[l.profile].name;
    jl["mean_gain"] = l.mean_gain;
    doc["links"].push_back(std::move(jl));
  }
  doc["services"] = json::array();
  for (const Service& s : m.services) {
    json js;
    js["id"] = s.id;
    js["functions"] = json::array();
    for (const FunctionSpec& f : s.functions)
      js["functions"].push_back(
          {{"scaling", f.scaling}, {"complexity", f.complexity}});
    js["clients"] = json::array();
    for (const Client& c : s.clients)
      js["clients"].push_back(
          {{"src", m.nodes[c.src].id}, {"dst", m.nodes[c.dst].id}});
    doc["services"].push_back(std::move(js));
  }
  const ControlConfig& c = m.control;
  doc["control"] = {
      {"V", c.V},
      {"scheme", c.scheme == Scheme::broadcast ? "broadcast" : "outage"},
      {"arrivals",
       c.arrivals == ArrivalKind::poisson ? "poisson" : "deterministic"},
      {"lambda", c.lambda},
      {"slots", c.slots},
      {"warmup_frac", c.warmup_frac},
      {"seed", c.seed},
      {"log_base", c.log_base},
      {"trace_stride", c.trace_stride},
      {"stability_frac", c.stability_frac},
  };
  return doc;
}

}  // namespace wcn
