#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wcn/capacity.hpp"
#include "wcn/config.hpp"
#include "wcn/engine.hpp"
#include "wcn/sweep.hpp"

namespace wcn {

// Dotted-path overrides patch the raw JSON before validation, so overridden
// values go through the same checks as file values.
inline nlohmann::json apply_overrides(nlohmann::json j,
                                      const std::vector<std::string>& ovs) {
  for (const std::string& ov : ovs) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must be key=value: " + ov);
    std::string path = "/" + ov.substr(0, eq);
    for (char& ch : path)
      if (ch == '.') ch = '/';
    const std::string raw = ov.substr(eq + 1);
    nlohmann::json val;
    try {
      val = nlohmann::json::parse(raw);
    } catch (...) {
      val = raw;  // bare words are strings
    }
    try {
      const nlohmann::json::json_pointer ptr(path);
      // Overrides may only touch keys the config already has; a typo that
      // silently grows the tree would be ignored by the loader.
      if (!j.contains(ptr)) throw ConfigError("unknown override key: " + ov);
      j[ptr] = val;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad override path: " + ov);
    }
  }
  return j;
}

inline Model load_model_file(const std::string& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const std::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return load_config(apply_overrides(std::move(j), overrides));
}

namespace cli_detail {

struct CommonOpts {
  std::string config;
  std::string out_dir = ".";
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "model config JSON")->required();
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--override", overrides,
                    "dotted-path config override key=value");
    // Convenience spellings for the three most common overrides.
    cmd->add_option_function<std::uint64_t>(
        "--seed", [this](std::uint64_t v) {
          overrides.push_back("control.seed=" + std::to_string(v));
        },
        "master seed");
    cmd->add_option_function<std::uint64_t>(
        "--slots", [this](std::uint64_t v) {
          overrides.push_back("control.slots=" + std::to_string(v));
        },
        "simulation horizon in slots");
    cmd->add_option_function<double>(
        "--warmup-frac", [this](double v) {
          overrides.push_back("control.warmup_frac=" + std::to_string(v));
        },
        "fraction of slots discarded as warmup");
  }

  Model load() const { return load_model_file(config, overrides); }
  std::filesystem::path out() const {
    std::filesystem::create_directories(out_dir);
    return out_dir;
  }
};

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  return parts;
}

inline int cmd_run(const CommonOpts& opts) {
  const Model m = opts.load();
  const std::filesystem::path out = opts.out();
  Engine eng(m);
  std::vector<TracePoint> trace;
  const RunMetrics r = eng.run(&trace);
  {
    std::ofstream f(out / "trace.csv");
    write_trace_csv(f, trace);
  }
  {
    std::ofstream f(out / "metrics.json");
    f << metrics_to_json(r, m).dump(2) << "\n";
  }
  return 0;
}

inline int cmd_sweep(const CommonOpts& opts, const std::string& axis,
                     const std::string& grid, const std::string& schemes,
                     int replications, int workers) {
  const Model m = opts.load();
  SweepSpec spec;
  if (axis == "lambda")
    spec.axis = SweepAxis::lambda;
  else if (axis == "V")
    spec.axis = SweepAxis::V;
  else
    throw ConfigError("sweep axis must be lambda or V: " + axis);
  for (const std::string& g : split_csv(grid)) {
    try {
      spec.grid.push_back(std::stod(g));
    } catch (...) {
      throw ConfigError("bad grid value: " + g);
    }
  }
  spec.schemes.clear();
  for (const std::string& s : split_csv(schemes)) {
    if (s == "broadcast")
      spec.schemes.push_back(Scheme::broadcast);
    else if (s == "outage")
      spec.schemes.push_back(Scheme::outage);
    else
      throw ConfigError("unknown scheme: " + s);
  }
  spec.replications = replications;
  const std::vector<SweepRow> rows = run_sweep(m, spec, workers);
  const std::filesystem::path out = opts.out();
  {
    std::ofstream f(out / "sweep.csv");
    write_sweep_csv(f, rows);
  }
  {
    std::ofstream f(out / "sweep_checksums.csv");
    write_sweep_checksums(f, rows);
  }
  return 0;
}

inline int cmd_capacity(const CommonOpts& opts, const std::string& mode_str,
                        double lambda, const std::string& export_lp) {
  const Model m = opts.load();
  CapacityMode mode;
  if (mode_str == "max")
    mode = CapacityMode::max_throughput;
  else if (mode_str == "min-cost")
    mode = CapacityMode::min_cost;
  else
    throw ConfigError("capacity mode must be max or min-cost: " + mode_str);
  const CapacityLp built = build_capacity_lp(m, mode, lambda);
  if (!export_lp.empty()) {
    std::ofstream f(export_lp);
    write_lp_text(f, built);
  }
  const LpSolution sol = solve_lp(built.lp);
  if (sol.status == LpStatus::unbounded)
    throw EngineError("capacity LP unbounded: modeling bug");

  nlohmann::json doc;
  doc["mode"] =
      mode == CapacityMode::max_throughput ? "max_throughput" : "min_cost";
  if (mode == CapacityMode::min_cost) doc["lambda"] = lambda;
  doc["iterations"] = sol.iterations;
  if (sol.status == LpStatus::infeasible) {
    doc["verdict"] = "infeasible";
  } else {
    doc["verdict"] = "optimal";
    if (mode == CapacityMode::max_throughput)
      doc["lambda_star"] = sol.x[static_cast<std::size_t>(built.eps_var)];
    else
      doc["min_cost"] = sol.objective + built.cost_offset;
  }
  const std::filesystem::path out = opts.out();
  std::ofstream f(out / "capacity.json");
  f << doc.dump(2) << "\n";
  return sol.status == LpStatus::infeasible ? 4 : 0;
}

inline int cmd_distribution(const CommonOpts& opts) {
  const Model m = opts.load();
  Engine eng(m);
  const RunMetrics r = eng.run();
  const std::filesystem::path out = opts.out();
  std::ofstream f(out / "distribution.csv");
  f << "node,service,function,avg_rate\n";
  const int C = static_cast<int>(m.commodities.size());
  for (int i = 0; i < m.node_count(); ++i)
    for (std::size_t s = 0; s < m.services.size(); ++s)
      for (int fn = 1; fn <= m.stages(static_cast<int>(s)); ++fn) {
        double rate = 0.0;
        for (int c = 0; c < C; ++c) {
          const Commodity& com = m.commodities[static_cast<std::size_t>(c)];
          if (com.svc == static_cast<int>(s) && com.stage == fn - 1)
            rate += r.processing_input_rate[static_cast<std::size_t>(i * C + c)];
        }
        f << m.nodes[static_cast<std::size_t>(i)].id << "," << m.services[s].id
          << "," << fn << "," << rate << "\n";
      }
  return 0;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"wireless computing network simulator"};
  app.require_subcommand(1);

  cli_detail::CommonOpts run_opts, sweep_opts, cap_opts, dist_opts;

  CLI::App* run_cmd = app.add_subcommand("run", "single simulation run");
  run_opts.attach(run_cmd);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "grid sweep over lambda or V");
  sweep_opts.attach(sweep_cmd);
  std::string axis = "lambda", grid, schemes = "broadcast,outage";
  int replications = 1, workers = 0;
  sweep_cmd->add_option("--axis", axis, "sweep axis: lambda or V");
  sweep_cmd->add_option("--grid", grid, "comma-separated grid values")
      ->required();
  sweep_cmd->add_option("--schemes", schemes, "comma-separated scheme list");
  sweep_cmd->add_option("--replications", replications, "replicates per point");
  sweep_cmd->add_option("--workers", workers, "worker threads (0 = auto)");

  CLI::App* cap_cmd = app.add_subcommand("capacity", "LP capacity oracle");
  cap_opts.attach(cap_cmd);
  std::string mode = "max", export_lp;
  double cap_lambda = 0.0;
  cap_cmd->add_option("--mode", mode, "max or min-cost");
  cap_cmd->add_option("--lambda", cap_lambda, "client rate for min-cost mode");
  cap_cmd->add_option("--export-lp", export_lp, "write plain-text LP here");

  CLI::App* dist_cmd = app.add_subcommand(
      "distribution", "per-node per-function processing input rates");
  dist_opts.attach(dist_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return cli_detail::cmd_run(run_opts);
    if (sweep_cmd->parsed())
      return cli_detail::cmd_sweep(sweep_opts, axis, grid, schemes,
                                   replications, workers);
    if (cap_cmd->parsed())
      return cli_detail::cmd_capacity(cap_opts, mode, cap_lambda, export_lp);
    if (dist_cmd->parsed()) return cli_detail::cmd_distribution(dist_opts);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const EngineError& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace wcn
