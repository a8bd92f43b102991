#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "wcn/engine.hpp"
#include "wcn/model.hpp"
#include "wcn/rng.hpp"

namespace wcn {

enum class SweepAxis { lambda, V };

struct SweepSpec {
  SweepAxis axis = SweepAxis::lambda;
  std::vector<double> grid;
  std::vector<Scheme> schemes{Scheme::broadcast, Scheme::outage};
  int replications = 1;
};

struct SweepRow {
  Scheme scheme = Scheme::broadcast;
  double axis_value = 0.0;
  int replicate = 0;
  double avg_cost = 0.0;
  double avg_occupancy = 0.0;
  bool stable = true;
  double normalized_slope = 0.0;
  double cost_se = 0.0;
  double occupancy_se = 0.0;
  std::uint64_t gain_checksum = 0;
};

inline void validate_sweep(const SweepSpec& s) {
  if (s.grid.empty()) throw ConfigError("sweep grid is empty");
  for (std::size_t i = 1; i < s.grid.size(); ++i)
    if (s.grid[i] <= s.grid[i - 1])
      throw ConfigError("sweep grid must be strictly increasing");
  if (s.replications < 1)
    throw ConfigError("sweep replications must be >= 1");
  if (s.schemes.empty()) throw ConfigError("sweep scheme list is empty");
}

// Each replicate gets its own derived seed; schemes at the same replicate
// share it, so their channel gain sequences are bit-identical (common random
// numbers). Points run on a worker pool but merge in grid order.
inline std::vector<SweepRow> run_sweep(const Model& base, const SweepSpec& spec,
                                       int workers = 0) {
  validate_sweep(spec);
  StreamFactory root(base.control.seed);
  std::vector<std::uint64_t> rep_seed(
      static_cast<std::size_t>(spec.replications));
  for (int r = 0; r < spec.replications; ++r)
    rep_seed[static_cast<std::size_t>(r)] =
        root.derive("replicate/" + std::to_string(r));

  struct Task {
    Scheme scheme;
    double value;
    int replicate;
  };
  std::vector<Task> tasks;
  for (Scheme sc : spec.schemes)
    for (double v : spec.grid)
      for (int r = 0; r < spec.replications; ++r)
        tasks.push_back({sc, v, r});

  std::vector<SweepRow> rows(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};

  auto work = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      const Task& t = tasks[idx];
      try {
        Model m = base;
        m.control.scheme = t.scheme;
        m.control.seed = rep_seed[static_cast<std::size_t>(t.replicate)];
        if (spec.axis == SweepAxis::lambda)
          m.control.lambda = t.value;
        else
          m.control.V = t.value;
        Engine eng(m);
        const RunMetrics r = eng.run();
        SweepRow& row = rows[idx];
        row.scheme = t.scheme;
        row.axis_value = t.value;
        row.replicate = t.replicate;
        row.avg_cost = r.avg_cost;
        row.avg_occupancy = r.avg_occupancy;
        row.stable = r.stability.stable;
        row.normalized_slope = r.stability.normalized_slope;
        row.cost_se = r.cost_se;
        row.occupancy_se = r.occupancy_se;
        row.gain_checksum = r.gain_checksum;
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    }
  };

  std::size_t pool = workers > 0 ? static_cast<std::size_t>(workers)
                                 : std::thread::hardware_concurrency();
  if (pool == 0) pool = 1;
  pool = std::min(pool, tasks.size());
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < pool; ++w) threads.emplace_back(work);
  work();
  for (std::thread& th : threads) th.join();

  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

inline void write_sweep_csv(std::ostream& os,
                            const std::vector<SweepRow>& rows) {
  os << "scheme,axis_value,replicate,avg_cost,avg_occupancy,stable\n";
  char buf[200];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%d,%.10g,%.10g,%d\n",
                  scheme_name(r.scheme), r.axis_value, r.replicate, r.avg_cost,
                  r.avg_occupancy, r.stable ? 1 : 0);
    os << buf;
  }
}

inline void write_sweep_checksums(std::ostream& os,
                                  const std::vector<SweepRow>& rows) {
  os << "scheme,axis_value,replicate,gain_checksum\n";
  for (const SweepRow& r : rows)
    os << scheme_name(r.scheme) << "," << r.axis_value << "," << r.replicate
       << "," << r.gain_checksum << "\n";
}

}  // namespace wcn
