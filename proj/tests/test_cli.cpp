// End-to-end checks of the wcnsim command line: exit codes, output files,
// and override plumbing. Each case drives the real binary via std::system.
#include <sys/wait.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "wcn/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("wcn_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
};

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

// Runs the CLI with the given argument string, capturing exit code and both
// output streams through files in dir.
CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + WCN_CLI_PATH + "\" " + args +
                          " >\"" + out_file.string() + "\" 2>\"" +
                          err_file.string() + "\"";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  REQUIRE(raw != -1);
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::string config_path(const std::string& name) {
  return std::string(WCN_SOURCE_DIR) + "/configs/" + name;
}

nlohmann::json parse_file(const fs::path& p) {
  return nlohmann::json::parse(slurp(p));
}

}  // namespace

TEST_CASE("run writes trace and metrics and applies overrides", "[cli]") {
  TempDir tmp;
  const CliResult r = run_cli(
      "run --config " + config_path("tiny_b.json") + " --out-dir " +
          tmp.str() + " --slots 4000 --warmup-frac 0.25 --seed 99" +
          " --override control.V=7.5",
      tmp.path);
  INFO(r.err);
  REQUIRE(r.code == 0);

  const std::vector<std::string> trace = lines_of(slurp(tmp.path / "trace.csv"));
  REQUIRE(trace.size() > 1);
  CHECK(trace[0] == "t,cost,occupancy,delivered");

  const nlohmann::json j = parse_file(tmp.path / "metrics.json");
  CHECK(j.at("delivered_rate").get<double>() >= 0.0);
  CHECK(j.at("slots").get<long long>() == 4000);
  // Overrides and the convenience flags both land in the echoed config.
  CHECK(j.at("config").at("control").at("V").get<double>() == 7.5);
  CHECK(j.at("config").at("control").at("seed").get<long long>() == 99);
  CHECK(j.at("config").at("control").at("slots").get<long long>() == 4000);
  CHECK(j.at("config").at("control").at("warmup_frac").get<double>() == 0.25);
}

TEST_CASE("missing config file exits 2", "[cli]") {
  TempDir tmp;
  const CliResult r = run_cli(
      "run --config " + (tmp.path / "does_not_exist.json").string() +
          " --out-dir " + tmp.str(),
      tmp.path);
  CHECK(r.code == 2);
  CHECK(r.err.find("cannot open config") != std::string::npos);
}

TEST_CASE("unknown override key exits 2", "[cli]") {
  TempDir tmp;
  const CliResult r = run_cli(
      "run --config " + config_path("tiny_a.json") + " --out-dir " +
          tmp.str() + " --override control.arrival.lambda=3",
      tmp.path);
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown override key") != std::string::npos);
}

TEST_CASE("malformed json config exits 2", "[cli]") {
  TempDir tmp;
  const fs::path bad = tmp.path / "bad.json";
  {
    std::ofstream f(bad);
    f << "{ \"nodes\": [";
  }
  const CliResult r =
      run_cli("run --config " + bad.string() + " --out-dir " + tmp.str(),
              tmp.path);
  CHECK(r.code == 2);
  CHECK(r.err.find("not valid JSON") != std::string::npos);
}

TEST_CASE("capacity max reports the known throughput limit", "[cli]") {
  TempDir tmp;
  const fs::path lp_file = tmp.path / "problem.lp";
  const CliResult r = run_cli(
      "capacity --config " + config_path("tiny_a.json") + " --out-dir " +
          tmp.str() + " --mode max --export-lp " + lp_file.string(),
      tmp.path);
  INFO(r.err);
  REQUIRE(r.code == 0);

  const nlohmann::json j = parse_file(tmp.path / "capacity.json");
  CHECK(j.at("mode") == "max_throughput");
  CHECK(j.at("verdict") == "optimal");
  CHECK(j.at("iterations").get<int>() > 0);
  CHECK(std::abs(j.at("lambda_star").get<double>() - 12.0) < 1e-7);

  // The exported LP is a plain-text dump of the same problem.
  const std::string lp = slurp(lp_file);
  CHECK(lp.find("eps") != std::string::npos);
  CHECK(lines_of(lp).size() > 10);
}

TEST_CASE("capacity min-cost reports cost or infeasibility", "[cli]") {
  TempDir tmp;

  SECTION("feasible rate yields the optimal cost") {
    const CliResult r = run_cli(
        "capacity --config " + config_path("tiny_a.json") + " --out-dir " +
            tmp.str() + " --mode min-cost --lambda 5",
        tmp.path);
    INFO(r.err);
    REQUIRE(r.code == 0);
    const nlohmann::json j = parse_file(tmp.path / "capacity.json");
    CHECK(j.at("mode") == "min_cost");
    CHECK(j.at("verdict") == "optimal");
    CHECK(j.at("lambda").get<double>() == 5.0);
    CHECK(std::abs(j.at("min_cost").get<double>() - (5.0 / 12.0 + 0.5)) <
          1e-7);
  }

  SECTION("rate beyond the limit is infeasible with exit 4") {
    const CliResult r = run_cli(
        "capacity --config " + config_path("tiny_a.json") + " --out-dir " +
            tmp.str() + " --mode min-cost --lambda 13",
        tmp.path);
    INFO(r.err);
    REQUIRE(r.code == 4);
    const nlohmann::json j = parse_file(tmp.path / "capacity.json");
    CHECK(j.at("verdict") == "infeasible");
    CHECK(!j.contains("min_cost"));
  }

  SECTION("unknown mode exits 2") {
    const CliResult r = run_cli(
        "capacity --config " + config_path("tiny_a.json") + " --out-dir " +
            tmp.str() + " --mode fastest",
        tmp.path);
    CHECK(r.code == 2);
  }
}

TEST_CASE("sweep emits one row per scheme and grid point", "[cli]") {
  TempDir tmp;
  const CliResult r = run_cli(
      "sweep --config " + config_path("tiny_a.json") + " --out-dir " +
          tmp.str() +
          " --axis lambda --grid 2,4 --schemes broadcast,outage" +
          " --slots 6000 --warmup-frac 0.25",
      tmp.path);
  INFO(r.err);
  REQUIRE(r.code == 0);

  const std::vector<std::string> rows = lines_of(slurp(tmp.path / "sweep.csv"));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "scheme,axis_value,replicate,avg_cost,avg_occupancy,stable");
  int broadcast_rows = 0, outage_rows = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::string scheme, axis, rep, cost, occ, stable;
    REQUIRE(std::getline(ss, scheme, ','));
    REQUIRE(std::getline(ss, axis, ','));
    REQUIRE(std::getline(ss, rep, ','));
    REQUIRE(std::getline(ss, cost, ','));
    REQUIRE(std::getline(ss, occ, ','));
    REQUIRE(std::getline(ss, stable, ','));
    broadcast_rows += scheme == "broadcast";
    outage_rows += scheme == "outage";
    CHECK((std::stod(axis) == 2.0 || std::stod(axis) == 4.0));
    CHECK(std::stod(cost) >= 0.0);
    CHECK(std::stod(occ) >= 0.0);
    // Both rates sit far below the throughput limit of 12.
    CHECK(stable == "1");
  }
  CHECK(broadcast_rows == 2);
  CHECK(outage_rows == 2);

  // Common random numbers: the channel draw checksum depends only on the
  // axis value and replicate, never on the scheme.
  const std::vector<std::string> sums =
      lines_of(slurp(tmp.path / "sweep_checksums.csv"));
  REQUIRE(sums.size() == 5);
  CHECK(sums[0] == "scheme,axis_value,replicate,gain_checksum");
  std::map<std::string, std::vector<std::string>> by_point;
  for (std::size_t i = 1; i < sums.size(); ++i) {
    const std::string& row = sums[i];
    const std::size_t first = row.find(',');
    const std::size_t last = row.rfind(',');
    REQUIRE(first != std::string::npos);
    REQUIRE(last > first);
    by_point[row.substr(first + 1, last - first - 1)].push_back(
        row.substr(last + 1));
  }
  REQUIRE(by_point.size() == 2);
  for (const auto& [point, checksums] : by_point) {
    INFO(point);
    REQUIRE(checksums.size() == 2);
    CHECK(checksums[0] == checksums[1]);
    CHECK(checksums[0] != "0");
  }
}

TEST_CASE("sweep rejects bad axis and scheme names", "[cli]") {
  TempDir tmp;
  CHECK(run_cli("sweep --config " + config_path("tiny_a.json") +
                    " --out-dir " + tmp.str() + " --axis gamma --grid 1",
                tmp.path)
            .code == 2);
  CHECK(run_cli("sweep --config " + config_path("tiny_a.json") +
                    " --out-dir " + tmp.str() +
                    " --grid 1 --schemes multicast",
                tmp.path)
            .code == 2);
  CHECK(run_cli("sweep --config " + config_path("tiny_a.json") +
                    " --out-dir " + tmp.str() + " --grid 1,oops",
                tmp.path)
            .code == 2);
}

TEST_CASE("distribution lists every node and function stage", "[cli]") {
  TempDir tmp;
  const CliResult r = run_cli(
      "distribution --config " + config_path("tiny_a.json") + " --out-dir " +
          tmp.str() + " --slots 3000 --warmup-frac 0.25",
      tmp.path);
  INFO(r.err);
  REQUIRE(r.code == 0);

  const wcn::Model m = wcn::load_model_file(config_path("tiny_a.json"), {});
  int stage_total = 0;
  for (std::size_t s = 0; s < m.services.size(); ++s)
    stage_total += m.stages(static_cast<int>(s));

  const std::vector<std::string> rows =
      lines_of(slurp(tmp.path / "distribution.csv"));
  REQUIRE(rows.size() ==
          1 + static_cast<std::size_t>(m.node_count() * stage_total));
  CHECK(rows[0] == "node,service,function,avg_rate");

  std::set<int> nodes_seen;
  double total_rate = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::string node, svc, fn, rate;
    REQUIRE(std::getline(ss, node, ','));
    REQUIRE(std::getline(ss, svc, ','));
    REQUIRE(std::getline(ss, fn, ','));
    REQUIRE(std::getline(ss, rate, ','));
    nodes_seen.insert(std::stoi(node));
    CHECK(std::stoi(fn) >= 1);
    CHECK(std::stoi(fn) <= stage_total);
    CHECK(std::stod(rate) >= 0.0);
    total_rate += std::stod(rate);
  }
  std::set<int> nodes_expected;
  for (const wcn::Node& n : m.nodes) nodes_expected.insert(n.id);
  CHECK(nodes_seen == nodes_expected);
  // Traffic flows, so some node processes at a positive rate.
  CHECK(total_rate > 0.0);
}

TEST_CASE("help and usage errors", "[cli]") {
  TempDir tmp;
  CHECK(run_cli("--help", tmp.path).code == 0);
  CHECK(run_cli("run --help", tmp.path).code == 0);
  // Missing required --config is a usage error.
  CHECK(run_cli("run", tmp.path).code == 2);
  // No subcommand at all.
  CHECK(run_cli("", tmp.path).code == 2);
}
