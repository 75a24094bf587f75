#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "coke/io.hpp"
#include "coke/synthgen.hpp"

using namespace coke;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("coke_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("dataset round-trips exactly through csv and json") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    GenConfig cfg;
    cfg.p = 12;
    cfg.k = 4;
    cfg.samples = 200;
    cfg.target_missing_rate = 0.5;
    cfg.recipe_count = 4;
    cfg.seed = seed;
    const Benchmark bench = generate_benchmark(cfg);

    TempDir dir;
    write_benchmark(dir.path, bench.truth, bench.data);
    const Dataset back = io::read_dataset(dir.path);

    CHECK(back.values == bench.data.values);  // %.17g preserves doubles exactly
    CHECK((back.present.array() == bench.data.present.array()).all());
    CHECK(back.recipe_of == bench.data.recipe_of);
    CHECK(back.recipe_names == bench.data.recipe_names);
    CHECK(back.machine_of == bench.data.machine_of);
    CHECK(back.sensor_names == bench.data.sensor_names);

    const Adjacency truth_back =
        io::read_edges_csv(dir.path / "truth_edges.csv", back.sensor_names);
    CHECK(truth_back == bench.truth.dag);

    const ExpertKnowledge ek_back =
        io::read_expert_json(dir.path / "expert.json", back.sensor_names);
    std::vector<std::pair<int, int>> req = ek_back.required;
    std::sort(req.begin(), req.end());
    std::vector<std::pair<int, int>> orig = bench.truth.expert_required;
    std::sort(orig.begin(), orig.end());
    CHECK(req == orig);
  }
}

TEST_CASE("network parameters round-trip exactly") {
  const NetworkParams params = NetworkParams::init({6, 8, 77});
  TempDir dir;
  io::write_params_json(dir.path / "params.json", params);
  const NetworkParams back = io::read_params_json(dir.path / "params.json");
  CHECK(back.w_in == params.w_in);
  CHECK(back.w_query == params.w_query);
  CHECK(back.attn_score == params.attn_score);
  CHECK(back.theta_full == params.theta_full);
  CHECK(back.dec_b2 == params.dec_b2);
  CHECK(back.critic_w1 == params.critic_w1);
  CHECK(back.critic_b2 == params.critic_b2);
}

TEST_CASE("truncated data files produce located format errors") {
  GenConfig cfg;
  cfg.p = 4;
  cfg.k = 2;
  cfg.samples = 20;
  cfg.target_missing_rate = 0;
  cfg.recipe_count = 1;
  cfg.seed = 1;
  const Benchmark bench = generate_benchmark(cfg);
  TempDir dir;
  write_benchmark(dir.path, bench.truth, bench.data);

  SUBCASE("csv row with a missing field names the line") {
    std::string csv = slurp(dir.path / "data.csv");
    // Drop the last field of the second data row (line 3).
    std::size_t line_start = 0;
    for (int i = 0; i < 2; ++i) line_start = csv.find('\n', line_start) + 1;
    const std::size_t line_end = csv.find('\n', line_start);
    const std::size_t last_comma = csv.rfind(',', line_end);
    csv.erase(last_comma, line_end - last_comma);
    spit(dir.path / "data.csv", csv);
    try {
      io::read_dataset(dir.path);
      FAIL("expected DataFormatError");
    } catch (const DataFormatError& e) {
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
  }

  SUBCASE("csv missing its last rows is rejected") {
    std::string csv = slurp(dir.path / "data.csv");
    csv.resize(csv.rfind('\n', csv.size() - 2) + 1);  // drop the final row
    spit(dir.path / "data.csv", csv);
    CHECK_THROWS_AS(io::read_dataset(dir.path), DataFormatError);
  }

  SUBCASE("truncated json reports the byte offset") {
    std::string meta = slurp(dir.path / "meta.json");
    meta.resize(meta.size() / 2);
    spit(dir.path / "meta.json", meta);
    try {
      io::read_dataset(dir.path);
      FAIL("expected DataFormatError");
    } catch (const DataFormatError& e) {
      CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
  }

  SUBCASE("bad csv header") {
    std::string csv = slurp(dir.path / "data.csv");
    spit(dir.path / "data.csv", "oops" + csv);
    CHECK_THROWS_AS(io::read_dataset(dir.path), DataFormatError);
  }

  SUBCASE("non-numeric cell") {
    std::string csv = slurp(dir.path / "data.csv");
    const auto pos = csv.find('\n') + 1;
    csv.replace(pos, csv.find(',', pos) - pos, "A,abc");
    spit(dir.path / "data.csv", csv);
    CHECK_THROWS_AS(io::read_dataset(dir.path), DataFormatError);
  }
}

TEST_CASE("unknown format versions are refused") {
  GenConfig cfg;
  cfg.p = 4;
  cfg.k = 2;
  cfg.samples = 10;
  cfg.target_missing_rate = 0;
  cfg.recipe_count = 1;
  cfg.seed = 2;
  const Benchmark bench = generate_benchmark(cfg);
  TempDir dir;
  write_benchmark(dir.path, bench.truth, bench.data);

  std::string meta = slurp(dir.path / "meta.json");
  const auto pos = meta.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  meta.replace(pos, 12, "\"version\": 2");
  spit(dir.path / "meta.json", meta);
  try {
    io::read_dataset(dir.path);
    FAIL("expected DataFormatError");
  } catch (const DataFormatError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  const NetworkParams params = NetworkParams::init({4, 4, 1});
  io::write_params_json(dir.path / "params.json", params);
  std::string pj = slurp(dir.path / "params.json");
  const auto vpos = pj.find("\"version\":1");
  REQUIRE(vpos != std::string::npos);
  pj.replace(vpos, 11, "\"version\":9");
  spit(dir.path / "params.json", pj);
  CHECK_THROWS_AS(io::read_params_json(dir.path / "params.json"), DataFormatError);
}

TEST_CASE("edge csv uses sensor names and rejects unknown ones") {
  const std::vector<std::string> names = {"a", "b", "c"};
  Adjacency g(3);
  g.set(0, 2, true);
  g.set(2, 1, true);
  TempDir dir;
  io::write_edges_csv(dir.path / "e.csv", g, names);
  const std::string text = slurp(dir.path / "e.csv");
  CHECK(text.find("a,c") != std::string::npos);
  CHECK(text.find("c,b") != std::string::npos);
  CHECK(io::read_edges_csv(dir.path / "e.csv", names) == g);

  spit(dir.path / "bad.csv", "from,to\na,zzz\n");
  CHECK_THROWS_AS(io::read_edges_csv(dir.path / "bad.csv", names), DataFormatError);
}

TEST_CASE("trace csv has the fixed schema and blank f1 when unknown") {
  TrainTrace trace;
  TraceRow r;
  r.iteration = 1;
  r.reward = -2.5;
  r.edges = 3;
  r.theta_full = 0.6;
  r.theta_miss = 0.4;
  trace.rows.push_back(r);
  TraceRow r2 = r;
  r2.iteration = 2;
  r2.f1 = 0.5;
  r2.has_f1 = true;
  trace.rows.push_back(r2);

  TempDir dir;
  io::write_trace_csv(dir.path / "trace.csv", trace);
  const std::string text = slurp(dir.path / "trace.csv");
  CHECK(text.rfind("iter,reward,bic_term,penalty,edges,theta_full,theta_miss,f1\n", 0) == 0);
  // Row 1 ends with an empty f1 field; row 2 carries the value.
  CHECK(text.find(",\n") != std::string::npos);
  CHECK(text.find("0.5\n") != std::string::npos);
}

#ifdef COKE_CLI_PATH
namespace {

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      env + (env.empty() ? "" : " ") + COKE_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return status < 0 ? status : (status >> 8) & 0xff;
}

const std::string kGenArgs =
    "gen --p 6 --k 3 --samples 400 --missing-rate 0.30 --recipes 3 "
    "--full-fraction 0.1 --expert-edges 4";

}  // namespace

TEST_CASE("cli pipeline: gen, discover, eval") {
  TempDir dir;
  const std::string bench = (dir.path / "bench").string();
  const std::string out = (dir.path / "out").string();
  CHECK(run_cli(kGenArgs + " --seed 4 --out " + bench) == 0);
  for (const char* f : {"data.csv", "meta.json", "truth_edges.csv", "expert.json"})
    CHECK(fs::exists(fs::path(bench) / f));

  CHECK(run_cli("discover --data " + bench + " --out " + out +
                " --iterations 5 --n 16 --hidden 8 --seed 1 --checkpoint-every 3") == 0);
  CHECK(fs::exists(fs::path(out) / "pred_edges.csv"));
  CHECK(fs::exists(fs::path(out) / "trace.csv"));
  CHECK(fs::exists(fs::path(out) / "params_iter3.json"));

  const std::string metrics = (dir.path / "metrics.json").string();
  CHECK(run_cli("eval --pred " + out + "/pred_edges.csv --truth " + bench +
                "/truth_edges.csv --out " + metrics) == 0);
  const std::string mj = slurp(metrics);
  CHECK(mj.find("\"f1\"") != std::string::npos);

  // Generated predictions load back as a graph over the same sensors.
  const Dataset data = io::read_dataset(bench);
  const Adjacency pred =
      io::read_edges_csv(fs::path(out) / "pred_edges.csv", data.sensor_names);
  CHECK(is_acyclic(pred));
}

TEST_CASE("cli exit codes distinguish config and data errors") {
  TempDir dir;
  // Unknown key anywhere in the config file is a configuration error (2).
  spit(dir.path / "bad.json", "{\"train\": {\"bogus\": 1}}");
  spit(dir.path / "meta.json", "{}");
  CHECK(run_cli("discover --data " + dir.path.string() + " --config " +
                (dir.path / "bad.json").string()) == 2);
  // Invalid parameter values are configuration errors too.
  CHECK(run_cli("gen --p 6 --k 3 --samples 100 --missing-rate 2.0 --out " +
                dir.path.string()) == 2);
  // So are unknown flags.
  CHECK(run_cli("gen --frobnicate --out " + dir.path.string()) == 2);
  // A missing benchmark directory is a data-format error (3).
  CHECK(run_cli("discover --data " + (dir.path / "nope").string() + " --out " +
                (dir.path / "o").string() + " --iterations 2") == 3);
}

TEST_CASE("seed precedence: flag beats environment") {
  TempDir dir;
  const auto d1 = dir.path / "a", d2 = dir.path / "b", d3 = dir.path / "c";
  CHECK(run_cli(kGenArgs + " --out " + d1.string(), "COKE_SEED=5") == 0);
  CHECK(run_cli(kGenArgs + " --out " + d2.string(), "COKE_SEED=5") == 0);
  CHECK(run_cli(kGenArgs + " --seed 6 --out " + d3.string(), "COKE_SEED=5") == 0);
  CHECK(slurp(d1 / "data.csv") == slurp(d2 / "data.csv"));
  CHECK(slurp(d1 / "data.csv") != slurp(d3 / "data.csv"));
}
#endif  // COKE_CLI_PATH

TEST_CASE("metrics json carries all fields") {
  EdgeMetrics m;
  m.tp = 3;
  m.fp = 1;
  m.fn = 2;
  m.precision = 0.75;
  m.recall = 0.6;
  m.f1 = 2 * 0.75 * 0.6 / 1.35;
  const std::string j = io::metrics_to_json(m);
  for (const char* key : {"tp", "fp", "fn", "precision", "recall", "f1"})
    CHECK(j.find(key) != std::string::npos);
}
