#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "coke/io.hpp"
#include "coke/metrics.hpp"
#include "coke/synthgen.hpp"
#include "coke/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw coke::ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw coke::ConfigError(path.string() + ": JSON parse error at byte " +
                            std::to_string(e.byte) + ": " + e.what());
  }
  return j;
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw coke::ConfigError("config: unknown key '" + key + "' in " + where);
}

void apply_gen(const json& j, coke::GenConfig& cfg) {
  reject_unknown(j, {"p", "k", "samples", "edge_density", "noise_sigma",
                     "target_missing_rate", "recipe_count", "full_fraction",
                     "expert_edge_count", "skew_recipe_sizes"},
                 "gen");
  if (j.contains("p")) cfg.p = j["p"].get<int>();
  if (j.contains("k")) cfg.k = j["k"].get<int>();
  if (j.contains("samples")) cfg.samples = j["samples"].get<int>();
  if (j.contains("edge_density")) cfg.edge_density = j["edge_density"].get<double>();
  if (j.contains("noise_sigma")) cfg.noise_sigma = j["noise_sigma"].get<double>();
  if (j.contains("target_missing_rate"))
    cfg.target_missing_rate = j["target_missing_rate"].get<double>();
  if (j.contains("recipe_count")) cfg.recipe_count = j["recipe_count"].get<int>();
  if (j.contains("full_fraction")) cfg.full_fraction = j["full_fraction"].get<double>();
  if (j.contains("expert_edge_count"))
    cfg.expert_edge_count = j["expert_edge_count"].get<int>();
  if (j.contains("skew_recipe_sizes"))
    cfg.skew_recipe_sizes = j["skew_recipe_sizes"].get<bool>();
}

void apply_train(const json& j, coke::TrainConfig& cfg) {
  reject_unknown(j,
                 {"iterations", "batch_n", "learning_rate", "gamma", "entropy_bonus",
                  "critic_weight", "hidden", "checkpoint_every", "pns_top_m",
                  "greedy_redecode", "allow_miss_only", "use_chronology", "use_expert",
                  "use_incomplete"},
                 "train");
  if (j.contains("iterations")) cfg.iterations = j["iterations"].get<int>();
  if (j.contains("batch_n")) cfg.batch_n = j["batch_n"].get<int>();
  if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
  if (j.contains("entropy_bonus")) cfg.entropy_bonus = j["entropy_bonus"].get<double>();
  if (j.contains("critic_weight")) cfg.critic_weight = j["critic_weight"].get<double>();
  if (j.contains("hidden")) cfg.hidden = j["hidden"].get<int>();
  if (j.contains("checkpoint_every"))
    cfg.checkpoint_every = j["checkpoint_every"].get<int>();
  if (j.contains("pns_top_m")) cfg.pns_top_m = j["pns_top_m"].get<int>();
  if (j.contains("greedy_redecode"))
    cfg.greedy_redecode = j["greedy_redecode"].get<bool>();
  if (j.contains("allow_miss_only"))
    cfg.allow_miss_only = j["allow_miss_only"].get<bool>();
  if (j.contains("use_chronology")) cfg.use_chronology = j["use_chronology"].get<bool>();
  if (j.contains("use_expert")) cfg.use_expert = j["use_expert"].get<bool>();
  if (j.contains("use_incomplete")) cfg.use_incomplete = j["use_incomplete"].get<bool>();
}

void apply_reward(const json& j, coke::RewardConfig& cfg) {
  reject_unknown(j, {"penalty_weight", "ridge", "n"}, "reward");
  if (j.contains("penalty_weight")) cfg.penalty_weight = j["penalty_weight"].get<double>();
  if (j.contains("ridge")) cfg.ridge = j["ridge"].get<double>();
  if (j.contains("n")) cfg.n = j["n"].get<int>();
}

std::uint64_t initial_seed() {
  // COKE_SEED has the lowest precedence: config files and flags override it.
  if (const char* env = std::getenv("COKE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw coke::ConfigError(std::string("COKE_SEED is not an integer: ") + env);
    }
  }
  return 0;
}

std::set<std::pair<std::string, std::string>> read_edge_pairs(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw coke::DataFormatError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "from,to")
    throw coke::DataFormatError(path.string() + ":1: expected header 'from,to'");
  std::set<std::pair<std::string, std::string>> edges;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw coke::DataFormatError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected exactly 2 fields");
    edges.emplace(line.substr(0, comma), line.substr(comma + 1));
  }
  return edges;
}

int run_gen(const coke::GenConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  coke::Benchmark bench = coke::generate_benchmark(cfg);
  coke::write_benchmark(out_dir, bench.truth, bench.data);
  std::cout << "wrote benchmark to " << out_dir.string() << "\n"
            << "realized missing rate: " << bench.realized_missing_rate << "\n";
  return 0;
}

int run_discover(const fs::path& data_dir, const fs::path& out_dir,
                 const coke::TrainConfig& tcfg, const coke::RewardConfig& rcfg) {
  const coke::Dataset data = coke::io::read_dataset(data_dir);
  const coke::ExpertKnowledge ek =
      coke::io::read_expert_json(data_dir / "expert.json", data.sensor_names);

  coke::Adjacency truth;
  const bool have_truth = fs::exists(data_dir / "truth_edges.csv");
  if (have_truth)
    truth = coke::io::read_edges_csv(data_dir / "truth_edges.csv", data.sensor_names);

  fs::create_directories(out_dir);
  coke::CheckpointFn checkpoint;
  if (tcfg.checkpoint_every > 0)
    checkpoint = [&out_dir](int iter, const coke::NetworkParams& p) {
      coke::io::write_params_json(
          out_dir / ("params_iter" + std::to_string(iter) + ".json"), p);
    };

  coke::TrainResult result =
      coke::train(data, ek, tcfg, rcfg, have_truth ? &truth : nullptr, checkpoint);

  coke::io::write_edges_csv(out_dir / "pred_edges.csv", result.best.adjacency,
                            data.sensor_names);
  coke::io::write_trace_csv(out_dir / "trace.csv", result.trace);
  coke::io::write_params_json(out_dir / "params.json", result.params);
  std::cout << "best reward: " << result.best.reward << " ("
            << result.best.adjacency.edge_count() << " edges)\n";
  return 0;
}

int run_eval(const fs::path& pred_path, const fs::path& truth_path,
             const fs::path& out_path) {
  const auto pred = read_edge_pairs(pred_path);
  const auto truth = read_edge_pairs(truth_path);
  int tp = 0;
  for (const auto& e : pred) tp += truth.count(e);
  const coke::EdgeMetrics m = coke::metrics_from_counts(
      tp, static_cast<int>(pred.size()) - tp, static_cast<int>(truth.size()) - tp);
  std::cout << coke::io::metrics_to_json(m) << "\n";
  if (!out_path.empty()) coke::io::write_metrics_json(out_path, m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    CLI::App app{"COKE: causal discovery for recipe-structured sensor data"};
    app.require_subcommand(1);

    // --config is shared; values there sit between defaults and flags.
    std::string config_path;
    for (int i = 1; i < argc - 1; ++i)
      if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    json cfg_json;
    if (!config_path.empty()) {
      cfg_json = load_run_config(config_path);
      reject_unknown(cfg_json, {"gen", "train", "reward", "seed"}, "top level");
    }

    coke::GenConfig gen_cfg;
    coke::TrainConfig train_cfg;
    coke::RewardConfig reward_cfg;
    std::uint64_t seed = initial_seed();
    if (cfg_json.contains("gen")) apply_gen(cfg_json["gen"], gen_cfg);
    if (cfg_json.contains("train")) apply_train(cfg_json["train"], train_cfg);
    if (cfg_json.contains("reward")) apply_reward(cfg_json["reward"], reward_cfg);
    if (cfg_json.contains("seed")) seed = cfg_json["seed"].get<std::uint64_t>();

    std::string out_dir = "out";
    std::string data_dir;
    std::string pred_path, truth_path, metrics_out;
    std::string config_flag;  // registered so CLI11 accepts the flag

    auto* gen = app.add_subcommand("gen", "generate a synthetic benchmark");
    gen->add_option("--config", config_flag, "JSON config file");
    gen->add_option("--out", out_dir, "output directory");
    gen->add_option("--p", gen_cfg.p, "sensor count");
    gen->add_option("--k", gen_cfg.k, "machine count");
    gen->add_option("--samples", gen_cfg.samples, "sample count N");
    gen->add_option("--density", gen_cfg.edge_density, "edge density (0 = auto ~2p edges)");
    gen->add_option("--sigma", gen_cfg.noise_sigma, "noise standard deviation");
    gen->add_option("--missing-rate", gen_cfg.target_missing_rate, "target missing rate");
    gen->add_option("--recipes", gen_cfg.recipe_count, "recipe count");
    gen->add_option("--full-fraction", gen_cfg.full_fraction, "share of complete rows");
    gen->add_option("--expert-edges", gen_cfg.expert_edge_count, "simulated expert edges");
    gen->add_option("--seed", seed, "rng seed");

    auto* discover = app.add_subcommand("discover", "run causal discovery");
    discover->add_option("--config", config_flag, "JSON config file");
    discover->add_option("--data", data_dir, "benchmark directory")->required();
    discover->add_option("--out", out_dir, "output directory");
    discover->add_option("--iterations", train_cfg.iterations, "training iterations");
    discover->add_option("--n", train_cfg.batch_n, "per-recipe batch rows");
    discover->add_option("--lr", train_cfg.learning_rate, "learning rate");
    discover->add_option("--gamma", train_cfg.gamma, "baseline discount");
    discover->add_option("--hidden", train_cfg.hidden, "embedding width");
    discover->add_option("--pns-top-m", train_cfg.pns_top_m, "PNS candidate cap");
    discover->add_option("--lambda", reward_cfg.penalty_weight, "expert penalty weight");
    discover->add_option("--checkpoint-every", train_cfg.checkpoint_every,
                         "checkpoint interval (0 = final only)");
    discover->add_option("--seed", seed, "rng seed");
    discover->add_flag("--no-chrono", [&](std::int64_t) { train_cfg.use_chronology = false; },
                       "disable chronological pruning");
    discover->add_flag("--no-expert", [&](std::int64_t) { train_cfg.use_expert = false; },
                       "disable expert knowledge");
    discover->add_flag("--no-incomplete",
                       [&](std::int64_t) { train_cfg.use_incomplete = false; },
                       "disable the incomplete-data path");
    discover->add_flag("--greedy-redecode", train_cfg.greedy_redecode,
                       "record a greedy candidate every 50 iterations");
    discover->add_flag("--allow-miss-only", train_cfg.allow_miss_only,
                       "experimental: run without a complete recipe");

    auto* eval = app.add_subcommand("eval", "score predicted edges against truth");
    eval->add_option("--pred", pred_path, "predicted edge CSV")->required();
    eval->add_option("--truth", truth_path, "ground-truth edge CSV")->required();
    eval->add_option("--out", metrics_out, "metrics JSON output path");

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return 2;  // bad command lines are configuration errors
    }

    gen_cfg.seed = seed;
    train_cfg.seed = seed;

    if (gen->parsed()) return run_gen(gen_cfg, out_dir);
    if (discover->parsed()) return run_discover(data_dir, out_dir, train_cfg, reward_cfg);
    if (eval->parsed()) return run_eval(pred_path, truth_path, metrics_out);
    return 1;
  } catch (const coke::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const coke::DataFormatError& e) {
    std::cerr << "data format error: " << e.what() << "\n";
    return 3;
  } catch (const coke::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
