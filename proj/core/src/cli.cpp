#include "adagtcn/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adagtcn/errors.hpp"
#include "adagtcn/grad_suite.hpp"
#include "adagtcn/harness.hpp"
#include "config_json.hpp"

namespace adagtcn {

namespace {

detail::FlatConfig load_flat_config(const std::string& path, nlohmann::json* raw_out) {
  if (path.empty()) {
    if (raw_out) *raw_out = nlohmann::json::object();
    return {};
  }
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config file " + path);
  nlohmann::json doc;
  try {
    file >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": config parse failure: " + e.what());
  }
  if (raw_out) *raw_out = doc;
  return detail::flat_config_from_json(doc);
}

void print_metrics_table(const Metrics& metrics) {
  std::printf("%-10s %.4f\n", "accuracy", metrics.accuracy);
  std::printf("%-10s %.4f\n", "precision", metrics.precision);
  std::printf("%-10s %.4f\n", "recall", metrics.recall);
  std::printf("%-10s %.4f\n", "micro_f1", metrics.micro_f1);
}

nlohmann::json metrics_to_json(const Metrics& metrics) {
  return {{"accuracy", metrics.accuracy},
          {"precision", metrics.precision},
          {"recall", metrics.recall},
          {"micro_f1", metrics.micro_f1}};
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_path, bool as_json) {
  nlohmann::json raw;
  detail::FlatConfig config = load_flat_config(config_path, &raw);
  const std::vector<SessionSample> samples = load_dataset(data_path);
  if (samples.empty()) throw DataError(data_path + ": empty dataset, nothing to train on");

  // Dataset-derived defaults when unset, mirroring padding-to-max practice.
  if (!raw.contains("p")) {
    config.model.num_rows = samples[0].sequence.num_nodes();
  }
  if (!raw.contains("max_length")) {
    std::size_t longest = 0;
    for (const SessionSample& sample : samples) {
      longest = std::max(longest, sample.sequence.length());
    }
    config.model.max_length = longest;
    std::cerr << "max_length not set; padding to dataset maximum " << longest << "\n";
  }

  const SplitDatasets splits =
      split_by_participant(samples, config.train.split_ratios, config.model.seed);
  std::cerr << "split: " << splits.train.size() << " train / " << splits.val.size()
            << " val / " << splits.test.size() << " test sessions\n";

  const TrainResult result = train(config.model, splits, config.train);
  save_checkpoint(*result.model, out_path);

  if (as_json) {
    nlohmann::json doc;
    doc["mean"] = metrics_to_json(result.metrics.mean);
    doc["stddev"] = metrics_to_json(result.metrics.stddev);
    nlohmann::json reps = nlohmann::json::array();
    for (const Metrics& m : result.metrics.per_repetition) reps.push_back(metrics_to_json(m));
    doc["per_repetition"] = std::move(reps);
    doc["best_val_losses"] = result.best_val_losses;
    doc["checkpoint"] = out_path;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("test metrics, mean over %zu repetitions (stddev):\n",
                result.metrics.per_repetition.size());
    std::printf("%-10s %.4f (%.4f)\n", "accuracy", result.metrics.mean.accuracy,
                result.metrics.stddev.accuracy);
    std::printf("%-10s %.4f (%.4f)\n", "precision", result.metrics.mean.precision,
                result.metrics.stddev.precision);
    std::printf("%-10s %.4f (%.4f)\n", "recall", result.metrics.mean.recall,
                result.metrics.stddev.recall);
    std::printf("%-10s %.4f (%.4f)\n", "micro_f1", result.metrics.mean.micro_f1,
                result.metrics.stddev.micro_f1);
    std::printf("checkpoint written to %s\n", out_path.c_str());
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, bool as_json) {
  const std::unique_ptr<Model> model = load_checkpoint(ckpt_path);
  const std::vector<SessionSample> samples = load_dataset(data_path);
  if (samples.empty()) throw DataError(data_path + ": empty dataset");
  const Metrics metrics = evaluate(*model, samples);
  if (as_json) {
    std::cout << metrics_to_json(metrics).dump(2) << "\n";
  } else {
    print_metrics_table(metrics);
  }
  return 0;
}

int cmd_inspect_graph(const std::string& ckpt_path, const std::string& data_path,
                      const std::string& sample_id) {
  const std::unique_ptr<Model> model = load_checkpoint(ckpt_path);
  const std::vector<SessionSample> samples = load_dataset(data_path);
  for (const SessionSample& sample : samples) {
    if (sample.session_id == sample_id) {
      std::cout << inspect_graph_json(*model, sample.sequence) << "\n";
      return 0;
    }
  }
  throw DataError("session \"" + sample_id + "\" not found in " + data_path);
}

int cmd_gen_synth(const std::string& out_path, std::size_t sessions, std::size_t participants,
                  std::uint64_t seed) {
  RngEngine rng(seed);
  const PlantedWorld world = make_planted_world(16, 4, rng);
  const std::vector<SessionSample> samples =
      generate_synthetic(world, sessions, participants, rng);
  save_dataset(samples, out_path);
  std::cerr << "wrote " << samples.size() << " sessions (p = " << world.num_rows() << ") to "
            << out_path << "\n";
  return 0;
}

int cmd_grad_check(const std::string& module) {
  const std::vector<GradSuiteEntry> entries = run_grad_suite(module);
  bool all_pass = true;
  for (const GradSuiteEntry& entry : entries) {
    std::printf("%-6s max rel err %.3e (tol %.0e)  %s\n", entry.name.c_str(),
                entry.max_rel_err, entry.tolerance, entry.pass ? "PASS" : "FAIL");
    all_pass = all_pass && entry.pass;
  }
  if (!all_pass) throw NumericError("gradient check failed");
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"AdaGTCN: adaptive graph temporal convolution for reading-task classification"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, ckpt_path, sample_id;
  std::string module = "all";
  std::size_t sessions = 400, participants = 8;
  std::uint64_t seed = 7;
  bool as_json = false;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  train_cmd->add_option("--config", config_path, "flat JSON config file");
  train_cmd->add_option("--data", data_path, "dataset path (.agt1 binary or .json)")
      ->required();
  train_cmd->add_option("--out", out_path, "checkpoint output path")->required();
  train_cmd->add_flag("--json", as_json, "emit metrics as JSON");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval_cmd->add_option("--data", data_path, "dataset path")->required();
  eval_cmd->add_flag("--json", as_json, "emit metrics as JSON");

  CLI::App* inspect_cmd =
      app.add_subcommand("inspect-graph", "dump the learned graph for one session");
  inspect_cmd->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  inspect_cmd->add_option("--data", data_path, "dataset path")->required();
  inspect_cmd->add_option("--sample", sample_id, "session id")->required();

  CLI::App* synth_cmd = app.add_subcommand("gen-synth", "generate a synthetic dataset");
  synth_cmd->add_option("--out", out_path, "output path")->required();
  synth_cmd->add_option("--sessions", sessions, "number of sessions");
  synth_cmd->add_option("--participants", participants, "number of participants");
  synth_cmd->add_option("--seed", seed, "generator seed");

  CLI::App* grad_cmd = app.add_subcommand("grad-check", "finite-difference layer checks");
  grad_cmd->add_option("--module", module, "all|agl|gconv|tconv|model");

  std::vector<char*> argv_copy;
  std::vector<std::string> storage(argv, argv + argc);
  for (std::string& arg : storage) argv_copy.push_back(arg.data());

  try {
    app.parse(argc, argv_copy.data());
    if (train_cmd->parsed()) return cmd_train(config_path, data_path, out_path, as_json);
    if (eval_cmd->parsed()) return cmd_eval(ckpt_path, data_path, as_json);
    if (inspect_cmd->parsed()) return cmd_inspect_graph(ckpt_path, data_path, sample_id);
    if (synth_cmd->parsed()) return cmd_gen_synth(out_path, sessions, participants, seed);
    if (grad_cmd->parsed()) return cmd_grad_check(module);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace adagtcn
