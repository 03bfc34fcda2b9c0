// Copyright 2026 The ENorm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "enorm_cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "enorm/architectures.hpp"
#include "enorm/balancer.hpp"
#include "enorm/diagnostics.hpp"
#include "enorm/errors.hpp"
#include "enorm/io.hpp"
#include "enorm/trainer.hpp"

namespace enorm::cli {
namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

struct BalanceArgs {
  std::string net, out, report;
  double p = 2.0;
  std::size_t cycles = 100;
  double tol = 1e-9;
  std::optional<double> uniform_c;
  bool adaptive = false;
};

int run_balance(const BalanceArgs& a) {
  Network net = load_network(a.net);
  BalanceOptions options;
  options.p = a.p;
  options.max_cycles = a.cycles;
  options.tol = a.tol;
  if (a.uniform_c) options.mode = AsymmetricMode::uniform(*a.uniform_c);
  if (a.adaptive) options.mode = AsymmetricMode::adaptive();
  const BalanceReport report = balance(net, options);
  save_network(net, a.out);
  if (!a.report.empty()) {
    auto csv = open_out(a.report);
    write_balance_report_csv(csv, report);
  }
  fmt::print("cycles: {}\nconverged: {}\ninitial_lp_norm: {:.17g}\nfinal_lp_norm: {:.17g}\n",
             report.cycles_run, report.converged ? "yes" : "no", report.initial_lp_norm,
             report.lp_norm_per_cycle.empty() ? report.initial_lp_norm
                                              : report.lp_norm_per_cycle.back());
  return kExitOk;
}

struct TrainArgs {
  std::string config, out;
};

int run_train(const TrainArgs& a) {
  const fs::path config_path(a.config);
  const RunConfig config = load_run_config(config_path);
  const fs::path base = config_path.parent_path();
  fs::path out_dir;
  if (!a.out.empty()) {
    out_dir = a.out;
  } else if (config.output_dir) {
    out_dir = *config.output_dir;
  } else {
    throw Error("no output directory: pass --out or set output_dir");
  }
  fs::create_directories(out_dir);

  const Dataset data = make_dataset(config, base);
  Network net = make_network(config, data, base);
  const TrainResult result = train_loop(net, data, config.train);

  save_network(net, out_dir / "network.enorm");
  {
    auto csv = open_out(out_dir / "metrics.csv");
    write_metrics_csv(csv, result.steps);
  }
  {
    auto csv = open_out(out_dir / "epochs.csv");
    write_epoch_csv(csv, result.epochs);
  }
  for (const EpochMetrics& e : result.epochs) {
    auto csv = open_out(out_dir / fmt::format("energy_epoch_{:03}.csv", e.epoch));
    write_energy_csv(csv, e.energy);
  }
  const EpochMetrics& last = result.epochs.back();
  fmt::print("steps: {}\nfinal_mean_loss: {:.17g}\nglobal_l2_norm: {:.17g}\n",
             result.steps.size(), last.mean_loss, last.global_l2_norm);
  if (last.accuracy) fmt::print("accuracy: {:.6f}\n", *last.accuracy);
  return kExitOk;
}

struct InspectArgs {
  std::string net, energy;
  bool count_elements = false;
};

int run_inspect(const InspectArgs& a) {
  const Network net = load_network(a.net);
  fmt::print("dtype: {}\nlayers: {}\nparameters: {}\nglobal_l2_norm: {:.17g}\n",
             net.dtype == ScalarType::kF32 ? "f32" : "f64", net.layers.size(),
             count_parameters(net), global_lp_norm(net, 2.0));
  if (a.count_elements) {
    fmt::print("normalized_elements: {}\n", count_normalized_elements(net));
  }
  if (!a.energy.empty()) {
    auto csv = open_out(a.energy);
    write_energy_csv(csv, energy_profile(net));
  }
  return kExitOk;
}

struct CheckArgs {
  std::string net_a, net_b;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::size_t samples = 100;
};

int run_check(const CheckArgs& a) {
  const Network na = load_network(a.net_a);
  const Network nb = load_network(a.net_b);
  const Activation x = random_batch(na.input_shape, a.samples, a.seed);
  const EquivalenceVerdict v = check_equivalence(na, nb, x, a.tol);
  fmt::print("max_abs_output_diff: {:.17g}\nverdict: {}\n", v.max_abs_output_diff,
             v.pass ? "equivalent" : "different");
  return v.pass ? kExitOk : kExitCheckFailed;
}

struct CanonArgs {
  std::string net;
  std::size_t rescalings = 5;
  std::uint64_t seed = 0;
  double tol = 1e-6;
};

int run_canon(const CanonArgs& a) {
  const Network net = load_network(a.net);
  CanonicalizationOptions options;
  options.rescalings = a.rescalings;
  options.seed = a.seed;
  options.tol = a.tol;
  const CanonicalizationResult r = canonicalization_check(net, options);
  fmt::print("max_deviation: {:.17g}\nall_converged: {}\nverdict: {}\n", r.max_deviation,
             r.all_converged ? "yes" : "no", r.pass ? "canonical" : "not canonical");
  return r.pass ? kExitOk : kExitCheckFailed;
}

struct GenerateArgs {
  std::string arch, out, dtype = "f64";
  std::uint64_t seed = 0;
  bool no_bias = false;
  std::size_t classes = 1000;
  std::size_t image = 224;
};

int run_generate(const GenerateArgs& a) {
  const ScalarType dtype = a.dtype == "f32" ? ScalarType::kF32 : ScalarType::kF64;
  Network net;
  if (a.arch == "resnet18c") {
    net = make_resnet18c(a.classes, a.image, a.seed, dtype);
  } else if (a.arch.rfind("fc:", 0) == 0) {
    net = make_fc(parse_widths(a.arch.substr(3)), !a.no_bias, Init::kHe, a.seed, dtype);
  } else {
    throw Error(fmt::format("unknown architecture '{}' (use resnet18c or fc:W0-W1-...)",
                            a.arch));
  }
  save_network(net, a.out);
  fmt::print("layers: {}\nparameters: {}\n", net.layers.size(), count_parameters(net));
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Equi-normalization of ReLU network weights"};
  app.require_subcommand(1);

  BalanceArgs balance_args;
  auto* balance_cmd = app.add_subcommand("balance", "balance a network and write the result");
  balance_cmd->add_option("--net", balance_args.net, "input network")->required();
  balance_cmd->add_option("--p", balance_args.p, "norm exponent")->capture_default_str();
  balance_cmd->add_option("--cycles", balance_args.cycles, "maximum cycles")
      ->capture_default_str();
  balance_cmd->add_option("--tol", balance_args.tol, "stop when max |d - 1| < tol")
      ->capture_default_str();
  auto* uniform = balance_cmd->add_option("--uniform-c", balance_args.uniform_c,
                                          "uniform asymmetric scaling constant");
  auto* adaptive =
      balance_cmd->add_flag("--adaptive", balance_args.adaptive, "adaptive scaling");
  uniform->excludes(adaptive);
  balance_cmd->add_option("--out", balance_args.out, "output network")->required();
  balance_cmd->add_option("--report", balance_args.report, "per-cycle CSV report");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train from a run configuration");
  train_cmd->add_option("--config", train_args.config, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "output directory");

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect", "print network statistics");
  inspect_cmd->add_option("--net", inspect_args.net, "network")->required();
  inspect_cmd->add_option("--energy", inspect_args.energy, "energy profile CSV");
  inspect_cmd->add_flag("--count-elements", inspect_args.count_elements,
                        "print the number of normalized weight elements");

  CheckArgs check_args;
  auto* check_cmd = app.add_subcommand("check", "test two networks for equal outputs");
  check_cmd->add_option("--net-a", check_args.net_a, "first network")->required();
  check_cmd->add_option("--net-b", check_args.net_b, "second network")->required();
  check_cmd->add_option("--tol", check_args.tol, "max abs output difference")
      ->capture_default_str();
  check_cmd->add_option("--seed", check_args.seed, "input batch seed")->capture_default_str();
  check_cmd->add_option("--samples", check_args.samples, "batch size")->capture_default_str();

  CanonArgs canon_args;
  auto* canon_cmd =
      app.add_subcommand("canon", "check that random rescalings balance to one point");
  canon_cmd->add_option("--net", canon_args.net, "network")->required();
  canon_cmd->add_option("--rescalings", canon_args.rescalings, "number of rescalings")
      ->capture_default_str();
  canon_cmd->add_option("--seed", canon_args.seed, "rescaling seed")->capture_default_str();
  canon_cmd->add_option("--tol", canon_args.tol, "max relative deviation")
      ->capture_default_str();

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "write a freshly initialized network");
  gen_cmd->add_option("--arch", gen_args.arch, "resnet18c or fc:W0-W1-...")->required();
  gen_cmd->add_option("--seed", gen_args.seed, "initialization seed")->capture_default_str();
  gen_cmd->add_option("--dtype", gen_args.dtype, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  gen_cmd->add_flag("--no-bias", gen_args.no_bias, "omit biases (fc only)");
  gen_cmd->add_option("--classes", gen_args.classes, "classifier width (resnet18c)")
      ->capture_default_str();
  gen_cmd->add_option("--image", gen_args.image, "input resolution (resnet18c)")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen_args.out, "output network")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*balance_cmd) return run_balance(balance_args);
    if (*train_cmd) return run_train(train_args);
    if (*inspect_cmd) return run_inspect(inspect_args);
    if (*check_cmd) return run_check(check_args);
    if (*canon_cmd) return run_canon(canon_args);
    if (*gen_cmd) return run_generate(gen_args);
  } catch (const DisconnectedNeuronError& e) {
    fmt::print(std::cerr, "error: disconnected neuron: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace enorm::cli
