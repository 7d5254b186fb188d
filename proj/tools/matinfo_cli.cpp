// Command-line front end. Everything goes through the C API in matinfo.h;
// this file only parses arguments, moves strings around and maps statuses to
// exit codes (0 ok, 1 usage, 2 data, 3 numeric, 4 verification failure).

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "matinfo.h"

namespace {

struct StringOut {
  char* s = nullptr;
  ~StringOut() { mit_string_free(s); }
  std::string str() const { return s ? s : ""; }
};

int fail(mit_status status) {
  std::cerr << "error: " << mit_last_error() << "\n";
  return static_cast<int>(status);
}

bool emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return true;
  }
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return false;
  }
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  return true;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

mit_kernel_kind kernel_from_string(const std::string& s) {
  return s == "gram" ? MIT_KERNEL_GRAM : MIT_KERNEL_COVARIANCE;
}

std::string default_run_dir(const std::string& command, const std::string& seed) {
  const char* root = std::getenv("MATINFO_OUTPUT_ROOT");
  const std::string base = root && *root ? root : "runs";
  return base + "/" + command + "-seed" + (seed.empty() ? "1" : seed);
}

struct ConfigHandle {
  mit_config* cfg = nullptr;
  ~ConfigHandle() { mit_config_free(cfg); }
};

// Flag overrides applied on top of an optional config file.
struct TrainArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string out_dir;

  mit_status build(ConfigHandle& handle) const {
    mit_status st = config_path.empty()
                        ? mit_config_create(&handle.cfg)
                        : mit_config_load(config_path.c_str(), &handle.cfg);
    if (st != MIT_OK) return st;
    for (const auto& [key, value] : overrides) {
      st = mit_config_set(handle.cfg, key.c_str(), value.c_str());
      if (st != MIT_OK) return st;
    }
    return MIT_OK;
  }
};

void add_config_options(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value config file");
  static const std::vector<std::pair<std::string, std::string>> kFlagKeys = {
      {"--dataset", "dataset"},         {"--n-samples", "n_samples"},
      {"--patch-count", "patch_count"}, {"--patch-size", "patch_size"},
      {"--latent-dim", "latent_dim"},   {"--clusters", "clusters"},
      {"--data-noise", "data_noise"},   {"--encoder", "encoder"},
      {"--hidden-dim", "hidden_dim"},   {"--d", "feature_dim"},
      {"--loss", "loss"},               {"--lambda", "lambda"},
      {"--mu", "mu"},                   {"--temperature", "temperature"},
      {"--mask-ratio", "mask_ratio"},   {"--aug", "augmentation"},
      {"--aug-noise", "aug_noise_sigma"},
      {"--aug-dropout", "aug_dropout_q"},
      {"--aug-mask-ratio", "aug_mask_ratio"},
      {"--lr", "learning_rate"},        {"--steps", "steps"},
      {"--batch", "batch_size"},        {"--record-every", "record_every"},
      {"--kernel", "kernel"},           {"--seed", "seed"},
      {"--store-features", "store_features"},
  };
  for (const auto& [flag, key] : kFlagKeys) {
    const std::string key_copy = key;
    auto* opt = cmd->add_option_function<std::string>(
        flag,
        [&args, key_copy](const std::string& value) {
          args.overrides.emplace_back(key_copy, value);
        },
        "config override (" + key + ")");
    opt->type_name("VALUE");
  }
}

std::string seed_of(const TrainArgs& args) {
  for (auto it = args.overrides.rbegin(); it != args.overrides.rend(); ++it)
    if (it->first == "seed") return it->second;
  return "";
}

int cmd_measure(const std::vector<std::string>& files,
                const std::string& kernel, std::vector<double> alphas,
                std::vector<double> mus, const std::string& out_path) {
  if (alphas.empty()) alphas.push_back(1.0);
  if (mus.empty()) mus.push_back(1.0);

  mit_matrix* a = nullptr;
  mit_matrix* b = nullptr;
  mit_status st = mit_matrix_from_csv(files[0].c_str(), &a);
  if (st != MIT_OK) return fail(st);
  if (files.size() == 2) {
    st = mit_matrix_from_csv(files[1].c_str(), &b);
    if (st != MIT_OK) {
      mit_matrix_free(a);
      return fail(st);
    }
  }
  StringOut json;
  st = mit_measure_report(a, files[0].c_str(), b,
                          files.size() == 2 ? files[1].c_str() : nullptr,
                          kernel_from_string(kernel), alphas.data(),
                          static_cast<int>(alphas.size()), mus.data(),
                          static_cast<int>(mus.size()), &json.s);
  mit_matrix_free(a);
  mit_matrix_free(b);
  if (st != MIT_OK) return fail(st);
  return emit(json.str(), out_path) ? 0 : 2;
}

int cmd_trajectory(const std::string& run_dir, const std::string& kernel,
                   double alpha, double mu, const std::string& out_path) {
  StringOut tsv;
  const mit_status st = mit_trajectory_scan(
      run_dir.c_str(), kernel_from_string(kernel), alpha, mu, &tsv.s);
  if (st != MIT_OK) return fail(st);
  return emit(tsv.str(), out_path) ? 0 : 2;
}

int cmd_train(const TrainArgs& args) {
  ConfigHandle handle;
  mit_status st = args.build(handle);
  if (st != MIT_OK) return fail(st);
  const std::string run_dir =
      args.out_dir.empty() ? default_run_dir("train", seed_of(args)) : args.out_dir;
  StringOut summary;
  st = mit_train(handle.cfg, run_dir.c_str(), &summary.s);
  if (summary.s) std::cout << summary.str() << "\n";
  std::cerr << "run directory: " << run_dir << "\n";
  if (st != MIT_OK) return fail(st);
  return 0;
}

int cmd_sweep(const TrainArgs& args, const std::string& mu_list) {
  ConfigHandle handle;
  mit_status st = args.build(handle);
  if (st != MIT_OK) return fail(st);
  const std::vector<double> mus = parse_list(mu_list);
  if (mus.empty()) {
    std::cerr << "error: --mu-list is empty\n";
    return 1;
  }
  const std::string run_dir =
      args.out_dir.empty() ? default_run_dir("sweep", seed_of(args)) : args.out_dir;
  StringOut table;
  st = mit_mu_sweep(handle.cfg, mus.data(), static_cast<int>(mus.size()),
                    run_dir.c_str(), &table.s);
  if (st != MIT_OK) return fail(st);
  std::cout << table.str();
  std::cerr << "run directory: " << run_dir << "\n";
  return 0;
}

int cmd_verify(const std::string& sizes_csv, int trials, std::uint64_t seed,
               bool json, const std::string& out_path) {
  std::vector<int> sizes;
  for (double v : parse_list(sizes_csv)) sizes.push_back(static_cast<int>(v));
  StringOut report;
  int ok = 0;
  const mit_status st = mit_verify(sizes.empty() ? nullptr : sizes.data(),
                                   static_cast<int>(sizes.size()), trials, seed,
                                   json ? 1 : 0, &report.s, &ok);
  if (st != MIT_OK && st != MIT_ERR_VERIFY) return fail(st);
  if (!emit(report.str(), out_path)) return 2;
  if (st == MIT_ERR_VERIFY) {
    std::cerr << "error: " << mit_last_error() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix information measures, losses and training sandbox"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mit_version()));

  // measure
  auto* measure = app.add_subcommand(
      "measure", "compute measures on one or two feature CSV files");
  std::vector<std::string> files;
  std::string kernel = "covariance";
  std::string alpha_list = "1";
  std::string mu_list_measure = "1";
  std::string out_path;
  measure->add_option("files", files, "feature CSV (rows = dims, cols = samples)")
      ->required()
      ->expected(1, 2);
  measure->add_option("--kernel", kernel, "covariance|gram")
      ->check(CLI::IsMember({"covariance", "gram"}));
  measure->add_option("--alpha", alpha_list, "entropy orders, comma-separated");
  measure->add_option("--mu", mu_list_measure,
                      "TCR coefficients, comma-separated");
  measure->add_option("--out", out_path, "write report here instead of stdout");

  // trajectory
  auto* trajectory = app.add_subcommand(
      "trajectory", "recompute measures over step_<k>.csv checkpoints");
  std::string run_dir;
  std::string traj_kernel = "covariance";
  double traj_alpha = 1.0, traj_mu = 1.0;
  std::string traj_out;
  trajectory->add_option("run_dir", run_dir, "run directory")->required();
  trajectory->add_option("--kernel", traj_kernel, "covariance|gram")
      ->check(CLI::IsMember({"covariance", "gram"}));
  trajectory->add_option("--alpha", traj_alpha, "entropy order");
  trajectory->add_option("--mu", traj_mu, "TCR coefficient");
  trajectory->add_option("--out", traj_out, "write TSV here instead of stdout");

  // train
  auto* train = app.add_subcommand("train", "run the training sandbox");
  TrainArgs train_args;
  add_config_options(train, train_args);
  train->add_option("--out", train_args.out_dir,
                    "run directory (default $MATINFO_OUTPUT_ROOT/train-seed<seed>)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "masked runs over a list of mu");
  TrainArgs sweep_args;
  std::string mu_list = "0.1,0.5,0.75,1,1.25,1.5,3";
  add_config_options(sweep, sweep_args);
  sweep->add_option("--mu-list", mu_list, "comma-separated TCR coefficients");
  sweep->add_option("--out", sweep_args.out_dir, "run directory");

  // verify
  auto* verify = app.add_subcommand(
      "verify", "run the executable property suite");
  std::string sizes_csv = "2,4,8,16";
  int trials = 1000;
  std::uint64_t vseed = 0;
  bool vjson = false;
  std::string verify_out;
  verify->add_option("--n", sizes_csv, "comma-separated kernel sizes");
  verify->add_option("--trials", trials, "random trials per property");
  verify->add_option("--seed", vseed, "master seed");
  verify->add_flag("--json", vjson, "emit the JSON report");
  verify->add_option("--out", verify_out, "write report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (measure->parsed())
      return cmd_measure(files, kernel, parse_list(alpha_list),
                         parse_list(mu_list_measure), out_path);
    if (trajectory->parsed())
      return cmd_trajectory(run_dir, traj_kernel, traj_alpha, traj_mu, traj_out);
    if (train->parsed()) return cmd_train(train_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, mu_list);
    if (verify->parsed())
      return cmd_verify(sizes_csv, trials, vseed, vjson, verify_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
