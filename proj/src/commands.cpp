#include "flicker/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "flicker/datagen.hpp"
#include "flicker/detector.hpp"
#include "flicker/errors.hpp"
#include "flicker/evaluation.hpp"
#include "flicker/ingest.hpp"
#include "flicker/nn/checkpoint.hpp"
#include "flicker/nn/train.hpp"
#include "flicker/runmeta.hpp"
#include "flicker/version.hpp"

namespace flicker::cli {

namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

/// Reads `key=value` lines from any --config FILE among the args and turns
/// them into trailing `--key=value` tokens for options the user did not pass
/// explicitly. Repeated keys repeat the option (vector options accumulate).
std::vector<std::string> apply_config_defaults(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + i);
    } else {
      ++i;
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw DataError("cannot open config file: " + config_path);
  auto given = [&args](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (!given("--" + key)) args.push_back("--" + key + "=" + value);
  }
  return args;
}

/// Gathers checkpoint files from --ensemble arguments (files or directories
/// holding *.ckpt), pairs them with window fractions in input-length order.
detector::EnsembleSpec load_ensemble(const std::vector<std::string>& paths,
                                     std::vector<double> fractions,
                                     double stride_fraction, int threads) {
  std::vector<std::string> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".ckpt")
          found.push_back(entry.path().string());
      std::sort(found.begin(), found.end());
      if (found.empty())
        throw DataError("no .ckpt files in ensemble directory: " + p);
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) throw DataError("ensemble is empty");

  detector::EnsembleSpec spec;
  spec.stride_fraction = stride_fraction;
  spec.threads = threads;
  for (const auto& f : files) {
    detector::EnsembleMember member;
    member.checkpoint = nn::load_checkpoint(f);
    spec.members.push_back(std::move(member));
  }
  std::stable_sort(spec.members.begin(), spec.members.end(),
                   [](const auto& a, const auto& b) {
                     return a.checkpoint.arch.input_length <
                            b.checkpoint.arch.input_length;
                   });

  if (fractions.empty()) {
    if (spec.members.size() == detector::kDefaultFractions.size()) {
      fractions.assign(detector::kDefaultFractions.begin(),
                       detector::kDefaultFractions.end());
    } else if (spec.members.size() == 1) {
      fractions = {0.16};
    } else {
      throw DataError(
          "--fractions required: ensemble has neither 1 nor 6 members");
    }
  }
  if (fractions.size() != spec.members.size())
    throw DataError("--fractions count must match the ensemble member count");
  for (std::size_t i = 0; i < fractions.size(); ++i)
    spec.members[i].window_fraction = fractions[i];
  return spec;
}

int cmd_generate(std::size_t length, std::size_t per_class, std::uint64_t seed,
                 const std::string& out_dir, std::size_t var_window,
                 double sigma_factor, int threads, bool csv_export) {
  Timer timer;
  datagen::DatasetManifest manifest;
  manifest.native_length = length;
  manifest.count_per_class = per_class;
  manifest.var_window = var_window;
  manifest.base_seed = seed;
  manifest.sigma_factor = sigma_factor;
  datagen::build_dataset(manifest, out_dir, threads, csv_export);

  RunMeta meta;
  meta.command = "generate";
  meta.add("length", static_cast<unsigned long long>(length));
  meta.add("per-class", static_cast<unsigned long long>(per_class));
  meta.add("seed", static_cast<unsigned long long>(seed));
  meta.add("out", out_dir);
  meta.add("var-window", static_cast<unsigned long long>(var_window));
  meta.add("sigma-factor", sigma_factor);
  meta.add("threads", static_cast<long long>(threads));
  meta.add("csv", csv_export ? "true" : "false");
  meta.write((fs::path(out_dir) / "run.meta").string());

  std::printf("generated %zu flicker + %zu non-flicker samples (length %zu) in %.1f s -> %s\n",
              per_class, per_class, length, timer.seconds(), out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_path,
              double val_fraction, int max_epochs, int batch, double lr,
              int patience, int conv_kernel, double dropout,
              std::uint64_t seed, int threads, std::string history_path) {
  Timer timer;
  const auto data = datagen::load_dataset(data_dir);

  nn::Architecture arch;
  arch.input_length = data.length;
  arch.conv_kernel = conv_kernel;
  arch.dropout_rate = dropout;
  nn::Net<float> net(arch);
  net.init_weights(seed ^ 0x5DEECE66Dull);

  nn::TrainConfig config;
  config.lr = lr;
  config.batch_size = batch;
  config.max_epochs = max_epochs;
  config.patience = patience;
  config.val_fraction = val_fraction;
  config.shuffle_seed = seed;
  config.threads = threads;

  const auto result = nn::train(net, data, config);

  nn::Checkpoint ckpt;
  ckpt.arch = arch;
  ckpt.weights = result.best_weights;
  ckpt.history = result.history;
  nn::save_checkpoint(ckpt, out_path);

  if (history_path.empty()) history_path = out_path + ".history.csv";
  {
    std::ofstream hist(history_path);
    if (!hist) throw DataError("cannot open for writing: " + history_path);
    hist << "epoch,loss,accuracy,val_loss,val_accuracy\n";
    char buf[160];
    for (std::size_t e = 0; e < result.history.size(); ++e) {
      const auto& h = result.history[e];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", e + 1,
                    h.loss, h.accuracy, h.val_loss, h.val_accuracy);
      hist << buf;
    }
  }

  RunMeta meta;
  meta.command = "train";
  meta.add("data", data_dir);
  meta.add("out", out_path);
  meta.add("val-fraction", val_fraction);
  meta.add("max-epochs", static_cast<long long>(max_epochs));
  meta.add("batch", static_cast<long long>(batch));
  meta.add("lr", lr);
  meta.add("patience", static_cast<long long>(patience));
  meta.add("conv-kernel", static_cast<long long>(conv_kernel));
  meta.add("dropout", dropout);
  meta.add("seed", static_cast<unsigned long long>(seed));
  meta.add("threads", static_cast<long long>(threads));
  meta.add("history", history_path);
  meta.write(out_path + ".run.meta");

  for (std::size_t e = 0; e < result.history.size(); ++e) {
    const auto& h = result.history[e];
    std::printf("epoch %zu: loss %.4f acc %.4f val_loss %.4f val_acc %.4f%s\n",
                e + 1, h.loss, h.accuracy, h.val_loss, h.val_accuracy,
                static_cast<int>(e) == result.best_epoch ? "  *best*" : "");
  }
  std::printf("trained in %.1f s -> %s (best epoch %d)\n", timer.seconds(),
              out_path.c_str(), result.best_epoch + 1);
  return 0;
}

int cmd_evaluate(const std::string& system_arg,
                 const std::vector<std::string>& ensemble_paths,
                 std::vector<double> fractions, double stride,
                 std::size_t dl_replicates, std::size_t var_replicates,
                 std::size_t steps, double dt, std::size_t var_window,
                 std::uint64_t seed, int threads, const std::string& out_dir) {
  Timer timer;
  const auto ensemble = load_ensemble(ensemble_paths, fractions, stride, threads);
  fs::create_directories(out_dir);

  std::vector<dynamics::Family> systems;
  if (system_arg == "all") {
    systems = {dynamics::Family::cubic,   dynamics::Family::exponential,
               dynamics::Family::tanh,    dynamics::Family::hill,
               dynamics::Family::logistic, dynamics::Family::arctan};
  } else {
    systems = {dynamics::family_from_name(system_arg)};
  }

  std::ofstream summary(fs::path(out_dir) / "summary.csv");
  summary << "system,dl_auc,var_auc\n";
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const auto family = systems[i];
    const std::uint64_t system_seed = seed + (static_cast<std::uint64_t>(i) << 33);
    const auto cmp = eval::compare_detectors(family, dl_replicates, var_replicates,
                                             ensemble, system_seed, steps, dt,
                                             threads, var_window);
    const std::string name = dynamics::family_name(family);
    eval::write_roc_csv(cmp.dl, (fs::path(out_dir) / ("roc_dl_" + name + ".csv")).string());
    eval::write_roc_csv(cmp.var, (fs::path(out_dir) / ("roc_var_" + name + ".csv")).string());
    char buf[120];
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", name.c_str(), cmp.dl.auc,
                  cmp.var.auc);
    summary << buf;
    std::printf("%-12s DL auc %.4f | variance auc %.4f\n", name.c_str(),
                cmp.dl.auc, cmp.var.auc);
  }

  RunMeta meta;
  meta.command = "evaluate";
  meta.add("system", system_arg);
  for (const auto& p : ensemble_paths) meta.add("ensemble", p);
  for (const auto& m : ensemble.members)
    meta.add("fractions", m.window_fraction);
  meta.add("stride", stride);
  meta.add("dl-replicates", static_cast<unsigned long long>(dl_replicates));
  meta.add("var-replicates", static_cast<unsigned long long>(var_replicates));
  meta.add("steps", static_cast<unsigned long long>(steps));
  meta.add("dt", dt);
  meta.add("var-window", static_cast<unsigned long long>(var_window));
  meta.add("seed", static_cast<unsigned long long>(seed));
  meta.add("threads", static_cast<long long>(threads));
  meta.add("out", out_dir);
  meta.write((fs::path(out_dir) / "run.meta").string());

  std::printf("evaluation finished in %.1f s -> %s\n", timer.seconds(),
              out_dir.c_str());
  return 0;
}

int cmd_detect(const std::string& input, const std::string& time_col,
               const std::string& value_col,
               const std::vector<std::string>& ensemble_paths,
               std::vector<double> fractions, double stride,
               std::size_t target_len, const std::string& time_axis,
               char delimiter, int threads, const std::string& out_path) {
  Timer timer;
  const auto ensemble = load_ensemble(ensemble_paths, fractions, stride, threads);

  ingest::LoadOptions options;
  options.delimiter = delimiter;
  if (time_axis == "forward") options.direction_override = 0;
  else if (time_axis == "reversed") options.direction_override = 1;

  const auto series = ingest::load_csv(input, time_col, value_col, options);
  if (series.dropped_rows > 0)
    std::printf("dropped %zu unusable rows from %s\n", series.dropped_rows,
                input.c_str());
  const auto values = ingest::forward_time_values(series, target_len);
  const auto trace = detector::scan_series(values, ensemble);
  detector::write_trace_csv(trace, out_path);

  RunMeta meta;
  meta.command = "detect";
  meta.add("input", input);
  meta.add("time-col", time_col);
  meta.add("value-col", value_col);
  for (const auto& p : ensemble_paths) meta.add("ensemble", p);
  for (const auto& m : ensemble.members)
    meta.add("fractions", m.window_fraction);
  meta.add("stride", stride);
  meta.add("target-len", static_cast<unsigned long long>(target_len));
  meta.add("time-axis", time_axis);
  meta.add("delimiter", std::string(1, delimiter));
  meta.add("threads", static_cast<long long>(threads));
  meta.add("out", out_path);
  meta.write(out_path + ".run.meta");

  double max_p = 0;
  for (double p : trace.p_flicker) max_p = std::max(max_p, p);
  std::printf("trace of %zu windows (max p_flicker %.4f, s_DL %.4f) in %.1f s -> %s\n",
              trace.times.size(), max_p, detector::dl_score(trace),
              timer.seconds(), out_path.c_str());
  return 0;
}

int cmd_simulate(const std::string& system_arg, const std::string& coeffs_arg,
                 double p_start, bool p_end_set, double p_end, bool b_start_set,
                 double b_start, bool b_end_set, double b_end, bool sigma_set,
                 double sigma, bool null_bump, double bump_factor,
                 std::size_t steps, double dt, bool x0_set, double x0,
                 std::uint64_t seed, const std::string& out_path) {
  dynamics::Drift drift;
  double control_start = 0, control_end = 0;
  bool ramp = false;
  double sigma_base = sigma;

  if (system_arg == "poly") {
    dynamics::PolyDrift pd;
    std::istringstream in(coeffs_arg);
    std::string cell;
    std::vector<double> cs;
    while (std::getline(in, cell, ',')) cs.push_back(std::stod(cell));
    if (cs.size() != 7)
      throw DataError("--coeffs expects 7 comma-separated values a,b,c,d,e,f,g");
    pd.a = cs[0]; pd.b = cs[1]; pd.c = cs[2]; pd.d = cs[3];
    pd.e = cs[4]; pd.f = cs[5]; pd.g = cs[6];
    pd.p = p_start;
    drift = pd;
    control_start = p_start;
    ramp = p_end_set;
    control_end = ramp ? p_end : p_start;
    if (!sigma_set) throw DataError("--sigma is required for --system poly");
  } else {
    const auto family = dynamics::family_from_name(system_arg);
    const auto defaults =
        eval::default_spec(family, eval::Regime::flickering, 1, seed);
    control_start = b_start_set ? b_start : defaults.b_start;
    if (b_end_set) {
      ramp = true;
      control_end = b_end;
    } else if (!null_bump) {
      ramp = true;
      control_end = defaults.b_end;
    } else {
      control_end = control_start;
    }
    sigma_base = sigma_set ? sigma : defaults.sigma_base;
    drift = dynamics::make_named(family, control_start);
  }

  const auto param = ramp ? dynamics::Schedule::linear_ramp(control_start, control_end)
                          : dynamics::Schedule::constant(control_start);
  const auto noise =
      null_bump ? dynamics::Schedule::triangular_bump(
                      sigma_base, bump_factor * sigma_base, {1.0 / 3.0, 2.0 / 3.0})
                : dynamics::Schedule::constant(sigma_base);

  double start_state = x0;
  if (!x0_set) {
    const auto roots = dynamics::equilibria(drift);
    if (roots.empty())
      throw NumericError("simulate: no equilibrium to start from; pass --x0");
    start_state = roots.back();
  }

  const auto traj = dynamics::simulate(drift, param, noise, start_state, steps,
                                       dt, seed);
  dynamics::write_trajectory_csv(traj, out_path);

  RunMeta meta;
  meta.command = "simulate";
  meta.add("system", system_arg);
  if (system_arg == "poly") meta.add("coeffs", coeffs_arg);
  meta.add("control-start", control_start);
  meta.add("control-end", control_end);
  meta.add("sigma", sigma_base);
  meta.add("null-bump", null_bump ? "true" : "false");
  meta.add("bump-factor", bump_factor);
  meta.add("steps", static_cast<unsigned long long>(steps));
  meta.add("dt", dt);
  meta.add("x0", start_state);
  meta.add("seed", static_cast<unsigned long long>(seed));
  meta.add("out", out_path);
  meta.write(out_path + ".run.meta");

  std::printf("simulated %zu steps -> %s\n", steps, out_path.c_str());
  return 0;
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{std::string(kVersion) +
               " - deep-learning early warnings of flickering in time series"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Build a labeled synthetic training set");
  std::size_t gen_length = 5000, gen_per_class = 2000, gen_var_window = 1000;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  double gen_sigma_factor = 1.2;
  int gen_threads = 0;
  bool gen_csv = false;
  gen->add_option("--length", gen_length, "Series length per sample")->capture_default_str();
  gen->add_option("--per-class", gen_per_class, "Samples per class")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--seed", gen_seed, "Base seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--var-window", gen_var_window, "Rolling variance window")->capture_default_str();
  gen->add_option("--sigma-factor", gen_sigma_factor, "Noise rule sigma = factor * x0")->capture_default_str();
  gen->add_option("--threads", gen_threads, "Worker threads (0 = auto)")->capture_default_str();
  gen->add_flag("--csv", gen_csv, "Also export channels as CSV");

  // train
  auto* train = app.add_subcommand("train", "Train a classifier on a generated dataset");
  std::string train_data, train_out, train_history, train_resume;
  double train_val_fraction = 0.2, train_lr = 0.01, train_dropout = 0.05;
  int train_epochs = 5, train_batch = 32, train_patience = 2, train_kernel = 300,
      train_threads = 0;
  std::uint64_t train_seed = 0;
  train->add_option("--data", train_data, "Dataset directory from `generate`")->required();
  train->add_option("--out", train_out, "Checkpoint output path")->required();
  train->add_option("--val-fraction", train_val_fraction, "Validation fraction")->capture_default_str();
  train->add_option("--max-epochs", train_epochs, "Epoch budget")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--batch", train_batch, "Minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--lr", train_lr, "Adam learning rate")->capture_default_str();
  train->add_option("--patience", train_patience, "Early-stopping patience (epochs)")->capture_default_str();
  train->add_option("--conv-kernel", train_kernel, "Convolution kernel size")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--dropout", train_dropout, "Dropout rate")->capture_default_str();
  train->add_option("--seed", train_seed, "Seed (shuffling, init, dropout)")->capture_default_str();
  train->add_option("--threads", train_threads, "Worker threads (0 = auto)")->capture_default_str();
  train->add_option("--history", train_history, "Training history CSV path");
  train->add_option("--resume", train_resume, "(not supported)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "ROC comparison on the six held-out systems");
  std::string eval_system, eval_out = "evaluation";
  std::vector<std::string> eval_ensemble;
  std::vector<double> eval_fractions;
  double eval_stride = 0.1, eval_dt = 0.01;
  std::size_t eval_dl_reps = 50, eval_var_reps = 100, eval_reps = 0,
              eval_steps = 62500, eval_var_window = 1000;
  std::uint64_t eval_seed = 0;
  int eval_threads = 0;
  evaluate->add_option("--system", eval_system, "cubic|exponential|tanh|hill|logistic|arctan|all")->required();
  evaluate->add_option("--ensemble", eval_ensemble, "Checkpoint files or directories")->required();
  evaluate->add_option("--fractions", eval_fractions, "Window fractions (one per member)");
  evaluate->add_option("--stride", eval_stride, "Stride as a fraction of the window")->capture_default_str();
  evaluate->add_option("--replicates", eval_reps, "Replicates per class for both detectors")->check(CLI::PositiveNumber);
  evaluate->add_option("--dl-replicates", eval_dl_reps, "DL replicates per class")->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--var-replicates", eval_var_reps, "Variance replicates per class")->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--steps", eval_steps, "Euler steps per trajectory")->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--dt", eval_dt, "Time step")->capture_default_str();
  evaluate->add_option("--var-window", eval_var_window, "Baseline rolling-variance window")->capture_default_str();
  evaluate->add_option("--seed", eval_seed, "Base seed")->capture_default_str();
  evaluate->add_option("--threads", eval_threads, "Worker threads (0 = auto)")->capture_default_str();
  evaluate->add_option("--out", eval_out, "Output directory")->capture_default_str();

  // detect
  auto* detect = app.add_subcommand("detect", "Scan an empirical record for flickering");
  std::string det_input, det_time_col, det_value_col, det_out = "trace.csv",
              det_time_axis = "auto", det_delim = ",";
  std::vector<std::string> det_ensemble;
  std::vector<double> det_fractions;
  double det_stride = 0.1;
  std::size_t det_target_len = 100000;
  int det_threads = 0;
  detect->add_option("--input", det_input, "Input CSV file")->required();
  detect->add_option("--time-col", det_time_col, "Time column name")->required();
  detect->add_option("--value-col", det_value_col, "Value column name")->required();
  detect->add_option("--ensemble", det_ensemble, "Checkpoint files or directories")->required();
  detect->add_option("--fractions", det_fractions, "Window fractions (one per member)");
  detect->add_option("--stride", det_stride, "Stride as a fraction of the window")->capture_default_str();
  detect->add_option("--target-len", det_target_len, "Uniform resampling length")->check(CLI::PositiveNumber)->capture_default_str();
  detect->add_option("--time-axis", det_time_axis, "auto|forward|reversed")
      ->check(CLI::IsMember({"auto", "forward", "reversed"}))->capture_default_str();
  detect->add_option("--delimiter", det_delim, "Field delimiter")->capture_default_str();
  detect->add_option("--threads", det_threads, "Worker threads (0 = auto)")->capture_default_str();
  detect->add_option("--out", det_out, "Trace CSV output path")->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Export a raw stochastic trajectory");
  std::string sim_system, sim_coeffs, sim_out = "trajectory.csv";
  double sim_p_start = 5.0, sim_p_end = 0.0, sim_b_start = 0.0, sim_b_end = 0.0,
         sim_sigma = 0.0, sim_bump_factor = 2.5, sim_dt = 0.01, sim_x0 = 0.0;
  std::size_t sim_steps = 62500;
  std::uint64_t sim_seed = 0;
  bool sim_null_bump = false;
  auto* sim_p_end_opt = simulate->add_option("--p-end", sim_p_end, "Ramp p to this value (poly)");
  auto* sim_b_start_opt = simulate->add_option("--b-start", sim_b_start, "Control start (named systems)");
  auto* sim_b_end_opt = simulate->add_option("--b-end", sim_b_end, "Ramp b to this value");
  auto* sim_sigma_opt = simulate->add_option("--sigma", sim_sigma, "Noise amplitude");
  auto* sim_x0_opt = simulate->add_option("--x0", sim_x0, "Initial state (default: largest equilibrium)");
  simulate->add_option("--system", sim_system, "cubic|exponential|tanh|hill|logistic|arctan|poly")->required();
  simulate->add_option("--coeffs", sim_coeffs, "a,b,c,d,e,f,g (poly)");
  simulate->add_option("--p-start", sim_p_start, "Control start (poly)")->capture_default_str();
  simulate->add_flag("--null-bump", sim_null_bump, "Hold control, bump noise over the middle third");
  simulate->add_option("--bump-factor", sim_bump_factor, "Null bump peak = factor * sigma")->capture_default_str();
  simulate->add_option("--steps", sim_steps, "Euler steps")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--dt", sim_dt, "Time step")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
  simulate->add_option("--out", sim_out, "Trajectory CSV output path")->capture_default_str();
  for (CLI::App* sub : {gen, train, evaluate, detect, simulate})
    sub->add_option("--config",
                    "Key=value defaults (command-line flags take precedence)");

  try {
    args = apply_config_defaults(std::move(args));
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      if (gen_var_window > gen_length)
        throw CLI::ValidationError("--var-window must not exceed --length");
      return cmd_generate(gen_length, gen_per_class, gen_seed, gen_out,
                          gen_var_window, gen_sigma_factor, gen_threads, gen_csv);
    }
    if (train->parsed()) {
      if (!train_resume.empty())
        throw CLI::ValidationError(
            "resuming from a checkpoint is not supported; start a fresh run");
      return cmd_train(train_data, train_out, train_val_fraction, train_epochs,
                       train_batch, train_lr, train_patience, train_kernel,
                       train_dropout, train_seed, train_threads, train_history);
    }
    if (evaluate->parsed()) {
      if (eval_reps > 0) {
        eval_dl_reps = eval_reps;
        eval_var_reps = eval_reps;
      }
      return cmd_evaluate(eval_system, eval_ensemble, eval_fractions, eval_stride,
                          eval_dl_reps, eval_var_reps, eval_steps, eval_dt,
                          eval_var_window, eval_seed, eval_threads, eval_out);
    }
    if (detect->parsed()) {
      if (det_delim.size() != 1)
        throw CLI::ValidationError("--delimiter must be a single character");
      return cmd_detect(det_input, det_time_col, det_value_col, det_ensemble,
                        det_fractions, det_stride, det_target_len, det_time_axis,
                        det_delim[0], det_threads, det_out);
    }
    if (simulate->parsed()) {
      return cmd_simulate(sim_system, sim_coeffs, sim_p_start,
                          sim_p_end_opt->count() > 0, sim_p_end,
                          sim_b_start_opt->count() > 0, sim_b_start,
                          sim_b_end_opt->count() > 0, sim_b_end,
                          sim_sigma_opt->count() > 0, sim_sigma, sim_null_bump,
                          sim_bump_factor, sim_steps, sim_dt,
                          sim_x0_opt->count() > 0, sim_x0, sim_seed, sim_out);
    }
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace flicker::cli
