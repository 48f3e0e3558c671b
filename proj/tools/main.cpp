#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "natt/common.hpp"
#include "natt/dataset_io.hpp"
#include "natt/estimator.hpp"
#include "natt/evaluation.hpp"
#include "natt/filters.hpp"
#include "natt/network.hpp"
#include "natt/pso.hpp"
#include "natt/simulator.hpp"
#include "natt/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace natt;

namespace {

struct OverwriteRefused : std::runtime_error {
  explicit OverwriteRefused(const std::string& path)
      : std::runtime_error("refusing to overwrite " + path +
                           " (pass --force to allow)") {}
};

void guard_overwrite(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) throw OverwriteRefused(path.string());
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_provenance(const fs::path& dir, const std::string& command,
                      std::uint64_t seed,
                      const std::map<std::string, std::string>& args) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = seed;
  std::string canon = command;
  for (const auto& [k, v] : args) canon += "|" + k + "=" + v;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  j["config_hash"] = buf;
  j["args"] = args;
  std::ofstream out(dir / "provenance.json");
  if (!out) throw IoError("cannot write provenance in " + dir.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string out;
  std::uint64_t seed = 42;
  std::size_t n = 30;
  double seconds = 10.0;
  double rate = 200.0;
  double max_tilt_deg = 30.0;
  double max_yaw_deg = 20.0;
  double constant_frac = 0.2;
  double gyro_noise = 0.003;
  double accel_noise = 0.02;
  double gyro_bias_sd = 0.01;
  double accel_bias_sd = 0.2;
  double drag = 0.45;
  double f_min = 0.05;
  double f_max = 2.0;
  double ramp = 1.5;
  bool force = false;
};

void run_simulate(const SimulateArgs& a) {
  fs::path dir(a.out);
  fs::create_directories(dir);
  guard_overwrite(dir / "manifest.json", a.force);

  DatasetConfig cfg;
  cfg.traj.duration = a.seconds;
  cfg.traj.rate = a.rate;
  cfg.traj.max_tilt = deg_to_rad(a.max_tilt_deg);
  cfg.traj.max_yaw = deg_to_rad(a.max_yaw_deg);
  cfg.traj.f_min = a.f_min;
  cfg.traj.f_max = a.f_max;
  cfg.traj.ramp_time = a.ramp;
  cfg.traj.drag_k = a.drag;
  cfg.n = a.n;
  cfg.constant_fraction = a.constant_frac;
  cfg.gyro_noise_density = a.gyro_noise;
  cfg.accel_noise_density = a.accel_noise;
  cfg.gyro_bias_sd = a.gyro_bias_sd;
  cfg.accel_bias_sd = a.accel_bias_sd;

  GeneratedDataset ds = make_dataset(cfg, a.seed);
  for (std::size_t i = 0; i < ds.sequences.size(); ++i)
    write_sequence_csv(dir / ds.manifest.entries[i].file, ds.sequences[i]);
  write_manifest(dir, ds.manifest);
  write_provenance(dir, "simulate", a.seed,
                   {{"n", std::to_string(a.n)},
                    {"seconds", format_double(a.seconds)},
                    {"rate", format_double(a.rate)},
                    {"max_tilt_deg", format_double(a.max_tilt_deg)},
                    {"constant_frac", format_double(a.constant_frac)},
                    {"gyro_noise", format_double(a.gyro_noise)},
                    {"accel_noise", format_double(a.accel_noise)},
                    {"gyro_bias_sd", format_double(a.gyro_bias_sd)},
                    {"accel_bias_sd", format_double(a.accel_bias_sd)}});
  std::cout << "wrote " << ds.sequences.size() << " sequences to "
            << dir.string() << "\n";
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out;
  std::uint64_t seed = 42;
  std::size_t enc = 100, hid = 100;
  std::size_t epochs = 2000;
  std::size_t batch_size = 40;
  std::size_t batches = 15;
  std::size_t patience = 50;
  std::size_t ma_window = 20;
  std::size_t window = 0;
  double lr = 0.005;
  bool no_qat = false;
  bool force = false;
};

void run_train(const TrainArgs& a) {
  fs::path dir(a.out);
  fs::create_directories(dir);
  guard_overwrite(dir / "params.json", a.force);

  std::vector<Sequence> all = load_dataset(a.data);
  SplitIndices split = split_dataset(all.size(), a.seed);
  std::vector<Sequence> train_set, val_set;
  for (auto i : split.train) train_set.push_back(all[i]);
  for (auto i : split.val) val_set.push_back(all[i]);
  if (val_set.empty()) val_set = train_set;

  NormalizationSpec norm = fit_normalization(train_set);
  NetworkParams init = init_network(a.enc, a.hid, a.seed, norm, !a.no_qat);

  TrainConfig cfg;
  cfg.batch_size = a.batch_size;
  cfg.batches_per_epoch = a.batches;
  cfg.max_epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.ma_window = a.ma_window;
  cfg.tbptt_window = a.window;
  cfg.quantization_aware = !a.no_qat;
  cfg.adam.lr = a.lr;

  TrainResult result = train(init, train_set, val_set, cfg, a.seed);
  save_params(dir / "params.json", result.params);
  write_training_log(dir / "training_log.csv", result.history);

  std::map<std::string, std::string> args{
      {"data", a.data},
      {"enc", std::to_string(a.enc)},
      {"hid", std::to_string(a.hid)},
      {"epochs", std::to_string(a.epochs)},
      {"batch_size", std::to_string(a.batch_size)},
      {"batches", std::to_string(a.batches)},
      {"window", std::to_string(a.window)},
      {"qat", a.no_qat ? "0" : "1"},
      {"lr", format_double(a.lr)}};
  std::string tr_names, va_names;
  for (const auto& s : train_set) tr_names += s.name + ";";
  for (const auto& s : val_set) va_names += s.name + ";";
  args["train_split"] = tr_names;
  args["val_split"] = va_names;
  write_provenance(dir, "train", a.seed, args);

  std::cout << "best epoch " << result.best_epoch << " val_loss "
            << format_double(result.best_val_loss) << "; params in "
            << (dir / "params.json").string() << "\n";
}

// -------------------------------------------------------------------- tune

struct TuneArgs {
  std::string filter, data, out;
  std::uint64_t seed = 42;
  std::size_t iters = 300;
  std::size_t particles = 100;
  bool force = false;
};

void run_tune(const TuneArgs& a) {
  fs::path dir(a.out);
  fs::create_directories(dir);
  guard_overwrite(dir / "filter_params.txt", a.force);

  FilterKind kind = filter_kind_from_string(a.filter);
  bool adaptive = a.filter == "adaptive";
  std::vector<Sequence> data = load_dataset(a.data);

  PsoConfig cfg;
  cfg.max_iters = a.iters;
  cfg.particles = a.particles;
  TuneResult result = tune_filter(kind, adaptive, data, cfg, a.seed);

  save_filter_params(dir / "filter_params.txt", result.kind, result.params);
  write_tuning_report(dir / "tuning_log.csv", result);
  write_provenance(dir, "tune", a.seed,
                   {{"filter", a.filter},
                    {"data", a.data},
                    {"iters", std::to_string(a.iters)},
                    {"particles", std::to_string(a.particles)}});
  std::cout << "tuned " << a.filter << " cost "
            << format_double(result.pso.best_cost) << " after "
            << result.pso.history.size() - 1 << " iterations\n";
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string estimator, params, data, out;
  std::string input_mode = "normal";
  std::uint64_t seed = 42;
  double threshold = 1.0;
  bool known_initial = false;
  bool traces = false;
  bool force = false;
};

std::unique_ptr<AttitudeEstimator> build_estimator(const std::string& name,
                                                   const std::string& params) {
  if (name == "snn") {
    if (params.empty())
      throw ValidationError("--params is required for the snn estimator");
    return std::make_unique<SnnEstimator>(load_params(params));
  }
  FilterKind kind = filter_kind_from_string(name);
  bool adaptive = name == "adaptive";
  FilterParams fp = default_filter_params(kind, adaptive);
  if (!params.empty()) {
    auto [file_kind, file_params] = load_filter_params(params);
    if (file_kind != kind)
      throw ValidationError("filter parameter file holds '" +
                            to_string(file_kind) + "', requested '" + name +
                            "'");
    fp = file_params;
    if (adaptive) std::get<ComplementaryParams>(fp).adaptive = true;
  }
  return std::make_unique<FilterEstimator>(kind, fp,
                                           adaptive ? "adaptive" : name);
}

void run_eval(const EvalArgs& a) {
  fs::path dir(a.out);
  fs::create_directories(dir);
  guard_overwrite(dir / "report.csv", a.force);

  std::vector<Sequence> data = load_dataset(a.data);
  InputMode mode = input_mode_from_string(a.input_mode);
  if (mode != InputMode::kNormal) {
    for (auto& s : data) s = apply_input_mode(s, mode);
  }

  auto estimator = build_estimator(a.estimator, a.params);
  EvaluationReport report = evaluate(*estimator, data, a.known_initial);
  write_evaluation_report(dir / "report.csv", report);

  std::vector<std::vector<EulerAngles>> traces(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    traces[i] = estimator->estimate(data[i], a.known_initial);
  write_errors_long(dir / "errors_long.csv", data, traces);

  {
    std::ofstream out(dir / "time_to_threshold.csv");
    if (!out) throw IoError("cannot write time_to_threshold.csv");
    out << "sequence,threshold_deg,time_s\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      double t = time_to_threshold(traces[i], data[i].truth, data[i].dt,
                                   a.threshold);
      out << data[i].name << ',' << format_double(a.threshold) << ','
          << format_double(t) << '\n';
    }
  }

  if (a.traces) {
    fs::create_directories(dir / "traces");
    for (std::size_t i = 0; i < data.size(); ++i)
      write_trace_csv(dir / "traces" / (data[i].name + ".csv"), data[i],
                      traces[i]);
  }

  if (auto* snn = dynamic_cast<SnnEstimator*>(estimator.get())) {
    SpikeActivity act = spike_activity(snn->params(), data);
    write_spike_activity(dir / "spikes.csv", act);
    json j;
    j["n_enc"] = snn->params().n_enc;
    j["n_hid"] = snn->params().n_hid;
    j["weights"] = snn->params().weight_count();
    j["neuron_params"] = snn->params().neuron_param_count();
    j["flops_per_step"] = flop_count(FlopModel::kAttSnn, snn->params().n_hid,
                                     snn->params().n_enc);
    j["gru_flops_per_step"] = flop_count(
        FlopModel::kGruReference, snn->params().n_hid, snn->params().n_enc);
    std::ofstream out(dir / "model_cost.json");
    out << j.dump(2) << '\n';
  }

  write_provenance(dir, "eval", a.seed,
                   {{"estimator", a.estimator},
                    {"params", a.params},
                    {"data", a.data},
                    {"input_mode", a.input_mode},
                    {"known_initial", a.known_initial ? "1" : "0"},
                    {"threshold", format_double(a.threshold)}});
  std::cout << estimator->name() << " pooled error "
            << format_double(report.pooled.mean_deg) << " deg mean / "
            << format_double(report.pooled.median_deg) << " deg median over "
            << report.pooled.count << " samples\n";
}

// ------------------------------------------------------------------- prune

struct PruneArgs {
  std::string params, data, out;
  std::uint64_t seed = 42;
  double threshold = 0.005;
  bool force = false;
};

void run_prune(const PruneArgs& a) {
  fs::path dir(a.out);
  fs::create_directories(dir);
  guard_overwrite(dir / "pruned_params.json", a.force);

  NetworkParams params = load_params(a.params);
  std::vector<Sequence> calib = load_dataset(a.data);
  SpikeActivity act = spike_activity(params, calib);
  NetworkParams pruned = prune(params, act.enc_rate, act.hid_rate,
                               a.threshold);
  save_params(dir / "pruned_params.json", pruned);

  std::ofstream out(dir / "prune_report.csv");
  if (!out) throw IoError("cannot write prune report");
  out << "layer,kept,total\n";
  out << "encoder," << pruned.n_enc << ',' << params.n_enc << '\n';
  out << "hidden," << pruned.n_hid << ',' << params.n_hid << '\n';

  write_provenance(dir, "prune", a.seed,
                   {{"params", a.params},
                    {"data", a.data},
                    {"threshold", format_double(a.threshold)}});
  std::cout << "kept " << pruned.n_enc << "/" << params.n_enc << " encoder, "
            << pruned.n_hid << "/" << params.n_hid << " hidden neurons\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking-network attitude estimation toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read option defaults from an INI file");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic IMU dataset");
  s->add_option("--out", sim.out, "Output dataset directory")->required();
  s->add_option("--seed", sim.seed, "Master RNG seed");
  s->add_option("--n", sim.n, "Number of sequences");
  s->add_option("--seconds", sim.seconds, "Sequence duration");
  s->add_option("--rate", sim.rate, "Sample rate, Hz");
  s->add_option("--max-tilt-deg", sim.max_tilt_deg, "Attitude program limit");
  s->add_option("--max-yaw-deg", sim.max_yaw_deg, "Yaw program limit");
  s->add_option("--constant-frac", sim.constant_frac,
                "Fraction of constant-attitude sequences");
  s->add_option("--gyro-noise", sim.gyro_noise, "Gyro density, rad/s/sqrt(Hz)");
  s->add_option("--accel-noise", sim.accel_noise,
                "Accel density, m/s^2/sqrt(Hz)");
  s->add_option("--gyro-bias-sd", sim.gyro_bias_sd, "Per-run gyro bias SD");
  s->add_option("--accel-bias-sd", sim.accel_bias_sd, "Per-run accel bias SD");
  s->add_option("--drag", sim.drag, "Linear drag coefficient, 1/s");
  s->add_option("--f-min", sim.f_min, "Program band lower edge, Hz");
  s->add_option("--f-max", sim.f_max, "Program band upper edge, Hz");
  s->add_option("--ramp", sim.ramp, "Start envelope length, s");
  s->add_flag("--force", sim.force, "Overwrite existing outputs");
  s->callback([&] { run_simulate(sim); });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the spiking network");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--seed", tr.seed, "RNG seed");
  t->add_option("--enc", tr.enc, "Encoder layer size");
  t->add_option("--hid", tr.hid, "Hidden layer size");
  t->add_option("--epochs", tr.epochs, "Maximum epochs");
  t->add_option("--batch-size", tr.batch_size, "Sequences per batch");
  t->add_option("--batches", tr.batches, "Batches per epoch");
  t->add_option("--patience", tr.patience, "Early-stop patience, epochs");
  t->add_option("--ma-window", tr.ma_window, "Validation MA window");
  t->add_option("--window", tr.window,
                "TBPTT window, steps (0 = full sequences)");
  t->add_option("--lr", tr.lr, "Adam learning rate");
  t->add_flag("--no-qat", tr.no_qat, "Disable quantization-aware training");
  t->add_flag("--force", tr.force, "Overwrite existing outputs");
  t->callback([&] { run_train(tr); });

  TuneArgs tu;
  auto* u = app.add_subcommand("tune", "PSO-tune a classical filter");
  u->add_option("--filter", tu.filter,
                "complementary|adaptive|mahony|madgwick|ekf")
      ->required();
  u->add_option("--data", tu.data, "Dataset directory")->required();
  u->add_option("--out", tu.out, "Output directory")->required();
  u->add_option("--seed", tu.seed, "RNG seed");
  u->add_option("--iters", tu.iters, "Maximum PSO iterations");
  u->add_option("--particles", tu.particles, "Swarm size");
  u->add_flag("--force", tu.force, "Overwrite existing outputs");
  u->callback([&] { run_tune(tu); });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate an estimator on a dataset");
  e->add_option("--estimator", ev.estimator,
                "snn|complementary|adaptive|mahony|madgwick|ekf")
      ->required();
  e->add_option("--params", ev.params, "Parameter file (network or filter)");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--seed", ev.seed, "RNG seed");
  e->add_option("--threshold", ev.threshold,
                "Time-to-threshold metric, degrees");
  e->add_option("--input-mode", ev.input_mode,
                "normal|zero_gyro|zero_accel|gravity_accel");
  e->add_flag("--known-initial", ev.known_initial,
              "Seed filters with the true initial attitude");
  e->add_flag("--traces", ev.traces, "Write per-sequence trace CSVs");
  e->add_flag("--force", ev.force, "Overwrite existing outputs");
  e->callback([&] { run_eval(ev); });

  PruneArgs pr;
  auto* p = app.add_subcommand("prune", "Prune silent neurons from a network");
  p->add_option("--params", pr.params, "Network parameter file")->required();
  p->add_option("--data", pr.data, "Calibration dataset directory")
      ->required();
  p->add_option("--out", pr.out, "Output directory")->required();
  p->add_option("--seed", pr.seed, "RNG seed (provenance only)");
  p->add_option("--threshold", pr.threshold, "Firing-rate threshold");
  p->add_flag("--force", pr.force, "Overwrite existing outputs");
  p->callback([&] { run_prune(pr); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const OverwriteRefused& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 6;
  } catch (const CsvError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 5;
  } catch (const TrainingDiverged& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 5;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
