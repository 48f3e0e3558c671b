#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include <doctest.h>

#include "natt/common.hpp"
#include "natt/network.hpp"
#include "natt/training.hpp"
#include "support/reference_models.hpp"
#include "support/temp_dir.hpp"

using namespace natt;
using testutil::TempDir;

namespace {

std::vector<std::array<double, 6>> random_inputs(std::size_t n,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::array<double, 6>> xs(n);
  for (auto& x : xs)
    for (auto& v : x) v = u(rng);
  return xs;
}

std::vector<EulerAngles> random_targets(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<EulerAngles> ts(n);
  for (auto& t : ts) t = {u(rng), u(rng)};
  return ts;
}

double grad_entry(const Gradients& g, const refm::ParamCoord& c) {
  switch (c.block) {
    case refm::ParamBlock::kEncW: return g.enc_w[c.index];
    case refm::ParamBlock::kFfW: return g.ff_w[c.index];
    case refm::ParamBlock::kRecW: return g.rec_w[c.index];
    case refm::ParamBlock::kOutW: return g.out_w[c.index];
    case refm::ParamBlock::kEncTauMem: return g.enc_tau_mem[c.index];
    case refm::ParamBlock::kEncTauSyn: return g.enc_tau_syn[c.index];
    case refm::ParamBlock::kHidTauMem: return g.hid_tau_mem[c.index];
    case refm::ParamBlock::kHidTauSyn: return g.hid_tau_syn[c.index];
    case refm::ParamBlock::kOutTauMem: return g.out_tau_mem;
    case refm::ParamBlock::kOutTauSyn: return g.out_tau_syn;
  }
  return 0.0;
}

std::vector<refm::ParamCoord> all_coords(const NetworkParams& p) {
  std::vector<refm::ParamCoord> cs;
  auto push = [&](refm::ParamBlock b, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) cs.push_back({b, k});
  };
  push(refm::ParamBlock::kEncW, p.enc_w.size());
  push(refm::ParamBlock::kFfW, p.ff_w.size());
  push(refm::ParamBlock::kRecW, p.rec_w.size());
  push(refm::ParamBlock::kOutW, p.out_w.size());
  push(refm::ParamBlock::kEncTauMem, p.n_enc);
  push(refm::ParamBlock::kEncTauSyn, p.n_enc);
  push(refm::ParamBlock::kHidTauMem, p.n_hid);
  push(refm::ParamBlock::kHidTauSyn, p.n_hid);
  push(refm::ParamBlock::kOutTauMem, 1);
  push(refm::ParamBlock::kOutTauSyn, 1);
  return cs;
}

// Clean attitude-like sequences with consistent gyro/accel channels so a
// few epochs of training have something to latch onto.
Sequence wave_sequence(double amp, double freq, double phase,
                       std::uint64_t seed, const std::string& name) {
  Sequence seq;
  seq.name = name;
  seq.dt = 0.01;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.01);
  const std::size_t steps = 200;
  for (std::size_t t = 0; t < steps; ++t) {
    double time = t * seq.dt;
    double w = 2.0 * kPi * freq;
    double pitch = amp * std::sin(w * time + phase);
    double roll = 0.6 * amp * std::cos(w * time);
    ImuSample s;
    s.t = time;
    s.gyro = {-0.6 * amp * w * std::sin(w * time) + n(rng),
              amp * w * std::cos(w * time + phase) + n(rng), n(rng)};
    Vec3 g = gravity_in_body(pitch, roll);
    s.accel = {g[0] + n(rng), g[1] + n(rng), g[2] + n(rng)};
    seq.samples.push_back(s);
    seq.truth.push_back({pitch, roll});
  }
  return seq;
}

}  // namespace

TEST_CASE("mse_loss hand example") {
  std::vector<EulerAngles> est{{0.1, 0.2}, {0.3, 0.4}};
  std::vector<EulerAngles> truth{{0.0, 0.0}, {0.0, 0.0}};
  CHECK(mse_loss(est, truth) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(per_step_mse(est, truth) == doctest::Approx(0.075).epsilon(1e-15));

  std::vector<EulerAngles> wrong(3);
  CHECK_THROWS_AS(mse_loss(est, wrong), ValidationError);
}

TEST_CASE("superspike surrogate shape") {
  CHECK(superspike_grad(0.0) == 1.0);
  CHECK(superspike_grad(0.05) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(superspike_grad(-0.05) == superspike_grad(0.05));
  SurrogateSpec wide{10.0};
  CHECK(superspike_grad(0.1, wide) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(superspike_grad(1.0) < superspike_grad(0.1));
}

TEST_CASE("BPTT matches forward-mode dual derivatives on every coordinate") {
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    NetworkParams p = init_network(3, 3, seed);
    auto inputs = random_inputs(5, seed + 10);
    auto targets = random_targets(5, seed + 20);

    Gradients g = bptt_gradients(p, inputs, targets);
    CHECK(g.loss ==
          doctest::Approx(refm::loss_reference(p, inputs, targets))
              .epsilon(1e-12));

    for (const auto& coord : all_coords(p)) {
      double dual = refm::loss_directional_derivative(p, inputs, targets,
                                                      20.0, coord);
      double got = grad_entry(g, coord);
      double tol = 1e-8 + 1e-6 * std::abs(dual);
      if (!(std::abs(got - dual) <= tol)) {
        CAPTURE(static_cast<int>(coord.block));
        CAPTURE(coord.index);
        CAPTURE(dual);
        CAPTURE(got);
        REQUIRE(std::abs(got - dual) <= tol);
      }
    }
  }
}

TEST_CASE("BPTT matches dual derivatives on a deeper unroll") {
  NetworkParams p = init_network(8, 8, 301);
  auto inputs = random_inputs(40, 311);
  auto targets = random_targets(40, 321);
  Gradients g = bptt_gradients(p, inputs, targets);

  std::mt19937_64 rng(331);
  auto coords = all_coords(p);
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(40);
  for (const auto& coord : coords) {
    double dual =
        refm::loss_directional_derivative(p, inputs, targets, 20.0, coord);
    double got = grad_entry(g, coord);
    double tol = 1e-8 + 1e-6 * std::abs(dual);
    if (!(std::abs(got - dual) <= tol)) {
      CAPTURE(dual);
      CAPTURE(got);
      REQUIRE(std::abs(got - dual) <= tol);
    }
  }
}

TEST_CASE("gradients vanish exactly when targets equal the forward output") {
  NetworkParams p = init_network(5, 5, 401);
  auto inputs = random_inputs(30, 411);
  ForwardResult f = network_forward(p, inputs);

  Gradients g = bptt_gradients(p, inputs, f.estimates);
  CHECK(g.loss == 0.0);
  for (double v : g.enc_w) CHECK(v == 0.0);
  for (double v : g.ff_w) CHECK(v == 0.0);
  for (double v : g.rec_w) CHECK(v == 0.0);
  for (double v : g.out_w) CHECK(v == 0.0);
  for (double v : g.hid_tau_mem) CHECK(v == 0.0);
  for (double v : g.enc_tau_syn) CHECK(v == 0.0);
  CHECK(g.out_tau_mem == 0.0);
  CHECK(g.out_tau_syn == 0.0);
}

TEST_CASE("Gradients zeros/add bookkeeping") {
  NetworkParams p = init_network(4, 3, 1);
  Gradients a = Gradients::zeros(p);
  CHECK(a.enc_w.size() == p.enc_w.size());
  CHECK(a.rec_w.size() == p.rec_w.size());
  CHECK(a.hid_tau_syn.size() == p.n_hid);

  auto inputs = random_inputs(6, 2);
  auto targets = random_targets(6, 3);
  Gradients g = bptt_gradients(p, inputs, targets);
  Gradients sum = Gradients::zeros(p);
  sum.add(g);
  sum.add(g);
  CHECK(sum.loss == doctest::Approx(2.0 * g.loss).epsilon(1e-15));
  CHECK(sum.ff_w[0] == doctest::Approx(2.0 * g.ff_w[0]).epsilon(1e-15));
  CHECK(sum.out_tau_mem ==
        doctest::Approx(2.0 * g.out_tau_mem).epsilon(1e-15));
}

TEST_CASE("training reduces validation loss and is deterministic") {
  std::vector<Sequence> train_set, val_set;
  for (int k = 0; k < 6; ++k)
    train_set.push_back(wave_sequence(0.25 + 0.03 * k, 0.4 + 0.08 * k,
                                      0.3 * k, 1000 + k,
                                      "train" + std::to_string(k)));
  for (int k = 0; k < 2; ++k)
    val_set.push_back(wave_sequence(0.3, 0.5 + 0.1 * k, 0.2, 2000 + k,
                                    "val" + std::to_string(k)));

  NormalizationSpec norm = fit_normalization(train_set);
  NetworkParams init = init_network(12, 12, 7, norm, true);

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.batches_per_epoch = 3;
  cfg.max_epochs = 20;
  cfg.ma_window = 5;
  cfg.patience = 20;

  TrainResult a = train(init, train_set, val_set, cfg, 99);
  REQUIRE(!a.history.empty());
  CHECK(a.history.size() <= 20);

  double min_val = a.history[0].val_loss;
  for (const auto& row : a.history) min_val = std::min(min_val, row.val_loss);
  CHECK(a.best_val_loss == min_val);
  CHECK(a.best_epoch >= 1);
  CHECK(a.best_val_loss < a.history.front().val_loss);
  a.params.validate();
  CHECK(a.params.quantized == true);

  TrainResult b = train(init, train_set, val_set, cfg, 99);
  REQUIRE(b.history.size() == a.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].val_loss == b.history[e].val_loss);
  }
  CHECK(a.params.ff_w == b.params.ff_w);

  TrainConfig no_qat = cfg;
  no_qat.max_epochs = 2;
  no_qat.quantization_aware = false;
  TrainResult c = train(init, train_set, val_set, no_qat, 99);
  CHECK(c.params.quantized == false);
}

TEST_CASE("quantization-aware checkpoints are on-grid") {
  std::vector<Sequence> train_set, val_set;
  for (int k = 0; k < 4; ++k)
    train_set.push_back(wave_sequence(0.22 + 0.04 * k, 0.5 + 0.05 * k,
                                      0.2 * k, 1300 + k,
                                      "train" + std::to_string(k)));
  val_set.push_back(wave_sequence(0.3, 0.55, 0.1, 2300, "val0"));

  NormalizationSpec norm = fit_normalization(train_set);
  NetworkParams init = init_network(10, 10, 17, norm, true);

  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.batches_per_epoch = 2;
  cfg.max_epochs = 6;
  cfg.ma_window = 4;

  TrainResult r = train(init, train_set, val_set, cfg, 5);

  // The checkpoint is its own grid projection, so evaluating it with
  // quantization disabled reproduces the quantized forward exactly.
  NetworkParams snapped = effective_params(r.params);
  CHECK(snapped.ff_w == r.params.ff_w);
  CHECK(snapped.out_w == r.params.out_w);
  CHECK(snapped.hid.tau_mem == r.params.hid.tau_mem);
  CHECK(snapped.out_tau_mem == r.params.out_tau_mem);

  NetworkParams fp = r.params;
  fp.quantized = false;
  auto in = normalize_sequence(train_set[0], norm);
  ForwardResult q = network_forward(r.params, in);
  ForwardResult f = network_forward(fp, in);
  REQUIRE(q.estimates.size() == f.estimates.size());
  for (std::size_t t = 0; t < q.estimates.size(); ++t) {
    CHECK(q.estimates[t].pitch == f.estimates[t].pitch);
    CHECK(q.estimates[t].roll == f.estimates[t].roll);
  }
}

TEST_CASE("tbptt window equal to sequence length reproduces full training") {
  std::vector<Sequence> train_set, val_set;
  for (int k = 0; k < 4; ++k)
    train_set.push_back(wave_sequence(0.25 + 0.03 * k, 0.4 + 0.08 * k,
                                      0.3 * k, 1100 + k,
                                      "train" + std::to_string(k)));
  val_set.push_back(wave_sequence(0.3, 0.5, 0.2, 2100, "val0"));

  NetworkParams init = init_network(8, 8, 7, fit_normalization(train_set), true);
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.batches_per_epoch = 2;
  cfg.max_epochs = 4;
  cfg.patience = 10;

  TrainConfig windowed = cfg;
  windowed.tbptt_window = train_set.front().size();  // one window per sequence

  TrainResult full = train(init, train_set, val_set, cfg, 31);
  TrainResult win = train(init, train_set, val_set, windowed, 31);
  REQUIRE(win.history.size() == full.history.size());
  for (std::size_t e = 0; e < full.history.size(); ++e) {
    CHECK(win.history[e].train_loss == full.history[e].train_loss);
    CHECK(win.history[e].val_loss == full.history[e].val_loss);
  }
  CHECK(win.params.ff_w == full.params.ff_w);
}

TEST_CASE("tbptt windows train and validate on full sequences") {
  std::vector<Sequence> train_set, val_set;
  for (int k = 0; k < 4; ++k)
    train_set.push_back(wave_sequence(0.25 + 0.03 * k, 0.4 + 0.08 * k,
                                      0.3 * k, 1200 + k,
                                      "train" + std::to_string(k)));
  val_set.push_back(wave_sequence(0.3, 0.5, 0.2, 2200, "val0"));

  NetworkParams init = init_network(8, 8, 7, fit_normalization(train_set), true);
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.batches_per_epoch = 2;
  cfg.max_epochs = 6;
  cfg.patience = 10;
  cfg.tbptt_window = 80;  // 200-step sequences -> two windows each

  TrainResult r = train(init, train_set, val_set, cfg, 32);
  REQUIRE(!r.history.empty());
  for (const auto& row : r.history) {
    CHECK(std::isfinite(row.train_loss));
    // Validation stays on whole sequences, so its loss is summed over the
    // original step count, not the window.
    CHECK(row.val_loss > 0.0);
  }
  r.params.validate();

  TrainResult again = train(init, train_set, val_set, cfg, 32);
  REQUIRE(again.history.size() == r.history.size());
  CHECK(again.params.ff_w == r.params.ff_w);

  // Window longer than every sequence degenerates to whole-sequence batches.
  TrainConfig oversized = cfg;
  oversized.tbptt_window = 5000;
  TrainConfig plain = cfg;
  plain.tbptt_window = 0;
  TrainResult big = train(init, train_set, val_set, oversized, 33);
  TrainResult ref = train(init, train_set, val_set, plain, 33);
  REQUIRE(big.history.size() == ref.history.size());
  for (std::size_t e = 0; e < ref.history.size(); ++e)
    CHECK(big.history[e].val_loss == ref.history[e].val_loss);
}

TEST_CASE("patience stops training after flat validation epochs") {
  std::vector<Sequence> data{wave_sequence(0.3, 0.5, 0.0, 1, "a"),
                             wave_sequence(0.2, 0.7, 0.5, 2, "b")};
  NetworkParams init = init_network(6, 6, 3, fit_normalization(data), true);

  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.batches_per_epoch = 1;
  cfg.max_epochs = 50;
  cfg.patience = 2;
  cfg.ma_window = 4;
  cfg.adam.lr = 0.0;  // frozen parameters: validation never improves

  TrainResult r = train(init, data, data, cfg, 5);
  REQUIRE(r.history.size() == 3);
  CHECK(r.best_epoch == 1);
  CHECK(r.history.back().stopped);
  CHECK(r.history[0].val_loss == r.history[2].val_loss);
}

TEST_CASE("max_epochs caps the run") {
  std::vector<Sequence> data{wave_sequence(0.3, 0.5, 0.0, 1, "a")};
  NetworkParams init = init_network(4, 4, 3, fit_normalization(data), true);
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.batches_per_epoch = 1;
  cfg.max_epochs = 4;
  cfg.patience = 100;
  TrainResult r = train(init, data, data, cfg, 5);
  CHECK(r.history.size() <= 4);
  CHECK(r.history.back().stopped);
}

TEST_CASE("divergence guard raises TrainingDiverged") {
  std::vector<Sequence> data{wave_sequence(0.3, 0.5, 0.0, 1, "a")};
  NetworkParams init = init_network(4, 4, 3, fit_normalization(data), true);
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.batches_per_epoch = 1;
  cfg.divergence_limit = 1e-300;  // any nonzero loss trips the guard
  CHECK_THROWS_AS(train(init, data, data, cfg, 5), TrainingDiverged);
}

TEST_CASE("train validates its inputs") {
  std::vector<Sequence> data{wave_sequence(0.3, 0.5, 0.0, 1, "a")};
  NetworkParams init = init_network(4, 4, 3, fit_normalization(data), true);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(init, {}, data, cfg, 5), ValidationError);
  TrainConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(init, data, data, bad, 5), ValidationError);
  TrainConfig bad2 = cfg;
  bad2.lookahead.k = 0;
  CHECK_THROWS_AS(train(init, data, data, bad2, 5), ValidationError);
}

TEST_CASE("training log format") {
  TempDir dir("trainlog");
  std::vector<EpochRow> hist{{1, 0.5, 0.6, 0.6, false}, {2, 0.4, 0.5, 0.55, true}};
  auto path = dir.path() / "log.csv";
  write_training_log(path, hist);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,train_loss,val_loss,val_moving_avg,stopped");
  std::getline(in, line);
  CHECK(line == "1,0.5,0.6,0.6,0");
  std::getline(in, line);
  CHECK(line == "2,0.4,0.5,0.55,1");
}
