#include "natt/training.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "natt/common.hpp"
#include "natt/dataset_io.hpp"
#include "natt/parallel.hpp"

namespace natt {

double mse_loss(std::span<const EulerAngles> est,
                std::span<const EulerAngles> truth) {
  if (est.size() != truth.size())
    throw ValidationError("mse_loss: length mismatch");
  if (est.empty()) throw ValidationError("mse_loss: empty sequence");
  double acc = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    double dp = est[t].pitch - truth[t].pitch;
    double dr = est[t].roll - truth[t].roll;
    acc += (dp * dp + dr * dr) / 2.0;
  }
  return acc;
}

double per_step_mse(std::span<const EulerAngles> est,
                    std::span<const EulerAngles> truth) {
  return mse_loss(est, truth) / static_cast<double>(est.size());
}

Gradients Gradients::zeros(const NetworkParams& p) {
  Gradients g;
  g.enc_w.assign(p.enc_w.size(), 0.0);
  g.ff_w.assign(p.ff_w.size(), 0.0);
  g.rec_w.assign(p.rec_w.size(), 0.0);
  g.out_w.assign(p.out_w.size(), 0.0);
  g.enc_tau_mem.assign(p.n_enc, 0.0);
  g.enc_tau_syn.assign(p.n_enc, 0.0);
  g.hid_tau_mem.assign(p.n_hid, 0.0);
  g.hid_tau_syn.assign(p.n_hid, 0.0);
  return g;
}

void Gradients::add(const Gradients& o) {
  auto axpy = [](std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
      throw ValidationError("Gradients::add: shape mismatch");
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  };
  axpy(enc_w, o.enc_w);
  axpy(ff_w, o.ff_w);
  axpy(rec_w, o.rec_w);
  axpy(out_w, o.out_w);
  axpy(enc_tau_mem, o.enc_tau_mem);
  axpy(enc_tau_syn, o.enc_tau_syn);
  axpy(hid_tau_mem, o.hid_tau_mem);
  axpy(hid_tau_syn, o.hid_tau_syn);
  out_tau_mem += o.out_tau_mem;
  out_tau_syn += o.out_tau_syn;
  loss += o.loss;
}

Gradients bptt_gradients(const NetworkParams& p,
                         std::span<const std::array<double, 6>> inputs,
                         std::span<const EulerAngles> targets,
                         const SurrogateSpec& surrogate) {
  p.validate();
  if (inputs.size() != targets.size())
    throw ValidationError("bptt: input/target length mismatch");
  const std::size_t T = inputs.size();
  if (T == 0) throw ValidationError("bptt: empty sequence");
  const std::size_t n_e = p.n_enc, n_h = p.n_hid;

  // Forward, recording pre-reset membranes, updated currents, and spikes.
  std::vector<double> pe(T * n_e), ie(T * n_e), ph(T * n_h), ih(T * n_h);
  std::vector<std::uint8_t> se(T * n_e), sh(T * n_h);
  std::vector<double> ov(T * 2), oi(T * 2);
  double loss = 0.0;
  {
    std::vector<double> v_e(n_e, 0.0), cur_e(n_e, 0.0);
    std::vector<double> v_h(n_h, 0.0), cur_h(n_h, 0.0), c_h(n_h);
    double vo[2] = {0.0, 0.0}, io2[2] = {0.0, 0.0};
    for (std::size_t t = 0; t < T; ++t) {
      const std::array<double, 6>& x = inputs[t];
      double* pe_t = &pe[t * n_e];
      double* ie_t = &ie[t * n_e];
      std::uint8_t* se_t = &se[t * n_e];
      for (std::size_t i = 0; i < n_e; ++i) {
        const double* row = &p.enc_w[i * 6];
        double c = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] +
                   row[3] * x[3] + row[4] * x[4] + row[5] * x[5];
        double vv = v_e[i], ii = cur_e[i];
        li_neuron_update(vv, ii, p.enc.tau_mem[i], p.enc.tau_syn[i], c);
        bool s = (vv - p.enc.threshold[i]) > 0.0;
        pe_t[i] = vv;
        ie_t[i] = ii;
        se_t[i] = s ? 1 : 0;
        v_e[i] = s ? 0.0 : vv;
        cur_e[i] = ii;
      }

      std::fill(c_h.begin(), c_h.end(), 0.0);
      for (std::size_t j = 0; j < n_e; ++j) {
        if (!se_t[j]) continue;
        const double* col = &p.ff_w[j * n_h];
        for (std::size_t i = 0; i < n_h; ++i) c_h[i] += col[i];
      }
      if (t > 0) {
        const std::uint8_t* sh_prev = &sh[(t - 1) * n_h];
        for (std::size_t j = 0; j < n_h; ++j) {
          if (!sh_prev[j]) continue;
          const double* col = &p.rec_w[j * n_h];
          for (std::size_t i = 0; i < n_h; ++i) c_h[i] += col[i];
        }
      }

      double* ph_t = &ph[t * n_h];
      double* ih_t = &ih[t * n_h];
      std::uint8_t* sh_t = &sh[t * n_h];
      for (std::size_t i = 0; i < n_h; ++i) {
        double vv = v_h[i], ii = cur_h[i];
        li_neuron_update(vv, ii, p.hid.tau_mem[i], p.hid.tau_syn[i], c_h[i]);
        bool s = (vv - p.hid.threshold[i]) > 0.0;
        ph_t[i] = vv;
        ih_t[i] = ii;
        sh_t[i] = s ? 1 : 0;
        v_h[i] = s ? 0.0 : vv;
        cur_h[i] = ii;
      }

      for (int a = 0; a < 2; ++a) {
        const double* row = &p.out_w[static_cast<std::size_t>(a) * n_h];
        double c = 0.0;
        for (std::size_t j = 0; j < n_h; ++j)
          if (sh_t[j]) c += row[j];
        li_neuron_update(vo[a], io2[a], p.out_tau_mem, p.out_tau_syn, c);
        ov[t * 2 + a] = vo[a];
        oi[t * 2 + a] = io2[a];
      }
      if (!std::isfinite(vo[0]) || !std::isfinite(vo[1]))
        throw ValidationError("non-finite network output at timestep " +
                              std::to_string(t));
      double dp = vo[0] - targets[t].pitch;
      double dr = vo[1] - targets[t].roll;
      loss += (dp * dp + dr * dr) / 2.0;
    }
  }

  // Reverse sweep.
  Gradients g = Gradients::zeros(p);
  std::vector<double> gp_h(n_h, 0.0), gi_h(n_h, 0.0);
  std::vector<double> gp_e(n_e, 0.0), gi_e(n_e, 0.0);
  std::vector<double> gsh(n_h), gse(n_e);
  double gov[2] = {0.0, 0.0}, goi[2] = {0.0, 0.0};

  for (std::size_t t = T; t-- > 0;) {
    const std::array<double, 6>& x = inputs[t];
    const double* ph_t = &ph[t * n_h];
    const double* pe_t = &pe[t * n_e];
    const std::uint8_t* sh_t = &sh[t * n_h];
    const std::uint8_t* se_t = &se[t * n_e];

    // Decoder units.
    for (int a = 0; a < 2; ++a) {
      double target = (a == 0) ? targets[t].pitch : targets[t].roll;
      double err = ov[t * 2 + a] - target;
      double gv = err + p.out_tau_mem * gov[a];
      double gi = gv + p.out_tau_syn * goi[a];
      double ov_prev = (t > 0) ? ov[(t - 1) * 2 + a] : 0.0;
      double oi_prev = (t > 0) ? oi[(t - 1) * 2 + a] : 0.0;
      g.out_tau_mem += gv * ov_prev;
      g.out_tau_syn += gi * oi_prev;
      double* gw = &g.out_w[static_cast<std::size_t>(a) * n_h];
      for (std::size_t j = 0; j < n_h; ++j)
        if (sh_t[j]) gw[j] += gi;
      gov[a] = gv;
      goi[a] = gi;
    }

    // Hidden spike adjoints: decoder fan-out plus next-step recurrence
    // (gi_h still holds the t+1 current adjoints here).
    for (std::size_t j = 0; j < n_h; ++j)
      gsh[j] = p.out_w[j] * goi[0] + p.out_w[n_h + j] * goi[1];
    for (std::size_t j = 0; j < n_h; ++j) {
      const double* col = &p.rec_w[j * n_h];
      double acc = 0.0;
      for (std::size_t i = 0; i < n_h; ++i) acc += col[i] * gi_h[i];
      gsh[j] += acc;
    }

    // Hidden neurons: differentiate the reset via v = p (1 - s) and the
    // spike via the surrogate slope.
    for (std::size_t i = 0; i < n_h; ++i) {
      double gi_next = gi_h[i];
      double gv = p.hid.tau_mem[i] * gp_h[i];
      double pre = ph_t[i];
      double sp = superspike_grad(pre - p.hid.threshold[i], surrogate);
      double s = sh_t[i] ? 1.0 : 0.0;
      double gp = gv * (1.0 - s) + (gsh[i] - gv * pre) * sp;
      double gi = gp + p.hid.tau_syn[i] * gi_next;
      double v_prev = 0.0, i_prev = 0.0;
      if (t > 0) {
        double pp = ph[(t - 1) * n_h + i];
        v_prev = sh[(t - 1) * n_h + i] ? 0.0 : pp;
        i_prev = ih[(t - 1) * n_h + i];
      }
      g.hid_tau_mem[i] += gp * v_prev;
      g.hid_tau_syn[i] += gi * i_prev;
      gp_h[i] = gp;
      gi_h[i] = gi;
    }

    // Weight gradients into the hidden layer (current adjoint = gi_h now).
    for (std::size_t j = 0; j < n_e; ++j) {
      if (!se_t[j]) continue;
      double* gw = &g.ff_w[j * n_h];
      for (std::size_t i = 0; i < n_h; ++i) gw[i] += gi_h[i];
    }
    if (t > 0) {
      const std::uint8_t* sh_prev = &sh[(t - 1) * n_h];
      for (std::size_t j = 0; j < n_h; ++j) {
        if (!sh_prev[j]) continue;
        double* gw = &g.rec_w[j * n_h];
        for (std::size_t i = 0; i < n_h; ++i) gw[i] += gi_h[i];
      }
    }

    // Encoder spike adjoints through the feedforward weights.
    for (std::size_t j = 0; j < n_e; ++j) {
      const double* col = &p.ff_w[j * n_h];
      double acc = 0.0;
      for (std::size_t i = 0; i < n_h; ++i) acc += col[i] * gi_h[i];
      gse[j] = acc;
    }

    for (std::size_t i = 0; i < n_e; ++i) {
      double gi_next = gi_e[i];
      double gv = p.enc.tau_mem[i] * gp_e[i];
      double pre = pe_t[i];
      double sp = superspike_grad(pre - p.enc.threshold[i], surrogate);
      double s = se_t[i] ? 1.0 : 0.0;
      double gp = gv * (1.0 - s) + (gse[i] - gv * pre) * sp;
      double gi = gp + p.enc.tau_syn[i] * gi_next;
      double v_prev = 0.0, i_prev = 0.0;
      if (t > 0) {
        double pp = pe[(t - 1) * n_e + i];
        v_prev = se[(t - 1) * n_e + i] ? 0.0 : pp;
        i_prev = ie[(t - 1) * n_e + i];
      }
      g.enc_tau_mem[i] += gp * v_prev;
      g.enc_tau_syn[i] += gi * i_prev;
      gp_e[i] = gp;
      gi_e[i] = gi;
    }

    for (std::size_t i = 0; i < n_e; ++i) {
      double ge = gi_e[i];
      double* gw = &g.enc_w[i * 6];
      for (int k = 0; k < 6; ++k) gw[k] += ge * x[k];
    }
  }

  g.loss = loss;
  return g;
}

namespace {

struct FlatLayout {
  std::size_t enc_w, ff_w, rec_w, out_w;
  std::size_t enc_tm, enc_ts, hid_tm, hid_ts, out_tm, out_ts;
  std::size_t total;
};

FlatLayout make_layout(const NetworkParams& p) {
  FlatLayout l{};
  std::size_t off = 0;
  l.enc_w = off;
  off += p.enc_w.size();
  l.ff_w = off;
  off += p.ff_w.size();
  l.rec_w = off;
  off += p.rec_w.size();
  l.out_w = off;
  off += p.out_w.size();
  l.enc_tm = off;
  off += p.n_enc;
  l.enc_ts = off;
  off += p.n_enc;
  l.hid_tm = off;
  off += p.n_hid;
  l.hid_ts = off;
  off += p.n_hid;
  l.out_tm = off++;
  l.out_ts = off++;
  l.total = off;
  return l;
}

double to_logit(double tau) {
  double t = std::clamp(tau, 1e-9, 1.0 - 1e-9);
  return std::log(t / (1.0 - t));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> flatten(const NetworkParams& p, const FlatLayout& l) {
  std::vector<double> th(l.total);
  std::copy(p.enc_w.begin(), p.enc_w.end(), th.begin() + l.enc_w);
  std::copy(p.ff_w.begin(), p.ff_w.end(), th.begin() + l.ff_w);
  std::copy(p.rec_w.begin(), p.rec_w.end(), th.begin() + l.rec_w);
  std::copy(p.out_w.begin(), p.out_w.end(), th.begin() + l.out_w);
  for (std::size_t i = 0; i < p.n_enc; ++i) {
    th[l.enc_tm + i] = to_logit(p.enc.tau_mem[i]);
    th[l.enc_ts + i] = to_logit(p.enc.tau_syn[i]);
  }
  for (std::size_t i = 0; i < p.n_hid; ++i) {
    th[l.hid_tm + i] = to_logit(p.hid.tau_mem[i]);
    th[l.hid_ts + i] = to_logit(p.hid.tau_syn[i]);
  }
  th[l.out_tm] = to_logit(p.out_tau_mem);
  th[l.out_ts] = to_logit(p.out_tau_syn);
  return th;
}

NetworkParams unflatten(const std::vector<double>& th, const FlatLayout& l,
                        const NetworkParams& shape) {
  NetworkParams p = shape;
  std::copy(th.begin() + l.enc_w, th.begin() + l.enc_w + p.enc_w.size(),
            p.enc_w.begin());
  std::copy(th.begin() + l.ff_w, th.begin() + l.ff_w + p.ff_w.size(),
            p.ff_w.begin());
  std::copy(th.begin() + l.rec_w, th.begin() + l.rec_w + p.rec_w.size(),
            p.rec_w.begin());
  std::copy(th.begin() + l.out_w, th.begin() + l.out_w + p.out_w.size(),
            p.out_w.begin());
  for (std::size_t i = 0; i < p.n_enc; ++i) {
    p.enc.tau_mem[i] = sigmoid(th[l.enc_tm + i]);
    p.enc.tau_syn[i] = sigmoid(th[l.enc_ts + i]);
  }
  for (std::size_t i = 0; i < p.n_hid; ++i) {
    p.hid.tau_mem[i] = sigmoid(th[l.hid_tm + i]);
    p.hid.tau_syn[i] = sigmoid(th[l.hid_ts + i]);
  }
  p.out_tau_mem = sigmoid(th[l.out_tm]);
  p.out_tau_syn = sigmoid(th[l.out_ts]);
  return p;
}

// Gradients are taken at the effective parameters; the straight-through
// estimator passes them unchanged to the full-resolution weights, and the
// decay gradients chain through the sigmoid.
std::vector<double> flatten_grad(const Gradients& g,
                                 const std::vector<double>& th,
                                 const FlatLayout& l) {
  std::vector<double> fg(l.total);
  std::copy(g.enc_w.begin(), g.enc_w.end(), fg.begin() + l.enc_w);
  std::copy(g.ff_w.begin(), g.ff_w.end(), fg.begin() + l.ff_w);
  std::copy(g.rec_w.begin(), g.rec_w.end(), fg.begin() + l.rec_w);
  std::copy(g.out_w.begin(), g.out_w.end(), fg.begin() + l.out_w);
  auto chain = [&](std::size_t off, const std::vector<double>& gtau) {
    for (std::size_t i = 0; i < gtau.size(); ++i) {
      double tau = sigmoid(th[off + i]);
      fg[off + i] = gtau[i] * tau * (1.0 - tau);
    }
  };
  chain(l.enc_tm, g.enc_tau_mem);
  chain(l.enc_ts, g.enc_tau_syn);
  chain(l.hid_tm, g.hid_tau_mem);
  chain(l.hid_ts, g.hid_tau_syn);
  double tau = sigmoid(th[l.out_tm]);
  fg[l.out_tm] = g.out_tau_mem * tau * (1.0 - tau);
  tau = sigmoid(th[l.out_ts]);
  fg[l.out_ts] = g.out_tau_syn * tau * (1.0 - tau);
  return fg;
}

}  // namespace

TrainResult train(const NetworkParams& init,
                  const std::vector<Sequence>& train_set,
                  const std::vector<Sequence>& val_set, const TrainConfig& cfg,
                  std::uint64_t seed) {
  init.validate();
  if (train_set.empty() || val_set.empty())
    throw ValidationError("train: empty dataset");
  if (cfg.batch_size == 0 || cfg.batches_per_epoch == 0 ||
      cfg.max_epochs == 0 || cfg.ma_window == 0)
    throw ValidationError("train: invalid schedule configuration");
  if (cfg.lookahead.k < 1) throw ValidationError("train: lookahead k < 1");

  // Inputs are normalized once up front; only parameters change per batch.
  std::vector<std::vector<std::array<double, 6>>> tr_in, va_in;
  for (const auto& s : train_set) tr_in.push_back(normalize_sequence(s, init.norm));
  for (const auto& s : val_set) va_in.push_back(normalize_sequence(s, init.norm));

  // Batch items: whole sequences, or non-overlapping TBPTT windows. A
  // sequence shorter than the window is kept whole; a trailing remainder is
  // dropped.
  std::vector<std::vector<std::array<double, 6>>> bt_in;
  std::vector<std::vector<EulerAngles>> bt_truth;
  if (cfg.tbptt_window > 0) {
    const std::size_t w = cfg.tbptt_window;
    for (std::size_t s = 0; s < tr_in.size(); ++s) {
      const auto& in = tr_in[s];
      const auto& tru = train_set[s].truth;
      if (in.size() <= w) {
        bt_in.push_back(in);
        bt_truth.push_back(tru);
        continue;
      }
      for (std::size_t t0 = 0; t0 + w <= in.size(); t0 += w) {
        bt_in.emplace_back(in.begin() + t0, in.begin() + t0 + w);
        bt_truth.emplace_back(tru.begin() + t0, tru.begin() + t0 + w);
      }
    }
  } else {
    bt_in = std::move(tr_in);
    for (const auto& s : train_set) bt_truth.push_back(s.truth);
  }

  const FlatLayout layout = make_layout(init);
  std::vector<double> theta = flatten(init, layout);
  std::vector<double> slow = theta;
  std::vector<double> m(layout.total, 0.0), v(layout.total, 0.0);
  long long adam_t = 0;
  int lookahead_count = 0;

  auto effective = [&](const std::vector<double>& th) {
    NetworkParams fp = unflatten(th, layout, init);
    fp.quantized = cfg.quantization_aware;
    return effective_params(fp);
  };

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, bt_in.size() - 1);

  TrainResult res;
  std::vector<double> best_theta = theta;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  double best_ma = std::numeric_limits<double>::infinity();
  std::vector<double> val_hist;
  std::vector<Gradients> item_grads(cfg.batch_size);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double epoch_train = 0.0;
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
      std::vector<std::size_t> idx(cfg.batch_size);
      for (auto& id : idx) id = pick(rng);

      NetworkParams eff = effective(theta);
      parallel_for(cfg.batch_size, [&](std::size_t i) {
        item_grads[i] = bptt_gradients(eff, bt_in[idx[i]], bt_truth[idx[i]],
                                       cfg.surrogate);
      });
      Gradients total = Gradients::zeros(eff);
      for (const auto& gi : item_grads) total.add(gi);
      double mean_loss = total.loss / static_cast<double>(cfg.batch_size);
      if (!std::isfinite(mean_loss) || mean_loss > cfg.divergence_limit)
        throw TrainingDiverged("training diverged at epoch " +
                               std::to_string(epoch) + ": loss " +
                               std::to_string(mean_loss));
      epoch_train += mean_loss;

      std::vector<double> fg = flatten_grad(total, theta, layout);
      const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
      ++adam_t;
      const double b1 = cfg.adam.beta1, b2 = cfg.adam.beta2;
      const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam_t));
      const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam_t));
      for (std::size_t d = 0; d < layout.total; ++d) {
        double gd = fg[d] * inv_b;
        m[d] = b1 * m[d] + (1.0 - b1) * gd;
        v[d] = b2 * v[d] + (1.0 - b2) * gd * gd;
        double mhat = m[d] / bc1;
        double vhat = v[d] / bc2;
        theta[d] -= cfg.adam.lr * mhat / (std::sqrt(vhat) + cfg.adam.eps);
      }
      if (++lookahead_count == cfg.lookahead.k) {
        lookahead_count = 0;
        for (std::size_t d = 0; d < layout.total; ++d) {
          slow[d] += cfg.lookahead.alpha * (theta[d] - slow[d]);
          theta[d] = slow[d];
        }
      }
    }
    epoch_train /= static_cast<double>(cfg.batches_per_epoch);

    NetworkParams eff = effective(theta);
    std::vector<double> vloss(va_in.size());
    parallel_for(va_in.size(), [&](std::size_t i) {
      ForwardResult r = network_forward(eff, va_in[i]);
      vloss[i] = mse_loss(r.estimates, val_set[i].truth);
    });
    double val_loss = 0.0;
    for (double x : vloss) val_loss += x;
    val_loss /= static_cast<double>(va_in.size());

    val_hist.push_back(val_loss);
    std::size_t w = std::min<std::size_t>(cfg.ma_window, val_hist.size());
    double ma = 0.0;
    for (std::size_t k = val_hist.size() - w; k < val_hist.size(); ++k)
      ma += val_hist[k];
    ma /= static_cast<double>(w);
    best_ma = std::min(best_ma, ma);

    if (val_loss < best_val) {
      best_val = val_loss;
      best_theta = theta;
      best_epoch = epoch;
    }

    bool stop = ma > cfg.ma_tolerance * best_ma ||
                epoch - best_epoch >= cfg.patience || epoch == cfg.max_epochs;
    res.history.push_back({epoch, epoch_train, val_loss, ma, stop});
    if (stop) break;
  }

  NetworkParams best = unflatten(best_theta, layout, init);
  best.quantized = cfg.quantization_aware;
  // The model that achieved best_val is the on-grid projection of the
  // full-resolution masters, so that is what gets returned: the float and
  // quantized forwards of a quantization-aware checkpoint then agree.
  if (cfg.quantization_aware) best = effective_params(best);
  res.params = best;
  res.best_epoch = best_epoch;
  res.best_val_loss = best_val;
  return res;
}

void write_training_log(const std::filesystem::path& path,
                        const std::vector<EpochRow>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log: " + path.string());
  out << "epoch,train_loss,val_loss,val_moving_avg,stopped\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ','
        << format_double(r.val_loss) << ',' << format_double(r.val_moving_avg)
        << ',' << (r.stopped ? 1 : 0) << '\n';
  }
}

}  // namespace natt
