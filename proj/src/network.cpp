#include "natt/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "natt/common.hpp"
#include "natt/parallel.hpp"

using nlohmann::json;

namespace natt {

void NetworkParams::validate() const {
  if (n_in != 6) throw ValidationError("network expects 6 input channels");
  if (n_enc == 0 || n_hid == 0)
    throw ValidationError("layer sizes must be positive");
  if (enc_w.size() != n_enc * n_in || ff_w.size() != n_enc * n_hid ||
      rec_w.size() != n_hid * n_hid || out_w.size() != kOut * n_hid)
    throw ValidationError("weight matrix shape mismatch");
  if (enc.size() != n_enc || hid.size() != n_hid)
    throw ValidationError("LIF parameter shape mismatch");
  enc.validate();
  hid.validate();
  if (!(out_tau_mem >= 0.0 && out_tau_mem <= 1.0) ||
      !(out_tau_syn >= 0.0 && out_tau_syn <= 1.0))
    throw ValidationError("decoder decays must lie in [0, 1]");
  norm.validate();
}

NetworkParams effective_params(const NetworkParams& params) {
  NetworkParams p = params;
  if (!params.quantized) return p;
  const QuantSpec wq = weight_quant_spec();
  const QuantSpec dq = decay_quant_spec();
  for (auto* w : {&p.enc_w, &p.ff_w, &p.rec_w, &p.out_w})
    for (double& v : *w) v = quantize(v, wq);
  for (auto* d : {&p.enc.tau_mem, &p.enc.tau_syn, &p.hid.tau_mem,
                  &p.hid.tau_syn})
    for (double& v : *d) v = quantize(v, dq);
  p.out_tau_mem = quantize(p.out_tau_mem, dq);
  p.out_tau_syn = quantize(p.out_tau_syn, dq);
  return p;
}

ForwardResult network_forward(const NetworkParams& p,
                              std::span<const std::array<double, 6>> inputs,
                              CurrentCoupling coupling) {
  p.validate();
  const std::size_t n_e = p.n_enc, n_h = p.n_hid, T = inputs.size();

  ForwardResult r;
  r.estimates.resize(T);
  r.enc_spikes.reserve(T);
  r.hid_spikes.reserve(T);

  std::vector<double> v_e(n_e, 0.0), i_e(n_e, 0.0);
  std::vector<double> v_h(n_h, 0.0), i_h(n_h, 0.0), c_h(n_h);
  double v_o[2] = {0.0, 0.0}, i_o[2] = {0.0, 0.0};
  SpikeVector s_h_prev(n_h, 0);

  for (std::size_t t = 0; t < T; ++t) {
    const std::array<double, 6>& x = inputs[t];

    SpikeVector s_e(n_e, 0);
    for (std::size_t i = 0; i < n_e; ++i) {
      const double* row = &p.enc_w[i * 6];
      double c = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] +
                 row[3] * x[3] + row[4] * x[4] + row[5] * x[5];
      s_e[i] = lif_neuron_update(v_e[i], i_e[i], p.enc.tau_mem[i],
                                 p.enc.tau_syn[i], p.enc.threshold[i], c,
                                 coupling)
                   ? 1
                   : 0;
    }

    // Hidden input: feedforward terms first (ascending source), then the
    // one-step-delayed recurrent terms. Skipping silent sources leaves the
    // floating-point sums bit-identical to the dense products.
    std::fill(c_h.begin(), c_h.end(), 0.0);
    for (std::size_t j = 0; j < n_e; ++j) {
      if (!s_e[j]) continue;
      const double* col = &p.ff_w[j * n_h];
      for (std::size_t i = 0; i < n_h; ++i) c_h[i] += col[i];
    }
    for (std::size_t j = 0; j < n_h; ++j) {
      if (!s_h_prev[j]) continue;
      const double* col = &p.rec_w[j * n_h];
      for (std::size_t i = 0; i < n_h; ++i) c_h[i] += col[i];
    }

    SpikeVector s_h(n_h, 0);
    for (std::size_t i = 0; i < n_h; ++i) {
      s_h[i] = lif_neuron_update(v_h[i], i_h[i], p.hid.tau_mem[i],
                                 p.hid.tau_syn[i], p.hid.threshold[i], c_h[i],
                                 coupling)
                   ? 1
                   : 0;
    }

    for (int a = 0; a < 2; ++a) {
      const double* row = &p.out_w[static_cast<std::size_t>(a) * n_h];
      double c = 0.0;
      for (std::size_t j = 0; j < n_h; ++j)
        if (s_h[j]) c += row[j];
      li_neuron_update(v_o[a], i_o[a], p.out_tau_mem, p.out_tau_syn, c,
                       coupling);
    }
    if (!std::isfinite(v_o[0]) || !std::isfinite(v_o[1]))
      throw ValidationError("non-finite network output at timestep " +
                            std::to_string(t));
    r.estimates[t] = {v_o[0], v_o[1]};
    r.enc_spikes.push_back(std::move(s_e));
    s_h_prev = s_h;
    r.hid_spikes.push_back(std::move(s_h));
  }
  return r;
}

std::vector<std::array<double, 6>> normalize_sequence(
    const Sequence& seq, const NormalizationSpec& spec) {
  std::vector<std::array<double, 6>> out;
  out.reserve(seq.samples.size());
  for (const auto& s : seq.samples) out.push_back(normalize(s, spec));
  return out;
}

ForwardResult forward_sequence(const NetworkParams& params,
                               const Sequence& seq) {
  NetworkParams eff = effective_params(params);
  auto inputs = normalize_sequence(seq, eff.norm);
  return network_forward(eff, inputs);
}

std::vector<ForwardResult> batch_forward(const NetworkParams& params,
                                         const std::vector<Sequence>& seqs) {
  NetworkParams eff = effective_params(params);
  std::vector<ForwardResult> results(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) {
    auto inputs = normalize_sequence(seqs[i], eff.norm);
    results[i] = network_forward(eff, inputs);
  });
  return results;
}

NetworkParams init_network(std::size_t n_enc, std::size_t n_hid,
                           std::uint64_t seed, const NormalizationSpec& norm,
                           bool quantized) {
  if (n_enc == 0 || n_hid == 0)
    throw ValidationError("layer sizes must be positive");
  NetworkParams p;
  p.n_enc = n_enc;
  p.n_hid = n_hid;
  p.quantized = quantized;
  p.norm = norm;

  std::mt19937_64 rng(seed);
  const QuantSpec wq = weight_quant_spec();
  auto fill_weights = [&](std::vector<double>& w, std::size_t count,
                          std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    // Largest grid magnitude not exceeding the bound, so snapping to the
    // grid never pushes a weight outside +/- bound.
    const double cap = std::floor(bound / wq.step) * wq.step;
    std::uniform_real_distribution<double> dist(-bound, bound);
    w.resize(count);
    for (double& v : w)
      v = std::clamp(quantize(dist(rng), wq), -cap, cap);
  };
  fill_weights(p.enc_w, n_enc * 6, 6);
  fill_weights(p.ff_w, n_enc * n_hid, n_enc);
  fill_weights(p.rec_w, n_hid * n_hid, n_hid);
  fill_weights(p.out_w, NetworkParams::kOut * n_hid, n_hid);

  std::uniform_real_distribution<double> decay_dist(0.3, 0.9);
  auto fill_lif = [&](LifParams& lif, std::size_t n) {
    lif.tau_mem.resize(n);
    lif.tau_syn.resize(n);
    lif.threshold.assign(n, 0.5);
    for (double& v : lif.tau_mem) v = decay_dist(rng);
    for (double& v : lif.tau_syn) v = decay_dist(rng);
  };
  fill_lif(p.enc, n_enc);
  fill_lif(p.hid, n_hid);
  p.out_tau_mem = 0.5;
  p.out_tau_syn = 0.5;
  p.validate();
  return p;
}

NetworkParams prune(const NetworkParams& params,
                    const std::vector<double>& enc_rate,
                    const std::vector<double>& hid_rate, double threshold) {
  params.validate();
  if (enc_rate.size() != params.n_enc || hid_rate.size() != params.n_hid)
    throw ValidationError("prune: activity vector shape mismatch");

  auto keep_list = [&](const std::vector<double>& rate) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < rate.size(); ++i)
      if (!(rate[i] < threshold)) keep.push_back(i);
    return keep;
  };
  std::vector<std::size_t> keep_e = keep_list(enc_rate);
  std::vector<std::size_t> keep_h = keep_list(hid_rate);
  if (keep_e.empty() || keep_h.empty())
    throw ValidationError("prune: threshold removes an entire layer");

  NetworkParams q;
  q.n_enc = keep_e.size();
  q.n_hid = keep_h.size();
  q.quantized = params.quantized;
  q.norm = params.norm;
  q.out_tau_mem = params.out_tau_mem;
  q.out_tau_syn = params.out_tau_syn;

  auto take_lif = [](const LifParams& src, const std::vector<std::size_t>& keep) {
    LifParams dst;
    for (std::size_t i : keep) {
      dst.tau_mem.push_back(src.tau_mem[i]);
      dst.tau_syn.push_back(src.tau_syn[i]);
      dst.threshold.push_back(src.threshold[i]);
    }
    return dst;
  };
  q.enc = take_lif(params.enc, keep_e);
  q.hid = take_lif(params.hid, keep_h);

  q.enc_w.reserve(q.n_enc * 6);
  for (std::size_t i : keep_e)
    for (std::size_t k = 0; k < 6; ++k) q.enc_w.push_back(params.enc_w[i * 6 + k]);
  q.ff_w.reserve(q.n_enc * q.n_hid);
  for (std::size_t j : keep_e)
    for (std::size_t i : keep_h)
      q.ff_w.push_back(params.ff_w[j * params.n_hid + i]);
  q.rec_w.reserve(q.n_hid * q.n_hid);
  for (std::size_t j : keep_h)
    for (std::size_t i : keep_h)
      q.rec_w.push_back(params.rec_w[j * params.n_hid + i]);
  q.out_w.reserve(NetworkParams::kOut * q.n_hid);
  for (std::size_t a = 0; a < NetworkParams::kOut; ++a)
    for (std::size_t j : keep_h)
      q.out_w.push_back(params.out_w[a * params.n_hid + j]);
  q.validate();
  return q;
}

namespace {

json lif_to_json(const LifParams& lif) {
  return json{{"tau_mem", lif.tau_mem},
              {"tau_syn", lif.tau_syn},
              {"threshold", lif.threshold}};
}

LifParams lif_from_json(const json& j) {
  LifParams lif;
  lif.tau_mem = j.at("tau_mem").get<std::vector<double>>();
  lif.tau_syn = j.at("tau_syn").get<std::vector<double>>();
  lif.threshold = j.at("threshold").get<std::vector<double>>();
  return lif;
}

}  // namespace

void save_params(const std::filesystem::path& path,
                 const NetworkParams& params) {
  params.validate();
  json j;
  j["format"] = "natt-params-v1";
  j["version"] = kVersion;
  j["n_in"] = params.n_in;
  j["n_enc"] = params.n_enc;
  j["n_hid"] = params.n_hid;
  j["n_out"] = NetworkParams::kOut;
  j["layout"] = {{"enc_w", "target_major"},
                 {"ff_w", "source_major"},
                 {"rec_w", "source_major"},
                 {"out_w", "target_major"}};
  j["quantized"] = params.quantized;
  j["normalization"] = {{"min", params.norm.min}, {"max", params.norm.max}};
  j["enc_w"] = params.enc_w;
  j["ff_w"] = params.ff_w;
  j["rec_w"] = params.rec_w;
  j["out_w"] = params.out_w;
  j["enc"] = lif_to_json(params.enc);
  j["hid"] = lif_to_json(params.hid);
  j["out"] = {{"tau_mem", params.out_tau_mem}, {"tau_syn", params.out_tau_syn}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write parameters: " + path.string());
  out << j.dump(2) << '\n';
}

NetworkParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing parameter file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    if (j.value("format", "") != "natt-params-v1")
      throw FormatError(path.string() + ": unknown parameter format");
    NetworkParams p;
    p.n_enc = j.at("n_enc").get<std::size_t>();
    p.n_hid = j.at("n_hid").get<std::size_t>();
    p.quantized = j.at("quantized").get<bool>();
    const json& norm = j.at("normalization");
    auto mn = norm.at("min").get<std::vector<double>>();
    auto mx = norm.at("max").get<std::vector<double>>();
    if (mn.size() != 6 || mx.size() != 6)
      throw FormatError(path.string() + ": normalization needs 6 channels");
    std::copy(mn.begin(), mn.end(), p.norm.min.begin());
    std::copy(mx.begin(), mx.end(), p.norm.max.begin());
    p.enc_w = j.at("enc_w").get<std::vector<double>>();
    p.ff_w = j.at("ff_w").get<std::vector<double>>();
    p.rec_w = j.at("rec_w").get<std::vector<double>>();
    p.out_w = j.at("out_w").get<std::vector<double>>();
    p.enc = lif_from_json(j.at("enc"));
    p.hid = lif_from_json(j.at("hid"));
    p.out_tau_mem = j.at("out").at("tau_mem").get<double>();
    p.out_tau_syn = j.at("out").at("tau_syn").get<double>();
    try {
      p.validate();
    } catch (const ValidationError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    return p;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace natt
