#include "wsvc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "wsvc/adam.hpp"
#include "wsvc/graph.hpp"
#include "wsvc/metrics.hpp"
#include "wsvc/model_eval.hpp"
#include "wsvc/rng.hpp"

namespace wsvc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed ^ (salt * 0x9E3779B97F4A7C15ull) ^ 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Precomputed per-fit coordinate inputs: the normalized grid plus the model
// input rows (raw coords for siren, Fourier features otherwise).
struct CoordinateData {
  CoordGrid grid;
  std::vector<float> inputs;
  int din = 0;
};

CoordinateData make_coordinate_data(const ModelSpec& spec, int w, int h,
                                    int n_frames) {
  CoordinateData cd;
  cd.grid = spec.coord_dim() == 3 ? coordinate_grid(w, h, n_frames)
                                  : coordinate_grid(w, h);
  if (spec.activation == Activation::fourier_relu) {
    const std::vector<float> bmat = fourier_matrix(spec, cd.grid.dim);
    cd.inputs =
        fourier_features<float, float>(cd.grid.data, cd.grid.dim, bmat);
    cd.din = 2 * spec.fourier_m;
  } else {
    cd.inputs = cd.grid.data;
    cd.din = cd.grid.dim;
  }
  return cd;
}

std::vector<float> planar_frame(const FrameBuffer& f) {
  const size_t hw = f.pixels();
  std::vector<float> out(hw * 3);
  for (size_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) out[static_cast<size_t>(c) * hw + p] = f.data[p * 3 + c];
  return out;
}

// Minibatch of coordinate rows + target colors. Frames shorter than the
// batch budget use every pixel in order (deterministic, no sampling noise).
struct CoordBatch {
  std::vector<float> inputs;   // n x din
  std::vector<float> targets;  // n x 3
  int n = 0;
};

CoordBatch gather_coord_batch(const CoordinateData& cd,
                              std::span<const FrameBuffer> frames,
                              std::span<const uint32_t> global_idx) {
  CoordBatch b;
  b.n = static_cast<int>(global_idx.size());
  b.inputs.resize(global_idx.size() * cd.din);
  b.targets.resize(global_idx.size() * 3);
  const size_t per_frame = static_cast<size_t>(cd.grid.width) * cd.grid.height;
  for (size_t i = 0; i < global_idx.size(); ++i) {
    const size_t gi = global_idx[i];
    const size_t t = gi / per_frame;
    const size_t pix = gi % per_frame;
    std::copy_n(cd.inputs.data() + gi * cd.din, cd.din,
                b.inputs.data() + i * cd.din);
    std::copy_n(frames[t].data.data() + pix * 3, 3, b.targets.data() + i * 3);
  }
  return b;
}

std::vector<uint32_t> draw_indices(Rng& rng, size_t universe, size_t want) {
  std::vector<uint32_t> idx;
  if (universe <= want) {
    idx.resize(universe);
    for (size_t i = 0; i < universe; ++i) idx[i] = static_cast<uint32_t>(i);
    return idx;
  }
  idx.resize(want);
  for (size_t i = 0; i < want; ++i)
    idx[i] = static_cast<uint32_t>(rng.next_u64() % universe);
  return idx;
}

Var mse_node(Graph<float>& g, Var pred, Var target) {
  Var diff = g.sub(pred, target);
  return g.mean(g.mul(diff, diff));
}

// Hard-concrete gate subgraph. logit_u holds logit(u) per gate; returns the
// multiplier z in [0,1] and the unscaled expected-L0 penalty.
struct GateNodes {
  Var z;
  Var penalty;
};

GateNodes build_gate_nodes(Graph<float>& g, Var log_alpha,
                           std::span<const float> logit_u,
                           const GateSet& gs) {
  Var lu = g.constant({static_cast<int>(logit_u.size())}, logit_u);
  Var s = g.sigmoid(g.scale(g.add(lu, log_alpha), 1.f / gs.beta));
  Var sbar = g.add_scalar(g.scale(s, gs.zeta - gs.gamma), gs.gamma);
  GateNodes out;
  out.z = g.clamp01(sbar);
  out.penalty = g.sum(
      g.sigmoid(g.add_scalar(log_alpha, -static_cast<float>(gs.l0_shift()))));
  return out;
}

std::vector<float> draw_logit_u(Rng& rng, size_t n) {
  std::vector<float> lu(n);
  for (size_t i = 0; i < n; ++i) {
    const double u = rng.uniform_open();
    lu[i] = static_cast<float>(std::log(u) - std::log1p(-u));
  }
  return lu;
}

// Deterministic full-frame reconstruction error, used for best-so-far
// checkpoints and final reporting.
class FrameEvaluator {
 public:
  FrameEvaluator(const ModelSpec& spec, int w, int h, int n_frames)
      : spec_(spec), w_(w), h_(h) {
    const bool seq = spec.temporal_mode == TemporalMode::full_sequence;
    if (spec.paradigm == Paradigm::coordinate)
      grid_ = seq ? coordinate_grid(w, h, n_frames) : coordinate_grid(w, h);
    else
      noise_ = make_noise(spec, w, h, seq ? n_frames : 1);
  }

  FrameBuffer render(const ParamVector& theta, int t) const {
    const bool seq = spec_.temporal_mode == TemporalMode::full_sequence;
    if (spec_.paradigm == Paradigm::coordinate)
      return eval_coordinate_model(spec_, theta, grid_, seq ? t : 0);
    return eval_conv_model(spec_, theta, noise_, seq ? t : 0, w_, h_);
  }

  double frame_mse(const ParamVector& theta, const FrameBuffer& target,
                   int t) const {
    return mse(render(theta, t), target);
  }

 private:
  const ModelSpec& spec_;
  int w_, h_;
  CoordGrid grid_;
  NoiseInput noise_;
};

ParamVector make_pv(std::shared_ptr<const ParamLayout> layout,
                    std::vector<float> data) {
  ParamVector pv;
  pv.layout = std::move(layout);
  pv.data = std::move(data);
  return pv;
}

ParamVector quantize_roundtrip(const ParamVector& theta, int bits) {
  theta.check_layout();
  ParamVector out;
  out.layout = theta.layout;
  out.data.resize(theta.size());
  for (const BlockDesc& b : theta.layout->blocks) {
    const QuantizedBlock q = quantize_block(
        std::span<const float>(theta.data.data() + b.offset, b.size), bits);
    dequantize_block(q, std::span<float>(out.data.data() + b.offset, b.size));
  }
  return out;
}

size_t count_nonzeros(std::span<const float> v) {
  size_t n = 0;
  for (float x : v)
    if (x != 0.f) ++n;
  return n;
}

}  // namespace

void TrainReport::append(const TrainReport& other) {
  step_losses.insert(step_losses.end(), other.step_losses.begin(),
                     other.step_losses.end());
  checkpoint_losses.insert(checkpoint_losses.end(),
                           other.checkpoint_losses.begin(),
                           other.checkpoint_losses.end());
  frame_psnr.insert(frame_psnr.end(), other.frame_psnr.begin(),
                    other.frame_psnr.end());
  frame_nonzeros.insert(frame_nonzeros.end(), other.frame_nonzeros.begin(),
                        other.frame_nonzeros.end());
  encode_seconds += other.encode_seconds;
}

std::string TrainReport::to_jsonl() const {
  std::string out;
  char buf[160];
  for (size_t i = 0; i < step_losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "{\"type\":\"step\",\"step\":%zu,\"loss\":%.9g}\n",
                  i, static_cast<double>(step_losses[i]));
    out += buf;
  }
  out += "{\"type\":\"summary\",\"frame_psnr\":[";
  for (size_t i = 0; i < frame_psnr.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6f", i ? "," : "", frame_psnr[i]);
    out += buf;
  }
  out += "],\"frame_nonzeros\":[";
  for (size_t i = 0; i < frame_nonzeros.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%zu", i ? "," : "", frame_nonzeros[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "],\"encode_seconds\":%.6f}\n", encode_seconds);
  out += buf;
  return out;
}

AnchorFit fit_anchor(const ModelSpec& spec, const FrameBuffer& target,
                     const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (spec.temporal_mode != TemporalMode::anchor_only)
    throw ContractError("fit_anchor: spec must be anchor_only");
  const Clock::time_point t0 = Clock::now();
  const int w = target.width, h = target.height;
  auto layout = build_layout(spec);
  const size_t P = layout->total;

  ParamVector theta = init_params(spec, cfg.seed);
  AdamState opt(P, cfg.lr);
  Rng rng(mix_seed(cfg.seed, 0xA11C));
  const FrameEvaluator evaluator(spec, w, h, 1);
  const bool coord = spec.paradigm == Paradigm::coordinate;
  CoordinateData cd;
  std::vector<float> planar;
  if (coord)
    cd = make_coordinate_data(spec, w, h, 1);
  else
    planar = planar_frame(target);

  TrainReport report;
  report.step_losses.reserve(cfg.steps);
  std::vector<float> best = theta.data;
  double best_mse = evaluator.frame_mse(theta, target, 0);
  report.checkpoint_losses.push_back(best_mse);

  Graph<float> g;
  const std::span<const FrameBuffer> frames(&target, 1);
  for (int step = 0; step < cfg.steps; ++step) {
    try {
      g.reset();
      Var theta_leaf = g.leaf({static_cast<int>(P)}, theta.data, true);
      Var loss;
      if (coord) {
        const std::vector<uint32_t> idx = draw_indices(
            rng, cd.grid.count(), static_cast<size_t>(cfg.batch_coords));
        const CoordBatch b = gather_coord_batch(cd, frames, idx);
        Var in = g.constant({b.n, cd.din}, b.inputs);
        Var pred = build_coordinate_forward(g, spec, theta_leaf, in, *layout);
        loss = mse_node(g, pred, g.constant({b.n, 3}, b.targets));
      } else {
        const NoiseInput z = make_noise(spec, w, h, 1);
        Var zin = g.constant({1, z.channels, z.h, z.w}, z.frame(0));
        Var pred =
            build_conv_forward(g, spec, theta_leaf, zin, *layout, h, w);
        Var tgt = g.reshape(g.constant({static_cast<int>(planar.size())},
                                       planar),
                            {1, 3, h, w});
        loss = mse_node(g, pred, tgt);
      }
      report.step_losses.push_back(g.value(loss)[0]);
      g.backward(loss);
      adam_step(theta.data, g.grad(theta_leaf), opt);
    } catch (const NumericError& e) {
      throw NumericError("fit_anchor: numeric fault at step " +
                         std::to_string(step) + ": " + e.what());
    }
    if ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.steps) {
      const double m = evaluator.frame_mse(theta, target, 0);
      if (m < best_mse) {
        best_mse = m;
        best = theta.data;
      }
      report.checkpoint_losses.push_back(best_mse);
    }
  }
  AnchorFit out{make_pv(layout, std::move(best)), std::move(report)};
  out.report.frame_psnr.push_back(psnr(evaluator.render(out.theta, 0), target));
  out.report.frame_nonzeros.push_back(0);
  out.report.encode_seconds = elapsed_s(t0);
  return out;
}

StepFit fit_step(const ModelSpec& spec, const ParamVector& theta_t,
                 const FrameBuffer& next, const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  theta_t.check_layout();
  if (spec.temporal_mode != TemporalMode::anchor_only)
    throw ContractError("fit_step: spec must be anchor_only");
  if (cfg.regularizer == Regularizer::none)
    throw ContractError("fit_step: a sparsity regularizer is required");
  const Clock::time_point t0 = Clock::now();
  const int w = next.width, h = next.height;
  const auto layout = theta_t.layout;
  const size_t P = layout->total;
  const DeltaDomain domain = cfg.regularizer == Regularizer::dct_l0
                                 ? DeltaDomain::dct
                                 : DeltaDomain::direct;
  auto dct = std::make_shared<const DctLayout>(build_dct_layout(*layout));

  DeltaParams delta;
  delta.domain = domain;
  delta.free.assign(P, 0.f);
  GateSet gates(P);
  AdamState opt_free(P, cfg.delta_lr);
  AdamState opt_gate(P, cfg.gate_lr);
  Rng rng(mix_seed(cfg.seed, 0x57E9));
  const FrameEvaluator evaluator(spec, w, h, 1);
  const bool coord = spec.paradigm == Paradigm::coordinate;
  CoordinateData cd;
  std::vector<float> planar;
  if (coord)
    cd = make_coordinate_data(spec, w, h, 1);
  else
    planar = planar_frame(next);

  const float lam = cfg.lambda / static_cast<float>(P);
  const int steps = cfg.effective_step_steps();
  TrainReport report;
  report.step_losses.reserve(steps);

  // Deterministic objective of a candidate: full-frame MSE of the folded
  // delta plus lambda-weighted transmitted-nonzero count.
  auto det_objective = [&](std::span<const float> free_vals,
                           const GateSet& gs, std::vector<float>& folded_out,
                           size_t& nnz_out) {
    const std::vector<float> zhat = deterministic_gate(gs);
    folded_out.resize(P);
    for (size_t i = 0; i < P; ++i) folded_out[i] = zhat[i] * free_vals[i];
    nnz_out = count_nonzeros(folded_out);
    const std::vector<float> step_param =
        to_param_delta(folded_out, domain, *dct);
    const ParamVector theta_eff = apply_delta(theta_t, step_param);
    return evaluator.frame_mse(theta_eff, next, 0) +
           static_cast<double>(lam) * static_cast<double>(nnz_out);
  };

  std::vector<float> best_free = delta.free;
  std::vector<float> best_la = gates.log_alpha;
  std::vector<float> folded;
  size_t nnz = 0;
  double best_obj = det_objective(delta.free, gates, folded, nnz);
  report.checkpoint_losses.push_back(best_obj);

  Graph<float> g;
  const std::span<const FrameBuffer> frames(&next, 1);
  for (int step = 0; step < steps; ++step) {
    try {
      g.reset();
      Var theta_c = g.constant({static_cast<int>(P)}, theta_t.data);
      Var free_leaf = g.leaf({static_cast<int>(P)}, delta.free, true);
      Var la_leaf = g.leaf({static_cast<int>(P)}, gates.log_alpha, true);
      const std::vector<float> logit_u = draw_logit_u(rng, P);
      const GateNodes gn = build_gate_nodes(g, la_leaf, logit_u, gates);
      Var masked = g.mul(gn.z, free_leaf);
      Var dparam = domain == DeltaDomain::dct ? g.dct_inv(masked, dct) : masked;
      Var theta_eff = g.add(theta_c, dparam);
      Var loss;
      if (coord) {
        const std::vector<uint32_t> idx = draw_indices(
            rng, cd.grid.count(), static_cast<size_t>(cfg.batch_coords));
        const CoordBatch b = gather_coord_batch(cd, frames, idx);
        Var in = g.constant({b.n, cd.din}, b.inputs);
        Var pred = build_coordinate_forward(g, spec, theta_eff, in, *layout);
        loss = mse_node(g, pred, g.constant({b.n, 3}, b.targets));
      } else {
        const NoiseInput z = make_noise(spec, w, h, 1);
        Var zin = g.constant({1, z.channels, z.h, z.w}, z.frame(0));
        Var pred =
            build_conv_forward(g, spec, theta_eff, zin, *layout, h, w);
        Var tgt = g.reshape(
            g.constant({static_cast<int>(planar.size())}, planar),
            {1, 3, h, w});
        loss = mse_node(g, pred, tgt);
      }
      Var total = g.add(loss, g.scale(gn.penalty, lam));
      report.step_losses.push_back(g.value(total)[0]);
      g.backward(total);
      adam_step(delta.free, g.grad(free_leaf), opt_free);
      adam_step(gates.log_alpha, g.grad(la_leaf), opt_gate);
    } catch (const NumericError& e) {
      throw NumericError("fit_step: numeric fault at step " +
                         std::to_string(step) + ": " + e.what());
    }
    if ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == steps) {
      std::vector<float> cand_folded;
      size_t cand_nnz = 0;
      GateSet cand_gates = gates;
      const double obj =
          det_objective(delta.free, cand_gates, cand_folded, cand_nnz);
      if (obj < best_obj) {
        best_obj = obj;
        best_free = delta.free;
        best_la = gates.log_alpha;
      }
      report.checkpoint_losses.push_back(best_obj);
    }
  }

  StepFit out;
  out.delta.domain = domain;
  out.delta.free = std::move(best_free);
  out.gates = std::move(gates);
  out.gates.log_alpha = std::move(best_la);
  det_objective(out.delta.free, out.gates, out.folded, out.nonzeros);
  const std::vector<float> step_param =
      to_param_delta(out.folded, domain, *dct);
  const ParamVector theta_next = apply_delta(theta_t, step_param);
  out.report = std::move(report);
  out.report.frame_psnr.push_back(psnr(evaluator.render(theta_next, 0), next));
  out.report.frame_nonzeros.push_back(out.nonzeros);
  out.report.encode_seconds = elapsed_s(t0);
  return out;
}

namespace {

// Joint fit of theta0 and every delta of one slice (single-stage mode).
struct SingleStageFit {
  ParamVector theta0;
  std::vector<std::vector<float>> foldeds;
  std::vector<size_t> nonzeros;
  TrainReport report;
};

SingleStageFit fit_slice_single(const ModelSpec& spec,
                                std::span<const FrameBuffer> frames,
                                const TrainConfig& cfg, uint64_t seed) {
  const Clock::time_point t0 = Clock::now();
  const int k = static_cast<int>(frames.size());
  const int w = frames[0].width, h = frames[0].height;
  auto layout = build_layout(spec);
  const size_t P = layout->total;
  const size_t D = P * static_cast<size_t>(k - 1);
  const DeltaDomain domain = cfg.regularizer == Regularizer::dct_l0
                                 ? DeltaDomain::dct
                                 : DeltaDomain::direct;
  auto dct = std::make_shared<const DctLayout>(build_dct_layout(*layout));

  ParamVector theta = init_params(spec, seed);
  std::vector<float> free_all(D, 0.f);
  GateSet gates_all(D);
  AdamState opt_theta(P, cfg.lr);
  AdamState opt_free(D, cfg.delta_lr);
  AdamState opt_gate(D, cfg.gate_lr);
  Rng rng(mix_seed(seed, 0x51C1));
  const FrameEvaluator evaluator(spec, w, h, k);
  const bool coord = spec.paradigm == Paradigm::coordinate;
  CoordinateData cd;
  std::vector<std::vector<float>> planars;
  if (coord) {
    cd = make_coordinate_data(spec, w, h, 1);
  } else {
    planars.reserve(k);
    for (const FrameBuffer& f : frames) planars.push_back(planar_frame(f));
  }
  const float lam = cfg.lambda / static_cast<float>(P);
  const int steps = cfg.effective_step_steps();
  const size_t per_frame_batch = std::max<size_t>(
      1, static_cast<size_t>(cfg.batch_coords) / static_cast<size_t>(k));

  auto fold_candidate = [&](std::span<const float> free_vals,
                            const GateSet& gs,
                            std::vector<std::vector<float>>& foldeds,
                            std::vector<size_t>& nnzs) {
    foldeds.assign(k - 1, std::vector<float>(P, 0.f));
    nnzs.assign(k - 1, 0);
    GateSet tmp(P);
    for (int t = 0; t < k - 1; ++t) {
      std::copy_n(gs.log_alpha.data() + static_cast<size_t>(t) * P, P,
                  tmp.log_alpha.data());
      const std::vector<float> zhat = deterministic_gate(tmp);
      for (size_t i = 0; i < P; ++i)
        foldeds[t][i] = zhat[i] * free_vals[static_cast<size_t>(t) * P + i];
      nnzs[t] = count_nonzeros(foldeds[t]);
    }
  };

  auto det_objective = [&](const ParamVector& th,
                           const std::vector<std::vector<float>>& foldeds,
                           const std::vector<size_t>& nnzs) {
    ParamVector cur = th;
    double obj = evaluator.frame_mse(cur, frames[0], 0);
    for (int t = 1; t < k; ++t) {
      cur = apply_delta(cur, to_param_delta(foldeds[t - 1], domain, *dct));
      obj += evaluator.frame_mse(cur, frames[t], 0);
    }
    size_t total_nnz = 0;
    for (size_t n : nnzs) total_nnz += n;
    return obj + static_cast<double>(lam) * static_cast<double>(total_nnz);
  };

  TrainReport report;
  report.step_losses.reserve(steps);
  std::vector<float> best_theta = theta.data;
  std::vector<float> best_free = free_all;
  std::vector<float> best_la = gates_all.log_alpha;
  std::vector<std::vector<float>> foldeds;
  std::vector<size_t> nnzs;
  fold_candidate(free_all, gates_all, foldeds, nnzs);
  double best_obj = det_objective(theta, foldeds, nnzs);
  report.checkpoint_losses.push_back(best_obj);

  Graph<float> g;
  for (int step = 0; step < steps; ++step) {
    try {
      g.reset();
      Var theta_leaf = g.leaf({static_cast<int>(P)}, theta.data, true);
      Var free_leaf = g.leaf({static_cast<int>(D)}, free_all, true);
      Var la_leaf = g.leaf({static_cast<int>(D)}, gates_all.log_alpha, true);
      const std::vector<float> logit_u = draw_logit_u(rng, D);
      const GateNodes gn = build_gate_nodes(g, la_leaf, logit_u, gates_all);
      Var masked_all = g.mul(gn.z, free_leaf);

      Var total;
      Var theta_cur = theta_leaf;
      for (int t = 0; t < k; ++t) {
        if (t > 0) {
          Var masked =
              g.slice(masked_all, static_cast<size_t>(t - 1) * P, P);
          Var dparam =
              domain == DeltaDomain::dct ? g.dct_inv(masked, dct) : masked;
          theta_cur = g.add(theta_cur, dparam);
        }
        Var loss_t;
        if (coord) {
          const std::vector<uint32_t> idx =
              draw_indices(rng, cd.grid.count(), per_frame_batch);
          const CoordBatch b =
              gather_coord_batch(cd, frames.subspan(t, 1), idx);
          Var in = g.constant({b.n, cd.din}, b.inputs);
          Var pred =
              build_coordinate_forward(g, spec, theta_cur, in, *layout);
          loss_t = mse_node(g, pred, g.constant({b.n, 3}, b.targets));
        } else {
          const NoiseInput z = make_noise(spec, w, h, 1);
          Var zin = g.constant({1, z.channels, z.h, z.w}, z.frame(0));
          Var pred =
              build_conv_forward(g, spec, theta_cur, zin, *layout, h, w);
          Var tgt = g.reshape(
              g.constant({static_cast<int>(planars[t].size())}, planars[t]),
              {1, 3, h, w});
          loss_t = mse_node(g, pred, tgt);
        }
        total = t == 0 ? loss_t : g.add(total, loss_t);
      }
      total = g.add(total, g.scale(gn.penalty, lam));
      report.step_losses.push_back(g.value(total)[0]);
      g.backward(total);
      adam_step(theta.data, g.grad(theta_leaf), opt_theta);
      adam_step(free_all, g.grad(free_leaf), opt_free);
      adam_step(gates_all.log_alpha, g.grad(la_leaf), opt_gate);
    } catch (const NumericError& e) {
      throw NumericError("fit_sequence(single): numeric fault at step " +
                         std::to_string(step) + ": " + e.what());
    }
    if ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == steps) {
      fold_candidate(free_all, gates_all, foldeds, nnzs);
      const double obj = det_objective(theta, foldeds, nnzs);
      if (obj < best_obj) {
        best_obj = obj;
        best_theta = theta.data;
        best_free = free_all;
        best_la = gates_all.log_alpha;
      }
      report.checkpoint_losses.push_back(best_obj);
    }
  }

  SingleStageFit out;
  out.theta0 = make_pv(layout, std::move(best_theta));
  GateSet best_gates(D);
  best_gates.log_alpha = std::move(best_la);
  fold_candidate(best_free, best_gates, out.foldeds, out.nonzeros);
  out.report = std::move(report);
  // Final per-frame PSNR along the (unquantized) chain.
  ParamVector cur = out.theta0;
  out.report.frame_psnr.push_back(psnr(evaluator.render(cur, 0), frames[0]));
  out.report.frame_nonzeros.push_back(0);
  for (int t = 1; t < k; ++t) {
    cur = apply_delta(cur, to_param_delta(out.foldeds[t - 1], domain, *dct));
    out.report.frame_psnr.push_back(psnr(evaluator.render(cur, 0), frames[t]));
    out.report.frame_nonzeros.push_back(out.nonzeros[t - 1]);
  }
  out.report.encode_seconds = elapsed_s(t0);
  return out;
}

}  // namespace

SequenceFit fit_sequence(const ModelSpec& spec,
                         const std::vector<FrameBuffer>& frames,
                         const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (frames.empty()) throw ContractError("fit_sequence: no frames");
  if (spec.temporal_mode != TemporalMode::anchor_only)
    throw ContractError("fit_sequence: spec must be anchor_only");
  const int n = static_cast<int>(frames.size());
  if (n > 1 && cfg.regularizer == Regularizer::none)
    throw ContractError("fit_sequence: a sparsity regularizer is required");
  const int w = frames[0].width, h = frames[0].height;
  const uint32_t wire_slice_len =
      cfg.slice_length >= n ? 0u : static_cast<uint32_t>(cfg.slice_length);
  const std::vector<int> slice_frames = derive_slice_frames(wire_slice_len, n);
  const DeltaDomain domain = cfg.regularizer == Regularizer::dct_l0
                                 ? DeltaDomain::dct
                                 : DeltaDomain::direct;
  auto layout = build_layout(spec);
  const DctLayout dct = build_dct_layout(*layout);

  SequenceFit out;
  out.encoding.spec = spec;
  out.encoding.width = w;
  out.encoding.height = h;
  out.encoding.domain = domain;
  out.encoding.slice_length = wire_slice_len;

  int frame0 = 0;
  for (size_t si = 0; si < slice_frames.size(); ++si) {
    const int k = slice_frames[si];
    const std::span<const FrameBuffer> span(frames.data() + frame0,
                                            static_cast<size_t>(k));
    SliceEncoding enc;
    enc.n_frames = k;
    if (cfg.stage_mode == StageMode::single_stage && k > 1) {
      TrainConfig sc = cfg;
      sc.seed = mix_seed(cfg.seed, 0x5711CE + si);
      SingleStageFit ss = fit_slice_single(spec, span, sc, sc.seed);
      enc.theta0 = std::move(ss.theta0);
      enc.delta_domain_values = std::move(ss.foldeds);
      out.report.append(ss.report);
    } else {
      TrainConfig ac = cfg;
      ac.seed = mix_seed(cfg.seed, 0xA11C40 + si);
      AnchorFit af = fit_anchor(spec, span[0], ac);
      out.report.append(af.report);
      enc.theta0 = af.theta;
      ParamVector base = cfg.train_from_quantized
                             ? quantize_roundtrip(af.theta, cfg.quant.anchor_bits)
                             : af.theta;
      for (int t = 1; t < k; ++t) {
        TrainConfig sc = cfg;
        sc.seed = mix_seed(cfg.seed, 0x57E900 + si * 4096 + t);
        StepFit sf = fit_step(spec, base, span[t], sc);
        out.report.append(sf.report);
        std::vector<float> domain_vals = sf.folded;
        if (cfg.train_from_quantized) {
          const SparseDeltaRecord rec =
              quantize_delta(domain_vals, *layout, domain,
                             domain == DeltaDomain::dct ? dct.hash()
                                                        : layout->fingerprint(),
                             cfg.quant.delta_bits);
          const std::vector<float> deq = reconstruct_delta(rec, *layout);
          base = apply_delta(base, to_param_delta(deq, domain, dct));
        } else {
          base = apply_delta(base, to_param_delta(domain_vals, domain, dct));
        }
        enc.delta_domain_values.push_back(std::move(domain_vals));
      }
    }
    out.encoding.slices.push_back(std::move(enc));
    frame0 += k;
  }
  return out;
}

SequenceFit fit_full_sequence(const ModelSpec& spec,
                              const std::vector<FrameBuffer>& frames,
                              const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (frames.empty()) throw ContractError("fit_full_sequence: no frames");
  if (spec.temporal_mode != TemporalMode::full_sequence)
    throw ContractError("fit_full_sequence: spec must be full_sequence");
  if (cfg.regularizer != Regularizer::none)
    throw ContractError("fit_full_sequence: regularizer must be none");
  const int n = static_cast<int>(frames.size());
  const int w = frames[0].width, h = frames[0].height;
  const uint32_t wire_slice_len =
      cfg.slice_length >= n ? 0u : static_cast<uint32_t>(cfg.slice_length);
  const std::vector<int> slice_frames = derive_slice_frames(wire_slice_len, n);
  auto layout = build_layout(spec);
  const size_t P = layout->total;

  SequenceFit out;
  out.encoding.spec = spec;
  out.encoding.width = w;
  out.encoding.height = h;
  out.encoding.domain = DeltaDomain::direct;
  out.encoding.slice_length = wire_slice_len;

  int frame0 = 0;
  for (size_t si = 0; si < slice_frames.size(); ++si) {
    const int k = slice_frames[si];
    const std::span<const FrameBuffer> span(frames.data() + frame0,
                                            static_cast<size_t>(k));
    const Clock::time_point t0 = Clock::now();
    const uint64_t seed = mix_seed(cfg.seed, 0xF0111 + si);
    ParamVector theta = init_params(spec, seed);
    AdamState opt(P, cfg.lr);
    Rng rng(mix_seed(seed, 0xBA7C4));
    const FrameEvaluator evaluator(spec, w, h, k);
    const bool coord = spec.paradigm == Paradigm::coordinate;
    CoordinateData cd;
    std::vector<float> planar_all;
    NoiseInput z_all;
    if (coord) {
      cd = make_coordinate_data(spec, w, h, k);
    } else {
      z_all = make_noise(spec, w, h, k);
      planar_all.reserve(static_cast<size_t>(k) * 3 * w * h);
      for (const FrameBuffer& f : span) {
        const std::vector<float> p = planar_frame(f);
        planar_all.insert(planar_all.end(), p.begin(), p.end());
      }
    }

    auto full_mse = [&](const ParamVector& th) {
      double acc = 0;
      for (int t = 0; t < k; ++t) acc += evaluator.frame_mse(th, span[t], t);
      return acc / k;
    };

    TrainReport report;
    report.step_losses.reserve(cfg.steps);
    std::vector<float> best = theta.data;
    double best_mse = full_mse(theta);
    report.checkpoint_losses.push_back(best_mse);

    Graph<float> g;
    for (int step = 0; step < cfg.steps; ++step) {
      try {
        g.reset();
        Var theta_leaf = g.leaf({static_cast<int>(P)}, theta.data, true);
        Var loss;
        if (coord) {
          const std::vector<uint32_t> idx = draw_indices(
              rng, cd.grid.count(), static_cast<size_t>(cfg.batch_coords));
          const CoordBatch b = gather_coord_batch(cd, span, idx);
          Var in = g.constant({b.n, cd.din}, b.inputs);
          Var pred =
              build_coordinate_forward(g, spec, theta_leaf, in, *layout);
          loss = mse_node(g, pred, g.constant({b.n, 3}, b.targets));
        } else {
          Var zin = g.constant({k, z_all.channels, z_all.h, z_all.w},
                               z_all.data);
          Var pred =
              build_conv_forward(g, spec, theta_leaf, zin, *layout, h, w);
          Var tgt = g.reshape(
              g.constant({static_cast<int>(planar_all.size())}, planar_all),
              {k, 3, h, w});
          loss = mse_node(g, pred, tgt);
        }
        report.step_losses.push_back(g.value(loss)[0]);
        g.backward(loss);
        adam_step(theta.data, g.grad(theta_leaf), opt);
      } catch (const NumericError& e) {
        throw NumericError("fit_full_sequence: numeric fault at step " +
                           std::to_string(step) + ": " + e.what());
      }
      if ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.steps) {
        const double m = full_mse(theta);
        if (m < best_mse) {
          best_mse = m;
          best = theta.data;
        }
        report.checkpoint_losses.push_back(best_mse);
      }
    }

    SliceEncoding enc;
    enc.n_frames = k;
    enc.theta0 = make_pv(layout, std::move(best));
    for (int t = 0; t < k; ++t) {
      report.frame_psnr.push_back(
          psnr(evaluator.render(enc.theta0, t), span[t]));
      report.frame_nonzeros.push_back(0);
    }
    report.encode_seconds = elapsed_s(t0);
    out.report.append(report);
    out.encoding.slices.push_back(std::move(enc));
    frame0 += k;
  }
  return out;
}

}  // namespace wsvc
