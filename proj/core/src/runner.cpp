#include "wsvc/runner.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "wsvc/metrics.hpp"
#include "wsvc/toml_lite.hpp"

namespace wsvc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::cbmlp_full: return "cbmlp-full";
    case Method::cbmlp_step2: return "cbmlp-step2";
    case Method::cbmlp_step1: return "cbmlp-step1";
    case Method::conv_full: return "conv-full";
    case Method::conv_step2: return "conv-step2";
    case Method::conv_step1: return "conv-step1";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::cbmlp_full, Method::cbmlp_step2, Method::cbmlp_step1,
                   Method::conv_full, Method::conv_step2, Method::conv_step1})
    if (name == method_name(m)) return m;
  throw ConfigError("unknown method '" + name +
                    "' (want {cbmlp,conv}-{full,step2,step1})");
}

bool method_is_conv(Method m) {
  return m == Method::conv_full || m == Method::conv_step2 ||
         m == Method::conv_step1;
}

bool method_is_full(Method m) {
  return m == Method::cbmlp_full || m == Method::conv_full;
}

ModelSpec RunConfig::build_spec(Method m, int n_frames) const {
  ModelSpec spec;
  spec.paradigm = method_is_conv(m) ? Paradigm::conv : Paradigm::coordinate;
  if (!layers.empty())
    spec.hidden_layers = layers;
  else
    spec.hidden_layers =
        spec.paradigm == Paradigm::conv ? std::vector<int>{24, 24, 24}
                                        : std::vector<int>{48, 48};
  // A one-frame clip collapses every variant to a plain anchor encoding.
  spec.temporal_mode = method_is_full(m) && n_frames > 1
                           ? TemporalMode::full_sequence
                           : TemporalMode::anchor_only;
  spec.activation = activation;
  spec.omega0 = omega0;
  spec.fourier_m = fourier_m;
  spec.fourier_sigma = fourier_sigma;
  spec.fourier_seed = train.seed;
  spec.skip_connections = skips;
  spec.noise_seed = train.seed;
  spec.validate();
  return spec;
}

RunResult run_method(const VideoClip& clip, Method method,
                     const RunConfig& cfg) {
  RunResult res;
  RdPoint& p = res.point;
  p.method = method_name(method);
  p.width = clip.width();
  p.height = clip.height();
  p.frames = clip.n_frames();
  p.lambda = cfg.train.lambda;
  if (clip.frames.empty()) throw ContractError("run_method: empty clip");

  const int n = clip.n_frames();
  const ModelSpec spec = cfg.build_spec(method, n);
  p.params = param_count(spec);
  {
    std::string fp = spec.to_text();
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "|m=%s|steps=%d/%d|lambda=%.9g|reg=%d|slice=%d|ab=%d|db=%d|"
                  "seed=%llu|lr=%.9g|dlr=%.9g|glr=%.9g|batch=%d",
                  p.method.c_str(), cfg.train.steps, cfg.train.step_steps,
                  static_cast<double>(cfg.train.lambda),
                  static_cast<int>(cfg.train.regularizer),
                  cfg.train.slice_length, cfg.quant.anchor_bits,
                  cfg.quant.delta_bits,
                  static_cast<unsigned long long>(cfg.train.seed),
                  static_cast<double>(cfg.train.lr),
                  static_cast<double>(cfg.train.delta_lr),
                  static_cast<double>(cfg.train.gate_lr),
                  cfg.train.batch_coords);
    p.fingerprint = hex64(fnv1a(fp + buf));
  }

  TrainConfig tc = cfg.train;
  tc.quant = cfg.quant;
  const bool full = spec.temporal_mode == TemporalMode::full_sequence;
  if (full)
    tc.regularizer = Regularizer::none;
  else if (n > 1 && tc.regularizer == Regularizer::none)
    tc.regularizer = Regularizer::direct_l0;

  try {
    const Clock::time_point te = Clock::now();
    SequenceFit fit = full ? fit_full_sequence(spec, clip.frames, tc)
                           : fit_sequence(spec, clip.frames, tc);
    res.stream = encode_video(fit.encoding, cfg.quant);
    p.encode_seconds = elapsed_s(te);
    res.report = std::move(fit.report);

    const Clock::time_point td = Clock::now();
    DecodedVideo dec = decode_video(res.stream);
    p.decode_seconds = elapsed_s(td);

    if (static_cast<int>(dec.frames.size()) != n)
      throw DecodeError("run_method: decoded frame count mismatch");
    double acc = 0;
    for (int t = 0; t < n; ++t) acc += psnr(dec.frames[t], clip.frames[t]);
    p.psnr_mean = acc / n;
    for (size_t z : res.report.frame_nonzeros) p.delta_nonzeros += z;
    const RateInfo rate =
        measure_rate(res.stream.size(), p.width, p.height, n);
    p.total_bits = rate.total_bits;
    p.bpp = rate.bpp;
    res.decoded = std::move(dec.frames);
  } catch (const NumericError& e) {
    p.ok = false;
    p.error = e.what();
  }
  return res;
}

std::string rd_csv_header() {
  return "method,status,width,height,frames,params,lambda,total_bits,bpp,"
         "psnr,encode_s,decode_s,delta_nonzeros,fingerprint,error";
}

std::string rd_csv_row(const RdPoint& p) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%s,%s,%d,%d,%d,%zu,%.9g,%llu,%.8f,%.4f,%.3f,%.3f,%zu,%s,%s",
                p.method.c_str(), p.ok ? "ok" : "failed", p.width, p.height,
                p.frames, p.params, static_cast<double>(p.lambda),
                static_cast<unsigned long long>(p.total_bits), p.bpp,
                p.psnr_mean, p.encode_seconds, p.decode_seconds,
                p.delta_nonzeros, p.fingerprint.c_str(), p.error.c_str());
  return buf;
}

namespace {

struct GridJob {
  Method method;
  float lambda;
  std::vector<int> layers;
  int slice_length;
};

std::vector<GridJob> expand_grid(const SweepGrid& grid, const RunConfig& base) {
  std::vector<Method> methods = grid.methods;
  if (methods.empty())
    throw ContractError("sweep: grid must name at least one method");
  std::vector<float> lambdas =
      grid.lambdas.empty() ? std::vector<float>{base.train.lambda}
                           : grid.lambdas;
  std::vector<std::vector<int>> layer_sets =
      grid.layer_sets.empty() ? std::vector<std::vector<int>>{base.layers}
                              : grid.layer_sets;
  std::vector<int> slices = grid.slice_lengths.empty()
                                ? std::vector<int>{base.train.slice_length}
                                : grid.slice_lengths;
  std::vector<GridJob> jobs;
  for (Method m : methods)
    for (const std::vector<int>& ls : layer_sets)
      for (float lam : lambdas)
        for (int sl : slices) jobs.push_back({m, lam, ls, sl});
  return jobs;
}

// method,bpp,psnr[,encode_s[,decode_s]] rows from an externally produced
// file; merged into the output for joint tabulation.
std::vector<RdPoint> parse_external_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open external CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw IoError("external CSV '" + path + "' is empty");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  auto col = [&cols](const std::string& name) {
    for (size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ci_method = col("method"), ci_bpp = col("bpp"), ci_psnr = col("psnr");
  const int ci_enc = col("encode_s"), ci_dec = col("decode_s");
  if (ci_method < 0 || ci_bpp < 0 || ci_psnr < 0)
    throw IoError("external CSV '" + path +
                  "' needs method,bpp,psnr columns");
  std::vector<RdPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) f.push_back(c);
    if (static_cast<int>(f.size()) <= std::max(ci_bpp, ci_psnr)) continue;
    RdPoint p;
    p.method = f[ci_method];
    p.bpp = std::strtod(f[ci_bpp].c_str(), nullptr);
    p.psnr_mean = std::strtod(f[ci_psnr].c_str(), nullptr);
    if (ci_enc >= 0 && ci_enc < static_cast<int>(f.size()))
      p.encode_seconds = std::strtod(f[ci_enc].c_str(), nullptr);
    if (ci_dec >= 0 && ci_dec < static_cast<int>(f.size()))
      p.decode_seconds = std::strtod(f[ci_dec].c_str(), nullptr);
    p.fingerprint = "external";
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

SweepResult sweep(const VideoClip& clip, const SweepGrid& grid,
                  const RunConfig& base,
                  const std::vector<std::string>& external_csvs, int workers) {
  const std::vector<GridJob> jobs = expand_grid(grid, base);
  std::vector<RdPoint> points(jobs.size());
  std::atomic<size_t> next{0};
  const int n_workers =
      workers > 0 ? workers
                  : std::max(1u, std::min<unsigned>(
                                     std::thread::hardware_concurrency(),
                                     static_cast<unsigned>(jobs.size())));
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const GridJob& j = jobs[i];
      RunConfig rc = base;
      rc.layers = j.layers;
      rc.train.lambda = j.lambda;
      rc.train.slice_length = j.slice_length < 1 ? kNoSlicing : j.slice_length;
      points[i] = run_method(clip, j.method, rc).point;
    }
  };
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  SweepResult res;
  res.points = std::move(points);
  for (const std::string& path : external_csvs)
    for (RdPoint& p : parse_external_csv(path))
      res.points.push_back(std::move(p));
  res.csv = rd_csv_header() + "\n";
  for (const RdPoint& p : res.points) res.csv += rd_csv_row(p) + "\n";
  return res;
}

SweepResult run_sweep_toml(const std::string& toml_text) {
  const TomlDoc doc = parse_toml(toml_text);
  const TomlValue* clip_path = doc.find("", "clip");
  if (!clip_path) throw ConfigError("sweep grid: missing top-level 'clip'");
  const VideoClip clip = load_clip_auto(clip_path->as_string());

  RunConfig base;
  if (const TomlValue* v = doc.find("", "seed"))
    base.train.seed = static_cast<uint64_t>(v->as_number());
  if (const TomlValue* v = doc.find("", "steps"))
    base.train.steps = static_cast<int>(v->as_number());
  if (const TomlValue* v = doc.find("", "step_steps"))
    base.train.step_steps = static_cast<int>(v->as_number());
  if (const TomlValue* v = doc.find("", "batch"))
    base.train.batch_coords = static_cast<int>(v->as_number());
  if (const TomlValue* v = doc.find("", "quant_bits")) {
    base.quant.anchor_bits = static_cast<int>(v->as_number());
    base.quant.delta_bits = base.quant.anchor_bits;
  }
  if (const TomlValue* v = doc.find("", "reg"))
    base.train.regularizer = v->as_string() == "dct" ? Regularizer::dct_l0
                                                     : Regularizer::direct_l0;
  if (const TomlValue* v = doc.find("", "activation"))
    base.activation = v->as_string() == "fourier" ? Activation::fourier_relu
                                                  : Activation::siren;
  if (const TomlValue* v = doc.find("", "fourier_m"))
    base.fourier_m = static_cast<int>(v->as_number());
  if (const TomlValue* v = doc.find("", "skips"))
    base.skips = v->kind == TomlValue::Kind::boolean ? v->boolean
                                                     : v->as_number() != 0;

  SweepGrid grid;
  if (const TomlValue* v = doc.find("grid", "method"))
    for (const TomlValue& e : v->array)
      grid.methods.push_back(parse_method(e.as_string()));
  if (const TomlValue* v = doc.find("grid", "lambda"))
    for (const TomlValue& e : v->array)
      grid.lambdas.push_back(static_cast<float>(e.as_number()));
  if (const TomlValue* v = doc.find("grid", "layers"))
    for (const TomlValue& e : v->array) {
      std::vector<int> ls;
      std::stringstream ss(e.as_string());
      std::string tok;
      while (std::getline(ss, tok, ',')) ls.push_back(std::stoi(tok));
      grid.layer_sets.push_back(std::move(ls));
    }
  if (const TomlValue* v = doc.find("grid", "slice_len"))
    for (const TomlValue& e : v->array)
      grid.slice_lengths.push_back(static_cast<int>(e.as_number()));

  std::vector<std::string> external;
  if (const TomlValue* v = doc.find("merge", "csv"))
    for (const TomlValue& e : v->array) external.push_back(e.as_string());

  int workers = 0;
  if (const TomlValue* v = doc.find("", "workers"))
    workers = static_cast<int>(v->as_number());
  return sweep(clip, grid, base, external, workers);
}

}  // namespace wsvc
