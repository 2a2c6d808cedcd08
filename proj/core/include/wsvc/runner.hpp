#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wsvc/clip.hpp"
#include "wsvc/codec.hpp"
#include "wsvc/train.hpp"

namespace wsvc {

// The six in-scope codec variants: architecture x temporal strategy.
enum class Method : uint8_t {
  cbmlp_full,
  cbmlp_step2,
  cbmlp_step1,
  conv_full,
  conv_step2,
  conv_step1,
};

const char* method_name(Method m);
Method parse_method(const std::string& name);
bool method_is_conv(Method m);
bool method_is_full(Method m);

// Everything run_method needs besides the clip: architecture knobs plus the
// training and quantization settings.
struct RunConfig {
  std::vector<int> layers;  // empty -> paradigm default
  Activation activation = Activation::siren;
  float omega0 = 30.f;
  int fourier_m = 256;
  float fourier_sigma = 10.f;
  bool skips = false;
  TrainConfig train;
  QuantSpec quant;

  ModelSpec build_spec(Method m, int n_frames) const;
};

// One rate-distortion measurement. bpp always comes from the bytes actually
// written; PSNR from frames decoded out of those bytes.
struct RdPoint {
  std::string method;
  bool ok = true;
  std::string error;
  int width = 0, height = 0, frames = 0;
  size_t params = 0;
  uint64_t total_bits = 0;
  double bpp = 0;
  double psnr_mean = 0;
  double encode_seconds = 0;
  double decode_seconds = 0;
  size_t delta_nonzeros = 0;
  float lambda = 0.f;
  std::string fingerprint;
};

struct RunResult {
  RdPoint point;
  std::vector<uint8_t> stream;
  TrainReport report;
  std::vector<FrameBuffer> decoded;
};

// Trains, writes the bitstream, decodes it back and scores the decoded
// frames against the source. Training faults mark the point failed instead
// of throwing so sweeps can continue.
RunResult run_method(const VideoClip& clip, Method method,
                     const RunConfig& cfg);

// Cartesian sweep grid. Axes left empty fall back to the base RunConfig.
struct SweepGrid {
  std::vector<Method> methods;
  std::vector<float> lambdas;
  std::vector<std::vector<int>> layer_sets;
  std::vector<int> slice_lengths;
};

struct SweepResult {
  std::vector<RdPoint> points;
  std::string csv;  // header + one row per point (+ merged external rows)
};

std::string rd_csv_header();
std::string rd_csv_row(const RdPoint& p);

// Runs the grid in a worker pool; rows come out in grid order regardless of
// completion order. External baseline CSVs (method,bpp,psnr[,...]) merge in
// after the internal rows.
SweepResult sweep(const VideoClip& clip, const SweepGrid& grid,
                  const RunConfig& base,
                  const std::vector<std::string>& external_csvs = {},
                  int workers = 0);

// Full sweep driver for the CLI: parses the TOML grid file, loads the clip,
// runs, and returns the CSV text.
SweepResult run_sweep_toml(const std::string& toml_text);

}  // namespace wsvc
