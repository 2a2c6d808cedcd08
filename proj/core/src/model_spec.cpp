#include "wsvc/model_spec.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>

#include "wsvc/rng.hpp"

namespace wsvc {

namespace {

std::string fmt_float(float v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

std::string fmt_u64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%" PRIu64, v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stoi(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

void ModelSpec::validate() const {
  if (hidden_layers.empty())
    throw ConfigError("model spec: hidden_layers must be nonempty");
  for (int w : hidden_layers)
    if (w < 1) throw ConfigError("model spec: layer widths must be >= 1");
  if (paradigm == Paradigm::coordinate) {
    if (activation == Activation::fourier_relu) {
      if (fourier_m < 1)
        throw ConfigError("model spec: fourier_m must be >= 1");
      if (!(fourier_sigma > 0.f))
        throw ConfigError("model spec: fourier_sigma must be > 0");
    } else if (!(omega0 > 0.f)) {
      throw ConfigError("model spec: omega0 must be > 0");
    }
  }
}

std::string ModelSpec::to_text() const {
  validate();
  std::string t;
  t += std::string("paradigm=") +
       (paradigm == Paradigm::coordinate ? "coordinate" : "conv") + "\n";
  t += std::string("temporal=") +
       (temporal_mode == TemporalMode::full_sequence ? "sequence" : "anchor") +
       "\n";
  t += "layers=" + join_ints(hidden_layers) + "\n";
  if (paradigm == Paradigm::coordinate) {
    if (activation == Activation::siren) {
      t += "activation=siren\n";
      t += "omega0=" + fmt_float(omega0) + "\n";
    } else {
      t += "activation=fourier\n";
      t += "fourier_m=" + std::to_string(fourier_m) + "\n";
      t += "fourier_sigma=" + fmt_float(fourier_sigma) + "\n";
      t += "fourier_seed=" + fmt_u64(fourier_seed) + "\n";
    }
  } else {
    t += std::string("skips=") + (skip_connections ? "1" : "0") + "\n";
    t += "noise_seed=" + fmt_u64(noise_seed) + "\n";
  }
  return t;
}

ModelSpec ModelSpec::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("model spec text: bad line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&kv](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw ConfigError(std::string("model spec text: missing key '") + key +
                        "'");
    return it->second;
  };
  ModelSpec s;
  const std::string& par = need("paradigm");
  if (par == "coordinate")
    s.paradigm = Paradigm::coordinate;
  else if (par == "conv")
    s.paradigm = Paradigm::conv;
  else
    throw ConfigError("model spec text: unknown paradigm '" + par + "'");
  const std::string& tm = need("temporal");
  if (tm == "anchor")
    s.temporal_mode = TemporalMode::anchor_only;
  else if (tm == "sequence")
    s.temporal_mode = TemporalMode::full_sequence;
  else
    throw ConfigError("model spec text: unknown temporal mode '" + tm + "'");
  s.hidden_layers = parse_int_list(need("layers"));
  if (s.paradigm == Paradigm::coordinate) {
    const std::string& act = need("activation");
    if (act == "siren") {
      s.activation = Activation::siren;
      s.omega0 = std::strtof(need("omega0").c_str(), nullptr);
    } else if (act == "fourier") {
      s.activation = Activation::fourier_relu;
      s.fourier_m = std::stoi(need("fourier_m"));
      s.fourier_sigma = std::strtof(need("fourier_sigma").c_str(), nullptr);
      s.fourier_seed = std::strtoull(need("fourier_seed").c_str(), nullptr, 10);
    } else {
      throw ConfigError("model spec text: unknown activation '" + act + "'");
    }
  } else {
    s.skip_connections = need("skips") == "1";
    s.noise_seed = std::strtoull(need("noise_seed").c_str(), nullptr, 10);
  }
  s.validate();
  return s;
}

namespace {

void add_block(ParamLayout& L, std::string name, BlockKind kind,
               std::vector<int> shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  L.blocks.push_back({std::move(name), kind, std::move(shape), L.total, n});
  L.total += n;
}

}  // namespace

std::shared_ptr<const ParamLayout> build_layout(const ModelSpec& spec) {
  spec.validate();
  auto L = std::make_shared<ParamLayout>();
  if (spec.paradigm == Paradigm::coordinate) {
    int in = spec.activation == Activation::fourier_relu ? 2 * spec.fourier_m
                                                         : spec.coord_dim();
    std::vector<int> dims = spec.hidden_layers;
    dims.push_back(3);
    for (size_t i = 0; i < dims.size(); ++i) {
      const std::string tag = "layer" + std::to_string(i);
      add_block(*L, tag + ".weight", BlockKind::dense_weight, {in, dims[i]});
      add_block(*L, tag + ".bias", BlockKind::bias, {dims[i]});
      in = dims[i];
    }
  } else {
    int in = kNoiseChannels;
    for (size_t i = 0; i < spec.hidden_layers.size(); ++i) {
      const int cin = in + (spec.skip_connections && i > 0 ? kNoiseChannels : 0);
      const int cout = spec.hidden_layers[i];
      const std::string tag = "stage" + std::to_string(i);
      add_block(*L, tag + ".weight", BlockKind::conv_weight, {cout, cin, 3, 3});
      add_block(*L, tag + ".bias", BlockKind::bias, {cout});
      in = cout;
    }
    add_block(*L, "head.weight", BlockKind::conv_weight, {3, in, 3, 3});
    add_block(*L, "head.bias", BlockKind::bias, {3});
  }
  L->validate();
  return L;
}

size_t param_count(const ModelSpec& spec) { return build_layout(spec)->total; }

ParamVector init_params(const ModelSpec& spec, uint64_t seed) {
  auto layout = build_layout(spec);
  ParamVector pv;
  pv.layout = layout;
  pv.data.assign(layout->total, 0.f);
  Rng rng(seed);
  const bool siren = spec.paradigm == Paradigm::coordinate &&
                     spec.activation == Activation::siren;
  bool first_dense = true;
  for (const BlockDesc& b : layout->blocks) {
    float* p = pv.data.data() + b.offset;
    switch (b.kind) {
      case BlockKind::dense_weight: {
        const int fan_in = b.shape[0];
        float bound;
        if (siren && first_dense)
          bound = 1.f / static_cast<float>(fan_in);
        else if (siren)
          bound = std::sqrt(6.f / static_cast<float>(fan_in)) / spec.omega0;
        else
          bound = std::sqrt(6.f / static_cast<float>(fan_in));
        for (size_t i = 0; i < b.size; ++i) p[i] = rng.uniform_f(-bound, bound);
        first_dense = false;
        break;
      }
      case BlockKind::conv_weight: {
        const int fan_in = b.shape[1] * b.shape[2] * b.shape[3];
        const float bound = std::sqrt(6.f / static_cast<float>(fan_in));
        for (size_t i = 0; i < b.size; ++i) p[i] = rng.uniform_f(-bound, bound);
        break;
      }
      case BlockKind::bias: {
        // fan_in of the layer this bias belongs to = preceding weight block.
        const BlockDesc& w = layout->blocks[&b - layout->blocks.data() - 1];
        const int fan_in = w.kind == BlockKind::dense_weight
                               ? w.shape[0]
                               : w.shape[1] * w.shape[2] * w.shape[3];
        const float bound = 1.f / std::sqrt(static_cast<float>(fan_in));
        for (size_t i = 0; i < b.size; ++i) p[i] = rng.uniform_f(-bound, bound);
        break;
      }
    }
  }
  return pv;
}

}  // namespace wsvc
