#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "psgan/errors.hpp"

namespace psgan {

// ---------------------------------------------------------------------------
// Plain-text key-value document: one "key = value" per line, '#' comments.
// Used for run configs, render plan snapshots and checkpoint headers.
// ---------------------------------------------------------------------------
class KvDoc {
 public:
  void set(const std::string& key, const std::string& v) { kv_[key] = v; }
  void set_int(const std::string& key, std::int64_t v) { kv_[key] = std::to_string(v); }
  void set_bool(const std::string& key, bool v) { kv_[key] = v ? "true" : "false"; }
  void set_real(const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    kv_[key] = buf;
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  const std::string& get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  std::int64_t get_int(const std::string& key) const {
    try {
      std::size_t pos = 0;
      std::int64_t v = std::stoll(get(key), &pos);
      if (pos != get(key).size()) throw std::invalid_argument("");
      return v;
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      throw ConfigError("config key '" + key + "' is not an integer: " + get(key));
    }
  }

  double get_real(const std::string& key) const {
    try {
      std::size_t pos = 0;
      double v = std::stod(get(key), &pos);
      if (pos != get(key).size()) throw std::invalid_argument("");
      return v;
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      throw ConfigError("config key '" + key + "' is not a real: " + get(key));
    }
  }

  bool get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "' is not a bool: " + v);
  }

  void parse(std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#') continue;
      std::size_t eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
      std::string key = trim(s.substr(0, eq));
      std::string val = trim(s.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      kv_[key] = val;
    }
  }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> kv_;
};

// ---------------------------------------------------------------------------
// Noise tensor contract: channel cardinalities, spatial extent, prior range.
// ---------------------------------------------------------------------------
struct NoiseSpec {
  int d_l = 0;
  int d_g = 0;
  int d_p = 0;
  int L = 1;
  int M = 1;
  double prior_low = -1.0;
  double prior_high = 1.0;

  int d() const { return d_l + d_g + d_p; }

  void validate() const {
    if (d_l < 0) throw ConfigError("noise.d_l must be >= 0");
    if (d_g < 0) throw ConfigError("noise.d_g must be >= 0");
    if (d_p < 0) throw ConfigError("noise.d_p must be >= 0");
    if (d() < 1) throw ConfigError("noise: d_l + d_g + d_p must be >= 1");
    if (L < 1) throw ConfigError("noise.L must be >= 1");
    if (M < 1) throw ConfigError("noise.M must be >= 1");
    if (!(prior_low < prior_high))
      throw ConfigError("noise: prior_low must be < prior_high");
  }

  void to_doc(KvDoc& doc, const std::string& prefix = "noise.") const {
    doc.set_int(prefix + "d_l", d_l);
    doc.set_int(prefix + "d_g", d_g);
    doc.set_int(prefix + "d_p", d_p);
    doc.set_int(prefix + "L", L);
    doc.set_int(prefix + "M", M);
    doc.set_real(prefix + "prior_low", prior_low);
    doc.set_real(prefix + "prior_high", prior_high);
  }

  static NoiseSpec from_doc(const KvDoc& doc, const std::string& prefix = "noise.") {
    NoiseSpec s;
    s.d_l = static_cast<int>(doc.get_int(prefix + "d_l"));
    s.d_g = static_cast<int>(doc.get_int(prefix + "d_g"));
    s.d_p = static_cast<int>(doc.get_int(prefix + "d_p"));
    s.L = static_cast<int>(doc.get_int(prefix + "L"));
    s.M = static_cast<int>(doc.get_int(prefix + "M"));
    if (doc.has(prefix + "prior_low")) s.prior_low = doc.get_real(prefix + "prior_low");
    if (doc.has(prefix + "prior_high")) s.prior_high = doc.get_real(prefix + "prior_high");
    return s;
  }

  bool operator==(const NoiseSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Symmetric generator/discriminator layer plan.
// ---------------------------------------------------------------------------
struct NetSpec {
  int depth = 5;
  int kernel = 5;
  int base_channels = 64;
  int channel_cap = 512;
  bool use_batchnorm_g = true;
  bool use_batchnorm_d = false;
  int mlp_hidden = 60;  // hidden width of the wave-number MLP

  void validate() const {
    if (depth < 1) throw ConfigError("net.depth must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("net.kernel must be odd and >= 1");
    if (base_channels < 1) throw ConfigError("net.base_channels must be >= 1");
    if (channel_cap < base_channels)
      throw ConfigError("net.channel_cap must be >= net.base_channels");
    if (mlp_hidden < 1) throw ConfigError("net.mlp_hidden must be >= 1");
  }

  // Channel count of the feature map ell steps away from the image
  // (ell = 1 is the highest spatial resolution).
  int channels_at(int ell) const {
    std::int64_t c = base_channels;
    for (int i = 1; i < ell; ++i) c *= 2;
    return static_cast<int>(std::min<std::int64_t>(c, channel_cap));
  }

  void to_doc(KvDoc& doc, const std::string& prefix = "net.") const {
    doc.set_int(prefix + "depth", depth);
    doc.set_int(prefix + "kernel", kernel);
    doc.set_int(prefix + "base_channels", base_channels);
    doc.set_int(prefix + "channel_cap", channel_cap);
    doc.set_bool(prefix + "batchnorm_g", use_batchnorm_g);
    doc.set_bool(prefix + "batchnorm_d", use_batchnorm_d);
    doc.set_int(prefix + "mlp_hidden", mlp_hidden);
  }

  static NetSpec from_doc(const KvDoc& doc, const std::string& prefix = "net.") {
    NetSpec s;
    s.depth = static_cast<int>(doc.get_int(prefix + "depth"));
    if (doc.has(prefix + "kernel")) s.kernel = static_cast<int>(doc.get_int(prefix + "kernel"));
    if (doc.has(prefix + "base_channels"))
      s.base_channels = static_cast<int>(doc.get_int(prefix + "base_channels"));
    if (doc.has(prefix + "channel_cap"))
      s.channel_cap = static_cast<int>(doc.get_int(prefix + "channel_cap"));
    if (doc.has(prefix + "batchnorm_g")) s.use_batchnorm_g = doc.get_bool(prefix + "batchnorm_g");
    if (doc.has(prefix + "batchnorm_d")) s.use_batchnorm_d = doc.get_bool(prefix + "batchnorm_d");
    if (doc.has(prefix + "mlp_hidden")) s.mlp_hidden = static_cast<int>(doc.get_int(prefix + "mlp_hidden"));
    return s;
  }

  bool operator==(const NetSpec&) const = default;
};

// Spatial upsampling factor of the generator (and downsampling of the
// discriminator): every layer changes resolution by a factor of 2.
inline int upsample_factor(const NetSpec& spec) {
  if (spec.depth < 1) throw std::invalid_argument("upsample_factor: depth must be >= 1");
  return 1 << spec.depth;
}

// One output pixel's dependency extent in input pixels: r_1 = kernel,
// r_l = (r_{l-1} - 1) * 2 + kernel.
inline int receptive_field(const NetSpec& spec) {
  if (spec.depth < 1) throw std::invalid_argument("receptive_field: depth must be >= 1");
  int r = spec.kernel;
  for (int l = 1; l < spec.depth; ++l) r = (r - 1) * 2 + spec.kernel;
  return r;
}

// ---------------------------------------------------------------------------
// Optimization settings.
// ---------------------------------------------------------------------------
struct TrainConfig {
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int minibatch = 25;
  int patch_size = 160;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  std::int64_t log_every = 10;
  std::int64_t checkpoint_every = 1000;

  void validate() const {
    if (learning_rate < 0) throw ConfigError("train.learning_rate must be >= 0");
    if (minibatch < 1) throw ConfigError("train.minibatch must be >= 1");
    if (patch_size < 1) throw ConfigError("train.patch_size must be >= 1");
    if (steps < 0) throw ConfigError("train.steps must be >= 0");
    if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be >= 1");
  }

  void to_doc(KvDoc& doc, const std::string& prefix = "train.") const {
    doc.set_real(prefix + "learning_rate", learning_rate);
    doc.set_real(prefix + "adam_beta1", adam_beta1);
    doc.set_real(prefix + "adam_beta2", adam_beta2);
    doc.set_int(prefix + "minibatch", minibatch);
    doc.set_int(prefix + "patch_size", patch_size);
    doc.set_int(prefix + "steps", steps);
    doc.set_int(prefix + "seed", static_cast<std::int64_t>(seed));
    doc.set_int(prefix + "log_every", log_every);
    doc.set_int(prefix + "checkpoint_every", checkpoint_every);
  }

  static TrainConfig from_doc(const KvDoc& doc, const std::string& prefix = "train.") {
    TrainConfig c;
    if (doc.has(prefix + "learning_rate")) c.learning_rate = doc.get_real(prefix + "learning_rate");
    if (doc.has(prefix + "adam_beta1")) c.adam_beta1 = doc.get_real(prefix + "adam_beta1");
    if (doc.has(prefix + "adam_beta2")) c.adam_beta2 = doc.get_real(prefix + "adam_beta2");
    if (doc.has(prefix + "minibatch")) c.minibatch = static_cast<int>(doc.get_int(prefix + "minibatch"));
    if (doc.has(prefix + "patch_size")) c.patch_size = static_cast<int>(doc.get_int(prefix + "patch_size"));
    if (doc.has(prefix + "steps")) c.steps = doc.get_int(prefix + "steps");
    if (doc.has(prefix + "seed")) c.seed = static_cast<std::uint64_t>(doc.get_int(prefix + "seed"));
    if (doc.has(prefix + "log_every")) c.log_every = doc.get_int(prefix + "log_every");
    if (doc.has(prefix + "checkpoint_every"))
      c.checkpoint_every = doc.get_int(prefix + "checkpoint_every");
    return c;
  }

  bool operator==(const TrainConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Training image source descriptor.
// ---------------------------------------------------------------------------
struct DataConfig {
  std::string kind = "single_image";  // single_image | folder
  std::string path;
  double rescale = 1.0;  // optional uniform rescale applied at load

  void validate() const {
    if (kind != "single_image" && kind != "folder")
      throw ConfigError("data.kind must be 'single_image' or 'folder'");
    if (path.empty()) throw ConfigError("data.path must be set");
    if (rescale <= 0) throw ConfigError("data.rescale must be > 0");
  }

  void to_doc(KvDoc& doc, const std::string& prefix = "data.") const {
    doc.set(prefix + "kind", kind);
    doc.set(prefix + "path", path);
    doc.set_real(prefix + "rescale", rescale);
  }

  static DataConfig from_doc(const KvDoc& doc, const std::string& prefix = "data.") {
    DataConfig c;
    if (doc.has(prefix + "kind")) c.kind = doc.get(prefix + "kind");
    if (doc.has(prefix + "path")) c.path = doc.get(prefix + "path");
    if (doc.has(prefix + "rescale")) c.rescale = doc.get_real(prefix + "rescale");
    return c;
  }

  bool operator==(const DataConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Whole-run configuration.
// ---------------------------------------------------------------------------
struct RunConfig {
  NoiseSpec noise;
  NetSpec net;
  TrainConfig train;
  DataConfig data;
  std::string name = "run";

  void validate(bool require_data = true) const {
    noise.validate();
    net.validate();
    train.validate();
    if (require_data) data.validate();
    int up = upsample_factor(net);
    if (train.patch_size != up * noise.L || train.patch_size != up * noise.M)
      throw ConfigError("train.patch_size must equal 2^net.depth * noise.L (= " +
                        std::to_string(up * noise.L) + ") and likewise for noise.M; got " +
                        std::to_string(train.patch_size));
  }

  void to_doc(KvDoc& doc) const {
    noise.to_doc(doc);
    net.to_doc(doc);
    train.to_doc(doc);
    data.to_doc(doc);
    doc.set("run.name", name);
  }

  static RunConfig from_doc(const KvDoc& doc) {
    RunConfig c;
    c.noise = NoiseSpec::from_doc(doc);
    c.net = NetSpec::from_doc(doc);
    c.train = TrainConfig::from_doc(doc);
    c.data = DataConfig::from_doc(doc);
    c.name = doc.get_or("run.name", "run");
    return c;
  }

  void apply_override(const std::string& kv) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must be key=value, got: " + kv);
    KvDoc doc;
    to_doc(doc);
    std::string key = kv.substr(0, eq);
    // trim
    while (!key.empty() && key.back() == ' ') key.pop_back();
    std::string val = kv.substr(eq + 1);
    while (!val.empty() && val.front() == ' ') val.erase(val.begin());
    if (!doc.has(key)) throw ConfigError("unknown config key in override: " + key);
    doc.set(key, val);
    *this = from_doc(doc);
  }

  bool operator==(const RunConfig&) const = default;
};

// Named experiment presets: channel cardinalities and depths per image
// class, training-scale spatial extent (patch 160), desk-scale step counts.
inline RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.name = name;
  auto dims = [&](int dg, int dl, int dp, int depth) {
    c.noise.d_g = dg;
    c.noise.d_l = dl;
    c.noise.d_p = dp;
    c.net.depth = depth;
    int up = upsample_factor(c.net);
    c.train.patch_size = 160;
    c.noise.L = c.noise.M = 160 / up;
  };
  if (name == "text-p6") {
    dims(0, 10, 2, 4);
  } else if (name == "single-honeycomb") {
    dims(0, 10, 2, 5);
  } else if (name == "merrigum") {
    dims(10, 30, 2, 5);
  } else if (name == "dtd") {
    dims(40, 20, 4, 5);
  } else if (name == "facades") {
    dims(40, 20, 6, 5);
  } else if (name == "sydney") {
    dims(30, 20, 4, 5);
  } else {
    throw ConfigError("unknown preset: " + name +
                      " (known: text-p6 single-honeycomb merrigum dtd facades sydney)");
  }
  c.train.steps = 5000;
  return c;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "text-p6", "single-honeycomb", "merrigum", "dtd", "facades", "sydney"};
  return names;
}

}  // namespace psgan
