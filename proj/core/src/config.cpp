#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "maskwave/config.hpp"
#include "maskwave/errors.hpp"

namespace maskwave {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class KvReader {
 public:
  explicit KvReader(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected 'key = value'");
      const auto key = trim(stripped.substr(0, eq));
      const auto value = trim(stripped.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty key");
      if (!kv_.emplace(key, value).second)
        throw ConfigError("duplicate config key: " + key);
    }
  }

  bool take(const std::string& key, std::string& out) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return false;
    out = it->second;
    kv_.erase(it);
    return true;
  }

  void take_int(const std::string& key, int& out) {
    std::string v;
    if (!take(key, v)) return;
    try {
      std::size_t pos = 0;
      out = std::stoi(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
    }
  }

  void take_u64(const std::string& key, std::uint64_t& out) {
    std::string v;
    if (!take(key, v)) return;
    try {
      std::size_t pos = 0;
      out = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
    }
  }

  void take_double(const std::string& key, double& out) {
    std::string v;
    if (!take(key, v)) return;
    try {
      std::size_t pos = 0;
      out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad number '" + v + "'");
    }
  }

  void take_bool(const std::string& key, bool& out) {
    std::string v;
    if (!take(key, v)) return;
    if (v == "true") out = true;
    else if (v == "false") out = false;
    else throw ConfigError("config key '" + key + "': expected true/false");
  }

  void take_double_list(const std::string& key, std::vector<double>& out) {
    std::string v;
    if (!take(key, v)) return;
    out = parse_list<double>(key, v, [](const std::string& s) {
      return std::stod(s);
    });
  }

  void take_int_list(const std::string& key, std::vector<int>& out) {
    std::string v;
    if (!take(key, v)) return;
    out = parse_list<int>(key, v, [](const std::string& s) {
      return std::stoi(s);
    });
  }

  void take_string_list(const std::string& key, std::vector<std::string>& out) {
    std::string v;
    if (!take(key, v)) return;
    out = parse_list<std::string>(key, v,
                                  [](const std::string& s) { return s; });
  }

  void finish() const {
    if (!kv_.empty())
      throw ConfigError("unknown config key: " + kv_.begin()->first);
  }

 private:
  template <typename T, typename Fn>
  static std::vector<T> parse_list(const std::string& key,
                                   const std::string& value, Fn fn) {
    std::vector<T> out;
    std::istringstream is(value);
    std::string item;
    while (std::getline(is, item, ',')) {
      const auto t = trim(item);
      if (t.empty()) throw ConfigError("config key '" + key + "': empty item");
      try {
        out.push_back(fn(t));
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad item '" + t + "'");
      }
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
  }

  std::map<std::string, std::string> kv_;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T, typename Fn>
std::string join(const std::vector<T>& v, Fn fn) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fn(v[i]);
  }
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_text(ss.str());
}

PipelineConfig PipelineConfig::parse_text(const std::string& text) {
  PipelineConfig cfg;
  KvReader kv(text);

  kv.take_int("stft.fft_length", cfg.stft.fft_length);
  kv.take_int("stft.hop", cfg.stft.hop);
  kv.take_int("stft.window_length", cfg.stft.window_length);
  kv.take_int("stft.pad_each_side", cfg.stft.pad_each_side);

  kv.take_int("reduce.low_bins", cfg.reduce.low_bins);
  kv.take_int("reduce.time_target", cfg.reduce.time_target);
  kv.take_int("reduce.pool", cfg.reduce.pool);

  std::string kind;
  if (kv.take("augment.kind", kind)) {
    if (kind == "noise") cfg.augment.kind = aug::AugKind::noise;
    else if (kind == "time_shift") cfg.augment.kind = aug::AugKind::time_shift;
    else if (kind == "speed") cfg.augment.kind = aug::AugKind::speed;
    else if (kind == "spec_mask") cfg.augment.kind = aug::AugKind::spec_mask;
    else throw ConfigError("augment.kind: unknown kind '" + kind + "'");
  }
  kv.take_double_list("augment.snr_db_choices", cfg.augment.snr_db_choices);
  kv.take_double("augment.max_shift_fraction", cfg.augment.max_shift_fraction);
  kv.take_double_list("augment.speed_factors", cfg.augment.speed_factors);
  kv.take_int("augment.freq_mask_max", cfg.augment.freq_mask_max);
  kv.take_int("augment.time_mask_max", cfg.augment.time_mask_max);
  kv.take_int("augment.masks_per_axis", cfg.augment.masks_per_axis);
  kv.take_u64("augment.seed", cfg.augment.rng_seed);

  kv.take_int("gan.base_channels", cfg.gan.base_channels);
  kv.take_int("gan.disc_channels", cfg.gan.disc_channels);
  kv.take_int("gan.res_blocks", cfg.gan.res_blocks);
  kv.take_double("gan.lambda_cycle", cfg.gan.lambda_cycle);
  kv.take_double("gan.lambda_identity", cfg.gan.lambda_identity);
  kv.take_double("gan.lambda_cam", cfg.gan.lambda_cam);
  kv.take_double("gan.lr", cfg.gan.lr);
  kv.take_double("gan.weight_decay", cfg.gan.weight_decay);
  kv.take_int("gan.batch", cfg.gan.batch);
  kv.take_int("gan.epochs", cfg.gan.epochs);
  kv.take_int("gan.steps_per_epoch", cfg.gan.steps_per_epoch);

  kv.take_int_list("embed.depths", cfg.embed.depths);
  kv.take_int("embed.base_channels", cfg.embed.base_channels);
  kv.take_int_list("embed.dims", cfg.embed.dims);
  kv.take_int("embed.epochs", cfg.embed.epochs);
  kv.take_double("embed.lr", cfg.embed.lr);
  kv.take_int("embed.batch", cfg.embed.batch);
  kv.take_double("embed.weight_decay", cfg.embed.weight_decay);
  kv.take_int("embed.runs", cfg.embed.runs);

  kv.take_double("svm.gamma", cfg.svm.gamma);
  kv.take_double_list("svm.c_grid", cfg.svm.c_grid);

  kv.take_int("synth.train", cfg.synth.train_count);
  kv.take_int("synth.dev", cfg.synth.dev_count);
  kv.take_int("synth.test", cfg.synth.test_count);
  kv.take_int("synth.sample_rate", cfg.synth.sample_rate);
  kv.take_int("synth.length", cfg.synth.length);
  kv.take_double("synth.bias_strength", cfg.synth.bias_strength);
  kv.take_double("synth.train_mask_fraction", cfg.synth.train_mask_fraction);
  kv.take_double("synth.floor_quiet", cfg.synth.floor_quiet);
  kv.take_double("synth.floor_loud", cfg.synth.floor_loud);

  kv.take_string_list("experiment.augmentations",
                      cfg.experiment.augmentations);
  kv.take_u64("experiment.seed", cfg.experiment.seed);
  kv.take_bool("experiment.swap_splits", cfg.experiment.swap_splits);
  kv.take_int("experiment.jobs", cfg.experiment.jobs);

  kv.finish();
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  stft.validate();
  reduce.validate();
  augment.validate();
  if (reduce.out_freq() != reduce.out_time())
    throw ConfigError("reduce settings must yield a square patch");
  gan::GanConfig g = gan;
  g.image_size = patch_size();
  g.validate();
  if (embed.depths.empty() || embed.depths.size() != embed.dims.size())
    throw ConfigError("embed.depths and embed.dims must have equal length");
  if (embed.epochs < 0 || embed.batch < 1 || embed.runs < 1)
    throw ConfigError("embed settings out of range");
  if (!(embed.lr > 0) || embed.weight_decay < 0)
    throw ConfigError("embed learning settings out of range");
  if (!(svm.gamma > 0)) throw ConfigError("svm.gamma must be > 0");
  if (svm.c_grid.empty()) throw ConfigError("svm.c_grid must not be empty");
  for (double c : svm.c_grid)
    if (!(c > 0)) throw ConfigError("svm.c_grid entries must be > 0");
  if (synth.train_count < 2 || synth.dev_count < 2 || synth.test_count < 2)
    throw ConfigError("synthetic split counts must be >= 2");
  if (synth.sample_rate < 1 || synth.length < 2)
    throw ConfigError("synthetic signal settings out of range");
  if (!(synth.bias_strength >= 0.0 && synth.bias_strength <= 1.0))
    throw ConfigError("synth.bias_strength must be in [0,1]");
  if (!(synth.train_mask_fraction > 0.0 && synth.train_mask_fraction < 1.0))
    throw ConfigError("synth.train_mask_fraction must be in (0,1)");
  if (experiment.augmentations.empty())
    throw ConfigError("experiment.augmentations must not be empty");
  for (const auto& a : experiment.augmentations)
    if (a != "none" && a != "noise" && a != "time_shift" && a != "speed" &&
        a != "spec_mask" && a != "translator")
      throw ConfigError("unknown augmentation '" + a + "'");
  if (experiment.jobs < 1) throw ConfigError("experiment.jobs must be >= 1");
}

std::string PipelineConfig::snapshot() const {
  std::ostringstream os;
  os << "stft.fft_length = " << stft.fft_length << "\n";
  os << "stft.hop = " << stft.hop << "\n";
  os << "stft.window_length = " << stft.window_length << "\n";
  os << "stft.pad_each_side = " << stft.pad_each_side << "\n";
  os << "reduce.low_bins = " << reduce.low_bins << "\n";
  os << "reduce.time_target = " << reduce.time_target << "\n";
  os << "reduce.pool = " << reduce.pool << "\n";
  const char* kind = "noise";
  switch (augment.kind) {
    case aug::AugKind::noise: kind = "noise"; break;
    case aug::AugKind::time_shift: kind = "time_shift"; break;
    case aug::AugKind::speed: kind = "speed"; break;
    case aug::AugKind::spec_mask: kind = "spec_mask"; break;
  }
  os << "augment.kind = " << kind << "\n";
  os << "augment.snr_db_choices = "
     << join(augment.snr_db_choices, [](double v) { return fmt(v); }) << "\n";
  os << "augment.max_shift_fraction = " << fmt(augment.max_shift_fraction)
     << "\n";
  os << "augment.speed_factors = "
     << join(augment.speed_factors, [](double v) { return fmt(v); }) << "\n";
  os << "augment.freq_mask_max = " << augment.freq_mask_max << "\n";
  os << "augment.time_mask_max = " << augment.time_mask_max << "\n";
  os << "augment.masks_per_axis = " << augment.masks_per_axis << "\n";
  os << "augment.seed = " << augment.rng_seed << "\n";
  os << "gan.base_channels = " << gan.base_channels << "\n";
  os << "gan.disc_channels = " << gan.disc_channels << "\n";
  os << "gan.res_blocks = " << gan.res_blocks << "\n";
  os << "gan.lambda_cycle = " << fmt(gan.lambda_cycle) << "\n";
  os << "gan.lambda_identity = " << fmt(gan.lambda_identity) << "\n";
  os << "gan.lambda_cam = " << fmt(gan.lambda_cam) << "\n";
  os << "gan.lr = " << fmt(gan.lr) << "\n";
  os << "gan.weight_decay = " << fmt(gan.weight_decay) << "\n";
  os << "gan.batch = " << gan.batch << "\n";
  os << "gan.epochs = " << gan.epochs << "\n";
  os << "gan.steps_per_epoch = " << gan.steps_per_epoch << "\n";
  os << "embed.depths = "
     << join(embed.depths, [](int v) { return std::to_string(v); }) << "\n";
  os << "embed.base_channels = " << embed.base_channels << "\n";
  os << "embed.dims = "
     << join(embed.dims, [](int v) { return std::to_string(v); }) << "\n";
  os << "embed.epochs = " << embed.epochs << "\n";
  os << "embed.lr = " << fmt(embed.lr) << "\n";
  os << "embed.batch = " << embed.batch << "\n";
  os << "embed.weight_decay = " << fmt(embed.weight_decay) << "\n";
  os << "embed.runs = " << embed.runs << "\n";
  os << "svm.gamma = " << fmt(svm.gamma) << "\n";
  os << "svm.c_grid = " << join(svm.c_grid, [](double v) { return fmt(v); })
     << "\n";
  os << "synth.train = " << synth.train_count << "\n";
  os << "synth.dev = " << synth.dev_count << "\n";
  os << "synth.test = " << synth.test_count << "\n";
  os << "synth.sample_rate = " << synth.sample_rate << "\n";
  os << "synth.length = " << synth.length << "\n";
  os << "synth.bias_strength = " << fmt(synth.bias_strength) << "\n";
  os << "synth.train_mask_fraction = " << fmt(synth.train_mask_fraction)
     << "\n";
  os << "synth.floor_quiet = " << fmt(synth.floor_quiet) << "\n";
  os << "synth.floor_loud = " << fmt(synth.floor_loud) << "\n";
  os << "experiment.augmentations = "
     << join(experiment.augmentations,
             [](const std::string& s) { return s; })
     << "\n";
  os << "experiment.seed = " << experiment.seed << "\n";
  os << "experiment.swap_splits = "
     << (experiment.swap_splits ? "true" : "false") << "\n";
  os << "experiment.jobs = " << experiment.jobs << "\n";
  return os.str();
}

}  // namespace maskwave
