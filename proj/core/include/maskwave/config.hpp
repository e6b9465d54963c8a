#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maskwave/augment.hpp"
#include "maskwave/dsp.hpp"
#include "maskwave/gan.hpp"

namespace maskwave {

// Flat `key = value` configuration with dotted namespaces. Unknown keys are
// rejected so typos fail loudly.
struct PipelineConfig {
  dsp::StftConfig stft;
  dsp::ReduceConfig reduce;
  aug::AugmentationConfig augment;
  gan::GanConfig gan;

  struct EmbedConfig {
    std::vector<int> depths{2, 4, 6, 8};
    int base_channels = 16;
    std::vector<int> dims{64, 64, 128, 128};
    int epochs = 60;
    double lr = 1e-3;
    int batch = 16;
    double weight_decay = 1e-4;
    int runs = 3;
  } embed;

  struct SvmSettings {
    double gamma = 1e-2;
    std::vector<double> c_grid{1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3};
  } svm;

  struct SynthSettings {
    int train_count = 400;
    int dev_count = 200;
    int test_count = 200;
    int sample_rate = 16000;
    int length = 16000;
    double bias_strength = 0.85;  // train-split floor/label correlation
    double train_mask_fraction = 0.5;  // class prior of the training split
    double floor_quiet = 0.03;
    double floor_loud = 0.15;
  } synth;

  struct ExperimentSettings {
    std::vector<std::string> augmentations{"none", "translator"};
    std::uint64_t seed = 1;
    bool swap_splits = false;
    int jobs = 1;
  } experiment;

  static PipelineConfig parse_file(const std::filesystem::path& path);
  static PipelineConfig parse_text(const std::string& text);

  // Canonical serialization of every field; parse_text(snapshot()) is the
  // identity.
  std::string snapshot() const;
  void validate() const;

  // Translator/classifier geometry implied by the reduction settings.
  int patch_size() const { return reduce.out_freq(); }
};

}  // namespace maskwave
