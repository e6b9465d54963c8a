#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "maskwave/config.hpp"
#include "maskwave/manifest.hpp"

namespace maskwave::synth {

struct SynthItem {
  std::string id;
  Label label;
  Split split;
  dsp::Waveform wav;
};

// Biased two-class tone corpus. Each utterance is a small tone complex in a
// class-specific frequency band over a white noise floor. In the training
// split the floor level correlates with the class label (bias_strength);
// dev/test floors are drawn independently of the label, so a classifier that
// keys on the floor instead of the band falls over outside training.
std::vector<SynthItem> generate_corpus(const PipelineConfig::SynthSettings& s,
                                       std::uint64_t seed);

// Writes WAV files plus manifest.csv into out_dir; returns the manifest.
Manifest write_corpus(const std::vector<SynthItem>& items,
                      const std::filesystem::path& out_dir);

}  // namespace maskwave::synth
