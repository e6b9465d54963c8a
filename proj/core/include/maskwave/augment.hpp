#pragma once

#include <cstdint>
#include <vector>

#include "maskwave/dsp.hpp"

namespace maskwave::aug {

enum class AugKind { noise, time_shift, speed, spec_mask };

struct AugmentationConfig {
  AugKind kind = AugKind::noise;
  std::vector<double> snr_db_choices{10.0, 15.0, 20.0};
  double max_shift_fraction = 0.2;
  std::vector<double> speed_factors{0.9, 1.1};
  int freq_mask_max = 50;
  int time_mask_max = 25;
  int masks_per_axis = 2;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Adds seeded Gaussian white noise scaled so the expected SNR equals snr_db.
dsp::Waveform perturb_noise(const dsp::Waveform& w, double snr_db,
                            std::uint64_t seed);

// Circular rotation by d samples: out[i] = in[(i - d) mod L].
dsp::Waveform rotate(const dsp::Waveform& w, long d);

// Rotation by a seeded uniform draw from [-max_shift_fraction*L, +...*L].
dsp::Waveform time_shift(const dsp::Waveform& w, double max_shift_fraction,
                         std::uint64_t seed);

// Linear-interpolation resampling by `factor`, then center-crop (factor < 1)
// or symmetric zero-pad (factor > 1) back to the original length.
dsp::Waveform perturb_speed(const dsp::Waveform& w, double factor);

// Zeroes the frequency rows [start, start+width) across both planes.
void apply_freq_mask(dsp::Spectrogram& s, int start, int width);
// Zeroes the time columns [start, start+width) across both planes.
void apply_time_mask(dsp::Spectrogram& s, int start, int width);

// SpecAugment-style masking: masks_per_axis seeded bands per axis, widths
// drawn uniformly from {0..freq_mask_max} / {0..time_mask_max}.
dsp::Spectrogram spec_mask(const dsp::Spectrogram& s,
                           const AugmentationConfig& cfg, std::uint64_t seed);

}  // namespace maskwave::aug
