#include <cmath>

#include "maskwave/augment.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/rng.hpp"

namespace maskwave::aug {

void AugmentationConfig::validate() const {
  for (double snr : snr_db_choices)
    if (!std::isfinite(snr)) throw ParameterError("snr_db must be finite");
  if (snr_db_choices.empty()) throw ParameterError("snr_db_choices empty");
  if (!(max_shift_fraction > 0.0 && max_shift_fraction <= 1.0))
    throw ParameterError("max_shift_fraction must be in (0, 1]");
  if (speed_factors.empty()) throw ParameterError("speed_factors empty");
  for (double f : speed_factors)
    if (!(f > 0.0)) throw ParameterError("speed factors must be > 0");
  if (freq_mask_max < 0 || time_mask_max < 0)
    throw ParameterError("mask widths must be >= 0");
  if (masks_per_axis < 0) throw ParameterError("masks_per_axis must be >= 0");
}

dsp::Waveform perturb_noise(const dsp::Waveform& w, double snr_db,
                            std::uint64_t seed) {
  const std::size_t n = w.samples.size();
  double power = 0.0;
  for (double s : w.samples) power += s * s;
  power /= static_cast<double>(n == 0 ? 1 : n);
  if (power <= 1e-24)
    throw DegenerateInputError("silent signal: SNR is undefined");

  // Unit-variance white noise scaled so E[P_noise] = P_signal / 10^(snr/10).
  const double alpha = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  Rng rng(seed);
  dsp::Waveform out = w;
  for (double& s : out.samples) s += alpha * rng.gaussian();
  return out;
}

dsp::Waveform rotate(const dsp::Waveform& w, long d) {
  const auto n = static_cast<long>(w.samples.size());
  if (n == 0) throw DegenerateInputError("empty waveform");
  dsp::Waveform out = w;
  const long shift = ((d % n) + n) % n;
  for (long i = 0; i < n; ++i)
    out.samples[static_cast<std::size_t>(i)] =
        w.samples[static_cast<std::size_t>((i - shift + n) % n)];
  return out;
}

dsp::Waveform time_shift(const dsp::Waveform& w, double max_shift_fraction,
                         std::uint64_t seed) {
  if (!(max_shift_fraction > 0.0 && max_shift_fraction <= 1.0))
    throw ParameterError("max_shift_fraction must be in (0, 1]");
  const auto n = static_cast<long>(w.samples.size());
  if (n == 0) throw DegenerateInputError("empty waveform");
  const long max_d =
      static_cast<long>(std::floor(max_shift_fraction * static_cast<double>(n)));
  Rng rng(seed);
  const long d = rng.uniform_int(-max_d, max_d);
  return rotate(w, d);
}

dsp::Waveform perturb_speed(const dsp::Waveform& w, double factor) {
  if (!(factor > 0.0)) throw ParameterError("speed factor must be > 0");
  const auto n = static_cast<long>(w.samples.size());
  if (n == 0) throw DegenerateInputError("empty waveform");
  if (n == 1) return w;

  // Resample: y[j] = x(j * factor), linear interpolation.
  const long n_out =
      static_cast<long>(std::floor(static_cast<double>(n - 1) / factor)) + 1;
  std::vector<double> resampled(static_cast<std::size_t>(n_out));
  for (long j = 0; j < n_out; ++j) {
    const double pos = static_cast<double>(j) * factor;
    long i0 = static_cast<long>(std::floor(pos));
    if (i0 >= n - 1) i0 = n - 2;
    const double frac = pos - static_cast<double>(i0);
    resampled[static_cast<std::size_t>(j)] =
        w.samples[static_cast<std::size_t>(i0)] * (1.0 - frac) +
        w.samples[static_cast<std::size_t>(i0 + 1)] * frac;
  }

  dsp::Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(static_cast<std::size_t>(n), 0.0);
  if (n_out >= n) {
    const long offset = (n_out - n) / 2;  // center crop
    for (long i = 0; i < n; ++i)
      out.samples[static_cast<std::size_t>(i)] =
          resampled[static_cast<std::size_t>(i + offset)];
  } else {
    const long pad = n - n_out;
    const long left = pad / 2;  // symmetric zero pad, extra sample on right
    for (long i = 0; i < n_out; ++i)
      out.samples[static_cast<std::size_t>(i + left)] =
          resampled[static_cast<std::size_t>(i)];
  }
  return out;
}

void apply_freq_mask(dsp::Spectrogram& s, int start, int width) {
  if (start < 0 || width < 0 || start + width > s.freq_bins)
    throw ParameterError("frequency mask out of range");
  for (int c = 0; c < s.channels; ++c)
    for (int f = start; f < start + width; ++f)
      for (int t = 0; t < s.time_bins; ++t) s.at(c, f, t) = 0.0;
}

void apply_time_mask(dsp::Spectrogram& s, int start, int width) {
  if (start < 0 || width < 0 || start + width > s.time_bins)
    throw ParameterError("time mask out of range");
  for (int c = 0; c < s.channels; ++c)
    for (int f = 0; f < s.freq_bins; ++f)
      for (int t = start; t < start + width; ++t) s.at(c, f, t) = 0.0;
}

dsp::Spectrogram spec_mask(const dsp::Spectrogram& s,
                           const AugmentationConfig& cfg, std::uint64_t seed) {
  if (cfg.freq_mask_max > s.freq_bins || cfg.time_mask_max > s.time_bins)
    throw ParameterError("mask width exceeds spectrogram axis");
  dsp::Spectrogram out = s;
  Rng rng(seed);
  for (int i = 0; i < cfg.masks_per_axis; ++i) {
    const int u = static_cast<int>(rng.uniform_int(0, cfg.freq_mask_max));
    const int start = static_cast<int>(rng.uniform_int(0, s.freq_bins - u));
    apply_freq_mask(out, start, u);
  }
  for (int i = 0; i < cfg.masks_per_axis; ++i) {
    const int u = static_cast<int>(rng.uniform_int(0, cfg.time_mask_max));
    const int start = static_cast<int>(rng.uniform_int(0, s.time_bins - u));
    apply_time_mask(out, start, u);
  }
  return out;
}

}  // namespace maskwave::aug
