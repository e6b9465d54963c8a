#include <cmath>
#include <cstdio>
#include <numbers>

#include "maskwave/errors.hpp"
#include "maskwave/rng.hpp"
#include "maskwave/synth.hpp"

namespace maskwave::synth {

namespace {

// Tone bands in Hz. Both sit inside the low-frequency band kept by the
// reduction step (bin 255 of the canonical geometry is ~3984 Hz).
constexpr double kMaskBandLo = 300.0;
constexpr double kMaskBandHi = 1700.0;
constexpr double kNonMaskBandLo = 2300.0;
constexpr double kNonMaskBandHi = 3700.0;

dsp::Waveform make_utterance(const PipelineConfig::SynthSettings& s,
                             Label label, bool loud_floor, Rng& rng) {
  const int n_tones = static_cast<int>(rng.uniform_int(1, 3));
  const double lo = label == Label::mask ? kMaskBandLo : kNonMaskBandLo;
  const double hi = label == Label::mask ? kMaskBandHi : kNonMaskBandHi;
  // gliding tones: frequency drifts inside the class band so the energy is
  // smeared across bins and band position has to be learned, not template
  // matched
  std::vector<double> f0, f1, amp, phase;
  for (int t = 0; t < n_tones; ++t) {
    f0.push_back(rng.uniform(lo, hi));
    f1.push_back(rng.uniform(lo, hi));
    amp.push_back(rng.uniform(0.25, 0.5));
    phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  // class-independent clutter in the guard band between the class bands
  const int n_clutter = static_cast<int>(rng.uniform_int(1, 2));
  for (int t = 0; t < n_clutter; ++t) {
    f0.push_back(rng.uniform(1750.0, 2250.0));
    f1.push_back(rng.uniform(1750.0, 2250.0));
    amp.push_back(rng.uniform(0.2, 0.5));
    phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  const double floor_level = loud_floor ? s.floor_loud : s.floor_quiet;

  dsp::Waveform w;
  w.sample_rate = s.sample_rate;
  w.samples.resize(static_cast<std::size_t>(s.length));
  const double dt = 1.0 / s.sample_rate;
  std::vector<double> theta = phase;
  for (int i = 0; i < s.length; ++i) {
    const double u = static_cast<double>(i) / s.length;
    double v = 0.0;
    for (std::size_t t = 0; t < f0.size(); ++t) {
      const double f = f0[t] + (f1[t] - f0[t]) * u;
      theta[t] += 2.0 * std::numbers::pi * f * dt;
      v += amp[t] * std::sin(theta[t]);
    }
    v += floor_level * rng.gaussian();
    w.samples[static_cast<std::size_t>(i)] = v;
  }
  return w;
}

}  // namespace

std::vector<SynthItem> generate_corpus(const PipelineConfig::SynthSettings& s,
                                       std::uint64_t seed) {
  std::vector<SynthItem> items;
  const struct {
    Split split;
    int count;
    const char* name;
  } splits[] = {{Split::train, s.train_count, "train"},
                {Split::dev, s.dev_count, "dev"},
                {Split::test, s.test_count, "test"}};

  for (const auto& sp : splits) {
    const int mask_count =
        sp.split == Split::train
            ? static_cast<int>(std::lround(sp.count * s.train_mask_fraction))
            : sp.count / 2;
    for (int i = 0; i < sp.count; ++i) {
      SynthItem item;
      item.split = sp.split;
      item.label = i < mask_count ? Label::mask : Label::non_mask;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "synth_%s_%04d", sp.name, i);
      item.id = buf;

      Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(sp.split),
                       static_cast<std::uint64_t>(i)));
      bool loud_floor;
      if (sp.split == Split::train) {
        // biased: mask leans quiet, non-mask leans loud
        const bool follow_bias = rng.uniform() < s.bias_strength;
        const bool class_floor_loud = item.label == Label::non_mask;
        loud_floor = follow_bias ? class_floor_loud : !class_floor_loud;
      } else {
        loud_floor = rng.uniform() < 0.5;
      }
      item.wav = make_utterance(s, item.label, loud_floor, rng);
      items.push_back(std::move(item));
    }
  }
  return items;
}

Manifest write_corpus(const std::vector<SynthItem>& items,
                      const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "wav");
  Manifest m;
  m.base_dir = out_dir;
  for (const auto& item : items) {
    // keep peaks inside PCM16 range
    dsp::Waveform scaled = item.wav;
    double peak = 0.0;
    for (double v : scaled.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.99) {
      const double k = 0.99 / peak;
      for (double& v : scaled.samples) v *= k;
    }
    const std::string rel = "wav/" + item.id + ".wav";
    dsp::write_wav(out_dir / rel, scaled);
    ManifestRecord r;
    r.id = item.id;
    r.path = rel;
    r.label = item.label;
    r.split = item.split;
    r.provenance = Provenance::original;
    m.records.push_back(std::move(r));
  }
  m.save(out_dir / "manifest.csv");
  return m;
}

}  // namespace maskwave::synth
