#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "maskwave/augment.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/rng.hpp"

using namespace maskwave;

namespace {

dsp::Waveform random_waveform(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  dsp::Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = rng.uniform(-1.0, 1.0);
  return w;
}

double power(const std::vector<double>& v) {
  double p = 0.0;
  for (double x : v) p += x * x;
  return p / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("perturb_noise: 60 dB leaves the signal nearly untouched") {
  const auto w = random_waveform(16000, 1);
  const auto out = aug::perturb_noise(w, 60.0, 99);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    num += (out.samples[i] - w.samples[i]) * (out.samples[i] - w.samples[i]);
    den += w.samples[i] * w.samples[i];
  }
  CHECK(std::sqrt(num / den) < 0.001 * 1.05);  // 0.1% plus realization spread

  // empirical SNR within 0.1 dB of the request at L=16000
  std::vector<double> noise(w.samples.size());
  for (std::size_t i = 0; i < noise.size(); ++i)
    noise[i] = out.samples[i] - w.samples[i];
  const double snr = 10.0 * std::log10(power(w.samples) / power(noise));
  CHECK(std::abs(snr - 60.0) < 0.1);
}

TEST_CASE("perturb_noise: 0 dB on a unit-power signal adds unit power") {
  dsp::Waveform w = random_waveform(16000, 2);
  const double p = power(w.samples);
  for (auto& s : w.samples) s /= std::sqrt(p);  // exactly unit power
  const auto out = aug::perturb_noise(w, 0.0, 5);
  std::vector<double> noise(w.samples.size());
  for (std::size_t i = 0; i < noise.size(); ++i)
    noise[i] = out.samples[i] - w.samples[i];
  CHECK(power(noise) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("perturb_noise: silent input is rejected") {
  dsp::Waveform w;
  w.samples.assign(1000, 0.0);
  CHECK_THROWS_AS(aug::perturb_noise(w, 10.0, 1), DegenerateInputError);
}

TEST_CASE("rotate: forced one-step rotation") {
  dsp::Waveform w;
  w.samples = {1, 2, 3, 4};
  const auto r = aug::rotate(w, 1);
  CHECK(r.samples == std::vector<double>{4, 1, 2, 3});
  const auto r0 = aug::rotate(w, 0);
  CHECK(r0.samples == w.samples);
  const auto rneg = aug::rotate(w, -1);
  CHECK(rneg.samples == std::vector<double>{2, 3, 4, 1});
  const auto rwrap = aug::rotate(w, 5);
  CHECK(rwrap.samples == std::vector<double>{4, 1, 2, 3});
}

TEST_CASE("time_shift: sample multiset is preserved") {
  for (std::uint64_t seed : {10ULL, 11ULL, 12ULL}) {
    const auto w = random_waveform(997, seed);
    const auto out = aug::time_shift(w, 0.2, seed * 7 + 1);
    auto a = w.samples, b = out.samples;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
  dsp::Waveform empty;
  CHECK_THROWS_AS(aug::time_shift(empty, 0.2, 1), DegenerateInputError);
  CHECK_THROWS_AS(aug::time_shift(random_waveform(8, 1), 1.5, 1),
                  ParameterError);
}

TEST_CASE("perturb_speed: identity factor is exact") {
  const auto w = random_waveform(16000, 3);
  const auto out = aug::perturb_speed(w, 1.0);
  CHECK(out.samples == w.samples);
}

TEST_CASE("perturb_speed: ramp matches closed-form interpolation") {
  dsp::Waveform ramp;
  ramp.samples.resize(1000);
  for (std::size_t i = 0; i < ramp.samples.size(); ++i)
    ramp.samples[i] = static_cast<double>(i);
  const double factor = 0.9;
  const auto out = aug::perturb_speed(ramp, factor);
  REQUIRE(out.samples.size() == 1000);
  // resampled length floor(999/0.9)+1 = 1111, center crop offset (1111-1000)/2
  const long offset = (1111 - 1000) / 2;
  for (std::size_t j = 0; j < out.samples.size(); ++j) {
    const double expect = (static_cast<double>(j) + offset) * factor;
    CHECK(out.samples[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("perturb_speed: factor > 1 pads back to length symmetrically") {
  const auto w = random_waveform(16000, 4);
  const auto out = aug::perturb_speed(w, 1.1);
  REQUIRE(out.samples.size() == 16000);
  // resampled length floor(15999/1.1)+1 = 14545, pad 1455 split 727/728
  for (long i = 0; i < 727; ++i) CHECK(out.samples[i] == 0.0);
  for (long i = 16000 - 728; i < 16000; ++i) CHECK(out.samples[i] == 0.0);
  CHECK(out.samples[727] != 0.0);
  CHECK_THROWS_AS(aug::perturb_speed(w, 0.0), ParameterError);
  CHECK_THROWS_AS(aug::perturb_speed(w, -0.5), ParameterError);
}

TEST_CASE("spec_mask: zero widths leave the input bit-identical") {
  auto s = dsp::Spectrogram::zeros(2, 40, 30);
  Rng rng(8);
  for (auto& v : s.data) v = rng.uniform(-2.0, 2.0);
  aug::AugmentationConfig cfg;
  cfg.freq_mask_max = 0;
  cfg.time_mask_max = 0;
  const auto out = aug::spec_mask(s, cfg, 77);
  CHECK(std::memcmp(out.data.data(), s.data.data(),
                    s.data.size() * sizeof(double)) == 0);
}

TEST_CASE("spec_mask: forced band is zeroed, the rest untouched") {
  auto s = dsp::Spectrogram::zeros(2, 40, 30);
  Rng rng(9);
  for (auto& v : s.data) v = rng.uniform(0.5, 2.0);  // strictly nonzero
  auto masked = s;
  aug::apply_freq_mask(masked, 7, 5);
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < 40; ++f)
      for (int t = 0; t < 30; ++t) {
        if (f >= 7 && f < 12)
          CHECK(masked.at(c, f, t) == 0.0);
        else
          CHECK(masked.at(c, f, t) == s.at(c, f, t));
      }
  CHECK_THROWS_AS(aug::apply_freq_mask(masked, 38, 5), ParameterError);
}

TEST_CASE("spec_mask: zeroed band count stays within the configured budget") {
  auto s = dsp::Spectrogram::zeros(2, 64, 64);
  Rng rng(10);
  for (auto& v : s.data) v = rng.uniform(0.5, 2.0);
  aug::AugmentationConfig cfg;
  cfg.freq_mask_max = 10;
  cfg.time_mask_max = 6;
  cfg.masks_per_axis = 2;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto out = aug::spec_mask(s, cfg, seed);
    int zero_rows = 0, zero_cols = 0;
    for (int f = 0; f < out.freq_bins; ++f) {
      bool all = true;
      for (int c = 0; c < 2 && all; ++c)
        for (int t = 0; t < out.time_bins && all; ++t)
          if (out.at(c, f, t) != 0.0) all = false;
      if (all) ++zero_rows;
    }
    for (int t = 0; t < out.time_bins; ++t) {
      bool all = true;
      for (int c = 0; c < 2 && all; ++c)
        for (int f = 0; f < out.freq_bins && all; ++f)
          if (out.at(c, f, t) != 0.0) all = false;
      if (all) ++zero_cols;
    }
    CHECK(zero_rows <= cfg.masks_per_axis * cfg.freq_mask_max);
    CHECK(zero_cols <= cfg.masks_per_axis * cfg.time_mask_max);
  }
}

TEST_CASE("augmentations are deterministic under a fixed seed") {
  const auto w = random_waveform(4096, 12);
  for (int rep = 0; rep < 2; ++rep) {
    const auto a = aug::perturb_noise(w, 15.0, 555);
    const auto b = aug::perturb_noise(w, 15.0, 555);
    CHECK(std::memcmp(a.samples.data(), b.samples.data(),
                      a.samples.size() * sizeof(double)) == 0);
    const auto c = aug::time_shift(w, 0.2, 556);
    const auto d = aug::time_shift(w, 0.2, 556);
    CHECK(c.samples == d.samples);
  }
  const auto e = aug::perturb_noise(w, 15.0, 555);
  const auto f = aug::perturb_noise(w, 15.0, 556);
  CHECK(e.samples != f.samples);
}

TEST_CASE("shape preservation") {
  const auto w = random_waveform(16000, 13);
  CHECK(aug::perturb_noise(w, 20, 1).samples.size() == 16000);
  CHECK(aug::time_shift(w, 0.2, 1).samples.size() == 16000);
  CHECK(aug::perturb_speed(w, 0.9).samples.size() == 16000);
  CHECK(aug::perturb_speed(w, 1.1).samples.size() == 16000);
  auto s = dsp::Spectrogram::zeros(2, 64, 64);
  aug::AugmentationConfig cfg;
  cfg.freq_mask_max = 10;
  cfg.time_mask_max = 10;
  const auto out = aug::spec_mask(s, cfg, 3);
  CHECK(out.freq_bins == 64);
  CHECK(out.time_bins == 64);
  CHECK(out.channels == 2);
}
