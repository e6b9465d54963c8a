#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <limits>
#include <filesystem>
#include <numbers>

#include "maskwave/dsp.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/rng.hpp"

using namespace maskwave;

namespace {

// --- independent oracle helpers; these deliberately re-derive the frame
// --- pipeline instead of calling into dsp.

std::vector<double> oracle_reflect_pad(const std::vector<double>& x, int pad) {
  const long n = static_cast<long>(x.size());
  std::vector<double> out;
  for (long i = pad; i >= 1; --i) out.push_back(x[static_cast<std::size_t>(i)]);
  out.insert(out.end(), x.begin(), x.end());
  for (long i = 0; i < pad; ++i)
    out.push_back(x[static_cast<std::size_t>(n - 2 - i)]);
  return out;
}

std::vector<double> oracle_hamming(int len) {
  std::vector<double> w(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / len);
  return w;
}

// O(N^2) DFT of the m-th windowed, zero-padded frame.
std::vector<std::complex<double>> oracle_frame_dft(
    const std::vector<double>& samples, const dsp::StftConfig& cfg, int m) {
  const auto padded = oracle_reflect_pad(samples, cfg.pad_each_side);
  const auto window = oracle_hamming(cfg.window_length);
  std::vector<double> frame(static_cast<std::size_t>(cfg.fft_length), 0.0);
  for (int i = 0; i < cfg.window_length; ++i)
    frame[i] = padded[static_cast<std::size_t>(m) * cfg.hop + i] * window[i];
  std::vector<std::complex<double>> out(
      static_cast<std::size_t>(cfg.fft_length / 2 + 1));
  for (int k = 0; k <= cfg.fft_length / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int n = 0; n < cfg.fft_length; ++n) {
      const double ang = -2.0 * std::numbers::pi * k * n / cfg.fft_length;
      acc += frame[n] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Naive inverse: per-frame O(N^2) inverse DFT of the hermitian-completed
// spectrum, weighted overlap-add, window-squared normalization, unpad.
std::vector<double> oracle_istft(const dsp::Spectrogram& s) {
  const auto& cfg = s.config;
  const int n_fft = cfg.fft_length;
  const auto window = oracle_hamming(cfg.window_length);
  const std::size_t padded_len =
      static_cast<std::size_t>(s.time_bins - 1) * cfg.hop + cfg.window_length;
  std::vector<double> acc(padded_len, 0.0), den(padded_len, 0.0);
  for (int m = 0; m < s.time_bins; ++m) {
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(n_fft));
    for (int k = 0; k <= n_fft / 2; ++k)
      spec[k] = {s.at(0, k, m), s.at(1, k, m)};
    for (int k = n_fft / 2 + 1; k < n_fft; ++k)
      spec[k] = std::conj(spec[static_cast<std::size_t>(n_fft - k)]);
    for (int i = 0; i < cfg.window_length; ++i) {
      std::complex<double> v(0.0, 0.0);
      for (int k = 0; k < n_fft; ++k) {
        const double ang = 2.0 * std::numbers::pi * k * i / n_fft;
        v += spec[k] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      const double sample = v.real() / n_fft;
      acc[static_cast<std::size_t>(m) * cfg.hop + i] += sample * window[i];
      den[static_cast<std::size_t>(m) * cfg.hop + i] += window[i] * window[i];
    }
  }
  std::vector<double> out;
  for (std::size_t i = static_cast<std::size_t>(cfg.pad_each_side);
       i + static_cast<std::size_t>(cfg.pad_each_side) < padded_len; ++i)
    out.push_back(acc[i] / den[i]);
  return out;
}

std::vector<unsigned char> make_wav_bytes(const std::vector<std::int16_t>& pcm,
                                          std::uint32_t sample_rate,
                                          std::uint16_t channels = 1,
                                          std::uint16_t bits = 16,
                                          std::uint16_t format = 1) {
  std::vector<unsigned char> b;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
  };
  auto u16 = [&](std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
  };
  auto tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
  const std::uint32_t data_size = static_cast<std::uint32_t>(pcm.size() * 2);
  tag("RIFF");
  u32(36 + data_size);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(format);
  u16(channels);
  u32(sample_rate);
  u32(sample_rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  tag("data");
  u32(data_size);
  for (std::int16_t s : pcm) u16(static_cast<std::uint16_t>(s));
  return b;
}

dsp::Waveform random_waveform(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  dsp::Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = rng.uniform(-1.0, 1.0);
  return w;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(1e-300, std::sqrt(den));
}

}  // namespace

TEST_CASE("decode_wav: minimal single-sample file") {
  const auto bytes = make_wav_bytes({16384}, 16000);
  const auto w = dsp::decode_wav(bytes);
  CHECK(w.sample_rate == 16000);
  REQUIRE(w.samples.size() == 1);
  CHECK(w.samples[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("decode_wav: 16000 zeros") {
  const auto bytes = make_wav_bytes(std::vector<std::int16_t>(16000, 0), 16000);
  const auto w = dsp::decode_wav(bytes);
  REQUIRE(w.samples.size() == 16000);
  for (double s : w.samples) CHECK(s == 0.0);
}

TEST_CASE("decode_wav: unsupported and malformed inputs") {
  CHECK_THROWS_AS(dsp::decode_wav(make_wav_bytes({0}, 16000, 2)),
                  UnsupportedFormatError);
  CHECK_THROWS_AS(dsp::decode_wav(make_wav_bytes({0}, 16000, 1, 8)),
                  UnsupportedFormatError);
  CHECK_THROWS_AS(dsp::decode_wav(make_wav_bytes({0}, 16000, 1, 16, 3)),
                  UnsupportedFormatError);
  auto bad = make_wav_bytes({0}, 16000);
  bad[0] = 'X';
  CHECK_THROWS_AS(dsp::decode_wav(bad), FormatError);
  auto truncated = make_wav_bytes({1, 2, 3, 4}, 16000);
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(dsp::decode_wav(truncated), FormatError);
}

TEST_CASE("encode/decode round trip is exact for PCM16 grid values") {
  auto w = random_waveform(777, 42);
  for (auto& s : w.samples)
    s = std::floor(s * 32767.0) / 32768.0;  // representable grid
  const auto back = dsp::decode_wav(dsp::encode_wav(w));
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(back.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-12));
}

TEST_CASE("normalize_peak") {
  dsp::Waveform w;
  w.samples = {0.2, -0.4};
  const auto n = dsp::normalize_peak(w);
  CHECK(n.samples[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(n.samples[1] == doctest::Approx(-1.0).epsilon(1e-15));

  dsp::Waveform zero;
  zero.samples.assign(100, 0.0);
  const auto z = dsp::normalize_peak(zero);
  for (double s : z.samples) CHECK(s == 0.0);

  dsp::Waveform single;
  single.samples = {-0.25};
  CHECK(dsp::normalize_peak(single).samples[0] ==
        doctest::Approx(-1.0).epsilon(1e-15));

  dsp::Waveform bad;
  bad.samples = {0.1, std::nan("")};
  CHECK_THROWS_AS(dsp::normalize_peak(bad), NumericDomainError);
}

TEST_CASE("stft: canonical geometry is 2x513x250") {
  const auto w = random_waveform(16000, 7);
  const auto s = dsp::stft(w, dsp::StftConfig{});
  CHECK(s.channels == 2);
  CHECK(s.freq_bins == 513);
  CHECK(s.time_bins == 250);
  for (double v : s.data) CHECK(std::isfinite(v));
}

TEST_CASE("stft: shape law for assorted configs") {
  for (const auto& [len, fft, hop, win, pad] :
       {std::tuple{4000, 256, 32, 128, 0}, std::tuple{4000, 256, 50, 256, 64},
        std::tuple{3001, 96, 17, 60, 30}}) {
    dsp::StftConfig cfg;
    cfg.fft_length = fft;
    cfg.hop = hop;
    cfg.window_length = win;
    cfg.pad_each_side = pad;
    const auto w = random_waveform(static_cast<std::size_t>(len), 11);
    const auto s = dsp::stft(w, cfg);
    CHECK(s.freq_bins == fft / 2 + 1);
    CHECK(s.time_bins == (len + 2 * pad - win) / hop + 1);
  }
}

TEST_CASE("stft: all-zero waveform gives all-zero spectrogram") {
  dsp::Waveform w;
  w.samples.assign(16000, 0.0);
  const auto s = dsp::stft(w, dsp::StftConfig{});
  CHECK(s.freq_bins == 513);
  CHECK(s.time_bins == 250);
  for (double v : s.data) CHECK(v == 0.0);
}

TEST_CASE("stft: grid cosine hits the coherent-gain magnitude") {
  // 500 Hz = 62.5 * 8, bin 32 of the 1024-point grid
  const int k0 = 32;
  const double f = 62.5 * 8;
  dsp::Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(16000);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] =
        std::cos(2.0 * std::numbers::pi * f * static_cast<double>(i) / 16000.0);
  const auto s = dsp::stft(w, dsp::StftConfig{});
  const double expected = 0.54 * 512.0 / 2.0;  // coherent gain * W/2
  for (int m : {10, 100, 200}) {  // frames fully inside the unpadded region
    const double mag = std::hypot(s.at(0, k0, m), s.at(1, k0, m));
    CHECK(mag == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("stft: random frame matches the O(N^2) DFT oracle") {
  const auto w = random_waveform(16000, 1234);
  const auto s = dsp::stft(w, dsp::StftConfig{});
  Rng rng(99);
  for (int trial = 0; trial < 3; ++trial) {
    const int m = static_cast<int>(rng.uniform_int(0, s.time_bins - 1));
    const auto oracle = oracle_frame_dft(w.samples, s.config, m);
    for (int k = 0; k <= 512; ++k) {
      const double scale =
          std::max(1.0, std::abs(oracle[k].real()) + std::abs(oracle[k].imag()));
      CHECK(std::abs(s.at(0, k, m) - oracle[k].real()) / scale < 1e-9);
      CHECK(std::abs(s.at(1, k, m) - oracle[k].imag()) / scale < 1e-9);
    }
  }
}

TEST_CASE("stft: linearity") {
  const auto w1 = random_waveform(4000, 5);
  const auto w2 = random_waveform(4000, 6);
  const double a = 0.7, b = -1.3;
  dsp::StftConfig cfg;
  cfg.fft_length = 256;
  cfg.hop = 32;
  cfg.window_length = 128;
  cfg.pad_each_side = 16;
  dsp::Waveform mix;
  mix.samples.resize(4000);
  for (std::size_t i = 0; i < mix.samples.size(); ++i)
    mix.samples[i] = a * w1.samples[i] + b * w2.samples[i];
  const auto s1 = dsp::stft(w1, cfg);
  const auto s2 = dsp::stft(w2, cfg);
  const auto sm = dsp::stft(mix, cfg);
  for (std::size_t i = 0; i < sm.data.size(); ++i)
    CHECK(sm.data[i] ==
          doctest::Approx(a * s1.data[i] + b * s2.data[i]).epsilon(1e-9));
}

TEST_CASE("stft: per-frame Parseval identity") {
  const auto w = random_waveform(16000, 21);
  const dsp::StftConfig cfg;
  const auto s = dsp::stft(w, cfg);
  const auto padded = oracle_reflect_pad(w.samples, cfg.pad_each_side);
  const auto window = oracle_hamming(cfg.window_length);
  for (int m : {0, 37, 124, 249}) {
    double time_energy = 0.0;
    for (int i = 0; i < cfg.window_length; ++i) {
      const double v = padded[static_cast<std::size_t>(m) * cfg.hop + i] * window[i];
      time_energy += v * v;
    }
    double freq_energy = s.at(0, 0, m) * s.at(0, 0, m) +
                         s.at(1, 0, m) * s.at(1, 0, m);
    for (int k = 1; k < cfg.fft_length / 2; ++k)
      freq_energy += 2.0 * (s.at(0, k, m) * s.at(0, k, m) +
                            s.at(1, k, m) * s.at(1, k, m));
    freq_energy += s.at(0, 512, m) * s.at(0, 512, m) +
                   s.at(1, 512, m) * s.at(1, 512, m);
    freq_energy /= cfg.fft_length;
    CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-9));
  }
}

TEST_CASE("istft: round trip within 1e-6") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    const auto w = random_waveform(16000, seed);
    const auto rec = dsp::istft(dsp::stft(w, dsp::StftConfig{}));
    REQUIRE(rec.samples.size() == w.samples.size());
    CHECK(rel_l2(rec.samples, w.samples) < 1e-6);
  }
}

TEST_CASE("istft: all-zero spectrogram") {
  auto s = dsp::Spectrogram::zeros(2, 513, 250);
  s.config = dsp::StftConfig{};
  const auto w = dsp::istft(s);
  CHECK(w.samples.size() == 16000);
  for (double v : w.samples) CHECK(v == 0.0);
}

TEST_CASE("istft: bin-0-only spectrogram matches the naive inverse oracle") {
  dsp::StftConfig cfg;  // canonical, shorter signal
  const int frames = cfg.frame_count(2048);
  auto s = dsp::Spectrogram::zeros(2, 513, frames);
  s.config = cfg;
  Rng rng(17);
  for (int m = 0; m < frames; ++m) s.at(0, 0, m) = rng.uniform(-3.0, 3.0);
  const auto got = dsp::istft(s);
  const auto want = oracle_istft(s);
  REQUIRE(got.samples.size() == want.size());
  double max_err = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
    max_err = std::max(max_err, std::abs(got.samples[i] - want[i]));
  CHECK(max_err < 1e-6);
}

TEST_CASE("istft: round trip on the naive-DFT config path") {
  dsp::StftConfig cfg;
  cfg.fft_length = 96;  // not a power of two
  cfg.hop = 8;
  cfg.window_length = 48;
  cfg.pad_each_side = 20;
  const auto w = random_waveform(960, 3);
  const auto rec = dsp::istft(dsp::stft(w, cfg));
  CHECK(rel_l2(rec.samples, w.samples) < 1e-6);
}

TEST_CASE("stft: error paths") {
  dsp::StftConfig cfg;
  cfg.pad_each_side = 0;
  dsp::Waveform shorty;
  shorty.samples.assign(100, 0.1);
  CHECK_THROWS_AS(dsp::stft(shorty, cfg), LengthError);

  dsp::Waveform bad = random_waveform(16000, 9);
  bad.samples[55] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(dsp::stft(bad, dsp::StftConfig{}), NumericDomainError);

  dsp::StftConfig bad_cfg;
  bad_cfg.hop = 0;
  CHECK_THROWS_AS(dsp::stft(random_waveform(16000, 9), bad_cfg),
                  ParameterError);
}

TEST_CASE("SPG1 round trip and format errors") {
  const auto w = random_waveform(16000, 33);
  const auto s = dsp::stft(w, dsp::StftConfig{});
  const auto path = std::filesystem::temp_directory_path() / "mw_test.spg";
  dsp::write_spg(path, s);
  const auto back = dsp::read_spg(path);
  CHECK(back.channels == 2);
  CHECK(back.freq_bins == 513);
  CHECK(back.time_bins == 250);
  for (std::size_t i = 0; i < s.data.size(); ++i)
    CHECK(back.data[i] == static_cast<double>(static_cast<float>(s.data[i])));

  // corrupting the magic or the size must be detected
  auto bytes = [&] {
    std::ifstream is(path, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(is), {});
  }();
  const auto bad_path = std::filesystem::temp_directory_path() / "mw_bad.spg";
  {
    auto b = bytes;
    b[0] = 'X';
    std::ofstream os(bad_path, std::ios::binary);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
  }
  CHECK_THROWS_AS(dsp::read_spg(bad_path), FormatError);
  {
    auto b = bytes;
    b.resize(b.size() - 4);
    std::ofstream os(bad_path, std::ios::binary);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
  }
  CHECK_THROWS_AS(dsp::read_spg(bad_path), FormatError);
  std::filesystem::remove(path);
  std::filesystem::remove(bad_path);
}

TEST_CASE("reduce_spectrogram: canonical reduction and passthrough") {
  const auto w = random_waveform(16000, 4);
  const auto s = dsp::stft(w, dsp::StftConfig{});
  const dsp::ReduceConfig rc;
  const auto r = dsp::reduce_spectrogram(s, rc);
  CHECK(r.channels == 2);
  CHECK(r.freq_bins == 64);
  CHECK(r.time_bins == 64);
  const auto again = dsp::reduce_spectrogram(r, rc);
  CHECK(again.data == r.data);
}

TEST_CASE("reduce_spectrogram: pooled values by hand") {
  // 1 channel worth of data duplicated over 2 channels, F=4, T=2.
  auto s = dsp::Spectrogram::zeros(2, 4, 2);
  double v = 1.0;
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < 4; ++f)
      for (int t = 0; t < 2; ++t) s.at(c, f, t) = v++;
  dsp::ReduceConfig rc;
  rc.low_bins = 4;
  rc.time_target = 4;  // shift = (4-2)/2 = 1: real columns land at 1,2
  rc.pool = 2;
  const auto r = dsp::reduce_spectrogram(s, rc);
  REQUIRE(r.freq_bins == 2);
  REQUIRE(r.time_bins == 2);
  // out(f0=0,t0=0) pools {(f=0..1, t_centered=-1,0)}: only t=0 column
  CHECK(r.at(0, 0, 0) == doctest::Approx((1.0 + 3.0) / 4.0));
  // out(f0=0,t0=1) pools t_centered=1,2 -> real t=1 column only (t=2 is off)
  CHECK(r.at(0, 0, 1) == doctest::Approx((2.0 + 4.0) / 4.0));
  CHECK(r.at(0, 1, 0) == doctest::Approx((5.0 + 7.0) / 4.0));
  CHECK(r.at(0, 1, 1) == doctest::Approx((6.0 + 8.0) / 4.0));
}
