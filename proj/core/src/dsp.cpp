#include <cmath>
#include <cstring>
#include <numbers>

#include "maskwave/dsp.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/io_util.hpp"

namespace maskwave::dsp {

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place complex transform. Radix-2 when the length is a power of two,
// otherwise a direct O(N^2) DFT (non-canonical configs only).
class Fourier {
 public:
  explicit Fourier(int n) : n_(n) {
    if (is_pow2(n_)) {
      rev_.resize(n_);
      int bits = 0;
      while ((1 << bits) < n_) ++bits;
      for (int i = 0; i < n_; ++i) {
        int r = 0;
        for (int b = 0; b < bits; ++b)
          if (i & (1 << b)) r |= 1 << (bits - 1 - b);
        rev_[i] = r;
      }
      tw_re_.resize(n_ / 2);
      tw_im_.resize(n_ / 2);
      for (int k = 0; k < n_ / 2; ++k) {
        tw_re_[k] = std::cos(-2.0 * kPi * k / n_);
        tw_im_[k] = std::sin(-2.0 * kPi * k / n_);
      }
    }
  }

  void forward(double* re, double* im) const { transform(re, im, false); }
  void inverse(double* re, double* im) const {
    transform(re, im, true);
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) {
      re[i] *= scale;
      im[i] *= scale;
    }
  }

 private:
  void transform(double* re, double* im, bool invert) const {
    if (!rev_.empty()) {
      radix2(re, im, invert);
    } else {
      naive(re, im, invert);
    }
  }

  void radix2(double* re, double* im, bool invert) const {
    for (int i = 0; i < n_; ++i) {
      if (rev_[i] > i) {
        std::swap(re[i], re[rev_[i]]);
        std::swap(im[i], im[rev_[i]]);
      }
    }
    for (int len = 2; len <= n_; len <<= 1) {
      const int half = len / 2;
      const int stride = n_ / len;
      for (int start = 0; start < n_; start += len) {
        for (int k = 0; k < half; ++k) {
          const double wr = tw_re_[k * stride];
          const double wi = invert ? -tw_im_[k * stride] : tw_im_[k * stride];
          const int a = start + k;
          const int b = a + half;
          const double tr = re[b] * wr - im[b] * wi;
          const double ti = re[b] * wi + im[b] * wr;
          re[b] = re[a] - tr;
          im[b] = im[a] - ti;
          re[a] += tr;
          im[a] += ti;
        }
      }
    }
  }

  void naive(double* re, double* im, bool invert) const {
    const double sign = invert ? 1.0 : -1.0;
    std::vector<double> out_re(n_, 0.0), out_im(n_, 0.0);
    for (int k = 0; k < n_; ++k) {
      for (int n = 0; n < n_; ++n) {
        const double ang = sign * 2.0 * kPi * k * n / n_;
        const double c = std::cos(ang), s = std::sin(ang);
        out_re[k] += re[n] * c - im[n] * s;
        out_im[k] += re[n] * s + im[n] * c;
      }
    }
    std::memcpy(re, out_re.data(), sizeof(double) * n_);
    std::memcpy(im, out_im.data(), sizeof(double) * n_);
  }

  int n_;
  std::vector<int> rev_;
  std::vector<double> tw_re_, tw_im_;
};

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericDomainError(std::string("non-finite value in ") + what);
}

// Reflection padding without edge repetition: pad[p-1-i] = x[i+1].
std::vector<double> reflect_pad(const std::vector<double>& x, int pad) {
  if (pad == 0) return x;
  const auto n = static_cast<long>(x.size());
  if (n < 2)
    throw LengthError("signal too short for reflection padding");
  if (pad > n - 1)
    throw LengthError("reflection pad exceeds signal length");
  std::vector<double> out(x.size() + 2 * static_cast<std::size_t>(pad));
  for (long i = 0; i < pad; ++i) out[i] = x[static_cast<std::size_t>(pad - i)];
  std::memcpy(out.data() + pad, x.data(), sizeof(double) * x.size());
  for (long i = 0; i < pad; ++i)
    out[static_cast<std::size_t>(pad + n + i)] = x[static_cast<std::size_t>(n - 2 - i)];
  return out;
}

}  // namespace

void StftConfig::validate() const {
  if (fft_length < 2) throw ParameterError("fft_length must be >= 2");
  if (hop < 1) throw ParameterError("hop must be >= 1");
  if (window_length < 1 || window_length > fft_length)
    throw ParameterError("window_length must be in [1, fft_length]");
  if (pad_each_side < 0) throw ParameterError("pad_each_side must be >= 0");
}

int StftConfig::frame_count(std::size_t signal_length) const {
  const long padded = static_cast<long>(signal_length) + 2L * pad_each_side;
  if (padded < window_length) return 0;
  return static_cast<int>((padded - window_length) / hop) + 1;
}

Spectrogram Spectrogram::zeros(int channels, int freq_bins, int time_bins) {
  Spectrogram s;
  s.channels = channels;
  s.freq_bins = freq_bins;
  s.time_bins = time_bins;
  s.data.assign(static_cast<std::size_t>(channels) * freq_bins * time_bins, 0.0);
  return s;
}

std::vector<double> make_window(WindowKind kind, int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  switch (kind) {
    case WindowKind::hamming:
      for (int n = 0; n < length; ++n)
        w[n] = 0.54 - 0.46 * std::cos(2.0 * kPi * n / length);
      break;
  }
  return w;
}

Waveform normalize_peak(const Waveform& w) {
  check_finite(w.samples, "waveform");
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak < 1e-12) return w;
  Waveform out = w;
  for (double& s : out.samples) s /= peak;
  return out;
}

Spectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  check_finite(w.samples, "waveform");
  const auto padded = reflect_pad(w.samples, cfg.pad_each_side);
  if (static_cast<long>(padded.size()) < cfg.window_length)
    throw LengthError("signal shorter than the analysis window after padding");

  const int n_fft = cfg.fft_length;
  const int f_bins = cfg.freq_bins();
  const int frames = cfg.frame_count(w.samples.size());
  const auto window = make_window(cfg.window_kind, cfg.window_length);
  const Fourier fft(n_fft);

  Spectrogram s = Spectrogram::zeros(2, f_bins, frames);
  s.config = cfg;

  std::vector<double> re(static_cast<std::size_t>(n_fft));
  std::vector<double> im(static_cast<std::size_t>(n_fft));
  const std::size_t plane = static_cast<std::size_t>(f_bins) * frames;
  for (int m = 0; m < frames; ++m) {
    const std::size_t start = static_cast<std::size_t>(m) * cfg.hop;
    for (int i = 0; i < cfg.window_length; ++i)
      re[i] = padded[start + i] * window[i];
    std::fill(re.begin() + cfg.window_length, re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    fft.forward(re.data(), im.data());
    for (int k = 0; k < f_bins; ++k) {
      s.data[static_cast<std::size_t>(k) * frames + m] = re[k];
      s.data[plane + static_cast<std::size_t>(k) * frames + m] = im[k];
    }
  }
  return s;
}

Waveform istft(const Spectrogram& s) {
  const StftConfig& cfg = s.config;
  cfg.validate();
  if (s.channels != 2) throw ShapeError("spectrogram must have 2 channels");
  if (s.freq_bins != cfg.freq_bins())
    throw ShapeError("spectrogram bins do not match its config");
  if (s.time_bins < 1) throw ShapeError("empty spectrogram");

  const int n_fft = cfg.fft_length;
  const int frames = s.time_bins;
  const auto window = make_window(cfg.window_kind, cfg.window_length);
  const Fourier fft(n_fft);

  const std::size_t padded_len =
      static_cast<std::size_t>(frames - 1) * cfg.hop + cfg.window_length;
  std::vector<double> acc(padded_len, 0.0);
  std::vector<double> den(padded_len, 0.0);

  std::vector<double> re(static_cast<std::size_t>(n_fft));
  std::vector<double> im(static_cast<std::size_t>(n_fft));
  const std::size_t plane = static_cast<std::size_t>(s.freq_bins) * frames;
  for (int m = 0; m < frames; ++m) {
    for (int k = 0; k < s.freq_bins; ++k) {
      re[k] = s.data[static_cast<std::size_t>(k) * frames + m];
      im[k] = s.data[plane + static_cast<std::size_t>(k) * frames + m];
    }
    // hermitian completion of the one-sided spectrum
    for (int k = s.freq_bins; k < n_fft; ++k) {
      re[k] = re[n_fft - k];
      im[k] = -im[n_fft - k];
    }
    fft.inverse(re.data(), im.data());
    const std::size_t start = static_cast<std::size_t>(m) * cfg.hop;
    for (int i = 0; i < cfg.window_length; ++i) {
      acc[start + i] += re[i] * window[i];
      den[start + i] += window[i] * window[i];
    }
  }

  const long out_len = static_cast<long>(padded_len) - 2L * cfg.pad_each_side;
  if (out_len <= 0) throw LengthError("padding exceeds reconstructed length");
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(out_len));
  for (long i = 0; i < out_len; ++i) {
    const std::size_t j = static_cast<std::size_t>(i + cfg.pad_each_side);
    if (den[j] < 1e-12)
      throw ReconstructionError("vanishing window overlap in reconstruction");
    w.samples[static_cast<std::size_t>(i)] = acc[j] / den[j];
  }
  return w;
}

void write_spg(const std::filesystem::path& path, const Spectrogram& s) {
  io::atomic_write_file(path, [&](std::ostream& os) {
    os.write("SPG1", 4);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.channels));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.freq_bins));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.time_bins));
    for (double v : s.data) io::write_le<float>(os, static_cast<float>(v));
  });
}

Spectrogram read_spg(const std::filesystem::path& path) {
  const auto bytes = io::read_file_bytes(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "SPG1", 4) != 0)
    throw FormatError("not an SPG1 file: " + path.string());
  auto u32_at = [&](std::size_t off) {
    return static_cast<std::uint32_t>(bytes[off]) |
           static_cast<std::uint32_t>(bytes[off + 1]) << 8 |
           static_cast<std::uint32_t>(bytes[off + 2]) << 16 |
           static_cast<std::uint32_t>(bytes[off + 3]) << 24;
  };
  const std::uint32_t channels = u32_at(4);
  const std::uint32_t f_bins = u32_at(8);
  const std::uint32_t t_bins = u32_at(12);
  const std::size_t count =
      static_cast<std::size_t>(channels) * f_bins * t_bins;
  if (bytes.size() != 16 + count * 4)
    throw FormatError("SPG1 size mismatch: " + path.string());
  Spectrogram s;
  s.channels = static_cast<int>(channels);
  s.freq_bins = static_cast<int>(f_bins);
  s.time_bins = static_cast<int>(t_bins);
  s.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 16 + i * 4, 4);
    s.data[i] = static_cast<double>(f);
  }
  return s;
}

void ReduceConfig::validate() const {
  if (pool < 1) throw ParameterError("pool must be >= 1");
  if (low_bins < 1 || low_bins % pool != 0)
    throw ParameterError("low_bins must be a positive multiple of pool");
  if (time_target < 1 || time_target % pool != 0)
    throw ParameterError("time_target must be a positive multiple of pool");
}

Spectrogram reduce_spectrogram(const Spectrogram& s, const ReduceConfig& cfg) {
  cfg.validate();
  if (s.freq_bins == cfg.out_freq() && s.time_bins == cfg.out_time()) return s;
  if (s.freq_bins < cfg.low_bins)
    throw ShapeError("spectrogram has fewer frequency bins than low_bins");

  // Center the time axis on time_target columns (zero-pad or crop).
  const int t_in = s.time_bins;
  const int t_mid = cfg.time_target;
  const int shift = (t_mid - t_in) / 2;  // >0 pad left, <0 crop left

  Spectrogram out = Spectrogram::zeros(s.channels, cfg.out_freq(), cfg.out_time());
  const double inv_area = 1.0 / (static_cast<double>(cfg.pool) * cfg.pool);
  for (int c = 0; c < s.channels; ++c) {
    for (int fo = 0; fo < cfg.out_freq(); ++fo) {
      for (int to = 0; to < cfg.out_time(); ++to) {
        double sum = 0.0;
        for (int df = 0; df < cfg.pool; ++df) {
          const int f = fo * cfg.pool + df;
          for (int dt = 0; dt < cfg.pool; ++dt) {
            const int t_centered = to * cfg.pool + dt - shift;
            if (t_centered < 0 || t_centered >= t_in) continue;
            sum += s.at(c, f, t_centered);
          }
        }
        out.at(c, fo, to) = sum * inv_area;
      }
    }
  }
  return out;
}

}  // namespace maskwave::dsp
