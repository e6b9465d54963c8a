#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace maskwave::dsp {

// Peak-normalized mono signal.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t length() const { return samples.size(); }
};

enum class WindowKind { hamming };

struct StftConfig {
  int fft_length = 1024;
  int hop = 64;
  int window_length = 512;
  WindowKind window_kind = WindowKind::hamming;
  int pad_each_side = 224;

  void validate() const;
  int freq_bins() const { return fft_length / 2 + 1; }
  // floor((L + 2*pad - window) / hop) + 1
  int frame_count(std::size_t signal_length) const;
};

// One-sided complex STFT stored as two real planes: channel 0 holds the real
// parts, channel 1 the imaginary parts. Layout is channel-major, then
// frequency, then time: index = c*F*T + f*T + t.
struct Spectrogram {
  std::vector<double> data;
  int channels = 2;
  int freq_bins = 0;
  int time_bins = 0;
  StftConfig config;

  double& at(int c, int f, int t) {
    return data[(static_cast<std::size_t>(c) * freq_bins + f) * time_bins + t];
  }
  double at(int c, int f, int t) const {
    return data[(static_cast<std::size_t>(c) * freq_bins + f) * time_bins + t];
  }
  std::size_t size() const { return data.size(); }
  static Spectrogram zeros(int channels, int freq_bins, int time_bins);
};

// --- WAV (RIFF, PCM 16-bit little-endian, mono) ---

Waveform decode_wav(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_wav(const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

// --- core transforms ---

// Divides by the maximum absolute sample. Signals with peak below 1e-12 are
// returned unchanged so silence stays silence.
Waveform normalize_peak(const Waveform& w);

Spectrogram stft(const Waveform& w, const StftConfig& cfg);
Waveform istft(const Spectrogram& s);

// Periodic Hamming window of the given length.
std::vector<double> make_window(WindowKind kind, int length);

// --- SPG1 container: "SPG1", u32{channels, F, T}, f32 data channel-major ---

void write_spg(const std::filesystem::path& path, const Spectrogram& s);
Spectrogram read_spg(const std::filesystem::path& path);

// --- reduction to the square training geometry ---

struct ReduceConfig {
  int low_bins = 256;     // keep frequency rows [0, low_bins)
  int time_target = 256;  // center-crop or zero-pad the time axis to this
  int pool = 4;           // average-pool factor on both axes

  void validate() const;
  int out_freq() const { return low_bins / pool; }
  int out_time() const { return time_target / pool; }
};

// Crops the low-frequency band, centers the time axis on `time_target`
// columns, then average-pools both axes. A spectrogram already at the target
// geometry passes through unchanged.
Spectrogram reduce_spectrogram(const Spectrogram& s, const ReduceConfig& cfg);

}  // namespace maskwave::dsp
