#ifndef SUBSPEC_FEATURES_HPP_
#define SUBSPEC_FEATURES_HPP_

#include <string>
#include <vector>

#include "subspec/tensor.hpp"

namespace subspec {

// STFT/mel/MFCC front-end settings.
struct FeatureConfig {
  double sample_rate = 16000.0;
  double window_ms = 30.0;
  double hop_ms = 10.0;
  std::size_t n_fft = 512;   // >= window in samples, power of two
  std::size_t n_mels = 64;
  std::size_t n_mfcc = 0;    // 0 means stop at log-mel
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  std::size_t window_samples() const;
  std::size_t hop_samples() const;
  void validate() const;

  // Acoustic-scene profile: 22050 Hz, 256 mel bins, log-mel output.
  static FeatureConfig asc();
  // Keyword-spotting profile: 16 kHz, 30 ms / 10 ms framing, 40 MFCCs.
  static FeatureConfig kws();
  static FeatureConfig by_name(const std::string& name);
};

struct AudioClip {
  std::vector<double> samples;  // mono, in [-1, 1]
  double sample_rate = 16000.0;
  int label = -1;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Hann-windowed frames, |FFT|^2 for bins 0..n_fft/2. Rows are frames.
Mat stft_power(const AudioClip& clip, const FeatureConfig& cfg);

// Triangular filters equally spaced on the mel scale, peak 1.
// (n_mels, n_fft/2 + 1).
Mat mel_filterbank(const FeatureConfig& cfg);

// Linear mel power, (1, 1, n_mels, frames); frequency along the F axis.
Tensor4 mel_spectrogram(const AudioClip& clip, const FeatureConfig& cfg);

// log(max(mel power, log_floor)), natural log.
Tensor4 log_mel(const AudioClip& clip, const FeatureConfig& cfg);

// Orthonormal DCT-II of the log-mel rows, first n_mfcc coefficients.
Tensor4 mfcc(const AudioClip& clip, const FeatureConfig& cfg);

// RIFF/WAVE, 16-bit PCM little-endian, mono.
AudioClip load_wav(const std::string& path);

}  // namespace subspec

#endif  // SUBSPEC_FEATURES_HPP_
