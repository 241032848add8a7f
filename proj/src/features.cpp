#include "subspec/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "subspec/fft.hpp"

namespace subspec {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

std::size_t FeatureConfig::window_samples() const {
  return static_cast<std::size_t>(std::lround(window_ms * sample_rate / 1000.0));
}

std::size_t FeatureConfig::hop_samples() const {
  return static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
}

void FeatureConfig::validate() const {
  if (sample_rate <= 0.0 || window_ms <= 0.0 || hop_ms <= 0.0)
    throw InvalidConfig("FeatureConfig: rates and durations must be positive");
  if (!is_power_of_two(n_fft)) throw InvalidConfig("FeatureConfig: n_fft must be a power of two");
  if (n_fft < window_samples())
    throw InvalidConfig("FeatureConfig: n_fft smaller than the window");
  if (n_mels == 0) throw InvalidConfig("FeatureConfig: n_mels must be >= 1");
  if (n_mfcc > n_mels) throw InvalidConfig("FeatureConfig: n_mfcc must be <= n_mels");
  if (!(fmin < fmax) || fmax > sample_rate / 2.0 + 1e-9)
    throw InvalidConfig("FeatureConfig: need fmin < fmax <= sample_rate/2");
  if (!(log_floor > 0.0)) throw InvalidConfig("FeatureConfig: log_floor must be > 0");
}

FeatureConfig FeatureConfig::asc() {
  FeatureConfig cfg;
  cfg.sample_rate = 22050.0;
  cfg.window_ms = 1024.0 * 1000.0 / 22050.0;
  cfg.hop_ms = 512.0 * 1000.0 / 22050.0;
  cfg.n_fft = 1024;
  cfg.n_mels = 256;
  cfg.n_mfcc = 0;
  cfg.fmin = 0.0;
  cfg.fmax = 11025.0;
  return cfg;
}

FeatureConfig FeatureConfig::kws() {
  FeatureConfig cfg;
  cfg.sample_rate = 16000.0;
  cfg.window_ms = 30.0;
  cfg.hop_ms = 10.0;
  cfg.n_fft = 512;
  cfg.n_mels = 64;
  cfg.n_mfcc = 40;
  cfg.fmin = 0.0;
  cfg.fmax = 8000.0;
  return cfg;
}

FeatureConfig FeatureConfig::by_name(const std::string& name) {
  if (name == "asc") return asc();
  if (name == "kws") return kws();
  throw InvalidConfig("unknown feature profile: " + name + " (expected asc|kws)");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Mat stft_power(const AudioClip& clip, const FeatureConfig& cfg) {
  cfg.validate();
  const std::size_t win = cfg.window_samples();
  const std::size_t hop = cfg.hop_samples();
  if (clip.samples.size() < win)
    throw ClipTooShort("clip of " + std::to_string(clip.samples.size()) +
                       " samples is shorter than one " + std::to_string(win) + "-sample window");
  const std::size_t frames = (clip.samples.size() - win) / hop + 1;
  const std::size_t bins = cfg.n_fft / 2 + 1;

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(win));

  Mat out(frames, bins);
  std::vector<double> re(cfg.n_fft), im(cfg.n_fft);
  for (std::size_t fr = 0; fr < frames; ++fr) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const std::size_t base = fr * hop;
    for (std::size_t i = 0; i < win; ++i) re[i] = clip.samples[base + i] * window[i];
    fft_inplace(re, im, false);
    for (std::size_t b = 0; b < bins; ++b) out.at(fr, b) = re[b] * re[b] + im[b] * im[b];
  }
  return out;
}

Mat mel_filterbank(const FeatureConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(cfg.n_mels + 1));

  Mat fb(cfg.n_mels, bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * cfg.sample_rate / static_cast<double>(cfg.n_fft);
      double w = 0.0;
      if (f > lo && f < hi) w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      fb.at(m, b) = w;
    }
  }
  return fb;
}

Tensor4 mel_spectrogram(const AudioClip& clip, const FeatureConfig& cfg) {
  const Mat power = stft_power(clip, cfg);
  const Mat fb = mel_filterbank(cfg);
  Tensor4 out(1, 1, cfg.n_mels, power.rows);
  for (std::size_t m = 0; m < cfg.n_mels; ++m)
    for (std::size_t fr = 0; fr < power.rows; ++fr) {
      double acc = 0.0;
      for (std::size_t b = 0; b < power.cols; ++b) acc += fb.at(m, b) * power.at(fr, b);
      out.at(0, 0, m, fr) = acc;
    }
  return out;
}

Tensor4 log_mel(const AudioClip& clip, const FeatureConfig& cfg) {
  Tensor4 out = mel_spectrogram(clip, cfg);
  for (double& v : out.data) v = std::log(std::max(v, cfg.log_floor));
  return out;
}

Tensor4 mfcc(const AudioClip& clip, const FeatureConfig& cfg) {
  cfg.validate();
  if (cfg.n_mfcc == 0)
    throw InvalidConfig("mfcc: n_mfcc is 0 (configuration stops at log-mel)");
  const Tensor4 lm = log_mel(clip, cfg);
  const std::size_t m_count = cfg.n_mels;
  const std::size_t frames = lm.t;
  Tensor4 out(1, 1, cfg.n_mfcc, frames);
  const double a0 = std::sqrt(1.0 / static_cast<double>(m_count));
  const double ak = std::sqrt(2.0 / static_cast<double>(m_count));
  for (std::size_t k = 0; k < cfg.n_mfcc; ++k)
    for (std::size_t fr = 0; fr < frames; ++fr) {
      double acc = 0.0;
      for (std::size_t m = 0; m < m_count; ++m)
        acc += lm.at(0, 0, m, fr) *
               std::cos(kPi * static_cast<double>(k) * (2.0 * static_cast<double>(m) + 1.0) /
                        (2.0 * static_cast<double>(m_count)));
      out.at(0, 0, k, fr) = (k == 0 ? a0 : ak) * acc;
    }
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

AudioClip load_wav(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Io("cannot open WAV file: " + path);
  unsigned char hdr[12];
  if (std::fread(hdr, 1, 12, f.get()) != 12 || std::memcmp(hdr, "RIFF", 4) != 0 ||
      std::memcmp(hdr + 8, "WAVE", 4) != 0)
    throw Io("not a RIFF/WAVE file: " + path);

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t sample_rate = 0;
  std::vector<unsigned char> payload;

  unsigned char chunk[8];
  while (std::fread(chunk, 1, 8, f.get()) == 8) {
    const std::uint32_t size = rd_u32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      std::vector<unsigned char> fmt(size);
      if (std::fread(fmt.data(), 1, size, f.get()) != size || size < 16)
        throw Io("truncated fmt chunk: " + path);
      format = rd_u16(fmt.data());
      channels = rd_u16(fmt.data() + 2);
      sample_rate = rd_u32(fmt.data() + 4);
      bits = rd_u16(fmt.data() + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      payload.resize(size);
      if (std::fread(payload.data(), 1, size, f.get()) != size)
        throw Io("truncated data chunk: " + path);
    } else {
      // skip unknown chunk (word aligned)
      std::fseek(f.get(), static_cast<long>(size + (size & 1)), SEEK_CUR);
      continue;
    }
    if (size & 1) std::fseek(f.get(), 1, SEEK_CUR);
  }
  if (!have_fmt || payload.empty()) throw Io("missing fmt or data chunk: " + path);
  if (format != 1) throw Io("only PCM WAV is supported: " + path);
  if (channels != 1)
    throw Io("only mono WAV is supported (got " + std::to_string(channels) +
             " channels): " + path);
  if (bits != 16) throw Io("only 16-bit PCM is supported: " + path);

  AudioClip clip;
  clip.sample_rate = static_cast<double>(sample_rate);
  clip.samples.resize(payload.size() / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const std::int16_t s =
        static_cast<std::int16_t>(payload[2 * i] | (payload[2 * i + 1] << 8));
    clip.samples[i] = static_cast<double>(s) / 32768.0;
  }
  if (clip.samples.empty()) throw Io("empty WAV payload: " + path);
  return clip;
}

}  // namespace subspec
