#include "pidfuse/audio.hpp"

#include <algorithm>
#include <cmath>
#include <fftw3.h>
#include <istream>
#include <iterator>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "pidfuse/error.hpp"

namespace pidfuse {
namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
 public:
  RealFft()
      : in_(static_cast<double*>(fftw_malloc(sizeof(double) * kFftSize))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * kSpectrumBins))) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), in_.get(), out_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_.get(); }
  void execute() { fftw_execute(plan_); }
  double magnitude(std::size_t bin) const { return std::hypot(out_.get()[bin][0], out_.get()[bin][1]); }

 private:
  std::unique_ptr<double, FftwDeleter> in_;
  std::unique_ptr<fftw_complex, FftwDeleter> out_;
  fftw_plan plan_ = nullptr;
};

}  // namespace

std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::size_t spectrogram_frame_count(std::size_t num_samples) {
  if (num_samples < kWindowSamples) return 0;
  return (num_samples - kWindowSamples) / kHopSamples + 1;
}

Matrix spectrogram(const Waveform& wave) {
  if (wave.sample_rate != kAudioSampleRate) {
    throw Error(ErrorKind::kWrongSampleRate, "sample rate " + std::to_string(wave.sample_rate) +
                                                 " Hz, expected 16000 Hz");
  }
  if (wave.samples.size() < kWindowSamples) {
    throw Error(ErrorKind::kTooShort, std::to_string(wave.samples.size()) +
                                          " samples, need at least one 400-sample window");
  }
  for (double s : wave.samples) {
    if (!std::isfinite(s)) throw Error(ErrorKind::kNonFiniteInput, "waveform has a non-finite sample");
  }
  const auto window = hamming_window(kWindowSamples);
  const std::size_t frames = spectrogram_frame_count(wave.samples.size());
  Matrix spec(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(kSpectrumBins));
  RealFft fft;
  double* in = fft.input();
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * kHopSamples;
    for (std::size_t i = 0; i < kWindowSamples; ++i) in[i] = wave.samples[start + i] * window[i];
    for (std::size_t i = kWindowSamples; i < kFftSize; ++i) in[i] = 0.0;
    fft.execute();
    for (std::size_t b = 0; b < kSpectrumBins; ++b) {
      spec(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b)) = fft.magnitude(b);
    }
  }
  return spec;
}

Embedding embed_audio(const Matrix& spec) {
  if (spec.rows() == 0 || spec.cols() == 0) throw Error(ErrorKind::kEmptyInput, "spectrogram is empty");
  const double n = static_cast<double>(spec.rows());
  Embedding out;
  out.reserve(2 * static_cast<std::size_t>(spec.cols()));
  const Eigen::RowVectorXd mean = spec.colwise().sum() / n;
  for (Eigen::Index b = 0; b < spec.cols(); ++b) out.push_back(mean(b));
  for (Eigen::Index b = 0; b < spec.cols(); ++b) {
    const double var = (spec.col(b).array() - mean(b)).square().sum() / n;
    out.push_back(std::sqrt(var));
  }
  out.resize(std::min(out.size(), kAudioEmbeddingDim));
  return out;
}

Waveform decode_pcm16(std::span<const std::uint8_t> bytes, int sample_rate) {
  if (bytes.size() % 2 != 0) {
    throw Error(ErrorKind::kMalformedRecord, "PCM stream has an odd number of bytes");
  }
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.reserve(bytes.size() / 2);
  for (std::size_t i = 0; i < bytes.size(); i += 2) {
    const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[i]) |
                                               (static_cast<std::uint16_t>(bytes[i + 1]) << 8));
    w.samples.push_back(static_cast<double>(raw) / 32768.0);
  }
  return w;
}

Waveform read_pcm16(std::istream& in, int sample_rate) {
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_pcm16(bytes, sample_rate);
}

std::vector<std::uint8_t> encode_pcm16(const Waveform& wave) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(wave.samples.size() * 2);
  for (double s : wave.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    const auto u = static_cast<std::uint16_t>(v);
    bytes.push_back(static_cast<std::uint8_t>(u & 0xFF));
    bytes.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return bytes;
}

}  // namespace pidfuse
