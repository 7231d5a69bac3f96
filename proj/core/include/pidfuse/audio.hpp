#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pidfuse/matrix.hpp"
#include "pidfuse/types.hpp"

namespace pidfuse {

inline constexpr int kAudioSampleRate = 16000;
inline constexpr std::size_t kWindowSamples = 400;  // 25 ms
inline constexpr std::size_t kHopSamples = 160;     // 10 ms
inline constexpr std::size_t kFftSize = 512;
inline constexpr std::size_t kSpectrumBins = kFftSize / 2 + 1;
inline constexpr std::size_t kAudioEmbeddingDim = 512;

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = kAudioSampleRate;
};

// Periodic Hamming window 0.54 - 0.46 cos(2 pi n / N).
std::vector<double> hamming_window(std::size_t n);

// floor((len - 400) / 160) + 1, or 0 when shorter than one window.
std::size_t spectrogram_frame_count(std::size_t num_samples);

// Magnitudes of the 512-point DFT of each Hamming-windowed, zero-padded
// 400-sample frame, bins 0..256. Rows are frames.
// Throws kWrongSampleRate, kTooShort, kNonFiniteInput.
Matrix spectrogram(const Waveform& wave);

// Fixed reduction standing in for a learned speaker embedding: per-bin mean
// over time (257 values) followed by per-bin population standard deviation,
// truncated to 512 values. Throws kEmptyInput.
Embedding embed_audio(const Matrix& spec);

// Mono 16-bit little-endian PCM. Throws kMalformedRecord on an odd byte count.
Waveform decode_pcm16(std::span<const std::uint8_t> bytes, int sample_rate);
Waveform read_pcm16(std::istream& in, int sample_rate);
std::vector<std::uint8_t> encode_pcm16(const Waveform& wave);

}  // namespace pidfuse
