#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace hmmse {

// Real-input FFT of a fixed power-of-two size. Not thread-safe; make one per thread.
class RealFft {
 public:
  explicit RealFft(int size);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  int size() const { return size_; }
  int bins() const { return size_ / 2 + 1; }

  // `input` shorter than size() is zero padded. Output has bins() entries.
  void forward(std::span<const double> input, std::vector<std::complex<double>>& out);
  void power(std::span<const double> input, std::vector<double>& out);
  // Inverse of a half spectrum (bins() entries) to size() real samples.
  void inverse(const std::vector<std::complex<double>>& spectrum, std::vector<double>& out);

 private:
  struct Impl;
  int size_;
  std::unique_ptr<Impl> impl_;
};

bool is_power_of_two(int n);
int next_power_of_two(int n);

// Linear convolution via FFT, full length a.size() + b.size() - 1.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

}  // namespace hmmse
