#include "hmmse/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "hmmse/error.hpp"

namespace hmmse {

namespace {
// Planning is not thread-safe in FFTW; execution on distinct buffers is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spectrum = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  explicit Impl(int n) {
    std::lock_guard lock(plan_mutex());
    real = fftw_alloc_real(static_cast<std::size_t>(n));
    spectrum = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    forward = fftw_plan_dft_r2c_1d(n, real, spectrum, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(n, spectrum, real, FFTW_ESTIMATE);
  }
  ~Impl() {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spectrum);
  }
  Impl(const Impl&) = delete;
  Impl& operator=(const Impl&) = delete;
};

RealFft::RealFft(int size) : size_(size) {
  if (!is_power_of_two(size)) {
    throw Error(ErrorCode::InvalidFftSize, "fft size must be a power of two, got " + std::to_string(size));
  }
  impl_ = std::make_unique<Impl>(size);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> input, std::vector<std::complex<double>>& out) {
  const auto size = static_cast<std::size_t>(size_);
  const std::size_t n = std::min(input.size(), size);
  std::copy_n(input.begin(), n, impl_->real);
  std::fill(impl_->real + n, impl_->real + size, 0.0);
  fftw_execute(impl_->forward);
  out.resize(static_cast<std::size_t>(bins()));
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {impl_->spectrum[k][0], impl_->spectrum[k][1]};
}

void RealFft::power(std::span<const double> input, std::vector<double>& out) {
  const auto size = static_cast<std::size_t>(size_);
  const std::size_t n = std::min(input.size(), size);
  std::copy_n(input.begin(), n, impl_->real);
  std::fill(impl_->real + n, impl_->real + size, 0.0);
  fftw_execute(impl_->forward);
  out.resize(static_cast<std::size_t>(bins()));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = impl_->spectrum[k][0] * impl_->spectrum[k][0] + impl_->spectrum[k][1] * impl_->spectrum[k][1];
  }
}

void RealFft::inverse(const std::vector<std::complex<double>>& spectrum, std::vector<double>& out) {
  if (spectrum.size() != static_cast<std::size_t>(bins())) {
    throw Error(ErrorCode::DimensionMismatch, "inverse FFT expects size/2 + 1 bins");
  }
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    impl_->spectrum[k][0] = spectrum[k].real();
    impl_->spectrum[k][1] = spectrum[k].imag();
  }
  // c2r ignores the imaginary parts of the DC and Nyquist bins.
  fftw_execute(impl_->backward);
  const double scale = 1.0 / size_;
  out.resize(static_cast<std::size_t>(size_));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = impl_->real[i] * scale;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_power_of_two(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t full = a.size() + b.size() - 1;
  RealFft fft(next_power_of_two(static_cast<int>(full)));
  std::vector<std::complex<double>> fa, fb;
  fft.forward(a, fa);
  fft.forward(b, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> out;
  fft.inverse(fa, out);
  out.resize(full);
  return out;
}

}  // namespace hmmse
