#include "srtlab/fft_convolution.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <memory>
#include <mutex>

namespace srt::fft {
namespace {

// The FFTW planner is not reentrant; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> allocate(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class RealPlans {
 public:
  RealPlans(std::size_t n, double* real, fftw_complex* spec) {
    std::lock_guard lock(planner_mutex());
    const int ni = static_cast<int>(n);
    forward_ = fftw_plan_dft_r2c_1d(ni, real, spec, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(ni, spec, real, FFTW_ESTIMATE);
  }
  ~RealPlans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  RealPlans(const RealPlans&) = delete;
  RealPlans& operator=(const RealPlans&) = delete;

  void forward(double* in, fftw_complex* out) const {
    fftw_execute_dft_r2c(forward_, in, out);
  }
  void backward(fftw_complex* in, double* out) const {
    fftw_execute_dft_c2r(backward_, in, out);
  }

 private:
  fftw_plan forward_{};
  fftw_plan backward_{};
};

bool use_direct(std::size_t na, std::size_t nb) {
  return std::min(na, nb) <= 32 || na * nb <= (std::size_t{1} << 20);
}

std::vector<double> via_fft(std::span<const double> a, std::span<const double> b,
                            std::size_t n_out, bool squaring) {
  const std::size_t n = good_size(a.size() + b.size() - 1);
  const std::size_t nc = n / 2 + 1;
  auto real = allocate<double>(n);
  auto spec_a = allocate<fftw_complex>(nc);
  FftwBuffer<fftw_complex> spec_b;
  RealPlans plans(n, real.get(), spec_a.get());

  std::fill(real.get(), real.get() + n, 0.0);
  std::copy(a.begin(), a.end(), real.get());
  plans.forward(real.get(), spec_a.get());
  if (!squaring) {
    spec_b = allocate<fftw_complex>(nc);
    std::fill(real.get(), real.get() + n, 0.0);
    std::copy(b.begin(), b.end(), real.get());
    plans.forward(real.get(), spec_b.get());
  }
  const fftw_complex* sb = squaring ? spec_a.get() : spec_b.get();
  for (std::size_t k = 0; k < nc; ++k) {
    const std::complex<double> x(spec_a[k][0], spec_a[k][1]);
    const std::complex<double> y(sb[k][0], sb[k][1]);
    const auto z = x * y;
    spec_a[k][0] = z.real();
    spec_a[k][1] = z.imag();
  }
  spec_b.reset();
  plans.backward(spec_a.get(), real.get());
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<double> out(n_out, 0.0);
  const std::size_t m = std::min(n_out, n);
  for (std::size_t k = 0; k < m; ++k) out[k] = real[k] * scale;
  return out;
}

}  // namespace

std::size_t good_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
      std::size_t v = p35;
      while (v < n) v <<= 1;
      best = std::min(best, v);
    }
  }
  return best;
}

std::vector<double> convolve_direct(std::span<const double> a,
                                    std::span<const double> b,
                                    std::size_t n_out) {
  std::vector<double> out(n_out, 0.0);
  const std::size_t na = std::min(a.size(), n_out);
  for (std::size_t i = 0; i < na; ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    const std::size_t nb = std::min(b.size(), n_out - i);
    double* o = out.data() + i;
    for (std::size_t j = 0; j < nb; ++j) o[j] += ai * b[j];
  }
  return out;
}

namespace {

// Index of the first nonzero and one past the last nonzero.
std::pair<std::size_t, std::size_t> nonzero_range(std::span<const double> v) {
  std::size_t lo = 0;
  std::size_t hi = v.size();
  while (lo < hi && v[lo] == 0.0) ++lo;
  while (hi > lo && v[hi - 1] == 0.0) --hi;
  return {lo, hi};
}

std::vector<double> convolve_trimmed(std::span<const double> a,
                                     std::span<const double> b,
                                     std::size_t n_out, bool squaring) {
  std::vector<double> out(n_out, 0.0);
  if (a.size() > n_out) a = a.first(n_out);
  if (b.size() > n_out) b = b.first(n_out);
  const auto [alo, ahi] = nonzero_range(a);
  const auto [blo, bhi] = nonzero_range(b);
  if (alo >= ahi || blo >= bhi || alo + blo >= n_out) return out;
  const std::size_t shift = alo + blo;
  const std::size_t m = n_out - shift;
  auto as = a.subspan(alo, std::min(ahi - alo, m));
  auto bs = b.subspan(blo, std::min(bhi - blo, m));
  std::vector<double> c;
  if (use_direct(as.size(), bs.size())) {
    c = convolve_direct(as, bs, m);
  } else {
    c = via_fft(as, bs, m, squaring);
  }
  std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>(shift));
  return out;
}

}  // namespace

std::vector<double> convolve(std::span<const double> a,
                             std::span<const double> b, std::size_t n_out) {
  return convolve_trimmed(a, b, n_out, false);
}

std::vector<double> square(std::span<const double> a, std::size_t n_out) {
  return convolve_trimmed(a, a, n_out, true);
}

double clamp_roundoff(std::span<double> values) {
  double worst = 0.0;
  for (double& v : values) {
    if (v < 0.0) {
      if (v > -1e-12) {
        v = 0.0;
      } else {
        worst = std::min(worst, v);
      }
    }
  }
  return worst;
}

}  // namespace srt::fft
