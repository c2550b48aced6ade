#pragma once

// Linear convolution of real sequences, truncated to a prefix.

#include <cstddef>
#include <span>
#include <vector>

namespace srt::fft {

/// c[k] = Σ_{i+j=k} a[i] b[j] for k < n_out. Uses a direct loop for small
/// products and real-input FFTs otherwise.
std::vector<double> convolve(std::span<const double> a,
                             std::span<const double> b, std::size_t n_out);

/// Same as convolve(a, a, n_out) with one forward transform.
std::vector<double> square(std::span<const double> a, std::size_t n_out);

/// Schoolbook convolution (exact summation order, no transforms).
std::vector<double> convolve_direct(std::span<const double> a,
                                    std::span<const double> b,
                                    std::size_t n_out);

/// Smallest 2^a 3^b 5^c >= n.
std::size_t good_size(std::size_t n);

/// Clamps round-off negatives in (-1e-12, 0) to zero and returns the most
/// negative value at or below -1e-12 (0 if none).
double clamp_roundoff(std::span<double> values);

}  // namespace srt::fft
