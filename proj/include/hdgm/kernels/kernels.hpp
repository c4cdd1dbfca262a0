#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the statistical modules. Every kernel has
// a scalar reference implementation and, on x86-64, an AVX2 variant selected
// at runtime. The two are equivalence-tested against each other; callers never
// see the dispatch.

namespace hdgm::kernels {

enum class Backend { Scalar, Avx2 };

// Backend chosen by CPU detection at startup; Scalar when AVX2+FMA is absent.
Backend preferred_backend();
Backend active_backend();

// Force a backend (used by the equivalence tests and the HDGM_KERNELS env
// override). Returns false if the backend is not available on this machine.
bool set_backend(Backend b);

std::string backend_name(Backend b);

// dst[i] = exp(-src[i] * scale)
void exp_neg_scaled(double* dst, const double* src, std::size_t n, double scale);

// dst[i] = (src[i] - shift) * scale; the standardization map
void shift_scale(double* dst, const double* src, std::size_t n, double shift, double scale);

// dst[i] = src[i] * scale + shift; the back-transformation map
void scale_shift(double* dst, const double* src, std::size_t n, double scale, double shift);

struct PairAccum {
  double sum_sq = 0.0;
  std::size_t count = 0;
};

// Accumulates (a[i]-b[i])^2 over indices where both values are finite.
// NaN marks a missing observation throughout the library.
PairAccum finite_sq_diff(const double* a, const double* b, std::size_t n);

}  // namespace hdgm::kernels
