#include <cmath>

#include "ops.hpp"

// Reference implementations. These define the semantics the SIMD variants are
// tested against.

namespace hdgm::kernels::detail {
namespace {

void exp_neg_scaled_scalar(double* dst, const double* src, std::size_t n, double scale) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::exp(-src[i] * scale);
}





void shift_scale_scalar(double* dst, const double* src, std::size_t n, double shift,
                        double scale) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - shift) * scale;
}

void scale_shift_scalar(double* dst, const double* src, std::size_t n, double scale,
                        double shift) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] * scale + shift;
}

PairAccum finite_sq_diff_scalar(const double* a, const double* b, std::size_t n) {
  PairAccum acc;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(a[i]) && std::isfinite(b[i])) {
      const double d = a[i] - b[i];
      acc.sum_sq += d * d;
      ++acc.count;
    }
  }
  return acc;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      exp_neg_scaled_scalar,
      shift_scale_scalar,
      scale_shift_scalar,
      finite_sq_diff_scalar,
  };
  return ops;
}

}  // namespace hdgm::kernels::detail
