#pragma once

#include "hdgm/kernels/kernels.hpp"

namespace hdgm::kernels::detail {

struct Ops {
  void (*exp_neg_scaled)(double*, const double*, std::size_t, double);
  void (*shift_scale)(double*, const double*, std::size_t, double, double);
  void (*scale_shift)(double*, const double*, std::size_t, double, double);
  PairAccum (*finite_sq_diff)(const double*, const double*, std::size_t);
};

const Ops& scalar_ops();

#if HDGM_KERNELS_HAVE_AVX2
const Ops& avx2_ops();
#endif

}  // namespace hdgm::kernels::detail
