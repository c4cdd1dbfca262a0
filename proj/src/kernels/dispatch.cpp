#include <atomic>
#include <cstdlib>
#include <string>

#include "ops.hpp"

namespace hdgm::kernels {
namespace {

using detail::Ops;

bool avx2_supported() {
#if HDGM_KERNELS_HAVE_AVX2
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops* ops_for(Backend b) {
#if HDGM_KERNELS_HAVE_AVX2
  if (b == Backend::Avx2) return &detail::avx2_ops();
#else
  (void)b;
#endif
  return &detail::scalar_ops();
}

Backend detect() {
  if (const char* env = std::getenv("HDGM_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::Scalar;
    if (v == "avx2" && avx2_supported()) return Backend::Avx2;
  }
  return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

struct State {
  std::atomic<Backend> backend;
  std::atomic<const Ops*> ops;
  State() {
    const Backend b = detect();
    backend.store(b);
    ops.store(ops_for(b));
  }
};

State& state() {
  static State s;
  return s;
}

const Ops& ops() { return *state().ops.load(std::memory_order_relaxed); }

}  // namespace

Backend preferred_backend() { return detect(); }

Backend active_backend() { return state().backend.load(); }

bool set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported()) return false;
  state().backend.store(b);
  state().ops.store(ops_for(b));
  return true;
}

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

void exp_neg_scaled(double* dst, const double* src, std::size_t n, double scale) {
  ops().exp_neg_scaled(dst, src, n, scale);
}

void shift_scale(double* dst, const double* src, std::size_t n, double shift, double scale) {
  ops().shift_scale(dst, src, n, shift, scale);
}

void scale_shift(double* dst, const double* src, std::size_t n, double scale, double shift) {
  ops().scale_shift(dst, src, n, scale, shift);
}

PairAccum finite_sq_diff(const double* a, const double* b, std::size_t n) {
  return ops().finite_sq_diff(a, b, n);
}

}  // namespace hdgm::kernels
