#include "ares/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "ares/errors.hpp"

namespace ares::kernels {

namespace detail {

void scalar_softmax(const double* x, double* out, std::size_t n) {
  if (n == 0) return;
  double m = scalar_reduce_max(x, n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - m);
    s += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] /= s;
  }
}

void scalar_log_softmax(const double* x, double* out, std::size_t n) {
  if (n == 0) return;
  double m = scalar_reduce_max(x, n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += std::exp(x[i] - m);
  }
  double lse = m + std::log(s);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] - lse;
  }
}

double scalar_reduce_max(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

double scalar_reduce_sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double scalar_dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void scalar_add_scalar(const double* x, double c, double* out,
                       std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + c;
}

void scalar_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double scalar_weighted_log_diff(const double* p, const double* lp,
                                const double* lq, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += p[i] * (lp[i] - lq[i]);
  return s;
}

}  // namespace detail

namespace {

struct Impl {
  Backend backend;
  void (*softmax)(const double*, double*, std::size_t);
  void (*log_softmax)(const double*, double*, std::size_t);
  double (*reduce_max)(const double*, std::size_t);
  double (*reduce_sum)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  void (*add_scalar)(const double*, double, double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*weighted_log_diff)(const double*, const double*, const double*,
                              std::size_t);
};

constexpr Impl kScalarImpl = {
    Backend::kScalar,
    detail::scalar_softmax,
    detail::scalar_log_softmax,
    detail::scalar_reduce_max,
    detail::scalar_reduce_sum,
    detail::scalar_dot,
    detail::scalar_add_scalar,
    detail::scalar_axpy,
    detail::scalar_weighted_log_diff,
};

#if defined(ARES_HAVE_AVX2)
constexpr Impl kAvx2Impl = {
    Backend::kAvx2,
    detail::avx2_softmax,
    detail::avx2_log_softmax,
    detail::avx2_reduce_max,
    detail::avx2_reduce_sum,
    detail::avx2_dot,
    detail::avx2_add_scalar,
    detail::avx2_axpy,
    detail::avx2_weighted_log_diff,
};
#endif

Impl resolve() {
  const char* env = std::getenv("ARES_KERNELS");
  std::string want = env ? env : "";
  if (want == "scalar") {
    return kScalarImpl;
  }
  if (want == "avx2") {
#if defined(ARES_HAVE_AVX2)
    if (avx2_supported()) return kAvx2Impl;
    throw ConfigError("ARES_KERNELS=avx2 requested but this CPU has no AVX2");
#else
    throw ConfigError(
        "ARES_KERNELS=avx2 requested but this build has no AVX2 backend");
#endif
  }
  if (!want.empty()) {
    throw ConfigError("unknown ARES_KERNELS value: '" + want +
                      "' (expected 'scalar' or 'avx2')");
  }
#if defined(ARES_HAVE_AVX2)
  if (avx2_supported()) return kAvx2Impl;
#endif
  return kScalarImpl;
}

const Impl& impl() {
  static const Impl chosen = resolve();
  return chosen;
}

}  // namespace

bool avx2_supported() {
#if defined(ARES_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

Backend active_backend() { return impl().backend; }

std::string_view backend_name() {
  return impl().backend == Backend::kAvx2 ? "avx2" : "scalar";
}

void softmax(const double* x, double* out, std::size_t n) {
  impl().softmax(x, out, n);
}

void log_softmax(const double* x, double* out, std::size_t n) {
  impl().log_softmax(x, out, n);
}

double reduce_max(const double* x, std::size_t n) {
  return impl().reduce_max(x, n);
}

double reduce_sum(const double* x, std::size_t n) {
  return impl().reduce_sum(x, n);
}

double dot(const double* x, const double* y, std::size_t n) {
  return impl().dot(x, y, n);
}

void add_scalar(const double* x, double c, double* out, std::size_t n) {
  impl().add_scalar(x, c, out, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  impl().axpy(a, x, y, n);
}

double weighted_log_diff(const double* p, const double* lp, const double* lq,
                         std::size_t n) {
  return impl().weighted_log_diff(p, lp, lq, n);
}

}  // namespace ares::kernels
