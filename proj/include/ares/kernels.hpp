#pragma once

#include <cstddef>
#include <string_view>

// Small numeric kernels shared by the policy, RL, and SFT hot paths.
//
// Every kernel has a plain scalar reference implementation and, on x86-64
// hardware with AVX2, a vectorized variant.  The backend is resolved once
// at first use: AVX2 when the CPU supports it, scalar otherwise, with an
// ARES_KERNELS=scalar|avx2 environment override for testing and debugging.
// The two backends are equivalence-tested against each other; they agree to
// floating-point rounding, not bitwise, so a single run always sticks to
// one backend.
//
// All kernels assume finite inputs.  n == 0 is a no-op for the writers and
// returns the natural empty value for the reducers.

namespace ares::kernels {

enum class Backend { kScalar, kAvx2 };

// The backend all public kernels below are routed to (resolved on first
// call, stable for the rest of the process).
Backend active_backend();
std::string_view backend_name();

// True when the running CPU can execute the AVX2 variants.
bool avx2_supported();

// out[i] = exp(x[i] - max(x)) / sum_j exp(x[j] - max(x))
void softmax(const double* x, double* out, std::size_t n);

// out[i] = x[i] - max(x) - log(sum_j exp(x[j] - max(x)))
void log_softmax(const double* x, double* out, std::size_t n);

double reduce_max(const double* x, std::size_t n);  // -inf when n == 0
double reduce_sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);

// out[i] = x[i] + c   (in-place allowed: out may alias x)
void add_scalar(const double* x, double c, double* out, std::size_t n);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

// sum_i p[i] * (lp[i] - lq[i]); the KL(p || q) inner product over
// log-probability arrays.
double weighted_log_diff(const double* p, const double* lp, const double* lq,
                         std::size_t n);

namespace detail {

void scalar_softmax(const double* x, double* out, std::size_t n);
void scalar_log_softmax(const double* x, double* out, std::size_t n);
double scalar_reduce_max(const double* x, std::size_t n);
double scalar_reduce_sum(const double* x, std::size_t n);
double scalar_dot(const double* x, const double* y, std::size_t n);
void scalar_add_scalar(const double* x, double c, double* out, std::size_t n);
void scalar_axpy(double a, const double* x, double* y, std::size_t n);
double scalar_weighted_log_diff(const double* p, const double* lp,
                                const double* lq, std::size_t n);

#if defined(ARES_HAVE_AVX2)
void avx2_softmax(const double* x, double* out, std::size_t n);
void avx2_log_softmax(const double* x, double* out, std::size_t n);
double avx2_reduce_max(const double* x, std::size_t n);
double avx2_reduce_sum(const double* x, std::size_t n);
double avx2_dot(const double* x, const double* y, std::size_t n);
void avx2_add_scalar(const double* x, double c, double* out, std::size_t n);
void avx2_axpy(double a, const double* x, double* y, std::size_t n);
double avx2_weighted_log_diff(const double* p, const double* lp,
                              const double* lq, std::size_t n);
// Vectorized exp over one AVX lane's worth of doubles; exposed for tests.
void avx2_exp(const double* x, double* out, std::size_t n);
#endif

}  // namespace detail

}  // namespace ares::kernels
