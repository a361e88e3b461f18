#pragma once

#include <cstddef>
#include <span>
#include <string>

// Dense vector arithmetic used by the pooling, training, and index-scan
// inner loops. Every operation has a scalar reference implementation and,
// on x86-64, an AVX2+FMA variant selected at runtime. The two paths are
// equivalence-tested; the scalar path is the semantic reference.
//
// All dot products accumulate in double, including the f32 variants, so
// results differ between backends only by summation order.

namespace codesearch::kernels {

enum class Backend {
    Auto,   // probe the CPU, prefer the widest supported variant
    Scalar,
    Avx2,
};

// Returns false if `backend` is not supported on this CPU (selection
// unchanged). Auto always succeeds.
bool set_backend(Backend backend);

// The backend actually in use (never Auto).
Backend active_backend();
std::string backend_name(Backend backend);
bool cpu_supports_avx2();

// dot(a, b) over n doubles, double accumulation.
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// x *= alpha
void scale(double* x, double alpha, std::size_t n);

double squared_norm(const double* a, std::size_t n);

// dot over f32 inputs with double accumulation.
double dot_f32(const float* a, const float* b, std::size_t n);

// out[i] = dot_f32(rows + i*dim, query, dim) for i in [0, n_rows).
// Row-major matrix scan; the index search hot loop.
void scores_f32(const float* rows, std::size_t n_rows, std::size_t dim,
                const float* query, double* out);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(std::span<double> x, double alpha) {
    scale(x.data(), alpha, x.size());
}
inline double squared_norm(std::span<const double> a) {
    return squared_norm(a.data(), a.size());
}

}  // namespace codesearch::kernels
