#include "codesearch/kernels.hpp"

#include <atomic>

namespace codesearch::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double* x, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double squared_norm_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

double dot_f32_scalar(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

void scores_f32_scalar(const float* rows, std::size_t n_rows, std::size_t dim,
                       const float* query, double* out) {
    for (std::size_t r = 0; r < n_rows; ++r)
        out[r] = dot_f32_scalar(rows + r * dim, query, dim);
}

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double*, double, std::size_t);
    double (*squared_norm)(const double*, std::size_t);
    double (*dot_f32)(const float*, const float*, std::size_t);
    void (*scores_f32)(const float*, std::size_t, std::size_t, const float*, double*);
};

constexpr KernelTable kScalarTable = {
    dot_scalar, axpy_scalar, scale_scalar,
    squared_norm_scalar, dot_f32_scalar, scores_f32_scalar,
};

}  // namespace

#if CODESEARCH_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
double squared_norm(const double* a, std::size_t n);
double dot_f32(const float* a, const float* b, std::size_t n);
void scores_f32(const float* rows, std::size_t n_rows, std::size_t dim,
                const float* query, double* out);
}  // namespace avx2
#endif

namespace {

#if CODESEARCH_HAVE_AVX2
constexpr KernelTable kAvx2Table = {
    avx2::dot, avx2::axpy, avx2::scale,
    avx2::squared_norm, avx2::dot_f32, avx2::scores_f32,
};
#endif

struct Dispatch {
    const KernelTable* table;
    Backend backend;
};

Dispatch resolve([[maybe_unused]] Backend backend) {
#if CODESEARCH_HAVE_AVX2
    if (backend == Backend::Avx2 ||
        (backend == Backend::Auto && cpu_supports_avx2()))
        return {&kAvx2Table, Backend::Avx2};
#endif
    return {&kScalarTable, Backend::Scalar};
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::Scalar};

const KernelTable& active_table() {
    const KernelTable* t = g_table.load(std::memory_order_acquire);
    if (t == nullptr) {
        Dispatch d = resolve(Backend::Auto);
        g_backend.store(d.backend, std::memory_order_relaxed);
        g_table.store(d.table, std::memory_order_release);
        return *d.table;
    }
    return *t;
}

}  // namespace

bool cpu_supports_avx2() {
#if CODESEARCH_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

bool set_backend(Backend backend) {
    if (backend == Backend::Avx2 && !cpu_supports_avx2()) return false;
    Dispatch d = resolve(backend);
    g_backend.store(d.backend, std::memory_order_relaxed);
    g_table.store(d.table, std::memory_order_release);
    return true;
}

Backend active_backend() {
    active_table();
    return g_backend.load(std::memory_order_relaxed);
}

std::string backend_name(Backend backend) {
    switch (backend) {
        case Backend::Auto: return "auto";
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "unknown";
}

double dot(const double* a, const double* b, std::size_t n) {
    return active_table().dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active_table().axpy(alpha, x, y, n);
}

void scale(double* x, double alpha, std::size_t n) {
    active_table().scale(x, alpha, n);
}

double squared_norm(const double* a, std::size_t n) {
    return active_table().squared_norm(a, n);
}

double dot_f32(const float* a, const float* b, std::size_t n) {
    return active_table().dot_f32(a, b, n);
}

void scores_f32(const float* rows, std::size_t n_rows, std::size_t dim,
                const float* query, double* out) {
    active_table().scores_f32(rows, n_rows, dim, query, out);
}

}  // namespace codesearch::kernels
