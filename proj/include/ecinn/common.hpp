#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ecinn {

// Column-per-sample convention for batches. Arithmetic is double
// throughout; parameters and file payloads are float32 (see quantize_f32).
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---- errors ------------------------------------------------------------

// Violated precondition (bad dimension, out-of-range class, ...).
struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Overflow, diverged loss, degenerate geometry.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation called in the wrong state (e.g. backward without a cached forward).
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or truncated files.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- float32 storage invariant ------------------------------------------

// Parameters and serialized tensors are float32; in-memory copies are doubles
// that must stay exactly float-representable so a checkpoint round-trip
// reproduces the model bit for bit.
inline double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline void quantize_f32(Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = quantize_f32(v[i]);
}

inline void quantize_f32(Mat& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = quantize_f32(m.data()[i]);
}

inline bool all_finite(const Eigen::Ref<const Mat>& m) {
    return m.allFinite();
}

inline void require_finite(const Eigen::Ref<const Mat>& m, const char* what) {
    if (!m.allFinite()) throw ContractViolation(std::string(what) + ": non-finite entries");
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want)
        throw ContractViolation(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
}

// ---- image geometry --------------------------------------------------------

// Height x width x channels of a flattened sample; h*w*c must equal D.
struct Geometry {
    int h = 1;
    int w = 1;
    int c = 1;

    int dim() const { return h * w * c; }
    bool operator==(const Geometry&) const = default;
};

// ---- FNV-1a (fingerprints, no crypto intent) -----------------------------

constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

}  // namespace ecinn
