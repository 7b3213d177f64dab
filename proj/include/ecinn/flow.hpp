#pragma once

#include <atomic>
#include <cstdint>
#include <variant>
#include <vector>

#include "ecinn/common.hpp"

namespace ecinn {

// Invertible transform stack: affine coupling layers with clamped scales,
// fixed permutations, and activation normalization. Exact forward, exact
// algebraic inverse, analytic log-determinant, manual reverse-mode gradients.

// y = exp(log_scale) .* x + bias. Log-det contribution: sum(log_scale).
struct ActNormLayer {
    Vec log_scale;
    Vec bias;
    bool initialized = false;

    explicit ActNormLayer(int dim) : log_scale(Vec::Zero(dim)), bias(Vec::Zero(dim)) {}
    int dim() const { return static_cast<int>(log_scale.size()); }
};

// Passive half drives a two-layer ReLU perceptron producing (scale logits, translation)
// for the active half. Effective log-scale is clamp*tanh(s/clamp), so |log-scale| < clamp.
struct CouplingLayer {
    std::vector<uint8_t> mask;      // 1 = active (transformed), 0 = passive
    std::vector<int> active_idx;    // derived from mask
    std::vector<int> passive_idx;
    Mat w1;                         // hidden x passive
    Vec b1;                         // hidden
    Mat w2;                         // 2*active x hidden
    Vec b2;                         // 2*active
    double clamp = 2.0;

    CouplingLayer(std::vector<uint8_t> mask_in, int hidden, double clamp_in);

    int dim() const { return static_cast<int>(mask.size()); }
    int active_count() const { return static_cast<int>(active_idx.size()); }
    int passive_count() const { return static_cast<int>(passive_idx.size()); }
    int hidden() const { return static_cast<int>(b1.size()); }
};

// y[i] = x[perm[i]]; log-det 0.
struct PermutationLayer {
    std::vector<int> perm;
    std::vector<int> inv_perm;

    explicit PermutationLayer(std::vector<int> perm_in);
    int dim() const { return static_cast<int>(perm.size()); }
};

using Layer = std::variant<ActNormLayer, CouplingLayer, PermutationLayer>;

struct PassCounters {
    std::atomic<uint64_t> forward{0};
    std::atomic<uint64_t> inverse{0};

    PassCounters() = default;
    PassCounters(const PassCounters& o)
        : forward(o.forward.load()), inverse(o.inverse.load()) {}
    PassCounters& operator=(const PassCounters& o) {
        forward.store(o.forward.load());
        inverse.store(o.inverse.load());
        return *this;
    }
};

struct FlowModel {
    int dim = 0;
    std::vector<Layer> layers;
    mutable PassCounters counters;  // atomically incremented, safe under concurrent inference
};

// Activations cached by a forward pass for reverse-mode gradients.
// Each call owns its cache; caches are never shared between threads.
struct LayerCache {
    Mat x;       // layer input, dim x n
    Mat hidden;  // coupling pre-activation, hidden x n
    Mat s_raw;   // coupling raw scale logits, active x n
};

struct ForwardCache {
    bool valid = false;
    Eigen::Index n = 0;
    std::vector<LayerCache> layers;
};

struct FlowForward {
    Mat z;       // dim x n
    Vec logdet;  // per sample
};

// Batched core (column per sample). Forward/inverse bump the pass counters by n.
FlowForward forward_batch(const FlowModel& model, const Mat& x, ForwardCache* cache = nullptr);
Mat inverse_batch(const FlowModel& model, const Mat& z);

// Single-sample wrappers.
std::pair<Vec, double> forward(const FlowModel& model, const Vec& x);
std::pair<Vec, double> forward(const FlowModel& model, const Vec& x, ForwardCache& cache);
Vec inverse(const FlowModel& model, const Vec& z);

// Reverse-mode gradients of (grad_z . z + grad_logdet . logdet) w.r.t. inputs and
// parameters. Parameter gradients are accumulated (+=) into `param_grads`, a flat
// vector laid out per param_layout(model). Throws StateError without a cached forward.
Mat backward_batch(const FlowModel& model, const ForwardCache& cache, const Mat& grad_z,
                   const Vec& grad_logdet, Eigen::Ref<Vec> param_grads);
Vec backward(const FlowModel& model, const ForwardCache& cache, const Vec& grad_z,
             double grad_logdet, Eigen::Ref<Vec> param_grads);

// ---- flat parameter views ------------------------------------------------

struct ParamLayout {
    struct Tensor {
        std::string name;
        Eigen::Index offset = 0;
        Eigen::Index size = 0;
    };
    std::vector<Tensor> tensors;
    Eigen::Index total = 0;
};

ParamLayout param_layout(const FlowModel& model);
Vec gather_params(const FlowModel& model);
void scatter_params(FlowModel& model, const Eigen::Ref<const Vec>& flat);

// ---- construction ----------------------------------------------------------

enum class MaskKind { CheckerEven, HalfFirst, CheckerOdd, HalfSecond };

std::vector<uint8_t> make_mask(int dim, MaskKind kind);

// B blocks of [ActNorm -> Coupling -> Permutation]; masks cycle through the four
// kinds, permutations are random, subnet output layers start at zero so the
// whole stack begins as the identity.
FlowModel make_flow(int dim, int blocks, int hidden, double clamp, uint64_t seed);

// Data-dependent actnorm init: each uninitialized actnorm layer is set so that
// `batch` comes out with per-dimension mean 0 and variance 1 at that layer.
void init_actnorm(FlowModel& model, const Mat& batch);
bool actnorm_initialized(const FlowModel& model);

}  // namespace ecinn
