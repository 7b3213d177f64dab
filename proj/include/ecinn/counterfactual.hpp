#pragma once

#include <array>
#include <string>
#include <string_view>

#include "ecinn/dataset.hpp"
#include "ecinn/flow.hpp"
#include "ecinn/gmm.hpp"

namespace ecinn {

// Counterfactual pipeline: empirical per-predicted-class latent means,
// closed-form tipping-point coefficient alpha0, heuristic alpha1, single-pass
// counterfactual generation x_hat = f^-1(f(x) + alpha*Delta), and difference
// heatmaps h = x_hat - x.

// The decision boundary (w, b) is defined with model means while the
// correction direction Delta uses empirical means; the convention switch
// forces either family for both roles when studying the gap.
enum class MeansConvention { Split, Model, Empirical };

struct EcinnIndex {
    Mat means;                         // dim x K empirical latent means (zero where empty)
    std::vector<uint64_t> group_sizes; // |G_j| per predicted class
    std::array<uint8_t, 32> fingerprint{};  // checkpoint + dataset content hashes
    bool degenerate = false;           // fewer than two nonempty groups

    int k() const { return static_cast<int>(means.cols()); }
    int dim() const { return static_cast<int>(means.rows()); }
};

// Group the dataset by predicted class and average the latents per group.
// One forward pass per sample; result independent of thread count.
EcinnIndex build_index(const FlowModel& model, const LatentGMM& gmm, const Dataset& data);

// Delta_{p,q} = empirical_mean_q - empirical_mean_p; requires both groups
// nonempty (a missing group names the class in the error).
Vec delta(const EcinnIndex& index, int p, int q);

// Closed-form alpha where z + alpha*Delta hits the p/q decision hyperplane:
// alpha0 = -(w'z + b) / (w'Delta) with w = mu_q - mu_p, b = -((mu_p+mu_q)/2)'w.
// Near-parallel w and Delta (|w'Delta| <= 1e-8*|w||Delta|) is an error.
double alpha_zero(const LatentGMM& gmm, const EcinnIndex& index, const Vec& z, int p, int q,
                  MeansConvention conv = MeansConvention::Split);

// Convincing-counterfactual heuristic: 4/5 + alpha0/2.
double alpha_one(double alpha0);

// p = predicted class of x (from the same single forward pass), then
// f^-1(f(x) + alpha*Delta_{p,q}). Exactly one forward and one inverse pass.
Vec counterfactual(const FlowModel& model, const LatentGMM& gmm, const EcinnIndex& index,
                   const Vec& x, int q, double alpha,
                   MeansConvention conv = MeansConvention::Split);

// Elementwise difference x_hat - x.
Vec heatmap(const Vec& x, const Vec& x_hat);

struct CounterfactualResult {
    Vec x;
    int p = 0, q = 0;
    double alpha0 = 0, alpha1 = 0;
    Vec x_hat0, x_hat1;  // tipping-point and convincing counterfactuals
    Vec heat0, heat1;
    int pred0 = 0, pred1 = 0;  // realized classes of the counterfactuals
    int forward_passes = 0, inverse_passes = 0;
    bool same_class = false;  // q was already the predicted class
};

// Full pipeline: one forward pass yields p and z, two inverse passes yield
// both counterfactuals; heatmaps satisfy heat + x = x_hat bitwise.
CounterfactualResult explain(const FlowModel& model, const LatentGMM& gmm,
                             const EcinnIndex& index, const Vec& x, int q,
                             MeansConvention conv = MeansConvention::Split);

// "ECIX" file: magic, u32 K, u32 D, u64 group sizes, float32 means,
// 32-byte fingerprint.
std::string index_to_bytes(const EcinnIndex& index);
EcinnIndex index_from_bytes(std::string_view bytes);
void save_index(const EcinnIndex& index, const std::string& path);
EcinnIndex load_index(const std::string& path);

}  // namespace ecinn
