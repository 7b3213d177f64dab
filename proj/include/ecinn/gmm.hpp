#pragma once

#include "ecinn/common.hpp"
#include "ecinn/flow.hpp"

namespace ecinn {

// Class-conditional unit-variance Gaussian latent model with a fixed uniform
// prior: per-class log-likelihoods, posteriors, nearest-mean classification,
// and bits-per-dimension. Read-only after training; queries are thread-safe.
struct LatentGMM {
    Mat means;  // dim x K, one column per class

    int k() const { return static_cast<int>(means.cols()); }
    int dim() const { return static_cast<int>(means.rows()); }
};

// Trainable means initialized as scaled one-hot vectors mu_y = r*e_{y mod D}.
LatentGMM make_gmm(int dim, int k, double r = 1.0);

// Squared distances ||z_i - mu_y||^2 as a K x n matrix (shared by the
// posterior, the classifier, and the training loss).
Mat sq_dists(const LatentGMM& gmm, const Mat& z);

// log N(z; mu_y, I) = -0.5*||z - mu_y||^2 - (D/2)*log(2*pi)
double class_loglik(const LatentGMM& gmm, const Vec& z, int y);

// Softmax over {-0.5*||z - mu_y||^2}_y with max-subtraction; sums to 1.
Vec posterior(const LatentGMM& gmm, const Vec& z);
Mat posterior_batch(const LatentGMM& gmm, const Mat& z);  // K x n

// Nearest class mean; ties broken toward the lowest class index.
int nearest_mean(const LatentGMM& gmm, const Vec& z);
std::vector<int> nearest_mean_batch(const LatentGMM& gmm, const Mat& z);

// argmax_y posterior(f(x)); exactly one forward pass.
int classify(const FlowModel& model, const LatentGMM& gmm, const Vec& x);
std::vector<int> classify_batch(const FlowModel& model, const LatentGMM& gmm, const Mat& x);

// log p_X(x) = logsumexp_y[log p_Z(z|y)] + logdet - log K, evaluated at z = f(x).
double log_px_from_latent(const LatentGMM& gmm, const Vec& z, double logdet);
Vec log_px_from_latent_batch(const LatentGMM& gmm, const Mat& z, const Vec& logdet);

// -log2 p_X(x) / D
double bits_per_dim(const FlowModel& model, const LatentGMM& gmm, const Vec& x);

}  // namespace ecinn
