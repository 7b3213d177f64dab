#include "ecinn/gmm.hpp"

#include <cmath>

namespace ecinn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

}  // namespace

Mat sq_dists(const LatentGMM& gmm, const Mat& z) {
    require_dim(z.rows(), gmm.dim(), "sq_dists");
    Mat d2 = -2.0 * (gmm.means.transpose() * z);
    d2.colwise() += gmm.means.colwise().squaredNorm().transpose();
    d2.rowwise() += z.colwise().squaredNorm();
    return d2.cwiseMax(0.0);  // guard tiny negative round-off
}

LatentGMM make_gmm(int dim, int k, double r) {
    if (dim < 1 || k < 1) throw ContractViolation("make_gmm: dim and k must be >= 1");
    LatentGMM gmm;
    gmm.means = Mat::Zero(dim, k);
    for (int y = 0; y < k; ++y) gmm.means(y % dim, y) = quantize_f32(r);
    return gmm;
}

double class_loglik(const LatentGMM& gmm, const Vec& z, int y) {
    if (y < 0 || y >= gmm.k()) throw ContractViolation("class_loglik: class id out of range");
    require_dim(z.size(), gmm.dim(), "class_loglik");
    const double d2 = (z - gmm.means.col(y)).squaredNorm();
    return -0.5 * d2 - 0.5 * static_cast<double>(gmm.dim()) * kLog2Pi;
}

Vec posterior(const LatentGMM& gmm, const Vec& z) {
    return posterior_batch(gmm, z).col(0);
}

Mat posterior_batch(const LatentGMM& gmm, const Mat& z) {
    require_dim(z.rows(), gmm.dim(), "posterior");
    require_finite(z, "posterior input");
    Mat logits = (-0.5 * sq_dists(gmm, z).array()).matrix();
    Eigen::RowVectorXd mx = logits.colwise().maxCoeff();
    Mat p = (logits.rowwise() - mx).array().exp().matrix();
    Eigen::RowVectorXd sums = p.colwise().sum();
    p.array().rowwise() /= sums.array();
    return p;
}

int nearest_mean(const LatentGMM& gmm, const Vec& z) {
    require_dim(z.size(), gmm.dim(), "nearest_mean");
    int best = 0;
    double best_d2 = (z - gmm.means.col(0)).squaredNorm();
    for (int y = 1; y < gmm.k(); ++y) {
        const double d2 = (z - gmm.means.col(y)).squaredNorm();
        if (d2 < best_d2) {  // strict: ties keep the lower index
            best_d2 = d2;
            best = y;
        }
    }
    return best;
}

std::vector<int> nearest_mean_batch(const LatentGMM& gmm, const Mat& z) {
    Mat d2 = sq_dists(gmm, z);
    std::vector<int> out(static_cast<size_t>(z.cols()));
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
        int best = 0;
        for (int y = 1; y < gmm.k(); ++y)
            if (d2(y, i) < d2(best, i)) best = y;
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

int classify(const FlowModel& model, const LatentGMM& gmm, const Vec& x) {
    auto [z, logdet] = forward(model, x);
    (void)logdet;
    return nearest_mean(gmm, z);
}

std::vector<int> classify_batch(const FlowModel& model, const LatentGMM& gmm, const Mat& x) {
    FlowForward r = forward_batch(model, x);
    return nearest_mean_batch(gmm, r.z);
}

double log_px_from_latent(const LatentGMM& gmm, const Vec& z, double logdet) {
    Vec ld(1);
    ld[0] = logdet;
    return log_px_from_latent_batch(gmm, z, ld)[0];
}

Vec log_px_from_latent_batch(const LatentGMM& gmm, const Mat& z, const Vec& logdet) {
    require_dim(z.rows(), gmm.dim(), "log_px");
    require_dim(logdet.size(), z.cols(), "log_px: logdet batch");
    const double d = static_cast<double>(gmm.dim());
    Mat ll = (-0.5 * sq_dists(gmm, z).array() - 0.5 * d * kLog2Pi).matrix();
    // logsumexp over classes, column-wise, with max-subtraction
    Eigen::RowVectorXd mx = ll.colwise().maxCoeff();
    Eigen::RowVectorXd lse =
        ((ll.rowwise() - mx).array().exp().colwise().sum().log()).matrix() + mx;
    return lse.transpose() + logdet - Vec::Constant(z.cols(), std::log(double(gmm.k())));
}

double bits_per_dim(const FlowModel& model, const LatentGMM& gmm, const Vec& x) {
    auto [z, logdet] = forward(model, x);
    const double log_px = log_px_from_latent(gmm, z, logdet);
    return -log_px / (std::log(2.0) * static_cast<double>(gmm.dim()));
}

}  // namespace ecinn
