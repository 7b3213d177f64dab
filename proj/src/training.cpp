#include "ecinn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "ecinn/checkpoint.hpp"
#include "ecinn/threading.hpp"

namespace ecinn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr Eigen::Index kChunk = 32;  // fixed chunk size keeps reductions thread-count-invariant

struct ChunkStats {
    double nll_sum = 0, ce_sum = 0;
};

// Loss core for one chunk of columns. Gradients (when requested) are written
// into `grads`, already scaled by inv_n so the ordered reduction is a plain sum.
ChunkStats chunk_loss(const FlowModel& model, const LatentGMM& gmm, const Mat& x,
                      const uint32_t* labels, double beta, double inv_n, Vec* grads,
                      Eigen::Index flow_total) {
    const Eigen::Index cnt = x.cols();
    const int K = gmm.k();
    const double d = static_cast<double>(gmm.dim());

    ForwardCache cache;
    FlowForward f = forward_batch(model, x, grads ? &cache : nullptr);

    Mat ll = (-0.5 * sq_dists(gmm, f.z).array() - 0.5 * d * kLog2Pi).matrix();
    Eigen::RowVectorXd mx = ll.colwise().maxCoeff();
    Eigen::RowVectorXd lse =
        ((ll.rowwise() - mx).array().exp().colwise().sum().log()).matrix() + mx;

    ChunkStats out;
    out.nll_sum = (-lse.transpose() - f.logdet).sum() + double(cnt) * std::log(double(K));
    for (Eigen::Index i = 0; i < cnt; ++i) out.ce_sum += lse[i] - ll(labels[i], i);

    if (grads) {
        Mat post = ((ll.rowwise() - lse).array().exp()).matrix();  // K x cnt
        Mat mbar = gmm.means * post;
        Mat mu_t(gmm.dim(), cnt);
        for (Eigen::Index i = 0; i < cnt; ++i) mu_t.col(i) = gmm.means.col(labels[i]);

        Mat grad_z = inv_n * ((f.z - mbar) + beta * (mbar - mu_t));
        Vec grad_logdet = Vec::Constant(cnt, -inv_n);
        backward_batch(model, cache, grad_z, grad_logdet, grads->head(flow_total));

        // d/dmu_y of the per-sample losses: (z - mu_y) * ((beta-1)post_y - beta*[y = label])
        Mat c = ((beta - 1.0) * post.array()).matrix();
        for (Eigen::Index i = 0; i < cnt; ++i) c(labels[i], i) -= beta;
        c *= inv_n;
        Mat g_means = f.z * c.transpose() - gmm.means * c.rowwise().sum().asDiagonal();
        grads->tail(g_means.size()) += Eigen::Map<Vec>(g_means.data(), g_means.size());
    }
    return out;
}

LossStats loss_impl(const FlowModel& model, const LatentGMM& gmm, const Mat& x,
                    const std::vector<uint32_t>& labels, double beta, Vec* grads) {
    if (x.cols() < 1) throw ContractViolation("loss: empty batch");
    require_dim(x.rows(), model.dim, "loss");
    if (labels.size() != static_cast<size_t>(x.cols()))
        throw ContractViolation("loss: label count does not match batch");
    for (uint32_t y : labels)
        if (y >= static_cast<uint32_t>(gmm.k()))
            throw ContractViolation("loss: label out of range");
    if (beta <= 0.0) throw ContractViolation("loss: beta must be positive");

    const Eigen::Index n = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::Index flow_total = param_layout(model).total;
    const Eigen::Index total = flow_total + gmm.means.size();
    const Eigen::Index chunks = (n + kChunk - 1) / kChunk;

    std::vector<ChunkStats> stats(static_cast<size_t>(chunks));
    std::vector<Vec> chunk_grads(grads ? static_cast<size_t>(chunks) : 0);
    parallel_chunks(n, kChunk, [&](Eigen::Index c, Eigen::Index begin, Eigen::Index cnt) {
        Vec* slot = nullptr;
        if (grads) {
            chunk_grads[static_cast<size_t>(c)] = Vec::Zero(total);
            slot = &chunk_grads[static_cast<size_t>(c)];
        }
        stats[static_cast<size_t>(c)] =
            chunk_loss(model, gmm, x.middleCols(begin, cnt), labels.data() + begin, beta, inv_n,
                       slot, flow_total);
    });

    LossStats r;
    for (const ChunkStats& s : stats) {  // fixed chunk order
        r.nll += s.nll_sum;
        r.ce += s.ce_sum;
    }
    r.nll *= inv_n;
    r.ce *= inv_n;
    r.loss = r.nll + beta * r.ce;
    if (grads) {
        grads->setZero();
        for (const Vec& g : chunk_grads) *grads += g;
    }
    if (!std::isfinite(r.loss)) throw NumericError("loss: non-finite value (training diverged)");
    return r;
}

}  // namespace

std::string report_csv(const TrainReport& report) {
    std::ostringstream out;
    out << "epoch,loss,nll,ce,bpd,err,seconds\n" << std::setprecision(10);
    for (const EpochStats& e : report.epochs)
        out << e.epoch << ',' << e.loss << ',' << e.nll << ',' << e.ce << ',' << e.bpd << ','
            << e.err << ',' << e.seconds << '\n';
    return out.str();
}

Eigen::Index param_count(const FlowModel& model, const LatentGMM& gmm) {
    return param_layout(model).total + gmm.means.size();
}

Vec gather_all(const FlowModel& model, const LatentGMM& gmm) {
    Vec flat(param_count(model, gmm));
    flat.head(param_layout(model).total) = gather_params(model);
    flat.tail(gmm.means.size()) = Eigen::Map<const Vec>(gmm.means.data(), gmm.means.size());
    return flat;
}

void scatter_all(FlowModel& model, LatentGMM& gmm, const Eigen::Ref<const Vec>& flat) {
    require_dim(flat.size(), param_count(model, gmm), "scatter_all");
    const Eigen::Index flow_total = param_layout(model).total;
    scatter_params(model, flat.head(flow_total));
    Eigen::Map<Vec>(gmm.means.data(), gmm.means.size()) = flat.tail(gmm.means.size());
}

LossStats loss_and_grad(const FlowModel& model, const LatentGMM& gmm, const Mat& x,
                        const std::vector<uint32_t>& labels, double beta,
                        Eigen::Ref<Vec> grads) {
    require_dim(grads.size(), param_count(model, gmm), "loss_and_grad");
    Vec g(grads.size());
    LossStats r = loss_impl(model, gmm, x, labels, beta, &g);
    grads = g;
    return r;
}

LossStats loss_only(const FlowModel& model, const LatentGMM& gmm, const Mat& x,
                    const std::vector<uint32_t>& labels, double beta) {
    return loss_impl(model, gmm, x, labels, beta, nullptr);
}

Vec dequantize(const Vec& x, double sigma, std::mt19937_64& rng) {
    if (sigma < 0.0) throw ContractViolation("dequantize: sigma must be >= 0");
    if (sigma == 0.0) return x;
    std::normal_distribution<double> normal(0.0, sigma);
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = x[i] + normal(rng);
    return out;
}

Mat dequantize_batch(const Mat& x, double sigma, std::mt19937_64& rng) {
    if (sigma < 0.0) throw ContractViolation("dequantize: sigma must be >= 0");
    if (sigma == 0.0) return x;
    std::normal_distribution<double> normal(0.0, sigma);
    Mat out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = x(i, j) + normal(rng);
    return out;
}

TrainReport train(FlowModel& model, LatentGMM& gmm, const Dataset& data,
                  const TrainConfig& config, const Dataset* holdout) {
    data.validate();
    require_dim(data.dim(), model.dim, "train");
    require_dim(gmm.dim(), model.dim, "train gmm");
    if (data.k > gmm.k()) throw ContractViolation("train: dataset has more classes than the GMM");
    if (config.batch_size < 1) throw ContractViolation("train: batch_size must be >= 1");
    if (config.lr <= 0.0) throw ContractViolation("train: lr must be positive");
    if (config.beta <= 0.0) throw ContractViolation("train: beta must be positive");
    if (config.clip_norm <= 0.0) throw ContractViolation("train: clip_norm must be positive");
    if (config.start_epoch < 0 || config.start_epoch > config.epochs)
        throw ContractViolation("train: start_epoch out of range");

    std::vector<Milestone> milestones = config.milestones;
    if (milestones.empty() && config.epochs > 0)
        milestones.push_back({static_cast<int>(0.8 * config.epochs), 0.1});

    double lr = config.lr;
    for (const Milestone& m : milestones)  // resuming mid-schedule keeps past multipliers
        if (m.epoch < config.start_epoch) lr *= m.multiplier;

    std::mt19937_64 rng(config.rng_seed);
    const Eigen::Index n = data.n();
    const Eigen::Index total = param_count(model, gmm);

    Vec theta = gather_all(model, gmm);
    Vec adam_m = Vec::Zero(total);
    Vec adam_v = Vec::Zero(total);
    long step = 0;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

    std::vector<Eigen::Index> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});

    TrainReport report;
    for (int epoch = config.start_epoch; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (const Milestone& m : milestones)
            if (m.epoch == epoch) lr *= m.multiplier;
        std::shuffle(perm.begin(), perm.end(), rng);

        double nll_sum = 0, ce_sum = 0, loss_sum = 0;
        Vec grads(total);
        for (Eigen::Index b0 = 0; b0 < n; b0 += config.batch_size) {
            const Eigen::Index cnt = std::min<Eigen::Index>(config.batch_size, n - b0);
            Mat xb(data.dim(), cnt);
            std::vector<uint32_t> yb(static_cast<size_t>(cnt));
            for (Eigen::Index j = 0; j < cnt; ++j) {
                const Eigen::Index src = perm[static_cast<size_t>(b0 + j)];
                xb.col(j) = data.samples.col(src).cast<double>();
                yb[static_cast<size_t>(j)] = data.labels[static_cast<size_t>(src)];
            }
            Mat noisy = dequantize_batch(xb, config.noise_sigma, rng);

            if (!actnorm_initialized(model) && cnt >= 2) {
                init_actnorm(model, noisy);
                theta = gather_all(model, gmm);
            }

            LossStats stats;
            try {
                stats = loss_and_grad(model, gmm, noisy, yb, config.beta, grads);
            } catch (const NumericError& e) {
                throw DivergedError(std::string("train: ") + e.what() + " (epoch " +
                                        std::to_string(epoch) + ", batch " +
                                        std::to_string(b0 / config.batch_size) + ")",
                                    std::move(report), epoch, b0 / config.batch_size);
            }
            if (!grads.allFinite())
                throw DivergedError("train: non-finite gradients (epoch " +
                                        std::to_string(epoch) + ", batch " +
                                        std::to_string(b0 / config.batch_size) + ")",
                                    std::move(report), epoch, b0 / config.batch_size);

            const double gnorm = grads.norm();
            if (gnorm > config.clip_norm) grads *= config.clip_norm / gnorm;

            ++step;
            adam_m = kBeta1 * adam_m + (1.0 - kBeta1) * grads;
            adam_v = kBeta2 * adam_v + (1.0 - kBeta2) * grads.cwiseProduct(grads);
            const double c1 = 1.0 - std::pow(kBeta1, double(step));
            const double c2 = 1.0 - std::pow(kBeta2, double(step));
            theta -= (lr / c1) *
                     (adam_m.array() / ((adam_v / c2).array().sqrt() + kEps)).matrix();
            quantize_f32(theta);
            scatter_all(model, gmm, theta);

            nll_sum += stats.nll * double(cnt);
            ce_sum += stats.ce * double(cnt);
            loss_sum += stats.loss * double(cnt);
        }

        EpochStats es;
        es.epoch = epoch;
        es.loss = loss_sum / double(n);
        es.nll = nll_sum / double(n);
        es.ce = ce_sum / double(n);
        es.bpd = es.nll / (std::log(2.0) * double(model.dim));
        es.err = std::numeric_limits<double>::quiet_NaN();
        if (holdout && holdout->n() > 0) {
            const std::vector<int> pred = classify_batch(model, gmm, holdout->samples.cast<double>());
            Eigen::Index wrong = 0;
            for (Eigen::Index i = 0; i < holdout->n(); ++i)
                if (pred[static_cast<size_t>(i)] !=
                    static_cast<int>(holdout->labels[static_cast<size_t>(i)]))
                    ++wrong;
            es.err = double(wrong) / double(holdout->n());
        }
        es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(es);

        if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
            (epoch + 1 - config.start_epoch) % config.checkpoint_every == 0)
            save_checkpoint(config.checkpoint_path, model, &gmm, static_cast<uint32_t>(epoch + 1));
    }
    return report;
}

}  // namespace ecinn
