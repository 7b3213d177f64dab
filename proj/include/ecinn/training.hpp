#pragma once

#include <random>
#include <string>
#include <vector>

#include "ecinn/dataset.hpp"
#include "ecinn/flow.hpp"
#include "ecinn/gmm.hpp"

namespace ecinn {

// beta-weighted objective L = mean[-log p_X(x)] + beta * mean[-log p(y|x)]
// over the flow and the GMM means, trained with Adam, a milestone learning-
// rate schedule, dequantization noise, and global-norm gradient clipping.
// Fully deterministic under a fixed seed, independent of the thread count.

struct Milestone {
    int epoch = 0;
    double multiplier = 1.0;
};

struct TrainConfig {
    double beta = 1.0;
    double lr = 1e-3;
    std::vector<Milestone> milestones;  // empty: x0.1 once at 80% of epochs
    int epochs = 0;
    int batch_size = 128;
    double noise_sigma = 1.0 / 256.0;  // dequantization
    uint64_t rng_seed = 0;
    double clip_norm = 10.0;
    int checkpoint_every = 0;  // epochs between snapshots; 0 = none
    std::string checkpoint_path;
    int start_epoch = 0;  // resuming continues the epoch counter
};

struct EpochStats {
    int epoch = 0;
    double loss = 0, nll = 0, ce = 0, bpd = 0;
    double err = 0;      // held-out classification error (NaN without a holdout)
    double seconds = 0;  // wall clock
};

struct TrainReport {
    std::vector<EpochStats> epochs;  // one record per completed epoch
};

// CSV with header epoch,loss,nll,ce,bpd,err,seconds.
std::string report_csv(const TrainReport& report);

// Non-finite loss mid-training; carries the report up to the last good epoch.
struct DivergedError : NumericError {
    TrainReport partial;
    int epoch;
    Eigen::Index batch_index;

    DivergedError(const std::string& msg, TrainReport partial_in, int epoch_in,
                  Eigen::Index batch_in)
        : NumericError(msg), partial(std::move(partial_in)), epoch(epoch_in),
          batch_index(batch_in) {}
};

// ---- loss ------------------------------------------------------------------

struct LossStats {
    double loss = 0, nll = 0, ce = 0;
};

// Flat parameter/gradient layout: flow parameters first (param_layout order),
// then the GMM means in column-major order.
Eigen::Index param_count(const FlowModel& model, const LatentGMM& gmm);
Vec gather_all(const FlowModel& model, const LatentGMM& gmm);
void scatter_all(FlowModel& model, LatentGMM& gmm, const Eigen::Ref<const Vec>& flat);

// One forward pass per sample; fills `grads` (overwritten) for all flow and
// GMM parameters. Throws NumericError when the loss is non-finite.
LossStats loss_and_grad(const FlowModel& model, const LatentGMM& gmm, const Mat& x,
                        const std::vector<uint32_t>& labels, double beta,
                        Eigen::Ref<Vec> grads);
// Same objective without gradients (finite-difference harnesses, evaluation).
LossStats loss_only(const FlowModel& model, const LatentGMM& gmm, const Mat& x,
                    const std::vector<uint32_t>& labels, double beta);

// x + eps, eps ~ N(0, sigma^2) i.i.d. per entry; sigma = 0 returns x
// untouched without consuming the generator.
Vec dequantize(const Vec& x, double sigma, std::mt19937_64& rng);
Mat dequantize_batch(const Mat& x, double sigma, std::mt19937_64& rng);

// Adam over shuffled minibatches; parameters quantized to float32 values
// after every step (checkpoints round-trip bit-exactly). Holdout, when given,
// supplies the per-epoch classification error.
TrainReport train(FlowModel& model, LatentGMM& gmm, const Dataset& data,
                  const TrainConfig& config, const Dataset* holdout = nullptr);

}  // namespace ecinn
