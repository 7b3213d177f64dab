#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>

#include "ecinn/checkpoint.hpp"
#include "ecinn/training.hpp"
#include "oracles.hpp"

using namespace ecinn;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct BlobFixture {
    Dataset train;
    Dataset test;
    FlowModel model;
    LatentGMM gmm;

    BlobFixture() {
        const Mat centers = default_blob_centers(2, 2);
        train = gen_blobs(1000, 2, 2, centers, 0.5, 13, Split::Train);
        test = gen_blobs(400, 2, 2, centers, 0.5, 14, Split::Test);
        model = make_flow(2, 4, 16, 2.0, 5);
        gmm = make_gmm(2, 2);
    }
};

TrainConfig blob_config(int epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 128;
    cfg.lr = 5e-3;
    cfg.rng_seed = 99;
    cfg.noise_sigma = 1.0 / 256.0;
    return cfg;
}

}  // namespace

TEST_CASE("loss on a single sample, identity model, one class") {
    FlowModel model;
    model.dim = 3;
    LatentGMM gmm;
    gmm.means = Mat::Zero(3, 1);
    Vec x(3);
    x << 0.5, -1.0, 2.0;
    const LossStats s = loss_only(model, gmm, x, {0}, 1.0);
    CHECK(s.ce == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(s.nll == doctest::Approx(0.5 * x.squaredNorm() + 1.5 * kLog2Pi).epsilon(1e-12));
    CHECK(s.loss == doctest::Approx(s.nll).epsilon(1e-12));
}

TEST_CASE("loss gradients match finite differences of the scalar loss") {
    FlowModel model = make_flow(4, 2, 8, 2.0, 17);
    oracles::randomize_params(model, 18);
    LatentGMM gmm = make_gmm(4, 3);
    const Mat x = oracles::random_mat(4, 16, 19);
    std::vector<uint32_t> labels(16);
    for (size_t i = 0; i < 16; ++i) labels[i] = static_cast<uint32_t>(i % 3);

    for (double beta : {0.5, 1.0, 1.4265}) {
        CAPTURE(beta);
        Vec grads(param_count(model, gmm));
        loss_and_grad(model, gmm, x, labels, beta, grads);

        auto f = [&](const Vec& theta) {
            FlowModel m = model;
            LatentGMM g = gmm;
            scatter_all(m, g, theta);
            return loss_only(m, g, x, labels, beta).loss;
        };
        const Vec fd = oracles::fd_gradient(gather_all(model, gmm), f);
        CHECK(oracles::max_rel_err(grads, fd) < 1e-3);
    }
}

TEST_CASE("vanishing beta leaves the pure NLL gradient") {
    FlowModel model = make_flow(4, 1, 8, 2.0, 27);
    oracles::randomize_params(model, 28);
    LatentGMM gmm = make_gmm(4, 3);
    const Mat x = oracles::random_mat(4, 8, 29);
    const std::vector<uint32_t> labels{0, 1, 2, 0, 1, 2, 0, 1};

    Vec tiny(param_count(model, gmm));
    loss_and_grad(model, gmm, x, labels, 1e-12, tiny);

    // finite differences of the NLL term alone
    auto nll = [&](const Vec& theta) {
        FlowModel m = model;
        LatentGMM g = gmm;
        scatter_all(m, g, theta);
        return loss_only(m, g, x, labels, 1.0).nll;
    };
    const Vec fd = oracles::fd_gradient(gather_all(model, gmm), nll);
    CHECK(oracles::max_rel_err(tiny, fd) < 1e-3);
}

TEST_CASE("gradient reduction is independent of the worker-thread count") {
    FlowModel model = make_flow(6, 2, 8, 2.0, 37);
    oracles::randomize_params(model, 38);
    LatentGMM gmm = make_gmm(6, 3);
    const Mat x = oracles::random_mat(6, 100, 39);  // several 32-column chunks
    std::vector<uint32_t> labels(100);
    for (size_t i = 0; i < 100; ++i) labels[i] = static_cast<uint32_t>(i % 3);

    setenv("ECINN_THREADS", "1", 1);
    Vec g1(param_count(model, gmm));
    const LossStats s1 = loss_and_grad(model, gmm, x, labels, 1.0, g1);
    setenv("ECINN_THREADS", "4", 1);
    Vec g4(param_count(model, gmm));
    const LossStats s4 = loss_and_grad(model, gmm, x, labels, 1.0, g4);
    setenv("ECINN_THREADS", "1", 1);

    CHECK(s1.loss == s4.loss);  // bitwise
    CHECK((g1 - g4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dequantize: identity at sigma 0, deterministic, unbiased") {
    std::mt19937_64 rng(4);
    const Vec x = oracles::random_vec(64, 3);
    const Vec same = dequantize(x, 0.0, rng);
    CHECK((same - x).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 a(123), b(123);
    const Vec na = dequantize(x, 0.1, a);
    const Vec nb = dequantize(x, 0.1, b);
    CHECK((na - nb).cwiseAbs().maxCoeff() == 0.0);  // bit-identical under the same state
    CHECK((na - x).cwiseAbs().maxCoeff() > 0.0);

    // sample mean of the noise within 3*sigma/sqrt(N)
    const double sigma = 1.0 / 256.0;
    const Eigen::Index n = 100000;
    std::mt19937_64 c(7);
    const Vec noise = dequantize(Vec::Zero(n), sigma, c);
    CHECK(std::abs(noise.mean()) < 3.0 * sigma / std::sqrt(double(n)));

    CHECK_THROWS_AS(dequantize(x, -0.1, rng), ContractViolation);
}

TEST_CASE("zero epochs: parameters unchanged, empty report") {
    BlobFixture fx;
    const Vec before = gather_all(fx.model, fx.gmm);
    const TrainReport report = train(fx.model, fx.gmm, fx.train, blob_config(0), &fx.test);
    CHECK(report.epochs.empty());
    CHECK((gather_all(fx.model, fx.gmm) - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("blob training reaches <= 2% held-out error within 30 epochs") {
    BlobFixture fx;
    const TrainReport report = train(fx.model, fx.gmm, fx.train, blob_config(30), &fx.test);
    REQUIRE(report.epochs.size() == 30);
    CHECK(report.epochs.back().err <= 0.02);

    for (const EpochStats& e : report.epochs) {
        CHECK(e.ce >= 0.0);                                          // cross-entropy term
        CHECK(e.loss == doctest::Approx(e.nll + e.ce).epsilon(1e-9));  // beta = 1 decomposition
        CHECK(std::isfinite(e.bpd));
    }

    // median loss over the last 10 epochs improves on the first 10
    auto window_median = [&](size_t start) {
        std::vector<double> w;
        for (size_t i = start; i < start + 10; ++i) w.push_back(report.epochs[i].loss);
        std::sort(w.begin(), w.end());
        return 0.5 * (w[4] + w[5]);
    };
    CHECK(window_median(report.epochs.size() - 10) < window_median(0));

    // trained parameters stay exactly float32-representable
    Vec theta = gather_all(fx.model, fx.gmm);
    Vec quantized = theta;
    quantize_f32(quantized);
    CHECK((theta - quantized).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training is deterministic: identical seed, identical bytes") {
    BlobFixture a, b;
    const TrainReport ra = train(a.model, a.gmm, a.train, blob_config(4), &a.test);
    const TrainReport rb = train(b.model, b.gmm, b.train, blob_config(4), &b.test);
    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (size_t i = 0; i < ra.epochs.size(); ++i) {
        CHECK(ra.epochs[i].loss == rb.epochs[i].loss);  // bitwise
        CHECK(ra.epochs[i].err == rb.epochs[i].err);
    }
    CHECK(checkpoint_to_bytes(a.model, &a.gmm, 4) == checkpoint_to_bytes(b.model, &b.gmm, 4));
}

TEST_CASE("checkpoint round-trip reproduces forward outputs bit for bit") {
    BlobFixture fx;
    train(fx.model, fx.gmm, fx.train, blob_config(2), nullptr);
    const std::string bytes = checkpoint_to_bytes(fx.model, &fx.gmm, 2);
    Checkpoint ck = checkpoint_from_bytes(bytes);
    REQUIRE(ck.gmm.has_value());
    CHECK(ck.epochs_completed == 2);
    CHECK(checkpoint_to_bytes(ck.model, &*ck.gmm, 2) == bytes);  // save -> load -> save

    const Mat x = fx.test.batch(0, 50);
    const FlowForward fa = forward_batch(fx.model, x);
    const FlowForward fb = forward_batch(ck.model, x);
    CHECK((fa.z - fb.z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((fa.logdet - fb.logdet).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("resume continues the epoch counter") {
    BlobFixture cold, warm;
    TrainConfig cfg = blob_config(6);
    train(cold.model, cold.gmm, cold.train, cfg, nullptr);

    TrainConfig first = cfg;
    first.epochs = 3;
    train(warm.model, warm.gmm, warm.train, first, nullptr);
    TrainConfig rest = cfg;
    rest.start_epoch = 3;
    const TrainReport tail = train(warm.model, warm.gmm, warm.train, rest, nullptr);
    REQUIRE(tail.epochs.size() == 3);
    CHECK(tail.epochs.front().epoch == 3);
    CHECK(tail.epochs.back().epoch == 5);
}

TEST_CASE("non-finite loss raises a diverged-training error with the partial report") {
    BlobFixture fx;
    TrainConfig cfg = blob_config(2);
    cfg.lr = 1e12;  // one Adam step blows the log-scales past exp() range

    try {
        train(fx.model, fx.gmm, fx.train, cfg, nullptr);
        FAIL("expected DivergedError");
    } catch (const DivergedError& e) {
        CHECK(e.epoch == 0);
        CHECK(e.partial.epochs.empty());  // diverged inside the first epoch
        CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
}

TEST_CASE("report CSV has the documented header") {
    TrainReport r;
    r.epochs.push_back({0, 1.5, 1.0, 0.5, 0.7, 0.25, 0.01});
    const std::string csv = report_csv(r);
    CHECK(csv.rfind("epoch,loss,nll,ce,bpd,err,seconds\n", 0) == 0);
    CHECK(csv.find("\n0,1.5,1,0.5,0.7,0.25,0.01\n") != std::string::npos);
}

TEST_CASE("loss input contracts") {
    FlowModel model = make_flow(4, 1, 4, 2.0, 3);
    LatentGMM gmm = make_gmm(4, 2);
    Vec grads(param_count(model, gmm));
    const Mat x = Mat::Zero(4, 2);
    CHECK_THROWS_AS(loss_and_grad(model, gmm, x, {0}, 1.0, grads), ContractViolation);
    CHECK_THROWS_AS(loss_and_grad(model, gmm, x, {0, 5}, 1.0, grads), ContractViolation);
    CHECK_THROWS_AS(loss_and_grad(model, gmm, Mat::Zero(4, 0), {}, 1.0, grads),
                    ContractViolation);
    CHECK_THROWS_AS(loss_and_grad(model, gmm, x, {0, 1}, -1.0, grads), ContractViolation);
}
