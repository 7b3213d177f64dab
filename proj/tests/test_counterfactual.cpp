#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <numeric>

#include "ecinn/counterfactual.hpp"
#include "oracles.hpp"

using namespace ecinn;

namespace {

// z = x, logdet = 0: latents equal inputs, so index means are data averages.
FlowModel identity_flow(int dim) {
    FlowModel m;
    m.dim = dim;
    return m;
}

LatentGMM gmm_with_means(const Mat& means) {
    LatentGMM g;
    g.means = means;
    return g;
}

EcinnIndex index_with_means(const Mat& means) {
    EcinnIndex idx;
    idx.means = means;
    idx.group_sizes.assign(static_cast<size_t>(means.cols()), 1);
    return idx;
}

Mat two_cols(double ax, double ay, double bx, double by) {
    Mat m(2, 2);
    m << ax, bx, ay, by;
    return m;
}

// Small trained-ish flow for round-trip style checks.
FlowModel random_flow(int dim, uint64_t seed) {
    FlowModel m = make_flow(dim, 3, 8, 2.0, seed);
    oracles::randomize_params(m, seed + 1);
    return m;
}

Dataset blob_data(int n, uint64_t seed) {
    return gen_blobs(n, 2, 2, default_blob_centers(2, 2), 0.4, seed, Split::Train);
}

}  // namespace

TEST_CASE("index groups by predicted class and averages latents") {
    // identity flow, means at 0 and (2,0): prediction is nearest mean of x itself
    FlowModel model = identity_flow(2);
    LatentGMM gmm = gmm_with_means(two_cols(0, 0, 2, 0));

    Dataset data;
    data.geom = {1, 2, 1};
    data.k = 2;
    data.samples.resize(2, 3);
    data.samples << -0.5f, 0.5f, 2.5f,  // first two predicted 0, last predicted 1
                     0.0f, 1.0f, 0.5f;
    data.labels = {1, 1, 0};  // stored labels must not matter

    const EcinnIndex idx = build_index(model, gmm, data);
    REQUIRE(idx.k() == 2);
    CHECK(idx.group_sizes[0] == 2);
    CHECK(idx.group_sizes[1] == 1);
    CHECK_FALSE(idx.degenerate);
    CHECK(idx.means(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(idx.means(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
    // a single-sample group is exactly that sample's latent
    CHECK(idx.means(0, 1) == 2.5);
    CHECK(idx.means(1, 1) == 0.5);
}

TEST_CASE("index flags fewer than two nonempty groups as degenerate") {
    FlowModel model = identity_flow(2);
    LatentGMM gmm = gmm_with_means(two_cols(0, 0, 100, 100));
    Dataset data = blob_data(20, 5);  // every sample lands nearest mean 0
    const EcinnIndex idx = build_index(model, gmm, data);
    CHECK(idx.group_sizes[0] == 20);
    CHECK(idx.group_sizes[1] == 0);
    CHECK(idx.degenerate);
    CHECK(idx.means.col(1).cwiseAbs().maxCoeff() == 0.0);  // empty group pinned to zero
    CHECK_THROWS_WITH_AS(delta(idx, 0, 1), doctest::Contains("empty group for class 1"),
                         ContractViolation);
}

TEST_CASE("index is invariant to the sample order") {
    FlowModel model = random_flow(2, 41);
    LatentGMM gmm = make_gmm(2, 2);
    Dataset data = blob_data(500, 6);

    Dataset shuffled = data;
    std::vector<Eigen::Index> perm(500);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    for (Eigen::Index i = 0; i < 500; ++i) {
        shuffled.samples.col(i) = data.samples.col(perm[i]);
        shuffled.labels[i] = data.labels[perm[i]];
    }

    const EcinnIndex a = build_index(model, gmm, data);
    const EcinnIndex b = build_index(model, gmm, shuffled);
    REQUIRE(a.group_sizes == b.group_sizes);
    CHECK((a.means - b.means).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("index fingerprint tracks the model and dataset contents") {
    FlowModel model = random_flow(2, 43);
    LatentGMM gmm = make_gmm(2, 2);
    Dataset data = blob_data(50, 7);

    const EcinnIndex a = build_index(model, gmm, data);
    const EcinnIndex b = build_index(model, gmm, data);
    CHECK(a.fingerprint == b.fingerprint);

    Dataset other = blob_data(50, 8);
    const EcinnIndex c = build_index(model, gmm, other);
    CHECK(a.fingerprint != c.fingerprint);

    FlowModel model2 = random_flow(2, 44);
    const EcinnIndex d = build_index(model2, gmm, data);
    CHECK(a.fingerprint != d.fingerprint);
}

TEST_CASE("delta is the empirical mean difference") {
    EcinnIndex idx = index_with_means(two_cols(1, 2, 3, -1));
    Vec d01 = delta(idx, 0, 1);
    CHECK(d01(0) == 2.0);
    CHECK(d01(1) == -3.0);
    CHECK((delta(idx, 1, 0) + d01).cwiseAbs().maxCoeff() == 0.0);  // antisymmetry
    CHECK(delta(idx, 0, 0).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(delta(idx, 0, 2), ContractViolation);
    CHECK_THROWS_AS(delta(idx, -1, 0), ContractViolation);
}

TEST_CASE("alpha0: equidistant latent needs no correction") {
    const Mat means = two_cols(-1, 0, 1, 0);
    const LatentGMM gmm = gmm_with_means(means);
    const EcinnIndex idx = index_with_means(means);
    Vec z(2);
    z << 0.0, 0.5;
    CHECK(alpha_zero(gmm, idx, z, 0, 1) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("alpha0: symmetric means with the mean-difference direction give 1/2") {
    const Mat means = two_cols(0, 0, 2, 0);
    const LatentGMM gmm = gmm_with_means(means);
    const EcinnIndex idx = index_with_means(means);
    CHECK(alpha_zero(gmm, idx, Vec::Zero(2), 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("alpha0 worked example lands exactly on the decision boundary") {
    const Mat means = two_cols(1, 2, 3, -1);  // mu_p = (1,2), mu_q = (3,-1)
    const LatentGMM gmm = gmm_with_means(means);
    const EcinnIndex idx = index_with_means(means);
    const Vec z = Vec::Zero(2);

    const double a0 = alpha_zero(gmm, idx, z, 0, 1);
    CHECK(a0 == doctest::Approx(2.5 / 13.0).epsilon(1e-12));

    const Vec z0 = z + a0 * delta(idx, 0, 1);
    const double dp = (z0 - means.col(0)).squaredNorm();
    const double dq = (z0 - means.col(1)).squaredNorm();
    CHECK(dp == doctest::Approx(dq).epsilon(1e-12));
    CHECK(dp == doctest::Approx(7.0192).epsilon(1e-4));

    // independent check: bisection on the squared-distance gap
    const Vec d = delta(idx, 0, 1);
    CHECK(std::abs(a0 - oracles::bisect_alpha(z, d, means.col(0), means.col(1))) < 1e-8);
}

TEST_CASE("alpha0 agrees with bisection on random configurations") {
    std::mt19937_64 rng(71);
    std::normal_distribution<double> normal(0.0, 1.5);
    for (int trial = 0; trial < 200; ++trial) {
        const int dim = 2 + static_cast<int>(rng() % 6);
        Mat model_means(dim, 2), emp_means(dim, 2);
        Vec z(dim);
        for (int i = 0; i < dim; ++i) {
            model_means(i, 0) = normal(rng);
            model_means(i, 1) = normal(rng);
            emp_means(i, 0) = normal(rng);
            emp_means(i, 1) = normal(rng);
            z(i) = normal(rng);
        }
        const LatentGMM gmm = gmm_with_means(model_means);
        const EcinnIndex idx = index_with_means(emp_means);
        const Vec d = delta(idx, 0, 1);

        double a0;
        try {
            a0 = alpha_zero(gmm, idx, z, 0, 1);
        } catch (const NumericError&) {
            continue;  // near-parallel draw
        }
        CHECK(std::abs(a0 - oracles::bisect_alpha(z, d, model_means.col(0),
                                                  model_means.col(1))) < 1e-8);
    }
}

TEST_CASE("alpha0 convention switch picks the mean family per role") {
    const Mat model_means = two_cols(0, 0, 2, 0);
    const Mat emp_means = two_cols(0, 1, 0, 3);  // empirical direction (0,2)
    const LatentGMM gmm = gmm_with_means(model_means);
    const EcinnIndex idx = index_with_means(emp_means);
    Vec z(2);
    z << 0.5, 0.0;

    // boundary from model means w=(2,0), b=-2; direction per convention
    // Split: d = (0,2) orthogonal to w -> parallel-boundary error
    CHECK_THROWS_AS(alpha_zero(gmm, idx, z, 0, 1, MeansConvention::Split), NumericError);
    // Model: d = (2,0): alpha = -(w'z+b)/(w'd) = -(1-2)/4 = 0.25
    CHECK(alpha_zero(gmm, idx, z, 0, 1, MeansConvention::Model) ==
          doctest::Approx(0.25).epsilon(1e-12));
    // Empirical: w=(0,2), b=-(0,2)'(0,2)/2 = -4, z on axis -> alpha = 1
    CHECK(alpha_zero(gmm, idx, z, 0, 1, MeansConvention::Empirical) ==
          doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(alpha_zero(gmm, idx, z, 1, 1), ContractViolation);
}

TEST_CASE("alpha1 heuristic values") {
    CHECK(alpha_one(0.0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(alpha_one(0.5) == doctest::Approx(1.05).epsilon(1e-15));
    CHECK(alpha_one(-0.2) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("counterfactual at alpha 0 reproduces the input") {
    FlowModel model = random_flow(2, 51);
    LatentGMM gmm = make_gmm(2, 2);
    Dataset data = blob_data(100, 11);
    const EcinnIndex idx = build_index(model, gmm, data);

    for (int i = 0; i < 5; ++i) {
        const Vec x = data.sample(i);
        const Vec xhat = counterfactual(model, gmm, idx, x, 1, 0.0);
        CHECK((xhat - x).cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("heatmap is the elementwise difference") {
    Vec x(3), xh(3);
    x << 1, 2, 3;
    xh << 0.5, 2, 4.5;
    const Vec h = heatmap(x, xh);
    CHECK(h(0) == -0.5);
    CHECK(h(1) == 0.0);
    CHECK(h(2) == 1.5);
    CHECK((heatmap(xh, x) + h).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(heatmap(x, Vec::Zero(2)), ContractViolation);
}

TEST_CASE("explain runs one forward and two inverse passes") {
    FlowModel model = random_flow(2, 61);
    LatentGMM gmm = make_gmm(2, 2);
    Dataset data = blob_data(100, 13);
    const EcinnIndex idx = build_index(model, gmm, data);

    const Vec x = data.sample(3);
    const uint64_t fwd0 = model.counters.forward;
    const uint64_t inv0 = model.counters.inverse;
    const CounterfactualResult r = explain(model, gmm, idx, x, 1);
    CHECK(model.counters.forward - fwd0 == 1);
    CHECK(model.counters.inverse - inv0 == 2);
    CHECK(r.forward_passes == 1);
    CHECK(r.inverse_passes == 2);

    // bitwise reconstruction identity for both heatmaps
    CHECK(((r.x + r.heat0) - r.x_hat0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(((r.x + r.heat1) - r.x_hat1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.q == 1);
    CHECK(r.alpha1 == doctest::Approx(0.8 + 0.5 * r.alpha0).epsilon(1e-12));
}

TEST_CASE("explain flags a target equal to the predicted class") {
    FlowModel model = identity_flow(2);
    LatentGMM gmm = gmm_with_means(two_cols(0, 0, 2, 0));
    EcinnIndex idx = index_with_means(two_cols(0.1, 0, 1.9, 0));
    idx.group_sizes = {5, 5};

    Vec x(2);
    x << -0.2, 0.1;  // predicted class 0
    const CounterfactualResult r = explain(model, gmm, idx, x, 0);
    CHECK(r.same_class);
    CHECK(r.p == 0);
    CHECK(r.alpha0 == 0.0);  // no correction: both counterfactuals reproduce x
    CHECK((r.x_hat0 - x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.pred0 == 0);
}

TEST_CASE("explain is deterministic") {
    FlowModel model = random_flow(2, 67);
    LatentGMM gmm = make_gmm(2, 2);
    Dataset data = blob_data(100, 17);
    const EcinnIndex idx = build_index(model, gmm, data);
    const Vec x = data.sample(7);
    const CounterfactualResult a = explain(model, gmm, idx, x, 1);
    const CounterfactualResult b = explain(model, gmm, idx, x, 1);
    CHECK((a.x_hat0 - b.x_hat0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.x_hat1 - b.x_hat1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.alpha0 == b.alpha0);
}

TEST_CASE("index file round-trips byte for byte") {
    FlowModel model = random_flow(2, 73);
    LatentGMM gmm = make_gmm(2, 2);
    Dataset data = blob_data(64, 19);
    const EcinnIndex idx = build_index(model, gmm, data);

    const std::string bytes = index_to_bytes(idx);
    const EcinnIndex back = index_from_bytes(bytes);
    CHECK(back.group_sizes == idx.group_sizes);
    CHECK(back.fingerprint == idx.fingerprint);
    CHECK(back.degenerate == idx.degenerate);
    CHECK((back.means - idx.means).cwiseAbs().maxCoeff() == 0.0);
    CHECK(index_to_bytes(back) == bytes);

    const std::string path = "test_index_roundtrip.ecix";
    save_index(idx, path);
    const EcinnIndex loaded = load_index(path);
    CHECK(index_to_bytes(loaded) == bytes);
    std::remove(path.c_str());

    // truncation at any prefix fails cleanly instead of crashing
    for (size_t cut : {size_t{0}, size_t{3}, size_t{9}, bytes.size() / 2, bytes.size() - 1})
        CHECK_THROWS_AS(index_from_bytes(std::string_view(bytes).substr(0, cut)), FormatError);
    CHECK_THROWS_AS(index_from_bytes(bytes + "x"), FormatError);  // trailing junk
}
