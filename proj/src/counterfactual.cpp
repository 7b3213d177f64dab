#include "ecinn/counterfactual.hpp"

#include <cmath>

#include "binio.hpp"
#include "ecinn/checkpoint.hpp"
#include "ecinn/threading.hpp"

namespace ecinn {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'I', 'X'};
constexpr Eigen::Index kChunk = 256;

void check_class(int y, int k, const char* what) {
    if (y < 0 || y >= k) throw ContractViolation(std::string(what) + ": class id out of range");
}

void check_group(const EcinnIndex& index, int j, const char* what) {
    if (index.group_sizes[static_cast<size_t>(j)] == 0)
        throw ContractViolation(std::string(what) + ": empty group for class " +
                                std::to_string(j));
}

// Content fingerprint: FNV-1a hash and length of the serialized model, then
// of the serialized dataset, each as little-endian u64.
std::array<uint8_t, 32> make_fingerprint(const FlowModel& model, const LatentGMM& gmm,
                                         const Dataset& data) {
    const std::string ckpt = checkpoint_to_bytes(model, &gmm, 0);
    const std::string ds = dataset_to_bytes(data);
    binio::Writer w;
    w.put_u64(fnv1a64(ckpt.data(), ckpt.size()));
    w.put_u64(static_cast<uint64_t>(ckpt.size()));
    w.put_u64(fnv1a64(ds.data(), ds.size()));
    w.put_u64(static_cast<uint64_t>(ds.size()));
    std::array<uint8_t, 32> fp{};
    std::copy(w.bytes.begin(), w.bytes.end(), fp.begin());
    return fp;
}

}  // namespace

EcinnIndex build_index(const FlowModel& model, const LatentGMM& gmm, const Dataset& data) {
    data.validate();
    require_dim(data.dim(), model.dim, "build_index");
    require_dim(gmm.dim(), model.dim, "build_index gmm");
    const int k = gmm.k();
    const Eigen::Index n = data.n();

    const Eigen::Index chunks = (n + kChunk - 1) / kChunk;
    std::vector<Mat> sums(static_cast<size_t>(chunks));
    std::vector<std::vector<uint64_t>> counts(static_cast<size_t>(chunks));
    parallel_chunks(n, kChunk, [&](Eigen::Index c, Eigen::Index begin, Eigen::Index cnt) {
        Mat sum = Mat::Zero(model.dim, k);
        std::vector<uint64_t> count(static_cast<size_t>(k), 0);
        FlowForward f = forward_batch(model, data.batch(begin, cnt));
        const std::vector<int> pred = nearest_mean_batch(gmm, f.z);
        for (Eigen::Index i = 0; i < cnt; ++i) {
            sum.col(pred[static_cast<size_t>(i)]) += f.z.col(i);
            ++count[static_cast<size_t>(pred[static_cast<size_t>(i)])];
        }
        sums[static_cast<size_t>(c)] = std::move(sum);
        counts[static_cast<size_t>(c)] = std::move(count);
    });

    EcinnIndex index;
    index.means = Mat::Zero(model.dim, k);
    index.group_sizes.assign(static_cast<size_t>(k), 0);
    Mat total = Mat::Zero(model.dim, k);
    for (Eigen::Index c = 0; c < chunks; ++c) {  // fixed chunk order
        total += sums[static_cast<size_t>(c)];
        for (int j = 0; j < k; ++j)
            index.group_sizes[static_cast<size_t>(j)] += counts[static_cast<size_t>(c)][static_cast<size_t>(j)];
    }
    int nonempty = 0;
    for (int j = 0; j < k; ++j) {
        const uint64_t gj = index.group_sizes[static_cast<size_t>(j)];
        if (gj > 0) {
            index.means.col(j) = total.col(j) / static_cast<double>(gj);
            ++nonempty;
        }
    }
    quantize_f32(index.means);  // in-memory means match the float32 file exactly
    index.degenerate = nonempty <= 1;
    index.fingerprint = make_fingerprint(model, gmm, data);
    return index;
}

Vec delta(const EcinnIndex& index, int p, int q) {
    check_class(p, index.k(), "delta");
    check_class(q, index.k(), "delta");
    check_group(index, p, "delta");
    check_group(index, q, "delta");
    return index.means.col(q) - index.means.col(p);
}

double alpha_zero(const LatentGMM& gmm, const EcinnIndex& index, const Vec& z, int p, int q,
                  MeansConvention conv) {
    check_class(p, gmm.k(), "alpha_zero");
    check_class(q, gmm.k(), "alpha_zero");
    if (p == q) throw ContractViolation("alpha_zero: source and target class coincide");
    require_dim(z.size(), gmm.dim(), "alpha_zero");
    require_finite(z, "alpha_zero input");

    const bool boundary_model = conv != MeansConvention::Empirical;
    const bool direction_empirical = conv != MeansConvention::Model;
    if (!boundary_model || direction_empirical) {
        check_group(index, p, "alpha_zero");
        check_group(index, q, "alpha_zero");
    }
    const Vec mp = boundary_model ? Vec(gmm.means.col(p)) : Vec(index.means.col(p));
    const Vec mq = boundary_model ? Vec(gmm.means.col(q)) : Vec(index.means.col(q));
    const Vec w = mq - mp;
    const double b = -0.5 * (mp + mq).dot(w);
    const Vec d = direction_empirical ? Vec(index.means.col(q) - index.means.col(p))
                                      : Vec(gmm.means.col(q) - gmm.means.col(p));

    const double denom = w.dot(d);
    const double eps_parallel = 1e-8 * w.norm() * d.norm();
    if (std::abs(denom) <= eps_parallel)
        throw NumericError("alpha_zero: correction direction is parallel to the decision "
                           "boundary between classes " +
                           std::to_string(p) + " and " + std::to_string(q));
    return -(w.dot(z) + b) / denom;
}

double alpha_one(double alpha0) {
    if (!std::isfinite(alpha0)) throw ContractViolation("alpha_one: alpha0 must be finite");
    return 0.8 + 0.5 * alpha0;
}

Vec counterfactual(const FlowModel& model, const LatentGMM& gmm, const EcinnIndex& index,
                   const Vec& x, int q, double alpha, MeansConvention conv) {
    (void)conv;  // the convention only affects alpha_zero; Delta is always empirical
    check_class(q, gmm.k(), "counterfactual");
    auto [z, logdet] = forward(model, x);  // the single forward pass also yields p
    (void)logdet;
    const int p = nearest_mean(gmm, z);
    const Vec d = delta(index, p, q);
    return inverse(model, z + alpha * d);
}

Vec heatmap(const Vec& x, const Vec& x_hat) {
    require_dim(x_hat.size(), x.size(), "heatmap");
    return x_hat - x;
}

CounterfactualResult explain(const FlowModel& model, const LatentGMM& gmm,
                             const EcinnIndex& index, const Vec& x, int q,
                             MeansConvention conv) {
    check_class(q, gmm.k(), "explain");

    CounterfactualResult r;
    r.x = x;
    r.q = q;

    auto [z, logdet] = forward(model, x);  // exactly one forward pass
    (void)logdet;
    r.p = nearest_mean(gmm, z);
    r.same_class = (q == r.p);

    const Vec d = delta(index, r.p, q);
    // q == p makes Delta zero and alpha irrelevant; keep alpha0 = 0 there.
    r.alpha0 = r.same_class ? 0.0 : alpha_zero(gmm, index, z, r.p, q, conv);
    r.alpha1 = alpha_one(r.alpha0);

    Mat zc(z.size(), 2);
    zc.col(0) = z + r.alpha0 * d;
    zc.col(1) = z + r.alpha1 * d;
    const Mat xc = inverse_batch(model, zc);  // both counterfactuals in two inverse passes
    r.pred0 = nearest_mean(gmm, zc.col(0));   // classes read off the latents: no extra forward
    r.pred1 = nearest_mean(gmm, zc.col(1));

    // h := raw difference, then x_hat := x + h so the identity holds bitwise.
    r.heat0 = xc.col(0) - x;
    r.heat1 = xc.col(1) - x;
    r.x_hat0 = x + r.heat0;
    r.x_hat1 = x + r.heat1;

    r.forward_passes = 1;
    r.inverse_passes = 2;
    return r;
}

std::string index_to_bytes(const EcinnIndex& index) {
    binio::Writer w;
    w.put_magic(kMagic);
    w.put_u32(static_cast<uint32_t>(index.k()));
    w.put_u32(static_cast<uint32_t>(index.dim()));
    for (uint64_t g : index.group_sizes) w.put_u64(g);
    for (Eigen::Index i = 0; i < index.means.size(); ++i)
        w.put_f32(static_cast<float>(index.means.data()[i]));
    w.put_raw(index.fingerprint.data(), index.fingerprint.size());
    return std::move(w.bytes);
}

EcinnIndex index_from_bytes(std::string_view bytes) {
    binio::Reader r(bytes, "index");
    r.expect_magic(kMagic);
    const auto k = static_cast<Eigen::Index>(r.get_u32());
    const auto dim = static_cast<Eigen::Index>(r.get_u32());
    if (k < 1 || k > (1 << 20) || dim < 1 || dim > (1 << 24))
        throw FormatError("index: implausible header");
    EcinnIndex index;
    index.group_sizes.resize(static_cast<size_t>(k));
    for (auto& g : index.group_sizes) g = r.get_u64();
    index.means = Mat(dim, k);
    for (Eigen::Index i = 0; i < index.means.size(); ++i)
        index.means.data()[i] = static_cast<double>(r.get_f32());
    r.need(index.fingerprint.size());
    std::copy_n(bytes.data() + r.pos, index.fingerprint.size(), index.fingerprint.begin());
    r.pos += index.fingerprint.size();
    r.expect_end();

    int nonempty = 0;
    for (Eigen::Index j = 0; j < k; ++j)
        if (index.group_sizes[static_cast<size_t>(j)] > 0) {
            ++nonempty;
            if (!index.means.col(j).allFinite())
                throw FormatError("index: non-finite mean for nonempty class " +
                                  std::to_string(j));
        }
    index.degenerate = nonempty <= 1;
    return index;
}

void save_index(const EcinnIndex& index, const std::string& path) {
    binio::write_file(path, index_to_bytes(index), "index");
}

EcinnIndex load_index(const std::string& path) {
    return index_from_bytes(binio::read_file(path, "index"));
}

}  // namespace ecinn
