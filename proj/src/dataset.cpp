#include "ecinn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "binio.hpp"

namespace ecinn {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'D', 'S'};
constexpr uint32_t kVersion = 1;

// Paint random strokes onto a side x side canvas: short random walks with
// drifting direction and jittered intensity. Class-independent by design.
void paint_strokes(Eigen::Ref<Eigen::VectorXf> img, int side, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> stroke_count(3, 6);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 1.0);

    const int strokes = stroke_count(rng);
    for (int s = 0; s < strokes; ++s) {
        double r = unit(rng) * side;
        double c = unit(rng) * side;
        double angle = unit(rng) * 2.0 * M_PI;
        const double base = 0.5 + 0.5 * unit(rng);
        const int steps = side / 2 + static_cast<int>(unit(rng) * side);
        for (int t = 0; t < steps; ++t) {
            const int ri = static_cast<int>(r);
            const int ci = static_cast<int>(c);
            if (ri < 0 || ri >= side || ci < 0 || ci >= side) break;
            const double v = std::clamp(base + 0.05 * jitter(rng), 0.0, 1.0);
            auto& px = img[ri * side + ci];
            px = std::max(px, static_cast<float>(v));
            angle += 0.25 * jitter(rng);  // curvature drift
            r += std::sin(angle);
            c += std::cos(angle);
        }
    }
}

// Uniform labels drawn after all backgrounds exist, then the strip encoding:
// rows 0..k-1 of column 0 cleared, row `label` set to 1.0.
void encode_labels(Dataset& ds, int side, int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> label(0, k - 1);
    ds.labels.resize(static_cast<size_t>(ds.n()));
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const int y = label(rng);
        ds.labels[static_cast<size_t>(i)] = static_cast<uint32_t>(y);
        for (int row = 0; row < k; ++row) ds.samples(row * side, i) = 0.0f;
        ds.samples(y * side, i) = 1.0f;
    }
}

}  // namespace

void Dataset::validate() const {
    if (geom.dim() != dim())
        throw FormatError("dataset: geometry product does not match sample dimension");
    if (labels.size() != static_cast<size_t>(n()))
        throw FormatError("dataset: label count does not match sample count");
    if (k < 1) throw FormatError("dataset: class count must be >= 1");
    for (uint32_t y : labels)
        if (y >= static_cast<uint32_t>(k)) throw FormatError("dataset: label out of range");
    if (!samples.allFinite()) throw FormatError("dataset: non-finite sample entries");
}

Dataset gen_fakemnist(Eigen::Index n, int side, int k, uint64_t seed, Split split) {
    if (side < k) throw ContractViolation("gen_fakemnist: strip needs side >= k");
    if (n < 1) throw ContractViolation("gen_fakemnist: need n >= 1");
    std::mt19937_64 rng(seed);

    Dataset ds;
    ds.samples = Eigen::MatrixXf::Zero(static_cast<Eigen::Index>(side) * side, n);
    ds.geom = {side, side, 1};
    ds.k = k;
    ds.split = split;
    for (Eigen::Index i = 0; i < n; ++i) paint_strokes(ds.samples.col(i), side, rng);
    encode_labels(ds, side, k, rng);
    return ds;
}

Dataset gen_fakemnist_imported(const Eigen::MatrixXf& backgrounds, Eigen::Index n, int side,
                               int k, uint64_t seed, Split split) {
    if (side < k) throw ContractViolation("gen_fakemnist: strip needs side >= k");
    if (n < 1) throw ContractViolation("gen_fakemnist: need n >= 1");
    if (backgrounds.cols() < 1) throw ContractViolation("gen_fakemnist: no backgrounds given");
    require_dim(backgrounds.rows(), static_cast<Eigen::Index>(side) * side,
                "gen_fakemnist backgrounds");
    std::mt19937_64 rng(seed);

    Dataset ds;
    ds.samples.resize(static_cast<Eigen::Index>(side) * side, n);
    ds.geom = {side, side, 1};
    ds.k = k;
    ds.split = split;
    for (Eigen::Index i = 0; i < n; ++i) ds.samples.col(i) = backgrounds.col(i % backgrounds.cols());
    encode_labels(ds, side, k, rng);
    return ds;
}

Dataset gen_blobs(Eigen::Index n, int k, int dim, const Mat& centers, double sigma,
                  uint64_t seed, Split split) {
    if (k < 2) throw ContractViolation("gen_blobs: need k >= 2");
    if (sigma <= 0.0) throw ContractViolation("gen_blobs: need sigma > 0");
    require_dim(centers.rows(), dim, "gen_blobs centers");
    require_dim(centers.cols(), k, "gen_blobs centers");
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b)
            if (centers.col(a) == centers.col(b))
                std::cerr << "warning: gen_blobs centers " << a << " and " << b
                          << " are identical\n";

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Dataset ds;
    ds.samples.resize(dim, n);
    ds.labels.resize(static_cast<size_t>(n));
    ds.geom = {1, dim, 1};
    ds.k = k;
    ds.split = split;

    // Equal counts up to +-1, then shuffled so minibatches mix classes.
    for (Eigen::Index i = 0; i < n; ++i)
        ds.labels[static_cast<size_t>(i)] = static_cast<uint32_t>(i % k);
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto y = static_cast<int>(ds.labels[static_cast<size_t>(i)]);
        for (int d = 0; d < dim; ++d)
            ds.samples(d, i) = static_cast<float>(centers(d, y) + sigma * normal(rng));
    }
    return ds;
}

Mat default_blob_centers(int k, int dim) {
    if (k < 2 || dim < 2) throw ContractViolation("default_blob_centers: need k >= 2, dim >= 2");
    Mat centers = Mat::Zero(dim, k);
    if (k == 2) {
        centers(0, 0) = -2.0;
        centers(0, 1) = 2.0;
    } else {
        for (int y = 0; y < k; ++y) {
            const double theta = 2.0 * M_PI * y / k;
            centers(0, y) = 2.0 * std::cos(theta);
            centers(1, y) = 2.0 * std::sin(theta);
        }
    }
    return centers;
}

std::string dataset_to_bytes(const Dataset& ds) {
    ds.validate();
    binio::Writer w;
    w.put_magic(kMagic);
    w.put_u32(kVersion);
    w.put_u64(static_cast<uint64_t>(ds.n()));
    w.put_u32(static_cast<uint32_t>(ds.dim()));
    w.put_u32(static_cast<uint32_t>(ds.geom.h));
    w.put_u32(static_cast<uint32_t>(ds.geom.w));
    w.put_u32(static_cast<uint32_t>(ds.geom.c));
    w.put_u32(static_cast<uint32_t>(ds.k));
    w.put_u8(static_cast<uint8_t>(ds.split));
    for (Eigen::Index i = 0; i < ds.samples.size(); ++i) w.put_f32(ds.samples.data()[i]);
    for (uint32_t y : ds.labels) w.put_u32(y);
    return std::move(w.bytes);
}

Dataset dataset_from_bytes(std::string_view bytes) {
    binio::Reader r(bytes, "dataset");
    r.expect_magic(kMagic);
    const uint32_t version = r.get_u32();
    if (version != kVersion)
        throw FormatError("dataset: unsupported format version " + std::to_string(version));
    const uint64_t n = r.get_u64();
    const uint32_t d = r.get_u32();
    Dataset ds;
    ds.geom.h = static_cast<int>(r.get_u32());
    ds.geom.w = static_cast<int>(r.get_u32());
    ds.geom.c = static_cast<int>(r.get_u32());
    ds.k = static_cast<int>(r.get_u32());
    const uint8_t split = r.get_u8();
    if (split > 1) throw FormatError("dataset: bad split tag");
    ds.split = static_cast<Split>(split);
    if (static_cast<uint64_t>(ds.geom.dim()) != d)
        throw FormatError("dataset: geometry product does not match sample dimension");
    if (n > (1ULL << 32)) throw FormatError("dataset: implausible sample count");

    ds.samples.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < ds.samples.size(); ++i) ds.samples.data()[i] = r.get_f32();
    ds.labels.resize(n);
    for (auto& y : ds.labels) y = r.get_u32();
    r.expect_end();
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    binio::write_file(path, dataset_to_bytes(ds), "dataset");
}

Dataset load_dataset(const std::string& path) {
    return dataset_from_bytes(binio::read_file(path, "dataset"));
}

Eigen::MatrixXf load_idx_images(const std::string& path, int side) {
    const std::string bytes = binio::read_file(path, "idx");
    binio::Reader r(bytes, "idx");
    // IDX header is big-endian: magic 0x00000803, count, rows, cols.
    auto get_be32 = [&r]() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | r.get_u8();
        return v;
    };
    if (get_be32() != 0x00000803u) throw FormatError("idx: not an unsigned-byte image file");
    const uint32_t count = get_be32();
    const int rows = static_cast<int>(get_be32());
    const int cols = static_cast<int>(get_be32());
    if (rows != cols || side < 1 || rows % side != 0)
        throw FormatError("idx: image size must be square and an integer multiple of side");
    const int f = rows / side;
    r.need(static_cast<size_t>(count) * rows * cols);

    Eigen::MatrixXf out(static_cast<Eigen::Index>(side) * side, count);
    const auto* pix = reinterpret_cast<const uint8_t*>(bytes.data() + r.pos);
    for (uint32_t i = 0; i < count; ++i) {
        const uint8_t* img = pix + static_cast<size_t>(i) * rows * cols;
        for (int orow = 0; orow < side; ++orow)
            for (int ocol = 0; ocol < side; ++ocol) {
                double acc = 0.0;
                for (int dr = 0; dr < f; ++dr)
                    for (int dc = 0; dc < f; ++dc)
                        acc += img[(orow * f + dr) * cols + (ocol * f + dc)];
                out(orow * side + ocol, i) = static_cast<float>(acc / (255.0 * f * f));
            }
    }
    return out;
}

}  // namespace ecinn
