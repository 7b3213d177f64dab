#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ecinn/common.hpp"

namespace ecinn {

// Synthetic data generation and the "ECDS" binary tensor format shared across
// the repo. Datasets are immutable after construction and safe to share.

enum class Split : uint8_t { Train = 0, Test = 1 };

struct Dataset {
    // One column per sample (float32 storage, matching the file format).
    Eigen::MatrixXf samples;  // D x N
    std::vector<uint32_t> labels;
    Geometry geom;
    int k = 0;  // class count
    Split split = Split::Train;

    Eigen::Index n() const { return samples.cols(); }
    Eigen::Index dim() const { return samples.rows(); }

    // Column i as a double vector / column range as a double batch.
    Vec sample(Eigen::Index i) const { return samples.col(i).cast<double>(); }
    Mat batch(Eigen::Index begin, Eigen::Index count) const {
        return samples.middleCols(begin, count).cast<double>();
    }

    void validate() const;  // labels in range, geometry product = D, entries finite
};

// Label-in-a-strip dataset: class-independent backgrounds (random strokes by
// default), labels drawn uniformly afterwards, then the strip pixel at
// (row = label, column 0) is set to 1.0 and the other k-1 strip pixels to 0.0.
Dataset gen_fakemnist(Eigen::Index n, int side, int k, uint64_t seed, Split split = Split::Train);

// Same construction but with imported backgrounds (columns of `backgrounds`,
// already side*side long), cycled in order. Labels are still drawn uniformly,
// independent of the background content.
Dataset gen_fakemnist_imported(const Eigen::MatrixXf& backgrounds, Eigen::Index n, int side,
                               int k, uint64_t seed, Split split = Split::Train);

// Isotropic Gaussian clusters around `centers` (dim x k), equal class counts
// up to +-1, label order shuffled. Duplicate centers only warn on stderr.
Dataset gen_blobs(Eigen::Index n, int k, int dim, const Mat& centers, double sigma,
                  uint64_t seed, Split split = Split::Train);

// k=2: (-2,0...), (2,0...); k>2: evenly spaced on a radius-2 circle in the
// first two coordinates.
Mat default_blob_centers(int k, int dim);

// ECDS format: magic "ECDS", u32 version, u64 n, u32 d/h/w/c/k, u8 split,
// float32 samples (sample-major), u32 labels. Little-endian, bit-exact
// round-trip.
std::string dataset_to_bytes(const Dataset& ds);
Dataset dataset_from_bytes(std::string_view bytes);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// IDX image loader (the common 28x28 digit file layout), downsampled to
// `side` by integer-factor average pooling; pixel values scaled to [0,1].
Eigen::MatrixXf load_idx_images(const std::string& path, int side);

}  // namespace ecinn
