#include "ecinn/checkpoint.hpp"

#include "binio.hpp"

namespace ecinn {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'N', 'N'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kTagActNorm = 1;
constexpr uint8_t kTagCoupling = 2;
constexpr uint8_t kTagPermutation = 3;
constexpr uint8_t kTagGmm = 4;
constexpr uint8_t kTagTrainer = 5;

void put_vec(binio::Writer& w, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) w.put_f32(static_cast<float>(v[i]));
}

void put_mat(binio::Writer& w, const Mat& m) {  // column-major coefficient order
    for (Eigen::Index i = 0; i < m.size(); ++i) w.put_f32(static_cast<float>(m.data()[i]));
}

Vec get_vec(binio::Reader& r, Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = static_cast<double>(r.get_f32());
    return v;
}

void get_mat(binio::Reader& r, Mat& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<double>(r.get_f32());
}

}  // namespace

std::string checkpoint_to_bytes(const FlowModel& model, const LatentGMM* gmm,
                                uint32_t epochs_completed) {
    binio::Writer w;
    w.put_magic(kMagic);
    w.put_u32(kVersion);
    w.put_u32(static_cast<uint32_t>(model.dim));
    w.put_u32(static_cast<uint32_t>(model.layers.size()));
    for (const Layer& layer : model.layers) {
        if (const auto* an = std::get_if<ActNormLayer>(&layer)) {
            w.put_u8(kTagActNorm);
            w.put_u8(an->initialized ? 1 : 0);
            put_vec(w, an->log_scale);
            put_vec(w, an->bias);
        } else if (const auto* cp = std::get_if<CouplingLayer>(&layer)) {
            w.put_u8(kTagCoupling);
            w.put_u32(static_cast<uint32_t>(cp->hidden()));
            w.put_f32(static_cast<float>(cp->clamp));
            for (uint8_t m : cp->mask) w.put_u8(m);
            put_mat(w, cp->w1);
            put_vec(w, cp->b1);
            put_mat(w, cp->w2);
            put_vec(w, cp->b2);
        } else {
            const auto& pm = std::get<PermutationLayer>(layer);
            w.put_u8(kTagPermutation);
            for (int p : pm.perm) w.put_u32(static_cast<uint32_t>(p));
        }
    }
    if (gmm) {
        w.put_u8(kTagGmm);
        w.put_u32(static_cast<uint32_t>(gmm->k()));
        put_mat(w, gmm->means);
    }
    w.put_u8(kTagTrainer);
    w.put_u32(epochs_completed);
    return std::move(w.bytes);
}

Checkpoint checkpoint_from_bytes(std::string_view bytes) {
    binio::Reader r(bytes, "checkpoint");
    r.expect_magic(kMagic);
    const uint32_t version = r.get_u32();
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
    const auto dim = static_cast<Eigen::Index>(r.get_u32());
    if (dim < 1 || dim > (1 << 24)) throw FormatError("checkpoint: implausible dimension");
    const uint32_t layer_count = r.get_u32();

    Checkpoint ck;
    ck.model.dim = static_cast<int>(dim);
    ck.model.layers.reserve(layer_count);
    for (uint32_t li = 0; li < layer_count; ++li) {
        const uint8_t tag = r.get_u8();
        if (tag == kTagActNorm) {
            ActNormLayer an(static_cast<int>(dim));
            an.initialized = r.get_u8() != 0;
            an.log_scale = get_vec(r, dim);
            an.bias = get_vec(r, dim);
            ck.model.layers.emplace_back(std::move(an));
        } else if (tag == kTagCoupling) {
            const auto hidden = static_cast<int>(r.get_u32());
            if (hidden < 1 || hidden > (1 << 20)) throw FormatError("checkpoint: implausible hidden width");
            const double clamp = static_cast<double>(r.get_f32());
            std::vector<uint8_t> mask(static_cast<size_t>(dim));
            for (auto& m : mask) {
                m = r.get_u8();
                if (m > 1) throw FormatError("checkpoint: coupling mask entries must be 0/1");
            }
            CouplingLayer cp(std::move(mask), hidden, clamp);  // validates mask balance
            get_mat(r, cp.w1);
            cp.b1 = get_vec(r, cp.b1.size());
            get_mat(r, cp.w2);
            cp.b2 = get_vec(r, cp.b2.size());
            ck.model.layers.emplace_back(std::move(cp));
        } else if (tag == kTagPermutation) {
            std::vector<int> perm(static_cast<size_t>(dim));
            for (auto& p : perm) {
                const uint32_t v = r.get_u32();
                if (v >= static_cast<uint32_t>(dim))
                    throw FormatError("checkpoint: permutation entry out of range");
                p = static_cast<int>(v);
            }
            ck.model.layers.emplace_back(PermutationLayer(std::move(perm)));  // validates bijection
        } else {
            throw FormatError("checkpoint: unknown layer tag " + std::to_string(tag));
        }
    }
    while (!r.at_end()) {
        const uint8_t tag = r.get_u8();
        if (tag == kTagGmm) {
            if (ck.gmm) throw FormatError("checkpoint: duplicate GMM block");
            const auto k = static_cast<Eigen::Index>(r.get_u32());
            if (k < 1 || k > (1 << 20)) throw FormatError("checkpoint: implausible class count");
            LatentGMM gmm;
            gmm.means = Mat(dim, k);
            get_mat(r, gmm.means);
            ck.gmm = std::move(gmm);
        } else if (tag == kTagTrainer) {
            ck.epochs_completed = r.get_u32();
        } else {
            throw FormatError("checkpoint: unknown block tag " + std::to_string(tag));
        }
    }
    return ck;
}

void save_checkpoint(const std::string& path, const FlowModel& model, const LatentGMM* gmm,
                     uint32_t epochs_completed) {
    binio::write_file(path, checkpoint_to_bytes(model, gmm, epochs_completed), "checkpoint");
}

Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_bytes(binio::read_file(path, "checkpoint"));
}

}  // namespace ecinn
