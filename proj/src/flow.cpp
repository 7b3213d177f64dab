#include "ecinn/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ecinn {

namespace {

// Gather/scatter rows by index list.
Mat take_rows(const Mat& m, const std::vector<int>& idx) {
    Mat out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
}

void put_rows(Mat& m, const std::vector<int>& idx, const Mat& rows) {
    for (size_t i = 0; i < idx.size(); ++i) m.row(idx[i]) = rows.row(static_cast<Eigen::Index>(i));
}

struct CouplingEval {
    Mat hidden_pre;  // w1*xp + b1
    Mat s_raw;       // raw scale logits
    Mat t;           // translation
    Mat log_scale;   // clamp*tanh(s_raw/clamp)
};

CouplingEval eval_subnet(const CouplingLayer& c, const Mat& xp) {
    CouplingEval e;
    e.hidden_pre = (c.w1 * xp).colwise() + c.b1;
    Mat h = e.hidden_pre.cwiseMax(0.0);
    Mat out = (c.w2 * h).colwise() + c.b2;
    const Eigen::Index a = c.active_count();
    e.s_raw = out.topRows(a);
    e.t = out.bottomRows(a);
    e.log_scale = (c.clamp * (e.s_raw / c.clamp).array().tanh()).matrix();
    return e;
}

}  // namespace

CouplingLayer::CouplingLayer(std::vector<uint8_t> mask_in, int hidden, double clamp_in)
    : mask(std::move(mask_in)), clamp(clamp_in) {
    const int d = static_cast<int>(mask.size());
    for (int i = 0; i < d; ++i) (mask[i] ? active_idx : passive_idx).push_back(i);
    const int a = active_count();
    const int p = passive_count();
    if (a < 1 || a > d - 1)
        throw ContractViolation("coupling mask must have between 1 and D-1 active entries");
    if (clamp <= 0.0) throw ContractViolation("coupling scale clamp must be positive");
    w1 = Mat::Zero(hidden, p);
    b1 = Vec::Zero(hidden);
    w2 = Mat::Zero(2 * a, hidden);
    b2 = Vec::Zero(2 * a);
}

PermutationLayer::PermutationLayer(std::vector<int> perm_in) : perm(std::move(perm_in)) {
    const int d = static_cast<int>(perm.size());
    inv_perm.assign(d, -1);
    for (int i = 0; i < d; ++i) {
        if (perm[i] < 0 || perm[i] >= d || inv_perm[perm[i]] != -1)
            throw ContractViolation("permutation is not a bijection of {0..D-1}");
        inv_perm[perm[i]] = i;
    }
}

FlowForward forward_batch(const FlowModel& model, const Mat& x, ForwardCache* cache) {
    require_dim(x.rows(), model.dim, "forward");
    require_finite(x, "forward input");
    const Eigen::Index n = x.cols();

    if (cache) {
        cache->valid = false;
        cache->n = n;
        cache->layers.assign(model.layers.size(), LayerCache{});
    }

    Mat cur = x;
    Vec logdet = Vec::Zero(n);
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const Layer& layer = model.layers[li];
        if (const auto* an = std::get_if<ActNormLayer>(&layer)) {
            if (cache) cache->layers[li].x = cur;
            const auto scale = an->log_scale.array().exp();
            cur = ((cur.array().colwise() * scale).colwise() + an->bias.array()).matrix();
            logdet.array() += an->log_scale.sum();
        } else if (const auto* cp = std::get_if<CouplingLayer>(&layer)) {
            Mat xp = take_rows(cur, cp->passive_idx);
            Mat xa = take_rows(cur, cp->active_idx);
            CouplingEval e = eval_subnet(*cp, xp);
            if (cache) {
                cache->layers[li].x = cur;
                cache->layers[li].hidden = e.hidden_pre;
                cache->layers[li].s_raw = e.s_raw;
            }
            Mat ya = (xa.array() * e.log_scale.array().exp() + e.t.array()).matrix();
            put_rows(cur, cp->active_idx, ya);
            logdet += e.log_scale.colwise().sum().transpose();
        } else {
            const auto& pm = std::get<PermutationLayer>(layer);
            Mat out(cur.rows(), n);
            for (int i = 0; i < pm.dim(); ++i) out.row(i) = cur.row(pm.perm[i]);
            cur = std::move(out);
        }
    }
    if (cache) cache->valid = true;
    model.counters.forward.fetch_add(static_cast<uint64_t>(n), std::memory_order_relaxed);
    return {std::move(cur), std::move(logdet)};
}

Mat inverse_batch(const FlowModel& model, const Mat& z) {
    require_dim(z.rows(), model.dim, "inverse");
    require_finite(z, "inverse input");
    const Eigen::Index n = z.cols();

    Mat cur = z;
    for (size_t ri = 0; ri < model.layers.size(); ++ri) {
        const size_t li = model.layers.size() - 1 - ri;
        const Layer& layer = model.layers[li];
        if (const auto* an = std::get_if<ActNormLayer>(&layer)) {
            const auto inv_scale = (-an->log_scale.array()).exp();
            cur = ((cur.colwise() - an->bias).array().colwise() * inv_scale).matrix();
        } else if (const auto* cp = std::get_if<CouplingLayer>(&layer)) {
            Mat yp = take_rows(cur, cp->passive_idx);
            Mat ya = take_rows(cur, cp->active_idx);
            CouplingEval e = eval_subnet(*cp, yp);
            Mat xa = ((ya - e.t).array() * (-e.log_scale.array()).exp()).matrix();
            put_rows(cur, cp->active_idx, xa);
        } else {
            const auto& pm = std::get<PermutationLayer>(layer);
            Mat out(cur.rows(), n);
            for (int i = 0; i < pm.dim(); ++i) out.row(pm.perm[i]) = cur.row(i);
            cur = std::move(out);
        }
        if (!cur.allFinite())
            throw NumericError("inverse: non-finite intermediate at layer " + std::to_string(li));
    }
    model.counters.inverse.fetch_add(static_cast<uint64_t>(n), std::memory_order_relaxed);
    return cur;
}

std::pair<Vec, double> forward(const FlowModel& model, const Vec& x) {
    FlowForward r = forward_batch(model, x);
    return {r.z.col(0), r.logdet[0]};
}

std::pair<Vec, double> forward(const FlowModel& model, const Vec& x, ForwardCache& cache) {
    FlowForward r = forward_batch(model, x, &cache);
    return {r.z.col(0), r.logdet[0]};
}

Vec inverse(const FlowModel& model, const Vec& z) {
    return inverse_batch(model, z).col(0);
}

Mat backward_batch(const FlowModel& model, const ForwardCache& cache, const Mat& grad_z,
                   const Vec& grad_logdet, Eigen::Ref<Vec> param_grads) {
    if (!cache.valid || cache.layers.size() != model.layers.size())
        throw StateError("backward: no cached forward pass for this model");
    require_dim(grad_z.rows(), model.dim, "backward");
    if (grad_z.cols() != cache.n || grad_logdet.size() != cache.n)
        throw ContractViolation("backward: gradient batch size does not match cached forward");

    const ParamLayout layout = param_layout(model);
    if (param_grads.size() != layout.total)
        throw ContractViolation("backward: param_grads has wrong size");

    Mat g = grad_z;
    Eigen::Index off = layout.total;
    for (size_t ri = 0; ri < model.layers.size(); ++ri) {
        const size_t li = model.layers.size() - 1 - ri;
        const Layer& layer = model.layers[li];
        const LayerCache& lc = cache.layers[li];
        if (const auto* an = std::get_if<ActNormLayer>(&layer)) {
            const Eigen::Index d = an->dim();
            off -= 2 * d;
            const auto scale = an->log_scale.array().exp();
            // each dimension's log_scale feeds every sample's logdet
            Vec d_ls = ((g.array() * lc.x.array()).colwise() * scale).rowwise().sum().matrix();
            d_ls.array() += grad_logdet.sum();
            Vec d_b = g.rowwise().sum();
            param_grads.segment(off, d) += d_ls;
            param_grads.segment(off + d, d) += d_b;
            g = (g.array().colwise() * scale).matrix();
        } else if (const auto* cp = std::get_if<CouplingLayer>(&layer)) {
            const Eigen::Index a = cp->active_count();
            const Eigen::Index p = cp->passive_count();
            const Eigen::Index h = cp->hidden();
            off -= h * p + h + 2 * a * h + 2 * a;

            Mat xp = take_rows(lc.x, cp->passive_idx);
            Mat xa = take_rows(lc.x, cp->active_idx);
            Mat ga = take_rows(g, cp->active_idx);

            Mat tanh_sc = (lc.s_raw / cp->clamp).array().tanh().matrix();
            Mat e = (cp->clamp * tanh_sc.array()).exp().matrix();
            Mat gxa = (ga.array() * e.array()).matrix();

            // y_a = x_a*e^sig + t with sig = clamp*tanh(s/clamp); logdet gets sum(sig)
            Mat d_sig = (ga.array() * xa.array() * e.array()).matrix();
            d_sig.array().rowwise() += grad_logdet.transpose().array();
            Mat d_s_raw = (d_sig.array() * (1.0 - tanh_sc.array().square())).matrix();

            Mat d_out(2 * a, cache.n);
            d_out.topRows(a) = d_s_raw;
            d_out.bottomRows(a) = ga;  // dL/dt

            Mat hid = lc.hidden.cwiseMax(0.0);
            Mat d_w2 = d_out * hid.transpose();
            Vec d_b2 = d_out.rowwise().sum();
            Mat d_hid = cp->w2.transpose() * d_out;
            Mat relu_mask = (lc.hidden.array() > 0.0).cast<double>().matrix();
            Mat d_pre = (d_hid.array() * relu_mask.array()).matrix();
            Mat d_w1 = d_pre * xp.transpose();
            Vec d_b1 = d_pre.rowwise().sum();
            Mat d_xp = cp->w1.transpose() * d_pre;

            Eigen::Index o = off;
            param_grads.segment(o, h * p) += Eigen::Map<Vec>(d_w1.data(), h * p);
            o += h * p;
            param_grads.segment(o, h) += d_b1;
            o += h;
            param_grads.segment(o, 2 * a * h) += Eigen::Map<Vec>(d_w2.data(), 2 * a * h);
            o += 2 * a * h;
            param_grads.segment(o, 2 * a) += d_b2;

            Mat gx = Mat::Zero(g.rows(), g.cols());
            put_rows(gx, cp->active_idx, gxa);
            Mat gp = take_rows(g, cp->passive_idx) + d_xp;
            put_rows(gx, cp->passive_idx, gp);
            g = std::move(gx);
        } else {
            const auto& pm = std::get<PermutationLayer>(layer);
            Mat gx(g.rows(), g.cols());
            for (int i = 0; i < pm.dim(); ++i) gx.row(pm.perm[i]) = g.row(i);
            g = std::move(gx);
        }
    }
    return g;
}

Vec backward(const FlowModel& model, const ForwardCache& cache, const Vec& grad_z,
             double grad_logdet, Eigen::Ref<Vec> param_grads) {
    Vec gld(1);
    gld[0] = grad_logdet;
    return backward_batch(model, cache, grad_z, gld, param_grads).col(0);
}

ParamLayout param_layout(const FlowModel& model) {
    ParamLayout layout;
    Eigen::Index off = 0;
    auto add = [&](const std::string& name, Eigen::Index size) {
        layout.tensors.push_back({name, off, size});
        off += size;
    };
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const std::string prefix = "layer" + std::to_string(li) + ".";
        if (const auto* an = std::get_if<ActNormLayer>(&model.layers[li])) {
            add(prefix + "actnorm.log_scale", an->dim());
            add(prefix + "actnorm.bias", an->dim());
        } else if (const auto* cp = std::get_if<CouplingLayer>(&model.layers[li])) {
            add(prefix + "coupling.w1", cp->w1.size());
            add(prefix + "coupling.b1", cp->b1.size());
            add(prefix + "coupling.w2", cp->w2.size());
            add(prefix + "coupling.b2", cp->b2.size());
        }
    }
    layout.total = off;
    return layout;
}

Vec gather_params(const FlowModel& model) {
    const ParamLayout layout = param_layout(model);
    Vec flat(layout.total);
    Eigen::Index off = 0;
    for (const Layer& layer : model.layers) {
        if (const auto* an = std::get_if<ActNormLayer>(&layer)) {
            flat.segment(off, an->dim()) = an->log_scale;
            off += an->dim();
            flat.segment(off, an->dim()) = an->bias;
            off += an->dim();
        } else if (const auto* cp = std::get_if<CouplingLayer>(&layer)) {
            flat.segment(off, cp->w1.size()) = Eigen::Map<const Vec>(cp->w1.data(), cp->w1.size());
            off += cp->w1.size();
            flat.segment(off, cp->b1.size()) = cp->b1;
            off += cp->b1.size();
            flat.segment(off, cp->w2.size()) = Eigen::Map<const Vec>(cp->w2.data(), cp->w2.size());
            off += cp->w2.size();
            flat.segment(off, cp->b2.size()) = cp->b2;
            off += cp->b2.size();
        }
    }
    return flat;
}

void scatter_params(FlowModel& model, const Eigen::Ref<const Vec>& flat) {
    const ParamLayout layout = param_layout(model);
    require_dim(flat.size(), layout.total, "scatter_params");
    Eigen::Index off = 0;
    for (Layer& layer : model.layers) {
        if (auto* an = std::get_if<ActNormLayer>(&layer)) {
            an->log_scale = flat.segment(off, an->dim());
            off += an->dim();
            an->bias = flat.segment(off, an->dim());
            off += an->dim();
        } else if (auto* cp = std::get_if<CouplingLayer>(&layer)) {
            Eigen::Map<Vec>(cp->w1.data(), cp->w1.size()) = flat.segment(off, cp->w1.size());
            off += cp->w1.size();
            cp->b1 = flat.segment(off, cp->b1.size());
            off += cp->b1.size();
            Eigen::Map<Vec>(cp->w2.data(), cp->w2.size()) = flat.segment(off, cp->w2.size());
            off += cp->w2.size();
            cp->b2 = flat.segment(off, cp->b2.size());
            off += cp->b2.size();
        }
    }
}

std::vector<uint8_t> make_mask(int dim, MaskKind kind) {
    std::vector<uint8_t> mask(dim, 0);
    switch (kind) {
        case MaskKind::CheckerEven:
            for (int i = 0; i < dim; i += 2) mask[i] = 1;
            break;
        case MaskKind::CheckerOdd:
            for (int i = 1; i < dim; i += 2) mask[i] = 1;
            break;
        case MaskKind::HalfFirst:
            for (int i = 0; i < dim / 2; ++i) mask[i] = 1;
            break;
        case MaskKind::HalfSecond:
            for (int i = dim / 2; i < dim; ++i) mask[i] = 1;
            break;
    }
    // keep 1..D-1 active entries for tiny dims
    if (std::count(mask.begin(), mask.end(), uint8_t{1}) == dim) mask.back() = 0;
    if (std::count(mask.begin(), mask.end(), uint8_t{1}) == 0) mask.front() = 1;
    return mask;
}

FlowModel make_flow(int dim, int blocks, int hidden, double clamp, uint64_t seed) {
    if (dim < 2) throw ContractViolation("make_flow: dim must be >= 2");
    if (blocks < 1 || hidden < 1) throw ContractViolation("make_flow: blocks and hidden must be >= 1");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    FlowModel model;
    model.dim = dim;
    const MaskKind cycle[4] = {MaskKind::CheckerEven, MaskKind::HalfFirst, MaskKind::CheckerOdd,
                               MaskKind::HalfSecond};
    for (int b = 0; b < blocks; ++b) {
        model.layers.emplace_back(ActNormLayer(dim));

        CouplingLayer c(make_mask(dim, cycle[b % 4]), hidden, clamp);
        const double std1 = std::sqrt(2.0 / static_cast<double>(c.passive_count()));
        for (Eigen::Index i = 0; i < c.w1.size(); ++i)
            c.w1.data()[i] = quantize_f32(std1 * normal(rng));
        // w2, b2 stay zero: the stack starts as the identity
        model.layers.emplace_back(std::move(c));

        std::vector<int> perm(dim);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        model.layers.emplace_back(PermutationLayer(std::move(perm)));
    }
    return model;
}

void init_actnorm(FlowModel& model, const Mat& batch) {
    require_dim(batch.rows(), model.dim, "init_actnorm");
    if (batch.cols() < 2) throw ContractViolation("init_actnorm: need at least 2 samples");
    const double n = static_cast<double>(batch.cols());

    Mat cur = batch;
    for (Layer& layer : model.layers) {
        if (auto* an = std::get_if<ActNormLayer>(&layer)) {
            if (!an->initialized) {
                Vec mean = cur.rowwise().mean();
                Vec var = ((cur.colwise() - mean).array().square().rowwise().sum() / n).matrix();
                an->log_scale = (-0.5 * (var.array() + 1e-12).log()).matrix();
                quantize_f32(an->log_scale);
                an->bias = (-mean.array() * an->log_scale.array().exp()).matrix();
                quantize_f32(an->bias);
                an->initialized = true;
            }
            const auto scale = an->log_scale.array().exp();
            cur = ((cur.array().colwise() * scale).colwise() + an->bias.array()).matrix();
        } else if (const auto* cp = std::get_if<CouplingLayer>(&layer)) {
            Mat xp = take_rows(cur, cp->passive_idx);
            Mat xa = take_rows(cur, cp->active_idx);
            CouplingEval e = eval_subnet(*cp, xp);
            Mat ya = (xa.array() * e.log_scale.array().exp() + e.t.array()).matrix();
            put_rows(cur, cp->active_idx, ya);
        } else {
            const auto& pm = std::get<PermutationLayer>(layer);
            Mat out(cur.rows(), cur.cols());
            for (int i = 0; i < pm.dim(); ++i) out.row(i) = cur.row(pm.perm[i]);
            cur = std::move(out);
        }
    }
}

bool actnorm_initialized(const FlowModel& model) {
    for (const Layer& layer : model.layers)
        if (const auto* an = std::get_if<ActNormLayer>(&layer))
            if (!an->initialized) return false;
    return true;
}

}  // namespace ecinn
