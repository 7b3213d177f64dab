#include "ecinn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "binio.hpp"
#include "ecinn/checkpoint.hpp"
#include "ecinn/counterfactual.hpp"
#include "ecinn/dataset.hpp"
#include "ecinn/image_io.hpp"
#include "ecinn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ecinn {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

MeansConvention parse_convention(const std::string& name) {
    if (name == "split") return MeansConvention::Split;
    if (name == "model") return MeansConvention::Model;
    if (name == "empirical") return MeansConvention::Empirical;
    throw CLI::ValidationError("--convention", "must be split, model, or empirical");
}

std::vector<Milestone> parse_milestones(const std::vector<std::string>& specs) {
    std::vector<Milestone> out;
    for (const std::string& s : specs) {
        const auto colon = s.find(':');
        size_t used = 0;
        Milestone m;
        try {
            m.epoch = std::stoi(s.substr(0, colon));
            if (colon == std::string::npos) throw std::invalid_argument("no multiplier");
            m.multiplier = std::stod(s.substr(colon + 1), &used);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--milestone", "expected EPOCH:MULTIPLIER, got '" + s + "'");
        }
        out.push_back(m);
    }
    return out;
}

// Strip pixels sit at (row 0..k-1, column 0) of a row-major image.
bool has_strip(const Geometry& g, int k) { return g.c == 1 && g.h >= k && g.w >= 2; }

// Flat key=value config file merged beneath the command line: a key fills its
// option only when no explicit flag set it (flags > file > defaults).
void apply_config(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractViolation("config: cannot open " + path);
    sub->allow_config_extras(CLI::config_extras_mode::error);
    sub->parse_from_stream(in);
}

void require_arg(const std::string& value, const char* cmd, const char* flag) {
    if (value.empty())
        throw ContractViolation(std::string(cmd) + ": " + flag +
                                " is required (flag or config file)");
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
    std::string config_path;
    std::string kind;
    std::string out_dir = ".";
    std::string background = "strokes";
    std::string images_path;  // IDX file for imported backgrounds
    int64_t n = 12000;
    int64_t n_test = -1;  // default n/6
    int side = 14;
    int k = 10;
    int dim = 2;
    double sigma = 0.5;
    uint64_t seed = 7;
};

int cmd_gen(const GenArgs& a) {
    require_arg(a.kind, "gen", "--kind");
    const int64_t n_test = a.n_test >= 0 ? a.n_test : a.n / 6;
    fs::create_directories(a.out_dir);
    const std::string train_path = (fs::path(a.out_dir) / (a.kind + "_train.ecds")).string();
    const std::string test_path = (fs::path(a.out_dir) / (a.kind + "_test.ecds")).string();

    Dataset train_ds, test_ds;
    if (a.kind == "fakemnist") {
        if (a.background == "strokes") {
            train_ds = gen_fakemnist(a.n, a.side, a.k, a.seed, Split::Train);
            test_ds = gen_fakemnist(n_test, a.side, a.k, a.seed + 1, Split::Test);
        } else if (a.background == "imported") {
            if (a.images_path.empty())
                throw ContractViolation("gen: --background imported needs --images");
            const Eigen::MatrixXf bg = load_idx_images(a.images_path, a.side);
            train_ds = gen_fakemnist_imported(bg, a.n, a.side, a.k, a.seed, Split::Train);
            test_ds = gen_fakemnist_imported(bg, n_test, a.side, a.k, a.seed + 1, Split::Test);
        } else {
            throw ContractViolation("gen: unknown background '" + a.background + "'");
        }
    } else if (a.kind == "blobs") {
        const Mat centers = default_blob_centers(a.k, a.dim);
        train_ds = gen_blobs(a.n, a.k, a.dim, centers, a.sigma, a.seed, Split::Train);
        test_ds = gen_blobs(n_test, a.k, a.dim, centers, a.sigma, a.seed + 1, Split::Test);
    } else {
        throw ContractViolation("gen: unknown kind '" + a.kind + "'");
    }
    save_dataset(train_ds, train_path);
    save_dataset(test_ds, test_path);
    std::cout << train_path << "\n" << test_path << "\n";
    return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    std::string config_path;
    std::string data_path;
    std::string holdout_path;
    std::string out_path = "model.ecnn";
    std::string report_path = "train_report.csv";
    std::string resume_path;
    std::vector<std::string> milestones;
    TrainConfig cfg;
    int blocks = 8;
    int hidden = 64;
    double clamp = 2.0;
    uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
    require_arg(a.data_path, "train", "--data");
    const Dataset data = load_dataset(a.data_path);
    Dataset holdout;
    const Dataset* holdout_ptr = nullptr;
    if (!a.holdout_path.empty()) {
        holdout = load_dataset(a.holdout_path);
        holdout_ptr = &holdout;
    }

    TrainConfig cfg = a.cfg;
    cfg.rng_seed = a.seed;
    cfg.milestones = parse_milestones(a.milestones);
    if (cfg.checkpoint_every > 0) cfg.checkpoint_path = a.out_path;

    FlowModel model;
    LatentGMM gmm;
    if (!a.resume_path.empty()) {
        Checkpoint ck = load_checkpoint(a.resume_path);
        if (!ck.gmm) throw FormatError("train: resume checkpoint has no GMM block");
        model = std::move(ck.model);
        gmm = std::move(*ck.gmm);
        cfg.start_epoch = static_cast<int>(ck.epochs_completed);
        if (cfg.start_epoch >= cfg.epochs) {
            std::cerr << "train: checkpoint already has " << cfg.start_epoch
                      << " epochs, nothing to do\n";
            binio::write_file(a.report_path, report_csv({}), "report");
            return kExitOk;
        }
    } else {
        model = make_flow(static_cast<int>(data.dim()), a.blocks, a.hidden, a.clamp, a.seed);
        gmm = make_gmm(static_cast<int>(data.dim()), data.k);
    }
    require_dim(data.dim(), model.dim, "train data");

    TrainReport report;
    try {
        report = train(model, gmm, data, cfg, holdout_ptr);
    } catch (const DivergedError& e) {
        std::cerr << e.what() << "\n";
        binio::write_file(a.report_path, report_csv(e.partial), "report");
        return kExitNumeric;
    }
    save_checkpoint(a.out_path, model, &gmm, static_cast<uint32_t>(cfg.epochs));
    binio::write_file(a.report_path, report_csv(report), "report");
    if (!report.epochs.empty()) {
        const EpochStats& last = report.epochs.back();
        std::cout << "epoch " << last.epoch << ": loss " << last.loss << ", bpd " << last.bpd
                  << ", err " << last.err << "\n";
    }
    return kExitOk;
}

// ---- index ------------------------------------------------------------------

struct IndexArgs {
    std::string config_path;
    std::string ckpt_path;
    std::string data_path;
    std::string out_path = "index.ecix";
};

int cmd_index(const IndexArgs& a) {
    require_arg(a.ckpt_path, "index", "--ckpt");
    require_arg(a.data_path, "index", "--data");
    Checkpoint ck = load_checkpoint(a.ckpt_path);
    if (!ck.gmm) throw FormatError("index: checkpoint has no GMM block");
    const Dataset data = load_dataset(a.data_path);
    const EcinnIndex index = build_index(ck.model, *ck.gmm, data);
    if (index.degenerate)
        std::cerr << "warning: degenerate index (fewer than two nonempty groups)\n";
    save_index(index, a.out_path);
    std::cout << a.out_path << "\n";
    return kExitOk;
}

// ---- explain ----------------------------------------------------------------

struct ExplainArgs {
    std::string config_path;
    std::string ckpt_path;
    std::string index_path;
    std::string data_path;
    std::string out_dir = ".";
    std::string convention = "split";
    std::vector<int64_t> ids;
    int target = -1;
    bool all_targets = false;
};

// Images + JSON record + raw tensors for one (input, target) pair.
void emit_result(const CounterfactualResult& r, const Dataset& data, Eigen::Index id,
                 const fs::path& dir, int k) {
    const Geometry g = data.geom;
    const std::string stem = std::to_string(id) + "_q" + std::to_string(r.q);
    const std::string in_png = "input_" + std::to_string(id) + ".pgm";
    const std::string xh0 = "xhat0_" + stem + ".pgm";
    const std::string xh1 = "xhat1_" + stem + ".pgm";
    const std::string h0 = "heat0_" + stem + ".pgm";
    const std::string h1 = "heat1_" + stem + ".pgm";
    export_image(r.x, g, (dir / in_png).string());
    export_image(r.x_hat0, g, (dir / xh0).string());
    export_image(r.x_hat1, g, (dir / xh1).string());
    export_heatmap(r.heat0, g, (dir / h0).string());
    export_heatmap(r.heat1, g, (dir / h1).string());

    // Raw tensors, float32: the heatmap rows are stored exactly and the
    // counterfactual rows reconstructed as x + h in float arithmetic, so the
    // identity also holds inside the file.
    Dataset tensors;
    tensors.samples.resize(data.dim(), 5);
    tensors.samples.col(0) = data.samples.col(id);
    tensors.samples.col(3) = r.heat0.cast<float>();
    tensors.samples.col(4) = r.heat1.cast<float>();
    tensors.samples.col(1) = tensors.samples.col(0) + tensors.samples.col(3);
    tensors.samples.col(2) = tensors.samples.col(0) + tensors.samples.col(4);
    tensors.labels = {static_cast<uint32_t>(r.p), static_cast<uint32_t>(r.pred0),
                      static_cast<uint32_t>(r.pred1), static_cast<uint32_t>(r.q),
                      static_cast<uint32_t>(r.q)};
    tensors.geom = g;
    tensors.k = k;
    tensors.split = data.split;
    const std::string tens = "tensors_" + stem + ".ecds";
    save_dataset(tensors, (dir / tens).string());

    json rec{{"input_index", id},
             {"p", r.p},
             {"q", r.q},
             {"alpha0", r.alpha0},
             {"alpha1", r.alpha1},
             {"pred0", r.pred0},
             {"pred1", r.pred1},
             {"same_class", r.same_class},
             {"forward_passes", r.forward_passes},
             {"inverse_passes", r.inverse_passes},
             {"images",
              {{"input", in_png}, {"xhat0", xh0}, {"xhat1", xh1}, {"heat0", h0}, {"heat1", h1}}},
             {"tensors", tens}};
    binio::write_file((dir / ("record_" + stem + ".json")).string(), rec.dump(2) + "\n",
                      "record");
}

int cmd_explain(const ExplainArgs& a) {
    require_arg(a.ckpt_path, "explain", "--ckpt");
    require_arg(a.index_path, "explain", "--index");
    require_arg(a.data_path, "explain", "--data");
    if (a.ids.empty()) throw ContractViolation("explain: need at least one --id");
    if (!a.all_targets && a.target < 0)
        throw ContractViolation("explain: need --target or --all-targets");
    const MeansConvention conv = parse_convention(a.convention);

    Checkpoint ck = load_checkpoint(a.ckpt_path);
    if (!ck.gmm) throw FormatError("explain: checkpoint has no GMM block");
    const EcinnIndex index = load_index(a.index_path);
    const Dataset data = load_dataset(a.data_path);
    require_dim(data.dim(), ck.model.dim, "explain data");
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);

    for (int64_t id : a.ids) {
        if (id < 0 || id >= data.n())
            throw ContractViolation("explain: input id " + std::to_string(id) + " out of range");
        const Vec x = data.sample(id);
        std::vector<int> targets;
        if (a.all_targets) {
            const int p = classify(ck.model, *ck.gmm, x);
            for (int q = 0; q < ck.gmm->k(); ++q)
                if (q != p) targets.push_back(q);
        } else {
            targets.push_back(a.target);
        }
        for (int q : targets)
            emit_result(explain(ck.model, *ck.gmm, index, x, q, conv), data, id, dir,
                        ck.gmm->k());
    }
    return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string config_path;
    std::string ckpt_path;
    std::string index_path;
    std::string data_path;
    std::string out_path = "metrics.csv";
    std::string convention = "split";
    int64_t samples = 200;
    uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
    require_arg(a.ckpt_path, "eval", "--ckpt");
    require_arg(a.index_path, "eval", "--index");
    require_arg(a.data_path, "eval", "--data");
    const MeansConvention conv = parse_convention(a.convention);
    Checkpoint ck = load_checkpoint(a.ckpt_path);
    if (!ck.gmm) throw FormatError("eval: checkpoint has no GMM block");
    const FlowModel& model = ck.model;
    const LatentGMM& gmm = *ck.gmm;
    const EcinnIndex index = load_index(a.index_path);
    const Dataset data = load_dataset(a.data_path);
    if (data.n() == 0) throw ContractViolation("eval: empty test split");
    require_dim(data.dim(), model.dim, "eval data");

    // Test error and mean BPD over the whole split.
    const Mat x_all = data.samples.cast<double>();
    FlowForward f_all = forward_batch(model, x_all);
    const std::vector<int> pred = nearest_mean_batch(gmm, f_all.z);
    Eigen::Index wrong = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i)
        if (pred[static_cast<size_t>(i)] != static_cast<int>(data.labels[static_cast<size_t>(i)]))
            ++wrong;
    const double err = double(wrong) / double(data.n());
    const Vec log_px = log_px_from_latent_batch(gmm, f_all.z, f_all.logdet);
    const double bpd = -log_px.mean() / (std::log(2.0) * double(model.dim));

    // Counterfactual metrics on a seeded random subset with random targets.
    std::mt19937_64 rng(a.seed);
    const Eigen::Index m = std::min<Eigen::Index>(a.samples, data.n());
    std::vector<Eigen::Index> order(static_cast<size_t>(data.n()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);

    Eigen::Index flips = 0, in_band = 0, localized = 0, used = 0;
    double residual_max = 0.0;
    const bool strip = has_strip(data.geom, data.k);
    const uint64_t fwd0 = model.counters.forward.load();
    const uint64_t inv0 = model.counters.inverse.load();

    std::uniform_int_distribution<int> pick_q(0, gmm.k() - 2);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index id = order[static_cast<size_t>(i)];
        const int p = pred[static_cast<size_t>(id)];
        int q = pick_q(rng);
        if (q >= p) ++q;  // uniform over classes != p
        if (index.group_sizes[static_cast<size_t>(p)] == 0 ||
            index.group_sizes[static_cast<size_t>(q)] == 0)
            continue;  // no usable direction for this pair

        const CounterfactualResult r = explain(model, gmm, index, data.sample(id), q, conv);
        ++used;
        if (r.pred1 == q) ++flips;

        // Boundary residual in latent space with the model-mean hyperplane.
        const Vec z0 = f_all.z.col(id) + r.alpha0 * delta(index, p, q);
        const double dp = (z0 - gmm.means.col(p)).norm();
        const double dq = (z0 - gmm.means.col(q)).norm();
        if (dp + dq > 0) residual_max = std::max(residual_max, std::abs(dp - dq) / (dp + dq));

        // Restricted posterior for q at the re-encoded tipping point.
        auto [z_hat0, ld0] = forward(model, r.x_hat0);
        (void)ld0;
        const Vec post = posterior(gmm, z_hat0);
        const double restricted = post[q] / (post[p] + post[q]);
        if (restricted >= 0.45 && restricted <= 0.55) ++in_band;

        if (strip) {
            double on = 0, off = 0;
            for (Eigen::Index j = 0; j < r.heat1.size(); ++j) {
                const bool on_strip = (j % data.geom.w == 0) && (j / data.geom.w < data.k);
                (on_strip ? on : off) += std::abs(r.heat1[j]);
            }
            on /= double(data.k);
            off /= double(r.heat1.size() - data.k);
            const bool lit = r.x_hat1[static_cast<Eigen::Index>(q) * data.geom.w] > 0.5;
            if (lit && off > 0 && on >= 5.0 * off) ++localized;
        }
    }
    const uint64_t fwd_used = model.counters.forward.load() - fwd0;
    const uint64_t inv_used = model.counters.inverse.load() - inv0;

    std::ostringstream csv;
    csv << "metric,value\n" << std::setprecision(17);
    csv << "eval_csv_version,1\n";
    csv << "n_test," << data.n() << "\n";
    csv << "err," << err << "\n";
    csv << "bpd," << bpd << "\n";
    csv << "n_explain," << used << "\n";
    if (used > 0) {
        csv << "flip_rate," << double(flips) / double(used) << "\n";
        csv << "posterior_band_rate," << double(in_band) / double(used) << "\n";
        csv << "boundary_residual_max," << residual_max << "\n";
        if (strip) csv << "strip_flip_rate," << double(localized) / double(used) << "\n";
        // eval itself re-encodes each counterfactual once; explain's own cost
        // stays visible after subtracting that extra forward pass
        csv << "explain_forward_passes," << (fwd_used - static_cast<uint64_t>(used)) << "\n";
        csv << "explain_inverse_passes," << inv_used << "\n";
    }
    binio::write_file(a.out_path, csv.str(), "metrics");
    std::cout << csv.str();
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Invertible-network classifier with closed-form latent counterfactuals"};
    app.require_subcommand(1);

    GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen", "Generate synthetic train/test datasets");
    gen->add_option("--config", gen_args.config_path, "Flat key=value config file (flags win)");
    gen->add_option("--kind", gen_args.kind, "fakemnist or blobs");
    gen->add_option("--out", gen_args.out_dir, "Output directory");
    gen->add_option("--n", gen_args.n, "Training sample count")->check(CLI::PositiveNumber);
    gen->add_option("--n-test", gen_args.n_test, "Test sample count (default n/6)");
    gen->add_option("--side", gen_args.side, "Image side length (fakemnist)");
    gen->add_option("--k", gen_args.k, "Class count");
    gen->add_option("--dim", gen_args.dim, "Dimension (blobs)");
    gen->add_option("--sigma", gen_args.sigma, "Cluster spread (blobs)");
    gen->add_option("--background", gen_args.background, "strokes or imported (fakemnist)");
    gen->add_option("--images", gen_args.images_path, "IDX image file for imported backgrounds");
    gen->add_option("--seed", gen_args.seed, "RNG seed");

    TrainArgs train_args;
    CLI::App* tr = app.add_subcommand("train", "Train a model on an ECDS dataset");
    tr->add_option("--config", train_args.config_path, "Flat key=value config file (flags win)");
    tr->add_option("--data", train_args.data_path, "Training ECDS file");
    tr->add_option("--holdout", train_args.holdout_path, "Held-out ECDS file for the err column");
    tr->add_option("--out", train_args.out_path, "Checkpoint output path");
    tr->add_option("--report", train_args.report_path, "Per-epoch CSV output path");
    tr->add_option("--resume", train_args.resume_path, "Checkpoint to continue from");
    tr->add_option("--epochs", train_args.cfg.epochs, "Total epochs")->check(CLI::NonNegativeNumber);
    tr->add_option("--batch", train_args.cfg.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
    tr->add_option("--lr", train_args.cfg.lr, "Learning rate");
    tr->add_option("--beta", train_args.cfg.beta, "Classification weight beta");
    tr->add_option("--noise-sigma", train_args.cfg.noise_sigma, "Dequantization noise sigma");
    tr->add_option("--clip", train_args.cfg.clip_norm, "Gradient clip (global norm)");
    tr->add_option("--milestone", train_args.milestones,
                   "Learning-rate milestone EPOCH:MULTIPLIER (repeatable)");
    tr->add_option("--ckpt-every", train_args.cfg.checkpoint_every,
                   "Write the checkpoint every N epochs");
    tr->add_option("--blocks", train_args.blocks, "Coupling blocks")->check(CLI::PositiveNumber);
    tr->add_option("--hidden", train_args.hidden, "Subnet hidden width")->check(CLI::PositiveNumber);
    tr->add_option("--clamp", train_args.clamp, "Coupling scale clamp");
    tr->add_option("--seed", train_args.seed, "RNG seed (init and training)");

    IndexArgs index_args;
    CLI::App* ix = app.add_subcommand("index", "Build the empirical class-mean index");
    ix->add_option("--config", index_args.config_path, "Flat key=value config file (flags win)");
    ix->add_option("--ckpt", index_args.ckpt_path, "Model checkpoint");
    ix->add_option("--data", index_args.data_path, "Dataset to group (training split)");
    ix->add_option("--out", index_args.out_path, "Index output path");

    ExplainArgs explain_args;
    CLI::App* ex = app.add_subcommand("explain", "Generate counterfactuals and heatmaps");
    ex->add_option("--config", explain_args.config_path, "Flat key=value config file (flags win)");
    ex->add_option("--ckpt", explain_args.ckpt_path, "Model checkpoint");
    ex->add_option("--index", explain_args.index_path, "Class-mean index");
    ex->add_option("--data", explain_args.data_path, "ECDS file holding the inputs");
    ex->add_option("--id", explain_args.ids, "Input indices (repeatable or comma-separated)")
        ->delimiter(',');
    ex->add_option("--target", explain_args.target, "Target class q");
    ex->add_flag("--all-targets", explain_args.all_targets, "One result per q != p");
    ex->add_option("--outdir", explain_args.out_dir, "Output directory");
    ex->add_option("--convention", explain_args.convention,
                   "Means convention: split, model, or empirical");

    EvalArgs eval_args;
    CLI::App* ev = app.add_subcommand("eval", "Aggregate metrics on a test split");
    ev->add_option("--config", eval_args.config_path, "Flat key=value config file (flags win)");
    ev->add_option("--ckpt", eval_args.ckpt_path, "Model checkpoint");
    ev->add_option("--index", eval_args.index_path, "Class-mean index");
    ev->add_option("--data", eval_args.data_path, "Test ECDS file");
    ev->add_option("--out", eval_args.out_path, "Metrics CSV output path");
    ev->add_option("--samples", eval_args.samples, "Counterfactual sample cap")
        ->check(CLI::PositiveNumber);
    ev->add_option("--seed", eval_args.seed, "Subset/target selection seed");
    ev->add_option("--convention", eval_args.convention,
                   "Means convention: split, model, or empirical");

    try {
        app.parse(argc, argv);
        if (gen->parsed() && !gen_args.config_path.empty()) apply_config(gen, gen_args.config_path);
        if (tr->parsed() && !train_args.config_path.empty()) apply_config(tr, train_args.config_path);
        if (ix->parsed() && !index_args.config_path.empty()) apply_config(ix, index_args.config_path);
        if (ex->parsed() && !explain_args.config_path.empty())
            apply_config(ex, explain_args.config_path);
        if (ev->parsed() && !eval_args.config_path.empty()) apply_config(ev, eval_args.config_path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_args);
        if (tr->parsed()) return cmd_train(train_args);
        if (ix->parsed()) return cmd_index(index_args);
        if (ex->parsed()) return cmd_explain(explain_args);
        if (ev->parsed()) return cmd_eval(eval_args);
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;  // unreachable: a subcommand is required
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("ecinn");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ecinn
