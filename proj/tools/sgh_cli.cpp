// Copyright 2026-present the sgh authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// sgh: train, encode, search and evaluate binary hash codes from the shell.
//
// Exit codes: 0 ok, 2 bad input or flags, 3 malformed file, 4 numeric abort
// (training divergence or a failed gradient check).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgh/sgh.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumeric = 4;

struct SynthFlags {
    std::size_t n = 10000;
    std::size_t d = 32;
    std::size_t clusters = 10;
    double spread = 1.0;
};

struct DataFlags {
    std::string path;
    std::string format = "fvecs";
    SynthFlags synth;
};

const std::vector<std::string> kFormats = {"fvecs", "bvecs", "idx", "synth"};

void add_data_flags(CLI::App* cmd, DataFlags& flags, const std::string& name = "--data", bool allow_synth = false) {
    cmd->add_option(name, flags.path, "input vectors");
    auto formats = kFormats;
    if (!allow_synth) formats.pop_back();
    cmd->add_option("--format", flags.format, "fvecs | bvecs | idx" + std::string(allow_synth ? " | synth" : ""))
        ->check(CLI::IsMember(formats));
    if (allow_synth) {
        cmd->add_option("--synth-n", flags.synth.n, "points generated when --format synth");
        cmd->add_option("--synth-d", flags.synth.d, "dimension generated when --format synth");
        cmd->add_option("--synth-clusters", flags.synth.clusters, "mixture components when --format synth");
        cmd->add_option("--synth-spread", flags.synth.spread, "per-component stddev when --format synth");
    }
}

sgh::Dataset load_data(const DataFlags& flags, std::uint64_t seed, sgh::ImageShape* shape = nullptr) {
    if (flags.format == "synth") {
        const auto& s = flags.synth;
        return sgh::synth_mixture(s.n, s.d, s.clusters, s.spread, sgh::Rng(seed).split("data").next_u64());
    }
    if (flags.path.empty()) throw sgh::InputError("missing input path for format " + flags.format);
    if (flags.format == "fvecs") return sgh::read_fvecs(flags.path);
    if (flags.format == "bvecs") return sgh::read_bvecs(flags.path);
    return sgh::read_mnist_idx(flags.path, shape);
}

sgh::CodeDomain parse_domain(const std::string& s) {
    return s == "plus-minus" ? sgh::CodeDomain::PlusMinus : sgh::CodeDomain::ZeroOne;
}

// ---------------------------------------------------------------------------

struct TrainFlags {
    DataFlags data;
    std::size_t bits = 16;
    std::size_t steps = 10000;
    std::size_t batch = 500;
    double lr = 0.01;
    std::size_t decay = 0;
    std::string estimator = "approx";
    std::string domain = "zero-one";
    std::uint64_t seed = 0;
    std::string center = "on";
    bool direct_logq = false;
    std::size_t log_window = 500;
    std::string out;
    std::string log;
};

int run_train(const TrainFlags& f) {
    sgh::Dataset data = load_data(f.data, f.seed);
    sgh::require(!data.empty(), "train: empty dataset");
    std::optional<sgh::Vector> mean;
    if (f.center == "on") {
        data = data.centered();
        mean = data.mean;
    }
    sgh::TrainConfig cfg;
    cfg.bits = f.bits;
    cfg.domain = parse_domain(f.domain);
    cfg.batch_size = f.batch;
    cfg.lr = f.lr;
    cfg.decay_horizon = f.decay;
    cfg.steps = f.steps;
    cfg.estimator = f.estimator == "unbiased" ? sgh::Estimator::Unbiased : sgh::Estimator::Approximate;
    cfg.include_direct_logq_grad = f.direct_logq;
    cfg.seed = f.seed;
    cfg.log_window = f.log_window;

    try {
        const sgh::TrainResult result = sgh::train(data, cfg);
        sgh::save_checkpoint(f.out, sgh::SghModel{result.params, mean});
        if (!f.log.empty()) {
            std::ofstream log(f.log, std::ios::trunc);
            if (!log) throw sgh::InputError("cannot open " + f.log + " for writing");
            result.log.write_csv(log);
        }
        if (!result.log.rows.empty()) {
            const auto& last = result.log.rows.back();
            std::cerr << "step " << last.step << " loss " << last.window_mean_loss << " recon "
                      << last.window_mean_recon_error << '\n';
        }
    } catch (const sgh::TrainingError& e) {
        std::cerr << "training aborted at step " << e.step() << ": " << e.what() << '\n';
        if (e.last_good()) {
            sgh::save_checkpoint(f.out + ".lastgood", sgh::SghModel{*e.last_good(), mean});
            std::cerr << "last finite parameters written to " << f.out << ".lastgood\n";
        }
        return kExitNumeric;
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct BaselineFlags {
    DataFlags data;
    std::string method = "itq";
    std::size_t bits = 16;
    std::size_t iterations = 50;
    std::optional<std::uint64_t> rotation_seed;
    std::string out;
};

int run_baseline(const BaselineFlags& f) {
    const sgh::Dataset data = load_data(f.data, f.rotation_seed.value_or(0));
    if (f.method == "pca") {
        sgh::save_checkpoint(f.out, sgh::pca_fit(data, f.bits));
        return 0;
    }
    sgh::ItqOptions opts;
    opts.iterations = f.iterations;
    opts.random_rotation_seed = f.rotation_seed;
    const sgh::ItqModel model = sgh::itq_fit(data, f.bits, opts);
    sgh::save_checkpoint(f.out, model);
    std::cerr << "quantization loss " << model.loss_history.front() << " -> " << model.loss_history.back() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct EncodeFlags {
    std::string model;
    DataFlags data;
    std::string out;
    std::size_t threads = 1;
};

int run_encode(const EncodeFlags& f) {
    const sgh::AnyModel model = sgh::load_checkpoint(f.model);
    const sgh::Dataset data = load_data(f.data, 0);
    sgh::write_codes(f.out, sgh::encode_dataset(model, data, f.threads));
    return 0;
}

// ---------------------------------------------------------------------------

struct GroundTruthFlags {
    DataFlags base;
    std::string queries;
    std::size_t k = 10;
    std::string metric = "l2";
    std::string out;
    std::size_t threads = 1;
};

std::vector<std::vector<std::int32_t>> to_ivecs(const std::vector<std::vector<sgh::Id>>& rows) {
    std::vector<std::vector<std::int32_t>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.emplace_back(r.begin(), r.end());
    return out;
}

int run_groundtruth(const GroundTruthFlags& f) {
    const sgh::Dataset base = load_data(f.base, 0);
    DataFlags qflags = f.base;
    qflags.path = f.queries;
    const sgh::Dataset queries = load_data(qflags, 0);
    sgh::require(queries.empty() || queries.dim() == base.dim(), "groundtruth: query dimension differs from base");
    sgh::require(f.k > 0 && f.k <= base.size(), "groundtruth: k must be in [1, base size]");
    const auto metric = f.metric == "ip" ? sgh::Metric::InnerProduct : sgh::Metric::L2;
    sgh::write_ivecs(f.out, to_ivecs(sgh::ground_truth(base, queries, f.k, metric, f.threads)));
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalFlags {
    std::string model;
    std::string codes;
    DataFlags queries;
    std::string truth;
    std::size_t k = 10;
    std::vector<std::size_t> n_grid;
    std::string method;
    std::string out;
    std::size_t threads = 1;
};

int run_eval(const EvalFlags& f) {
    const sgh::AnyModel model = sgh::load_checkpoint(f.model);
    const sgh::BinaryIndex index = sgh::read_codes(f.codes);
    if (index.bits() != sgh::model_bits(model)) {
        throw sgh::InputError("eval: codes have " + std::to_string(index.bits()) + " bits but the model produces " +
                              std::to_string(sgh::model_bits(model)));
    }
    const sgh::Dataset queries = load_data(f.queries, 0);
    const auto truth_raw = sgh::read_ivecs(f.truth);
    sgh::require(truth_raw.size() == queries.size(), "eval: truth file and query file disagree on the query count");
    std::vector<std::vector<sgh::Id>> truth;
    truth.reserve(truth_raw.size());
    for (const auto& r : truth_raw) truth.emplace_back(r.begin(), r.end());

    sgh::EvalReport report =
        sgh::recall_curve(index, sgh::encode_queries(model, queries), truth, f.k, f.n_grid, f.threads);
    report.method = f.method.empty() ? sgh::to_string(sgh::kind_of(model)) : f.method;
    std::ofstream out(f.out, std::ios::trunc);
    if (!out) throw sgh::InputError("cannot open " + f.out + " for writing");
    sgh::write_recall_csv(out, {report});
    return 0;
}

// ---------------------------------------------------------------------------

struct ReconstructFlags {
    std::string model;
    DataFlags data;
    std::size_t samples = 8;
    std::size_t first = 0;
    std::size_t tile_rows = 0;
    std::size_t tile_cols = 0;
    std::string out;
};

int run_reconstruct(const ReconstructFlags& f) {
    const auto model = sgh::load_checkpoint_as<sgh::SghModel>(f.model);
    sgh::ImageShape shape;
    const sgh::Dataset data = load_data(f.data, 0, &shape);
    sgh::require(f.first + f.samples <= data.size(), "reconstruct: sample range exceeds the dataset");
    sgh::TileShape tile{f.tile_rows, f.tile_cols};
    if (tile.rows == 0 || tile.cols == 0) {
        if (shape.rows * shape.cols == data.dim()) {
            tile = {shape.rows, shape.cols};
        } else {
            const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(data.dim()))));
            sgh::require(side * side == data.dim(), "reconstruct: pass --tile-rows/--tile-cols for non-square data");
            tile = {side, side};
        }
    }
    sgh::write_pgm(f.out, sgh::reconstruction_grid(model, data.slice(f.first, f.samples), tile));
    return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckFlags {
    std::size_t d = 4;
    std::size_t bits = 3;
    std::size_t instances = 5;
    std::string domain = "zero-one";
    std::uint64_t seed = 0;
    double step = 1e-5;
    double w_tol = 1e-6;
    double decoder_tol = 1e-4;
};

int run_gradcheck(const GradcheckFlags& f) {
    sgh::require(f.d > 0 && f.bits > 0, "gradcheck: d and bits must be positive");
    sgh::Rng rng = sgh::Rng(f.seed).split("gradcheck");
    bool ok = true;
    for (std::size_t t = 0; t < f.instances; ++t) {
        auto p = sgh::ModelParams::zeros(f.d, f.bits, parse_domain(f.domain));
        for (auto& v : p.W.reshaped()) v = 0.5 * rng.normal();
        for (auto& v : p.U.reshaped()) v = rng.normal();
        for (auto& v : p.beta) v = 0.5 * rng.normal();
        p.log_rho = 0.3 * rng.normal();
        sgh::Vector x(static_cast<Eigen::Index>(f.d));
        for (auto& v : x) v = rng.normal();
        const auto r = sgh::exact_grad_check(p, x, f.step);
        const bool pass = r.max_rel_err_W < f.w_tol && r.max_rel_err_decoder() < f.decoder_tol;
        ok = ok && pass;
        std::cout << "instance " << t << ": W " << r.max_rel_err_W << " U " << r.max_rel_err_U << " beta "
                  << r.max_rel_err_beta << " log_rho " << r.rel_err_log_rho << (pass ? "  ok" : "  FAIL") << '\n';
    }
    std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << '\n';
    return ok ? 0 : kExitNumeric;
}

// ---------------------------------------------------------------------------

struct SynthCmdFlags {
    SynthFlags synth;
    std::size_t queries = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string queries_out;
};

int run_synth(const SynthCmdFlags& f) {
    const auto& s = f.synth;
    const sgh::Dataset all = sgh::synth_mixture(s.n + f.queries, s.d, s.clusters, s.spread, f.seed);
    sgh::write_fvecs(f.out, all.slice(0, s.n));
    if (f.queries > 0) {
        sgh::require(!f.queries_out.empty(), "synth: --queries needs --queries-out");
        sgh::write_fvecs(f.queries_out, all.slice(s.n, f.queries));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned binary hashing: training, encoding and retrieval evaluation"};
    app.require_subcommand(1);
    int status = 0;

    TrainFlags train;
    auto* c_train = app.add_subcommand("train", "fit encoder and decoder with minibatch stochastic gradients");
    add_data_flags(c_train, train.data, "--data", true);
    c_train->add_option("--bits", train.bits)->check(CLI::Range(1, 4096));
    c_train->add_option("--steps", train.steps);
    c_train->add_option("--batch", train.batch);
    c_train->add_option("--lr", train.lr);
    c_train->add_option("--decay-horizon", train.decay, "inverse-time decay horizon; 0 = 10*steps/11");
    c_train->add_option("--estimator", train.estimator)->check(CLI::IsMember({"approx", "unbiased"}));
    c_train->add_option("--domain", train.domain)->check(CLI::IsMember({"zero-one", "plus-minus"}));
    c_train->add_option("--seed", train.seed);
    c_train->add_option("--center", train.center)->check(CLI::IsMember({"on", "off"}));
    c_train->add_flag("--direct-logq-grad", train.direct_logq, "add the explicit d log q / dW term");
    c_train->add_option("--log-window", train.log_window);
    c_train->add_option("--out", train.out)->required();
    c_train->add_option("--log", train.log);
    c_train->callback([&] { status = run_train(train); });

    BaselineFlags base;
    auto* c_base = app.add_subcommand("baseline", "fit an ITQ or PCA model");
    add_data_flags(c_base, base.data);
    c_base->add_option("--method", base.method)->check(CLI::IsMember({"itq", "pca"}));
    c_base->add_option("--bits", base.bits)->check(CLI::Range(1, 4096));
    c_base->add_option("--iterations", base.iterations);
    c_base->add_option("--rotation-seed", base.rotation_seed, "start ITQ from a seeded random rotation");
    c_base->add_option("--out", base.out)->required();
    c_base->callback([&] { status = run_baseline(base); });

    EncodeFlags enc;
    auto* c_enc = app.add_subcommand("encode", "write packed codes for a dataset");
    c_enc->add_option("--model", enc.model)->required();
    add_data_flags(c_enc, enc.data);
    c_enc->add_option("--out", enc.out)->required();
    c_enc->add_option("--threads", enc.threads)->check(CLI::PositiveNumber);
    c_enc->callback([&] { status = run_encode(enc); });

    GroundTruthFlags gt;
    auto* c_gt = app.add_subcommand("groundtruth", "exact k nearest neighbors as ivecs");
    add_data_flags(c_gt, gt.base, "--base");
    c_gt->add_option("--queries", gt.queries)->required();
    c_gt->add_option("--k", gt.k);
    c_gt->add_option("--metric", gt.metric)->check(CLI::IsMember({"l2", "ip"}));
    c_gt->add_option("--out", gt.out)->required();
    c_gt->add_option("--threads", gt.threads)->check(CLI::PositiveNumber);
    c_gt->callback([&] { status = run_groundtruth(gt); });

    EvalFlags ev;
    auto* c_ev = app.add_subcommand("eval", "RecallK@N of Hamming ranking against ground truth");
    c_ev->add_option("--model", ev.model)->required();
    c_ev->add_option("--codes", ev.codes, "packed base codes from `encode`")->required();
    add_data_flags(c_ev, ev.queries, "--queries");
    c_ev->add_option("--truth", ev.truth)->required();
    c_ev->add_option("--k", ev.k);
    c_ev->add_option("--n", ev.n_grid, "N values; default 1,2,5,...,1000");
    c_ev->add_option("--method", ev.method, "label for the method column");
    c_ev->add_option("--out", ev.out)->required();
    c_ev->add_option("--threads", ev.threads)->check(CLI::PositiveNumber);
    c_ev->callback([&] { status = run_eval(ev); });

    ReconstructFlags rec;
    auto* c_rec = app.add_subcommand("reconstruct", "PGM grid of inputs, reconstructions and codebook templates");
    c_rec->add_option("--model", rec.model)->required();
    add_data_flags(c_rec, rec.data);
    c_rec->add_option("--samples", rec.samples);
    c_rec->add_option("--first", rec.first);
    c_rec->add_option("--tile-rows", rec.tile_rows);
    c_rec->add_option("--tile-cols", rec.tile_cols);
    c_rec->add_option("--out", rec.out)->required();
    c_rec->callback([&] { status = run_reconstruct(rec); });

    GradcheckFlags gc;
    auto* c_gc = app.add_subcommand("gradcheck", "compare estimator expectations with finite differences");
    c_gc->add_option("--dim", gc.d);
    c_gc->add_option("--bits", gc.bits);
    c_gc->add_option("--instances", gc.instances);
    c_gc->add_option("--domain", gc.domain)->check(CLI::IsMember({"zero-one", "plus-minus"}));
    c_gc->add_option("--seed", gc.seed);
    c_gc->add_option("--step", gc.step);
    c_gc->callback([&] { status = run_gradcheck(gc); });

    SynthCmdFlags syn;
    auto* c_syn = app.add_subcommand("synth", "write a seeded Gaussian mixture as fvecs");
    c_syn->add_option("--n", syn.synth.n);
    c_syn->add_option("--d", syn.synth.d);
    c_syn->add_option("--clusters", syn.synth.clusters);
    c_syn->add_option("--spread", syn.synth.spread);
    c_syn->add_option("--queries", syn.queries, "extra points written to --queries-out");
    c_syn->add_option("--seed", syn.seed);
    c_syn->add_option("--out", syn.out)->required();
    c_syn->add_option("--queries-out", syn.queries_out);
    c_syn->callback([&] { status = run_synth(syn); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    } catch (const sgh::FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kExitFormat;
    } catch (const sgh::TrainingError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const sgh::Error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    }
    return status;
}
