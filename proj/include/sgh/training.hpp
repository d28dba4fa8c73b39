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

#pragma once

// Minibatch stochastic-gradient training of the hashing model.
//
// Decoder parameters (U, beta, log_rho) get ordinary gradients of the
// per-sample loss. The encoder W sees the loss only through discrete codes,
// so its gradient uses either the exact per-bit finite difference
//   dW_k = (loss(h | h_k = on) - loss(h | h_k = off)) * p_k (1 - p_k) * x
// or the one-pass approximation that replaces the finite difference with the
// derivative of the loss with respect to bit k at the sampled code.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sgh/common.hpp"
#include "sgh/dataset.hpp"
#include "sgh/hash_code.hpp"
#include "sgh/model.hpp"
#include "sgh/rng.hpp"

namespace sgh {

enum class Estimator { Unbiased, Approximate };
enum class OptimizerKind { Adam, PlainSGD };

inline const char* to_string(Estimator e) { return e == Estimator::Unbiased ? "unbiased" : "approx"; }

struct TrainConfig {
    std::size_t bits = 16;
    CodeDomain domain = CodeDomain::ZeroOne;
    std::size_t batch_size = 500;
    double lr = 0.01;
    std::size_t decay_horizon = 0;  // 0 selects 10 * steps / 11
    std::size_t steps = 0;
    Estimator estimator = Estimator::Approximate;
    bool include_direct_logq_grad = false;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::size_t log_window = 500;

    [[nodiscard]] std::size_t effective_decay_horizon() const {
        if (decay_horizon > 0) return decay_horizon;
        return std::max<std::size_t>(1, 10 * steps / 11);
    }

    void validate(std::size_t dataset_size) const {
        require(bits > 0, "TrainConfig: bits must be positive");
        require(batch_size > 0, "TrainConfig: batch_size must be positive");
        require(batch_size <= dataset_size, "TrainConfig: batch_size exceeds dataset size");
        require(lr > 0.0 && std::isfinite(lr), "TrainConfig: lr must be positive");
        require(log_window > 0, "TrainConfig: log_window must be positive");
    }
};

/// Gradient of the loss with respect to every parameter block.
struct GradientSet {
    Matrix dW;
    Matrix dU;
    Vector dbeta;
    double dlog_rho = 0.0;

    static GradientSet zeros_like(const ModelParams& params) {
        GradientSet g;
        g.dW = Matrix::Zero(params.W.rows(), params.W.cols());
        g.dU = Matrix::Zero(params.U.rows(), params.U.cols());
        g.dbeta = Vector::Zero(params.beta.size());
        return g;
    }

    [[nodiscard]] bool all_finite() const {
        return dW.allFinite() && dU.allFinite() && dbeta.allFinite() && std::isfinite(dlog_rho);
    }
};

struct DecoderGradient {
    Matrix dU;
    Vector dbeta;
    double dlog_rho = 0.0;
};

/// Adam moment accumulators shaped like ModelParams.
struct OptimizerState {
    GradientSet first;
    GradientSet second;
    std::uint64_t step = 0;

    static OptimizerState for_params(const ModelParams& params) {
        return {GradientSet::zeros_like(params), GradientSet::zeros_like(params), 0};
    }
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t step, std::optional<ModelParams> last_good)
        : Error(what), step_(step), last_good_(std::move(last_good)) {}

    [[nodiscard]] std::size_t step() const { return step_; }
    [[nodiscard]] const std::optional<ModelParams>& last_good() const { return last_good_; }

private:
    std::size_t step_;
    std::optional<ModelParams> last_good_;
};

namespace detail {

inline Vector logit_of(const Vector& p) {
    return (p.array().log() - (-p.array()).log1p()).matrix();
}

// Per-bit finite difference of the loss (on minus off) given the residual
// r = x - U h of the sampled code, in O(d) per bit.
inline Vector bit_differences_from_residual(const ModelParams& params, const Vector& residual, const Vector& hval,
                                            const Vector& logit) {
    const double rho2 = std::exp(2.0 * params.log_rho);
    const Vector ur = params.U.transpose() * residual;
    const Vector un = params.U.colwise().squaredNorm().transpose();
    Vector delta(hval.size());
    for (Eigen::Index k = 0; k < hval.size(); ++k) {
        double recon;
        if (params.domain == CodeDomain::ZeroOne) {
            // r' = r + u_k h_k is the residual with bit k off.
            recon = (un[k] * (1.0 - 2.0 * hval[k]) - 2.0 * ur[k]) / (2.0 * rho2);
        } else {
            recon = -2.0 * (ur[k] + hval[k] * un[k]) / rho2;
        }
        delta[k] = recon - params.beta[k] + logit[k];
    }
    return delta;
}

inline Vector bit_derivatives_from_residual(const ModelParams& params, const Vector& residual, const Vector& logit) {
    const double rho2 = std::exp(2.0 * params.log_rho);
    // Derivative with respect to the stored bit b in {0,1}; h = 2b - 1 doubles
    // the reconstruction term under the plus-minus domain.
    const double scale = params.domain == CodeDomain::ZeroOne ? 1.0 : 2.0;
    return (-scale / rho2) * (params.U.transpose() * residual) - params.beta + logit;
}

inline Matrix assemble_dW(const Vector& x, const Vector& per_bit, const Vector& p, const HashCode& h,
                          bool include_direct) {
    Vector coeff = per_bit.array() * p.array() * (1.0 - p.array());
    if (include_direct) coeff += h.bit_vector() - p;
    return x * coeff.transpose();
}

}  // namespace detail

/// Exact per-bit loss differences loss(h_k on) - loss(h_k off) at code h.
inline Vector bit_differences(const ModelParams& params, const Vector& x, const HashCode& h) {
    detail::check_point(params, x);
    detail::check_code(params, h);
    const Vector hval = h.values(params.domain);
    const Vector residual = x - params.U * hval;
    return detail::bit_differences_from_residual(params, residual, hval, detail::logit_of(encode_probs(params, x)));
}

/// Derivative of the loss with respect to each bit, evaluated at code h.
inline Vector bit_derivatives(const ModelParams& params, const Vector& x, const HashCode& h) {
    detail::check_point(params, x);
    detail::check_code(params, h);
    const Vector residual = x - params.U * h.values(params.domain);
    return detail::bit_derivatives_from_residual(params, residual, detail::logit_of(encode_probs(params, x)));
}

inline DecoderGradient grad_decoder(const ModelParams& params, const Vector& x, const HashCode& h) {
    detail::check_point(params, x);
    detail::check_code(params, h);
    const double rho2 = std::exp(2.0 * params.log_rho);
    const Vector hval = h.values(params.domain);
    const Vector residual = x - params.U * hval;
    DecoderGradient g;
    g.dU = (-1.0 / rho2) * residual * hval.transpose();
    g.dbeta = params.beta.unaryExpr([](double b) { return sigmoid(b); }) - h.bit_vector();
    g.dlog_rho = static_cast<double>(params.dim()) - residual.squaredNorm() / rho2;
    return g;
}

inline Matrix grad_W_unbiased(const ModelParams& params, const Vector& x, const HashCode& h,
                              bool include_direct_logq_grad = false) {
    const Vector p = encode_probs(params, x);
    const Vector hval = h.values(params.domain);
    detail::check_code(params, h);
    const Vector residual = x - params.U * hval;
    const Vector delta = detail::bit_differences_from_residual(params, residual, hval, detail::logit_of(p));
    return detail::assemble_dW(x, delta, p, h, include_direct_logq_grad);
}

inline Matrix grad_W_approx(const ModelParams& params, const Vector& x, const HashCode& h,
                            bool include_direct_logq_grad = false) {
    const Vector p = encode_probs(params, x);
    detail::check_code(params, h);
    const Vector residual = x - params.U * h.values(params.domain);
    const Vector g = detail::bit_derivatives_from_residual(params, residual, detail::logit_of(p));
    return detail::assemble_dW(x, g, p, h, include_direct_logq_grad);
}

inline double learning_rate(double lr, std::uint64_t step, std::size_t decay_horizon) {
    return lr / (1.0 + static_cast<double>(step) / static_cast<double>(decay_horizon));
}

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One Adam update of `params` in place. Throws TrainingError on a
/// non-finite gradient, leaving params and state untouched.
inline void adam_step(OptimizerState& state, ModelParams& params, const GradientSet& grads, double lr_t) {
    if (!grads.all_finite()) {
        throw TrainingError("adam_step: non-finite gradient at optimizer step " + std::to_string(state.step),
                            state.step, params);
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t);
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
        v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g * g;
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        param -= lr_t * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    };
    auto update_block = [&](auto& param, auto& m, auto& v, const auto& g) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            update(param.data()[i], m.data()[i], v.data()[i], g.data()[i]);
        }
    };
    update_block(params.W, state.first.dW, state.second.dW, grads.dW);
    update_block(params.U, state.first.dU, state.second.dU, grads.dU);
    update_block(params.beta, state.first.dbeta, state.second.dbeta, grads.dbeta);
    update(params.log_rho, state.first.dlog_rho, state.second.dlog_rho, grads.dlog_rho);
}

inline void sgd_step(OptimizerState& state, ModelParams& params, const GradientSet& grads, double lr_t) {
    if (!grads.all_finite()) {
        throw TrainingError("sgd_step: non-finite gradient at optimizer step " + std::to_string(state.step),
                            state.step, params);
    }
    state.step += 1;
    params.W -= lr_t * grads.dW;
    params.U -= lr_t * grads.dU;
    params.beta -= lr_t * grads.dbeta;
    params.log_rho -= lr_t * grads.dlog_rho;
}

/// Mean gradient and diagnostics over one minibatch.
struct BatchResult {
    GradientSet grads;
    double mean_loss = 0.0;       // loss of the sampled codes
    double mean_map_recon = 0.0;  // ||x - U h_map(x)||^2
};

/// Gradient averaged over the columns of `batch` (d x B), with uniforms
/// `xi` (l x B) driving the stochastic neurons. Equal, up to rounding, to
/// the mean of the per-sample functions above.
inline BatchResult batch_gradient(const ModelParams& params, const Matrix& batch, const Matrix& xi,
                                  Estimator estimator, bool include_direct_logq_grad) {
    require(static_cast<std::size_t>(batch.rows()) == params.dim(), "batch_gradient: dimension mismatch");
    require(xi.rows() == params.W.cols() && xi.cols() == batch.cols(), "batch_gradient: xi has wrong shape");
    require(batch.cols() > 0, "batch_gradient: empty batch");
    const double n = static_cast<double>(batch.cols());
    const double d = static_cast<double>(params.dim());
    const double rho2 = std::exp(2.0 * params.log_rho);
    const bool plus_minus = params.domain == CodeDomain::PlusMinus;

    const Matrix z = params.W.transpose() * batch;
    const Matrix p = z.unaryExpr([](double v) { return clamp_prob(sigmoid(v)); });
    const Matrix bits = (p.array() >= xi.array()).cast<double>();
    const Matrix hval = plus_minus ? Matrix((2.0 * bits.array() - 1.0).matrix()) : bits;
    const Matrix residual = batch - params.U * hval;
    const Matrix ur = params.U.transpose() * residual;
    const Vector un = params.U.colwise().squaredNorm().transpose();
    const Matrix log_p = p.array().log();
    const Matrix log_1mp = (-p.array()).log1p();
    const Matrix logit = log_p - log_1mp;

    Matrix per_bit;
    if (estimator == Estimator::Unbiased) {
        if (plus_minus) {
            per_bit = (-2.0 / rho2) * (ur.array() + hval.array().colwise() * un.array()).matrix();
        } else {
            per_bit = ((1.0 - 2.0 * hval.array()).colwise() * un.array() - 2.0 * ur.array()).matrix() / (2.0 * rho2);
        }
    } else {
        per_bit = (-(plus_minus ? 2.0 : 1.0) / rho2) * ur;
    }
    per_bit = (per_bit + logit).colwise() - params.beta;
    Matrix coeff = per_bit.array() * p.array() * (1.0 - p.array());
    if (include_direct_logq_grad) coeff += bits - p;

    BatchResult out;
    out.grads.dW = batch * coeff.transpose() / n;
    out.grads.dU = (-1.0 / (rho2 * n)) * residual * hval.transpose();
    out.grads.dbeta = params.beta.unaryExpr([](double b) { return sigmoid(b); }) - bits.rowwise().mean();
    const Vector res_sq = residual.colwise().squaredNorm().transpose();
    out.grads.dlog_rho = d - res_sq.mean() / rho2;

    const double prior_const = params.beta.unaryExpr([](double b) { return softplus(b); }).sum();
    const Vector prior_lin = bits.transpose() * params.beta;
    const Vector entropy =
        (bits.array() * log_p.array() + (1.0 - bits.array()) * log_1mp.array()).colwise().sum().transpose();
    const double gauss_const = 0.5 * d * std::log(2.0 * std::numbers::pi * rho2);
    out.mean_loss =
        (res_sq.array() / (2.0 * rho2) + gauss_const + prior_const - prior_lin.array() + entropy.array()).mean();

    const Matrix map_bits = (z.array() >= 0.0).cast<double>();
    const Matrix map_val = plus_minus ? Matrix((2.0 * map_bits.array() - 1.0).matrix()) : map_bits;
    out.mean_map_recon = (batch - params.U * map_val).colwise().squaredNorm().mean();
    return out;
}

/// Initial parameters: W ~ N(0, 1/d), U = W scaled by the mean data stddev,
/// beta = 0, rho = mean data stddev.
inline ModelParams init_params(const Dataset& data, std::size_t bits, CodeDomain domain, Rng rng) {
    require(!data.empty(), "init_params: empty dataset");
    const std::size_t d = data.dim();
    ModelParams params = ModelParams::zeros(d, bits, domain);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index j = 0; j < params.W.cols(); ++j) {
        for (Eigen::Index i = 0; i < params.W.rows(); ++i) params.W(i, j) = scale * rng.normal();
    }
    double stddev = data.mean_stddev();
    if (!(stddev > 0.0)) stddev = 1.0;
    params.U = stddev * params.W;
    params.log_rho = std::log(stddev);
    return params;
}

struct LogRow {
    std::size_t step = 0;
    double window_mean_loss = 0.0;
    double window_mean_recon_error = 0.0;
    double lr_t = 0.0;
    double wall_ms = 0.0;
};

struct TrainingLog {
    std::vector<LogRow> rows;

    void write_csv(std::ostream& out) const {
        out << "step,window_mean_loss,window_mean_recon_error,lr_t,wall_ms\n";
        out.precision(17);
        for (const auto& r : rows) {
            out << r.step << ',' << r.window_mean_loss << ',' << r.window_mean_recon_error << ',' << r.lr_t << ','
                << r.wall_ms << '\n';
        }
    }
};

struct TrainResult {
    ModelParams params;
    TrainingLog log;
};

/// Minibatches drawn uniformly with replacement, fresh
/// uniforms for every bit of every example, gradients averaged over the batch.
inline TrainResult train(const Dataset& data, const TrainConfig& config,
                         std::optional<ModelParams> initial = std::nullopt) {
    require(!data.empty(), "train: empty dataset");
    require(data.points.allFinite(), "train: dataset contains non-finite values");
    config.validate(data.size());

    const Rng root(config.seed);
    TrainResult result;
    result.params = initial ? std::move(*initial) : init_params(data, config.bits, config.domain, root.split("init"));
    ModelParams& params = result.params;
    params.validate();
    require(params.dim() == data.dim(), "train: initial params have the wrong dimension");
    require(params.domain == config.domain && params.bits() == config.bits, "train: initial params do not match config");
    if (config.steps == 0) return result;

    Rng batch_rng = root.split("batch");
    Rng noise_rng = root.split("noise");
    OptimizerState state = OptimizerState::for_params(params);
    const std::size_t horizon = config.effective_decay_horizon();
    const auto b = static_cast<Eigen::Index>(config.batch_size);
    const auto l = static_cast<Eigen::Index>(config.bits);
    Matrix batch(static_cast<Eigen::Index>(data.dim()), b);
    Matrix xi(l, b);
    ModelParams last_good = params;

    const auto start = std::chrono::steady_clock::now();
    double window_loss = 0.0;
    double window_recon = 0.0;
    std::size_t window_count = 0;

    for (std::size_t step = 0; step < config.steps; ++step) {
        for (Eigen::Index j = 0; j < b; ++j) {
            batch.col(j) = data.points.col(static_cast<Eigen::Index>(batch_rng.below(data.size())));
        }
        for (Eigen::Index j = 0; j < b; ++j) {
            for (Eigen::Index k = 0; k < l; ++k) xi(k, j) = noise_rng.uniform();
        }
        BatchResult br = batch_gradient(params, batch, xi, config.estimator, config.include_direct_logq_grad);
        if (!std::isfinite(br.mean_loss) || !br.grads.all_finite()) {
            throw TrainingError("train: non-finite objective or gradient at step " + std::to_string(step), step,
                                last_good);
        }
        const double lr_t = learning_rate(config.lr, step, horizon);
        last_good = params;
        if (config.optimizer == OptimizerKind::Adam) {
            adam_step(state, params, br.grads, lr_t);
        } else {
            sgd_step(state, params, br.grads, lr_t);
        }

        window_loss += br.mean_loss;
        window_recon += br.mean_map_recon;
        ++window_count;
        if (window_count == config.log_window || step + 1 == config.steps) {
            const auto now = std::chrono::steady_clock::now();
            LogRow row;
            row.step = step + 1;
            row.window_mean_loss = window_loss / static_cast<double>(window_count);
            row.window_mean_recon_error = window_recon / static_cast<double>(window_count);
            row.lr_t = lr_t;
            row.wall_ms = std::chrono::duration<double, std::milli>(now - start).count();
            result.log.rows.push_back(row);
            window_loss = window_recon = 0.0;
            window_count = 0;
        }
    }
    return result;
}

/// Worst-case disagreement between enumerated analytic gradients and central
/// finite differences of the exact objective.
struct GradCheckReport {
    double max_rel_err_W = 0.0;
    double max_rel_err_U = 0.0;
    double max_rel_err_beta = 0.0;
    double rel_err_log_rho = 0.0;
    std::vector<std::size_t> clamped_bits;  // W columns skipped: probability saturated at the clamp

    [[nodiscard]] double max_rel_err_decoder() const {
        return std::max({max_rel_err_U, max_rel_err_beta, rel_err_log_rho});
    }
};

/// |a - b| / max(|a|, |b|, 1): relative for large values, absolute near zero.
inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

inline constexpr std::size_t kMaxGradCheckBits = 12;

/// q(h|x) for every code, indexed like code_from_index.
inline std::vector<double> enumerate_posterior(const ModelParams& params, const Vector& x) {
    require_enumerable(params.bits());
    const Vector p = encode_probs(params, x);
    const std::uint64_t count = 1ULL << params.bits();
    std::vector<double> q(count, 1.0);
    for (std::uint64_t idx = 0; idx < count; ++idx) {
        for (std::size_t k = 0; k < params.bits(); ++k) {
            const double pk = p[static_cast<Eigen::Index>(k)];
            q[idx] *= ((idx >> k) & 1ULL) ? pk : 1.0 - pk;
        }
    }
    return q;
}

/// Expectation of the W estimator under q(h|x), by enumeration.
inline Matrix expected_grad_W(const ModelParams& params, const Vector& x, Estimator estimator,
                              bool include_direct_logq_grad = false) {
    const std::vector<double> q = enumerate_posterior(params, x);
    Matrix acc = Matrix::Zero(params.W.rows(), params.W.cols());
    for (std::uint64_t idx = 0; idx < q.size(); ++idx) {
        const HashCode h = code_from_index(params.bits(), idx);
        acc += q[idx] * (estimator == Estimator::Unbiased ? grad_W_unbiased(params, x, h, include_direct_logq_grad)
                                                          : grad_W_approx(params, x, h, include_direct_logq_grad));
    }
    return acc;
}

inline DecoderGradient expected_grad_decoder(const ModelParams& params, const Vector& x) {
    const std::vector<double> q = enumerate_posterior(params, x);
    DecoderGradient acc{Matrix::Zero(params.U.rows(), params.U.cols()), Vector::Zero(params.beta.size()), 0.0};
    for (std::uint64_t idx = 0; idx < q.size(); ++idx) {
        const DecoderGradient g = grad_decoder(params, x, code_from_index(params.bits(), idx));
        acc.dU += q[idx] * g.dU;
        acc.dbeta += q[idx] * g.dbeta;
        acc.dlog_rho += q[idx] * g.dlog_rho;
    }
    return acc;
}

/// Compares the enumerated unbiased W estimator and the enumerated decoder
/// gradients with central differences of exact_objective.
inline GradCheckReport exact_grad_check(const ModelParams& params, const Vector& x, double step = 1e-5) {
    params.validate();
    detail::check_point(params, x);
    require_enumerable(params.bits(), kMaxGradCheckBits);

    auto central = [&](auto&& perturb) {
        ModelParams plus = params;
        ModelParams minus = params;
        perturb(plus, step);
        perturb(minus, -step);
        return (exact_objective(plus, x) - exact_objective(minus, x)) / (2.0 * step);
    };

    GradCheckReport report;
    const Vector z = encode_logits(params, x);
    std::vector<bool> clamped(params.bits(), false);
    for (std::size_t k = 0; k < params.bits(); ++k) {
        const double raw = sigmoid(z[static_cast<Eigen::Index>(k)]);
        if (raw <= kProbClamp || raw >= 1.0 - kProbClamp) {
            clamped[k] = true;
            report.clamped_bits.push_back(k);
        }
    }

    const Matrix dW = expected_grad_W(params, x, Estimator::Unbiased);
    for (Eigen::Index j = 0; j < params.W.cols(); ++j) {
        if (clamped[static_cast<std::size_t>(j)]) continue;
        for (Eigen::Index i = 0; i < params.W.rows(); ++i) {
            const double fd = central([&](ModelParams& p, double h) { p.W(i, j) += h; });
            report.max_rel_err_W = std::max(report.max_rel_err_W, relative_error(dW(i, j), fd));
        }
    }

    const DecoderGradient dec = expected_grad_decoder(params, x);
    for (Eigen::Index j = 0; j < params.U.cols(); ++j) {
        for (Eigen::Index i = 0; i < params.U.rows(); ++i) {
            const double fd = central([&](ModelParams& p, double h) { p.U(i, j) += h; });
            report.max_rel_err_U = std::max(report.max_rel_err_U, relative_error(dec.dU(i, j), fd));
        }
        const double fd_beta = central([&](ModelParams& p, double h) { p.beta[j] += h; });
        report.max_rel_err_beta = std::max(report.max_rel_err_beta, relative_error(dec.dbeta[j], fd_beta));
    }
    const double fd_rho = central([&](ModelParams& p, double h) { p.log_rho += h; });
    report.rel_err_log_rho = relative_error(dec.dlog_rho, fd_rho);
    return report;
}

}  // namespace sgh
