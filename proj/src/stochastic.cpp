#include "acvae/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace acvae {

GaussianPosterior::GaussianPosterior(Tensor mu_in, Tensor logvar_in)
    : mu(std::move(mu_in)), logvar(std::move(logvar_in)) {
    if (!mu.same_shape(logvar))
        throw ShapeError("GaussianPosterior: mu " + mu.shape_str() + " vs logvar " +
                         logvar.shape_str());
    clamp_mask = Tensor(mu.rows(), mu.cols(), 1.0);
    auto lv = logvar.values();
    auto mask = clamp_mask.values();
    for (std::size_t i = 0; i < lv.size(); ++i) {
        if (lv[i] > kLogVarClamp) {
            lv[i] = kLogVarClamp;
            mask[i] = 0.0;
        } else if (lv[i] < -kLogVarClamp) {
            lv[i] = -kLogVarClamp;
            mask[i] = 0.0;
        }
    }
}

LatentSample reparameterize(const GaussianPosterior& post, Rng& rng) {
    Tensor eps(post.batch(), post.dim());
    for (double& e : eps.values()) e = rng.normal();
    return reparameterize_with(post, std::move(eps));
}

LatentSample reparameterize_with(const GaussianPosterior& post, Tensor eps) {
    if (!eps.same_shape(post.mu))
        throw ShapeError("reparameterize: eps " + eps.shape_str() + " vs mu " +
                         post.mu.shape_str());
    Tensor z(post.batch(), post.dim());
    auto zv = z.values();
    auto mv = post.mu.values();
    auto lv = post.logvar.values();
    auto ev = eps.values();
    for (std::size_t i = 0; i < zv.size(); ++i)
        zv[i] = mv[i] + std::exp(0.5 * lv[i]) * ev[i];
    return {std::move(z), std::move(eps)};
}

std::vector<double> kl_standard_normal(const GaussianPosterior& post) {
    std::vector<double> kl(post.batch(), 0.0);
    for (std::size_t i = 0; i < post.batch(); ++i) {
        const double* mu = post.mu.row(i);
        const double* lv = post.logvar.row(i);
        double acc = 0.0;
        for (std::size_t d = 0; d < post.dim(); ++d)
            acc += mu[d] * mu[d] + std::exp(lv[d]) - lv[d] - 1.0;
        kl[i] = 0.5 * acc;
    }
    return kl;
}

void kl_backward(const GaussianPosterior& post, double scale, Tensor& grad_mu,
                 Tensor& grad_logvar) {
    if (!grad_mu.same_shape(post.mu) || !grad_logvar.same_shape(post.logvar))
        throw ShapeError("kl_backward: gradient shape mismatch");
    auto gm = grad_mu.values();
    auto gl = grad_logvar.values();
    auto mv = post.mu.values();
    auto lv = post.logvar.values();
    auto mask = post.clamp_mask.values();
    for (std::size_t i = 0; i < gm.size(); ++i) {
        gm[i] += scale * mv[i];
        gl[i] += scale * 0.5 * (std::exp(lv[i]) - 1.0) * mask[i];
    }
}

std::vector<double> bernoulli_loglik(const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y))
        throw ShapeError("bernoulli_loglik: x " + x.shape_str() + " vs y " + y.shape_str());
    std::vector<double> ll(x.rows(), 0.0);
    const double lo = kLikelihoodClamp;
    const double hi = 1.0 - kLikelihoodClamp;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xr = x.row(i);
        const double* yr = y.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double yc = std::clamp(yr[j], lo, hi);
            acc += xr[j] * std::log(yc) + (1.0 - xr[j]) * std::log1p(-yc);
        }
        ll[i] = acc;
    }
    return ll;
}

Tensor bernoulli_loglik_backward_logits(const Tensor& x, const Tensor& y, double scale) {
    if (!x.same_shape(y))
        throw ShapeError("bernoulli_loglik_backward: shape mismatch");
    Tensor g(x.rows(), x.cols());
    auto xv = x.values();
    auto yv = y.values();
    auto gv = g.values();
    const double lo = kLikelihoodClamp;
    const double hi = 1.0 - kLikelihoodClamp;
    for (std::size_t i = 0; i < gv.size(); ++i) {
        // d/d logit of the clamped log-likelihood; zero where the clamp binds.
        gv[i] = (yv[i] >= lo && yv[i] <= hi) ? scale * (xv[i] - yv[i]) : 0.0;
    }
    return g;
}

CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                         const std::vector<std::size_t>& labels) {
    if (labels.size() != logits.rows())
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + logits.shape_str() + " logits");
    CrossEntropyResult res;
    res.loss.resize(logits.rows());
    res.argmax.resize(logits.rows());
    res.grad_logits = Tensor(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (labels[i] >= logits.cols())
            throw std::out_of_range("softmax_cross_entropy: label " +
                                    std::to_string(labels[i]) + " out of range at item " +
                                    std::to_string(i));
        const double* row = logits.row(i);
        double mx = row[0];
        std::size_t arg = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c) {
            if (row[c] > mx) {
                mx = row[c];
                arg = c;
            }
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) sum += std::exp(row[c] - mx);
        const double log_sum = std::log(sum);
        res.loss[i] = log_sum - (row[labels[i]] - mx);
        res.argmax[i] = arg;
        double* grad = res.grad_logits.row(i);
        for (std::size_t c = 0; c < logits.cols(); ++c)
            grad[c] = std::exp(row[c] - mx) / sum;
        grad[labels[i]] -= 1.0;
    }
    return res;
}

double mi_estimate(double mean_cross_entropy, std::size_t num_classes) {
    return std::log(static_cast<double>(num_classes)) - mean_cross_entropy;
}

} // namespace acvae
