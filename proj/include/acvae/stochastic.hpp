#ifndef ACVAE_STOCHASTIC_HPP
#define ACVAE_STOCHASTIC_HPP

#include <cstdint>
#include <vector>

#include "acvae/rng.hpp"
#include "acvae/tensor.hpp"

namespace acvae {

constexpr double kLogVarClamp = 15.0;
constexpr double kLikelihoodClamp = 1e-7;

// Diagonal Gaussian posterior per batch item. logvar is clamped to
// [-15, 15] on construction; clamp_mask records where the clamp was
// inactive so gradients vanish at saturated coordinates.
struct GaussianPosterior {
    Tensor mu;
    Tensor logvar;
    Tensor clamp_mask; // 1 where logvar passed through unclamped

    GaussianPosterior(Tensor mu_in, Tensor logvar_in);

    std::size_t batch() const { return mu.rows(); }
    std::size_t dim() const { return mu.cols(); }
};

// Sampled latent plus the noise that produced it, kept for backprop.
struct LatentSample {
    Tensor z;
    Tensor eps;
};

// z = mu + exp(logvar / 2) * eps, eps ~ N(0, I).
LatentSample reparameterize(const GaussianPosterior& post, Rng& rng);

// Same transform with caller-supplied noise (frozen-eps gradient checks).
LatentSample reparameterize_with(const GaussianPosterior& post, Tensor eps);

// Per-item KL(q || N(0, I)) = 1/2 sum_d (mu^2 + sigma^2 - logvar - 1).
std::vector<double> kl_standard_normal(const GaussianPosterior& post);

// Gradients of sum_i kl[i] scaled by `scale`, accumulated into grad_mu /
// grad_logvar (which must match the posterior's shape).
void kl_backward(const GaussianPosterior& post, double scale, Tensor& grad_mu,
                 Tensor& grad_logvar);

// Per-item Bernoulli log-likelihood sum_j x log y' + (1-x) log(1-y') with
// y' = clamp(y, 1e-7, 1-1e-7).
std::vector<double> bernoulli_loglik(const Tensor& x, const Tensor& y);

// Gradient of sum_i loglik[i] w.r.t. the decoder's pre-sigmoid activations,
// scaled by `scale`: (x - y) where the clamp is inactive, 0 where it binds.
Tensor bernoulli_loglik_backward_logits(const Tensor& x, const Tensor& y, double scale);

struct CrossEntropyResult {
    std::vector<double> loss;  // per item, -log softmax(logits)[label]
    Tensor grad_logits;        // softmax - onehot (unscaled)
    std::vector<std::size_t> argmax; // ties toward the lowest index
};

CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                         const std::vector<std::size_t>& labels);

// Variational mutual-information estimate: ln(num_classes) - mean CE.
double mi_estimate(double mean_cross_entropy, std::size_t num_classes);

} // namespace acvae

#endif
