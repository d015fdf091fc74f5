#ifndef ACVAE_LAYERS_HPP
#define ACVAE_LAYERS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "acvae/rng.hpp"
#include "acvae/tensor.hpp"

namespace acvae {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Fully connected layer with accumulated gradients and Adam moment state.
// forward() caches its input for the matching backward(); any parameter
// update invalidates the cache.
class LinearLayer {
public:
    LinearLayer(std::size_t in_dim, std::size_t out_dim);

    std::size_t in_dim() const { return weight_.rows(); }
    std::size_t out_dim() const { return weight_.cols(); }
    std::size_t param_count() const { return weight_.size() + bias_.size(); }

    // Uniform [-sqrt(6/(fan_in+fan_out)), +...], biases zero.
    void init(Rng& rng);

    Tensor forward(const Tensor& x);

    // Accumulates grad_weight += x^T * grad_out and grad_bias += colsum(grad_out);
    // returns grad_out * W^T. With accumulate_params = false only the input
    // gradient is computed (frozen-parameter pass).
    Tensor backward(const Tensor& grad_out, bool accumulate_params = true);

    // Bias-corrected Adam update; zeroes gradients and invalidates the cache.
    // Aborts on non-finite gradients with a NumericError naming max |g|.
    void adam_step(const AdamConfig& cfg);

    void zero_grad();

    Tensor& weight() { return weight_; }
    const Tensor& weight() const { return weight_; }
    std::vector<double>& bias() { return bias_; }
    const std::vector<double>& bias() const { return bias_; }
    Tensor& grad_weight() { return grad_weight_; }
    std::vector<double>& grad_bias() { return grad_bias_; }
    std::int64_t step_count() const { return step_; }

    // Flat parameter / gradient access for gradient checking and checkpoints.
    double param(std::size_t i) const;
    void set_param(std::size_t i, double v);
    double grad(std::size_t i) const;

private:
    Tensor weight_; // in_dim x out_dim
    std::vector<double> bias_;
    Tensor grad_weight_;
    std::vector<double> grad_bias_;
    Tensor m_weight_, v_weight_;
    std::vector<double> m_bias_, v_bias_;
    std::int64_t step_ = 0;
    Tensor cached_input_;
    bool has_cache_ = false;
};

// Elementwise tanh; backward scales the upstream gradient by 1 - tanh^2.
class TanhLayer {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    Tensor out_;
    bool has_cache_ = false;
};

// Elementwise logistic sigmoid; backward scales by sigma * (1 - sigma).
class SigmoidLayer {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

    const Tensor& output() const { return out_; }

private:
    Tensor out_;
    bool has_cache_ = false;
};

// Central finite differences over a random subset of parameter coordinates
// (all of them if fewer than min_coords). `loss` must recompute the loss and
// repopulate analytic gradients from scratch on every call. Returns the worst
// relative error observed.
double gradient_check(std::span<LinearLayer* const> layers,
                      const std::function<double()>& loss, Rng& rng,
                      std::size_t min_coords = 100, double h = 1e-5);

} // namespace acvae

#endif
