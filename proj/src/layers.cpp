#include "acvae/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace acvae {

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim)
    : weight_(in_dim, out_dim),
      bias_(out_dim, 0.0),
      grad_weight_(in_dim, out_dim),
      grad_bias_(out_dim, 0.0),
      m_weight_(in_dim, out_dim),
      v_weight_(in_dim, out_dim),
      m_bias_(out_dim, 0.0),
      v_bias_(out_dim, 0.0) {}

void LinearLayer::init(Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
    for (double& w : weight_.values()) w = (2.0 * rng.uniform() - 1.0) * bound;
    std::fill(bias_.begin(), bias_.end(), 0.0);
    has_cache_ = false;
}

Tensor LinearLayer::forward(const Tensor& x) {
    if (x.cols() != in_dim())
        throw ShapeError("linear_forward: input " + x.shape_str() + " vs weight " +
                         weight_.shape_str());
    Tensor out = matmul(x, weight_);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* row = out.row(i);
        for (std::size_t j = 0; j < out.cols(); ++j) row[j] += bias_[j];
    }
    cached_input_ = x;
    has_cache_ = true;
    return out;
}

Tensor LinearLayer::backward(const Tensor& grad_out, bool accumulate_params) {
    if (!has_cache_)
        throw NumericError("linear_backward: no cached forward pass");
    if (grad_out.cols() != out_dim() || grad_out.rows() != cached_input_.rows())
        throw ShapeError("linear_backward: grad " + grad_out.shape_str() + " vs cached input " +
                         cached_input_.shape_str());
    if (accumulate_params) {
        grad_weight_ += matmul_transpose_a(cached_input_, grad_out);
        for (std::size_t i = 0; i < grad_out.rows(); ++i) {
            const double* row = grad_out.row(i);
            for (std::size_t j = 0; j < grad_out.cols(); ++j) grad_bias_[j] += row[j];
        }
    }
    return matmul_transpose_b(grad_out, weight_);
}

void LinearLayer::adam_step(const AdamConfig& cfg) {
    double max_abs = 0.0;
    bool finite = true;
    for (double g : grad_weight_.values()) {
        if (!std::isfinite(g)) finite = false;
        max_abs = std::max(max_abs, std::fabs(g));
    }
    for (double g : grad_bias_) {
        if (!std::isfinite(g)) finite = false;
        max_abs = std::max(max_abs, std::fabs(g));
    }
    if (!finite)
        throw NumericError("adam_step: non-finite gradient in " + std::to_string(in_dim()) + "x" +
                           std::to_string(out_dim()) + " layer, max|g|=" + std::to_string(max_abs));

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));

    auto update = [&](double& p, double& m, double& v, double g) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        p -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
    };

    auto wp = weight_.values();
    auto wm = m_weight_.values();
    auto wv = v_weight_.values();
    auto wg = grad_weight_.values();
    for (std::size_t i = 0; i < wp.size(); ++i) update(wp[i], wm[i], wv[i], wg[i]);
    for (std::size_t j = 0; j < bias_.size(); ++j)
        update(bias_[j], m_bias_[j], v_bias_[j], grad_bias_[j]);

    zero_grad();
    has_cache_ = false;
}

void LinearLayer::zero_grad() {
    std::fill(grad_weight_.values().begin(), grad_weight_.values().end(), 0.0);
    std::fill(grad_bias_.begin(), grad_bias_.end(), 0.0);
}

double LinearLayer::param(std::size_t i) const {
    return i < weight_.size() ? weight_.values()[i] : bias_[i - weight_.size()];
}

void LinearLayer::set_param(std::size_t i, double v) {
    if (i < weight_.size())
        weight_.values()[i] = v;
    else
        bias_[i - weight_.size()] = v;
    has_cache_ = false;
}

double LinearLayer::grad(std::size_t i) const {
    return i < grad_weight_.size() ? grad_weight_.values()[i] : grad_bias_[i - grad_weight_.size()];
}

Tensor TanhLayer::forward(const Tensor& x) {
    out_ = Tensor(x.rows(), x.cols());
    auto in = x.values();
    auto out = out_.values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
    has_cache_ = true;
    return out_;
}

Tensor TanhLayer::backward(const Tensor& grad_out) const {
    if (!has_cache_ || !grad_out.same_shape(out_))
        throw NumericError("tanh_backward: no matching forward pass");
    Tensor g(grad_out.rows(), grad_out.cols());
    auto gi = grad_out.values();
    auto y = out_.values();
    auto go = g.values();
    for (std::size_t i = 0; i < gi.size(); ++i) go[i] = gi[i] * (1.0 - y[i] * y[i]);
    return g;
}

Tensor SigmoidLayer::forward(const Tensor& x) {
    out_ = Tensor(x.rows(), x.cols());
    auto in = x.values();
    auto out = out_.values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
    has_cache_ = true;
    return out_;
}

Tensor SigmoidLayer::backward(const Tensor& grad_out) const {
    if (!has_cache_ || !grad_out.same_shape(out_))
        throw NumericError("sigmoid_backward: no matching forward pass");
    Tensor g(grad_out.rows(), grad_out.cols());
    auto gi = grad_out.values();
    auto y = out_.values();
    auto go = g.values();
    for (std::size_t i = 0; i < gi.size(); ++i) go[i] = gi[i] * y[i] * (1.0 - y[i]);
    return g;
}

double gradient_check(std::span<LinearLayer* const> layers,
                      const std::function<double()>& loss, Rng& rng, std::size_t min_coords,
                      double h) {
    for (LinearLayer* l : layers) l->zero_grad();
    loss();

    struct Coord {
        LinearLayer* layer;
        std::size_t index;
        double analytic;
    };
    std::vector<Coord> coords;
    std::size_t total = 0;
    for (LinearLayer* l : layers) total += l->param_count();
    for (LinearLayer* l : layers) {
        for (std::size_t i = 0; i < l->param_count(); ++i) {
            if (total <= min_coords ||
                rng.uniform() < static_cast<double>(min_coords) * 2.0 / static_cast<double>(total))
                coords.push_back({l, i, l->grad(i)});
        }
    }

    double worst = 0.0;
    for (const Coord& c : coords) {
        const double saved = c.layer->param(c.index);
        c.layer->set_param(c.index, saved + h);
        for (LinearLayer* l : layers) l->zero_grad();
        const double up = loss();
        c.layer->set_param(c.index, saved - h);
        for (LinearLayer* l : layers) l->zero_grad();
        const double down = loss();
        c.layer->set_param(c.index, saved);
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::fabs(numeric), std::fabs(c.analytic), 1e-8});
        worst = std::max(worst, std::fabs(numeric - c.analytic) / denom);
    }
    for (LinearLayer* l : layers) l->zero_grad();
    return worst;
}

} // namespace acvae
