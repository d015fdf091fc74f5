#include "acvae/models.hpp"

#include <cassert>
#include <stdexcept>

namespace acvae {

std::string to_string(ConditioningMode mode) {
    switch (mode) {
        case ConditioningMode::Full: return "full";
        case ConditioningMode::Partial: return "partial";
        case ConditioningMode::Basic: return "basic";
    }
    return "?";
}

std::string to_string(CensorMode censor) {
    switch (censor) {
        case CensorMode::None: return "none";
        case CensorMode::Adversarial: return "adv";
        case CensorMode::Kl: return "kl";
    }
    return "?";
}

ConditioningMode conditioning_from_string(const std::string& s) {
    if (s == "full") return ConditioningMode::Full;
    if (s == "partial") return ConditioningMode::Partial;
    if (s == "basic") return ConditioningMode::Basic;
    throw std::invalid_argument("unknown conditioning mode: " + s);
}

CensorMode censor_from_string(const std::string& s) {
    if (s == "none") return CensorMode::None;
    if (s == "adv") return CensorMode::Adversarial;
    if (s == "kl") return CensorMode::Kl;
    throw std::invalid_argument("unknown censor mode: " + s);
}

void ModelConfig::validate() const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (gamma < 1.0) throw std::invalid_argument("gamma must be >= 1");
    if (censor != CensorMode::Adversarial && lambda != 0.0)
        throw std::invalid_argument("lambda requires --censor adv");
    if (censor != CensorMode::Kl && gamma != 1.0)
        throw std::invalid_argument("gamma requires --censor kl");
}

namespace {
Tensor maybe_concat(const Tensor& a, const Tensor& b, bool condition) {
    return condition ? hconcat(a, b) : a;
}
} // namespace

EncoderNet::EncoderNet(const ModelConfig& c)
    : net(c.encoder_input_dim(), c.hidden, 2 * c.d_z), cfg(c) {
    const std::size_t expected =
        c.encoder_input_dim() * c.hidden + c.hidden + c.hidden * 2 * c.d_z + 2 * c.d_z;
    assert(net.param_count() == expected);
    (void)expected;
}

GaussianPosterior EncoderNet::encode(const Tensor& x, const Tensor& s_onehot) {
    Tensor head = net.forward(maybe_concat(x, s_onehot, cfg.mode == ConditioningMode::Full));
    return GaussianPosterior(hslice(head, 0, cfg.d_z), hslice(head, cfg.d_z, cfg.d_z));
}

Tensor EncoderNet::backward(const GaussianPosterior& post, const Tensor& grad_mu,
                            const Tensor& grad_logvar) {
    Tensor grad_head(grad_mu.rows(), 2 * cfg.d_z);
    for (std::size_t i = 0; i < grad_mu.rows(); ++i) {
        double* row = grad_head.row(i);
        const double* gm = grad_mu.row(i);
        const double* gl = grad_logvar.row(i);
        const double* mask = post.clamp_mask.row(i);
        for (std::size_t d = 0; d < cfg.d_z; ++d) {
            row[d] = gm[d];
            row[cfg.d_z + d] = gl[d] * mask[d];
        }
    }
    Tensor grad_in = net.backward(grad_head);
    return cfg.mode == ConditioningMode::Full ? hslice(grad_in, 0, cfg.d_x)
                                              : grad_in;
}

DecoderNet::DecoderNet(const ModelConfig& c)
    : net(c.decoder_input_dim(), c.hidden, c.d_x), cfg(c) {}

Tensor DecoderNet::decode(const Tensor& z, const Tensor& s_onehot) {
    return out_act.forward(
        net.forward(maybe_concat(z, s_onehot, cfg.mode != ConditioningMode::Basic)));
}

Tensor DecoderNet::backward_from_logits(const Tensor& grad_logits, bool accumulate_params) {
    Tensor grad_in = net.backward(grad_logits, accumulate_params);
    return cfg.mode != ConditioningMode::Basic ? hslice(grad_in, 0, cfg.d_z) : grad_in;
}

AdversaryNet::AdversaryNet(const ModelConfig& c) : net(c.d_z, c.hidden, c.d_s), cfg(c) {}

Tensor AdversaryNet::logits(const Tensor& z) { return net.forward(z); }

Tensor AdversaryNet::backward(const Tensor& grad_logits, bool accumulate_params) {
    return net.backward(grad_logits, accumulate_params);
}

} // namespace acvae
