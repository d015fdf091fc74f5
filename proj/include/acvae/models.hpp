#ifndef ACVAE_MODELS_HPP
#define ACVAE_MODELS_HPP

#include <string>
#include <vector>

#include "acvae/layers.hpp"
#include "acvae/stochastic.hpp"
#include "acvae/tensor.hpp"

namespace acvae {

enum class ConditioningMode { Full, Partial, Basic };
enum class CensorMode { None, Adversarial, Kl };

std::string to_string(ConditioningMode mode);
std::string to_string(CensorMode censor);
ConditioningMode conditioning_from_string(const std::string& s);
CensorMode censor_from_string(const std::string& s);

struct ModelConfig {
    std::size_t d_x = 784;
    std::size_t d_z = 20;
    std::size_t d_s = 10;
    std::size_t hidden = 500;
    ConditioningMode mode = ConditioningMode::Full;
    CensorMode censor = CensorMode::None;
    double lambda = 0.0; // adversarial censoring weight
    double gamma = 1.0;  // KL censoring weight
    std::size_t k = 1;   // samples per item

    std::size_t encoder_input_dim() const {
        return d_x + (mode == ConditioningMode::Full ? d_s : 0);
    }
    std::size_t decoder_input_dim() const {
        return d_z + (mode == ConditioningMode::Basic ? 0 : d_s);
    }
    void validate() const;
};

// Two-layer MLP: input -> hidden (tanh) -> output head. The output head
// activation belongs to the wrapping network.
struct Mlp {
    LinearLayer l1;
    TanhLayer act;
    LinearLayer l2;

    Mlp(std::size_t in, std::size_t hidden, std::size_t out)
        : l1(in, hidden), l2(hidden, out) {}

    void init(Rng& rng) {
        l1.init(rng);
        l2.init(rng);
    }
    Tensor forward(const Tensor& x) { return l2.forward(act.forward(l1.forward(x))); }
    Tensor backward(const Tensor& g, bool accumulate_params = true) {
        return l1.backward(act.backward(l2.backward(g, accumulate_params)), accumulate_params);
    }
    void adam_step(const AdamConfig& cfg) {
        l1.adam_step(cfg);
        l2.adam_step(cfg);
    }
    void zero_grad() {
        l1.zero_grad();
        l2.zero_grad();
    }
    std::size_t param_count() const { return l1.param_count() + l2.param_count(); }
};

// q_phi(z | x [, s]): head is 2*d_z wide, split mu first then logvar.
struct EncoderNet {
    Mlp net;
    ModelConfig cfg;

    explicit EncoderNet(const ModelConfig& c);
    GaussianPosterior encode(const Tensor& x, const Tensor& s_onehot);
    // grad_mu / grad_logvar -> gradient w.r.t. x (the s block is dropped).
    Tensor backward(const GaussianPosterior& post, const Tensor& grad_mu,
                    const Tensor& grad_logvar);
};

// p_theta(x | z [, s]): sigmoid head of width d_x.
struct DecoderNet {
    Mlp net;
    SigmoidLayer out_act;
    ModelConfig cfg;

    explicit DecoderNet(const ModelConfig& c);
    Tensor decode(const Tensor& z, const Tensor& s_onehot);
    // Gradient w.r.t. pre-sigmoid logits -> gradient w.r.t. z.
    Tensor backward_from_logits(const Tensor& grad_logits, bool accumulate_params = true);
};

// q_psi(s | z): 10-way logit head.
struct AdversaryNet {
    Mlp net;
    ModelConfig cfg;

    explicit AdversaryNet(const ModelConfig& c);
    Tensor logits(const Tensor& z);
    Tensor backward(const Tensor& grad_logits, bool accumulate_params = true);
};

} // namespace acvae

#endif
