#ifndef ACVAE_TRAINING_HPP
#define ACVAE_TRAINING_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "acvae/mnist.hpp"
#include "acvae/models.hpp"

namespace acvae {

struct TrainingConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 100;
    AdamConfig adam{};
    std::uint64_t seed = 1;
};

// Per-batch report. elbo_term = recon_term - gamma * kl_term (gamma = 1
// outside KL censoring); all values are batch means per item.
struct StepReport {
    double elbo_term = 0.0;
    double kl_term = 0.0;
    double recon_term = 0.0;
    double adversary_ce = 0.0;
};

struct MetricsRecord {
    std::size_t epoch = 0;
    double elbo = 0.0;
    double recon = 0.0;
    double kl = 0.0;
    double adv_ce = 0.0;
    double adv_acc = 0.0;
    double mi_estimate = 0.0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRecord& rec);

struct Vae {
    ModelConfig cfg;
    EncoderNet enc;
    DecoderNet dec;
    AdversaryNet adv;

    explicit Vae(const ModelConfig& c) : cfg(c), enc(c), dec(c), adv(c) {}
    void init(Rng& rng) {
        enc.net.init(rng);
        dec.net.init(rng);
        adv.net.init(rng);
    }
};

struct BatchWork {
    GaussianPosterior post;
    LatentSample sample;
};

// Encoder forward plus one reparameterized sample from the noise stream.
BatchWork encode_and_sample(EncoderNet& enc, const mnist::Batch& batch, Rng& noise);

// Shared objective pass: accumulates encoder/decoder gradients of the
// per-batch-mean loss  gamma*KL - (1/k) sum_j loglik_j - lambda*(1/k) sum_j CE_j.
// `work` supplies the first sample; samples j >= 1 are drawn from `noise`.
// With lambda > 0 the cross-entropy gradient is routed through the frozen
// adversary (its parameter gradients are not touched).
StepReport vae_objective_pass(Vae& vae, const mnist::Batch& batch, BatchWork& work,
                              double lambda, double gamma, Rng& noise);

// Baseline / KL-censored objective (lambda = 0 path, bitwise identical to
// the adversarially censored pass at lambda = 0).
StepReport elbo_batch(Vae& vae, const mnist::Batch& batch, double gamma, Rng& noise);

// Adversarially censored objective (gamma fixed at 1).
StepReport censored_vae_batch(Vae& vae, const mnist::Batch& batch, double lambda, Rng& noise);

// Adversary's own pass on a detached z; accumulates gradients into the
// adversary only and returns the mean cross-entropy.
double adversary_batch(AdversaryNet& adv, const Tensor& z_detached,
                       const std::vector<std::size_t>& s);

// Full alternating training loop: per batch, adversary Adam step first
// (always, as the parallel metric adversary when not censoring), then the
// VAE Adam step; per-epoch evaluation over the test set is appended to the
// returned metrics and streamed to metrics_csv when given.
std::vector<MetricsRecord> train(Vae& vae, const TrainingConfig& tc,
                                 const mnist::Dataset& train_ds, const mnist::Dataset& test_ds,
                                 std::ostream* metrics_csv = nullptr,
                                 std::ostream* log = nullptr);

// Checkpoint: magic "ACVAE\x01", u32 LE manifest length + JSON manifest,
// then length-prefixed little-endian float64 blocks (weight, bias) per layer
// in order enc.l1, enc.l2, dec.l1, dec.l2, adv.l1, adv.l2. The encoder head
// is mu-first, logvar-second, recorded in the manifest.
void save_checkpoint(const std::filesystem::path& path, const Vae& vae, std::uint64_t seed,
                     std::size_t epoch);

struct Checkpoint {
    Vae vae;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace acvae

#endif
