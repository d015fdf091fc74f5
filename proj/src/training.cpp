#include "acvae/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>

#include "acvae/eval.hpp"
#include "json.hpp"

namespace acvae {

namespace {

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

} // namespace

void write_metrics_header(std::ostream& os) {
    os << "epoch,elbo,recon,kl,adv_ce,adv_acc,mi_estimate\n";
}

void write_metrics_row(std::ostream& os, const MetricsRecord& rec) {
    os << rec.epoch << ',' << std::setprecision(17) << rec.elbo << ',' << rec.recon << ','
       << rec.kl << ',' << rec.adv_ce << ',' << rec.adv_acc << ',' << rec.mi_estimate << '\n';
}

BatchWork encode_and_sample(EncoderNet& enc, const mnist::Batch& batch, Rng& noise) {
    GaussianPosterior post = enc.encode(batch.x, batch.s_onehot);
    LatentSample sample = reparameterize(post, noise);
    return {std::move(post), std::move(sample)};
}

StepReport vae_objective_pass(Vae& vae, const mnist::Batch& batch, BatchWork& work,
                              double lambda, double gamma, Rng& noise) {
    const std::size_t b = batch.x.rows();
    const std::size_t k = vae.cfg.k;
    const double inv_bk = 1.0 / (static_cast<double>(b) * static_cast<double>(k));

    Tensor grad_mu(work.post.batch(), work.post.dim());
    Tensor grad_logvar(work.post.batch(), work.post.dim());

    double recon_sum = 0.0;
    double ce_sum = 0.0;

    for (std::size_t j = 0; j < k; ++j) {
        LatentSample sample = (j == 0) ? std::move(work.sample)
                                       : reparameterize(work.post, noise);

        Tensor y = vae.dec.decode(sample.z, batch.s_onehot);
        recon_sum += mean(bernoulli_loglik(batch.x, y));

        // d loss / d decoder logits = -(x - y) / (b*k)
        Tensor grad_dec_logits = bernoulli_loglik_backward_logits(batch.x, y, -inv_bk);
        Tensor grad_z = vae.dec.backward_from_logits(grad_dec_logits);
        if (lambda > 0.0) {
            Tensor logits = vae.adv.logits(sample.z);
            CrossEntropyResult ce = softmax_cross_entropy(logits, batch.s);
            ce_sum += mean(ce.loss);
            // Encoder ascends the adversary CE: d loss / d logits scales by -lambda.
            ce.grad_logits *= -lambda * inv_bk;
            grad_z += vae.adv.backward(ce.grad_logits, /*accumulate_params=*/false);
        }

        // Reparameterization: dz/dmu = 1, dz/dlogvar = (z - mu) / 2.
        auto gm = grad_mu.values();
        auto gl = grad_logvar.values();
        auto gz = grad_z.values();
        auto zv = sample.z.values();
        auto mv = work.post.mu.values();
        for (std::size_t i = 0; i < gz.size(); ++i) {
            gm[i] += gz[i];
            gl[i] += gz[i] * 0.5 * (zv[i] - mv[i]);
        }
    }

    const std::vector<double> kl = kl_standard_normal(work.post);
    kl_backward(work.post, gamma / static_cast<double>(b), grad_mu, grad_logvar);
    vae.enc.backward(work.post, grad_mu, grad_logvar);

    StepReport report;
    report.kl_term = mean(kl);
    report.recon_term = recon_sum / static_cast<double>(k);
    report.elbo_term = report.recon_term - gamma * report.kl_term;
    report.adversary_ce = lambda > 0.0 ? ce_sum / static_cast<double>(k) : 0.0;
    if (!std::isfinite(report.elbo_term))
        throw NumericError("vae objective: non-finite loss");
    return report;
}

StepReport elbo_batch(Vae& vae, const mnist::Batch& batch, double gamma, Rng& noise) {
    BatchWork work = encode_and_sample(vae.enc, batch, noise);
    return vae_objective_pass(vae, batch, work, 0.0, gamma, noise);
}

StepReport censored_vae_batch(Vae& vae, const mnist::Batch& batch, double lambda, Rng& noise) {
    BatchWork work = encode_and_sample(vae.enc, batch, noise);
    return vae_objective_pass(vae, batch, work, lambda, 1.0, noise);
}

double adversary_batch(AdversaryNet& adv, const Tensor& z_detached,
                       const std::vector<std::size_t>& s) {
    Tensor logits = adv.logits(z_detached);
    CrossEntropyResult ce = softmax_cross_entropy(logits, s);
    ce.grad_logits *= 1.0 / static_cast<double>(z_detached.rows());
    adv.backward(ce.grad_logits);
    return mean(ce.loss);
}

std::vector<MetricsRecord> train(Vae& vae, const TrainingConfig& tc,
                                 const mnist::Dataset& train_ds, const mnist::Dataset& test_ds,
                                 std::ostream* metrics_csv, std::ostream* log) {
    vae.cfg.validate();
    Rng root(tc.seed);
    Rng init_rng = root.substream("init");
    Rng shuffle_rng = root.substream("shuffle");
    Rng noise_rng = root.substream("noise");
    Rng eval_rng = root.substream("eval");

    vae.init(init_rng);

    const double gamma = vae.cfg.censor == CensorMode::Kl ? vae.cfg.gamma : 1.0;
    const double lambda = vae.cfg.censor == CensorMode::Adversarial ? vae.cfg.lambda : 0.0;

    if (metrics_csv) write_metrics_header(*metrics_csv);

    std::vector<MetricsRecord> metrics;
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        std::size_t batch_index = 0;
        for (const mnist::Batch& batch : mnist::batches(train_ds, tc.batch_size, shuffle_rng)) {
            try {
                BatchWork work = encode_and_sample(vae.enc, batch, noise_rng);

                // Adversary step on detached z. Runs in every censor mode:
                // outside adversarial censoring this is the parallel metric
                // adversary whose gradients never reach the VAE.
                adversary_batch(vae.adv, work.sample.z, batch.s);
                vae.adv.net.adam_step(tc.adam);

                vae_objective_pass(vae, batch, work, lambda, gamma, noise_rng);
                vae.enc.net.adam_step(tc.adam);
                vae.dec.net.adam_step(tc.adam);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_index) + ")");
            }
            ++batch_index;
        }

        Rng epoch_eval = eval_rng.substream(epoch);
        MetricsRecord rec = evaluate_epoch(vae, test_ds, epoch, epoch_eval);
        if (metrics_csv) {
            write_metrics_row(*metrics_csv, rec);
            metrics_csv->flush();
        }
        if (log) {
            *log << "epoch " << epoch << "  elbo " << std::fixed << std::setprecision(3)
                 << rec.elbo << "  adv_acc " << rec.adv_acc << "  mi " << rec.mi_estimate
                 << std::defaultfloat << '\n';
            log->flush();
        }
        metrics.push_back(rec);
    }
    return metrics;
}

namespace {

constexpr char kCheckpointMagic[6] = {'A', 'C', 'V', 'A', 'E', '\x01'};

void write_block(std::ostream& os, const double* data, std::size_t count) {
    std::uint64_t n = count;
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

void read_block(std::istream& is, double* data, std::size_t expected,
                const std::string& what) {
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || n != expected)
        throw CheckpointError("checkpoint: bad block size for " + what + ", expected " +
                              std::to_string(expected) + ", got " + std::to_string(n));
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(expected * 8));
    if (!is) throw CheckpointError("checkpoint: truncated block " + what);
}

void for_each_layer(Vae& vae, const std::function<void(LinearLayer&, const std::string&)>& fn) {
    fn(vae.enc.net.l1, "enc.l1");
    fn(vae.enc.net.l2, "enc.l2");
    fn(vae.dec.net.l1, "dec.l1");
    fn(vae.dec.net.l2, "dec.l2");
    fn(vae.adv.net.l1, "adv.l1");
    fn(vae.adv.net.l2, "adv.l2");
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Vae& vae, std::uint64_t seed,
                     std::size_t epoch) {
    nlohmann::json manifest = {
        {"format_version", 1},
        {"d_x", vae.cfg.d_x},
        {"d_z", vae.cfg.d_z},
        {"d_s", vae.cfg.d_s},
        {"hidden", vae.cfg.hidden},
        {"mode", to_string(vae.cfg.mode)},
        {"censor", to_string(vae.cfg.censor)},
        {"lambda", vae.cfg.lambda},
        {"gamma", vae.cfg.gamma},
        {"k", vae.cfg.k},
        {"seed", seed},
        {"epoch", epoch},
        {"encoder_head_order", "mu_logvar"},
    };
    const std::string text = manifest.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot write " + path.string());
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    os.write(reinterpret_cast<const char*>(&len), sizeof len);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));

    for_each_layer(const_cast<Vae&>(vae), [&](LinearLayer& l, const std::string&) {
        write_block(os, l.weight().data(), l.weight().size());
        write_block(os, l.bias().data(), l.bias().size());
    });
    if (!os) throw CheckpointError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open " + path.string());
    char magic[6];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw CheckpointError("checkpoint: bad magic in " + path.string());
    std::uint32_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string text(len, '\0');
    is.read(text.data(), len);
    if (!is) throw CheckpointError("checkpoint: truncated manifest in " + path.string());

    nlohmann::json manifest = nlohmann::json::parse(text);
    if (manifest.value("format_version", 0) != 1)
        throw CheckpointError("checkpoint: unsupported format version");

    ModelConfig cfg;
    cfg.d_x = manifest.at("d_x");
    cfg.d_z = manifest.at("d_z");
    cfg.d_s = manifest.at("d_s");
    cfg.hidden = manifest.at("hidden");
    cfg.mode = conditioning_from_string(manifest.at("mode"));
    cfg.censor = censor_from_string(manifest.at("censor"));
    cfg.lambda = manifest.at("lambda");
    cfg.gamma = manifest.at("gamma");
    cfg.k = manifest.at("k");

    Checkpoint ckpt{Vae(cfg), manifest.at("seed"), manifest.at("epoch")};
    for_each_layer(ckpt.vae, [&](LinearLayer& l, const std::string& name) {
        read_block(is, l.weight().data(), l.weight().size(), name + ".weight");
        read_block(is, l.bias().data(), l.bias().size(), name + ".bias");
    });
    return ckpt;
}

} // namespace acvae
