#include "acvae/eval.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

#include "acvae/training.hpp"

namespace acvae {

namespace {

constexpr std::size_t kEvalBatch = 100;

mnist::Batch make_batch(const mnist::Dataset& ds, std::size_t begin, std::size_t count) {
    mnist::Batch b;
    b.x = Tensor(count, ds.images.cols());
    b.s.assign(ds.labels.begin() + begin, ds.labels.begin() + begin + count);
    std::memcpy(b.x.data(), ds.images.row(begin), count * ds.images.cols() * sizeof(double));
    b.s_onehot = mnist::one_hot(b.s, 10);
    return b;
}

} // namespace

double eval_elbo(EncoderNet& enc, DecoderNet& dec, const mnist::Dataset& test, Rng& rng) {
    double total = 0.0;
    for (std::size_t begin = 0; begin < test.size(); begin += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, test.size() - begin);
        mnist::Batch batch = make_batch(test, begin, count);
        GaussianPosterior post = enc.encode(batch.x, batch.s_onehot);
        LatentSample sample = reparameterize(post, rng);
        Tensor y = dec.decode(sample.z, batch.s_onehot);
        const std::vector<double> recon = bernoulli_loglik(batch.x, y);
        const std::vector<double> kl = kl_standard_normal(post);
        for (std::size_t i = 0; i < count; ++i) total += recon[i] - kl[i];
    }
    return total / static_cast<double>(test.size());
}

AdversaryEval eval_adversary(AdversaryNet& adv, EncoderNet& enc, const mnist::Dataset& test,
                             Rng& rng) {
    AdversaryEval out;
    std::size_t correct = 0;
    double ce_total = 0.0;
    for (std::size_t begin = 0; begin < test.size(); begin += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, test.size() - begin);
        mnist::Batch batch = make_batch(test, begin, count);
        GaussianPosterior post = enc.encode(batch.x, batch.s_onehot);
        LatentSample sample = reparameterize(post, rng);
        Tensor logits = adv.logits(sample.z);
        CrossEntropyResult ce = softmax_cross_entropy(logits, batch.s);
        for (std::size_t i = 0; i < count; ++i) {
            ce_total += ce.loss[i];
            if (ce.argmax[i] == batch.s[i]) ++correct;
        }
    }
    out.cross_entropy = ce_total / static_cast<double>(test.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    out.mi = mi_estimate(out.cross_entropy, 10);
    return out;
}

MetricsRecord evaluate_epoch(Vae& vae, const mnist::Dataset& test, std::size_t epoch, Rng& rng) {
    MetricsRecord rec;
    rec.epoch = epoch;
    double elbo = 0.0, recon_total = 0.0, kl_total = 0.0, ce_total = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < test.size(); begin += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, test.size() - begin);
        mnist::Batch batch = make_batch(test, begin, count);
        GaussianPosterior post = vae.enc.encode(batch.x, batch.s_onehot);
        LatentSample sample = reparameterize(post, rng);
        Tensor y = vae.dec.decode(sample.z, batch.s_onehot);
        const std::vector<double> recon = bernoulli_loglik(batch.x, y);
        const std::vector<double> kl = kl_standard_normal(post);
        Tensor logits = vae.adv.logits(sample.z);
        CrossEntropyResult ce = softmax_cross_entropy(logits, batch.s);
        for (std::size_t i = 0; i < count; ++i) {
            recon_total += recon[i];
            kl_total += kl[i];
            elbo += recon[i] - kl[i];
            ce_total += ce.loss[i];
            if (ce.argmax[i] == batch.s[i]) ++correct;
        }
    }
    const double n = static_cast<double>(test.size());
    rec.elbo = elbo / n;
    rec.recon = recon_total / n;
    rec.kl = kl_total / n;
    rec.adv_ce = ce_total / n;
    rec.adv_acc = static_cast<double>(correct) / n;
    rec.mi_estimate = mi_estimate(rec.adv_ce, 10);
    return rec;
}

void ImageGrid::set_cell(std::size_t r, std::size_t c, const double* values) {
    for (std::size_t y = 0; y < 28; ++y) {
        std::uint8_t* row = pixels.data() + (r * 28 + y) * width() + c * 28;
        for (std::size_t x = 0; x < 28; ++x) {
            const double v = std::floor(values[y * 28 + x] * 255.0 + 0.5);
            row[x] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
}

void ImageGrid::set_cell_bytes(std::size_t r, std::size_t c, const std::uint8_t* bytes) {
    for (std::size_t y = 0; y < 28; ++y)
        std::memcpy(pixels.data() + (r * 28 + y) * width() + c * 28, bytes + y * 28, 28);
}

ImageGrid style_transfer_grid(EncoderNet& enc, DecoderNet& dec, const mnist::Dataset& examples,
                              Rng& rng) {
    if (dec.cfg.mode == ConditioningMode::Basic)
        throw std::invalid_argument("style transfer requires a decoder conditioned on s");
    const std::size_t n = examples.size();
    mnist::Batch batch = make_batch(examples, 0, n);

    GaussianPosterior post = enc.encode(batch.x, batch.s_onehot);
    LatentSample sample = reparameterize(post, rng);

    ImageGrid grid(11, n);
    for (std::size_t c = 0; c < n; ++c) grid.set_cell(0, c, batch.x.row(c));
    for (std::size_t digit = 0; digit < 10; ++digit) {
        Tensor forced = mnist::one_hot(std::vector<std::size_t>(n, digit), 10);
        Tensor y = dec.decode(sample.z, forced);
        for (std::size_t c = 0; c < n; ++c) grid.set_cell(digit + 1, c, y.row(c));
    }
    return grid;
}

ImageGrid sampling_grid(DecoderNet& dec, Rng& rng, std::size_t rows, std::size_t cols) {
    ImageGrid grid(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        Tensor z(cols, dec.cfg.d_z);
        for (double& v : z.values()) v = rng.normal();
        std::vector<std::size_t> digits(cols);
        for (std::size_t c = 0; c < cols; ++c) digits[c] = c % 10;
        Tensor y = dec.decode(z, mnist::one_hot(digits, 10));
        for (std::size_t c = 0; c < cols; ++c) grid.set_cell(r, c, y.row(c));
    }
    return grid;
}

void write_pgm(const ImageGrid& grid, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "P5\n" << grid.width() << " " << grid.height() << "\n255\n";
    os.write(reinterpret_cast<const char*>(grid.pixels.data()),
             static_cast<std::streamsize>(grid.pixels.size()));
    if (!os) throw std::runtime_error("write failure on " + path.string());
}

std::vector<SweepCell> default_sweep_grid() {
    std::vector<SweepCell> cells;
    for (ConditioningMode mode : {ConditioningMode::Full, ConditioningMode::Partial}) {
        cells.push_back({mode, CensorMode::None, 0.0});
        for (double lambda : {1.0, 2.0, 5.0, 10.0, 20.0})
            cells.push_back({mode, CensorMode::Adversarial, lambda});
        for (double gamma : {2.0, 4.0, 8.0})
            cells.push_back({mode, CensorMode::Kl, gamma});
    }
    cells.push_back({ConditioningMode::Basic, CensorMode::None, 0.0});
    for (double lambda : {10.0, 20.0, 50.0, 100.0})
        cells.push_back({ConditioningMode::Basic, CensorMode::Adversarial, lambda});
    for (double gamma : {10.0, 20.0, 50.0})
        cells.push_back({ConditioningMode::Basic, CensorMode::Kl, gamma});
    return cells;
}

void tradeoff_sweep(const std::vector<SweepCell>& cells, const mnist::Dataset& train_ds,
                    const mnist::Dataset& test_ds, const TrainingConfig& tc, std::ostream& csv,
                    std::ostream* log) {
    csv << "mode,censor,param,elbo,adv_acc,adv_ce,mi_estimate,seed,epochs\n";
    for (const SweepCell& cell : cells) {
        ModelConfig cfg;
        cfg.mode = cell.mode;
        cfg.censor = cell.censor;
        if (cell.censor == CensorMode::Adversarial) cfg.lambda = cell.param;
        if (cell.censor == CensorMode::Kl) cfg.gamma = cell.param;
        try {
            Vae vae(cfg);
            std::vector<MetricsRecord> metrics = train(vae, tc, train_ds, test_ds, nullptr, log);
            const MetricsRecord& last = metrics.back();
            csv << to_string(cell.mode) << ',' << to_string(cell.censor) << ','
                << std::setprecision(17) << cell.param << ',' << last.elbo << ',' << last.adv_acc
                << ',' << last.adv_ce << ',' << last.mi_estimate << ',' << tc.seed << ','
                << tc.epochs << '\n';
        } catch (const std::exception& e) {
            csv << to_string(cell.mode) << ',' << to_string(cell.censor) << ',' << cell.param
                << ",ERROR,ERROR,ERROR,ERROR," << tc.seed << ',' << tc.epochs << '\n';
            if (log) *log << "sweep cell failed: " << e.what() << '\n';
        }
        csv.flush();
    }
}

} // namespace acvae
