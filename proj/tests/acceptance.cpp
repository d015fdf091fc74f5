// Acceptance suite. Three scales:
//   --scale fast   property criteria (gradients, KL oracle, identities,
//                  parser, determinism); seconds, no real training.
//   --scale smoke  reduced training criteria: 10 epochs on a 6,000-image
//                  subset; rank ordering of baseline adversary accuracies
//                  plus the lambda=20 censoring drop.
//   --scale full   the 100-epoch quantitative criteria. Reads finalized run
//                  directories (acvae sweep output) via --runs DIR when
//                  given, otherwise trains in-process (hours of CPU).
// Prints one PASS/FAIL line per criterion; exit code = number of failures.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "acvae/eval.hpp"
#include "acvae/mnist.hpp"
#include "acvae/training.hpp"

using namespace acvae;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name;
    if (!detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << std::endl;
    if (!pass) ++failures;
}

std::optional<fs::path> mnist_dir(const std::string& override_dir) {
    if (!override_dir.empty()) return fs::path(override_dir);
    if (const char* env = std::getenv("ACVAE_MNIST_DIR"))
        if (fs::exists(env)) return fs::path(env);
    for (const char* candidate : {"data/mnist", "../data/mnist", "/root/data/mnist"})
        if (fs::exists(fs::path(candidate) / "train-images-idx3-ubyte") ||
            fs::exists(fs::path(candidate) / "train-images-idx3-ubyte.gz"))
            return fs::path(candidate);
    return std::nullopt;
}

ModelConfig tiny_config(ConditioningMode mode, CensorMode censor = CensorMode::None,
                        double lambda = 0.0, double gamma = 1.0) {
    ModelConfig cfg;
    cfg.d_x = 12;
    cfg.d_z = 4;
    cfg.hidden = 16;
    cfg.mode = mode;
    cfg.censor = censor;
    cfg.lambda = lambda;
    cfg.gamma = gamma;
    return cfg;
}

mnist::Dataset synthetic_dataset(std::size_t n, std::size_t d_x, std::uint64_t seed) {
    Rng rng(seed);
    mnist::Dataset ds;
    ds.images = Tensor(n, d_x);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = rng.below(10);
        for (std::size_t j = 0; j < d_x; ++j) ds.images(i, j) = rng.uniform();
    }
    return ds;
}

std::vector<double> flatten_params(const Vae& vae) {
    std::vector<double> out;
    for (const LinearLayer* l : {&vae.enc.net.l1, &vae.enc.net.l2, &vae.dec.net.l1,
                                 &vae.dec.net.l2, &vae.adv.net.l1, &vae.adv.net.l2})
        for (std::size_t i = 0; i < l->param_count(); ++i) out.push_back(l->param(i));
    return out;
}

// ---------------------------------------------------------------- fast ---

void criterion7_gradients() {
    // Every layer type plus each composite objective against central finite
    // differences at relative error <= 1e-5.
    double worst = 0.0;

    { // linear + tanh + sigmoid stack
        Rng rng(101);
        LinearLayer l1(6, 5), l2(5, 3);
        l1.init(rng);
        l2.init(rng);
        TanhLayer t;
        SigmoidLayer s;
        Tensor x(4, 6);
        for (double& v : x.values()) v = rng.uniform();
        auto loss = [&] {
            Tensor h = s.forward(l2.forward(t.forward(l1.forward(x))));
            double total = 0.0;
            for (double v : h.values()) total += v * v;
            Tensor g(h.rows(), h.cols());
            for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = 2.0 * h.values()[i];
            l1.backward(t.backward(l2.backward(s.backward(g))));
            return total;
        };
        std::array<LinearLayer*, 2> layers{&l1, &l2};
        worst = std::max(worst, gradient_check(layers, loss, rng, 120));
    }

    // Composite objectives: baseline (gamma=1, lambda=0), KL-censored
    // (gamma=4), adversarially censored (lambda=5), all with frozen eps.
    const mnist::Dataset ds = synthetic_dataset(6, 12, 9);
    mnist::Batch batch;
    batch.x = ds.images;
    batch.s = ds.labels;
    batch.s_onehot = mnist::one_hot(batch.s, 10);

    struct Case {
        double lambda, gamma;
    };
    for (const auto [lambda, gamma] : {Case{0.0, 1.0}, Case{0.0, 4.0}, Case{5.0, 1.0}}) {
        Vae vae(tiny_config(ConditioningMode::Full));
        Rng init(31);
        vae.init(init);
        Tensor eps(batch.x.rows(), vae.cfg.d_z);
        Rng nz(32);
        for (double& v : eps.values()) v = nz.normal();

        auto loss = [&, lambda = lambda, gamma = gamma] {
            GaussianPosterior post = vae.enc.encode(batch.x, batch.s_onehot);
            LatentSample sample = reparameterize_with(post, eps);
            BatchWork work{std::move(post), std::move(sample)};
            Rng unused(0);
            StepReport rep = vae_objective_pass(vae, batch, work, lambda, gamma, unused);
            return gamma * rep.kl_term - rep.recon_term - lambda * rep.adversary_ce;
        };
        std::array<LinearLayer*, 4> layers{&vae.enc.net.l1, &vae.enc.net.l2, &vae.dec.net.l1,
                                           &vae.dec.net.l2};
        Rng pick(33);
        worst = std::max(worst, gradient_check(layers, loss, pick, 120));
    }

    report("criterion 7: gradient suite (layers + ELBO/adv/KL objectives, frozen eps) <= 1e-5",
           worst <= 1e-5, "worst rel err " + std::to_string(worst));
}

void criterion8_kl_oracle() {
    // Analytic KL vs a 1e6-draw Monte-Carlo estimate on 20 random posteriors.
    Rng mk(201);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 4;
        Tensor mu(1, d), logvar(1, d);
        for (double& v : mu.values()) v = 2.0 * mk.uniform() - 1.0;
        for (double& v : logvar.values()) v = 2.0 * mk.uniform() - 1.0;
        GaussianPosterior post(mu, logvar);
        const double analytic = kl_standard_normal(post)[0];

        Rng rng(300 + trial);
        const int n = 1000000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d; ++k) {
                const double lv = post.logvar(0, k);
                const double m = post.mu(0, k);
                const double z = m + std::exp(0.5 * lv) * rng.normal();
                // log q - log p; the 2*pi terms cancel
                acc += -0.5 * lv - 0.5 * (z - m) * (z - m) * std::exp(-lv) + 0.5 * z * z;
            }
        }
        const double mc = acc / n;
        worst = std::max(worst, std::fabs(mc - analytic) / std::max(analytic, 1e-6));
    }
    report("criterion 8: analytic KL vs 1e6-draw Monte Carlo within 1% (20 posteriors)",
           worst < 0.01, "worst rel dev " + std::to_string(worst));
}

void criterion9_reduction_identities() {
    const mnist::Dataset ds = synthetic_dataset(40, 12, 5);
    const mnist::Dataset test = synthetic_dataset(20, 12, 6);
    TrainingConfig tc;
    tc.epochs = 2;
    tc.batch_size = 10;
    tc.seed = 77;

    auto run = [&](CensorMode censor, double lambda, double gamma) {
        Vae vae(tiny_config(ConditioningMode::Full, censor, lambda, gamma));
        train(vae, tc, ds, test);
        return flatten_params(vae);
    };
    const auto baseline = run(CensorMode::None, 0.0, 1.0);
    const bool ok = baseline == run(CensorMode::Adversarial, 0.0, 1.0) &&
                    baseline == run(CensorMode::Kl, 0.0, 1.0);
    report("criterion 9: lambda=0 == gamma=1 == baseline, bitwise", ok);
}

void criterion10_mi_identity() {
    mnist::Dataset train_ds = synthetic_dataset(100, 784, 41);
    mnist::Dataset test_ds = synthetic_dataset(50, 784, 42);
    TrainingConfig tc;
    tc.epochs = 1;
    tc.batch_size = 50;
    tc.seed = 4;
    std::vector<SweepCell> cells{
        {ConditioningMode::Full, CensorMode::None, 0.0},
        {ConditioningMode::Basic, CensorMode::Adversarial, 2.0},
        {ConditioningMode::Partial, CensorMode::Kl, 2.0},
    };
    std::ostringstream csv;
    tradeoff_sweep(cells, train_ds, test_ds, tc, csv);

    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line); // header
    bool ok = true;
    int rows = 0;
    while (std::getline(lines, line)) {
        std::istringstream fields(line);
        std::string f;
        std::vector<std::string> v;
        while (std::getline(fields, f, ',')) v.push_back(f);
        const double adv_ce = std::stod(v[5]);
        const double mi = std::stod(v[6]);
        ok = ok && std::fabs(mi - (std::log(10.0) - adv_ce)) < 1e-12;
        ++rows;
    }
    report("criterion 10: mi_estimate == ln 10 - adv_ce to 1e-12 in all CSV rows",
           ok && rows == 3);
}

void criterion11_idx_parser() {
    bool ok = true;
    // hand-assembled fixture
    const std::vector<std::uint8_t> img{0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2,
                                        0, 0, 0, 2, 0, 128, 255, 64};
    try {
        mnist::RawImages parsed = mnist::parse_idx_images(img);
        ok = ok && parsed.count == 1 && parsed.rows == 2 && parsed.cols == 2 &&
             parsed.pixels == std::vector<std::uint8_t>{0, 128, 255, 64};
    } catch (...) {
        ok = false;
    }

    auto expect_throw = [&](auto fn, auto tag) {
        try {
            fn();
            return false;
        } catch (const std::decay_t<decltype(tag)>&) {
            return true;
        } catch (...) {
            return false;
        }
    };

    auto bad_magic = img;
    bad_magic[3] = 1;
    ok = ok && expect_throw([&] { mnist::parse_idx_images(bad_magic); }, mnist::BadMagic{0});
    auto truncated = img;
    truncated[7] = 2;
    ok = ok && expect_throw([&] { mnist::parse_idx_images(truncated); },
                            mnist::TruncatedFile{0, 0});
    std::vector<std::uint8_t> labels{0, 0, 8, 1, 0, 0, 0, 2, 5, 12};
    ok = ok && expect_throw([&] { mnist::parse_idx_labels(labels); },
                            mnist::LabelOutOfRange{0, 0});

    // write -> read round trip
    mnist::RawImages imgs;
    imgs.count = 2;
    imgs.rows = 3;
    imgs.cols = 2;
    imgs.pixels = {9, 8, 7, 6, 5, 4, 3, 2, 1, 0, 11, 13};
    mnist::RawImages back = mnist::parse_idx_images(mnist::serialize_idx_images(imgs));
    ok = ok && back.pixels == imgs.pixels && back.rows == 3;
    std::vector<std::uint8_t> lbl{1, 2, 3};
    ok = ok && mnist::parse_idx_labels(mnist::serialize_idx_labels(lbl)) == lbl;

    report("criterion 11: IDX fixtures, error classes, round-trip identity", ok);
}

void criterion12_determinism(const std::optional<fs::path>& data_dir) {
    mnist::Dataset train_ds, test_ds;
    if (data_dir) {
        mnist::MnistData data = mnist::load_dir(*data_dir);
        train_ds = data.train.subset(1000);
        test_ds = data.test.subset(300);
    } else {
        train_ds = synthetic_dataset(500, 784, 61);
        test_ds = synthetic_dataset(200, 784, 62);
    }

    auto run = [&] {
        ModelConfig cfg;
        cfg.mode = ConditioningMode::Full;
        Vae vae(cfg);
        TrainingConfig tc;
        tc.epochs = 1;
        tc.batch_size = 100;
        tc.seed = 12;
        std::ostringstream csv;
        train(vae, tc, train_ds, test_ds, &csv);

        Rng grid_rng = Rng(99).substream("sample");
        ImageGrid sample = sampling_grid(vae.dec, grid_rng, 4);
        Rng transfer_rng = Rng(98).substream("sample");
        ImageGrid transfer =
            style_transfer_grid(vae.enc, vae.dec, test_ds.subset(6), transfer_rng);
        return std::tuple(csv.str(), sample.pixels, transfer.pixels);
    };
    const auto a = run();
    const auto b = run();
    report("criterion 12: identical flags+seed give identical CSV and PGM bytes", a == b);
}

// --------------------------------------------------------------- smoke ---

struct RunOutcome {
    MetricsRecord final;
    std::string name;
};

RunOutcome train_cell(const mnist::Dataset& train_ds, const mnist::Dataset& test_ds,
                      ConditioningMode mode, CensorMode censor, double param,
                      std::size_t epochs, std::uint64_t seed, bool verbose) {
    ModelConfig cfg;
    cfg.mode = mode;
    cfg.censor = censor;
    if (censor == CensorMode::Adversarial) cfg.lambda = param;
    if (censor == CensorMode::Kl) cfg.gamma = param;
    TrainingConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 100;
    tc.seed = seed;
    Vae vae(cfg);
    std::string name = to_string(mode) + "-" + to_string(censor);
    if (censor != CensorMode::None) name += "-" + std::to_string(param);
    if (verbose) std::cout << "training " << name << " (" << epochs << " epochs)" << std::endl;
    auto metrics = train(vae, tc, train_ds, test_ds, nullptr, verbose ? &std::cerr : nullptr);
    return {metrics.back(), name};
}

void run_smoke(const fs::path& data_dir) {
    mnist::MnistData data = mnist::load_dir(data_dir);
    mnist::Dataset train_ds = data.train.subset(6000);
    const std::size_t epochs = 10;
    const std::uint64_t seed = 1;

    RunOutcome basic = train_cell(train_ds, data.test, ConditioningMode::Basic,
                                  CensorMode::None, 0.0, epochs, seed, true);
    RunOutcome partial = train_cell(train_ds, data.test, ConditioningMode::Partial,
                                    CensorMode::None, 0.0, epochs, seed, true);
    RunOutcome full = train_cell(train_ds, data.test, ConditioningMode::Full,
                                 CensorMode::None, 0.0, epochs, seed, true);
    RunOutcome censored = train_cell(train_ds, data.test, ConditioningMode::Full,
                                     CensorMode::Adversarial, 20.0, epochs, seed, true);

    std::ostringstream detail;
    detail << "basic " << basic.final.adv_acc << ", partial " << partial.final.adv_acc
           << ", full " << full.final.adv_acc << ", full+adv20 " << censored.final.adv_acc;

    report("criteria 1-3/6 (smoke): adv_acc(basic) > adv_acc(partial) > adv_acc(full)",
           basic.final.adv_acc > partial.final.adv_acc &&
               partial.final.adv_acc > full.final.adv_acc,
           detail.str());
    report("criterion 4 (smoke): lambda=20 cuts adversary accuracy by >= 25 points",
           full.final.adv_acc - censored.final.adv_acc >= 0.25,
           "drop " + std::to_string(full.final.adv_acc - censored.final.adv_acc));
}

// ---------------------------------------------------------------- full ---

std::optional<MetricsRecord> load_final_metrics(const fs::path& run_dir) {
    const fs::path manifest_path = run_dir / "manifest.json";
    if (!fs::exists(manifest_path)) return std::nullopt;
    try {
        std::ifstream is(manifest_path);
        nlohmann::json m = nlohmann::json::parse(is);
        if (m.value("status", "") != "complete") return std::nullopt;
        MetricsRecord rec;
        rec.elbo = m.at("final").at("elbo");
        rec.adv_acc = m.at("final").at("adv_acc");
        rec.adv_ce = m.at("final").at("adv_ce");
        rec.mi_estimate = m.at("final").at("mi_estimate");
        return rec;
    } catch (...) {
        return std::nullopt;
    }
}

void run_full(const fs::path& data_dir, const std::string& runs_dir) {
    struct Cell {
        const char* dir;
        ConditioningMode mode;
        CensorMode censor;
        double param;
    };
    const std::vector<Cell> cells{
        {"basic-none", ConditioningMode::Basic, CensorMode::None, 0.0},
        {"partial-none", ConditioningMode::Partial, CensorMode::None, 0.0},
        {"full-none", ConditioningMode::Full, CensorMode::None, 0.0},
        {"full-adv-20", ConditioningMode::Full, CensorMode::Adversarial, 20.0},
        {"basic-adv-50", ConditioningMode::Basic, CensorMode::Adversarial, 50.0},
        {"basic-adv-100", ConditioningMode::Basic, CensorMode::Adversarial, 100.0},
    };

    std::map<std::string, MetricsRecord> results;
    std::optional<mnist::MnistData> data;
    for (const Cell& cell : cells) {
        std::optional<MetricsRecord> rec;
        if (!runs_dir.empty()) rec = load_final_metrics(fs::path(runs_dir) / cell.dir);
        if (!rec) {
            if (!data) data = mnist::load_dir(data_dir);
            rec = train_cell(data->train, data->test, cell.mode, cell.censor, cell.param, 100,
                             1, true)
                      .final;
        }
        results[cell.dir] = *rec;
        std::cout << cell.dir << ": elbo " << rec->elbo << ", adv_acc " << rec->adv_acc
                  << ", mi " << rec->mi_estimate << std::endl;
    }

    const MetricsRecord& basic = results["basic-none"];
    const MetricsRecord& partial = results["partial-none"];
    const MetricsRecord& full = results["full-none"];
    const MetricsRecord& full20 = results["full-adv-20"];
    const MetricsRecord& basic50 = results["basic-adv-50"];
    const MetricsRecord& basic100 = results["basic-adv-100"];

    report("criterion 1: basic baseline adv_acc in [0.94, 0.99] (reference 0.971)",
           basic.adv_acc >= 0.94 && basic.adv_acc <= 0.99,
           "adv_acc " + std::to_string(basic.adv_acc));
    report("criterion 2: partial baseline adv_acc in [0.78, 0.90] (reference 0.841)",
           partial.adv_acc >= 0.78 && partial.adv_acc <= 0.90,
           "adv_acc " + std::to_string(partial.adv_acc));
    report("criterion 3: full baseline adv_acc in [0.68, 0.82] (reference 0.751)",
           full.adv_acc >= 0.68 && full.adv_acc <= 0.82,
           "adv_acc " + std::to_string(full.adv_acc));
    report("criterion 4: full lambda=20 adv_acc <= 0.25, MI <= 0.3, ELBO within 30 nats",
           full20.adv_acc <= 0.25 && full20.mi_estimate <= 0.3 &&
               full.elbo - full20.elbo <= 30.0,
           "adv_acc " + std::to_string(full20.adv_acc) + ", mi " +
               std::to_string(full20.mi_estimate) + ", elbo drop " +
               std::to_string(full.elbo - full20.elbo));
    report("criterion 5: basic lambda in {50,100} degrades ELBO by >= 50 nats",
           basic.elbo - basic50.elbo >= 50.0 && basic.elbo - basic100.elbo >= 50.0,
           "drops " + std::to_string(basic.elbo - basic50.elbo) + ", " +
               std::to_string(basic.elbo - basic100.elbo));
    report("criterion 6: adv_acc(basic) > adv_acc(partial) > adv_acc(full)",
           basic.adv_acc > partial.adv_acc && partial.adv_acc > full.adv_acc);
}

} // namespace

int main(int argc, char** argv) {
    std::string scale = "fast";
    std::string data_override;
    std::string runs_dir;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&] { return std::string(i + 1 < argc ? argv[++i] : ""); };
        if (arg == "--scale") scale = next();
        else if (arg == "--mnist") data_override = next();
        else if (arg == "--runs") runs_dir = next();
        else {
            std::cerr << "usage: acceptance [--scale fast|smoke|full] [--mnist DIR] "
                         "[--runs DIR]\n";
            return 64;
        }
    }

    const std::optional<fs::path> data = mnist_dir(data_override);

    if (scale == "fast") {
        criterion7_gradients();
        criterion8_kl_oracle();
        criterion9_reduction_identities();
        criterion10_mi_identity();
        criterion11_idx_parser();
        criterion12_determinism(data);
    } else if (scale == "smoke" || scale == "full") {
        if (!data) {
            std::cerr << "MNIST data required: set ACVAE_MNIST_DIR or pass --mnist DIR\n";
            return 65;
        }
        if (scale == "smoke")
            run_smoke(*data);
        else
            run_full(*data, runs_dir);
    } else {
        std::cerr << "unknown scale " << scale << '\n';
        return 64;
    }

    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(failures))
              << std::endl;
    return failures;
}
