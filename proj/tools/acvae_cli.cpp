#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "acvae/eval.hpp"
#include "acvae/mnist.hpp"
#include "acvae/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFlags = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitCheckpoint = 5;

constexpr const char* kVersion = "acvae 0.1.0";

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

struct RunFlags {
    std::string mode = "full";
    std::string censor = "none";
    double lambda = 0.0;
    double gamma = 1.0;
    std::size_t k = 1;
    std::size_t epochs = 100;
    std::size_t batch = 100;
    std::uint64_t seed = 1;
    std::size_t subset = 0; // 0 = all
    std::string data_dir;
    std::string out_dir;
    bool quiet = false;
};

json config_json(const acvae::ModelConfig& cfg, const acvae::TrainingConfig& tc) {
    return {
        {"mode", acvae::to_string(cfg.mode)}, {"censor", acvae::to_string(cfg.censor)},
        {"lambda", cfg.lambda},               {"gamma", cfg.gamma},
        {"k", cfg.k},                         {"d_x", cfg.d_x},
        {"d_z", cfg.d_z},                     {"d_s", cfg.d_s},
        {"hidden", cfg.hidden},               {"epochs", tc.epochs},
        {"batch_size", tc.batch_size},        {"seed", tc.seed},
        {"adam_lr", tc.adam.lr},              {"adam_beta1", tc.adam.beta1},
        {"adam_beta2", tc.adam.beta2},        {"adam_eps", tc.adam.eps},
    };
}

void write_json_atomic(const fs::path& path, const json& j) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp);
        os << j.dump(2) << '\n';
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

acvae::ModelConfig model_config_from(const RunFlags& f) {
    acvae::ModelConfig cfg;
    cfg.mode = acvae::conditioning_from_string(f.mode);
    cfg.censor = acvae::censor_from_string(f.censor);
    cfg.lambda = f.lambda;
    cfg.gamma = f.gamma;
    cfg.k = f.k;
    cfg.validate();
    return cfg;
}

// Trains one run into out_dir, writing manifest.json, metrics.csv, and
// checkpoint.acvae. Returns the final-epoch metrics.
acvae::MetricsRecord run_training(const RunFlags& f, const acvae::mnist::MnistData& data,
                                  std::ostream* log) {
    const acvae::ModelConfig cfg = model_config_from(f);
    acvae::TrainingConfig tc;
    tc.epochs = f.epochs;
    tc.batch_size = f.batch;
    tc.seed = f.seed;

    const fs::path out(f.out_dir);
    fs::create_directories(out);

    json manifest = {
        {"version", kVersion},
        {"config", config_json(cfg, tc)},
        {"seed", f.seed},
        {"subset", f.subset},
        {"started", timestamp_utc()},
        {"status", "running"},
        {"artifacts",
         {{"checkpoint", "checkpoint.acvae"}, {"metrics", "metrics.csv"}}},
    };
    write_json_atomic(out / "manifest.json", manifest);

    const acvae::mnist::Dataset train_ds =
        f.subset > 0 ? data.train.subset(f.subset) : data.train;

    acvae::Vae vae(cfg);
    std::ofstream metrics(out / "metrics.csv");
    const std::vector<acvae::MetricsRecord> recs =
        acvae::train(vae, tc, train_ds, data.test, &metrics, log);

    acvae::save_checkpoint(out / "checkpoint.acvae", vae, f.seed, tc.epochs);

    manifest["status"] = "complete";
    manifest["finished"] = timestamp_utc();
    manifest["final"] = {{"elbo", recs.back().elbo},
                         {"adv_acc", recs.back().adv_acc},
                         {"adv_ce", recs.back().adv_ce},
                         {"mi_estimate", recs.back().mi_estimate}};
    write_json_atomic(out / "manifest.json", manifest);
    return recs.back();
}

int cmd_train(const RunFlags& f) {
    const acvae::mnist::MnistData data = acvae::mnist::load_dir(f.data_dir);
    const acvae::MetricsRecord last = run_training(f, data, f.quiet ? nullptr : &std::cerr);
    std::cout << "final: elbo=" << last.elbo << " adv_acc=" << last.adv_acc
              << " mi=" << last.mi_estimate << '\n';
    return 0;
}

struct SweepCellSpec {
    acvae::SweepCell cell;
    std::string dir_name;
};

std::vector<SweepCellSpec> sweep_cells(const std::string& grid_file) {
    std::vector<acvae::SweepCell> cells;
    if (grid_file.empty()) {
        cells = acvae::default_sweep_grid();
    } else {
        std::ifstream is(grid_file);
        if (!is) throw std::runtime_error("cannot open grid file " + grid_file);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string mode, censor;
            double param = 0.0;
            if (!(ls >> mode >> censor) || (censor != "none" && !(ls >> param)))
                throw std::runtime_error("bad grid line: " + line);
            cells.push_back({acvae::conditioning_from_string(mode),
                             acvae::censor_from_string(censor), param});
        }
    }
    std::vector<SweepCellSpec> specs;
    for (const auto& c : cells) {
        std::ostringstream name;
        name << acvae::to_string(c.mode) << "-" << acvae::to_string(c.censor);
        if (c.censor != acvae::CensorMode::None) name << "-" << c.param;
        specs.push_back({c, name.str()});
    }
    return specs;
}

int cmd_sweep(const RunFlags& base, const std::string& grid_file, std::size_t jobs) {
    const acvae::mnist::MnistData data = acvae::mnist::load_dir(base.data_dir);
    const std::vector<SweepCellSpec> specs = sweep_cells(grid_file);
    const fs::path out(base.out_dir);
    fs::create_directories(out);

    std::mutex io_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> succeeded{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            const SweepCellSpec& spec = specs[i];
            const fs::path cell_dir = out / spec.dir_name;

            // Resumable: a finalized manifest means this cell is done.
            const fs::path manifest_path = cell_dir / "manifest.json";
            if (fs::exists(manifest_path)) {
                try {
                    json m = json::parse(std::ifstream(manifest_path));
                    if (m.value("status", "") == "complete") {
                        std::lock_guard lock(io_mutex);
                        std::cerr << "skip " << spec.dir_name << " (already complete)\n";
                        ++succeeded;
                        continue;
                    }
                } catch (...) {
                }
            }

            RunFlags f = base;
            f.mode = acvae::to_string(spec.cell.mode);
            f.censor = acvae::to_string(spec.cell.censor);
            f.lambda = spec.cell.censor == acvae::CensorMode::Adversarial ? spec.cell.param : 0.0;
            f.gamma = spec.cell.censor == acvae::CensorMode::Kl ? spec.cell.param : 1.0;
            f.out_dir = cell_dir.string();
            try {
                run_training(f, data, nullptr);
                std::lock_guard lock(io_mutex);
                std::cerr << "done " << spec.dir_name << '\n';
                ++succeeded;
            } catch (const std::exception& e) {
                std::lock_guard lock(io_mutex);
                std::cerr << "FAILED " << spec.dir_name << ": " << e.what() << '\n';
            }
        }
    };

    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::max<std::size_t>(jobs, 1); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // Consolidated CSV from each cell's final metrics (ERROR rows for failures).
    std::ofstream csv(out / "sweep.csv");
    csv << "mode,censor,param,elbo,adv_acc,adv_ce,mi_estimate,seed,epochs\n";
    for (const SweepCellSpec& spec : specs) {
        csv << acvae::to_string(spec.cell.mode) << ',' << acvae::to_string(spec.cell.censor)
            << ',' << spec.cell.param << ',';
        try {
            json m = json::parse(std::ifstream(out / spec.dir_name / "manifest.json"));
            if (m.at("status") != "complete") throw std::runtime_error("incomplete");
            const json& fin = m.at("final");
            csv << std::setprecision(17) << fin.at("elbo").get<double>() << ','
                << fin.at("adv_acc").get<double>() << ',' << fin.at("adv_ce").get<double>() << ','
                << fin.at("mi_estimate").get<double>();
        } catch (...) {
            csv << "ERROR,ERROR,ERROR,ERROR";
        }
        csv << ',' << base.seed << ',' << base.epochs << '\n';
    }
    return succeeded > 0 ? 0 : 1;
}

int cmd_generate(const std::string& checkpoint_path, const std::string& task,
                 std::uint64_t seed, const std::string& out_dir, const std::string& data_dir,
                 std::size_t rows, std::size_t examples) {
    acvae::Checkpoint ckpt = acvae::load_checkpoint(checkpoint_path);
    const fs::path out(out_dir);
    fs::create_directories(out / "grids");
    acvae::Rng rng = acvae::Rng(seed).substream("sample");

    fs::path grid_path;
    json sidecar = {{"checkpoint", checkpoint_path},
                    {"seed", seed},
                    {"task", task},
                    {"mode", acvae::to_string(ckpt.vae.cfg.mode)}};

    if (task == "transfer") {
        if (ckpt.vae.cfg.mode == acvae::ConditioningMode::Basic) {
            std::cerr << "error: style transfer needs a decoder conditioned on s; "
                         "this checkpoint is basic mode\n";
            return kExitFlags;
        }
        const acvae::mnist::MnistData data = acvae::mnist::load_dir(data_dir);
        const acvae::mnist::Dataset ex = data.test.subset(examples);
        acvae::ImageGrid grid = acvae::style_transfer_grid(ckpt.vae.enc, ckpt.vae.dec, ex, rng);
        grid_path = out / "grids" / "transfer.pgm";
        acvae::write_pgm(grid, grid_path);
        sidecar["examples"] = examples;
        sidecar["digit_classes"] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    } else { // sample
        acvae::ImageGrid grid = acvae::sampling_grid(ckpt.vae.dec, rng, rows);
        grid_path = out / "grids" / "sample.pgm";
        acvae::write_pgm(grid, grid_path);
        sidecar["rows"] = rows;
        sidecar["digit_classes"] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    }
    write_json_atomic(grid_path.string() + ".json", sidecar);
    std::cout << grid_path.string() << '\n';
    return 0;
}

int cmd_verify_data(const std::string& data_dir) {
    const acvae::mnist::MnistData data = acvae::mnist::load_dir(data_dir);
    std::vector<std::size_t> hist(10, 0);
    for (std::size_t l : data.train.labels) ++hist[l];
    std::cout << "train=" << data.train.size() << " test=" << data.test.size() << '\n';
    std::cout << "train class histogram:";
    for (std::size_t c = 0; c < 10; ++c) std::cout << ' ' << c << ':' << hist[c];
    std::cout << '\n';
    return (data.train.size() == 60000 && data.test.size() == 10000) ? 0 : kExitData;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional VAE with adversarial and KL-weight censoring"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    RunFlags f;
    std::string grid_file;
    std::size_t jobs = 1;

    auto add_run_flags = [&](CLI::App* cmd, bool with_model) {
        if (with_model) {
            cmd->add_option("--mode", f.mode)->check(CLI::IsMember({"full", "partial", "basic"}));
            cmd->add_option("--censor", f.censor)->check(CLI::IsMember({"none", "adv", "kl"}));
            cmd->add_option("--lambda", f.lambda, "adversarial censoring weight");
            cmd->add_option("--gamma", f.gamma, "KL censoring weight");
            cmd->add_option("--k", f.k, "samples per item");
        }
        cmd->add_option("--epochs", f.epochs);
        cmd->add_option("--batch", f.batch);
        cmd->add_option("--seed", f.seed);
        cmd->add_option("--subset", f.subset, "train on the first N images only");
        cmd->add_option("--data", f.data_dir, "MNIST directory")->required();
        cmd->add_option("--out", f.out_dir, "output directory")->required();
        cmd->add_flag("--quiet", f.quiet);
    };

    CLI::App* train = app.add_subcommand("train", "train a single model");
    add_run_flags(train, true);

    CLI::App* sweep = app.add_subcommand("sweep", "run the tradeoff sweep grid");
    add_run_flags(sweep, false);
    sweep->add_option("--grid", grid_file, "grid file: 'mode censor [param]' per line");
    sweep->add_option("--jobs", jobs, "concurrent runs");

    std::string ckpt_path, task = "sample", gen_out, gen_data;
    std::uint64_t gen_seed = 1;
    std::size_t gen_rows = 10, gen_examples = 8;
    CLI::App* generate = app.add_subcommand("generate", "emit grids from a checkpoint");
    generate->add_option("--checkpoint", ckpt_path)->required();
    generate->add_option("--task", task)->check(CLI::IsMember({"transfer", "sample"}));
    generate->add_option("--seed", gen_seed);
    generate->add_option("--out", gen_out)->required();
    generate->add_option("--data", gen_data, "MNIST directory (transfer task)");
    generate->add_option("--rows", gen_rows);
    generate->add_option("--examples", gen_examples);

    std::string verify_data_dir;
    CLI::App* verify = app.add_subcommand("verify-data", "parse and summarize MNIST files");
    verify->add_option("--data", verify_data_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitFlags;
    }

    try {
        if (train->parsed()) return cmd_train(f);
        if (sweep->parsed()) return cmd_sweep(f, grid_file, jobs);
        if (generate->parsed())
            return cmd_generate(ckpt_path, task, gen_seed, gen_out, gen_data, gen_rows,
                                gen_examples);
        if (verify->parsed()) return cmd_verify_data(verify_data_dir);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFlags;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFlags;
    } catch (const acvae::mnist::IdxError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const acvae::CheckpointError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCheckpoint;
    } catch (const acvae::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
