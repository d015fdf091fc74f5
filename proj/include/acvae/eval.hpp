#ifndef ACVAE_EVAL_HPP
#define ACVAE_EVAL_HPP

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "acvae/mnist.hpp"
#include "acvae/models.hpp"

namespace acvae {

struct Vae;
struct MetricsRecord;
struct TrainingConfig;

// Mean ELBO per test item, Eq-(4) form with gamma = 1 and one sample per item.
double eval_elbo(EncoderNet& enc, DecoderNet& dec, const mnist::Dataset& test, Rng& rng);

struct AdversaryEval {
    double accuracy = 0.0;
    double cross_entropy = 0.0;
    double mi = 0.0;
};

// Adversary accuracy / CE / MI over the test set; one sampled z per item,
// argmax ties broken toward the lowest class index.
AdversaryEval eval_adversary(AdversaryNet& adv, EncoderNet& enc, const mnist::Dataset& test,
                             Rng& rng);

// Single pass computing both, sharing the sampled z per item.
MetricsRecord evaluate_epoch(Vae& vae, const mnist::Dataset& test, std::size_t epoch, Rng& rng);

// Montage of 28x28 cells; pixel = round(y * 255) half-up.
struct ImageGrid {
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::vector<std::uint8_t> pixels; // (grid_rows*28) x (grid_cols*28) row-major

    ImageGrid(std::size_t rows, std::size_t cols)
        : grid_rows(rows), grid_cols(cols), pixels(rows * 28 * cols * 28, 0) {}
    std::size_t width() const { return grid_cols * 28; }
    std::size_t height() const { return grid_rows * 28; }
    // Writes one 28x28 cell from a 784-wide row of values in [0, 1].
    void set_cell(std::size_t r, std::size_t c, const double* values);
    void set_cell_bytes(std::size_t r, std::size_t c, const std::uint8_t* bytes);
};

// Row 0: the original examples; rows 1..10: decoder output with the digit
// class forced to 0..9. Requires a decoder conditioned on s.
ImageGrid style_transfer_grid(EncoderNet& enc, DecoderNet& dec, const mnist::Dataset& examples,
                              Rng& rng);

// rows x 10 grid of prior samples decoded per column digit class (class
// input unused in BASIC mode).
ImageGrid sampling_grid(DecoderNet& dec, Rng& rng, std::size_t rows, std::size_t cols = 10);

void write_pgm(const ImageGrid& grid, const std::filesystem::path& path);

// Sweep CSV header: mode,censor,param,elbo,adv_acc,adv_ce,mi_estimate,seed,epochs
struct SweepCell {
    ConditioningMode mode;
    CensorMode censor;
    double param = 0.0; // lambda or gamma; unused for the baseline
};

std::vector<SweepCell> default_sweep_grid();

void tradeoff_sweep(const std::vector<SweepCell>& cells, const mnist::Dataset& train_ds,
                    const mnist::Dataset& test_ds, const TrainingConfig& tc, std::ostream& csv,
                    std::ostream* log = nullptr);

} // namespace acvae

#endif
