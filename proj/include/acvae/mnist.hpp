#ifndef ACVAE_MNIST_HPP
#define ACVAE_MNIST_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "acvae/rng.hpp"
#include "acvae/tensor.hpp"

namespace acvae::mnist {

class IdxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BadMagic : public IdxError {
public:
    explicit BadMagic(std::uint32_t found);
    std::uint32_t found;
};

class TruncatedFile : public IdxError {
public:
    TruncatedFile(std::size_t expected, std::size_t got);
    std::size_t expected, got;
};

class TrailingBytes : public IdxError {
public:
    explicit TrailingBytes(std::size_t count);
    std::size_t count;
};

class LabelOutOfRange : public IdxError {
public:
    LabelOutOfRange(unsigned value, std::size_t index);
    unsigned value;
    std::size_t index;
};

struct RawImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels; // count * rows * cols
};

RawImages parse_idx_images(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes);

// Serializers for test fixtures; parse(serialize(x)) == x on valid input.
std::vector<std::uint8_t> serialize_idx_images(const RawImages& imgs);
std::vector<std::uint8_t> serialize_idx_labels(const std::vector<std::uint8_t>& labels);

// Reads a file, transparently inflating gzip (0x1f 0x8b prefix).
std::vector<std::uint8_t> read_file_maybe_gzip(const std::filesystem::path& path);

// Pixels scaled by exactly 1/255 into [0, 1].
Tensor normalize(const RawImages& imgs);

struct Dataset {
    Tensor images; // n x 784, values in [0, 1]
    std::vector<std::size_t> labels;

    std::size_t size() const { return labels.size(); }
    Dataset subset(std::size_t n) const;
};

// Loads the standard four-file layout (train/t10k, gzipped or plain) from a
// directory.
struct MnistData {
    Dataset train;
    Dataset test;
};
MnistData load_dir(const std::filesystem::path& dir);
Dataset load_pair(const std::filesystem::path& images_path,
                  const std::filesystem::path& labels_path);

struct Batch {
    Tensor x;        // b x 784
    std::vector<std::size_t> s;
    Tensor s_onehot; // b x 10
};

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t num_classes);

// One epoch of batches under a seeded Fisher-Yates shuffle; the short final
// batch is kept, and every item appears exactly once.
std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, Rng& rng);

} // namespace acvae::mnist

#endif
