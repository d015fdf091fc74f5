#include "acvae/mnist.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>

namespace acvae::mnist {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
    if (offset + 4 > bytes.size()) throw TruncatedFile(offset + 4, bytes.size());
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw IdxError("gzip: inflateInit failed");
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> buf(1 << 16);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw IdxError("gzip: corrupt stream (zlib rc=" + std::to_string(rc) + ")");
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

} // namespace

BadMagic::BadMagic(std::uint32_t f)
    : IdxError("IDX: bad magic 0x" + [f] {
          char buf[16];
          std::snprintf(buf, sizeof buf, "%08x", f);
          return std::string(buf);
      }()),
      found(f) {}

TruncatedFile::TruncatedFile(std::size_t e, std::size_t g)
    : IdxError("IDX: truncated file, expected " + std::to_string(e) + " bytes, got " +
               std::to_string(g)),
      expected(e),
      got(g) {}

TrailingBytes::TrailingBytes(std::size_t c)
    : IdxError("IDX: " + std::to_string(c) + " trailing bytes"), count(c) {}

LabelOutOfRange::LabelOutOfRange(unsigned v, std::size_t i)
    : IdxError("IDX: label " + std::to_string(v) + " out of range at index " + std::to_string(i)),
      value(v),
      index(i) {}

RawImages parse_idx_images(const std::vector<std::uint8_t>& bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kImagesMagic) throw BadMagic(magic);
    RawImages imgs;
    imgs.count = read_be32(bytes, 4);
    imgs.rows = read_be32(bytes, 8);
    imgs.cols = read_be32(bytes, 12);
    const std::size_t expected = 16 + imgs.count * imgs.rows * imgs.cols;
    if (bytes.size() < expected) throw TruncatedFile(expected, bytes.size());
    if (bytes.size() > expected) throw TrailingBytes(bytes.size() - expected);
    imgs.pixels.assign(bytes.begin() + 16, bytes.end());
    return imgs;
}

std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kLabelsMagic) throw BadMagic(magic);
    const std::size_t count = read_be32(bytes, 4);
    const std::size_t expected = 8 + count;
    if (bytes.size() < expected) throw TruncatedFile(expected, bytes.size());
    if (bytes.size() > expected) throw TrailingBytes(bytes.size() - expected);
    std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.end());
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] > 9) throw LabelOutOfRange(labels[i], i);
    return labels;
}

std::vector<std::uint8_t> serialize_idx_images(const RawImages& imgs) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + imgs.pixels.size());
    write_be32(out, kImagesMagic);
    write_be32(out, static_cast<std::uint32_t>(imgs.count));
    write_be32(out, static_cast<std::uint32_t>(imgs.rows));
    write_be32(out, static_cast<std::uint32_t>(imgs.cols));
    out.insert(out.end(), imgs.pixels.begin(), imgs.pixels.end());
    return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    write_be32(out, kLabelsMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

std::vector<std::uint8_t> read_file_maybe_gzip(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IdxError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes);
    return bytes;
}

Tensor normalize(const RawImages& imgs) {
    Tensor t(imgs.count, imgs.rows * imgs.cols);
    auto out = t.values();
    for (std::size_t i = 0; i < imgs.pixels.size(); ++i)
        out[i] = static_cast<double>(imgs.pixels[i]) / 255.0;
    return t;
}

Dataset Dataset::subset(std::size_t n) const {
    n = std::min(n, size());
    Dataset d;
    d.images = Tensor(n, images.cols());
    d.labels.assign(labels.begin(), labels.begin() + n);
    std::memcpy(d.images.data(), images.data(), n * images.cols() * sizeof(double));
    return d;
}

Dataset load_pair(const std::filesystem::path& images_path,
                  const std::filesystem::path& labels_path) {
    RawImages imgs = parse_idx_images(read_file_maybe_gzip(images_path));
    std::vector<std::uint8_t> labels = parse_idx_labels(read_file_maybe_gzip(labels_path));
    if (imgs.count != labels.size())
        throw IdxError("image/label count mismatch: " + std::to_string(imgs.count) + " vs " +
                       std::to_string(labels.size()));
    Dataset ds;
    ds.images = normalize(imgs);
    ds.labels.assign(labels.begin(), labels.end());
    return ds;
}

namespace {
std::filesystem::path find_variant(const std::filesystem::path& dir, const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
        auto p = dir / (stem + suffix);
        if (std::filesystem::exists(p)) return p;
    }
    throw IdxError("missing MNIST file " + (dir / stem).string() + "[.gz]");
}
} // namespace

MnistData load_dir(const std::filesystem::path& dir) {
    MnistData data;
    data.train = load_pair(find_variant(dir, "train-images-idx3-ubyte"),
                           find_variant(dir, "train-labels-idx1-ubyte"));
    data.test = load_pair(find_variant(dir, "t10k-images-idx3-ubyte"),
                          find_variant(dir, "t10k-labels-idx1-ubyte"));
    return data;
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t num_classes) {
    Tensor t(labels.size(), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes)
            throw std::out_of_range("one_hot: label " + std::to_string(labels[i]));
        t(i, labels[i]) = 1.0;
    }
    return t;
}

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, Rng& rng) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    std::vector<std::size_t> perm(ds.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);

    std::vector<Batch> out;
    const std::size_t cols = ds.images.cols();
    for (std::size_t begin = 0; begin < perm.size(); begin += batch_size) {
        const std::size_t b = std::min(batch_size, perm.size() - begin);
        Batch batch;
        batch.x = Tensor(b, cols);
        batch.s.resize(b);
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t src = perm[begin + i];
            std::memcpy(batch.x.row(i), ds.images.row(src), cols * sizeof(double));
            batch.s[i] = ds.labels[src];
        }
        batch.s_onehot = one_hot(batch.s, 10);
        out.push_back(std::move(batch));
    }
    return out;
}

} // namespace acvae::mnist
