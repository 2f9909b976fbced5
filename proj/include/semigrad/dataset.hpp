#pragma once

#include <fstream>
#include <sstream>

#include "semigrad/tensor.hpp"

namespace semigrad {

struct Dataset {
    Tensor features;                  // (N, d) or (N, c, h, w), values in [0, 1]
    std::vector<std::size_t> labels;  // in [0, C)
    std::size_t num_classes = 0;
};

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const std::string& path,
                               std::size_t offset) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    if (!is)
        throw std::runtime_error("idx: truncated read at offset " +
                                 std::to_string(offset) + " in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

// IDX image file: big-endian magic 0x00000803, dims N,H,W, then u8 pixels.
// Pixels are scaled to [0, 1].
inline Tensor load_idx_images(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("idx: cannot open " + path);
    std::uint32_t magic = detail::read_be32(is, path, 0);
    if (magic != 0x00000803)
        throw std::runtime_error("idx: bad image magic at offset 0 in " + path);
    std::uint32_t n = detail::read_be32(is, path, 4);
    std::uint32_t h = detail::read_be32(is, path, 8);
    std::uint32_t w = detail::read_be32(is, path, 12);
    Tensor t = Tensor::zeros({n, 1, h, w});
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * h * w);
    is.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (!is)
        throw std::runtime_error("idx: truncated pixel data at offset 16 in " + path);
    for (std::size_t i = 0; i < raw.size(); ++i)
        t.data[i] = static_cast<double>(raw[i]) / 255.0;
    return t;
}

// IDX label file: big-endian magic 0x00000801, dim N, then u8 labels.
inline std::vector<std::size_t> load_idx_labels(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("idx: cannot open " + path);
    std::uint32_t magic = detail::read_be32(is, path, 0);
    if (magic != 0x00000801)
        throw std::runtime_error("idx: bad label magic at offset 0 in " + path);
    std::uint32_t n = detail::read_be32(is, path, 4);
    std::vector<unsigned char> raw(n);
    is.read(reinterpret_cast<char*>(raw.data()), n);
    if (!is)
        throw std::runtime_error("idx: truncated label data at offset 8 in " + path);
    return {raw.begin(), raw.end()};
}

// CSV rows: label,pix0,pix1,...  Pixel values are scaled by the max seen so
// features land in [0, 1] even for 0..255 inputs.
inline Dataset load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("csv: cannot open " + path);
    std::vector<std::size_t> labels;
    std::vector<double> values;
    std::size_t dim = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2)
            throw std::runtime_error("csv: line " + std::to_string(lineno) +
                                     " has fewer than 2 fields in " + path);
        if (dim == 0) dim = row.size() - 1;
        if (row.size() - 1 != dim)
            throw std::runtime_error("csv: line " + std::to_string(lineno) +
                                     " has inconsistent width in " + path);
        if (row[0] < 0.0 || row[0] != std::floor(row[0]))
            throw std::runtime_error("csv: line " + std::to_string(lineno) +
                                     " has non-integral label in " + path);
        labels.push_back(static_cast<std::size_t>(row[0]));
        values.insert(values.end(), row.begin() + 1, row.end());
    }
    if (labels.empty()) throw std::runtime_error("csv: no rows in " + path);
    double mx = 0.0;
    for (double v : values) mx = std::max(mx, std::abs(v));
    if (mx > 1.0)
        for (double& v : values) v /= mx;
    Dataset ds;
    ds.features = Tensor({labels.size(), dim}, std::move(values));
    ds.labels = std::move(labels);
    for (std::size_t l : ds.labels) ds.num_classes = std::max(ds.num_classes, l + 1);
    return ds;
}

// Seeded Gaussian blobs, one cluster per class, scaled into [0, 1].
inline Dataset synthetic_blobs(std::uint64_t seed, std::size_t num_classes,
                               std::size_t points_per_class, std::size_t dim,
                               double spread = 0.08) {
    Rng rng(seed);
    std::vector<Tensor> centers;
    for (std::size_t c = 0; c < num_classes; ++c)
        centers.push_back(rng.uniform_tensor({dim}, 0.2, 0.8));
    Dataset ds;
    ds.num_classes = num_classes;
    std::size_t n = num_classes * points_per_class;
    ds.features = Tensor::zeros({n, dim});
    ds.labels.resize(n);
    // interleave classes so contiguous batches stay mixed
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = i % num_classes;
        ds.labels[i] = c;
        for (std::size_t d = 0; d < dim; ++d) {
            double v = centers[c].data[d] + spread * rng.normal();
            ds.features.data[i * dim + d] = std::min(std::max(v, 0.0), 1.0);
        }
    }
    return ds;
}

}  // namespace semigrad
