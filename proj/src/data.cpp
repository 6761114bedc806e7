#include "bitglow/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <zlib.h>

namespace bitglow::data {

namespace {

std::vector<Sample> parse_iris_csv(const char* csv) {
    std::vector<Sample> rows;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Sample s;
        std::istringstream ls(line);
        std::string field;
        for (int i = 0; i < 4; ++i) {
            if (!std::getline(ls, field, ',')) throw DataError("iris asset: short row");
            s.x.push_back(std::stod(field));
        }
        if (!std::getline(ls, field, ',')) throw DataError("iris asset: missing label");
        s.label = std::stoi(field);
        rows.push_back(std::move(s));
    }
    if (rows.size() != 150) throw DataError("iris asset: expected 150 rows");
    return rows;
}

std::vector<std::uint8_t> read_file_maybe_gz(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) {
        std::vector<std::uint8_t> out;
        out.resize(raw.size() * 4 + 1024);
        z_stream zs{};
        if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw DataError("zlib init failed");
        zs.next_in = raw.data();
        zs.avail_in = static_cast<uInt>(raw.size());
        std::size_t total = 0;
        int rc = Z_OK;
        do {
            if (total == out.size()) out.resize(out.size() * 2);
            zs.next_out = out.data() + total;
            zs.avail_out = static_cast<uInt>(out.size() - total);
            rc = inflate(&zs, Z_NO_FLUSH);
            if (rc != Z_OK && rc != Z_STREAM_END) {
                inflateEnd(&zs);
                throw DataError("corrupt gzip stream: " + path);
            }
            total = out.size() - zs.avail_out;
        } while (rc != Z_STREAM_END);
        inflateEnd(&zs);
        out.resize(total);
        return out;
    }
    return raw;
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

struct IdxImages {
    std::uint32_t count, rows, cols;
    std::vector<std::uint8_t> pixels;
};

IdxImages parse_idx_images(const std::string& path) {
    auto buf = read_file_maybe_gz(path);
    if (buf.size() < 16) throw DataError("idx image file too short: " + path);
    if (be32(buf.data()) != 0x00000803)
        throw DataError("bad idx image magic in " + path);
    IdxImages im;
    im.count = be32(buf.data() + 4);
    im.rows = be32(buf.data() + 8);
    im.cols = be32(buf.data() + 12);
    const std::size_t need = 16 + std::size_t(im.count) * im.rows * im.cols;
    if (buf.size() < need) throw DataError("idx image file truncated: " + path);
    im.pixels.assign(buf.begin() + 16, buf.begin() + static_cast<std::ptrdiff_t>(need));
    return im;
}

std::vector<std::uint8_t> parse_idx_labels(const std::string& path) {
    auto buf = read_file_maybe_gz(path);
    if (buf.size() < 8) throw DataError("idx label file too short: " + path);
    if (be32(buf.data()) != 0x00000801)
        throw DataError("bad idx label magic in " + path);
    const std::uint32_t count = be32(buf.data() + 4);
    if (buf.size() < 8 + std::size_t(count)) throw DataError("idx label file truncated: " + path);
    return {buf.begin() + 8, buf.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

std::vector<Sample> to_samples(const IdxImages& im, const std::vector<std::uint8_t>& labels) {
    if (im.count != labels.size())
        throw DataError("image/label record count mismatch");
    const std::size_t dim = std::size_t(im.rows) * im.cols;
    std::vector<Sample> out(im.count);
    for (std::size_t i = 0; i < im.count; ++i) {
        out[i].x.resize(dim);
        const std::uint8_t* px = im.pixels.data() + i * dim;
        for (std::size_t j = 0; j < dim; ++j) out[i].x[j] = px[j] / 255.0;
        out[i].label = labels[i];
    }
    return out;
}

} // namespace

Dataset load_iris(std::uint64_t seed) {
    auto rows = parse_iris_csv(kIrisCsv);

    // Stratified split: 50/3 test rows per class, i.e. 100 train / 50 test.
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    Dataset ds;
    ds.class_count = 3;
    // 50-sample test set, near-even over the three classes (16+17+17).
    const std::array<int, 3> quota{16, 17, 17};
    std::array<int, 3> taken{0, 0, 0};
    for (std::size_t idx : order) {
        const Sample& s = rows[idx];
        auto cls = static_cast<std::size_t>(s.label);
        if (taken[cls] < quota[cls]) {
            ds.test.push_back(s);
            ++taken[cls];
        } else {
            ds.train.push_back(s);
        }
    }

    // Min-max scale to [0,1] from train statistics.
    const std::size_t dim = ds.train.front().x.size();
    Vec lo(dim, 1e300), hi(dim, -1e300);
    for (const Sample& s : ds.train)
        for (std::size_t j = 0; j < dim; ++j) {
            lo[j] = std::min(lo[j], s.x[j]);
            hi[j] = std::max(hi[j], s.x[j]);
        }
    auto scale = [&](std::vector<Sample>& split) {
        for (Sample& s : split)
            for (std::size_t j = 0; j < dim; ++j) {
                const double span = hi[j] - lo[j];
                s.x[j] = span > 0 ? (s.x[j] - lo[j]) / span : 0.0;
            }
    };
    scale(ds.train);
    scale(ds.test);
    return ds;
}

Dataset load_mnist(const std::string& train_images, const std::string& train_labels,
                   const std::string& test_images, const std::string& test_labels) {
    Dataset ds;
    ds.class_count = 10;
    ds.train = to_samples(parse_idx_images(train_images), parse_idx_labels(train_labels));
    ds.test = to_samples(parse_idx_images(test_images), parse_idx_labels(test_labels));
    return ds;
}

Vec PcaTransform::apply(std::span<const double> x) const {
    Vec centered(mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) centered[j] = x[j] - mean[j];
    Vec out(components.rows);
    components.matvec(centered, out);
    return out;
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenvalues; V's columns end up holding the eigenvectors.
std::vector<double> jacobi_eigen(Mat& s, Mat& v, double tol = 1e-12, int max_sweeps = 50) {
    const std::size_t n = s.rows;
    v = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(s(i, i)));
    if (scale == 0.0) scale = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(s(p, q)));
        if (off <= tol * scale) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (std::abs(apq) <= tol * scale * 1e-3) continue;
                const double theta = (s(q, q) - s(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = s(i, i);
    return eig;
}

} // namespace

PcaTransform fit_pca(const std::vector<Sample>& train, std::size_t k) {
    if (train.empty()) throw DataError("pca: empty fit set");
    const std::size_t d = train.front().x.size();
    if (k > d) throw DataError("pca: k exceeds feature dimension");

    PcaTransform t;
    t.mean.assign(d, 0.0);
    for (const Sample& s : train)
        for (std::size_t j = 0; j < d; ++j) t.mean[j] += s.x[j];
    for (double& m : t.mean) m /= static_cast<double>(train.size());

    // Covariance of the centered data (upper triangle, then mirrored).
    Mat cov(d, d);
    Vec c(d);
    for (const Sample& s : train) {
        for (std::size_t j = 0; j < d; ++j) c[j] = s.x[j] - t.mean[j];
        for (std::size_t i = 0; i < d; ++i) {
            const double ci = c[i];
            if (ci == 0.0) continue;
            double* row = cov.row(i);
            for (std::size_t j = i; j < d; ++j) row[j] += ci * c[j];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(train.size());
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov(i, j) *= inv_n;
            cov(j, i) = cov(i, j);
        }

    Mat v;
    std::vector<double> eig = jacobi_eigen(cov, v);

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return eig[a] > eig[b]; });

    t.components = Mat(k, d);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t col = order[r];
        double* out = t.components.row(r);
        for (std::size_t j = 0; j < d; ++j) out[j] = v(j, col);
        // Sign convention: largest-magnitude entry positive, first index on ties.
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(out[j]) > std::abs(out[arg])) arg = j;
        if (out[arg] < 0)
            for (std::size_t j = 0; j < d; ++j) out[j] = -out[j];
    }
    t.fitted_on_train = true;
    return t;
}

std::vector<Sample> apply_pca(const PcaTransform& t, const std::vector<Sample>& samples) {
    std::vector<Sample> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out[i].x = t.apply(samples[i].x);
        out[i].label = samples[i].label;
    }
    return out;
}

std::vector<Sample> eval_subset(const std::vector<Sample>& test, std::size_t n) {
    return {test.begin(), test.begin() + static_cast<std::ptrdiff_t>(std::min(n, test.size()))};
}

std::vector<Sample> Preprocess::apply_all(const std::vector<Sample>& samples) const {
    if (!pca) return samples;
    return apply_pca(*pca, samples);
}

} // namespace bitglow::data
