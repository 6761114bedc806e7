#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bitglow {

using Vec = std::vector<double>;

// Row-major dense matrix of doubles. Small on purpose: the models here are
// MLPs with at most ~110k parameters.
struct Mat {
    std::vector<double> a;
    std::size_t rows = 0;
    std::size_t cols = 0;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : a(r * c, 0.0), rows(r), cols(c) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }

    std::size_t size() const { return a.size(); }

    // y = M x
    void matvec(std::span<const double> x, std::span<double> y) const {
        for (std::size_t i = 0; i < rows; ++i) {
            const double* w = row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < cols; ++j) acc += w[j] * x[j];
            y[i] = acc;
        }
    }
};

} // namespace bitglow
