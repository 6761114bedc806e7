#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitglow/matrix.hpp"

namespace bitglow::data {

extern const char* const kIrisCsv;

struct Sample {
    Vec x;
    int label = 0;
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
    int class_count = 0;

    std::size_t feature_dim() const { return train.empty() ? 0 : train.front().x.size(); }
};

// 150-row embedded iris table, stratified 100 train / 50 test split, features
// min-max scaled to [0,1] using train statistics only.
Dataset load_iris(std::uint64_t seed);

// IDX-format files (big-endian header, magic 0x803 for images, 0x801 for
// labels). Files ending in .gz are inflated on the fly. Pixels scaled to [0,1].
Dataset load_mnist(const std::string& train_images, const std::string& train_labels,
                   const std::string& test_images, const std::string& test_labels);

struct PcaTransform {
    Vec mean;        // feature mean of the fit data
    Mat components;  // k x d, rows orthonormal, sorted by decreasing variance
    bool fitted_on_train = false;

    Vec apply(std::span<const double> x) const;
};

// Top-k principal components of the centered sample matrix via a cyclic
// Jacobi eigendecomposition of the covariance. Deterministic: fixed rotation
// order, eigenvalue sort with index tie-break, components sign-normalized so
// the largest-magnitude entry is positive.
PcaTransform fit_pca(const std::vector<Sample>& train, std::size_t k);

std::vector<Sample> apply_pca(const PcaTransform& t, const std::vector<Sample>& samples);

// Fixed evaluation subset used by fault campaigns: the first n test samples.
std::vector<Sample> eval_subset(const std::vector<Sample>& test, std::size_t n);

// Feature-space transform between the raw dataset and a model's input; kept
// inside the model container so campaigns can rebuild the pipeline.
struct Preprocess {
    std::optional<PcaTransform> pca;

    Vec apply(std::span<const double> x) const { return pca ? pca->apply(x) : Vec(x.begin(), x.end()); }
    std::vector<Sample> apply_all(const std::vector<Sample>& samples) const;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace bitglow::data
