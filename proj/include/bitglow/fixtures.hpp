#pragma once

#include <string>
#include <vector>

#include "bitglow/model_io.hpp"

namespace bitglow::fixtures {

struct MnistPaths {
    std::string train_images, train_labels, test_images, test_labels;

    static MnistPaths in_dir(const std::string& dir);
};

// BITGLOW_MNIST_DIR when set, otherwise assets/mnist (gzipped idx files).
std::string default_mnist_dir();

// A trained fixture: float model, its preprocessing, the dataset mapped into
// the model's input space, and the quantized deployment model.
struct Fixture {
    io::Provenance prov;
    nn::FloatModel model;
    data::Preprocess prep;
    std::vector<data::Sample> train;  // preprocessed
    std::vector<data::Sample> test;   // preprocessed
    quant::QuantizedModel qmodel;
    double q_test_accuracy = 0.0;

    io::FloatBundle float_bundle() const { return {model, prep, prov}; }
    io::QuantBundle quant_bundle() const { return {qmodel, prep, prov, q_test_accuracy}; }
};

inline constexpr std::uint64_t kIrisASeed = 7;
inline constexpr std::uint64_t kIrisBSeed = 13;
inline constexpr std::uint64_t kMnistMlpSeed = 3;
inline constexpr std::uint64_t kMnistDeepSeed = 5;

// 4-1-3 single-hidden-neuron iris model; the single-word characterization
// target.
Fixture make_iris_a(std::uint64_t seed = kIrisASeed);

// 4-4-3 iris model.
Fixture make_iris_b(std::uint64_t seed = kIrisBSeed);

// 50-10-10 on PCA-compressed digits, biases on: 620 trainable parameters.
Fixture make_mnist_mlp(const MnistPaths& paths, std::uint64_t seed = kMnistMlpSeed);

// 784-128-64-10 extraction target, weights only: 109,184 parameters.
Fixture make_mnist_deep(const MnistPaths& paths, std::uint64_t seed = kMnistDeepSeed);

// Training recipe behind each fixture; the CLI exposes its knobs as flags.
nn::TrainConfig config_for(const std::string& arch_name, std::uint64_t seed);

Fixture make_by_name(const std::string& arch_name, std::uint64_t seed,
                     const std::string& mnist_dir);

} // namespace bitglow::fixtures
