#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitglow/data.hpp"
#include "bitglow/matrix.hpp"

namespace bitglow::nn {

enum class Activation { relu, none };

struct Layer {
    Mat weights;                    // out x in
    std::optional<Vec> bias;        // out, absent by default
    Activation activation = Activation::relu;
};

struct FloatModel {
    std::size_t input_dim = 0;
    std::vector<Layer> layers;

    std::size_t weight_count() const;
    std::size_t parameter_count() const;  // weights + biases
    std::size_t output_dim() const { return layers.back().weights.rows; }

    // Dimensions must chain and the last layer must emit raw logits.
    void validate() const;
};

Vec forward(const FloatModel& model, std::span<const double> input);

int predict(const FloatModel& model, std::span<const double> input);

// Mean cross-entropy of softmax(logits) against the labels.
double loss(const FloatModel& model, std::span<const data::Sample> batch);

struct Gradients {
    std::vector<Mat> weights;
    std::vector<Vec> biases;  // empty vec for layers without bias
};

// Exact backprop of the mean cross-entropy over the batch.
Gradients backward(const FloatModel& model, std::span<const data::Sample> batch);

double accuracy(const FloatModel& model, std::span<const data::Sample> samples);

enum class Optimizer { sgd, sgd_momentum };

struct TrainConfig {
    std::vector<std::size_t> arch;  // input, hidden..., output
    bool with_bias = false;
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::sgd_momentum;
    double momentum = 0.9;
    std::optional<double> accuracy_floor;  // on the test split, checked after training
};

struct TrainResult {
    FloatModel model;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct TrainError : std::runtime_error {
    double reached;
    double floor;
    TrainError(const std::string& msg, double reached_, double floor_)
        : std::runtime_error(msg), reached(reached_), floor(floor_) {}
};

// Seeded SGD training; identical (config, dataset) pairs give bit-identical
// weights. Throws TrainError when an accuracy floor is configured and missed.
TrainResult train(const TrainConfig& config, const data::Dataset& dataset);

} // namespace bitglow::nn
