#pragma once

#include <string>

#include "bitglow/flash.hpp"

namespace bitglow::io {

// Training provenance carried by every model file; enough to rebuild the
// dataset pipeline for campaigns.
struct Provenance {
    std::string arch_name;   // iris_a, iris_b, mnist_mlp, mnist_deep
    std::string dataset;     // iris | mnist
    std::uint64_t seed = 0;  // training seed; also the iris split seed
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct FloatBundle {
    nn::FloatModel model;
    data::Preprocess prep;
    Provenance prov;
};

struct QuantBundle {
    quant::QuantizedModel model;
    data::Preprocess prep;
    Provenance prov;
    double q_test_accuracy = 0.0;
};

// JSON model containers; doubles round-trip exactly.
void save_float(const std::string& path, const FloatBundle& bundle);
FloatBundle load_float(const std::string& path);

void save_quant(const std::string& path, const QuantBundle& bundle);
QuantBundle load_quant(const std::string& path);

// Raw little-endian image payload and its text sidecar.
void write_flash_blob(const std::string& path, const flash::FlashImage& image);
void write_layout_sidecar(const std::string& path, const flash::FlashImage& image);

// Temp-then-rename write; never leaves a partial file behind.
void write_file_atomic(const std::string& path, const std::string& contents);

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace bitglow::io
