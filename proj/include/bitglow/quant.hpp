#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bitglow/nn.hpp"

namespace bitglow::quant {

struct QTensor {
    std::vector<std::int8_t> values;
    int dec = 7;  // fractional bits: real value = q * 2^-dec
};

struct QLayer {
    std::size_t out = 0, in = 0;
    std::vector<std::int8_t> q;  // row-major out x in
    int weight_dec = 7;
    int out_dec = 7;             // fixed-point position of this layer's outputs
    int out_shift = 0;           // input_dec + weight_dec - out_dec, >= 0
    bool relu = true;
    std::optional<std::vector<std::int32_t>> bias_q;  // at scale 2^(input_dec+weight_dec)

    std::int8_t weight(std::size_t row, std::size_t col) const { return q[row * in + col]; }
};

struct QuantizedModel {
    std::size_t input_dim = 0;
    int input_dec = 7;
    std::int8_t input_qmin = -128, input_qmax = 127;  // calibrated input byte range
    std::vector<QLayer> layers;

    std::size_t weight_count() const;
    std::size_t output_dim() const { return layers.back().out; }

    // Global weight ids follow layer order, row-major within a layer; the id
    // doubles as the byte offset in the Flash image.
    struct WeightRef {
        std::size_t layer, row, col;
    };
    WeightRef ref(std::size_t weight_id) const;
    std::size_t id_of(std::size_t layer, std::size_t row, std::size_t col) const;
    std::int8_t weight(std::size_t weight_id) const;
    void set_weight(std::size_t weight_id, std::int8_t value);
};

// Transform applied to every weight byte as it is loaded; models a transient
// read-time fault. Must be pure.
using LoadHook = std::function<std::uint8_t(std::size_t weight_id, std::uint8_t byte)>;

int saturating_shift(std::int32_t acc, int shift);  // (acc >> shift) clamped to int8

std::int8_t quantize_value(double v, int dec);  // round half away from zero, clamp

int dec_bits_for(double max_abs);  // 7 - ceil(log2(max_abs)), 7 for max_abs == 0

// NNoM-style symmetric powers-of-two quantization. Activation fixed-point
// positions are calibrated on the provided samples (training split).
QuantizedModel quantize(const nn::FloatModel& model,
                        std::span<const data::Sample> calibration);

QTensor quantize_input(std::span<const double> x, int dec);

struct InferenceResult {
    QTensor logits;
    int label = 0;
};

// Bit-exact integer inference: 32-bit accumulate, arithmetic shift by
// out_shift, signed saturation to int8, ReLU on the saturated value. The hook,
// when present, sees every weight byte exactly once, in load order.
InferenceResult q_infer(const QuantizedModel& model, const QTensor& input,
                        const LoadHook* hook = nullptr);

// Convenience: quantize + infer + exact-match accuracy over a labeled set.
double q_accuracy(const QuantizedModel& model, std::span<const data::Sample> samples,
                  const LoadHook* hook = nullptr);

double q_loss(const QuantizedModel& model, std::span<const data::Sample> batch,
              const LoadHook* hook = nullptr);

// Float mirror of the current quantized weights (q * 2^-dec); gradient source
// for bit ranking.
nn::FloatModel dequantize(const QuantizedModel& model);

} // namespace bitglow::quant
