#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "bitglow/quant.hpp"

namespace bitglow::flash {

// Byte image of all quantized weights, layer order, row-major per layer, in
// 32-bit little-endian word lines: weight j sits at byte offset j, in word
// j/4, byte column j%4.
struct FlashImage {
    std::vector<std::uint8_t> bytes;
    std::uint32_t base_address = 0;
    std::vector<std::size_t> layer_offsets;                    // first weight id per layer
    std::vector<std::pair<std::size_t, std::size_t>> layer_dims;  // out x in per layer

    std::size_t word_count() const { return (bytes.size() + 3) / 4; }
};

struct BitLocation {
    std::size_t weight_id = 0;
    std::size_t word_index = 0;  // word line
    int byte_column = 0;         // 0..3, weight column within the word
    int bit_in_byte = 0;         // 0..7, 7 = MSB
    int bit_line = 0;            // 0..31; 0 = MSB of byte column 3
};

// One laser spot: a bit line plus an optional spill onto the adjacent line.
struct SpotConfig {
    int bit_line = 0;
    int width = 1;  // 1 or 2; width 2 also covers bit_line + 1 (clipped at 31)
};

constexpr int kBitLines = 32;

inline int bit_line_of(int byte_column, int bit_in_byte) {
    return 31 - (8 * byte_column + bit_in_byte);
}

// Inverse of bit_line_of: (byte column, bit index) covered by a bit line.
inline std::pair<int, int> column_bit_of(int bit_line) {
    const int v = 31 - bit_line;
    return {v / 8, v % 8};
}

FlashImage layout(const quant::QuantizedModel& model);

BitLocation locate(const FlashImage& image, std::size_t weight_id, int bit_in_byte);

// Every (weight, bit) pair wired to the spot's bit line(s): one bit per word
// line per covered line.
std::vector<std::pair<std::size_t, int>> targets_of(const FlashImage& image, SpotConfig spot);

// X-position to bit-line mapping, presentational: line l spans
// [origin + pitch*l, origin + pitch*(l+1)).
struct Geometry {
    double origin_um = 0.0;
    double pitch_um = 40.0;

    std::optional<int> x_to_bitline(double x_um) const;
    double bitline_to_x(int bit_line) const { return origin_um + pitch_um * bit_line; }
};

} // namespace bitglow::flash
