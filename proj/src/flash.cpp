#include "bitglow/flash.hpp"

#include <cmath>
#include <stdexcept>

namespace bitglow::flash {

FlashImage layout(const quant::QuantizedModel& model) {
    FlashImage image;
    image.bytes.reserve(model.weight_count());
    for (const quant::QLayer& l : model.layers) {
        image.layer_offsets.push_back(image.bytes.size());
        image.layer_dims.emplace_back(l.out, l.in);
        for (std::int8_t w : l.q) image.bytes.push_back(static_cast<std::uint8_t>(w));
    }
    return image;
}

BitLocation locate(const FlashImage& image, std::size_t weight_id, int bit_in_byte) {
    if (weight_id >= image.bytes.size())
        throw std::out_of_range("locate: weight id beyond image");
    if (bit_in_byte < 0 || bit_in_byte > 7)
        throw std::out_of_range("locate: bit index must be 0..7");
    BitLocation loc;
    loc.weight_id = weight_id;
    loc.word_index = weight_id / 4;
    loc.byte_column = static_cast<int>(weight_id % 4);
    loc.bit_in_byte = bit_in_byte;
    loc.bit_line = bit_line_of(loc.byte_column, bit_in_byte);
    return loc;
}

std::vector<std::pair<std::size_t, int>> targets_of(const FlashImage& image, SpotConfig spot) {
    if (spot.width != 1 && spot.width != 2)
        throw std::invalid_argument("spot width must be 1 or 2");
    std::vector<std::pair<std::size_t, int>> targets;
    for (int w = 0; w < spot.width; ++w) {
        const int line = spot.bit_line + w;
        if (line < 0 || line >= kBitLines) continue;  // clipped spill / off-array spot
        const auto [column, bit] = column_bit_of(line);
        for (std::size_t word = 0; word < image.word_count(); ++word) {
            const std::size_t id = 4 * word + static_cast<std::size_t>(column);
            if (id < image.bytes.size()) targets.emplace_back(id, bit);
        }
    }
    return targets;
}

std::optional<int> Geometry::x_to_bitline(double x_um) const {
    const int line = static_cast<int>(std::floor((x_um - origin_um) / pitch_um));
    if (line < 0 || line >= kBitLines) return std::nullopt;
    return line;
}

} // namespace bitglow::flash
