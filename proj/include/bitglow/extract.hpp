#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bitglow/flash.hpp"

namespace bitglow::extract {

enum class Guess { zero, one };

struct ExtractionReport {
    struct Row {
        std::size_t weight_id = 0;
        int true_msb = 0;
        Guess guess = Guess::one;
        bool correct = false;
    };
    std::vector<Row> rows;
    std::size_t guessed_zero = 0;
    std::size_t guessed_one = 0;
    std::size_t correct = 0;
    std::size_t incorrect = 0;
    std::size_t incorrect_among_guessed_zero = 0;  // must stay 0: a visible change proves a 0
    double recovered_fraction = 0.0;
    std::size_t probe_count = 0;
};

// Seeded random quantized probe vectors over the model's calibrated input
// byte range. Each element is active with probability `density` (uniform in
// [qmin, qmax]) and rests at the in-domain zero otherwise. Dense noise
// saturates the fixed-point accumulators of wide layers and masks faults;
// sparse probes keep activations inside the calibrated range, which is what
// image-domain inputs look like. Drawing n then extending to m > n keeps the
// first n probes identical.
std::vector<quant::QTensor> make_probe_inputs(const quant::QuantizedModel& model,
                                              std::size_t count, std::uint64_t seed,
                                              double density = 0.15);

// Differential MSB probe: run every probe with and without a transient
// bit-set on the weight's MSB; any difference in the quantized logits means
// the stored bit was 0. labels_only downgrades the comparison to the
// predicted label.
Guess probe_weight(const quant::QuantizedModel& model, const flash::FlashImage& image,
                   std::size_t weight_id, std::span<const quant::QTensor> probes,
                   bool labels_only = false);

ExtractionReport extract_msbs(const quant::QuantizedModel& model, const flash::FlashImage& image,
                              std::span<const quant::QTensor> probes, bool labels_only = false);

// Same, restricted to a subset of weight ids (smoke runs).
ExtractionReport extract_msbs_subset(const quant::QuantizedModel& model,
                                     const flash::FlashImage& image,
                                     std::span<const quant::QTensor> probes,
                                     std::span<const std::size_t> weight_ids,
                                     bool labels_only = false);

void write_csv(std::ostream& out, const ExtractionReport& report);
void write_report(std::ostream& out, const ExtractionReport& report);

} // namespace bitglow::extract
