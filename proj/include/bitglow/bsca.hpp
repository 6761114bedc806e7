#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bitglow/faultsim.hpp"

namespace bitglow::bsca {

// One (byte column, bit index) pair; a laser spot parked on the matching bit
// line faults exactly these bits across all word lines.
struct Line {
    int column = 0;  // 0..3
    int bit = 7;     // 0..7, 7 = MSB

    int bit_line() const { return flash::bit_line_of(column, bit); }
};

struct BscaConfig {
    int budget = 20;          // max bit-sets (Hamming-distance bound)
    int candidate_cap = 128;  // measured candidates per iteration
};

struct Candidate {
    std::size_t weight_id = 0;
    int bit = 0;
    double score = 0.0;  // first-order predicted loss increase
};

// Loss batch for the attack: n samples drawn once from the pool with a fixed
// seed.
std::vector<data::Sample> draw_batch(std::span<const data::Sample> pool, std::size_t n,
                                     std::uint64_t seed);

// Gradient-ranked bit-set candidates on the line: weights whose target bit is
// 0, scored by (dL/dw) * (dequantized value change of setting the bit),
// sorted by descending score. The shadow model must mirror the current
// quantized weights.
std::vector<Candidate> bit_gradient_rank(const quant::QuantizedModel& model,
                                         const nn::FloatModel& shadow,
                                         std::span<const data::Sample> batch, Line line);

struct FlipRecord {
    std::size_t weight_id = 0;
    int bit = 0;
    std::uint8_t byte_before = 0;
    std::uint8_t byte_after = 0;
    double loss_before = 0.0;
    double loss_after = 0.0;
    double accuracy_after = 0.0;
};

struct LineAttackResult {
    Line line;
    quant::QuantizedModel model;   // faulted working copy
    std::vector<FlipRecord> log;
    bool exhausted = false;        // ran out of candidates before the budget
    double final_accuracy = 0.0;   // evaluation-set accuracy after the last flip
};

// Greedy budgeted attack on one line: rank by gradient, measure the top
// candidates' batch loss with the bit temporarily set, keep the argmax
// permanently, repeat. Loss uses `batch`; the per-flip accuracy trail uses
// `eval_set`.
LineAttackResult bsca_line(const quant::QuantizedModel& model, const flash::FlashImage& image,
                           Line line, const BscaConfig& config,
                           std::span<const data::Sample> batch,
                           std::span<const data::Sample> eval_set);

struct SearchResult {
    Line best;
    LineAttackResult best_result;
    std::array<double, 32> line_accuracy{};  // indexed column * 8 + bit
    double baseline_accuracy = 0.0;

    static std::size_t table_index(Line l) {
        return static_cast<std::size_t>(l.column) * 8 + static_cast<std::size_t>(l.bit);
    }
};

// Runs bsca_line on all 32 (column, bit) lines and keeps the worst-accuracy
// faulted model.
SearchResult bsca_search(const quant::QuantizedModel& model, const flash::FlashImage& image,
                         const BscaConfig& config, std::span<const data::Sample> batch,
                         std::span<const data::Sample> eval_set);

// Accuracy per log prefix (0..n flips), each measured through the fault
// simulator with a guided trigger on the prefix's weights. Matches the
// attack's own accuracy trail bit for bit.
std::vector<double> replay_on_simulator(std::span<const FlipRecord> log, Line line,
                                        const quant::QuantizedModel& model,
                                        const flash::FlashImage& image,
                                        std::span<const data::Sample> eval_set);

void write_report(std::ostream& out, const SearchResult& result, const flash::FlashImage& image);
void write_line_report(std::ostream& out, const LineAttackResult& result, double baseline,
                       const flash::FlashImage& image);
void write_replay_csv(std::ostream& out, std::span<const double> curve);

} // namespace bitglow::bsca
