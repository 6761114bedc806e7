#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "bitglow/flash.hpp"

namespace bitglow::faultsim {

// Which weight-load events fire a fault: every load, or a guided list.
struct TriggerSet {
    enum class Mode { all_loads, weight_list };
    Mode mode = Mode::all_loads;
    std::vector<std::size_t> weights;  // sorted unique ids in weight_list mode

    static TriggerSet all();
    static TriggerSet only(std::vector<std::size_t> weight_ids);
    bool eligible(std::size_t weight_id) const;
};

// OR-mask per weight byte, precomputed from targets_of(spots) ∩ trigger.
struct FaultPlan {
    std::vector<std::uint8_t> or_mask;

    // Number of targeted bits whose stored value is 0; input-independent.
    int count_faulted_bits(const flash::FlashImage& image) const;
};

FaultPlan make_plan(const flash::FlashImage& image, std::span<const flash::SpotConfig> spots,
                    const TriggerSet& trigger);

std::uint8_t apply_bitset(std::uint8_t byte, int bit);

struct FaultedInference {
    int label = 0;
    int faulted_bit_count = 0;
    quant::QTensor logits;
};

// One inference with transient bit-sets at weight-load time; neither the
// model nor the image is modified.
FaultedInference faulted_inference(const quant::QuantizedModel& model,
                                   const flash::FlashImage& image,
                                   std::span<const flash::SpotConfig> spots,
                                   const TriggerSet& trigger, std::span<const double> input);

struct CampaignRow {
    double x_um = 0.0;
    std::vector<int> bit_lines;  // resolved spot lines, empty when off-array
    double accuracy = 0.0;
    int faulted_bits = 0;
};

struct CampaignResult {
    double baseline_accuracy = 0.0;
    std::vector<CampaignRow> rows;

    const CampaignRow& worst() const;  // lowest accuracy, first position on ties
    int max_faulted_bits() const;
};

struct SpotTemplate {
    int width = 1;        // bit lines per spot
    int spot_count = 1;   // 1 or 2 simultaneous spots
    int second_line_offset = 16;
};

// One row per position: spot(s) placed from the position via the geometry,
// accuracy measured with faulted inference over the whole test set.
CampaignResult sweep(const quant::QuantizedModel& model, const flash::FlashImage& image,
                     std::span<const double> positions_um, const SpotTemplate& spots,
                     const TriggerSet& trigger, std::span<const data::Sample> test_set,
                     const flash::Geometry& geometry = {});

// Two simultaneous spots at (l, l + offset); overlapping configurations are
// rejected.
CampaignResult dual_spot_sweep(const quant::QuantizedModel& model,
                               const flash::FlashImage& image,
                               std::span<const double> positions_um, const SpotTemplate& spots,
                               const TriggerSet& trigger,
                               std::span<const data::Sample> test_set,
                               const flash::Geometry& geometry = {});

// Positions of all 32 bit lines (or the first `lines`), one row per line.
std::vector<double> line_positions(const flash::Geometry& geometry, int lines = flash::kBitLines);

void write_csv(std::ostream& out, const CampaignResult& result);
void write_summary(std::ostream& out, const CampaignResult& result);

} // namespace bitglow::faultsim
