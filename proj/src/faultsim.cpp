#include "bitglow/faultsim.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include "bitglow/parallel.hpp"

namespace bitglow::faultsim {

TriggerSet TriggerSet::all() { return {}; }

TriggerSet TriggerSet::only(std::vector<std::size_t> weight_ids) {
    TriggerSet t;
    t.mode = Mode::weight_list;
    std::sort(weight_ids.begin(), weight_ids.end());
    const auto dup = std::adjacent_find(weight_ids.begin(), weight_ids.end());
    if (dup != weight_ids.end())
        throw std::invalid_argument("trigger weight list contains duplicates");
    t.weights = std::move(weight_ids);
    return t;
}

bool TriggerSet::eligible(std::size_t weight_id) const {
    if (mode == Mode::all_loads) return true;
    return std::binary_search(weights.begin(), weights.end(), weight_id);
}

int FaultPlan::count_faulted_bits(const flash::FlashImage& image) const {
    int n = 0;
    for (std::size_t id = 0; id < or_mask.size(); ++id)
        n += std::popcount(static_cast<unsigned>(or_mask[id] & ~image.bytes[id]));
    return n;
}

FaultPlan make_plan(const flash::FlashImage& image, std::span<const flash::SpotConfig> spots,
                    const TriggerSet& trigger) {
    FaultPlan plan;
    plan.or_mask.assign(image.bytes.size(), 0);
    for (const flash::SpotConfig& spot : spots)
        for (const auto& [id, bit] : flash::targets_of(image, spot))
            if (trigger.eligible(id))
                plan.or_mask[id] |= static_cast<std::uint8_t>(1u << bit);
    return plan;
}

std::uint8_t apply_bitset(std::uint8_t byte, int bit) {
    return static_cast<std::uint8_t>(byte | (1u << bit));
}

namespace {

quant::InferenceResult infer_with_plan(const quant::QuantizedModel& model, const FaultPlan& plan,
                                       std::span<const double> input) {
    const quant::QTensor qin = quant::quantize_input(input, model.input_dec);
    const quant::LoadHook hook = [&plan](std::size_t id, std::uint8_t byte) {
        return static_cast<std::uint8_t>(byte | plan.or_mask[id]);
    };
    return quant::q_infer(model, qin, &hook);
}

double accuracy_with_plan(const quant::QuantizedModel& model, const FaultPlan& plan,
                          std::span<const data::Sample> samples) {
    std::size_t correct = 0;
    for (const data::Sample& s : samples)
        if (infer_with_plan(model, plan, s.x).label == s.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

CampaignResult run_sweep(const quant::QuantizedModel& model, const flash::FlashImage& image,
                         std::span<const double> positions_um, const SpotTemplate& spots,
                         const TriggerSet& trigger, std::span<const data::Sample> test_set,
                         const flash::Geometry& geometry) {
    if (test_set.empty()) throw std::invalid_argument("sweep: empty test set");
    if (spots.spot_count == 2) {
        // Reject overlap, including width-2 spill onto the adjacent line.
        if (std::abs(spots.second_line_offset) < spots.width)
            throw std::invalid_argument("dual spot lines overlap");
    }

    CampaignResult result;
    result.baseline_accuracy =
        accuracy_with_plan(model, FaultPlan{std::vector<std::uint8_t>(image.bytes.size(), 0)},
                           test_set);
    result.rows.resize(positions_um.size());

    parallel_for(positions_um.size(), [&](std::size_t i) {
        CampaignRow& row = result.rows[i];
        row.x_um = positions_um[i];

        std::vector<flash::SpotConfig> placed;
        if (auto line = geometry.x_to_bitline(row.x_um)) {
            placed.push_back({*line, spots.width});
            row.bit_lines.push_back(*line);
            if (spots.spot_count == 2) {
                const int second = *line + spots.second_line_offset;
                placed.push_back({second, spots.width});
                row.bit_lines.push_back(second);
            }
        }

        const FaultPlan plan = make_plan(image, placed, trigger);
        row.faulted_bits = plan.count_faulted_bits(image);
        row.accuracy = accuracy_with_plan(model, plan, test_set);
    });
    return result;
}

} // namespace

FaultedInference faulted_inference(const quant::QuantizedModel& model,
                                   const flash::FlashImage& image,
                                   std::span<const flash::SpotConfig> spots,
                                   const TriggerSet& trigger, std::span<const double> input) {
    const FaultPlan plan = make_plan(image, spots, trigger);
    quant::InferenceResult r = infer_with_plan(model, plan, input);
    FaultedInference out;
    out.label = r.label;
    out.faulted_bit_count = plan.count_faulted_bits(image);
    out.logits = std::move(r.logits);
    return out;
}

const CampaignRow& CampaignResult::worst() const {
    if (rows.empty()) throw std::logic_error("campaign has no rows");
    const auto it = std::min_element(rows.begin(), rows.end(),
                                     [](const CampaignRow& a, const CampaignRow& b) {
                                         return a.accuracy < b.accuracy;
                                     });
    return *it;
}

int CampaignResult::max_faulted_bits() const {
    int mx = 0;
    for (const CampaignRow& r : rows) mx = std::max(mx, r.faulted_bits);
    return mx;
}

CampaignResult sweep(const quant::QuantizedModel& model, const flash::FlashImage& image,
                     std::span<const double> positions_um, const SpotTemplate& spots,
                     const TriggerSet& trigger, std::span<const data::Sample> test_set,
                     const flash::Geometry& geometry) {
    SpotTemplate single = spots;
    single.spot_count = 1;
    return run_sweep(model, image, positions_um, single, trigger, test_set, geometry);
}

CampaignResult dual_spot_sweep(const quant::QuantizedModel& model,
                               const flash::FlashImage& image,
                               std::span<const double> positions_um, const SpotTemplate& spots,
                               const TriggerSet& trigger,
                               std::span<const data::Sample> test_set,
                               const flash::Geometry& geometry) {
    SpotTemplate dual = spots;
    dual.spot_count = 2;
    return run_sweep(model, image, positions_um, dual, trigger, test_set, geometry);
}

std::vector<double> line_positions(const flash::Geometry& geometry, int lines) {
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(lines));
    for (int l = 0; l < lines; ++l) xs.push_back(geometry.bitline_to_x(l));
    return xs;
}

namespace {

std::string format_lines(const std::vector<int>& lines) {
    if (lines.empty()) return "-";
    std::string s;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) s += '+';
        s += std::to_string(lines[i]);
    }
    return s;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

} // namespace

void write_csv(std::ostream& out, const CampaignResult& result) {
    out << "x_um,bitline,accuracy,faulted_bits\n";
    for (const CampaignRow& r : result.rows)
        out << fmt("%g", r.x_um) << ',' << format_lines(r.bit_lines) << ','
            << fmt("%.6f", r.accuracy) << ',' << r.faulted_bits << '\n';
}

void write_summary(std::ostream& out, const CampaignResult& result) {
    const CampaignRow& w = result.worst();
    out << "baseline_accuracy " << fmt("%.6f", result.baseline_accuracy) << '\n'
        << "positions " << result.rows.size() << '\n'
        << "worst_x_um " << fmt("%g", w.x_um) << '\n'
        << "worst_bitline " << format_lines(w.bit_lines) << '\n'
        << "worst_accuracy " << fmt("%.6f", w.accuracy) << '\n'
        << "max_faulted_bits " << result.max_faulted_bits() << '\n';
}

} // namespace bitglow::faultsim
