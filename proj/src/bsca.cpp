#include "bitglow/bsca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "bitglow/parallel.hpp"

namespace bitglow::bsca {

namespace {

void check_line(Line line) {
    if (line.column < 0 || line.column > 3 || line.bit < 0 || line.bit > 7)
        throw std::invalid_argument("line out of range");
}

// Dequantized value change of setting `bit` in a weight byte: +2^bit steps
// for value bits, -2^7 steps for the two's-complement sign bit.
double delta_w(int bit, int weight_dec) {
    const double step = std::ldexp(1.0, -weight_dec);
    return bit == 7 ? -128.0 * step : std::ldexp(1.0, bit) * step;
}

} // namespace

std::vector<data::Sample> draw_batch(std::span<const data::Sample> pool, std::size_t n,
                                     std::uint64_t seed) {
    if (pool.empty()) throw std::invalid_argument("draw_batch: empty pool");
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<data::Sample> batch;
    batch.reserve(std::min(n, pool.size()));
    for (std::size_t i = 0; i < std::min(n, pool.size()); ++i) batch.push_back(pool[idx[i]]);
    return batch;
}

std::vector<Candidate> bit_gradient_rank(const quant::QuantizedModel& model,
                                         const nn::FloatModel& shadow,
                                         std::span<const data::Sample> batch, Line line) {
    check_line(line);
    const nn::Gradients grads = nn::backward(shadow, batch);

    std::vector<Candidate> candidates;
    const std::uint8_t mask = static_cast<std::uint8_t>(1u << line.bit);
    std::size_t id = 0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const quant::QLayer& layer = model.layers[l];
        for (std::size_t i = 0; i < layer.q.size(); ++i, ++id) {
            if (id % 4 != static_cast<std::size_t>(line.column)) continue;
            const auto byte = static_cast<std::uint8_t>(layer.q[i]);
            if (byte & mask) continue;  // already set
            const double g = grads.weights[l].a[i];
            candidates.push_back({id, line.bit, g * delta_w(line.bit, layer.weight_dec)});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    return candidates;
}

LineAttackResult bsca_line(const quant::QuantizedModel& model, const flash::FlashImage& image,
                           Line line, const BscaConfig& config,
                           std::span<const data::Sample> batch,
                           std::span<const data::Sample> eval_set) {
    check_line(line);
    if (batch.empty() || eval_set.empty())
        throw std::invalid_argument("bsca_line: empty batch or eval set");
    if (model.weight_count() != image.bytes.size())
        throw std::invalid_argument("bsca_line: image does not match model");

    LineAttackResult result;
    result.line = line;
    result.model = model;
    result.final_accuracy = quant::q_accuracy(result.model, eval_set);

    const std::uint8_t mask = static_cast<std::uint8_t>(1u << line.bit);

    for (int flip = 0; flip < config.budget; ++flip) {
        const nn::FloatModel shadow = quant::dequantize(result.model);
        std::vector<Candidate> ranked = bit_gradient_rank(result.model, shadow, batch, line);
        if (ranked.empty()) {
            result.exhausted = true;
            break;
        }
        if (ranked.size() > static_cast<std::size_t>(config.candidate_cap))
            ranked.resize(static_cast<std::size_t>(config.candidate_cap));

        const double loss_before = quant::q_loss(result.model, batch);

        // Flip-measure-restore over the shortlist.
        std::vector<double> measured(ranked.size());
        for (std::size_t c = 0; c < ranked.size(); ++c) {
            const std::size_t id = ranked[c].weight_id;
            const std::int8_t original = result.model.weight(id);
            result.model.set_weight(
                id, static_cast<std::int8_t>(static_cast<std::uint8_t>(original) | mask));
            measured[c] = quant::q_loss(result.model, batch);
            result.model.set_weight(id, original);
        }

        // Argmax measured loss; on ties the lowest weight id wins.
        std::size_t best = 0;
        for (std::size_t c = 1; c < measured.size(); ++c) {
            if (measured[c] > measured[best] ||
                (measured[c] == measured[best] &&
                 ranked[c].weight_id < ranked[best].weight_id))
                best = c;
        }

        FlipRecord rec;
        rec.weight_id = ranked[best].weight_id;
        rec.bit = line.bit;
        rec.byte_before = static_cast<std::uint8_t>(result.model.weight(rec.weight_id));
        rec.byte_after = static_cast<std::uint8_t>(rec.byte_before | mask);
        rec.loss_before = loss_before;
        rec.loss_after = measured[best];
        result.model.set_weight(rec.weight_id, static_cast<std::int8_t>(rec.byte_after));
        rec.accuracy_after = quant::q_accuracy(result.model, eval_set);
        result.final_accuracy = rec.accuracy_after;
        result.log.push_back(rec);
    }
    return result;
}

SearchResult bsca_search(const quant::QuantizedModel& model, const flash::FlashImage& image,
                         const BscaConfig& config, std::span<const data::Sample> batch,
                         std::span<const data::Sample> eval_set) {
    SearchResult search;
    search.baseline_accuracy = quant::q_accuracy(model, eval_set);

    std::vector<LineAttackResult> results(32);
    parallel_for(32, [&](std::size_t idx) {
        const Line line{static_cast<int>(idx / 8), static_cast<int>(idx % 8)};
        results[idx] = bsca_line(model, image, line, config, batch, eval_set);
    });

    std::size_t best = 0;
    for (std::size_t idx = 0; idx < results.size(); ++idx) {
        search.line_accuracy[idx] = results[idx].final_accuracy;
        if (results[idx].final_accuracy < results[best].final_accuracy) best = idx;
    }
    search.best = results[best].line;
    search.best_result = std::move(results[best]);
    return search;
}

std::vector<double> replay_on_simulator(std::span<const FlipRecord> log, Line line,
                                        const quant::QuantizedModel& model,
                                        const flash::FlashImage& image,
                                        std::span<const data::Sample> eval_set) {
    check_line(line);
    std::vector<double> curve;
    curve.reserve(log.size() + 1);

    const flash::SpotConfig spot{line.bit_line(), 1};
    std::vector<std::size_t> prefix;
    for (std::size_t n = 0; n <= log.size(); ++n) {
        if (n > 0) prefix.push_back(log[n - 1].weight_id);
        const faultsim::TriggerSet trigger = faultsim::TriggerSet::only(prefix);
        std::size_t correct = 0;
        for (const data::Sample& s : eval_set) {
            const auto r = faultsim::faulted_inference(model, image, {&spot, 1}, trigger, s.x);
            if (r.label == s.label) ++correct;
        }
        curve.push_back(static_cast<double>(correct) / static_cast<double>(eval_set.size()));
    }
    return curve;
}

namespace {

std::string num(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void write_flip_table(std::ostream& out, const LineAttackResult& result,
                      const flash::FlashImage& image) {
    out << "# flip weight_id flash_offset word column bit byte_before byte_after "
           "loss_before loss_after accuracy_after\n";
    for (std::size_t i = 0; i < result.log.size(); ++i) {
        const FlipRecord& r = result.log[i];
        const auto loc = flash::locate(image, r.weight_id, r.bit);
        out << i + 1 << ' ' << r.weight_id << ' ' << r.weight_id << ' ' << loc.word_index << ' '
            << loc.byte_column << ' ' << r.bit << ' ' << static_cast<int>(r.byte_before) << ' '
            << static_cast<int>(r.byte_after) << ' ' << num(r.loss_before) << ' '
            << num(r.loss_after) << ' ' << num(r.accuracy_after) << '\n';
    }
}

} // namespace

void write_line_report(std::ostream& out, const LineAttackResult& result, double baseline,
                       const flash::FlashImage& image) {
    out << "line column=" << result.line.column << " bit=" << result.line.bit
        << " bitline=" << result.line.bit_line() << '\n';
    out << "baseline_accuracy " << num(baseline) << '\n';
    out << "final_accuracy " << num(result.final_accuracy) << '\n';
    out << "flips " << result.log.size() << '\n';
    if (result.exhausted) out << "note candidates exhausted before budget\n";
    write_flip_table(out, result, image);
}

void write_report(std::ostream& out, const SearchResult& result,
                  const flash::FlashImage& image) {
    out << "baseline_accuracy " << num(result.baseline_accuracy) << '\n';
    out << "winning_line column=" << result.best.column << " bit=" << result.best.bit
        << " bitline=" << result.best.bit_line() << '\n';
    out << "worst_accuracy " << num(result.best_result.final_accuracy) << '\n';
    out << "# line table: column bit bitline accuracy\n";
    for (int m = 0; m < 4; ++m)
        for (int k = 0; k < 8; ++k) {
            const Line l{m, k};
            out << m << ' ' << k << ' ' << l.bit_line() << ' '
                << num(result.line_accuracy[SearchResult::table_index(l)]) << '\n';
        }
    write_flip_table(out, result.best_result, image);
}

void write_replay_csv(std::ostream& out, std::span<const double> curve) {
    out << "flips,accuracy\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
        out << i << ',' << num(curve[i]) << '\n';
}

} // namespace bitglow::bsca
