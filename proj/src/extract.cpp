#include "bitglow/extract.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "bitglow/parallel.hpp"

namespace bitglow::extract {

namespace {

// Nominal per-probe state: every layer's accumulators and saturated outputs.
// Lets a single-weight fault be evaluated as a local delta plus a downstream
// recompute that stops as soon as a layer reproduces its nominal output.
struct ProbeState {
    std::vector<std::vector<std::int8_t>> outs;   // outs[0] = input, outs[l+1] = layer l output
    std::vector<std::vector<std::int32_t>> accs;  // accs[l] = layer l pre-shift accumulators
    int label = 0;
};

ProbeState run_nominal(const quant::QuantizedModel& model, const quant::QTensor& input) {
    ProbeState st;
    st.outs.resize(model.layers.size() + 1);
    st.accs.resize(model.layers.size());
    st.outs[0] = input.values;

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const quant::QLayer& layer = model.layers[l];
        st.accs[l].resize(layer.out);
        st.outs[l + 1].resize(layer.out);
        const std::vector<std::int8_t>& in = st.outs[l];
        for (std::size_t i = 0; i < layer.out; ++i) {
            std::int32_t acc = layer.bias_q ? (*layer.bias_q)[i] : 0;
            const std::int8_t* w = layer.q.data() + i * layer.in;
            for (std::size_t j = 0; j < layer.in; ++j)
                acc += static_cast<std::int32_t>(w[j]) * static_cast<std::int32_t>(in[j]);
            st.accs[l][i] = acc;
            int v = quant::saturating_shift(acc, layer.out_shift);
            if (layer.relu) v = std::max(0, v);
            st.outs[l + 1][i] = static_cast<std::int8_t>(v);
        }
    }
    const auto& logits = st.outs.back();
    st.label = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    return st;
}

// True when a transient replacement of one weight byte changes the quantized
// logits (or just the label in labels_only mode). Bit-exact equivalent of a
// full faulted inference.
bool fault_changes_output(const quant::QuantizedModel& model, const ProbeState& st,
                          quant::QuantizedModel::WeightRef ref, std::int8_t faulted,
                          bool labels_only) {
    const quant::QLayer& layer = model.layers[ref.layer];
    const std::int8_t original = layer.q[ref.row * layer.in + ref.col];
    const std::int32_t delta =
        (static_cast<std::int32_t>(faulted) - static_cast<std::int32_t>(original)) *
        static_cast<std::int32_t>(st.outs[ref.layer][ref.col]);

    const std::int32_t acc = st.accs[ref.layer][ref.row] + delta;
    int v = quant::saturating_shift(acc, layer.out_shift);
    if (layer.relu) v = std::max(0, v);
    if (static_cast<std::int8_t>(v) == st.outs[ref.layer + 1][ref.row]) return false;

    std::vector<std::int8_t> cur = st.outs[ref.layer + 1];
    cur[ref.row] = static_cast<std::int8_t>(v);

    std::vector<std::int8_t> next;
    for (std::size_t l = ref.layer + 1; l < model.layers.size(); ++l) {
        const quant::QLayer& q = model.layers[l];
        next.assign(q.out, 0);
        for (std::size_t i = 0; i < q.out; ++i) {
            std::int32_t a = q.bias_q ? (*q.bias_q)[i] : 0;
            const std::int8_t* w = q.q.data() + i * q.in;
            for (std::size_t j = 0; j < q.in; ++j)
                a += static_cast<std::int32_t>(w[j]) * static_cast<std::int32_t>(cur[j]);
            int o = quant::saturating_shift(a, q.out_shift);
            if (q.relu) o = std::max(0, o);
            next[i] = static_cast<std::int8_t>(o);
        }
        if (next == st.outs[l + 1]) return false;
        cur.swap(next);
    }

    if (!labels_only) return true;  // some logit differs
    const int faulted_label =
        static_cast<int>(std::max_element(cur.begin(), cur.end()) - cur.begin());
    return faulted_label != st.label;
}

std::vector<ProbeState> build_states(const quant::QuantizedModel& model,
                                     std::span<const quant::QTensor> probes) {
    std::vector<ProbeState> states(probes.size());
    parallel_for(probes.size(), [&](std::size_t p) { states[p] = run_nominal(model, probes[p]); });
    return states;
}

Guess probe_with_states(const quant::QuantizedModel& model, std::span<const ProbeState> states,
                        std::size_t weight_id, bool labels_only) {
    const auto byte = static_cast<std::uint8_t>(model.weight(weight_id));
    const auto set = static_cast<std::uint8_t>(byte | 0x80u);
    if (set == byte) return Guess::one;  // bit-set is a no-op on a stored 1

    const auto ref = model.ref(weight_id);
    for (const ProbeState& st : states)
        if (fault_changes_output(model, st, ref, static_cast<std::int8_t>(set), labels_only))
            return Guess::zero;
    return Guess::one;
}

ExtractionReport run_extraction(const quant::QuantizedModel& model,
                                const flash::FlashImage& image,
                                std::span<const quant::QTensor> probes,
                                std::span<const std::size_t> weight_ids, bool labels_only) {
    if (probes.empty()) throw std::invalid_argument("extraction: no probe inputs");
    if (model.weight_count() != image.bytes.size())
        throw std::invalid_argument("extraction: image does not match model");

    const std::vector<ProbeState> states = build_states(model, probes);

    ExtractionReport report;
    report.probe_count = probes.size();
    report.rows.resize(weight_ids.size());

    parallel_for(weight_ids.size(), [&](std::size_t i) {
        const std::size_t id = weight_ids[i];
        ExtractionReport::Row& row = report.rows[i];
        row.weight_id = id;
        row.true_msb = (image.bytes[id] & 0x80u) ? 1 : 0;
        row.guess = probe_with_states(model, states, id, labels_only);
        row.correct = (row.guess == Guess::one) == (row.true_msb == 1);
    });

    for (const auto& row : report.rows) {
        if (row.guess == Guess::zero) {
            ++report.guessed_zero;
            if (!row.correct) ++report.incorrect_among_guessed_zero;
        } else {
            ++report.guessed_one;
        }
        if (row.correct)
            ++report.correct;
        else
            ++report.incorrect;
    }
    report.recovered_fraction =
        static_cast<double>(report.correct) / static_cast<double>(report.rows.size());
    return report;
}

} // namespace

std::vector<quant::QTensor> make_probe_inputs(const quant::QuantizedModel& model,
                                              std::size_t count, std::uint64_t seed,
                                              double density) {
    if (density <= 0.0 || density > 1.0)
        throw std::invalid_argument("probe density must be in (0, 1]");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dist(model.input_qmin, model.input_qmax);
    std::bernoulli_distribution active(density);
    const auto rest = static_cast<std::int8_t>(
        std::clamp<int>(0, model.input_qmin, model.input_qmax));
    std::vector<quant::QTensor> probes(count);
    for (quant::QTensor& p : probes) {
        p.dec = model.input_dec;
        p.values.resize(model.input_dim);
        for (std::int8_t& v : p.values)
            v = (density >= 1.0 || active(rng)) ? static_cast<std::int8_t>(dist(rng)) : rest;
    }
    return probes;
}

Guess probe_weight(const quant::QuantizedModel& model, const flash::FlashImage& image,
                   std::size_t weight_id, std::span<const quant::QTensor> probes,
                   bool labels_only) {
    if (weight_id >= image.bytes.size()) throw std::out_of_range("probe_weight: bad weight id");
    if (probes.empty()) throw std::invalid_argument("probe_weight: no probe inputs");
    const std::vector<ProbeState> states = build_states(model, probes);
    return probe_with_states(model, states, weight_id, labels_only);
}

ExtractionReport extract_msbs(const quant::QuantizedModel& model, const flash::FlashImage& image,
                              std::span<const quant::QTensor> probes, bool labels_only) {
    std::vector<std::size_t> ids(model.weight_count());
    std::iota(ids.begin(), ids.end(), 0);
    return run_extraction(model, image, probes, ids, labels_only);
}

ExtractionReport extract_msbs_subset(const quant::QuantizedModel& model,
                                     const flash::FlashImage& image,
                                     std::span<const quant::QTensor> probes,
                                     std::span<const std::size_t> weight_ids, bool labels_only) {
    return run_extraction(model, image, probes, weight_ids, labels_only);
}

void write_csv(std::ostream& out, const ExtractionReport& report) {
    out << "weight_id,true_msb,guess,correct\n";
    for (const auto& row : report.rows)
        out << row.weight_id << ',' << row.true_msb << ','
            << (row.guess == Guess::one ? 1 : 0) << ',' << (row.correct ? 1 : 0) << '\n';
}

void write_report(std::ostream& out, const ExtractionReport& report) {
    out << "weights " << report.rows.size() << '\n'
        << "probes " << report.probe_count << '\n'
        << "guessed_zero " << report.guessed_zero << '\n'
        << "guessed_one " << report.guessed_one << '\n'
        << "correct " << report.correct << '\n'
        << "incorrect " << report.incorrect << '\n'
        << "incorrect_among_guessed_zero " << report.incorrect_among_guessed_zero << '\n';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", report.recovered_fraction);
    out << "recovered_fraction " << buf << '\n';
}

} // namespace bitglow::extract
