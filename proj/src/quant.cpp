#include "bitglow/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bitglow::quant {

std::size_t QuantizedModel::weight_count() const {
    std::size_t n = 0;
    for (const QLayer& l : layers) n += l.q.size();
    return n;
}

QuantizedModel::WeightRef QuantizedModel::ref(std::size_t weight_id) const {
    std::size_t base = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::size_t n = layers[l].q.size();
        if (weight_id < base + n) {
            const std::size_t local = weight_id - base;
            return {l, local / layers[l].in, local % layers[l].in};
        }
        base += n;
    }
    throw std::out_of_range("weight id out of range");
}

std::size_t QuantizedModel::id_of(std::size_t layer, std::size_t row, std::size_t col) const {
    std::size_t base = 0;
    for (std::size_t l = 0; l < layer; ++l) base += layers[l].q.size();
    return base + row * layers[layer].in + col;
}

std::int8_t QuantizedModel::weight(std::size_t weight_id) const {
    const WeightRef r = ref(weight_id);
    return layers[r.layer].q[r.row * layers[r.layer].in + r.col];
}

void QuantizedModel::set_weight(std::size_t weight_id, std::int8_t value) {
    const WeightRef r = ref(weight_id);
    layers[r.layer].q[r.row * layers[r.layer].in + r.col] = value;
}

int saturating_shift(std::int32_t acc, int shift) {
    const std::int32_t shifted = acc >> shift;  // arithmetic, rounds toward -inf
    return std::clamp(shifted, -128, 127);
}

std::int8_t quantize_value(double v, int dec) {
    const double scaled = v * std::ldexp(1.0, dec);
    const double rounded = std::round(scaled);  // half away from zero
    return static_cast<std::int8_t>(std::clamp(rounded, -128.0, 127.0));
}

int dec_bits_for(double max_abs) {
    if (max_abs <= 0.0) return 7;
    return 7 - static_cast<int>(std::ceil(std::log2(max_abs)));
}

QuantizedModel quantize(const nn::FloatModel& model,
                        std::span<const data::Sample> calibration) {
    model.validate();
    if (calibration.empty()) throw std::invalid_argument("quantize: empty calibration set");

    QuantizedModel qm;
    qm.input_dim = model.input_dim;

    // Input fixed-point position from training-set max |x|.
    double in_max = 0.0;
    for (const data::Sample& s : calibration)
        for (double v : s.x) in_max = std::max(in_max, std::abs(v));
    qm.input_dec = dec_bits_for(in_max);

    // Per-layer activation ranges from the float forward pass.
    std::vector<double> act_max(model.layers.size(), 0.0);
    for (const data::Sample& s : calibration) {
        Vec cur(s.x.begin(), s.x.end());
        Vec next;
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            const nn::Layer& layer = model.layers[l];
            next.assign(layer.weights.rows, 0.0);
            layer.weights.matvec(cur, next);
            if (layer.bias)
                for (std::size_t i = 0; i < next.size(); ++i) next[i] += (*layer.bias)[i];
            if (layer.activation == nn::Activation::relu)
                for (double& v : next) v = std::max(0.0, v);
            for (double v : next) act_max[l] = std::max(act_max[l], std::abs(v));
            cur.swap(next);
        }
    }

    int in_dec = qm.input_dec;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const nn::Layer& fl = model.layers[l];
        QLayer ql;
        ql.out = fl.weights.rows;
        ql.in = fl.weights.cols;
        ql.relu = fl.activation == nn::Activation::relu;

        double w_max = 0.0;
        for (double w : fl.weights.a) w_max = std::max(w_max, std::abs(w));
        ql.weight_dec = dec_bits_for(w_max);

        ql.q.resize(fl.weights.size());
        for (std::size_t i = 0; i < fl.weights.size(); ++i)
            ql.q[i] = quantize_value(fl.weights.a[i], ql.weight_dec);

        // out_shift must stay non-negative: clamp the output position when the
        // activations are so small that the shift would go the other way.
        ql.out_dec = std::min(dec_bits_for(act_max[l]), in_dec + ql.weight_dec);
        ql.out_shift = in_dec + ql.weight_dec - ql.out_dec;

        if (fl.bias) {
            std::vector<std::int32_t> bq(fl.bias->size());
            const double scale = std::ldexp(1.0, in_dec + ql.weight_dec);
            for (std::size_t i = 0; i < bq.size(); ++i)
                bq[i] = static_cast<std::int32_t>(std::round((*fl.bias)[i] * scale));
            ql.bias_q = std::move(bq);
        }

        in_dec = ql.out_dec;
        qm.layers.push_back(std::move(ql));
    }

    // Calibrated quantized input range, used by extraction probes.
    std::int8_t qmin = 127, qmax = -128;
    for (const data::Sample& s : calibration)
        for (double v : s.x) {
            const std::int8_t q = quantize_value(v, qm.input_dec);
            qmin = std::min(qmin, q);
            qmax = std::max(qmax, q);
        }
    qm.input_qmin = qmin;
    qm.input_qmax = qmax;
    return qm;
}

QTensor quantize_input(std::span<const double> x, int dec) {
    QTensor t;
    t.dec = dec;
    t.values.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t.values[i] = quantize_value(x[i], dec);
    return t;
}

InferenceResult q_infer(const QuantizedModel& model, const QTensor& input,
                        const LoadHook* hook) {
    if (input.values.size() != model.input_dim)
        throw std::invalid_argument("q_infer: input length mismatch");

    std::vector<std::int8_t> cur = input.values;
    std::vector<std::int8_t> next;
    std::size_t weight_id = 0;

    for (const QLayer& layer : model.layers) {
        next.assign(layer.out, 0);
        for (std::size_t i = 0; i < layer.out; ++i) {
            std::int32_t acc = layer.bias_q ? (*layer.bias_q)[i] : 0;
            const std::int8_t* wrow = layer.q.data() + i * layer.in;
            for (std::size_t j = 0; j < layer.in; ++j) {
                std::int8_t w = wrow[j];
                if (hook) {
                    const std::uint8_t faulted =
                        (*hook)(weight_id, static_cast<std::uint8_t>(w));
                    w = static_cast<std::int8_t>(faulted);
                }
                ++weight_id;
                acc += static_cast<std::int32_t>(w) * static_cast<std::int32_t>(cur[j]);
            }
            int v = saturating_shift(acc, layer.out_shift);
            if (layer.relu) v = std::max(0, v);
            next[i] = static_cast<std::int8_t>(v);
        }
        cur.swap(next);
    }

    InferenceResult r;
    r.logits.values = std::move(cur);
    r.logits.dec = model.layers.back().out_dec;
    // Lowest label index wins ties.
    r.label = static_cast<int>(std::max_element(r.logits.values.begin(), r.logits.values.end()) -
                               r.logits.values.begin());
    return r;
}

double q_accuracy(const QuantizedModel& model, std::span<const data::Sample> samples,
                  const LoadHook* hook) {
    if (samples.empty()) throw std::invalid_argument("q_accuracy: empty sample set");
    std::size_t correct = 0;
    for (const data::Sample& s : samples) {
        const QTensor in = quantize_input(s.x, model.input_dec);
        if (q_infer(model, in, hook).label == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double q_loss(const QuantizedModel& model, std::span<const data::Sample> batch,
              const LoadHook* hook) {
    if (batch.empty()) throw std::invalid_argument("q_loss: empty batch");
    const double scale = std::ldexp(1.0, -model.layers.back().out_dec);
    double total = 0.0;
    for (const data::Sample& s : batch) {
        const QTensor in = quantize_input(s.x, model.input_dec);
        const InferenceResult r = q_infer(model, in, hook);
        double mx = -1e300;
        for (std::int8_t v : r.logits.values) mx = std::max(mx, v * scale);
        double sum = 0.0;
        for (std::int8_t v : r.logits.values) sum += std::exp(v * scale - mx);
        total -= (r.logits.values[static_cast<std::size_t>(s.label)] * scale - mx) - std::log(sum);
    }
    return total / static_cast<double>(batch.size());
}

nn::FloatModel dequantize(const QuantizedModel& model) {
    nn::FloatModel fm;
    fm.input_dim = model.input_dim;
    int in_dec = model.input_dec;
    for (const QLayer& ql : model.layers) {
        nn::Layer fl;
        fl.weights = Mat(ql.out, ql.in);
        const double wscale = std::ldexp(1.0, -ql.weight_dec);
        for (std::size_t i = 0; i < ql.q.size(); ++i) fl.weights.a[i] = ql.q[i] * wscale;
        if (ql.bias_q) {
            const double bscale = std::ldexp(1.0, -(in_dec + ql.weight_dec));
            Vec b(ql.bias_q->size());
            for (std::size_t i = 0; i < b.size(); ++i) b[i] = (*ql.bias_q)[i] * bscale;
            fl.bias = std::move(b);
        }
        fl.activation = ql.relu ? nn::Activation::relu : nn::Activation::none;
        in_dec = ql.out_dec;
        fm.layers.push_back(std::move(fl));
    }
    return fm;
}

} // namespace bitglow::quant
