#include "bitglow/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bitglow::nn {

std::size_t FloatModel::weight_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.weights.size();
    return n;
}

std::size_t FloatModel::parameter_count() const {
    std::size_t n = weight_count();
    for (const Layer& l : layers)
        if (l.bias) n += l.bias->size();
    return n;
}

void FloatModel::validate() const {
    if (layers.empty()) throw std::invalid_argument("model has no layers");
    std::size_t in = input_dim;
    for (const Layer& l : layers) {
        if (l.weights.cols != in)
            throw std::invalid_argument("layer dimensions do not chain");
        if (l.bias && l.bias->size() != l.weights.rows)
            throw std::invalid_argument("bias length mismatch");
        in = l.weights.rows;
    }
    if (layers.back().activation != Activation::none)
        throw std::invalid_argument("last layer must emit raw logits");
}

Vec forward(const FloatModel& model, std::span<const double> input) {
    if (input.size() != model.input_dim)
        throw std::invalid_argument("input length does not match model input_dim");
    Vec cur(input.begin(), input.end());
    Vec next;
    for (const Layer& l : model.layers) {
        next.assign(l.weights.rows, 0.0);
        l.weights.matvec(cur, next);
        if (l.bias)
            for (std::size_t i = 0; i < next.size(); ++i) next[i] += (*l.bias)[i];
        if (l.activation == Activation::relu)
            for (double& v : next) v = std::max(0.0, v);
        cur.swap(next);
    }
    return cur;
}

int predict(const FloatModel& model, std::span<const double> input) {
    Vec logits = forward(model, input);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

namespace {

// log softmax(logits)[label], computed with the max-shift trick.
double log_softmax_at(const Vec& logits, int label) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return (logits[static_cast<std::size_t>(label)] - mx) - std::log(sum);
}

} // namespace

double loss(const FloatModel& model, std::span<const data::Sample> batch) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    double total = 0.0;
    for (const data::Sample& s : batch) {
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= model.output_dim())
            throw std::invalid_argument("loss: label out of range");
        total -= log_softmax_at(forward(model, s.x), s.label);
    }
    return total / static_cast<double>(batch.size());
}

Gradients backward(const FloatModel& model, std::span<const data::Sample> batch) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");
    const std::size_t L = model.layers.size();

    Gradients g;
    g.weights.reserve(L);
    g.biases.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const Mat& w = model.layers[l].weights;
        g.weights.emplace_back(w.rows, w.cols);
        if (model.layers[l].bias) g.biases[l].assign(w.rows, 0.0);
    }

    std::vector<Vec> acts(L + 1);   // post-activation values, acts[0] = input
    std::vector<Vec> pre(L);        // pre-activation values
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    for (const data::Sample& s : batch) {
        acts[0].assign(s.x.begin(), s.x.end());
        for (std::size_t l = 0; l < L; ++l) {
            const Layer& layer = model.layers[l];
            pre[l].assign(layer.weights.rows, 0.0);
            layer.weights.matvec(acts[l], pre[l]);
            if (layer.bias)
                for (std::size_t i = 0; i < pre[l].size(); ++i) pre[l][i] += (*layer.bias)[i];
            acts[l + 1] = pre[l];
            if (layer.activation == Activation::relu)
                for (double& v : acts[l + 1]) v = std::max(0.0, v);
        }

        // dL/dlogits = softmax - onehot, averaged over the batch.
        Vec delta = acts[L];
        const double mx = *std::max_element(delta.begin(), delta.end());
        double sum = 0.0;
        for (double& v : delta) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : delta) v /= sum;
        delta[static_cast<std::size_t>(s.label)] -= 1.0;
        for (double& v : delta) v *= inv_n;

        for (std::size_t l = L; l-- > 0;) {
            const Layer& layer = model.layers[l];
            if (layer.activation == Activation::relu)
                for (std::size_t i = 0; i < delta.size(); ++i)
                    if (pre[l][i] <= 0.0) delta[i] = 0.0;

            Mat& gw = g.weights[l];
            const Vec& a = acts[l];
            for (std::size_t i = 0; i < gw.rows; ++i) {
                const double di = delta[i];
                if (di == 0.0) continue;
                double* grow = gw.row(i);
                for (std::size_t j = 0; j < gw.cols; ++j) grow[j] += di * a[j];
            }
            if (layer.bias)
                for (std::size_t i = 0; i < delta.size(); ++i) g.biases[l][i] += delta[i];

            if (l > 0) {
                Vec prev(layer.weights.cols, 0.0);
                for (std::size_t i = 0; i < layer.weights.rows; ++i) {
                    const double di = delta[i];
                    if (di == 0.0) continue;
                    const double* wrow = layer.weights.row(i);
                    for (std::size_t j = 0; j < layer.weights.cols; ++j) prev[j] += di * wrow[j];
                }
                delta.swap(prev);
            }
        }
    }
    return g;
}

double accuracy(const FloatModel& model, std::span<const data::Sample> samples) {
    if (samples.empty()) throw std::invalid_argument("accuracy: empty sample set");
    std::size_t correct = 0;
    for (const data::Sample& s : samples)
        if (predict(model, s.x) == s.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

namespace {

FloatModel init_model(const TrainConfig& cfg, std::mt19937_64& rng) {
    if (cfg.arch.size() < 2) throw std::invalid_argument("train: arch needs >= 2 entries");
    FloatModel m;
    m.input_dim = cfg.arch.front();
    for (std::size_t l = 1; l < cfg.arch.size(); ++l) {
        Layer layer;
        const std::size_t fan_in = cfg.arch[l - 1], fan_out = cfg.arch[l];
        layer.weights = Mat(fan_out, fan_in);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : layer.weights.a) w = dist(rng);
        if (cfg.with_bias) layer.bias = Vec(fan_out, 0.0);
        layer.activation = (l + 1 == cfg.arch.size()) ? Activation::none : Activation::relu;
        m.layers.push_back(std::move(layer));
    }
    m.validate();
    return m;
}

} // namespace

TrainResult train(const TrainConfig& cfg, const data::Dataset& dataset) {
    if (dataset.train.empty() || dataset.test.empty())
        throw std::invalid_argument("train: dataset must have train and test splits");

    std::mt19937_64 rng(cfg.seed);
    FloatModel model = init_model(cfg, rng);

    std::vector<Mat> vel_w;
    std::vector<Vec> vel_b(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        vel_w.emplace_back(layer.weights.rows, layer.weights.cols);
        if (layer.bias) vel_b[l].assign(layer.bias->size(), 0.0);
    }

    std::vector<std::size_t> order(dataset.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<data::Sample> batch;

    const double mu = cfg.optimizer == Optimizer::sgd_momentum ? cfg.momentum : 0.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset.train[order[i]]);

            Gradients g = backward(model, batch);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                Mat& w = model.layers[l].weights;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    vel_w[l].a[i] = mu * vel_w[l].a[i] - cfg.learning_rate * g.weights[l].a[i];
                    w.a[i] += vel_w[l].a[i];
                }
                if (model.layers[l].bias) {
                    Vec& b = *model.layers[l].bias;
                    for (std::size_t i = 0; i < b.size(); ++i) {
                        vel_b[l][i] = mu * vel_b[l][i] - cfg.learning_rate * g.biases[l][i];
                        b[i] += vel_b[l][i];
                    }
                }
            }
        }
    }

    TrainResult result;
    result.train_accuracy = accuracy(model, dataset.train);
    result.test_accuracy = accuracy(model, dataset.test);
    result.model = std::move(model);

    if (cfg.accuracy_floor && result.test_accuracy < *cfg.accuracy_floor)
        throw TrainError("training did not reach the configured accuracy floor: reached " +
                             std::to_string(result.test_accuracy) + ", floor " +
                             std::to_string(*cfg.accuracy_floor),
                         result.test_accuracy, *cfg.accuracy_floor);
    return result;
}

} // namespace bitglow::nn
