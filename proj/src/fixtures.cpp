#include "bitglow/fixtures.hpp"

#include <cstdlib>
#include <filesystem>
#include <stdexcept>

namespace bitglow::fixtures {

namespace {

std::string pick(const std::string& dir, const std::string& name) {
    namespace fs = std::filesystem;
    const fs::path plain = fs::path(dir) / name;
    if (fs::exists(plain)) return plain.string();
    return (fs::path(dir) / (name + ".gz")).string();
}

} // namespace

MnistPaths MnistPaths::in_dir(const std::string& dir) {
    return {pick(dir, "train-images-idx3-ubyte"), pick(dir, "train-labels-idx1-ubyte"),
            pick(dir, "t10k-images-idx3-ubyte"), pick(dir, "t10k-labels-idx1-ubyte")};
}

std::string default_mnist_dir() {
    if (const char* env = std::getenv("BITGLOW_MNIST_DIR")) return env;
    return "assets/mnist";
}

nn::TrainConfig config_for(const std::string& arch_name, std::uint64_t seed) {
    nn::TrainConfig cfg;
    cfg.seed = seed;
    if (arch_name == "iris_a") {
        cfg.arch = {4, 1, 3};
        cfg.with_bias = true;
        cfg.epochs = 400;
        cfg.batch_size = 16;
        cfg.learning_rate = 0.05;
    } else if (arch_name == "iris_b") {
        cfg.arch = {4, 4, 3};
        cfg.with_bias = true;
        cfg.epochs = 500;
        cfg.batch_size = 16;
        cfg.learning_rate = 0.05;
        cfg.accuracy_floor = 0.93;
    } else if (arch_name == "mnist_mlp") {
        cfg.arch = {50, 10, 10};
        cfg.with_bias = true;  // 620 trainable parameters
        cfg.epochs = 40;
        cfg.batch_size = 32;
        cfg.learning_rate = 0.05;
        cfg.accuracy_floor = 0.90;
    } else if (arch_name == "mnist_deep") {
        cfg.arch = {784, 128, 64, 10};
        cfg.epochs = 12;
        cfg.batch_size = 64;
        cfg.learning_rate = 0.1;
        cfg.accuracy_floor = 0.95;
    } else {
        throw std::invalid_argument("unknown arch: " + arch_name);
    }
    return cfg;
}

namespace {

Fixture finish(const std::string& arch_name, const std::string& dataset_name,
               std::uint64_t seed, nn::TrainResult trained, data::Preprocess prep,
               std::vector<data::Sample> train, std::vector<data::Sample> test) {
    Fixture f;
    f.prov.arch_name = arch_name;
    f.prov.dataset = dataset_name;
    f.prov.seed = seed;
    f.prov.train_accuracy = trained.train_accuracy;
    f.prov.test_accuracy = trained.test_accuracy;
    f.model = std::move(trained.model);
    f.prep = std::move(prep);
    f.train = std::move(train);
    f.test = std::move(test);
    f.qmodel = quant::quantize(f.model, f.train);
    f.q_test_accuracy = quant::q_accuracy(f.qmodel, f.test);
    return f;
}

Fixture make_iris(const std::string& arch_name, std::uint64_t seed) {
    data::Dataset ds = data::load_iris(seed);
    nn::TrainResult trained = nn::train(config_for(arch_name, seed), ds);
    return finish(arch_name, "iris", seed, std::move(trained), {}, std::move(ds.train),
                  std::move(ds.test));
}

} // namespace

Fixture make_iris_a(std::uint64_t seed) { return make_iris("iris_a", seed); }

Fixture make_iris_b(std::uint64_t seed) { return make_iris("iris_b", seed); }

Fixture make_mnist_mlp(const MnistPaths& paths, std::uint64_t seed) {
    data::Dataset raw = data::load_mnist(paths.train_images, paths.train_labels,
                                         paths.test_images, paths.test_labels);
    data::Preprocess prep;
    prep.pca = data::fit_pca(raw.train, 50);

    data::Dataset ds;
    ds.class_count = raw.class_count;
    ds.train = prep.apply_all(raw.train);
    ds.test = prep.apply_all(raw.test);
    raw = {};  // free the pixel-space copy before training

    nn::TrainResult trained = nn::train(config_for("mnist_mlp", seed), ds);
    return finish("mnist_mlp", "mnist", seed, std::move(trained), std::move(prep),
                  std::move(ds.train), std::move(ds.test));
}

Fixture make_mnist_deep(const MnistPaths& paths, std::uint64_t seed) {
    data::Dataset ds = data::load_mnist(paths.train_images, paths.train_labels,
                                        paths.test_images, paths.test_labels);
    nn::TrainResult trained = nn::train(config_for("mnist_deep", seed), ds);
    return finish("mnist_deep", "mnist", seed, std::move(trained), {}, std::move(ds.train),
                  std::move(ds.test));
}

Fixture make_by_name(const std::string& arch_name, std::uint64_t seed,
                     const std::string& mnist_dir) {
    if (arch_name == "iris_a") return make_iris_a(seed);
    if (arch_name == "iris_b") return make_iris_b(seed);
    const MnistPaths paths = MnistPaths::in_dir(mnist_dir);
    if (arch_name == "mnist_mlp") return make_mnist_mlp(paths, seed);
    if (arch_name == "mnist_deep") return make_mnist_deep(paths, seed);
    throw std::invalid_argument("unknown arch: " + arch_name);
}

} // namespace bitglow::fixtures
