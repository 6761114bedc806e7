#include "bitglow/model_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bitglow::io {

using nlohmann::json;

namespace {

json preprocess_to_json(const data::Preprocess& prep) {
    if (!prep.pca) return json{{"type", "none"}};
    json j;
    j["type"] = "pca";
    j["mean"] = prep.pca->mean;
    j["rows"] = prep.pca->components.rows;
    j["cols"] = prep.pca->components.cols;
    j["components"] = prep.pca->components.a;  // row-major
    return j;
}

data::Preprocess preprocess_from_json(const json& j) {
    data::Preprocess prep;
    const std::string type = j.at("type").get<std::string>();
    if (type == "none") return prep;
    if (type != "pca") throw IoError("unknown preprocess type: " + type);
    data::PcaTransform t;
    t.mean = j.at("mean").get<Vec>();
    t.components = Mat(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    t.components.a = j.at("components").get<std::vector<double>>();
    if (t.components.a.size() != t.components.rows * t.components.cols)
        throw IoError("pca component size mismatch");
    t.fitted_on_train = true;
    prep.pca = std::move(t);
    return prep;
}

json provenance_to_json(const Provenance& p) {
    return json{{"arch_name", p.arch_name},
                {"dataset", p.dataset},
                {"seed", p.seed},
                {"train_accuracy", p.train_accuracy},
                {"test_accuracy", p.test_accuracy}};
}

Provenance provenance_from_json(const json& j) {
    Provenance p;
    p.arch_name = j.at("arch_name").get<std::string>();
    p.dataset = j.at("dataset").get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.train_accuracy = j.at("train_accuracy").get<double>();
    p.test_accuracy = j.at("test_accuracy").get<double>();
    return p;
}

json load_json(const std::string& path, const char* expected_format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw IoError("malformed model file " + path + ": " + e.what());
    }
    if (j.value("format", "") != expected_format)
        throw IoError(path + " is not a " + expected_format + " file");
    return j;
}

} // namespace

void write_file_atomic(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

void save_float(const std::string& path, const FloatBundle& bundle) {
    bundle.model.validate();
    json j;
    j["format"] = "bitglow-float-model";
    j["version"] = 1;
    j["provenance"] = provenance_to_json(bundle.prov);
    j["preprocess"] = preprocess_to_json(bundle.prep);
    j["input_dim"] = bundle.model.input_dim;
    json layers = json::array();
    for (const nn::Layer& l : bundle.model.layers) {
        json jl;
        jl["out"] = l.weights.rows;
        jl["in"] = l.weights.cols;
        jl["activation"] = l.activation == nn::Activation::relu ? "relu" : "none";
        jl["weights"] = l.weights.a;  // row-major
        if (l.bias)
            jl["bias"] = *l.bias;
        else
            jl["bias"] = nullptr;
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    write_file_atomic(path, j.dump(1));
}

FloatBundle load_float(const std::string& path) {
    const json j = load_json(path, "bitglow-float-model");
    FloatBundle b;
    b.prov = provenance_from_json(j.at("provenance"));
    b.prep = preprocess_from_json(j.at("preprocess"));
    b.model.input_dim = j.at("input_dim").get<std::size_t>();
    for (const json& jl : j.at("layers")) {
        nn::Layer l;
        l.weights = Mat(jl.at("out").get<std::size_t>(), jl.at("in").get<std::size_t>());
        l.weights.a = jl.at("weights").get<std::vector<double>>();
        if (l.weights.a.size() != l.weights.rows * l.weights.cols)
            throw IoError("layer weight size mismatch in " + path);
        if (!jl.at("bias").is_null()) l.bias = jl.at("bias").get<Vec>();
        l.activation =
            jl.at("activation").get<std::string>() == "relu" ? nn::Activation::relu
                                                             : nn::Activation::none;
        b.model.layers.push_back(std::move(l));
    }
    b.model.validate();
    return b;
}

void save_quant(const std::string& path, const QuantBundle& bundle) {
    json j;
    j["format"] = "bitglow-quantized-model";
    j["version"] = 1;
    j["provenance"] = provenance_to_json(bundle.prov);
    j["preprocess"] = preprocess_to_json(bundle.prep);
    j["q_test_accuracy"] = bundle.q_test_accuracy;
    j["input_dim"] = bundle.model.input_dim;
    j["input_dec"] = bundle.model.input_dec;
    j["input_qmin"] = bundle.model.input_qmin;
    j["input_qmax"] = bundle.model.input_qmax;
    json layers = json::array();
    for (const quant::QLayer& l : bundle.model.layers) {
        json jl;
        jl["out"] = l.out;
        jl["in"] = l.in;
        jl["relu"] = l.relu;
        jl["weight_dec"] = l.weight_dec;
        jl["out_dec"] = l.out_dec;
        jl["out_shift"] = l.out_shift;
        jl["q_weights"] = l.q;
        if (l.bias_q)
            jl["bias_q"] = *l.bias_q;
        else
            jl["bias_q"] = nullptr;
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    write_file_atomic(path, j.dump(1));
}

QuantBundle load_quant(const std::string& path) {
    const json j = load_json(path, "bitglow-quantized-model");
    QuantBundle b;
    b.prov = provenance_from_json(j.at("provenance"));
    b.prep = preprocess_from_json(j.at("preprocess"));
    b.q_test_accuracy = j.value("q_test_accuracy", 0.0);
    b.model.input_dim = j.at("input_dim").get<std::size_t>();
    b.model.input_dec = j.at("input_dec").get<int>();
    b.model.input_qmin = j.at("input_qmin").get<std::int8_t>();
    b.model.input_qmax = j.at("input_qmax").get<std::int8_t>();
    for (const json& jl : j.at("layers")) {
        quant::QLayer l;
        l.out = jl.at("out").get<std::size_t>();
        l.in = jl.at("in").get<std::size_t>();
        l.relu = jl.at("relu").get<bool>();
        l.weight_dec = jl.at("weight_dec").get<int>();
        l.out_dec = jl.at("out_dec").get<int>();
        l.out_shift = jl.at("out_shift").get<int>();
        l.q = jl.at("q_weights").get<std::vector<std::int8_t>>();
        if (l.q.size() != l.out * l.in) throw IoError("q layer size mismatch in " + path);
        if (!jl.at("bias_q").is_null()) l.bias_q = jl.at("bias_q").get<std::vector<std::int32_t>>();
        b.model.layers.push_back(std::move(l));
    }
    return b;
}

void write_flash_blob(const std::string& path, const flash::FlashImage& image) {
    write_file_atomic(path,
                      std::string(reinterpret_cast<const char*>(image.bytes.data()),
                                  image.bytes.size()));
}

void write_layout_sidecar(const std::string& path, const flash::FlashImage& image) {
    std::ostringstream out;
    out << "# weight_id layer row col offset word column\n";
    for (std::size_t layer = 0; layer < image.layer_offsets.size(); ++layer) {
        const auto [rows, cols] = image.layer_dims[layer];
        const std::size_t base = image.layer_offsets[layer];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const std::size_t id = base + r * cols + c;
                out << id << ' ' << layer << ' ' << r << ' ' << c << ' ' << id << ' ' << id / 4
                    << ' ' << id % 4 << '\n';
            }
    }
    write_file_atomic(path, out.str());
}

} // namespace bitglow::io
