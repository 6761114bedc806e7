#include "bitglow/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "bitglow/bsca.hpp"
#include "bitglow/extract.hpp"
#include "bitglow/faultsim.hpp"
#include "bitglow/fixtures.hpp"
#include "bitglow/model_io.hpp"

namespace bitglow::cli {

namespace {

struct Common {
    std::string mnist_dir = fixtures::default_mnist_dir();
    std::size_t eval_count = 100;  // mnist campaign subset; iris campaigns use all 50
};

data::Dataset load_dataset(const io::Provenance& prov, const Common& common) {
    if (prov.dataset == "iris") return data::load_iris(prov.seed);
    if (prov.dataset == "mnist") {
        const auto paths = fixtures::MnistPaths::in_dir(common.mnist_dir);
        return data::load_mnist(paths.train_images, paths.train_labels, paths.test_images,
                                paths.test_labels);
    }
    throw data::DataError("unknown dataset in model file: " + prov.dataset);
}

std::vector<data::Sample> eval_set_for(const io::Provenance& prov, const data::Preprocess& prep,
                                       const data::Dataset& ds, const Common& common) {
    auto test = prep.apply_all(ds.test);
    if (prov.dataset == "mnist") return data::eval_subset(test, common.eval_count);
    return test;
}

int run_train(const std::string& arch, std::uint64_t seed, const std::string& out,
              const Common& common, long epochs, long batch_size, double lr) {
    nn::TrainConfig cfg = fixtures::config_for(arch, seed);
    if (epochs > 0) cfg.epochs = static_cast<std::size_t>(epochs);
    if (batch_size > 0) cfg.batch_size = static_cast<std::size_t>(batch_size);
    if (lr > 0) cfg.learning_rate = lr;

    io::Provenance prov;
    prov.arch_name = arch;
    prov.seed = seed;

    data::Preprocess prep;
    data::Dataset ds;
    if (arch == "iris_a" || arch == "iris_b") {
        prov.dataset = "iris";
        ds = data::load_iris(seed);
    } else {
        prov.dataset = "mnist";
        const auto paths = fixtures::MnistPaths::in_dir(common.mnist_dir);
        ds = data::load_mnist(paths.train_images, paths.train_labels, paths.test_images,
                              paths.test_labels);
        if (arch == "mnist_mlp") {
            prep.pca = data::fit_pca(ds.train, 50);
            ds.train = prep.apply_all(ds.train);
            ds.test = prep.apply_all(ds.test);
        }
    }

    nn::TrainResult trained = nn::train(cfg, ds);
    prov.train_accuracy = trained.train_accuracy;
    prov.test_accuracy = trained.test_accuracy;
    io::save_float(out, {trained.model, prep, prov});
    std::cout << "trained " << arch << " seed=" << seed << " train_acc=" << trained.train_accuracy
              << " test_acc=" << trained.test_accuracy
              << " params=" << trained.model.parameter_count() << " -> " << out << '\n';
    return 0;
}

int run_quantize(const std::string& model_path, const std::string& out, std::string blob,
                 const std::string& sidecar, const Common& common) {
    const io::FloatBundle fb = io::load_float(model_path);
    const data::Dataset ds = load_dataset(fb.prov, common);
    const auto train_p = fb.prep.apply_all(ds.train);
    const auto test_p = fb.prep.apply_all(ds.test);

    quant::QuantizedModel qm = quant::quantize(fb.model, train_p);
    const double q_acc = quant::q_accuracy(qm, test_p);
    io::save_quant(out, {qm, fb.prep, fb.prov, q_acc});

    const flash::FlashImage image = flash::layout(qm);
    if (blob.empty()) blob = out + ".bin";
    io::write_flash_blob(blob, image);
    if (!sidecar.empty()) io::write_layout_sidecar(sidecar, image);

    std::cout << "quantized " << fb.prov.arch_name << " q_test_acc=" << q_acc << " -> " << out
              << " (blob " << blob << ")\n";
    return 0;
}

int run_layout(const std::string& model_path, const std::string& out, std::string map_path) {
    const io::QuantBundle qb = io::load_quant(model_path);
    const flash::FlashImage image = flash::layout(qb.model);
    io::write_flash_blob(out, image);
    if (map_path.empty()) map_path = out + ".map";
    io::write_layout_sidecar(map_path, image);
    std::cout << "layout " << image.bytes.size() << " bytes, " << image.word_count()
              << " words -> " << out << " (map " << map_path << ")\n";
    return 0;
}

faultsim::TriggerSet parse_trigger(const std::string& spec) {
    if (spec.empty() || spec == "all") return faultsim::TriggerSet::all();
    std::vector<std::size_t> ids;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) ids.push_back(std::stoul(tok));
    return faultsim::TriggerSet::only(std::move(ids));
}

int run_sweep(const std::string& model_path, int spots, double from_um, double to_um,
              double step_um, const std::string& out, const std::string& summary_path,
              const flash::Geometry& geom, const std::string& trigger_spec, int width,
              const Common& common) {
    const io::QuantBundle qb = io::load_quant(model_path);
    const data::Dataset ds = load_dataset(qb.prov, common);
    const auto eval = eval_set_for(qb.prov, qb.prep, ds, common);

    const flash::FlashImage image = flash::layout(qb.model);
    std::vector<double> positions;
    for (double x = from_um; x <= to_um + 1e-9; x += step_um) positions.push_back(x);

    const faultsim::TriggerSet trigger = parse_trigger(trigger_spec);
    faultsim::SpotTemplate tmpl;
    tmpl.width = width;
    const faultsim::CampaignResult result =
        spots == 2
            ? faultsim::dual_spot_sweep(qb.model, image, positions, tmpl, trigger, eval, geom)
            : faultsim::sweep(qb.model, image, positions, tmpl, trigger, eval, geom);

    std::ostringstream csv;
    faultsim::write_csv(csv, result);
    io::write_file_atomic(out, csv.str());
    if (!summary_path.empty()) {
        std::ostringstream sum;
        faultsim::write_summary(sum, result);
        io::write_file_atomic(summary_path, sum.str());
    }
    const auto& worst = result.worst();
    std::cout << "sweep " << result.rows.size()
              << " positions baseline=" << result.baseline_accuracy << " worst=" << worst.accuracy
              << "@x=" << worst.x_um << " -> " << out << '\n';
    return 0;
}

int run_bsca(const std::string& model_path, int budget, std::size_t batch_n,
             const std::string& line_spec, const std::string& out_dir,
             std::uint64_t batch_seed, bool seed_given, const Common& common) {
    std::optional<bsca::Line> line;
    if (!line_spec.empty()) {
        const auto comma = line_spec.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("--line expects column,bit (e.g. 1,7)");
        line = bsca::Line{std::stoi(line_spec.substr(0, comma)),
                          std::stoi(line_spec.substr(comma + 1))};
    }

    const io::QuantBundle qb = io::load_quant(model_path);
    const data::Dataset ds = load_dataset(qb.prov, common);
    const auto eval = eval_set_for(qb.prov, qb.prep, ds, common);
    // Loss batch defaults to the evaluated inferences themselves; --seed
    // switches to a seeded draw from the test split.
    const auto test_p = qb.prep.apply_all(ds.test);
    const auto batch = seed_given ? bsca::draw_batch(test_p, batch_n, batch_seed)
                                  : data::eval_subset(eval, batch_n);

    const flash::FlashImage image = flash::layout(qb.model);
    bsca::BscaConfig cfg;
    cfg.budget = budget;

    std::ostringstream report;
    bsca::LineAttackResult attacked;
    double baseline = quant::q_accuracy(qb.model, eval);
    if (line) {
        attacked = bsca::bsca_line(qb.model, image, *line, cfg, batch, eval);
        bsca::write_line_report(report, attacked, baseline, image);
    } else {
        bsca::SearchResult search = bsca::bsca_search(qb.model, image, cfg, batch, eval);
        bsca::write_report(report, search, image);
        baseline = search.baseline_accuracy;
        attacked = std::move(search.best_result);
    }

    const auto curve =
        bsca::replay_on_simulator(attacked.log, attacked.line, qb.model, image, eval);
    std::ostringstream replay_csv;
    bsca::write_replay_csv(replay_csv, curve);

    namespace fs = std::filesystem;
    io::write_file_atomic((fs::path(out_dir) / "report.txt").string(), report.str());
    io::write_file_atomic((fs::path(out_dir) / "replay.csv").string(), replay_csv.str());

    std::cout << "bsca line m=" << attacked.line.column << " k=" << attacked.line.bit
              << " accuracy " << baseline << " -> " << attacked.final_accuracy << " ("
              << attacked.log.size() << " flips) -> " << out_dir << '\n';
    return 0;
}

int run_extract(const std::string& model_path, std::size_t probes, std::uint64_t seed,
                const std::string& out_dir, double subsample, double density,
                bool labels_only) {
    const io::QuantBundle qb = io::load_quant(model_path);
    const flash::FlashImage image = flash::layout(qb.model);
    const auto probe_inputs = extract::make_probe_inputs(qb.model, probes, seed, density);

    extract::ExtractionReport report;
    if (subsample >= 1.0) {
        report = extract::extract_msbs(qb.model, image, probe_inputs, labels_only);
    } else {
        const auto total = qb.model.weight_count();
        const auto want = std::max<std::size_t>(
            1, static_cast<std::size_t>(static_cast<double>(total) * subsample));
        std::vector<std::size_t> all(total);
        std::iota(all.begin(), all.end(), 0);
        std::mt19937_64 rng(seed);
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<std::size_t> ids(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(want));
        std::sort(ids.begin(), ids.end());
        report = extract::extract_msbs_subset(qb.model, image, probe_inputs, ids, labels_only);
    }

    namespace fs = std::filesystem;
    std::ostringstream csv, txt;
    extract::write_csv(csv, report);
    extract::write_report(txt, report);
    io::write_file_atomic((fs::path(out_dir) / "extraction.csv").string(), csv.str());
    io::write_file_atomic((fs::path(out_dir) / "report.txt").string(), txt.str());

    std::cout << "extract " << report.rows.size()
              << " weights recovered=" << report.recovered_fraction
              << " (guessed_zero=" << report.guessed_zero << ") -> " << out_dir << '\n';
    return 0;
}

int run_report(const std::string& from) {
    std::ifstream in(from);
    if (!in) throw io::IoError("cannot open " + from);
    std::string header;
    if (!std::getline(in, header) || header != "x_um,bitline,accuracy,faulted_bits")
        throw io::IoError("not a sweep csv: " + from);

    std::string line;
    std::size_t rows = 0;
    std::string worst_x = "-", worst_line = "-";
    double worst_acc = 2.0;
    int max_bits = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string x, bl, acc, bits;
        if (!std::getline(ss, x, ',') || !std::getline(ss, bl, ',') ||
            !std::getline(ss, acc, ',') || !std::getline(ss, bits))
            throw io::IoError("malformed sweep row: " + line);
        ++rows;
        const double a = std::stod(acc);
        if (a < worst_acc) {
            worst_acc = a;
            worst_x = x;
            worst_line = bl;
        }
        max_bits = std::max(max_bits, std::stoi(bits));
    }
    if (rows == 0) throw io::IoError("sweep csv has no rows: " + from);
    std::cout << "rows " << rows << '\n'
              << "worst_x_um " << worst_x << '\n'
              << "worst_bitline " << worst_line << '\n'
              << "worst_accuracy " << worst_acc << '\n'
              << "max_faulted_bits " << max_bits << '\n';
    return 0;
}

struct Options {
    Common common;

    // train
    std::string arch, train_out;
    std::uint64_t train_seed = 0;
    long epochs = -1, batch_size = -1;
    double lr = -1.0;

    // quantize / layout
    std::string model, out, blob, sidecar, map_path;

    // sweep
    int spots = 1, width = 1;
    double from_um = 0.0, to_um = -1.0, step_um = -1.0;
    flash::Geometry geom;
    std::string trigger = "all";
    std::string summary;

    // bsca
    int budget = 20;
    std::size_t batch_n = 100;
    std::string line_spec, out_dir;
    std::uint64_t batch_seed = 0;

    // extract
    std::size_t probes = 500;
    std::uint64_t probe_seed = 1;
    double subsample = 1.0;
    double probe_density = 0.15;
    bool labels_only = false;

    // report
    std::string from;
};

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"laser bit-set fault campaigns against quantized MLPs in MCU flash"};
    app.require_subcommand(1);
    app.set_config("--config");
    app.footer(
        "csv columns:\n"
        "  sweep:      x_um,bitline,accuracy,faulted_bits (bitline '-' off-array, 'a+b' dual)\n"
        "  bsca:       replay.csv flips,accuracy (row 0 = fault-free baseline)\n"
        "  extract:    extraction.csv weight_id,true_msb,guess,correct\n"
        "environment: BITGLOW_THREADS caps parallelism, BITGLOW_MNIST_DIR sets the dataset dir");

    Options o;
    app.add_option("--mnist-dir", o.common.mnist_dir, "directory with the idx(.gz) files")
        ->capture_default_str();
    app.add_option("--eval", o.common.eval_count, "campaign evaluation subset size (mnist)")
        ->capture_default_str();

    int exit_code = 0;

    auto* train = app.add_subcommand("train", "train a fixture model");
    train->add_option("--arch", o.arch, "iris_a | iris_b | mnist_mlp | mnist_deep")
        ->required()
        ->check(CLI::IsMember({"iris_a", "iris_b", "mnist_mlp", "mnist_deep"}));
    train->add_option("--seed", o.train_seed, "training + split seed")->required();
    train->add_option("--out", o.train_out, "output model file")->required();
    train->add_option("--epochs", o.epochs, "override fixture epochs");
    train->add_option("--batch-size", o.batch_size, "override fixture batch size");
    train->add_option("--lr", o.lr, "override fixture learning rate");
    train->callback([&] {
        exit_code = run_train(o.arch, o.train_seed, o.train_out, o.common, o.epochs,
                              o.batch_size, o.lr);
    });

    auto* quantize = app.add_subcommand("quantize", "quantize a float model");
    quantize->add_option("--model", o.model, "float model file")
        ->required()
        ->check(CLI::ExistingFile);
    quantize->add_option("--out", o.out, "output quantized model file")->required();
    quantize->add_option("--blob", o.blob, "flash payload path (default <out>.bin)");
    quantize->add_option("--sidecar", o.sidecar, "layout sidecar path");
    quantize->callback(
        [&] { exit_code = run_quantize(o.model, o.out, o.blob, o.sidecar, o.common); });

    auto* layout = app.add_subcommand("layout", "emit the flash image of a quantized model");
    layout->add_option("--model", o.model, "quantized model file")
        ->required()
        ->check(CLI::ExistingFile);
    layout->add_option("--out", o.out, "raw image output")->required();
    layout->add_option("--map", o.map_path, "text sidecar path (default <out>.map)");
    layout->callback([&] { exit_code = run_layout(o.model, o.out, o.map_path); });

    auto* sweep = app.add_subcommand("sweep", "position sweep fault campaign");
    sweep->add_option("--model", o.model, "quantized model file")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--spots", o.spots, "1 or 2 simultaneous spots")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    sweep->add_option("--width", o.width, "bit lines covered per spot (1 or 2)")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    sweep->add_option("--from", o.from_um, "first X position in um");
    sweep->add_option("--to", o.to_um, "last X position in um (default: end of array)");
    sweep->add_option("--step", o.step_um, "X step in um (default: one bit line)");
    sweep->add_option("--origin", o.geom.origin_um, "X of bit line 0")->capture_default_str();
    sweep->add_option("--pitch", o.geom.pitch_um, "bit line pitch in um")->capture_default_str();
    sweep->add_option("--trigger", o.trigger, "all, or comma-separated weight ids");
    sweep->add_option("--out", o.out, "campaign csv")->required();
    sweep->add_option("--summary", o.summary, "campaign summary path");
    sweep->callback([&] {
        const double to =
            o.to_um >= 0 ? o.to_um : o.geom.origin_um + o.geom.pitch_um * (flash::kBitLines - 1);
        const double step = o.step_um > 0 ? o.step_um : o.geom.pitch_um;
        const double from = sweep->count("--from") ? o.from_um : o.geom.origin_um;
        exit_code = run_sweep(o.model, o.spots, from, to, step, o.out, o.summary, o.geom,
                              o.trigger, o.width, o.common);
    });

    auto* attack = app.add_subcommand("bsca", "gradient-guided budgeted bit-set attack");
    attack->add_option("--model", o.model, "quantized model file")
        ->required()
        ->check(CLI::ExistingFile);
    attack->add_option("--budget", o.budget, "adversarial budget (max bit-sets)")
        ->capture_default_str();
    attack->add_option("--batch", o.batch_n, "loss batch size")->capture_default_str();
    attack->add_option("--line", o.line_spec, "restrict to column,bit (e.g. 1,7)");
    attack->add_option("--seed", o.batch_seed, "loss batch seed (default: model seed)");
    attack->add_option("--out", o.out_dir, "output directory")->required();
    attack->callback([&] {
        exit_code = run_bsca(o.model, o.budget, o.batch_n, o.line_spec, o.out_dir, o.batch_seed,
                             attack->count("--seed") > 0, o.common);
    });

    auto* extract_cmd = app.add_subcommand("extract", "differential MSB extraction");
    extract_cmd->add_option("--model", o.model, "quantized model file")
        ->required()
        ->check(CLI::ExistingFile);
    extract_cmd->add_option("--probes", o.probes, "probe input count")->capture_default_str();
    extract_cmd->add_option("--seed", o.probe_seed, "probe seed")->capture_default_str();
    extract_cmd->add_option("--subsample", o.subsample, "fraction of weights to probe")
        ->check(CLI::Range(0.0, 1.0));
    extract_cmd->add_option("--probe-density", o.probe_density,
                            "fraction of active bytes per probe vector")
        ->check(CLI::Range(1e-6, 1.0))
        ->capture_default_str();
    extract_cmd->add_flag("--labels-only", o.labels_only,
                          "compare predicted labels instead of full logits");
    extract_cmd->add_option("--out", o.out_dir, "output directory")->required();
    extract_cmd->callback([&] {
        exit_code = run_extract(o.model, o.probes, o.probe_seed, o.out_dir, o.subsample,
                                o.probe_density, o.labels_only);
    });

    auto* report = app.add_subcommand("report", "summarize a sweep csv");
    report->add_option("--from", o.from, "sweep csv")->required()->check(CLI::ExistingFile);
    report->callback([&] { exit_code = run_report(o.from); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const data::DataError& e) {
        std::cerr << "error: data: " << e.what() << '\n';
        return 1;
    } catch (const nn::TrainError& e) {
        std::cerr << "error: train: " << e.what() << '\n';
        return 1;
    } catch (const io::IoError& e) {
        std::cerr << "error: io: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << '\n';
        return 1;
    }
    return exit_code;
}

} // namespace bitglow::cli
