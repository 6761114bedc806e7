// Acceptance suite: end-to-end gates for the fixture models, the sweep and
// attack campaigns, extraction, and the cross-cutting property checks. Each
// criterion prints one pass/fail line; the exit code is the failure count.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "bitglow/bsca.hpp"
#include "bitglow/extract.hpp"
#include "bitglow/faultsim.hpp"
#include "bitglow/fixtures.hpp"

using namespace bitglow;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& msg) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += "FAILED " + msg;
        }
    }
    void note(const std::string& msg) {
        if (!detail.empty()) detail += "; ";
        detail += msg;
    }
};

const fixtures::Fixture& iris_a_fixture() {
    static const fixtures::Fixture f = fixtures::make_iris_a();
    return f;
}

const fixtures::Fixture& iris_b_fixture() {
    static const fixtures::Fixture f = fixtures::make_iris_b();
    return f;
}

const fixtures::Fixture& mnist_mlp_fixture() {
    static const fixtures::Fixture f = fixtures::make_mnist_mlp(
        fixtures::MnistPaths::in_dir(fixtures::default_mnist_dir()));
    return f;
}

const fixtures::Fixture& mnist_deep_fixture() {
    static const fixtures::Fixture f = fixtures::make_mnist_deep(
        fixtures::MnistPaths::in_dir(fixtures::default_mnist_dir()));
    return f;
}

// The BSCA run shared by criteria 4 and 5.
struct MnistAttack {
    bsca::SearchResult search;
    std::vector<data::Sample> eval;
    flash::FlashImage image;
    double seconds = 0.0;
};

const MnistAttack& mnist_attack() {
    static const MnistAttack a = [] {
        const auto& fx = mnist_mlp_fixture();
        MnistAttack r;
        const auto start = std::chrono::steady_clock::now();
        r.image = flash::layout(fx.qmodel);
        r.eval = data::eval_subset(fx.test, 100);
        bsca::BscaConfig cfg;
        cfg.budget = 20;
        r.search = bsca::bsca_search(fx.qmodel, r.image, cfg, r.eval, r.eval);
        r.seconds = seconds_since(start);
        return r;
    }();
    return a;
}

// --- criterion 1: fixture fidelity -----------------------------------------

Check criterion_fixture_fidelity() {
    Check c;
    const auto start = std::chrono::steady_clock::now();

    const auto& ib = iris_b_fixture();
    c.require(ib.q_test_accuracy >= 0.93,
              "iris_b quantized accuracy " + fmt(ib.q_test_accuracy) + " < 0.93");

    const auto& mm = mnist_mlp_fixture();
    c.require(mm.model.parameter_count() == 620,
              "mnist_mlp parameter count " + std::to_string(mm.model.parameter_count()) +
                  " != 620");
    c.require(mm.q_test_accuracy >= 0.90,
              "mnist_mlp quantized accuracy " + fmt(mm.q_test_accuracy) + " < 0.90");

    const double secs = seconds_since(start);
    c.require(secs < 120.0, "runtime " + fmt(secs, "%.1f") + "s >= 120s");
    c.note("iris_b q_acc=" + fmt(ib.q_test_accuracy) + " (floor 0.93, ref 0.96), mnist q_acc=" +
           fmt(mm.q_test_accuracy) + " (floor 0.90, ref 0.92), params=620, " +
           fmt(secs, "%.1f") + "s");
    return c;
}

// --- criterion 2: brute-force oracle equivalence ----------------------------

Check criterion_bruteforce_equivalence() {
    Check c;
    const auto& fx = iris_a_fixture();
    const flash::FlashImage image = flash::layout(fx.qmodel);
    const auto positions = faultsim::line_positions({});
    const auto campaign = faultsim::sweep(fx.qmodel, image, positions, {},
                                          faultsim::TriggerSet::all(), fx.test);

    int mismatches = 0;
    for (int line = 0; line < flash::kBitLines; ++line) {
        auto rewritten = fx.qmodel;
        for (const auto& [id, bit] : flash::targets_of(image, {line, 1}))
            rewritten.set_weight(
                id, static_cast<std::int8_t>(faultsim::apply_bitset(
                        static_cast<std::uint8_t>(rewritten.weight(id)), bit)));
        const double oracle = quant::q_accuracy(rewritten, fx.test);
        if (campaign.rows[static_cast<std::size_t>(line)].accuracy != oracle) ++mismatches;
    }
    c.require(mismatches == 0,
              std::to_string(mismatches) + "/32 sweep rows differ from the static rewrite");
    c.note("32/32 positions equal the static-rewrite oracle, zero tolerance");
    return c;
}

// --- criterion 3: sweep reproduction ----------------------------------------

Check criterion_sweep_reproduction() {
    Check c;
    const auto& fx = iris_b_fixture();
    const flash::FlashImage image = flash::layout(fx.qmodel);
    const auto positions = faultsim::line_positions({});
    const auto single = faultsim::sweep(fx.qmodel, image, positions, {},
                                        faultsim::TriggerSet::all(), fx.test);

    int drop_patterns = 0;
    for (int column = 0; column < 4; ++column) {
        const int line = flash::bit_line_of(column, 7);
        const double acc = single.rows[static_cast<std::size_t>(line)].accuracy;
        if (acc <= single.baseline_accuracy - 0.05) ++drop_patterns;
    }
    c.require(drop_patterns >= 4, "only " + std::to_string(drop_patterns) +
                                      "/4 MSB bit lines show an accuracy drop");

    const double min_acc = single.worst().accuracy;
    c.require(min_acc <= 0.45, "minimum sweep accuracy " + fmt(min_acc) + " > 0.45");

    const auto dual = faultsim::dual_spot_sweep(fx.qmodel, image,
                                                faultsim::line_positions({}, 16), {},
                                                faultsim::TriggerSet::all(), fx.test);
    c.require(dual.max_faulted_bits() > single.max_faulted_bits(),
              "dual-spot max fault count " + std::to_string(dual.max_faulted_bits()) +
                  " does not exceed single-spot " + std::to_string(single.max_faulted_bits()));
    c.require(dual.max_faulted_bits() >= 8, "dual-spot max fault count " +
                                                std::to_string(dual.max_faulted_bits()) +
                                                " < 8");

    // The wider model shows the same picture: somewhere in the full sweep the
    // accuracy falls at least 50 points below baseline.
    const auto& mm = mnist_mlp_fixture();
    const flash::FlashImage mimage = flash::layout(mm.qmodel);
    const auto meval = data::eval_subset(mm.test, 100);
    const auto msweep = faultsim::sweep(mm.qmodel, mimage, positions, {},
                                        faultsim::TriggerSet::all(), meval);
    c.require(msweep.worst().accuracy <= msweep.baseline_accuracy - 0.50,
              "mnist sweep worst accuracy " + fmt(msweep.worst().accuracy) +
                  " is not 50 points under baseline " + fmt(msweep.baseline_accuracy));
    c.note("4/4 MSB drop patterns, min_acc=" + fmt(min_acc) + " (floor 0.45, ref ~0.30), dual max " +
           std::to_string(dual.max_faulted_bits()) + " > single max " +
           std::to_string(single.max_faulted_bits()) + " (ref up to 12)");
    return c;
}

// --- criterion 4: guided-attack reproduction --------------------------------

Check criterion_guided_attack() {
    Check c;
    const auto& atk = mnist_attack();
    const auto& best = atk.search.best_result;

    c.require(best.line.bit == 7, "winning line bit " + std::to_string(best.line.bit) +
                                      " is not the MSB");
    c.require(best.log.size() >= 10, "attack applied only " + std::to_string(best.log.size()) +
                                         " flips");
    if (best.log.size() >= 5)
        c.require(best.log[4].accuracy_after <= 0.50,
                  "accuracy after 5 flips " + fmt(best.log[4].accuracy_after) + " > 0.50");
    if (best.log.size() >= 10)
        c.require(best.log[9].accuracy_after <= 0.35,
                  "accuracy after 10 flips " + fmt(best.log[9].accuracy_after) + " > 0.35");

    if (best.log.size() >= 10) {
        const double last = best.log.back().accuracy_after;
        const double before_tail = best.log[best.log.size() - 6].accuracy_after;
        c.require(std::abs(last - before_tail) < 0.03,
                  "last five flips moved accuracy by " + fmt(std::abs(last - before_tail)) +
                      " >= 0.03");
        // Plateau consistency: the lowest point of the whole trail sits at the
        // reported final accuracy (within the plateau band), not mid-curve.
        double min_acc = 1.0;
        for (const auto& rec : best.log) min_acc = std::min(min_acc, rec.accuracy_after);
        c.require(min_acc >= last - 0.03, "accuracy trail dips to " + fmt(min_acc) +
                                              " below the reported final " + fmt(last));
    }
    c.require(atk.seconds < 600.0, "runtime " + fmt(atk.seconds, "%.1f") + "s >= 600s");

    std::string acc5 = best.log.size() >= 5 ? fmt(best.log[4].accuracy_after) : "n/a";
    std::string acc10 = best.log.size() >= 10 ? fmt(best.log[9].accuracy_after) : "n/a";
    c.note("line m=" + std::to_string(best.line.column) + " k=7, acc@5=" + acc5 +
           " (floor 0.50, ref 0.39), acc@10=" + acc10 + " (floor 0.35, ref 0.25), " +
           fmt(atk.seconds, "%.1f") + "s");
    return c;
}

// --- criterion 5: attack/simulator agreement --------------------------------

Check criterion_replay_agreement() {
    Check c;
    const auto& atk = mnist_attack();
    const auto& fx = mnist_mlp_fixture();
    const auto& best = atk.search.best_result;

    const auto curve =
        bsca::replay_on_simulator(best.log, best.line, fx.qmodel, atk.image, atk.eval);
    c.require(curve.size() == best.log.size() + 1, "curve length mismatch");
    c.require(curve.front() == atk.search.baseline_accuracy, "baseline prefix differs");
    int mismatches = 0;
    for (std::size_t i = 0; i < best.log.size(); ++i)
        if (curve[i + 1] != best.log[i].accuracy_after) ++mismatches;
    c.require(mismatches == 0,
              std::to_string(mismatches) + " replay points differ from the recorded trace");
    c.note("replay curve of " + std::to_string(curve.size()) +
           " points matches the attack trace exactly");
    return c;
}

// --- criterion 6: extraction -------------------------------------------------

Check criterion_extraction() {
    Check c;
    const auto& fx = mnist_deep_fixture();
    c.require(fx.model.parameter_count() == 109184,
              "parameter count " + std::to_string(fx.model.parameter_count()) + " != 109184");
    c.require(fx.prov.test_accuracy >= 0.95,
              "float test accuracy " + fmt(fx.prov.test_accuracy) + " < 0.95");

    const flash::FlashImage image = flash::layout(fx.qmodel);
    const auto probes = extract::make_probe_inputs(fx.qmodel, 500, 2024);

    const auto start_full = std::chrono::steady_clock::now();
    const auto report = extract::extract_msbs(fx.qmodel, image, probes);
    const double secs_full = seconds_since(start_full);

    c.require(report.recovered_fraction >= 0.85,
              "recovered fraction " + fmt(report.recovered_fraction) + " < 0.85");
    c.require(report.incorrect_among_guessed_zero == 0,
              std::to_string(report.incorrect_among_guessed_zero) +
                  " unsound zero guesses (must be 0)");
    c.require(secs_full < 1800.0, "runtime " + fmt(secs_full, "%.1f") + "s >= 1800s");

    // 1% smoke subsample.
    const auto start_smoke = std::chrono::steady_clock::now();
    std::vector<std::size_t> all(fx.qmodel.weight_count());
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(2024);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::size_t> ids(all.begin(), all.begin() + all.size() / 100);
    std::sort(ids.begin(), ids.end());
    const auto smoke = extract::extract_msbs_subset(fx.qmodel, image, probes, ids);
    const double secs_smoke = seconds_since(start_smoke);

    c.require(smoke.recovered_fraction >= 0.85,
              "smoke recovered fraction " + fmt(smoke.recovered_fraction) + " < 0.85");
    c.require(smoke.incorrect_among_guessed_zero == 0, "smoke has unsound zero guesses");
    c.require(secs_smoke < 60.0, "smoke runtime " + fmt(secs_smoke, "%.1f") + "s >= 60s");

    c.note("recovered=" + fmt(report.recovered_fraction) + " (floor 0.85, ref 0.919) over 109184 weights in " +
           fmt(secs_full, "%.1f") + "s; smoke " + std::to_string(ids.size()) + " weights " +
           fmt(smoke.recovered_fraction) + " in " + fmt(secs_smoke, "%.1f") + "s");
    return c;
}

// --- criterion 7: property suites ---------------------------------------------

nn::FloatModel random_model_500(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    nn::FloatModel m;
    m.input_dim = 10;
    const std::vector<std::size_t> arch{10, 16, 8, 5};
    for (std::size_t l = 1; l < arch.size(); ++l) {
        nn::Layer layer;
        layer.weights = Mat(arch[l], arch[l - 1]);
        for (double& w : layer.weights.a) w = dist(rng);
        layer.activation = l + 1 == arch.size() ? nn::Activation::none : nn::Activation::relu;
        m.layers.push_back(std::move(layer));
    }
    return m;
}

Check criterion_property_suites() {
    Check c;

    // Gradient check against central finite differences.
    {
        const nn::FloatModel m = random_model_500(71);
        std::mt19937_64 rng(72);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::vector<data::Sample> batch(8);
        for (auto& s : batch) {
            s.x.resize(10);
            for (double& v : s.x) v = dist(rng);
            s.label = static_cast<int>(rng() % 5);
        }
        const auto analytic = nn::backward(m, batch);
        double worst = 0.0;
        nn::FloatModel probe = m;
        for (std::size_t l = 0; l < m.layers.size(); ++l)
            for (std::size_t i = 0; i < m.layers[l].weights.size(); ++i) {
                const double orig = probe.layers[l].weights.a[i];
                probe.layers[l].weights.a[i] = orig + 1e-4;
                const double up = nn::loss(probe, batch);
                probe.layers[l].weights.a[i] = orig - 1e-4;
                const double down = nn::loss(probe, batch);
                probe.layers[l].weights.a[i] = orig;
                const double fd = (up - down) / 2e-4;
                const double an = analytic.weights[l].a[i];
                worst = std::max(worst,
                                 std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
            }
        c.require(worst < 1e-4, "gradient check max rel err " + fmt(worst, "%.2e") + " >= 1e-4");
    }

    // Bit-set algebra, exhaustive over 256 bytes x 8 bits.
    {
        bool ok = true;
        for (int b = 0; b < 256 && ok; ++b)
            for (int k = 0; k < 8 && ok; ++k) {
                const auto byte = static_cast<std::uint8_t>(b);
                const std::uint8_t once = faultsim::apply_bitset(byte, k);
                ok = faultsim::apply_bitset(once, k) == once && (once & byte) == byte &&
                     std::popcount(unsigned(once)) >= std::popcount(unsigned(byte)) &&
                     (once & (1u << k)) != 0;
            }
        c.require(ok, "bit-set idempotence/monotonicity violated");
    }

    // Campaign transience and fault-count input-independence on iris_b.
    {
        const auto& fx = iris_b_fixture();
        const flash::FlashImage image = flash::layout(fx.qmodel);
        const auto before = image.bytes;
        const auto campaign = faultsim::sweep(fx.qmodel, image, faultsim::line_positions({}),
                                              {}, faultsim::TriggerSet::all(), fx.test);
        c.require(image.bytes == before, "flash image changed during a campaign");

        bool counts_stable = true;
        for (int line = 0; line < flash::kBitLines && counts_stable; line += 7) {
            const flash::SpotConfig spot{line, 1};
            int first = -1;
            for (const auto& s : fx.test) {
                const auto r = faultsim::faulted_inference(fx.qmodel, image, {&spot, 1},
                                                           faultsim::TriggerSet::all(), s.x);
                if (first < 0) first = r.faulted_bit_count;
                counts_stable = counts_stable && r.faulted_bit_count == first;
            }
        }
        c.require(counts_stable, "faulted bit count varies with the input");
        (void)campaign;
    }

    // Quantization round-trip bound on the iris_b weights.
    {
        const auto& fx = iris_b_fixture();
        bool ok = true;
        for (std::size_t l = 0; l < fx.model.layers.size(); ++l) {
            const int dec = fx.qmodel.layers[l].weight_dec;
            const double step = std::ldexp(1.0, -dec);
            for (std::size_t i = 0; i < fx.model.layers[l].weights.size(); ++i) {
                const double w = fx.model.layers[l].weights.a[i];
                const double scaled = w * std::ldexp(1.0, dec);
                if (scaled <= 127.5 && scaled >= -128.5)
                    ok = ok && std::abs(w - fx.qmodel.layers[l].q[i] * step) <= step / 2 + 1e-12;
            }
        }
        c.require(ok, "quantization round-trip bound violated");
    }

    // Deterministic reruns produce byte-identical campaign CSVs.
    {
        const auto& fx = iris_b_fixture();
        const flash::FlashImage image = flash::layout(fx.qmodel);
        const auto positions = faultsim::line_positions({});
        std::ostringstream a, b;
        faultsim::write_csv(a, faultsim::sweep(fx.qmodel, image, positions, {},
                                               faultsim::TriggerSet::all(), fx.test));
        faultsim::write_csv(b, faultsim::sweep(fx.qmodel, image, positions, {},
                                               faultsim::TriggerSet::all(), fx.test));
        c.require(a.str() == b.str(), "identical sweeps produced different CSV bytes");
    }

    c.note("gradients, bit-set algebra, transience, count stability, round-trip, csv determinism");
    return c;
}

} // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        std::function<Check()> run;
    };
    const std::vector<Entry> criteria{
        {1, "fixture fidelity", criterion_fixture_fidelity},
        {2, "brute-force oracle equivalence", criterion_bruteforce_equivalence},
        {3, "sweep reproduction", criterion_sweep_reproduction},
        {4, "guided-attack reproduction", criterion_guided_attack},
        {5, "attack/simulator agreement", criterion_replay_agreement},
        {6, "extraction", criterion_extraction},
        {7, "property suites", criterion_property_suites},
    };

    int failures = 0;
    for (const auto& entry : criteria) {
        Check c;
        try {
            c = entry.run();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        if (!c.ok) ++failures;
        std::cout << (c.ok ? "[PASS]" : "[FAIL]") << " criterion " << entry.id << " ("
                  << entry.name << "): " << c.detail << std::endl;
    }
    return failures;
}
