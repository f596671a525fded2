// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "attfc/cli.hpp"
#include "attfc/dcc.hpp"
#include "attfc/evaluation.hpp"
#include "attfc/experiments.hpp"
#include "attfc/gradcheck.hpp"
#include "attfc/loss_grad.hpp"
#include "attfc/train_config.hpp"
#include "attfc/trainer.hpp"

using namespace attfc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir() {
    std::random_device rd;
    const fs::path dir = fs::temp_directory_path() / ("attfc_acceptance_" + std::to_string(rd()));
    fs::create_directories(dir);
    return dir;
}

fs::path g_scratch;

TrainConfig toy_config() {
    return load_config(std::string(ATTFC_SOURCE_DIR) + "/configs/toy.json", {});
}

Outcome gradient_fidelity() {
    GradcheckOptions opt;
    opt.trials = 100;
    opt.max_dim = 16;
    opt.max_slots = 32;
    opt.max_batch = 8;
    opt.seed = 2024;
    const auto suites = run_gradcheck(opt);
    Outcome o{true, ""};
    for (const auto& s : suites) {
        const bool arc = s.name.find("arcface") != std::string::npos;
        const double limit = arc ? 1e-4 : 1e-5;
        o.ok = o.ok && s.trials == 100 && s.max_relative_error <= limit;
        o.detail += s.name + "=" + sci(s.max_relative_error) + " ";
    }
    return o;
}

Outcome mask_correctness() {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    double worst_sum = 0.0;
    double worst_masked = 0.0;
    double worst_perturb = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = pick(2, 16);
        const std::size_t slots = pick(3, 32);
        const std::size_t batch = pick(1, 8);
        MarginConfig cfg;
        cfg.mode = trial % 2 ? SimilarityMode::arcface : SimilarityMode::plain;
        cfg.scale = cfg.mode == SimilarityMode::plain ? 1.0 : 16.0;
        cfg.margin = cfg.mode == SimilarityMode::plain ? 0.0 : 0.3;
        Mat centers(slots, dim);
        Mat features(batch, dim);
        for (std::size_t r = 0; r < slots; ++r) {
            for (double& v : centers.row(r)) v = normal(rng);
            l2_normalize_inplace(centers.row(r));
        }
        for (std::size_t r = 0; r < batch; ++r) {
            for (double& v : features.row(r)) v = normal(rng);
            l2_normalize_inplace(features.row(r));
        }
        std::vector<std::size_t> positives(batch);
        std::vector<std::vector<std::size_t>> conflicts(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            positives[i] = pick(0, slots - 1);
            const std::size_t n_conf = pick(1, slots - 2);
            std::vector<std::size_t> others;
            for (std::size_t s = 0; s < slots; ++s) {
                if (s != positives[i]) others.push_back(s);
            }
            std::shuffle(others.begin(), others.end(), rng);
            conflicts[i].assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(n_conf));
        }
        const auto base = batch_loss(features, centers, positives, conflicts, cfg);
        for (std::size_t i = 0; i < batch; ++i) {
            const Vec p = masked_probabilities(centers, features.row(i), positives[i], conflicts[i], cfg);
            double sum = 0.0;
            for (double v : p) sum += v;
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            for (std::size_t s : conflicts[i]) {
                worst_masked = std::max(worst_masked, std::abs(p[s]));
            }
        }
        // perturb a slot that every sample masks, if one exists; otherwise sample 0's first conflict
        // with only sample 0 in the batch
        const std::size_t victim = conflicts[0][0];
        bool masked_everywhere = true;
        for (std::size_t i = 0; i < batch; ++i) {
            masked_everywhere = masked_everywhere &&
                                std::find(conflicts[i].begin(), conflicts[i].end(), victim) != conflicts[i].end();
        }
        Mat moved = centers;
        for (double& v : moved.row(victim)) v += normal(rng);
        l2_normalize_inplace(moved.row(victim));
        if (masked_everywhere) {
            const auto after = batch_loss(features, moved, positives, conflicts, cfg);
            worst_perturb = std::max(worst_perturb, std::abs(after.loss - base.loss));
        } else {
            Mat f0(1, dim);
            f0.set_row(0, features.row(0));
            const std::vector<std::size_t> pos0{positives[0]};
            const std::vector<std::vector<std::size_t>> conf0{conflicts[0]};
            const double before = batch_loss(f0, centers, pos0, conf0, cfg).loss;
            const double after = batch_loss(f0, moved, pos0, conf0, cfg).loss;
            worst_perturb = std::max(worst_perturb, std::abs(after - before));
        }
    }
    return {worst_masked == 0.0 && worst_sum <= 1e-12 && worst_perturb <= 1e-12,
            "max|p_conflict|=" + sci(worst_masked) + " max|sum-1|=" + sci(worst_sum) +
                " max|dloss|=" + sci(worst_perturb)};
}

Outcome capacity_rule() {
    struct Row {
        std::size_t n;
        double r;
        std::size_t expected;
    };
    const Row rows[] = {{93431, 0.1, 9216},    {93431, 0.3, 27648},    {205990, 0.1, 20352},
                        {411980, 0.1, 41088},  {411980, 0.3, 123264}, {1029950, 0.3, 308736}};
    Outcome o{true, ""};
    for (const auto& row : rows) {
        const std::size_t got = dcc_capacity(row.n, row.r, 384);
        o.ok = o.ok && got == row.expected;
        o.detail += std::to_string(got) + " ";
    }
    o.detail += "(205990@0.3 -> " + std::to_string(dcc_capacity(205990, 0.3, 384)) + ", table lists 61056, excluded)";
    return o;
}

Outcome parameter_reduction() {
    const double fc = static_cast<double>(head_param_count(512, 93431));
    const double dcc = static_cast<double>(head_param_count(512, dcc_capacity(93431, 0.3, 384)));
    const double ratio = dcc / fc;
    const double expected = 27648.0 / 93431.0;
    return {ratio >= 0.29 && ratio <= 0.30 && std::abs(ratio - expected) < 1e-15, "ratio=" + fixed(ratio, 4)};
}

Outcome fifo_invariants() {
    TrainConfig cfg = toy_config();
    cfg.steps = 2000;
    cfg.eval_every = 0;
    cfg.eval_pairs = 100;
    Trainer trainer(cfg);
    const std::size_t batch = cfg.batch_size;
    const std::size_t capacity = trainer.dcc()->capacity();
    std::size_t expected_first = 0;
    std::uint64_t steps = 0;
    std::size_t missing_positive = 0;
    std::size_t order_violations = 0;
    std::size_t sgd_leaks = 0;
    std::optional<Dcc> dcc_before;
    std::optional<EncoderParams> class_before;
    trainer.set_observer([&](const StepEvent& e) {
        const Dcc& dcc = *e.trainer.dcc();
        switch (e.phase) {
        case StepPhase::enqueued:
            for (std::size_t i = 0; i < batch; ++i) {
                if (e.positive_slots[i] != (expected_first + i) % capacity) ++order_violations;
            }
            if (dcc.cursor() != (expected_first + batch) % capacity) ++order_violations;
            expected_first = (expected_first + batch) % capacity;
            break;
        case StepPhase::loss_computed:
            for (std::size_t i = 0; i < batch; ++i) {
                if (dcc.label(e.positive_slots[i]) != e.batch.labels[i]) ++missing_positive;
            }
            dcc_before = dcc;
            class_before = e.trainer.class_encoder();
            break;
        case StepPhase::sgd_applied:
            if (!(dcc == *dcc_before) || !(e.trainer.class_encoder() == *class_before)) ++sgd_leaks;
            ++steps;
            break;
        default:
            break;
        }
    });
    while (!trainer.done()) {
        trainer.step();
    }
    return {steps == 2000 && missing_positive == 0 && order_violations == 0 && sgd_leaks == 0,
            std::to_string(steps) + " steps, S=" + std::to_string(capacity) +
                ", missing positives=" + std::to_string(missing_positive) +
                ", order violations=" + std::to_string(order_violations) +
                ", SGD-phase writes=" + std::to_string(sgd_leaks)};
}

double distance(const EncoderParams& a, const EncoderParams& b) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long double d = static_cast<long double>(a.values()[i]) - b.values()[i];
        acc += d * d;
    }
    return static_cast<double>(std::sqrt(acc));
}

Outcome momentum_decay() {
    std::mt19937_64 rng(5);
    const std::vector<std::size_t> widths{64, 64, 32};
    const EncoderParams fe = EncoderParams::random(widths, rng);
    EncoderParams ce = EncoderParams::random(widths, rng);
    const double gamma = 0.999;
    const double d0 = distance(ce, fe);
    double worst = 0.0;
    for (int n = 1; n <= 2000; ++n) {
        momentum_update(ce, fe, gamma);
        if (n % 100 == 0) {
            const double predicted = std::pow(gamma, n) * d0;
            worst = std::max(worst, std::abs(distance(ce, fe) - predicted) / predicted);
        }
    }
    return {worst <= 1e-10, "max relative deviation over 2000 updates=" + sci(worst)};
}

Outcome attention_under_corruption() {
    SyntheticDatasetSpec spec;
    spec.identities = 1000;
    spec.input_dim = 64;
    spec.noise_sigma = 0.05;
    spec.corrupt_sigma = 1.0;
    spec.corrupt_prob = 0.3;
    spec.seed = 9;
    const SyntheticDataset ds = make_dataset(spec);
    const FeatureFn raw = [](std::span<const double> x) { return l2_normalize(x); };
    const Mat tcc = empirical_tcc(ds, raw);
    const std::size_t samples = 5000;
    const auto att = measure_gcc_quality(ds, raw, raw, tcc, GccStrategy::attention, 2, samples, 13);
    const auto cst = measure_gcc_quality(ds, raw, raw, tcc, GccStrategy::constant, 2, samples, 13);
    const auto one = measure_gcc_quality(ds, raw, raw, tcc, GccStrategy::single, 2, samples, 13);
    return {att.mean_cos > cst.mean_cos && cst.mean_cos > one.mean_cos && att.mean_cos > one.mean_cos,
            "attention=" + fixed(att.mean_cos, 4) + " constant=" + fixed(cst.mean_cos, 4) +
                " single=" + fixed(one.mean_cos, 4)};
}

Outcome end_to_end_parity() {
    auto final_accuracy = [](TrainConfig cfg) {
        Trainer t(std::move(cfg));
        MetricsRecord last;
        while (!t.done()) {
            last = t.step();
        }
        return last.verif_acc.value_or(t.evaluate());
    };
    TrainConfig att = toy_config();
    TrainConfig fc = att;
    fc.head = HeadMode::fc;
    const double a = final_accuracy(att);
    const double f = final_accuracy(fc);
    return {std::abs(f - a) <= 0.05 && a > 0.85 && f > 0.85,
            "fc=" + fixed(f, 3) + " attfc=" + fixed(a, 3) + " gap=" + fixed((f - a) * 100.0, 1) + " pts"};
}

Outcome memory_scaling() {
    const std::vector<std::size_t> ns{93431, 205990, 411980, 1029950};
    const std::size_t dim = 512;
    const std::size_t batch = 384;
    const double r = 0.3;
    const auto rows = bench_heads(ns, r, dim, batch, 4);
    bool ok = rows.size() == ns.size();
    for (std::size_t i = 0; ok && i < rows.size(); ++i) {
        ok = rows[i].fc_bytes == static_cast<std::uint64_t>(ns[i]) * dim * 4;
        const double target = r * static_cast<double>(ns[i]) * dim;
        const double dcc = static_cast<double>(rows[i].dcc_params);
        ok = ok && dcc <= target && target - dcc < static_cast<double>(batch * dim);
    }
    const double fc_gb = static_cast<double>(rows.back().fc_bytes) / 1e9;
    const double dcc_gb = static_cast<double>(rows.back().dcc_bytes) / 1e9;
    ok = ok && std::abs(fc_gb - 2.11) < 0.005 && std::abs(dcc_gb - 0.63) < 0.005;
    return {ok, "N=1029950: fc=" + fixed(fc_gb, 3) + " GB dcc=" + fixed(dcc_gb, 3) + " GB"};
}

int cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"attfc"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome determinism() {
    const std::string config = std::string(ATTFC_SOURCE_DIR) + "/configs/toy.json";
    auto run = [&](const std::string& name, std::size_t threads) {
        const fs::path dir = g_scratch / name;
        const int rc = cli({"train", "--config", config, "--set", "steps=300", "--set", "eval_every=50", "--out",
                            dir.string(), "--seed", "7", "--threads", std::to_string(threads)});
        return rc == 0 ? read_file(dir / "metrics.csv") + "\n#" + read_file(dir / "checkpoint.bin")
                       : std::string();
    };
    const std::string a = run("t1a", 1);
    const std::string b = run("t1b", 1);
    const std::string c = run("t4", 4);
    const bool ok = !a.empty() && a == b && b.substr(0, b.find("\n#")) == c.substr(0, c.find("\n#"));
    return {ok, std::string("rerun ") + (a == b && !a.empty() ? "identical" : "differs") + ", 4 threads " +
                    (b.substr(0, b.find("\n#")) == c.substr(0, c.find("\n#")) ? "identical" : "differs")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "gradient fidelity", 30.0, gradient_fidelity},
        {2, "mask correctness", 10.0, mask_correctness},
        {3, "capacity rule", 1.0, capacity_rule},
        {4, "parameter reduction", 1.0, parameter_reduction},
        {5, "FIFO and pipeline invariants", 120.0, fifo_invariants},
        {6, "momentum update", 5.0, momentum_decay},
        {7, "attention beats constant under corruption", 60.0, attention_under_corruption},
        {8, "end-to-end parity", 600.0, end_to_end_parity},
        {9, "memory scaling", 1.0, memory_scaling},
        {10, "determinism", 120.0, determinism},
    };
    g_scratch = scratch_dir();
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool ok = o.ok && secs < c.budget_s;
        failed += ok ? 0 : 1;
        std::printf("%s %2d %s: %s [%.2f s / %.0f s]\n", ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    c.budget_s);
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(g_scratch, ec);
    return failed == 0 ? 0 : 1;
}
