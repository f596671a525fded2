#include "attfc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "attfc/checkpoint.hpp"
#include "attfc/experiments.hpp"
#include "attfc/gradcheck.hpp"
#include "attfc/report.hpp"
#include "attfc/trainer.hpp"

namespace attfc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;

    TrainConfig resolve() const {
        std::vector<std::string> all = overrides;
        if (seed) {
            all.push_back("seed=" + std::to_string(*seed));
        }
        if (threads) {
            all.push_back("threads=" + std::to_string(*threads));
        }
        return load_config(config, all);
    }
};

void add_config_flags(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "JSON config file or run manifest");
    cmd->add_option("--set", o.overrides, "Override a config field, KEY=VALUE (repeatable)")->allow_extra_args(false);
    cmd->add_option("--threads", o.threads, "Worker threads");
}

void add_output_flags(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Random seed");
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& path, const std::string& text) { write_file(path.string(), text); }

void write_manifest(const fs::path& dir, const std::string& command, const std::string& config_path,
                    json resolved, std::uint64_t seed, const std::vector<std::string>& artifacts, json extra = {}) {
    json m = {{"command", command},
              {"config_path", config_path},
              {"resolved_config", std::move(resolved)},
              {"out_dir", dir.string()},
              {"seed", seed},
              {"artifacts", artifacts}};
    if (!extra.is_null()) {
        m.update(extra);
    }
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

json memory_json(const MemoryEstimate& m) {
    return {{"head_params", m.head_params},
            {"encoder_params", m.encoder_params},
            {"optimizer_values", m.optimizer_values},
            {"activation_values", m.activation_values},
            {"bytes_per_value", m.bytes_per_value},
            {"total_bytes", m.total_bytes()}};
}

int cmd_train(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    const TrainConfig cfg = o.resolve();
    const fs::path dir = prepare_out(o.out);
    Trainer trainer(cfg);

    std::ofstream csv(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!csv) {
        throw Error("cannot open '" + (dir / "metrics.csv").string() + "' for writing");
    }
    csv << kMetricsHeader << '\n';

    std::optional<MetricsRecord> last;
    std::string failure;
    try {
        while (!trainer.done()) {
            last = trainer.step();
            csv << metrics_csv_row(*last) << '\n';
        }
    } catch (const NumericalError& e) {
        failure = e.what();
    }
    csv.close();

    std::vector<std::string> artifacts = {"metrics.csv", "summary.json"};
    const std::string ckpt_name = failure.empty() ? "checkpoint.bin" : "checkpoint_diagnostic.bin";
    write_text(dir / ckpt_name, serialize_checkpoint(trainer.checkpoint()));
    artifacts.push_back(ckpt_name);
    artifacts.push_back("manifest.json");

    json summary = {{"status", failure.empty() ? "ok" : "numerical_failure"},
                    {"head", to_string(cfg.head)},
                    {"seed", cfg.seed},
                    {"steps", trainer.steps_done()},
                    {"total_steps", trainer.total_steps()},
                    {"final", last ? to_json(*last) : json(nullptr)},
                    {"memory", memory_json(trainer.memory_estimate())},
                    {"config", to_json(cfg)}};
    if (!failure.empty()) {
        summary["error"] = failure;
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_manifest(dir, "train", o.config, to_json(cfg), cfg.seed, artifacts);

    if (!failure.empty()) {
        err << "attfc train: numerical failure at step " << trainer.steps_done() + 1 << ": " << failure << "\n";
        return kExitNumerical;
    }
    out << "trained " << to_string(cfg.head) << " for " << trainer.steps_done() << " steps";
    if (last && last->verif_acc) {
        out << ", verif_acc " << format_double(*last->verif_acc);
    }
    out << "\nartifacts in " << dir.string() << "\n";
    return kExitOk;
}

int cmd_gradcheck(const CommonOptions& o, GradcheckOptions g, std::ostream& out) {
    if (o.seed) {
        g.seed = *o.seed;
    }
    const auto results = run_gradcheck(g);
    const fs::path dir = prepare_out(o.out);
    std::string csv = "suite,max_rel_error,tolerance,trials,passed\n";
    bool ok = true;
    for (const SuiteResult& r : results) {
        ok = ok && r.passed();
        out << r.name << " max_rel_err=" << format_double(r.max_relative_error)
            << " tol=" << format_double(r.tolerance) << (r.passed() ? " PASS" : " FAIL") << "\n";
        csv += r.name + ',' + format_double(r.max_relative_error) + ',' + format_double(r.tolerance) + ',' +
               std::to_string(r.trials) + ',' + (r.passed() ? "1" : "0") + '\n';
    }
    write_text(dir / "gradcheck.csv", csv);
    json options = {{"trials", g.trials},       {"max_dim", g.max_dim},
                    {"max_slots", g.max_slots}, {"max_batch", g.max_batch},
                    {"flip_feature_sign", g.flip_feature_sign}};
    write_manifest(dir, "gradcheck", "", nullptr, g.seed, {"gradcheck.csv", "manifest.json"},
                   {{"options", options}});
    return ok ? kExitOk : kExitNumerical;
}

struct BenchOptions {
    std::vector<std::size_t> identities = {93431, 205990, 411980, 1029950};
    double ratio = 0.3;
    std::size_t dim = 512;
    std::size_t batch = 384;
    std::size_t bytes = 4;
};

int cmd_bench(const CommonOptions& o, const BenchOptions& b, std::ostream& out) {
    const auto rows = bench_heads(b.identities, b.ratio, b.dim, b.batch, b.bytes);
    const std::string csv = bench_csv(rows);
    const fs::path dir = prepare_out(o.out);
    write_text(dir / "bench.csv", csv);
    json options = {{"identities", b.identities}, {"ratio", b.ratio}, {"dim", b.dim},
                    {"batch", b.batch},           {"bytes_per_value", b.bytes}};
    write_manifest(dir, "bench", "", nullptr, o.seed.value_or(0), {"bench.csv", "manifest.json"},
                   {{"options", options}});
    out << csv;
    return kExitOk;
}

struct CompareOptions {
    std::vector<std::string> strategies = {"single", "constant", "attention"};
    std::vector<std::size_t> ks = {2, 3, 4, 5};
    std::size_t samples = 1000;
};

int cmd_compare(const CommonOptions& o, const CompareOptions& c, std::ostream& out) {
    const TrainConfig cfg = o.resolve();
    std::vector<GccStrategy> strategies;
    for (const auto& s : c.strategies) {
        strategies.push_back(gcc_strategy_from_string(s));
    }
    const auto rows = compare_strategies(cfg, strategies, c.ks, c.samples);
    const std::string csv = compare_csv(rows);
    const fs::path dir = prepare_out(o.out);
    write_text(dir / "compare.csv", csv);
    json runs = json::array();
    for (const CompareRow& r : rows) {
        runs.push_back({{"strategy", to_string(r.strategy)}, {"k", r.k}, {"seed", r.seed}});
    }
    write_manifest(dir, "compare", o.config, to_json(cfg), cfg.seed, {"compare.csv", "manifest.json"},
                   {{"runs", runs}, {"gcc_samples", c.samples}});
    out << csv;
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Attention-based FC head: training, gradient checks and benchmarks", "attfc"};
    app.require_subcommand(1);

    CommonOptions common;
    GradcheckOptions grad;
    BenchOptions bench;
    CompareOptions compare;

    auto* train = app.add_subcommand("train", "Train an attfc or fc model on the synthetic dataset");
    add_config_flags(train, common);
    add_output_flags(train, common);

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare closed-form gradients with finite differences");
    add_output_flags(gradcheck, common);
    gradcheck->add_option("--trials", grad.trials, "Random instances per suite")->capture_default_str();
    gradcheck->add_option("--dims", grad.max_dim, "Largest feature dimension")->capture_default_str();
    gradcheck->add_flag("--inject-sign-flip", grad.flip_feature_sign, "Negate the analytic feature gradient");

    auto* bench_cmd = app.add_subcommand("bench", "Head parameter counts and bytes, FC vs DCC");
    add_output_flags(bench_cmd, common);
    bench_cmd->add_option("--n", bench.identities, "Identity counts")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--ratio", bench.ratio, "Size ratio r")->capture_default_str();
    bench_cmd->add_option("--dim", bench.dim, "Feature dimension D")->capture_default_str();
    bench_cmd->add_option("--batch", bench.batch, "Batch size B")->capture_default_str();
    bench_cmd->add_option("--bytes", bench.bytes, "Bytes per value")->capture_default_str();

    auto* compare_cmd = app.add_subcommand("compare", "Train per GCC strategy and k, report GCC quality");
    add_config_flags(compare_cmd, common);
    add_output_flags(compare_cmd, common);
    compare_cmd->add_option("--strategies", compare.strategies, "GCC strategies")->delimiter(',');
    compare_cmd->add_option("--ks", compare.ks, "Class image counts")->delimiter(',');
    compare_cmd->add_option("--samples", compare.samples, "GCC draws per row")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train) {
            return cmd_train(common, out, err);
        }
        if (*gradcheck) {
            return cmd_gradcheck(common, grad, out);
        }
        if (*bench_cmd) {
            return cmd_bench(common, bench, out);
        }
        return cmd_compare(common, compare, out);
    } catch (const NumericalError& e) {
        err << "attfc: numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "attfc: " << e.what() << "\n";
        return kExitUsage;
    }
}

}  // namespace attfc
