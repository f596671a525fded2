#include "attfc/experiments.hpp"

#include "attfc/dcc.hpp"
#include "attfc/evaluation.hpp"
#include "attfc/report.hpp"
#include "attfc/trainer.hpp"

namespace attfc {

std::vector<BenchRow> bench_heads(std::span<const std::size_t> identities, double ratio, std::size_t dim,
                                  std::size_t batch_size, std::size_t bytes_per_value) {
    std::vector<BenchRow> rows;
    for (std::size_t n : identities) {
        BenchRow r;
        r.identities = n;
        r.fc_params = head_param_count(dim, n);
        r.dcc_params = head_param_count(dim, dcc_capacity(n, ratio, batch_size));
        r.fc_bytes = r.fc_params * bytes_per_value;
        r.dcc_bytes = r.dcc_params * bytes_per_value;
        r.ratio = static_cast<double>(r.dcc_params) / static_cast<double>(r.fc_params);
        rows.push_back(r);
    }
    return rows;
}

std::string bench_csv(std::span<const BenchRow> rows) {
    std::string out = std::string(kBenchHeader) + "\n";
    for (const BenchRow& r : rows) {
        out += std::to_string(r.identities) + ',' + std::to_string(r.fc_params) + ',' + std::to_string(r.dcc_params) +
               ',' + std::to_string(r.fc_bytes) + ',' + std::to_string(r.dcc_bytes) + ',' + format_double(r.ratio) +
               '\n';
    }
    return out;
}

std::vector<CompareRow> compare_strategies(const TrainConfig& base, std::span<const GccStrategy> strategies,
                                           std::span<const std::size_t> ks, std::size_t gcc_samples) {
    std::vector<CompareRow> rows;
    for (std::size_t k : ks) {
        for (GccStrategy strategy : strategies) {
            TrainConfig cfg = base;
            cfg.head = HeadMode::attfc;
            cfg.strategy = strategy;
            cfg.k = k;
            Trainer trainer(cfg);
            MetricsRecord last;
            double total_ms = 0.0;
            while (!trainer.done()) {
                last = trainer.step();
                total_ms += last.step_ms.value_or(0.0);
            }
            const FeatureFn fe = encoder_features(trainer.feature_encoder());
            const FeatureFn ce = encoder_features(trainer.class_encoder());
            const GccQuality q =
                measure_gcc_quality(trainer.dataset(), fe, ce, empirical_tcc(trainer.dataset(), fe), strategy, k,
                                    gcc_samples, derive_seed(cfg.seed, 100 + k), cfg.attention_temperature);
            CompareRow row;
            row.strategy = strategy;
            row.k = k;
            row.seed = cfg.seed;
            row.verif_acc = last.verif_acc.value_or(trainer.evaluate());
            row.gcc_tcc_cos = q.mean_cos;
            row.gcc_tcc_var = q.variance;
            if (cfg.record_timing) {
                row.step_ms = total_ms / static_cast<double>(trainer.steps_done());
            }
            rows.push_back(row);
        }
    }
    return rows;
}

std::string compare_csv(std::span<const CompareRow> rows) {
    std::string out = std::string(kCompareHeader) + "\n";
    for (const CompareRow& r : rows) {
        out += to_string(r.strategy) + ',' + std::to_string(r.k) + ',' + std::to_string(r.seed) + ',' +
               format_double(r.verif_acc) + ',' + format_double(r.gcc_tcc_cos) + ',' + format_double(r.gcc_tcc_var) +
               ',' + format_optional(r.step_ms) + '\n';
    }
    return out;
}

}  // namespace attfc
