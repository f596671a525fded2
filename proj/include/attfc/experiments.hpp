#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attfc/train_config.hpp"

namespace attfc {

struct BenchRow {
    std::uint64_t identities = 0;
    std::uint64_t fc_params = 0;
    std::uint64_t dcc_params = 0;
    std::uint64_t fc_bytes = 0;
    std::uint64_t dcc_bytes = 0;
    /// dcc_params / fc_params
    double ratio = 0.0;
};

/// Head sizes of FC (D*N) and DCC (D*capacity(N, r, B)) at `bytes_per_value` precision.
std::vector<BenchRow> bench_heads(std::span<const std::size_t> identities, double ratio, std::size_t dim,
                                  std::size_t batch_size, std::size_t bytes_per_value = 4);

inline constexpr const char* kBenchHeader = "N,fc_params,dcc_params,fc_bytes,dcc_bytes,ratio";
std::string bench_csv(std::span<const BenchRow> rows);

struct CompareRow {
    GccStrategy strategy = GccStrategy::attention;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    double verif_acc = 0.0;
    double gcc_tcc_cos = 0.0;
    double gcc_tcc_var = 0.0;
    /// Mean wall time per step; only when base.record_timing is set.
    std::optional<double> step_ms;
};

/// Trains one model per (strategy, k) with everything else taken from `base`, then measures
/// verification accuracy and cos(GCC, empirical TCC) over `gcc_samples` draws.
std::vector<CompareRow> compare_strategies(const TrainConfig& base, std::span<const GccStrategy> strategies,
                                           std::span<const std::size_t> ks, std::size_t gcc_samples = 1000);

inline constexpr const char* kCompareHeader = "strategy,k,seed,verif_acc,gcc_tcc_cos,gcc_tcc_var,step_ms";
std::string compare_csv(std::span<const CompareRow> rows);

}  // namespace attfc
