#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "attfc/trainer.hpp"

namespace attfc {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

inline constexpr const char* kMetricsHeader = "step,loss,lr,conflicts,gcc_tcc_cos,verif_acc,head_params,step_ms";

/// One CSV line without the trailing newline; unmeasured fields are empty.
std::string metrics_csv_row(const MetricsRecord& rec);

nlohmann::json to_json(const MetricsRecord& rec);

}  // namespace attfc
