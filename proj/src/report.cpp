#include "attfc/report.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace attfc {

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string metrics_csv_row(const MetricsRecord& rec) {
    std::string line = std::to_string(rec.step);
    for (const std::string& field :
         {format_double(rec.loss), format_double(rec.lr), std::to_string(rec.conflicts),
          format_optional(rec.gcc_tcc_cos), format_optional(rec.verif_acc), std::to_string(rec.head_params),
          format_optional(rec.step_ms)}) {
        line += ',';
        line += field;
    }
    return line;
}

nlohmann::json to_json(const MetricsRecord& rec) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j = {{"step", rec.step},
                        {"loss", rec.loss},
                        {"lr", rec.lr},
                        {"conflicts", rec.conflicts},
                        {"gcc_tcc_cos", opt(rec.gcc_tcc_cos)},
                        {"verif_acc", opt(rec.verif_acc)},
                        {"head_params", rec.head_params},
                        {"step_ms", opt(rec.step_ms)}};
    if (rec.center_grad_error) {
        j["center_grad_error"] = *rec.center_grad_error;
    }
    return j;
}

}  // namespace attfc
