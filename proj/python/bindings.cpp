#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "attfc/attention_loader.hpp"
#include "attfc/checkpoint.hpp"
#include "attfc/cli.hpp"
#include "attfc/dcc.hpp"
#include "attfc/experiments.hpp"
#include "attfc/gradcheck.hpp"
#include "attfc/loss_grad.hpp"
#include "attfc/report.hpp"
#include "attfc/similarity_head.hpp"
#include "attfc/trainer.hpp"

namespace py = pybind11;
using namespace attfc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Mat to_mat(const Array& a) {
    if (a.ndim() != 2) {
        throw Error("expected a 2-d array");
    }
    Mat m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.values().begin());
    return m;
}

Vec to_vec(const Array& a) {
    if (a.ndim() != 1) {
        throw Error("expected a 1-d array");
    }
    return Vec(a.data(), a.data() + a.size());
}

Array from_mat(const Mat& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

Array from_vec(std::span<const double> v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict record_dict(const MetricsRecord& r) {
    py::dict d;
    d["step"] = r.step;
    d["loss"] = r.loss;
    d["lr"] = r.lr;
    d["conflicts"] = r.conflicts;
    d["gcc_tcc_cos"] = r.gcc_tcc_cos;
    d["verif_acc"] = r.verif_acc;
    d["head_params"] = r.head_params;
    d["step_ms"] = r.step_ms;
    return d;
}

TrainConfig config_from_text(const std::string& text, const std::vector<std::string>& overrides) {
    auto doc = nlohmann::json::parse(text.empty() ? "{}" : text, nullptr, false);
    if (doc.is_discarded()) {
        throw ConfigError("config is not valid JSON");
    }
    for (const auto& o : overrides) {
        apply_override(doc, o);
    }
    return config_from_json(doc);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "AttFC classification head: margin softmax, class container, attention loader, trainer";

    // Translators run most-recent first, so the base class goes first.
    auto base = py::register_exception<Error>(m, "Error", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    py::enum_<SimilarityMode>(m, "SimilarityMode")
        .value("plain", SimilarityMode::plain)
        .value("arcface", SimilarityMode::arcface);

    py::class_<MarginConfig>(m, "MarginConfig")
        .def(py::init([](double scale, double margin, SimilarityMode mode) {
                 MarginConfig c{scale, margin, mode};
                 c.validate();
                 return c;
             }),
             py::arg("scale") = 64.0, py::arg("margin") = 0.5, py::arg("mode") = SimilarityMode::arcface)
        .def_readonly("scale", &MarginConfig::scale)
        .def_readonly("margin", &MarginConfig::margin)
        .def_readonly("mode", &MarginConfig::mode);

    m.def("softmax", [](const Array& z) { return from_vec(softmax(to_vec(z))); });
    m.def("logits",
          [](const Array& f, const Array& centers, std::optional<std::size_t> positive, const MarginConfig& cfg) {
              return from_vec(logits(to_vec(f), to_mat(centers), positive, cfg));
          },
          py::arg("f"), py::arg("centers"), py::arg("positive") = std::nullopt, py::arg("cfg") = MarginConfig{});
    m.def("dcc_capacity", &dcc_capacity, py::arg("identities"), py::arg("ratio"), py::arg("batch_size"));
    m.def("head_param_count", &head_param_count, py::arg("dim"), py::arg("slots"));
    m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total_steps"), py::arg("lr0"));

    m.def("masked_probabilities",
          [](const Array& centers, const Array& f, std::size_t positive, std::vector<std::size_t> conflicts,
             const MarginConfig& cfg) {
              return from_vec(masked_probabilities(to_mat(centers), to_vec(f), positive, conflicts, cfg));
          },
          py::arg("centers"), py::arg("f"), py::arg("positive"), py::arg("conflicts"), py::arg("cfg") = MarginConfig{});

    m.def("batch_loss",
          [](const Array& features, const Array& centers, std::vector<std::size_t> positives,
             std::vector<std::vector<std::size_t>> conflicts, const MarginConfig& cfg) {
              const Mat f = to_mat(features);
              const Mat c = to_mat(centers);
              const BatchLossResult r = batch_loss(f, c, positives, conflicts, cfg);
              return py::make_tuple(r.loss, from_mat(batch_grad_features(r, f, c, positives, cfg)),
                                    from_mat(grad_centers(r, f, c, positives, cfg)));
          },
          py::arg("features"), py::arg("centers"), py::arg("positives"),
          py::arg("conflicts") = std::vector<std::vector<std::size_t>>{}, py::arg("cfg") = MarginConfig{},
          "Mean batch loss with its gradients: (loss, d/d features, d/d centers).");

    m.def("build_gcc",
          [](const std::string& strategy, const Array& f, const Array& class_features, double temperature) {
              return from_vec(build_gcc(gcc_strategy_from_string(strategy), to_vec(f),
                                        ClassFeatureSet(to_mat(class_features)), temperature));
          },
          py::arg("strategy"), py::arg("f"), py::arg("class_features"), py::arg("temperature") = 1.0);

    py::class_<Dcc>(m, "Dcc")
        .def(py::init(&Dcc::init), py::arg("dim"), py::arg("capacity"), py::arg("seed") = 0)
        .def_property_readonly("capacity", &Dcc::capacity)
        .def_property_readonly("dim", &Dcc::dim)
        .def_property_readonly("cursor", &Dcc::cursor)
        .def_property_readonly("centers", [](const Dcc& d) { return from_mat(d.centers()); })
        .def_property_readonly("labels", &Dcc::labels)
        .def("enqueue",
             [](Dcc& d, const Array& gccs, std::vector<Label> labels) { return d.enqueue_batch(to_mat(gccs), labels); })
        .def("find_conflicts", &Dcc::find_conflicts, py::arg("label"), py::arg("own_slot"));

    py::class_<Trainer>(m, "Trainer")
        .def(py::init([](const std::string& config_json, const std::vector<std::string>& overrides) {
                 return Trainer(config_from_text(config_json, overrides));
             }),
             py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{})
        .def_static("resume",
                    [](const py::bytes& data) { return Trainer::resume(deserialize_checkpoint(std::string(data))); })
        .def("step", [](Trainer& t) { return record_dict(t.step()); })
        .def("evaluate", &Trainer::evaluate)
        .def_property_readonly("done", &Trainer::done)
        .def_property_readonly("steps_done", &Trainer::steps_done)
        .def_property_readonly("total_steps", &Trainer::total_steps)
        .def_property_readonly("head_params", &Trainer::head_params)
        .def_property_readonly("config_json", [](const Trainer& t) { return to_json(t.config()).dump(); })
        .def("checkpoint", [](const Trainer& t) { return py::bytes(serialize_checkpoint(t.checkpoint())); });

    m.def("run_gradcheck",
          [](std::size_t trials, std::size_t max_dim, std::uint64_t seed) {
              GradcheckOptions o;
              o.trials = trials;
              o.max_dim = max_dim;
              o.seed = seed;
              py::list out;
              for (const SuiteResult& r : run_gradcheck(o)) {
                  py::dict d;
                  d["suite"] = r.name;
                  d["max_rel_error"] = r.max_relative_error;
                  d["tolerance"] = r.tolerance;
                  d["passed"] = r.passed();
                  out.append(d);
              }
              return out;
          },
          py::arg("trials") = 100, py::arg("max_dim") = 16, py::arg("seed") = 0);

    m.def("bench_csv",
          [](std::vector<std::size_t> ns, double ratio, std::size_t dim, std::size_t batch, std::size_t bytes) {
              return bench_csv(bench_heads(ns, ratio, dim, batch, bytes));
          },
          py::arg("identities"), py::arg("ratio") = 0.3, py::arg("dim") = 512, py::arg("batch_size") = 384,
          py::arg("bytes_per_value") = 4);

    m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "attfc");
        std::vector<const char*> argv;
        for (const auto& a : args) {
            argv.push_back(a.c_str());
        }
        std::ostringstream out;
        std::ostringstream err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
    });
}
