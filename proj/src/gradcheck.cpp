#include "attfc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "attfc/encoders.hpp"
#include "attfc/loss_grad.hpp"

namespace attfc {

namespace {

struct Instance {
    Mat features;
    Mat centers;
    std::vector<std::size_t> positives;
    std::vector<std::vector<std::size_t>> conflicts;
};

std::size_t uniform_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, std::max(lo, hi))(rng);
}

Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng, bool unit_rows) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(rows, cols);
    for (double& v : m.values()) {
        v = normal(rng);
    }
    if (unit_rows) {
        for (std::size_t r = 0; r < rows; ++r) {
            l2_normalize_inplace(m.row(r));
        }
    }
    return m;
}

// Keeps arcface positives away from the clamp at pi and the kink at theta = 0, where the loss is
// not differentiable.
bool arcface_regular(const Instance& inst, const MarginConfig& cfg) {
    constexpr double kGuard = 0.05;
    for (std::size_t i = 0; i < inst.features.rows(); ++i) {
        const double theta = std::acos(std::clamp(dot(inst.features.row(i), inst.centers.row(inst.positives[i])),
                                                  -1.0, 1.0));
        if (theta < kGuard || theta + cfg.margin > std::numbers::pi - kGuard) {
            return false;
        }
    }
    return true;
}

Instance random_instance(const GradcheckOptions& opt, std::mt19937_64& rng, const MarginConfig& cfg,
                         bool with_conflicts) {
    for (;;) {
        const std::size_t dim = uniform_size(rng, 2, opt.max_dim);
        const std::size_t slots = uniform_size(rng, 2, opt.max_slots);
        const std::size_t batch = uniform_size(rng, 1, opt.max_batch);
        const bool unit = cfg.mode == SimilarityMode::arcface;
        Instance inst{random_mat(batch, dim, rng, unit), random_mat(slots, dim, rng, unit), {}, {}};
        for (std::size_t i = 0; i < batch; ++i) {
            inst.positives.push_back(uniform_size(rng, 0, slots - 1));
        }
        if (with_conflicts) {
            std::bernoulli_distribution coin(0.3);
            inst.conflicts.resize(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                for (std::size_t j = 0; j < slots; ++j) {
                    if (j != inst.positives[i] && coin(rng)) {
                        inst.conflicts[i].push_back(j);
                    }
                }
            }
        }
        if (!unit || arcface_regular(inst, cfg)) {
            return inst;
        }
    }
}

// Loss as a function of a flattened matrix; in arcface mode every perturbed row is renormalized so
// the finite difference measures the sphere gradient.
double loss_with(const Instance& inst, std::span<const double> flat, bool perturb_features,
                 const MarginConfig& cfg) {
    const Mat& base = perturb_features ? inst.features : inst.centers;
    Mat m(base.rows(), base.cols());
    std::copy(flat.begin(), flat.end(), m.values().begin());
    if (cfg.mode == SimilarityMode::arcface) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            l2_normalize_inplace(m.row(r));
        }
    }
    const Mat& features = perturb_features ? m : inst.features;
    const Mat& centers = perturb_features ? inst.centers : m;
    return batch_loss(features, centers, inst.positives, inst.conflicts, cfg).loss;
}

double check_head(const Instance& inst, bool features, const MarginConfig& cfg, bool flip) {
    const BatchLossResult result = batch_loss(inst.features, inst.centers, inst.positives, inst.conflicts, cfg);
    Mat analytic = features ? batch_grad_features(result, inst.features, inst.centers, inst.positives, cfg)
                            : grad_centers(result, inst.features, inst.centers, inst.positives, cfg);
    if (flip) {
        for (double& v : analytic.values()) {
            v = -v;
        }
    }
    const Mat& x = features ? inst.features : inst.centers;
    const Vec numeric = finite_diff_grad(
        [&](std::span<const double> flat) { return loss_with(inst, flat, features, cfg); }, x.values());
    return relative_error(analytic.values(), numeric);
}

double check_encoder(const GradcheckOptions& opt, std::mt19937_64& rng) {
    const std::size_t layers = uniform_size(rng, 1, 3);
    std::vector<std::size_t> widths;
    for (std::size_t l = 0; l <= layers; ++l) {
        widths.push_back(uniform_size(rng, 2, opt.max_dim));
    }
    EncoderParams params = EncoderParams::random(widths, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& b : params.mutable_values()) {
        b += 0.1 * normal(rng);
    }
    Vec input(widths.front());
    Vec upstream(widths.back());
    for (double& v : input) {
        v = normal(rng);
    }
    for (double& v : upstream) {
        v = normal(rng);
    }
    const ForwardResult fwd = forward(params, input);
    EncoderParams grads = EncoderParams::zeros(widths);
    backward(params, fwd.tape, upstream, grads);
    const Vec numeric = finite_diff_grad(
        [&](std::span<const double> flat) {
            const EncoderParams p = EncoderParams::from_values(widths, Vec(flat.begin(), flat.end()));
            return dot(encode(p, input), upstream);
        },
        params.values());
    return relative_error(grads.values(), numeric);
}

}  // namespace

std::vector<SuiteResult> run_gradcheck(const GradcheckOptions& opt) {
    if (opt.trials == 0) {
        throw Error("empty suite");
    }
    if (opt.max_dim < 2 || opt.max_slots < 2 || opt.max_batch < 1) {
        throw Error("gradcheck: instance bounds too small");
    }
    MarginConfig plain;
    plain.mode = SimilarityMode::plain;
    const MarginConfig arcface;

    struct Suite {
        const char* name;
        const MarginConfig* cfg;
        bool features;
        bool conflicts;
        bool encoder;
    };
    const Suite suites[] = {
        {"feature_plain", &plain, true, false, false},    {"centers_plain", &plain, false, false, false},
        {"masked_feature_plain", &plain, true, true, false}, {"feature_arcface", &arcface, true, false, false},
        {"centers_arcface", &arcface, false, false, false}, {"encoder_backward", &plain, false, false, true},
    };

    std::vector<SuiteResult> results;
    std::uint64_t stream = 0;
    for (const Suite& s : suites) {
        std::mt19937_64 rng(opt.seed * 1000003ULL + stream++);
        SuiteResult r;
        r.name = s.name;
        r.trials = opt.trials;
        r.tolerance = s.cfg->mode == SimilarityMode::plain ? opt.plain_tolerance : opt.arcface_tolerance;
        const bool flip = opt.flip_feature_sign && s.features && s.cfg->mode == SimilarityMode::plain;
        for (std::size_t t = 0; t < opt.trials; ++t) {
            const double err = s.encoder ? check_encoder(opt, rng)
                                         : check_head(random_instance(opt, rng, *s.cfg, s.conflicts), s.features,
                                                      *s.cfg, flip);
            r.max_relative_error = std::max(r.max_relative_error, err);
        }
        results.push_back(r);
    }
    return results;
}

}  // namespace attfc
