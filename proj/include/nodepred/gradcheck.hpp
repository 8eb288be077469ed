#pragma once

// Central finite-difference gradient checking.  The caller supplies a
// deterministic loss closure over a parameter list; the checker perturbs a
// random subsample of coordinates and compares the analytic gradient (which
// the caller must have populated beforehand) against (f(x+h) - f(x-h)) / 2h.
//
// ReLU kinks and zero-norm rows make the loss piecewise-smooth: coordinates
// whose perturbation flips an activation branch would compare a derivative
// across a kink, so the loss closure may report a "branch signature" (any
// hash of its active ReLU masks / zero-row flags); coordinates whose +h and
// -h evaluations disagree on the signature are excluded from the comparison
// and tallied separately.

#include <nodepred/nn.hpp>
#include <nodepred/rng.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nodepred {

struct GradCheckReport {
    double max_rel_error = 0.0;
    double mean_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::size_t coords_skipped_kink = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    double tolerance = 0.0;

    bool passed() const { return coords_checked > 0 && max_rel_error < tolerance; }
};

// Loss evaluation result: the scalar loss plus the branch signature of the
// evaluation (0 when the model has no branches worth tracking).
struct LossEval {
    double loss = 0.0;
    std::uint64_t branch_signature = 0;
};

// params: the double-precision parameters, with `grad` already holding the
//   analytic gradient of `loss_fn` at the current values.
// loss_fn: recomputes the loss from the current parameter values.
// max_coords_per_param: random subsample size per parameter array.
inline GradCheckReport finite_diff_check(const std::vector<Param<double>*>& params,
                                         const std::function<LossEval()>& loss_fn,
                                         double tolerance, std::uint64_t seed,
                                         std::size_t max_coords_per_param = 64) {
    GradCheckReport report;
    report.tolerance = tolerance;
    Rng rng(mix_seed(seed, 0x666463ull));  // "fdc" stream
    double rel_sum = 0.0;

    for (Param<double>* param : params) {
        const std::size_t n = param->value.size();
        if (n == 0) continue;
        std::vector<std::size_t> coords(n);
        for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        if (n > max_coords_per_param) {
            rng.shuffle(coords);
            coords.resize(max_coords_per_param);
        }

        for (std::size_t idx : coords) {
            double* slot = param->value.data() + idx;
            const double original = *slot;
            const double h = 1e-5 * std::max(1.0, std::abs(original));

            *slot = original + h;
            const LossEval plus = loss_fn();
            *slot = original - h;
            const LossEval minus = loss_fn();
            *slot = original;

            if (plus.branch_signature != minus.branch_signature) {
                ++report.coords_skipped_kink;
                continue;
            }

            const double numeric = (plus.loss - minus.loss) / (2.0 * h);
            const double analytic = param->grad.data()[idx];
            const double rel = std::abs(analytic - numeric) /
                               std::max({1.0, std::abs(analytic), std::abs(numeric)});
            ++report.coords_checked;
            rel_sum += rel;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = param->name;
                report.worst_index = idx;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    if (report.coords_checked > 0)
        report.mean_rel_error = rel_sum / static_cast<double>(report.coords_checked);
    return report;
}

}  // namespace nodepred
