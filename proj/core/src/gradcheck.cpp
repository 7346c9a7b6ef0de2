#include "atl/gradcheck.hpp"

#include "atl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atl {

double relative_error(double analytic, double numeric, double abs_floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
    return std::abs(analytic - numeric) / scale;
}

GradcheckReport gradcheck(const Objective& f, std::span<const double> point, std::span<const double> analytic,
                          const GradcheckOptions& options, const BranchSignature& signature) {
    if (point.size() != analytic.size()) throw ShapeError("gradcheck: point and gradient sizes differ");
    GradcheckReport report;
    std::vector<double> probe(point.begin(), point.end());
    for (std::size_t i = 0; i < point.size(); ++i) {
        double h = options.step;
        bool ok = false;
        double numeric = 0.0;
        for (int attempt = 0; attempt <= options.refinements; ++attempt, h /= 10.0) {
            probe[i] = point[i] + h;
            const double fp = f(probe);
            const auto sp = signature ? signature(probe) : 0;
            probe[i] = point[i] - h;
            const double fm = f(probe);
            const auto sm = signature ? signature(probe) : 0;
            probe[i] = point[i];
            if (sp == sm) {
                numeric = (fp - fm) / (2.0 * h);
                ok = true;
                break;
            }
        }
        if (!ok) {
            ++report.skipped;
            continue;
        }
        ++report.checked;
        double err = relative_error(analytic[i], numeric, options.abs_floor);
        if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
        if (report.checked == 1 || err > report.max_rel_error) {
            report.max_rel_error = err;
            report.worst_index = i;
            report.worst_analytic = analytic[i];
            report.worst_numeric = numeric;
        }
    }
    report.passed = report.max_rel_error <= options.tolerance;
    return report;
}

}  // namespace atl
