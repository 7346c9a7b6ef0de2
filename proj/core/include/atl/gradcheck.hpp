#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace atl {

struct GradcheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Denominator floor for the relative error, so exact zeros compare by
    /// absolute difference.
    double abs_floor = 1e-7;
    /// Times the step is divided by 10 when the two probes land on different
    /// sides of a ReLU/max-pool kink.
    int refinements = 3;
};

struct GradcheckReport {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
    /// Coordinates where every probe pair straddled a kink.
    std::size_t skipped = 0;
    bool passed = true;
};

using Objective = std::function<double(std::span<const double>)>;
/// Optional branch signature of the objective at a point (see Tape::signature).
using BranchSignature = std::function<std::uint64_t(std::span<const double>)>;

double relative_error(double analytic, double numeric, double abs_floor);

/// Compares `analytic` against central differences (f(x+h) - f(x-h)) / 2h
/// for every coordinate of `point`. Failing tolerance is reported, not thrown.
GradcheckReport gradcheck(const Objective& f, std::span<const double> point, std::span<const double> analytic,
                          const GradcheckOptions& options = {}, const BranchSignature& signature = {});

}  // namespace atl
