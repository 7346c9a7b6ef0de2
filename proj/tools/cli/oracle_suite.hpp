#pragma once

#include "atl/gradcheck.hpp"

#include <ostream>
#include <vector>

namespace atl::cli {

struct OracleOptions {
    GradcheckOptions gradcheck;
    std::uint64_t seed = 7;
    /// Test hook: negates every anti-transfer gradient before it is
    /// compared, so the suite must fail.
    bool flip_at_gradient = false;
};

/// Finite-difference checks of every layer kernel, the AT loss pieces and
/// the full L_TOT of a 2-conv vgg-tiny with AT on each layer in turn.
std::vector<GradcheckReport> run_oracle_suite(const OracleOptions& options = {});

/// One line per check; returns true when all of them passed.
bool print_report(const std::vector<GradcheckReport>& reports, std::ostream& out);

}  // namespace atl::cli
