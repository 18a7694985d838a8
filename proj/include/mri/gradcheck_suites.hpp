#pragma once

#include <string>
#include <vector>

#include "mri/autodiff.hpp"

namespace mri {

/// One finite-difference verification, e.g. a single primitive or a full
/// network composition.
struct SuiteResult {
    std::string name;
    GradCheckReport report;
    double tolerance = 1e-4;
    bool pass = false;
};

/// Valid suite names: "primitives", "mwcnn", "unet", "xpdnet", "loss".
std::vector<std::string> gradcheck_suite_names();

/// Run one suite ("all" runs every suite in order). Unknown names raise
/// InvalidConfigError.
std::vector<SuiteResult> run_gradcheck_suite(const std::string& which);

} // namespace mri
