#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "advpatch/evaluation.hpp"

namespace advpatch {

/// Header `protocol,target,scale,trials,successes,rate,model,seed`, one row
/// per (scale, evaluated model), then a `# config_hash=... seed=...` trailer.
std::string reports_to_csv(std::span<const EvalReport> reports, std::uint64_t config_hash);

/// Line chart of rate against scale, one polyline per report.
std::string reports_to_svg(std::span<const EvalReport> reports, std::uint64_t config_hash);

}  // namespace advpatch
