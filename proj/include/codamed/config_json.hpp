#pragma once

#include <string>

#include "codamed/experiment.hpp"
#include "codamed/simgen.hpp"

namespace codamed::config {

/// Generative configuration from JSON. A "preset" key loads one of the named
/// scenario presets first; any further keys override its fields. alpha_s
/// accepts a positive number or the string "inf".
simgen::GenerativeConfig config_from_json(const std::string& text);
std::string config_to_json(const simgen::GenerativeConfig& config);

/// Replication-study plan from JSON. "analysis_sbp" is "generation" (default),
/// "reversed_pivot", or an explicit SBP object {part_labels, entries}.
expt::StudyPlan plan_from_json(const std::string& text);
std::string plan_to_json(const expt::StudyPlan& plan);

}  // namespace codamed::config
