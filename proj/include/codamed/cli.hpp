#pragma once

#include <iostream>

namespace codamed::cli {

/// Command-line front end. Subcommands:
///   sbp validate <matrix.csv>
///   transform  --counts F --sbp F [--zero-replacement R] [--out F]
///   mediate    --counts F --meta F --sbp F [--ci L] [--shared-gamma] ...
///   simulate   --config F --out F [--seed S] [--calibration-reps N] [--threads T]
///   experiment --plan F [--out DIR] [--replicates N] [--seed S] [--threads T]
/// Returns 0 on success, 1 on validation/estimation errors (one JSON line on
/// `err`), 2 on unusable arguments. Data goes to `out` when no output path
/// is given; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace codamed::cli
