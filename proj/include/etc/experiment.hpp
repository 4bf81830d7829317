#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "etc/model.hpp"

namespace etc {

// Parsed experiment description. Matrices are kept raw so that
// validate_config can report every violation instead of failing on the
// first malformed section.
struct ExperimentSpec {
    Matrix A, B, Sigma_w, Sigma_0;
    Matrix Q_x, Q_u;
    double rho = 0.0;
    bool has_K = false;  // false: synthesize the dead-beat gain
    Matrix K;
    int nu = 0;          // 0: use the controllability index
    double p_loss = 0.0;
    int timeout_T = 1;
    std::vector<double> epsilon_grid;
    std::vector<std::string> modes;  // subset of {analytic, simulate, baseline}
    std::uint64_t seed = 1;
    int replications = 10000;
    long horizon = 25001;
    std::string output;

    bool operator==(const ExperimentSpec&) const;
};

// Parse / serialize the frozen JSON dialect (documented in the README).
ExperimentSpec parse_config(const std::string& json_text);
ExperimentSpec load_config(const std::string& path);
std::string dump_config(const ExperimentSpec& spec);

// All violations, each prefixed with the offending field path; empty iff
// run_experiment's preconditions hold.
std::vector<std::string> validate_config(const ExperimentSpec& spec);

// Run the sweep and stream the trade-off CSV (one row per grid epsilon).
// Throws ConfigInvalid when validate_config is non-empty.
void run_experiment(const ExperimentSpec& spec, std::ostream& out);

// Convenience: honor spec.output (empty path -> stdout).
void run_experiment(const ExperimentSpec& spec);

} // namespace etc
