#pragma once

#include <string>

#include "rbmkit/io.hpp"
#include "rbmkit/reflection.hpp"

namespace rbmkit::experiments {

/// Outcome of one batch run: the data table(s), the fully resolved config that
/// reproduces it, and the exit code contract (0 ok, 1 failure, 2 inconclusive).
struct RunResult {
    io::Table table;
    io::Table summary;  // optional second table; empty columns when unused
    io::Config resolved;
    int exit_code = 0;
    std::string log;
};

RunResult run_validate(io::Config cfg);
RunResult run_rates(io::Config cfg);
RunResult run_simulate(io::Config cfg);
RunResult run_couple(io::Config cfg);
RunResult run_stattest(io::Config cfg);
RunResult run_doa(io::Config cfg);

/// Dispatch by subcommand name.
RunResult run_subcommand(const std::string& name, io::Config cfg);

/// Named reflection generators: "atlas", "asym_atlas:p", "identity",
/// "custom:file.csv" (dense row-major CSV, no header).
Mat generator_matrix(const std::string& gen, int d);

/// Full parameter triple for a generator; drift/diffusion overridable through
/// the `mu` and `sigma_diag` keys for the identity/custom generators.
reflection::RbmParams generator_params(const std::string& gen, int d,
                                       const io::Config& cfg);

/// "zeros" | "ones" | "e1" | "const:c" | comma list.
Vec parse_vector_spec(const std::string& spec, int d);

Mat read_matrix_csv(const std::string& path);

/// Writes table (csv or json), optional summary, manifest and run log into
/// out_dir, creating it if needed.
void emit(const RunResult& res, const std::string& subcommand, const std::string& out_dir,
          const std::string& format);

}  // namespace rbmkit::experiments
