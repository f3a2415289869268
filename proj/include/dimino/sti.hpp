#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dimino/model.hpp"
#include "dimino/solvers.hpp"

namespace dimino {

struct StiOptions {
  std::vector<double> p_list{1, 2, 4, 8};
  SolverConfig solver;            // used for the ground truth at pT
  std::size_t max_samples = 0;    // 0: all
  Precision precision = Precision::kF64;
  const Model* baseline = nullptr;  // optional comparison model
};

struct StiEntry {
  double p = 1;
  // Worst case over samples of rel-L2(pre_scale(T_p u), pre_scale(u)).
  double latent_residual = 0;
  // Worst case over samples of rel-L2(G(T_p u), p^e G(u)), e the target's
  // exponent under the rule; empty when the rule is not exact.
  std::optional<double> output_residual;
  // Means over samples of rel-L2 against the solver at the transformed horizon.
  double model_rel_l2 = 0;
  std::optional<double> baseline_single_shot;
  std::optional<double> baseline_rollout;  // integer p only
  // Worst case of solver_sti_oracle; empty when the rule is not exact.
  std::optional<double> solver_residual;
};

struct StiReport {
  std::string system;
  std::string model;
  std::string baseline;
  std::size_t samples = 0;
  std::vector<StiEntry> entries;
};

// Throws kInvalidArgument unless the p list is positive, sorted ascending and
// contains 1; kSpecMismatch when a sample's system differs from the model's;
// kUnknownSystemRule when the system has no rule.
StiReport sti_check(const Model& model, const std::vector<Sample>& samples, const StiOptions& options);

// rel-L2 between solve(T_p sample) at horizon pT and the rule's rescaling of
// solve(sample). kUnknownSystemRule unless the system's rule is exact.
double solver_sti_oracle(const Sample& sample, double p, const SolverConfig& solver);

std::string sti_report_json(const StiReport& report);
// Rows are models and residuals, columns are p; model rows in units of 1e-2.
std::string format_sti_table(const StiReport& report);

}  // namespace dimino
