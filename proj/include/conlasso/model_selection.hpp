#pragma once

#include "conlasso/types.hpp"

#include <optional>

namespace conlasso {

enum class Task { Fixed, Path, CV, StabSel };

// scheme recommendation table: homotopy for paths and large lambda, DR for
// small lambda and the concomitant-Huber problem, homotopy only for the
// classification losses
SolverMethod default_method_for(FormulationKind kind, Task task, double lam_ratio);

// the scale-dependent tuning value sqrt(2/n) * qnorm(1 - 0.05/(2d))
double theory_lambda(Index n, Index d);

// lambda from a fixed-lambda plan (rescaling against compute_lambda_max)
double resolve_lambda(const ProblemData& problem, const Formulation& formulation,
                      const FixedLambdaPlan& plan);

Solution run_fixed_lambda(const ProblemData& problem, const Formulation& formulation,
                          const FixedLambdaPlan& plan, const SolverConfig& config,
                          std::optional<SolverMethod> method_override = std::nullopt);

PathResult run_path(const ProblemData& problem, const Formulation& formulation,
                    const PathPlan& plan, const SolverConfig& config,
                    std::optional<SolverMethod> method_override = std::nullopt);

CVResult run_cv(const ProblemData& problem, const Formulation& formulation, const CVPlan& plan,
                const SolverConfig& config, int threads = 1,
                std::optional<SolverMethod> method_override = std::nullopt);

StabSelResult run_stability_selection(const ProblemData& problem, const Formulation& formulation,
                                      const StabSelPlan& plan, const SolverConfig& config,
                                      int threads = 1,
                                      std::optional<SolverMethod> method_override = std::nullopt);

// seeded near-equal fold assignment: fold id per sample
std::vector<int> cv_fold_assignment(Index n, int folds, std::uint64_t seed);

}  // namespace conlasso
