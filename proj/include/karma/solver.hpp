#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "karma/model.hpp"

namespace karma::solver {

struct SolverConfig {
  double lambda = 1000.0;  // softmax greediness
  double omega = 0.20;     // distribution step
  double eta = 0.50;       // policy step relative to omega
  int max_iterations = 1000;
  double convergence_tol = 1e-6;  // inf-norm of social-state change
  int v_max_iterations = 10000;
  double v_tol = 1e-9;
  double expand_action_tol = 1e-4;
  double expand_state_tol = 1e-4;
  int initial_action_span = -1;  // defaults to avg karma
  int initial_state_span = -1;   // defaults to 4x avg karma
  int karma_cap = 400;           // hard axis caps (resource guard)
  int action_cap = 120;
  // optional step-decay schedule; off by default so the defaults above
  // reproduce the recommended lambda=1000, omega=0.20, eta=0.50
  int omega_decay_after = -1;
  double omega_decay = 1.0;
  double omega_floor = 1e-4;
  double certificate_tol = -1.0;  // defaults to 10/lambda
  PolicyInit policy_init = PolicyInit::kEven;

  double cert_tol() const { return certificate_tol > 0 ? certificate_tol : 10.0 / lambda; }
};

// All intermediate products of one solver iteration.
struct SolverWorkspace {
  Array1 nu;           // [a]
  Array2 gamma;        // [o][a]
  Array3 kappa;        // [k*][k][a]
  Array2 xi;           // [u][a]
  Array4 urgency_mix;  // [t][u*][u][a] = sum_o Psi * gamma
  Array6 rho;          // [t][u*][k*][u][k][a], materialized on demand
  Array3 R;            // [t][u][k]
  Array5 P;            // [t][u*][k*][u][k], materialized on demand
  Array3 V;            // [t][u][k]
  Array4 Q;            // [t][u][k][a], -inf on infeasible actions
  Array4 perturbed;    // [t][u][k][a]
  int v_iterations = 0;
  double v_residual = 0.0;
};

struct IterationRecord {
  int iteration;
  double residual;
  int karma_top;
  int action_top;
  double mean_karma;
};

struct ConvergenceReport {
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;
  int karma_top = 0;
  int action_top = 0;
  double equilibrium_gap = 0.0;  // min pi-mass on the Q argmax set, populated states
  double v_residual = 0.0;
  std::vector<IterationRecord> history;
};

struct SolveResult {
  SocialState state;
  ConvergenceReport report;
  SolverWorkspace workspace;
};

class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(const std::string& what, double residual)
      : std::runtime_error(what), last_residual(residual) {}
  double last_residual;
};

// Individual pipeline stages (Eqs. 1-11); each writes into the workspace.
void compute_nu(const GameSpec& spec, const SocialState& state, SolverWorkspace& ws);
void compute_gamma(const GameSpec& spec, SolverWorkspace& ws);
void compute_kappa(const GameSpec& spec, int karma_top, SolverWorkspace& ws);
void compute_xi(const GameSpec& spec, SolverWorkspace& ws);
void compute_urgency_mix(const GameSpec& spec, SolverWorkspace& ws);
void compute_rho(const GameSpec& spec, SolverWorkspace& ws);
void compute_R(const SocialState& state, SolverWorkspace& ws);
void compute_P(const SocialState& state, SolverWorkspace& ws);
void compute_V(const GameSpec& spec, const SolverConfig& config, SolverWorkspace& ws);
void compute_Q(const GameSpec& spec, SolverWorkspace& ws);
void perturbed_best_response(const SolverConfig& config, SolverWorkspace& ws);

// Blends the policy toward the perturbed best response and advances the
// distribution by the policy-averaged transition kernel.
void update_social_state(SocialState& state, const SolverConfig& config,
                         const SolverWorkspace& ws, double omega_now);

// Restores sum(d)=1, mean karma, and row-normalized policies. Idempotent.
void validate_and_normalize(const GameSpec& spec, SocialState& state);

// Grows the action/karma axes when boundary mass exceeds the thresholds.
bool adjust_state_space(const GameSpec& spec, SocialState& state,
                        const SolverConfig& config);

SocialState default_initial_state(const GameSpec& spec, const SolverConfig& config);

SolveResult solve(const GameSpec& spec, const SolverConfig& config,
                  std::optional<SocialState> initial = std::nullopt);

}  // namespace karma::solver
