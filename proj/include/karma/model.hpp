#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "karma/array.hpp"
#include "karma/rng.hpp"

namespace karma {

// One realization of an interaction outcome: the per-participant outcome
// vector (0 = resource not received, 1 = received) and its probability.
struct JointOutcome {
  std::vector<int> outcome;
  double prob = 0.0;
};

// Probabilistic outcome function Theta: bids -> distribution over joint
// outcomes.
class OutcomeModel {
 public:
  virtual ~OutcomeModel() = default;
  virtual int participants() const = 0;
  virtual void enumerate(std::span<const int> bids,
                         std::vector<JointOutcome>& out) const = 0;

  // P(own outcome = o | bids), own position j
  double own_outcome_probability(std::span<const int> bids, int j, int o) const;
};

// Probabilistic Karma transition Omega: successor balances for participant j
// given the bid vector and the realized joint outcome.
class KarmaTransitionModel {
 public:
  virtual ~KarmaTransitionModel() = default;
  virtual void successors(int k_now, std::span<const int> bids,
                          std::span<const int> outcome, int j,
                          std::vector<std::pair<int, double>>& out) const = 0;

  double probability(int k_next, int k_now, std::span<const int> bids,
                     std::span<const int> outcome, int j) const;
};

// Probabilistic urgency transition Psi.
class UrgencyTransitionModel {
 public:
  virtual ~UrgencyTransitionModel() = default;
  virtual double probability(int type, int u_next, int u_now,
                             int own_outcome) const = 0;
  virtual int num_levels() const = 0;
  // true when the next urgency is independent of state and outcome; the
  // solver exploits this with a cheaper value-iteration contraction
  virtual bool iid() const { return false; }
};

// Logic functions driving the multi-agent simulation. Karma deltas are
// integers; every rule conserves sum(deltas) + overflow delta.
struct SimulationLogic {
  std::function<std::vector<int>(std::span<const int> bids, Rng&)> outcome_fn;
  std::function<void(std::span<const int> bids, std::span<const int> outcome,
                     std::span<long long> deltas, long long& overflow_delta)>
      payment_fn;
  std::function<int(int type, int u_now, int own_outcome, Rng&)> urgency_fn;
  std::function<void(std::span<const long long> balances, long long& overflow,
                     std::span<long long> deltas, Rng&)>
      overflow_fn;
  std::function<void(std::span<const long long> balances,
                     std::span<long long> deltas, Rng&)>
      redistribution_fn;
};

// Immutable definition of a Karma game.
struct GameSpec {
  int num_agents = 0;
  int participants_per_interaction = 2;
  std::vector<double> discount;         // T[type], each in [0,1)
  std::vector<double> type_shares;      // population share per type
  std::vector<double> urgency_values;   // labels, e.g. {0,1} or {1..10}
  std::vector<double> urgency_weights;  // initial / iid distribution
  int initial_avg_karma = 0;
  int num_outcomes = 2;
  Array2 cost;  // C[u][o]

  std::shared_ptr<const OutcomeModel> outcome_model;
  std::shared_ptr<const KarmaTransitionModel> karma_model;
  std::shared_ptr<const UrgencyTransitionModel> urgency_model;
  SimulationLogic logic;

  int num_types() const { return static_cast<int>(discount.size()); }
  int num_urgency() const { return static_cast<int>(urgency_values.size()); }
  void validate() const;  // throws std::invalid_argument
};

// Social state: policy pi[t][u][k][a] and distribution d[t][u][k] over
// contiguous integer axes k = 0..K, a = 0..A.
struct SocialState {
  Array4 policy;
  Array3 distribution;

  int karma_top() const { return static_cast<int>(distribution.dim(2)) - 1; }
  int action_top() const { return static_cast<int>(policy.dim(3)) - 1; }
};

enum class DistributionInit { kAllAtAverage, kUniformBand };
enum class PolicyInit { kBottom, kEven, kTop };

Array3 build_initial_distribution(std::span<const double> type_shares,
                                  std::span<const double> urgency_weights,
                                  int avg_karma, DistributionInit mode,
                                  int karma_top);

Array4 build_initial_policy(PolicyInit mode, int num_types, int num_urgency,
                            int karma_top, int action_top);

}  // namespace karma
