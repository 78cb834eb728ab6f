#include "karma/model.hpp"

#include <cmath>
#include <stdexcept>

namespace karma {

double OutcomeModel::own_outcome_probability(std::span<const int> bids, int j,
                                             int o) const {
  std::vector<JointOutcome> joints;
  enumerate(bids, joints);
  double p = 0.0;
  for (const auto& jo : joints)
    if (jo.outcome[j] == o) p += jo.prob;
  return p;
}

double KarmaTransitionModel::probability(int k_next, int k_now,
                                         std::span<const int> bids,
                                         std::span<const int> outcome,
                                         int j) const {
  std::vector<std::pair<int, double>> succ;
  successors(k_now, bids, outcome, j, succ);
  double p = 0.0;
  for (const auto& [k, pr] : succ)
    if (k == k_next) p += pr;
  return p;
}

void GameSpec::validate() const {
  if (num_agents <= 0) throw std::invalid_argument("num_agents must be positive");
  if (participants_per_interaction < 2)
    throw std::invalid_argument("participants_per_interaction must be >= 2");
  if (participants_per_interaction > num_agents)
    throw std::invalid_argument("participants_per_interaction exceeds num_agents");
  if (discount.empty()) throw std::invalid_argument("at least one type required");
  for (double t : discount)
    if (!(t >= 0.0 && t < 1.0))
      throw std::invalid_argument("discount factors must satisfy 0 <= T < 1");
  if (initial_avg_karma < 0)
    throw std::invalid_argument("initial_avg_karma must be non-negative");
  if (urgency_values.empty()) throw std::invalid_argument("urgency set empty");
  if (urgency_weights.size() != urgency_values.size())
    throw std::invalid_argument("urgency weights/values size mismatch");
  if (type_shares.size() != discount.size())
    throw std::invalid_argument("type shares/discount size mismatch");
  double ts = 0.0, us = 0.0;
  for (double v : type_shares) ts += v;
  for (double v : urgency_weights) us += v;
  if (std::abs(ts - 1.0) > 1e-9) throw std::invalid_argument("type shares must sum to 1");
  if (std::abs(us - 1.0) > 1e-9) throw std::invalid_argument("urgency weights must sum to 1");
  if (static_cast<int>(cost.dim(0)) != num_urgency() ||
      static_cast<int>(cost.dim(1)) != num_outcomes)
    throw std::invalid_argument("cost map must cover every (urgency, outcome) pair");
  for (std::size_t i = 0; i < cost.size(); ++i)
    if (cost.raw()[i] < 0.0)
      throw std::invalid_argument("costs must be non-negative");
  if (!outcome_model || !karma_model || !urgency_model)
    throw std::invalid_argument("all three probabilistic models are required");
}

Array3 build_initial_distribution(std::span<const double> type_shares,
                                  std::span<const double> urgency_weights,
                                  int avg_karma, DistributionInit mode,
                                  int karma_top) {
  double ts = 0.0, us = 0.0;
  for (double v : type_shares) ts += v;
  for (double v : urgency_weights) us += v;
  if (std::abs(ts - 1.0) > 1e-9 || std::abs(us - 1.0) > 1e-9)
    throw std::invalid_argument("weight vectors must each sum to 1");
  if (avg_karma < 0 || avg_karma > karma_top)
    throw std::out_of_range("avg_karma outside the karma axis");

  const int T = static_cast<int>(type_shares.size());
  const int U = static_cast<int>(urgency_weights.size());
  Array3 d(T, U, karma_top + 1);
  if (mode == DistributionInit::kAllAtAverage) {
    for (int t = 0; t < T; ++t)
      for (int u = 0; u < U; ++u)
        d(t, u, avg_karma) = type_shares[t] * urgency_weights[u];
    return d;
  }
  // uniform band around avg_karma, symmetric so the mean is exact
  int half = std::min({2, avg_karma, karma_top - avg_karma});
  int lo = avg_karma - half, hi = avg_karma + half;
  double cell = 1.0 / (hi - lo + 1);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = lo; k <= hi; ++k)
        d(t, u, k) = type_shares[t] * urgency_weights[u] * cell;
  return d;
}

Array4 build_initial_policy(PolicyInit mode, int num_types, int num_urgency,
                            int karma_top, int action_top) {
  if (action_top < 0) throw std::invalid_argument("action axis must be non-empty");
  Array4 pi(num_types, num_urgency, karma_top + 1, action_top + 1);
  for (int t = 0; t < num_types; ++t)
    for (int u = 0; u < num_urgency; ++u)
      for (int k = 0; k <= karma_top; ++k) {
        int amax = std::min(k, action_top);
        switch (mode) {
          case PolicyInit::kBottom:
            pi(t, u, k, 0) = 1.0;
            break;
          case PolicyInit::kTop:
            pi(t, u, k, amax) = 1.0;
            break;
          case PolicyInit::kEven:
            for (int a = 0; a <= amax; ++a) pi(t, u, k, a) = 1.0 / (amax + 1);
            break;
        }
      }
  return pi;
}

}  // namespace karma
