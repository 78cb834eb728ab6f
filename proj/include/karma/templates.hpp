#pragma once

#include <map>
#include <memory>
#include <string>

#include "karma/model.hpp"

namespace karma::rules {

// A template supplies the probabilistic model used by the solver and the
// matching logic function used by the simulator.
struct OutcomeRule {
  std::shared_ptr<const OutcomeModel> model;
  std::function<std::vector<int>(std::span<const int>, Rng&)> sample;
};

struct PaymentRule {
  std::shared_ptr<const KarmaTransitionModel> model;
  std::function<void(std::span<const int> bids, std::span<const int> outcome,
                     std::span<long long> deltas, long long& overflow_delta)>
      apply;
};

struct UrgencyRule {
  std::shared_ptr<const UrgencyTransitionModel> model;
  std::function<int(int type, int u_now, int own_outcome, Rng&)> sample;
};

using OverflowFn = std::function<void(std::span<const long long>, long long&,
                                      std::span<long long>, Rng&)>;
using RedistributionFn =
    std::function<void(std::span<const long long>, std::span<long long>, Rng&)>;

// Highest bid wins, ties broken by a fair coin. Two participants.
OutcomeRule outcome_highest_bid();

// A participant wins iff it bids at least `threshold` and is the (tie-broken)
// highest bidder; if nobody qualifies, nobody receives the resource.
OutcomeRule outcome_threshold_auction(int threshold, int participants = 2);

// Winner pays its own bid to the losing peer. Two participants.
PaymentRule payment_pay_bid_to_peer();

// Winner pays its own bid into the overflow account. Any participant count.
PaymentRule payment_pay_bid_to_society();

// Next urgency drawn i.i.d. from fixed weights, independent of outcome.
UrgencyRule urgency_iid(std::vector<double> weights);

// weights[i] proportional to p*(1-p)^i over `levels` levels, renormalized
std::vector<double> geometric_weights(double p, int levels);

// Distributes floor(Z/n) to everyone plus one unit to Z mod n distinct random
// agents; resets Z to 0.
OverflowFn overflow_uniform();
OverflowFn overflow_none();
RedistributionFn redistribution_none();

// string-keyed factories used by the config loader
OutcomeRule make_outcome_rule(const std::string& name,
                              const std::map<std::string, double>& params);
PaymentRule make_payment_rule(const std::string& name);
UrgencyRule make_urgency_rule(const std::string& name,
                              const std::map<std::string, double>& params,
                              std::vector<double> explicit_weights);
OverflowFn make_overflow_rule(const std::string& name);
RedistributionFn make_redistribution_rule(const std::string& name);

}  // namespace karma::rules
