#include "karma/templates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace karma::rules {
namespace {

// winner candidates = qualified bidders holding the maximum qualified bid
std::vector<int> top_bidders(std::span<const int> bids, int threshold) {
  int best = -1;
  for (int b : bids) best = std::max(best, b >= threshold ? b : -1);
  std::vector<int> idx;
  if (best < 0) return idx;
  for (std::size_t j = 0; j < bids.size(); ++j)
    if (bids[j] == best && bids[j] >= threshold) idx.push_back(static_cast<int>(j));
  return idx;
}

class AuctionOutcome final : public OutcomeModel {
 public:
  AuctionOutcome(int threshold, int participants, bool strict_arity)
      : threshold_(threshold), participants_(participants), strict_arity_(strict_arity) {}

  int participants() const override { return participants_; }

  void enumerate(std::span<const int> bids,
                 std::vector<JointOutcome>& out) const override {
    if (strict_arity_ && static_cast<int>(bids.size()) != participants_)
      throw std::invalid_argument("outcome model: wrong participant count");
    if (bids.size() < 2)
      throw std::invalid_argument("outcome model: need at least two participants");
    out.clear();
    auto winners = top_bidders(bids, threshold_);
    if (winners.empty()) {
      JointOutcome jo;
      jo.outcome.assign(bids.size(), 0);
      jo.prob = 1.0;
      out.push_back(std::move(jo));
      return;
    }
    double p = 1.0 / winners.size();
    for (int w : winners) {
      JointOutcome jo;
      jo.outcome.assign(bids.size(), 0);
      jo.outcome[w] = 1;
      jo.prob = p;
      out.push_back(std::move(jo));
    }
  }

  int threshold() const { return threshold_; }

 private:
  int threshold_;
  int participants_;
  bool strict_arity_;
};

std::vector<int> sample_auction(const AuctionOutcome& model,
                                std::span<const int> bids, Rng& rng) {
  std::vector<JointOutcome> joints;
  model.enumerate(bids, joints);
  std::vector<double> probs;
  probs.reserve(joints.size());
  for (const auto& jo : joints) probs.push_back(jo.prob);
  return joints[rng.sample(probs)].outcome;
}

int winner_index(std::span<const int> outcome) {
  for (std::size_t j = 0; j < outcome.size(); ++j)
    if (outcome[j] == 1) return static_cast<int>(j);
  return -1;
}

class PayBidToPeer final : public KarmaTransitionModel {
 public:
  void successors(int k_now, std::span<const int> bids,
                  std::span<const int> outcome, int j,
                  std::vector<std::pair<int, double>>& out) const override {
    out.clear();
    int w = winner_index(outcome);
    if (w == j) {
      out.emplace_back(std::max(k_now - bids[j], 0), 1.0);
    } else if (w >= 0) {
      out.emplace_back(k_now + bids[w], 1.0);
    } else {
      out.emplace_back(k_now, 1.0);
    }
  }
};

class PayBidToSociety final : public KarmaTransitionModel {
 public:
  void successors(int k_now, std::span<const int> bids,
                  std::span<const int> outcome, int j,
                  std::vector<std::pair<int, double>>& out) const override {
    out.clear();
    if (outcome[j] == 1)
      out.emplace_back(std::max(k_now - bids[j], 0), 1.0);
    else
      out.emplace_back(k_now, 1.0);
  }
};

class IidUrgency final : public UrgencyTransitionModel {
 public:
  explicit IidUrgency(std::vector<double> w) : weights_(std::move(w)) {
    double s = 0.0;
    for (double v : weights_) s += v;
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("iid urgency weights must sum to 1");
  }
  double probability(int, int u_next, int, int) const override {
    return weights_[u_next];
  }
  int num_levels() const override { return static_cast<int>(weights_.size()); }
  bool iid() const override { return true; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

}  // namespace

OutcomeRule outcome_highest_bid() {
  auto model = std::make_shared<AuctionOutcome>(0, 2, true);
  OutcomeRule rule;
  rule.model = model;
  rule.sample = [model](std::span<const int> bids, Rng& rng) {
    return sample_auction(*model, bids, rng);
  };
  return rule;
}

OutcomeRule outcome_threshold_auction(int threshold, int participants) {
  if (threshold < 0) throw std::invalid_argument("threshold must be >= 0");
  auto model = std::make_shared<AuctionOutcome>(threshold, participants, false);
  OutcomeRule rule;
  rule.model = model;
  rule.sample = [model](std::span<const int> bids, Rng& rng) {
    return sample_auction(*model, bids, rng);
  };
  return rule;
}

PaymentRule payment_pay_bid_to_peer() {
  PaymentRule rule;
  rule.model = std::make_shared<PayBidToPeer>();
  rule.apply = [](std::span<const int> bids, std::span<const int> outcome,
                  std::span<long long> deltas, long long& overflow_delta) {
    if (bids.size() != 2 || outcome.size() != 2 || deltas.size() != 2)
      throw std::invalid_argument("pay_bid_to_peer: exactly two participants");
    overflow_delta = 0;
    deltas[0] = deltas[1] = 0;
    int w = winner_index(outcome);
    if (w < 0) return;
    deltas[w] = -bids[w];
    deltas[1 - w] = bids[w];
  };
  return rule;
}

PaymentRule payment_pay_bid_to_society() {
  PaymentRule rule;
  rule.model = std::make_shared<PayBidToSociety>();
  rule.apply = [](std::span<const int> bids, std::span<const int> outcome,
                  std::span<long long> deltas, long long& overflow_delta) {
    overflow_delta = 0;
    std::fill(deltas.begin(), deltas.end(), 0LL);
    int w = winner_index(outcome);
    if (w < 0) return;
    deltas[w] = -bids[w];
    overflow_delta = bids[w];
  };
  return rule;
}

UrgencyRule urgency_iid(std::vector<double> weights) {
  auto model = std::make_shared<IidUrgency>(std::move(weights));
  UrgencyRule rule;
  rule.model = model;
  rule.sample = [model](int, int, int, Rng& rng) {
    return rng.sample(model->weights());
  };
  return rule;
}

std::vector<double> geometric_weights(double p, int levels) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("geometric p must be in (0,1)");
  if (levels < 1) throw std::invalid_argument("geometric levels must be >= 1");
  std::vector<double> w(levels);
  double total = 0.0;
  for (int i = 0; i < levels; ++i) {
    w[i] = p * std::pow(1.0 - p, i);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

OverflowFn overflow_uniform() {
  return [](std::span<const long long> balances, long long& overflow,
            std::span<long long> deltas, Rng& rng) {
    std::fill(deltas.begin(), deltas.end(), 0LL);
    if (overflow < 0) throw std::logic_error("negative overflow account");
    if (overflow == 0) return;
    const long long n = static_cast<long long>(balances.size());
    const long long each = overflow / n;
    const int rest = static_cast<int>(overflow % n);
    for (auto& d : deltas) d = each;
    if (rest > 0) {
      auto lucky = rng.choose_distinct(static_cast<int>(n), rest);
      for (int i : lucky) deltas[i] += 1;
    }
    overflow = 0;
  };
}

OverflowFn overflow_none() {
  return [](std::span<const long long>, long long&, std::span<long long> deltas,
            Rng&) { std::fill(deltas.begin(), deltas.end(), 0LL); };
}

RedistributionFn redistribution_none() {
  return [](std::span<const long long>, std::span<long long> deltas, Rng&) {
    std::fill(deltas.begin(), deltas.end(), 0LL);
  };
}

OutcomeRule make_outcome_rule(const std::string& name,
                              const std::map<std::string, double>& params) {
  if (name == "highest_bid") return outcome_highest_bid();
  if (name == "threshold_auction") {
    auto it = params.find("threshold");
    if (it == params.end())
      throw std::invalid_argument("threshold_auction requires 'threshold'");
    int participants = 2;
    if (auto p = params.find("participants"); p != params.end())
      participants = static_cast<int>(p->second);
    return outcome_threshold_auction(static_cast<int>(it->second), participants);
  }
  throw std::invalid_argument("unknown outcome template: " + name);
}

PaymentRule make_payment_rule(const std::string& name) {
  if (name == "pay_bid_to_peer") return payment_pay_bid_to_peer();
  if (name == "pay_to_society" || name == "pay_bid_to_society")
    return payment_pay_bid_to_society();
  throw std::invalid_argument("unknown payment template: " + name);
}

UrgencyRule make_urgency_rule(const std::string& name,
                              const std::map<std::string, double>& params,
                              std::vector<double> explicit_weights) {
  if (name == "iid") {
    if (explicit_weights.empty())
      throw std::invalid_argument("iid urgency requires explicit weights");
    return urgency_iid(std::move(explicit_weights));
  }
  if (name == "iid_geometric") {
    auto p = params.find("p");
    auto lv = params.find("levels");
    if (p == params.end() || lv == params.end())
      throw std::invalid_argument("iid_geometric requires 'p' and 'levels'");
    return urgency_iid(geometric_weights(p->second, static_cast<int>(lv->second)));
  }
  throw std::invalid_argument("unknown urgency template: " + name);
}

OverflowFn make_overflow_rule(const std::string& name) {
  if (name == "uniform") return overflow_uniform();
  if (name == "none") return overflow_none();
  throw std::invalid_argument("unknown overflow template: " + name);
}

RedistributionFn make_redistribution_rule(const std::string& name) {
  if (name == "none") return redistribution_none();
  throw std::invalid_argument("unknown redistribution template: " + name);
}

}  // namespace karma::rules
