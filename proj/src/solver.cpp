#include "karma/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace karma::solver {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Dims {
  int T, U, K, A;  // K, A are top indices (inclusive)
};

Dims dims_of(const GameSpec& spec, const SocialState& state) {
  return {spec.num_types(), spec.num_urgency(), state.karma_top(), state.action_top()};
}

// peers are |J|-1 i.i.d. draws from nu; enumerate peer bid profiles
template <class Fn>
void for_each_peer_profile(const Array1& nu, int peers, Fn&& fn) {
  const int A1 = static_cast<int>(nu.dim(0));
  std::vector<int> profile(peers, 0);
  std::function<void(int, double)> rec = [&](int pos, double prob) {
    if (prob == 0.0) return;
    if (pos == peers) {
      fn(profile, prob);
      return;
    }
    for (int b = 0; b < A1; ++b) {
      profile[pos] = b;
      rec(pos + 1, prob * nu(b));
    }
  };
  rec(0, 1.0);
}

}  // namespace

void compute_nu(const GameSpec& spec, const SocialState& state, SolverWorkspace& ws) {
  auto [T, U, K, A] = dims_of(spec, state);
  ws.nu = Array1(A + 1);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k) {
        double dv = state.distribution(t, u, k);
        if (dv == 0.0) continue;
        for (int a = 0; a <= A; ++a) ws.nu(a) += dv * state.policy(t, u, k, a);
      }
}

void compute_gamma(const GameSpec& spec, SolverWorkspace& ws) {
  const int A = static_cast<int>(ws.nu.dim(0)) - 1;
  const int O = spec.num_outcomes;
  const int peers = spec.participants_per_interaction - 1;
  ws.gamma = Array2(O, A + 1);
  std::vector<int> bids(peers + 1, 0);
  std::vector<JointOutcome> joints;
  for (int a = 0; a <= A; ++a) {
    bids[0] = a;
    for_each_peer_profile(ws.nu, peers, [&](const std::vector<int>& prof, double p) {
      for (int i = 0; i < peers; ++i) bids[i + 1] = prof[i];
      joints.clear();
      spec.outcome_model->enumerate(bids, joints);
      for (const auto& jo : joints) ws.gamma(jo.outcome[0], a) += p * jo.prob;
    });
  }
}

void compute_kappa(const GameSpec& spec, int karma_top, SolverWorkspace& ws) {
  const int A = static_cast<int>(ws.nu.dim(0)) - 1;
  const int K = karma_top;
  const int peers = spec.participants_per_interaction - 1;
  ws.kappa = Array3(K + 1, K + 1, A + 1);
  std::vector<int> bids(peers + 1, 0);
  std::vector<JointOutcome> joints;
  std::vector<std::pair<int, double>> succ;
  for (int a = 0; a <= A; ++a) {
    bids[0] = a;
    for_each_peer_profile(ws.nu, peers, [&](const std::vector<int>& prof, double p) {
      for (int i = 0; i < peers; ++i) bids[i + 1] = prof[i];
      joints.clear();
      spec.outcome_model->enumerate(bids, joints);
      for (const auto& jo : joints) {
        for (int k = 0; k <= K; ++k) {
          succ.clear();
          spec.karma_model->successors(k, bids, jo.outcome, 0, succ);
          for (auto& [kn, pk] : succ) {
            int kc = std::clamp(kn, 0, K);  // mass above the axis parks at the top
            ws.kappa(kc, k, a) += p * jo.prob * pk;
          }
        }
      }
    });
  }
}

void compute_xi(const GameSpec& spec, SolverWorkspace& ws) {
  const int A = static_cast<int>(ws.gamma.dim(1)) - 1;
  const int U = spec.num_urgency();
  const int O = spec.num_outcomes;
  ws.xi = Array2(U, A + 1);
  for (int u = 0; u < U; ++u)
    for (int a = 0; a <= A; ++a) {
      double s = 0.0;
      for (int o = 0; o < O; ++o) s += spec.cost(u, o) * ws.gamma(o, a);
      ws.xi(u, a) = -s;
    }
}

void compute_urgency_mix(const GameSpec& spec, SolverWorkspace& ws) {
  const int A = static_cast<int>(ws.gamma.dim(1)) - 1;
  const int T = spec.num_types();
  const int U = spec.num_urgency();
  const int O = spec.num_outcomes;
  ws.urgency_mix = Array4(T, U, U, A + 1);
  for (int t = 0; t < T; ++t)
    for (int un = 0; un < U; ++un)
      for (int u = 0; u < U; ++u)
        for (int a = 0; a <= A; ++a) {
          double s = 0.0;
          for (int o = 0; o < O; ++o)
            s += spec.urgency_model->probability(t, un, u, o) * ws.gamma(o, a);
          ws.urgency_mix(t, un, u, a) = s;
        }
}

void compute_rho(const GameSpec& spec, SolverWorkspace& ws) {
  const int T = spec.num_types();
  const int U = spec.num_urgency();
  const int K = static_cast<int>(ws.kappa.dim(0)) - 1;
  const int A = static_cast<int>(ws.kappa.dim(2)) - 1;
  ws.rho = Array6(T, U, K + 1, U, K + 1, A + 1);
  for (int t = 0; t < T; ++t)
    for (int un = 0; un < U; ++un)
      for (int u = 0; u < U; ++u)
        for (int a = 0; a <= A; ++a) {
          double mix = ws.urgency_mix(t, un, u, a);
          if (mix == 0.0) continue;
          for (int kn = 0; kn <= K; ++kn)
            for (int k = 0; k <= K; ++k)
              ws.rho(t, un, kn, u, k, a) = mix * ws.kappa(kn, k, a);
        }
}

void compute_R(const SocialState& state, SolverWorkspace& ws) {
  const int T = static_cast<int>(state.policy.dim(0));
  const int U = static_cast<int>(state.policy.dim(1));
  const int K = state.karma_top();
  const int A = state.action_top();
  ws.R = Array3(T, U, K + 1);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k) {
        double s = 0.0;
        for (int a = 0; a <= A; ++a) s += state.policy(t, u, k, a) * ws.xi(u, a);
        ws.R(t, u, k) = s;
      }
}

void compute_P(const SocialState& state, SolverWorkspace& ws) {
  const int T = static_cast<int>(state.policy.dim(0));
  const int U = static_cast<int>(state.policy.dim(1));
  const int K = state.karma_top();
  const int A = state.action_top();
  ws.P = Array5(T, U, K + 1, U, K + 1);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k)
        for (int a = 0; a <= A; ++a) {
          double pa = state.policy(t, u, k, a);
          if (pa == 0.0) continue;
          for (int un = 0; un < U; ++un) {
            double mix = pa * ws.urgency_mix(t, un, u, a);
            if (mix == 0.0) continue;
            for (int kn = 0; kn <= K; ++kn)
              ws.P(t, un, kn, u, k) += mix * ws.kappa(kn, k, a);
          }
        }
}

// Fixed point of V <- R + T * P V from V = 0, using the materialized kernel
// (compute_P must have run). solve() uses an equivalent factored sweep.
void compute_V(const GameSpec& spec, const SolverConfig& config, SolverWorkspace& ws) {
  const int T = static_cast<int>(ws.R.dim(0));
  const int U = static_cast<int>(ws.R.dim(1));
  const int K = static_cast<int>(ws.R.dim(2)) - 1;
  ws.V = Array3(T, U, K + 1);
  Array3 vnext(T, U, K + 1);
  double res = kInf;
  int it = 0;
  for (; it < config.v_max_iterations; ++it) {
    res = 0.0;
    for (int t = 0; t < T; ++t)
      for (int u = 0; u < U; ++u)
        for (int k = 0; k <= K; ++k) {
          double cont = 0.0;
          for (int un = 0; un < U; ++un)
            for (int kn = 0; kn <= K; ++kn)
              cont += ws.P(t, un, kn, u, k) * ws.V(t, un, kn);
          double v = ws.R(t, u, k) + spec.discount[t] * cont;
          vnext(t, u, k) = v;
          res = std::max(res, std::abs(v - ws.V(t, u, k)));
        }
    std::swap(ws.V, vnext);
    if (res < config.v_tol) break;
  }
  ws.v_iterations = it + 1;
  ws.v_residual = res;
  if (res >= config.v_tol)
    throw SolverDivergence("value iteration did not converge", res);
}

namespace {

// value iteration given the current policy; returns (iterations, residual)
std::pair<int, double> value_iteration(const GameSpec& spec,
                                       const SolverConfig& config,
                                       const SocialState& state,
                                       SolverWorkspace& ws) {
  const int T = spec.num_types();
  const int U = spec.num_urgency();
  const int K = state.karma_top();
  const int A = state.action_top();
  ws.V = Array3(T, U, K + 1);

  const bool iid = spec.urgency_model->iid();

  // KPI[t][u][k][kn] = sum_a pi[t,u,k,a] kappa[kn,k,a]   (policy-averaged)
  Array4 kpi(T, U, K + 1, K + 1);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k)
        for (int a = 0; a <= A; ++a) {
          double pa = state.policy(t, u, k, a);
          if (pa == 0.0) continue;
          for (int kn = 0; kn <= K; ++kn)
            kpi(t, u, k, kn) += pa * ws.kappa(kn, k, a);
        }

  // policy-averaged urgency mix: um[t][un][u] (iid case: independent of a)
  Array3 um(T, U, U);
  Array4 um_a;  // general case needs the action kept: handled below
  bool general = !iid;
  if (general) {
    // general Psi: W needs sum_a pi * mix[t,un,u,a] * sum_kn kappa V; keep
    // mix per action and fold kappa*V per action each sweep
    um_a = ws.urgency_mix;
  } else {
    for (int t = 0; t < T; ++t)
      for (int un = 0; un < U; ++un)
        for (int u = 0; u < U; ++u) um(t, un, u) = ws.urgency_mix(t, un, u, 0);
  }

  Array3 vnext(T, U, K + 1);
  double res = kInf;
  int it = 0;
  for (; it < config.v_max_iterations; ++it) {
    res = 0.0;
    if (!general) {
      for (int t = 0; t < T; ++t) {
        // EV[un][kn] -> expected over next urgency: ev[kn]
        std::vector<double> ev(K + 1, 0.0);
        for (int kn = 0; kn <= K; ++kn) {
          double s = 0.0;
          for (int un = 0; un < U; ++un) s += um(t, un, 0) * ws.V(t, un, kn);
          ev[kn] = s;
        }
        for (int u = 0; u < U; ++u)
          for (int k = 0; k <= K; ++k) {
            double cont = 0.0;
            for (int kn = 0; kn <= K; ++kn) cont += kpi(t, u, k, kn) * ev[kn];
            double v = ws.R(t, u, k) + spec.discount[t] * cont;
            vnext(t, u, k) = v;
            res = std::max(res, std::abs(v - ws.V(t, u, k)));
          }
      }
    } else {
      for (int t = 0; t < T; ++t) {
        // KV[un][k][a] = sum_kn kappa[kn,k,a] V[t,un,kn]
        const int A1 = A + 1;
        std::vector<double> kv(static_cast<std::size_t>(U) * (K + 1) * A1, 0.0);
        for (int un = 0; un < U; ++un)
          for (int k = 0; k <= K; ++k)
            for (int a = 0; a < A1; ++a) {
              double s = 0.0;
              for (int kn = 0; kn <= K; ++kn)
                s += ws.kappa(kn, k, a) * ws.V(t, un, kn);
              kv[(static_cast<std::size_t>(un) * (K + 1) + k) * A1 + a] = s;
            }
        for (int u = 0; u < U; ++u)
          for (int k = 0; k <= K; ++k) {
            double cont = 0.0;
            for (int a = 0; a < A1; ++a) {
              double pa = state.policy(t, u, k, a);
              if (pa == 0.0) continue;
              double mixsum = 0.0;
              for (int un = 0; un < U; ++un)
                mixsum += um_a(t, un, u, a) *
                          kv[(static_cast<std::size_t>(un) * (K + 1) + k) * A1 + a];
              cont += pa * mixsum;
            }
            double v = ws.R(t, u, k) + spec.discount[t] * cont;
            vnext(t, u, k) = v;
            res = std::max(res, std::abs(v - ws.V(t, u, k)));
          }
      }
    }
    std::swap(ws.V, vnext);
    if (res < config.v_tol) break;
  }
  if (res >= config.v_tol && it >= config.v_max_iterations)
    throw SolverDivergence("value iteration did not converge", res);
  return {it + 1, res};
}

}  // namespace

void compute_Q(const GameSpec& spec, SolverWorkspace& ws) {
  const int T = static_cast<int>(ws.V.dim(0));
  const int U = static_cast<int>(ws.V.dim(1));
  const int K = static_cast<int>(ws.V.dim(2)) - 1;
  const int A = static_cast<int>(ws.kappa.dim(2)) - 1;
  ws.Q = Array4(T, U, K + 1, A + 1);
  for (int t = 0; t < T; ++t) {
    // KV[un][k][a] = sum_kn kappa[kn,k,a] V[t,un,kn]
    Array3 kv(U, K + 1, A + 1);
    for (int un = 0; un < U; ++un)
      for (int k = 0; k <= K; ++k)
        for (int a = 0; a <= A; ++a) {
          double s = 0.0;
          for (int kn = 0; kn <= K; ++kn) s += ws.kappa(kn, k, a) * ws.V(t, un, kn);
          kv(un, k, a) = s;
        }
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k)
        for (int a = 0; a <= A; ++a) {
          if (a > k) {
            ws.Q(t, u, k, a) = -kInf;
            continue;
          }
          double cont = 0.0;
          for (int un = 0; un < U; ++un)
            cont += ws.urgency_mix(t, un, u, a) * kv(un, k, a);
          ws.Q(t, u, k, a) = ws.xi(u, a) + spec.discount[t] * cont;
        }
  }
}

void perturbed_best_response(const SolverConfig& config, SolverWorkspace& ws) {
  const int T = static_cast<int>(ws.Q.dim(0));
  const int U = static_cast<int>(ws.Q.dim(1));
  const int K = static_cast<int>(ws.Q.dim(2)) - 1;
  const int A = static_cast<int>(ws.Q.dim(3)) - 1;
  ws.perturbed = Array4(T, U, K + 1, A + 1);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k) {
        double best = -kInf;
        for (int a = 0; a <= A; ++a) best = std::max(best, ws.Q(t, u, k, a));
        double z = 0.0;
        for (int a = 0; a <= A; ++a) {
          double q = ws.Q(t, u, k, a);
          if (q == -kInf) continue;
          z += std::exp(config.lambda * (q - best));
        }
        for (int a = 0; a <= A; ++a) {
          double q = ws.Q(t, u, k, a);
          ws.perturbed(t, u, k, a) =
              (q == -kInf) ? 0.0 : std::exp(config.lambda * (q - best)) / z;
        }
      }
}

void update_social_state(SocialState& state, const SolverConfig& config,
                         const SolverWorkspace& ws, double omega_now) {
  const int T = static_cast<int>(state.policy.dim(0));
  const int U = static_cast<int>(state.policy.dim(1));
  const int K = state.karma_top();
  const int A = state.action_top();
  const double po = config.eta * omega_now;

  // d step: dn[t,un,kn] = (1-w) d + w sum_{u,k,a} d pi mix kappa
  Array3 dn(T, U, K + 1);
  for (int t = 0; t < T; ++t) {
    // B[u][a][kn] = sum_k d[t,u,k] pi[t,u,k,a] kappa[kn,k,a]
    Array3 b(U, A + 1, K + 1);
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k) {
        double dv = state.distribution(t, u, k);
        if (dv == 0.0) continue;
        for (int a = 0; a <= A; ++a) {
          double w = dv * state.policy(t, u, k, a);
          if (w == 0.0) continue;
          for (int kn = 0; kn <= K; ++kn) b(u, a, kn) += w * ws.kappa(kn, k, a);
        }
      }
    for (int un = 0; un < U; ++un)
      for (int u = 0; u < U; ++u)
        for (int a = 0; a <= A; ++a) {
          double mix = ws.urgency_mix(t, un, u, a);
          if (mix == 0.0) continue;
          for (int kn = 0; kn <= K; ++kn) dn(t, un, kn) += mix * b(u, a, kn);
        }
  }
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k)
        state.distribution(t, u, k) =
            (1.0 - omega_now) * state.distribution(t, u, k) + omega_now * dn(t, u, k);

  for (std::size_t i = 0; i < state.policy.size(); ++i)
    state.policy.raw()[i] =
        (1.0 - po) * state.policy.raw()[i] + po * ws.perturbed.raw()[i];
}

void validate_and_normalize(const GameSpec& spec, SocialState& state) {
  const int T = static_cast<int>(state.policy.dim(0));
  const int U = static_cast<int>(state.policy.dim(1));
  const int K = state.karma_top();
  const int A = state.action_top();

  auto& d = state.distribution.raw();
  for (auto& v : d) v = std::max(v, 0.0);
  double mass = state.distribution.sum();
  if (mass <= 0.0) throw std::runtime_error("social state has zero mass");
  for (auto& v : d) v /= mass;

  // mean-preserving tilt toward the target mean (closed-form beta), then clip
  const double target = spec.initial_avg_karma;
  for (int pass = 0; pass < 100; ++pass) {
    double mean = 0.0;
    for (int t = 0; t < T; ++t)
      for (int u = 0; u < U; ++u)
        for (int k = 0; k <= K; ++k) mean += k * state.distribution(t, u, k);
    if (std::abs(mean - target) < 1e-12) break;
    double var = 0.0;
    for (int t = 0; t < T; ++t)
      for (int u = 0; u < U; ++u)
        for (int k = 0; k <= K; ++k)
          var += (k - mean) * (k - mean) * state.distribution(t, u, k);
    if (var <= 0.0) break;
    double beta = (target - mean) / var;
    double total = 0.0;
    for (int t = 0; t < T; ++t)
      for (int u = 0; u < U; ++u)
        for (int k = 0; k <= K; ++k) {
          double v = state.distribution(t, u, k) * (1.0 + beta * (k - mean));
          v = std::max(v, 0.0);
          state.distribution(t, u, k) = v;
          total += v;
        }
    for (auto& v : d) v /= total;
  }

  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k) {
        int amax = std::min(k, A);
        double row = 0.0;
        for (int a = 0; a <= A; ++a) {
          double v = a <= amax ? std::max(state.policy(t, u, k, a), 0.0) : 0.0;
          state.policy(t, u, k, a) = v;
          row += v;
        }
        if (row > 0.0) {
          for (int a = 0; a <= amax; ++a) state.policy(t, u, k, a) /= row;
        } else {
          for (int a = 0; a <= amax; ++a) state.policy(t, u, k, a) = 1.0 / (amax + 1);
        }
      }
}

bool adjust_state_space(const GameSpec& spec, SocialState& state,
                        const SolverConfig& config) {
  const int T = static_cast<int>(state.policy.dim(0));
  const int U = static_cast<int>(state.policy.dim(1));
  int K = state.karma_top();
  int A = state.action_top();
  bool changed = false;

  double boundary_pi = 0.0;
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k) boundary_pi += state.policy(t, u, k, A);
  bool grow_action = boundary_pi > config.expand_action_tol && A < config.action_cap;

  double boundary_d = 0.0;
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = std::max(0, K - 3); k <= K; ++k)
        boundary_d += state.distribution(t, u, k);
  bool grow_karma = boundary_d > config.expand_state_tol && K < config.karma_cap;

  if (boundary_pi > config.expand_action_tol && A >= config.action_cap)
    throw std::runtime_error("action axis exceeded the configured hard cap");
  if (boundary_d > config.expand_state_tol && K >= config.karma_cap)
    throw std::runtime_error("karma axis exceeded the configured hard cap");
  if (!grow_action && !grow_karma) return false;

  int newA = grow_action ? A + 1 : A;
  int newK = grow_karma ? K + 4 : K;
  Array4 pi(T, U, newK + 1, newA + 1);
  Array3 d(T, U, newK + 1);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u) {
      for (int k = 0; k <= K; ++k) {
        d(t, u, k) = state.distribution(t, u, k);
        for (int a = 0; a <= A; ++a) pi(t, u, k, a) = state.policy(t, u, k, a);
      }
      // new karma rows are zero; validate_and_normalize turns them into
      // uniform feasible rows
    }
  state.policy = std::move(pi);
  state.distribution = std::move(d);
  changed = true;
  validate_and_normalize(spec, state);
  return changed;
}

SocialState default_initial_state(const GameSpec& spec, const SolverConfig& config) {
  int A0 = config.initial_action_span > 0 ? config.initial_action_span
                                          : std::max(1, spec.initial_avg_karma);
  int K0 = config.initial_state_span > 0 ? config.initial_state_span
                                         : std::max(4, 4 * spec.initial_avg_karma);
  SocialState state;
  state.distribution = build_initial_distribution(
      spec.type_shares, spec.urgency_weights, spec.initial_avg_karma,
      DistributionInit::kAllAtAverage, K0);
  state.policy = build_initial_policy(config.policy_init, spec.num_types(),
                                      spec.num_urgency(), K0, A0);
  return state;
}

namespace {

double certificate_gap(const SocialState& state, const SolverWorkspace& ws,
                       double cert_tol) {
  const int T = static_cast<int>(state.policy.dim(0));
  const int U = static_cast<int>(state.policy.dim(1));
  const int K = state.karma_top();
  const int A = state.action_top();
  double worst = 1.0;
  for (int t = 0; t < T; ++t)
    for (int u = 0; u < U; ++u)
      for (int k = 0; k <= K; ++k) {
        if (state.distribution(t, u, k) <= 1e-6) continue;
        double best = -kInf;
        for (int a = 0; a <= A; ++a) best = std::max(best, ws.Q(t, u, k, a));
        double mass = 0.0;
        for (int a = 0; a <= A; ++a)
          if (ws.Q(t, u, k, a) >= best - cert_tol) mass += state.policy(t, u, k, a);
        worst = std::min(worst, mass);
      }
  return worst;
}

}  // namespace

SolveResult solve(const GameSpec& spec, const SolverConfig& config,
                  std::optional<SocialState> initial) {
  spec.validate();
  SolveResult out;
  SocialState& state = out.state;
  state = initial ? std::move(*initial) : default_initial_state(spec, config);
  SolverWorkspace& ws = out.workspace;
  ConvergenceReport& rep = out.report;

  const int T = spec.num_types();
  const int U = spec.num_urgency();
  double omega_now = config.omega;
  double best_recent = kInf;
  int since_best = 0;

  for (int it = 0; it < config.max_iterations; ++it) {
    adjust_state_space(spec, state, config);
    validate_and_normalize(spec, state);
    const int K = state.karma_top();
    const int A = state.action_top();

    compute_nu(spec, state, ws);
    compute_gamma(spec, ws);
    compute_kappa(spec, K, ws);
    compute_xi(spec, ws);
    compute_urgency_mix(spec, ws);
    compute_R(state, ws);
    auto [vit, vres] = value_iteration(spec, config, state, ws);
    ws.v_iterations = vit;
    ws.v_residual = vres;
    compute_Q(spec, ws);
    perturbed_best_response(config, ws);

    if (config.omega_decay_after >= 0 && it >= config.omega_decay_after)
      omega_now = std::max(omega_now * config.omega_decay, config.omega_floor);

    Array4 prev_pi = state.policy;
    Array3 prev_d = state.distribution;
    update_social_state(state, config, ws, omega_now);

    double delta = 0.0;
    for (std::size_t i = 0; i < state.policy.size(); ++i)
      delta = std::max(delta, std::abs(state.policy.raw()[i] - prev_pi.raw()[i]));
    for (std::size_t i = 0; i < state.distribution.size(); ++i)
      delta = std::max(delta,
                       std::abs(state.distribution.raw()[i] - prev_d.raw()[i]));

    double mean = 0.0;
    for (int t = 0; t < T; ++t)
      for (int u = 0; u < U; ++u)
        for (int k = 0; k <= K; ++k) mean += k * state.distribution(t, u, k);
    rep.history.push_back({it, delta, K, A, mean});
    rep.iterations = it + 1;
    rep.final_residual = delta;

    // divergence guard: residual growing 10x over a 50-iteration window
    if (delta < best_recent) {
      best_recent = delta;
      since_best = 0;
    } else if (++since_best >= 50 && delta > 10.0 * best_recent) {
      throw SolverDivergence("social-state residual diverging", delta);
    }

    if (delta < config.convergence_tol) {
      rep.converged = true;
      break;
    }
  }

  validate_and_normalize(spec, state);
  // final full workspace on the converged state
  compute_nu(spec, state, ws);
  compute_gamma(spec, ws);
  compute_kappa(spec, state.karma_top(), ws);
  compute_xi(spec, ws);
  compute_urgency_mix(spec, ws);
  compute_rho(spec, ws);
  compute_R(state, ws);
  compute_P(state, ws);
  auto [vit, vres] = value_iteration(spec, config, state, ws);
  ws.v_iterations = vit;
  ws.v_residual = vres;
  compute_Q(spec, ws);
  perturbed_best_response(config, ws);

  rep.karma_top = state.karma_top();
  rep.action_top = state.action_top();
  rep.v_residual = ws.v_residual;
  rep.equilibrium_gap = certificate_gap(state, ws, config.cert_tol());
  return out;
}

}  // namespace karma::solver
