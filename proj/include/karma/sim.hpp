#pragma once

#include <cstdint>
#include <vector>

#include "karma/model.hpp"

namespace karma::sim {

enum class PopulationInit { kFromEquilibriumDistribution, kEqualEndowment };
enum class ParticipantSource { kUniformRandom, kExternalList };

// Per-agent mutable state plus the overflow account.
struct Population {
  std::vector<int> type;
  std::vector<int> urgency;
  std::vector<long long> karma;
  std::vector<double> cumulative_cost;
  std::vector<long long> encounters;
  long long overflow = 0;
  long long epoch = 0;
  std::uint64_t rng_seed = 0;

  int size() const { return static_cast<int>(karma.size()); }
  long long total_karma() const {
    long long s = overflow;
    for (long long k : karma) s += k;
    return s;
  }
};

struct InteractionRecord {
  std::vector<int> participants;
  std::vector<int> bids;
  std::vector<int> outcome;
  std::vector<long long> deltas;
  long long overflow_delta = 0;
};

struct EpochReport {
  long long epoch = 0;
  std::vector<InteractionRecord> interactions;
};

struct SimConfig {
  long long epochs = 1;
  int interactions_per_epoch = 1;
  ParticipantSource participant_source = ParticipantSource::kUniformRandom;
  std::vector<std::vector<int>> external_participants;  // one tuple per interaction
  int snapshot_every = 100;
  int final_window = 1000;  // epochs averaged into the terminal histogram
  bool keep_interaction_log = false;
};

struct EpochSummary {
  long long epoch;
  long long total_karma;
  long long overflow;
  double mean_karma;
  double mean_cumulative_cost;
};

struct SimTrace {
  std::vector<EpochSummary> summaries;          // every snapshot_every + first/last
  std::vector<double> final_histogram;          // end-state karma histogram
  std::vector<double> window_histogram;         // averaged over the final window
  std::vector<std::vector<long long>> transitions;  // counts [k_before][k_after]
  std::vector<EpochReport> epoch_reports;       // only when keep_interaction_log
  long long interactions_executed = 0;
  long long initial_total_karma = 0;
  long long final_total_karma = 0;
};

Population init_population(const GameSpec& spec, const SocialState& state,
                           PopulationInit mode, int n, std::uint64_t seed);

// One interaction: bids sampled from the policy, outcome and payments applied,
// costs and encounter counters updated. Urgency transitions happen at epoch
// close, not here.
InteractionRecord execute_interaction(const GameSpec& spec,
                                      const SocialState& state,
                                      Population& pop,
                                      const std::vector<int>& participants,
                                      Rng& rng);

SimTrace run(const GameSpec& spec, const SocialState& state, Population& pop,
             const SimConfig& config, std::uint64_t seed);

}  // namespace karma::sim
