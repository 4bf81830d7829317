#pragma once

#include <cstdint>
#include <string>

#include "etc/markov.hpp"
#include "etc/model.hpp"

namespace etc {

struct SimConfig {
    LinearSystem sys;
    DeadBeatController ctrl;
    CostWeights weights;
    TriggerParams trig;
    long horizon = 5000;
    int replications = 400;
    std::uint64_t seed = 1;
    std::string trace_path;  // when nonempty, replication 0 writes a step trace CSV
    long trace_steps = 0;    // 0 traces the full horizon
};

struct Stat {
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct SimResult {
    Stat success_rate;   // delivered packets per step
    Stat attempt_rate;   // channel uses per step (deliveries + drops)
    Stat loss;           // time-averaged quadratic cost
    int replications = 0;
};

// Closed-loop Monte Carlo of the event-triggered packetized dead-beat loop.
// Replications run on a worker pool (ETC_WORKERS overrides the size) and are
// reduced in replication order, so results are reproducible for a given seed.
SimResult simulate(const SimConfig& cfg);

// Same loop with single-command packets (no buffered rollout): the
// non-packetized baseline.
SimResult simulate_nonpacketized(const SimConfig& cfg);

} // namespace etc
