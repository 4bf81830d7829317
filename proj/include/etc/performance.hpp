#pragma once

#include <vector>

#include "etc/gaussian.hpp"
#include "etc/markov.hpp"
#include "etc/model.hpp"

namespace etc {

// Expected per-step linear-quadratic loss with its per-chain-state split.
struct LossBreakdown {
    double J_inf = 0.0;
    std::vector<double> terms;      // contribution of chain states 0..T; sums to J_inf
    double stability_margin = 1.0;  // 1 - p_loss * lambda_max(A)^2
};

LossBreakdown loss_scalar_lossless(double a, double sigma_w2, const CostWeights& weights, double K,
                                   const TriggerParams& trig, const QmcOptions& opt = {});

LossBreakdown loss_scalar_lossy(double a, double sigma_w2, const CostWeights& weights, double K,
                                const TriggerParams& trig, const QmcOptions& opt = {});

LossBreakdown loss_vector_lossless(const LinearSystem& sys, const DeadBeatController& ctrl,
                                   const CostWeights& weights, const TriggerParams& trig,
                                   const QmcOptions& opt = {});

LossBreakdown loss_vector_lossy(const LinearSystem& sys, const DeadBeatController& ctrl,
                                const CostWeights& weights, const TriggerParams& trig,
                                const QmcOptions& opt = {});

} // namespace etc
