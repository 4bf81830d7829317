#pragma once

#include <vector>

#include "etc/gaussian.hpp"
#include "etc/model.hpp"

namespace etc {

struct TriggerParams {
    double epsilon = 0.0;  // event threshold, state units
    int timeout_T = 1;     // samples since last success before a forced attempt
    double p_loss = 0.0;   // erasure probability, [0, 1)

    TriggerParams(double epsilon, int timeout_T, double p_loss = 0.0);
};

enum class ChainKind { Scalar, Vector };

// Threshold-crossing probabilities p_0 ... p_{T-1} of the triggered chain
// (p_T = 1 is implicit: leaving state T forces a transmission attempt).
struct TriggeredChain {
    std::vector<double> crossing_probs;
    int nu = 1;
    ChainKind kind = ChainKind::Scalar;
    bool lossy = false;
};

// p_{i0} = 1 - F(eps 1_{i+1}; 0, Xi_{i+1}) / F(eps 1_i; 0, Xi_i), F_0 = 1.
std::vector<double> crossing_probs_scalar(double a, double sigma_w2, const TriggerParams& trig,
                                          const QmcOptions& opt = {});

// Vector analogue with Xi from delta_covariance.
std::vector<double> crossing_probs_vector(const LinearSystem& sys, const DeadBeatController& ctrl,
                                          const TriggerParams& trig, const QmcOptions& opt = {});

struct LossyRates {
    double success_rate = 0.0;
    double attempt_rate = 0.0;
};

// Expected communication rate pi_0 of the lossless scalar chain.
double rate_scalar_lossless(const std::vector<double>& probs, int T);

// Successful-reception and attempted-transmission rates over the erasure channel.
LossyRates rate_scalar_lossy(const std::vector<double>& probs, int T, double p_loss);

// pi_00 of the (r, eta) chain with packet length nu.
double rate_vector_lossless(const std::vector<double>& probs, int T, int nu);

LossyRates rate_vector_lossy(const std::vector<double>& probs, int T, int nu, double p_loss);

// Stationary distribution over states 0..T of the lossless scalar chain.
std::vector<double> stationary_distribution_scalar(const std::vector<double>& probs, int T);

// Explicit (T+1)x(T+1) transition matrix of the lossless scalar chain.
Matrix transition_matrix_scalar(const std::vector<double>& probs, int T);

} // namespace etc
