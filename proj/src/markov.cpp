#include "etc/markov.hpp"

#include <algorithm>
#include <cmath>

namespace etc {

TriggerParams::TriggerParams(double epsilon_, int timeout_T_, double p_loss_)
    : epsilon(epsilon_), timeout_T(timeout_T_), p_loss(p_loss_) {
    if (epsilon < 0.0)
        throw Error("epsilon must be nonnegative");
    if (timeout_T < 1)
        throw Error("timeout_T must be >= 1");
    if (p_loss < 0.0 || p_loss >= 1.0)
        throw Error("p_loss must lie in [0, 1)");
}

namespace {

// Shared ratio form: p_i = 1 - F_{i+1}/F_i on a nested family of centered
// boxes, F_0 = 1 (sure event).
std::vector<double> crossing_from_big_cov(const Matrix& big, int block, double eps, int T,
                                          const QmcOptions& opt) {
    std::vector<double> p(T);
    if (eps == 0.0) {
        std::fill(p.begin(), p.end(), 1.0);
        return p;
    }
    std::vector<double> F(T + 1);
    F[0] = 1.0;
    for (int i = 1; i <= T; ++i) {
        GaussianVector g(big.topLeftCorner(i * block, i * block));
        F[i] = mvn_rectangle_prob(g, Rectangle::centered(eps, i * block), opt).value;
    }
    for (int i = 0; i < T; ++i)
        p[i] = std::clamp(1.0 - F[i + 1] / F[i], 0.0, 1.0);
    return p;
}

// Pi[i] = prod_{j<i}(1 - p_j), i = 0..T.
std::vector<double> survival_products(const std::vector<double>& probs, int T) {
    std::vector<double> Pi(T + 1, 1.0);
    for (int i = 1; i <= T; ++i)
        Pi[i] = Pi[i - 1] * (1.0 - probs[i - 1]);
    return Pi;
}

void check_probs(const std::vector<double>& probs, int T) {
    if (static_cast<int>(probs.size()) != T)
        throw DimensionMismatch("crossing probability vector must have length T");
    for (double p : probs)
        if (p < 0.0 || p > 1.0)
            throw Error("crossing probabilities must lie in [0, 1]");
}

} // namespace

std::vector<double> crossing_probs_scalar(double a, double sigma_w2, const TriggerParams& trig,
                                          const QmcOptions& opt) {
    if (sigma_w2 <= 0.0)
        throw Error("sigma_w2 must be positive");
    const Matrix big = xi_covariance(a, sigma_w2, trig.timeout_T - 1);
    return crossing_from_big_cov(big, 1, trig.epsilon, trig.timeout_T, opt);
}

std::vector<double> crossing_probs_vector(const LinearSystem& sys, const DeadBeatController& ctrl,
                                          const TriggerParams& trig, const QmcOptions& opt) {
    const Matrix big = delta_covariance(sys, ctrl.nu, trig.timeout_T - 1);
    return crossing_from_big_cov(big, sys.n(), trig.epsilon, trig.timeout_T, opt);
}

double rate_scalar_lossless(const std::vector<double>& probs, int T) {
    check_probs(probs, T);
    const auto Pi = survival_products(probs, T);
    double denom = 0.0;
    for (int i = 0; i <= T; ++i)
        denom += Pi[i];
    return 1.0 / denom;
}

LossyRates rate_scalar_lossy(const std::vector<double>& probs, int T, double p_loss) {
    check_probs(probs, T);
    if (p_loss < 0.0 || p_loss >= 1.0)
        throw Error("p_loss must lie in [0, 1)");
    const auto Pi = survival_products(probs, T);
    double denom = 0.0;
    for (int i = 0; i <= T; ++i) {
        const double pi0 = (i < T) ? probs[i] : 1.0;
        const double theta = (1.0 - p_loss * (1.0 - pi0)) / (1.0 - p_loss);
        denom += theta * Pi[i];
    }
    return LossyRates{1.0 / denom, rate_scalar_lossless(probs, T)};
}

double rate_vector_lossless(const std::vector<double>& probs, int T, int nu) {
    check_probs(probs, T);
    if (nu < 1)
        throw Error("nu must be >= 1");
    const auto Pi = survival_products(probs, T);
    double denom = 0.0;
    for (int i = 0; i <= T; ++i) {
        const double pi = (i < T) ? probs[i] : 1.0;
        denom += (1.0 + (nu - 1) * pi) * Pi[i];
    }
    return 1.0 / denom;
}

LossyRates rate_vector_lossy(const std::vector<double>& probs, int T, int nu, double p_loss) {
    check_probs(probs, T);
    if (nu < 1)
        throw Error("nu must be >= 1");
    if (p_loss < 0.0 || p_loss >= 1.0)
        throw Error("p_loss must lie in [0, 1)");
    const auto Pi = survival_products(probs, T);
    double denom_s = 0.0, denom_a = 0.0;
    for (int i = 0; i <= T; ++i) {
        const double pi = (i < T) ? probs[i] : 1.0;
        denom_s += (1.0 + (nu - 1) * pi + p_loss * pi / (1.0 - p_loss)) * Pi[i];
        denom_a += (1.0 + (nu - 1) * pi) * Pi[i];
    }
    return LossyRates{1.0 / denom_s, 1.0 / denom_a};
}

std::vector<double> stationary_distribution_scalar(const std::vector<double>& probs, int T) {
    check_probs(probs, T);
    auto pi = survival_products(probs, T);
    double sum = 0.0;
    for (double v : pi)
        sum += v;
    for (double& v : pi)
        v /= sum;
    return pi;
}

Matrix transition_matrix_scalar(const std::vector<double>& probs, int T) {
    check_probs(probs, T);
    Matrix P = Matrix::Zero(T + 1, T + 1);
    for (int i = 0; i < T; ++i) {
        P(i, 0) = probs[i];
        P(i, i + 1) = 1.0 - probs[i];
    }
    P(T, 0) = 1.0;
    return P;
}

} // namespace etc
