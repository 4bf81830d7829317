#include "etc/performance.hpp"

#include <cmath>
#include <numeric>

namespace etc {

namespace {

// Pi[i] = prod_{j<i}(1 - p_j), i = 0..T.
std::vector<double> survival_products(const std::vector<double>& probs, int T) {
    std::vector<double> Pi(T + 1, 1.0);
    for (int i = 1; i <= T; ++i)
        Pi[i] = Pi[i - 1] * (1.0 - probs[i - 1]);
    return Pi;
}

std::vector<int> trailing_indices(int total, int block) {
    std::vector<int> idx(block);
    std::iota(idx.begin(), idx.end(), total - block);
    return idx;
}

// Conditional second moments of the last block of the nested family:
//   Sig[i]  = E[d_i d_i' | all of d_0..d_i inside the box]       (needed if Pi[i+1] > 0)
//   Sigc[i] = E[d_i d_i' | d_0..d_{i-1} inside, d_i outside]     (needed if p_i Pi[i] > 0)
// plus the timeout block Sigc_T = A Sig[T-1] A' + Sigma_w.
struct SigmaTerms {
    std::vector<Matrix> interior;   // Sig[0..T-1]; unset entries stay empty
    std::vector<Matrix> exterior;   // Sigc[0..T-1]
    Matrix timeout;                 // Sigc_T
};

SigmaTerms sigma_terms(const Matrix& big, int block, const Matrix& A, const Matrix& Sigma_w,
                       const TriggerParams& trig, const std::vector<double>& probs,
                       const std::vector<double>& Pi, const QmcOptions& opt) {
    const int T = trig.timeout_T;
    SigmaTerms out;
    out.interior.resize(T);
    out.exterior.resize(T);
    const bool need_timeout = Pi[T] > 0.0;
    for (int i = 0; i < T; ++i) {
        const int d = (i + 1) * block;
        const Matrix sub = big.topLeftCorner(d, d);
        const bool need_int = (Pi[i + 1] > 0.0) || (need_timeout && i == T - 1);
        const bool need_ext = probs[i] * Pi[i] > 0.0;
        if (need_int) {
            GaussianVector g(sub);
            out.interior[i] = rect_truncated_moments(g, Rectangle::centered(trig.epsilon, d),
                                                     trailing_indices(d, block), opt)
                                  .second_moment;
        }
        if (need_ext) {
            GaussianVector g(sub);
            out.exterior[i] = exterior_truncated_moments(g, Rectangle::centered(trig.epsilon, block),
                                                         Rectangle::centered(trig.epsilon, i * block),
                                                         opt)
                                  .second_moment;
        }
    }
    if (need_timeout)
        out.timeout = A * out.interior[T - 1] * A.transpose() + Sigma_w;
    return out;
}

LossBreakdown assemble_scalar(double a, double sigma_w2, const CostWeights& weights, double K,
                              const TriggerParams& trig, const QmcOptions& opt, bool lossy) {
    const int T = trig.timeout_T;
    const double pl = lossy ? trig.p_loss : 0.0;
    const double Qx = weights.Q_x(0, 0);
    const double Qt = Qx + weights.rho * K * weights.Q_u(0, 0) * K;

    LossBreakdown out;
    out.stability_margin = 1.0 - pl * a * a;
    if (lossy && out.stability_margin <= 0.0)
        throw UnstableConfiguration("p_loss * a^2 must be < 1 for a finite loss");

    const auto probs = crossing_probs_scalar(a, sigma_w2, trig, opt);
    const auto Pi = survival_products(probs, T);
    const double pi0 = lossy ? rate_scalar_lossy(probs, T, pl).success_rate
                             : rate_scalar_lossless(probs, T);

    const Matrix A1 = Matrix::Constant(1, 1, a);
    const Matrix Sw1 = Matrix::Constant(1, 1, sigma_w2);
    const Matrix big = xi_covariance(a, sigma_w2, T - 1);
    const auto sig = sigma_terms(big, 1, A1, Sw1, trig, probs, Pi, opt);

    // Channel-renewal weight on exterior terms and per-block noise inflation.
    const double Qh = lossy ? ((1.0 - pl) * Qt + pl * Qx) / out.stability_margin : Qt;
    const double infl = lossy ? pl * sigma_w2 / (1.0 - pl) : 0.0;

    out.terms.assign(T + 1, 0.0);
    for (int i = 0; i <= T; ++i) {
        if (Pi[i] == 0.0)
            continue;
        double term = 0.0;
        if (i >= 1)
            term += Qx * sig.interior[i - 1](0, 0);
        const double pi_cross = (i < T) ? probs[i] : 1.0;
        if (pi_cross > 0.0) {
            const double sc = (i < T) ? sig.exterior[i](0, 0) : sig.timeout(0, 0);
            term += pi_cross * Qh * (sc + infl);
        }
        out.terms[i] = term * Pi[i] * pi0;
    }
    out.J_inf = std::accumulate(out.terms.begin(), out.terms.end(), 0.0);
    return out;
}

LossBreakdown assemble_vector(const LinearSystem& sys, const DeadBeatController& ctrl,
                              const CostWeights& weights, const TriggerParams& trig,
                              const QmcOptions& opt, bool lossy) {
    const int T = trig.timeout_T;
    const int n = sys.n();
    const int nu = ctrl.nu;
    const double pl = lossy ? trig.p_loss : 0.0;
    const Matrix& A = sys.A;
    const Matrix Ac = A + sys.B * ctrl.K;
    const Matrix Qt = weights.Q_x + weights.rho * ctrl.K.transpose() * weights.Q_u * ctrl.K;

    LossBreakdown out;
    const double rho_A = spectral_radius(A);
    out.stability_margin = 1.0 - pl * rho_A * rho_A;
    if (lossy && out.stability_margin <= 0.0)
        throw UnstableConfiguration("p_loss * lambda_max(A)^2 must be < 1 for a finite loss");

    const auto probs = crossing_probs_vector(sys, ctrl, trig, opt);
    const auto Pi = survival_products(probs, T);
    const double pi0 = lossy ? rate_vector_lossy(probs, T, nu, pl).success_rate
                             : rate_vector_lossless(probs, T, nu);

    const Matrix big = delta_covariance(sys, nu, T - 1);
    const auto sig = sigma_terms(big, n, A, sys.Sigma_w, trig, probs, Pi, opt);

    // Powers of the open- and closed-loop maps used by the packet-window sums.
    std::vector<Matrix> Acp(nu), Ap(nu);
    Acp[0] = Matrix::Identity(n, n);
    Ap[0] = Matrix::Identity(n, n);
    for (int j = 1; j < nu; ++j) {
        Acp[j] = Acp[j - 1] * Ac;
        Ap[j] = Ap[j - 1] * A;
    }

    // In-packet noise cost, independent of the trigger level.
    double Z = 0.0;
    for (int j = 0; j + 1 < nu; ++j)
        for (int l = 0; l <= j; ++l)
            Z += (Ap[l].transpose() * weights.Q_x * Ap[l] * sys.Sigma_w).trace();

    // Per-window cost kernels: plain quadratic forms when lossless, their
    // retry-burst resolvents when lossy.
    std::vector<Matrix> Theta(nu);
    Matrix Upsilon;
    if (lossy) {
        const Matrix M = std::sqrt(pl) * A.transpose();
        for (int j = 0; j < nu; ++j)
            Theta[j] = lyap_solve(M, Acp[j].transpose() * Qt * Acp[j]);
        Upsilon = lyap_solve(M, weights.Q_x);
    } else {
        for (int j = 0; j < nu; ++j)
            Theta[j] = Acp[j].transpose() * Qt * Acp[j];
    }

    const auto window_cost = [&](const Matrix& Sc) {
        const Matrix S = lossy ? Matrix((1.0 - pl) * Sc + pl * sys.Sigma_w) : Sc;
        double v = 0.0;
        for (int j = 0; j < nu; ++j)
            v += (Theta[j] * S).trace();
        if (lossy)
            v += pl / (1.0 - pl) * (Upsilon * S).trace();
        return v + Z;
    };

    out.terms.assign(T + 1, 0.0);
    for (int i = 0; i <= T; ++i) {
        if (Pi[i] == 0.0)
            continue;
        double term = 0.0;
        if (i >= 1)
            term += (weights.Q_x * sig.interior[i - 1]).trace();
        const double pi_cross = (i < T) ? probs[i] : 1.0;
        if (pi_cross > 0.0)
            term += pi_cross * window_cost((i < T) ? sig.exterior[i] : sig.timeout);
        out.terms[i] = term * Pi[i] * pi0;
    }
    out.J_inf = std::accumulate(out.terms.begin(), out.terms.end(), 0.0);
    return out;
}

} // namespace

LossBreakdown loss_scalar_lossless(double a, double sigma_w2, const CostWeights& weights, double K,
                                   const TriggerParams& trig, const QmcOptions& opt) {
    return assemble_scalar(a, sigma_w2, weights, K, trig, opt, false);
}

LossBreakdown loss_scalar_lossy(double a, double sigma_w2, const CostWeights& weights, double K,
                                const TriggerParams& trig, const QmcOptions& opt) {
    return assemble_scalar(a, sigma_w2, weights, K, trig, opt, true);
}

LossBreakdown loss_vector_lossless(const LinearSystem& sys, const DeadBeatController& ctrl,
                                   const CostWeights& weights, const TriggerParams& trig,
                                   const QmcOptions& opt) {
    return assemble_vector(sys, ctrl, weights, trig, opt, false);
}

LossBreakdown loss_vector_lossy(const LinearSystem& sys, const DeadBeatController& ctrl,
                                const CostWeights& weights, const TriggerParams& trig,
                                const QmcOptions& opt) {
    return assemble_vector(sys, ctrl, weights, trig, opt, true);
}

} // namespace etc
