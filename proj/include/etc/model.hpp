#pragma once

#include <vector>

#include <Eigen/Dense>

#include "etc/errors.hpp"

namespace etc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Discrete-time linear stochastic plant x_{k+1} = A x_k + B u_k + w_k,
// w_k ~ N(0, Sigma_w), x_0 ~ N(0, Sigma_0).
struct LinearSystem {
    Matrix A;        // n x n
    Matrix B;        // n x m, full column rank
    Matrix Sigma_w;  // n x n, symmetric PSD
    Matrix Sigma_0;  // n x n, symmetric PSD

    LinearSystem(Matrix A, Matrix B, Matrix Sigma_w, Matrix Sigma_0);

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }

    static LinearSystem scalar(double a, double b, double sigma_w2, double sigma_02);
};

// Weights of the per-step quadratic loss x'Q_x x + rho u'Q_u u.
struct CostWeights {
    Matrix Q_x;  // n x n, symmetric PSD
    Matrix Q_u;  // m x m, symmetric PD
    double rho = 0.0;

    CostWeights(Matrix Q_x, Matrix Q_u, double rho = 0.0);

    static CostWeights scalar(double qx, double qu, double rho = 0.0);
};

// Feedback gain K with (A+BK)^nu = 0; packets carry the nu-command sequence.
struct DeadBeatController {
    Matrix K;  // m x n
    int nu;    // 1 <= nu <= n
};

// Relative Frobenius tolerance used by nilpotency / PSD / rank checks.
struct ModelTolerances {
    double rel = 1e-8;
};

// Smallest nu with rank[A^-1 B, ..., A^-nu B] = n. Requires invertible A.
int controllability_index(const LinearSystem& sys, const ModelTolerances& tol = {});

// Ackermann placement of all closed-loop eigenvalues at the origin.
// Single-input only; multi-input gains go through validate_deadbeat_gain.
DeadBeatController synthesize_deadbeat_gain(const LinearSystem& sys, const ModelTolerances& tol = {});

// Accepts a user-supplied gain iff (A+BK)^nu is nilpotent within tolerance.
DeadBeatController validate_deadbeat_gain(const LinearSystem& sys, const Matrix& K, int nu,
                                          const ModelTolerances& tol = {});

// Positive semi-definite X with A X A' - X + Q = 0; requires rho(A) < 1.
Matrix lyap_solve(const Matrix& A, const Matrix& Q);

// The packet payload {K x, K(A+BK)x, ..., K(A+BK)^{nu-1} x}.
std::vector<Vector> control_sequence(const LinearSystem& sys, const DeadBeatController& ctrl,
                                     const Vector& x);

double spectral_radius(const Matrix& A);

} // namespace etc
