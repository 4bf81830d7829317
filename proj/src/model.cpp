#include "etc/model.hpp"

#include <cmath>

namespace etc {

namespace {

void check_symmetric_psd(const Matrix& M, const char* name, double rel) {
    if (M.rows() != M.cols())
        throw DimensionMismatch(std::string(name) + " must be square");
    const double scale = 1.0 + M.norm();
    if ((M - M.transpose()).norm() > rel * scale)
        throw Error(std::string(name) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -rel * scale)
        throw Error(std::string(name) + " is not positive semi-definite");
}

} // namespace

LinearSystem::LinearSystem(Matrix A_, Matrix B_, Matrix Sigma_w_, Matrix Sigma_0_)
    : A(std::move(A_)), B(std::move(B_)), Sigma_w(std::move(Sigma_w_)), Sigma_0(std::move(Sigma_0_)) {
    const ModelTolerances tol;
    if (A.rows() != A.cols() || A.rows() < 1)
        throw DimensionMismatch("A must be square, n >= 1");
    if (B.rows() != A.rows() || B.cols() < 1)
        throw DimensionMismatch("B must be n x m with m >= 1");
    check_symmetric_psd(Sigma_w, "Sigma_w", tol.rel);
    check_symmetric_psd(Sigma_0, "Sigma_0", tol.rel);
    if (Sigma_w.rows() != A.rows() || Sigma_0.rows() != A.rows())
        throw DimensionMismatch("covariance dimensions must match A");
    Eigen::ColPivHouseholderQR<Matrix> qr(B);
    qr.setThreshold(tol.rel);
    if (qr.rank() < B.cols())
        throw Error("B must have full column rank");
}

LinearSystem LinearSystem::scalar(double a, double b, double sigma_w2, double sigma_02) {
    Matrix A(1, 1), B(1, 1), Sw(1, 1), S0(1, 1);
    A << a;
    B << b;
    Sw << sigma_w2;
    S0 << sigma_02;
    return LinearSystem(A, B, Sw, S0);
}

CostWeights::CostWeights(Matrix Q_x_, Matrix Q_u_, double rho_)
    : Q_x(std::move(Q_x_)), Q_u(std::move(Q_u_)), rho(rho_) {
    const ModelTolerances tol;
    check_symmetric_psd(Q_x, "Q_x", tol.rel);
    check_symmetric_psd(Q_u, "Q_u", tol.rel);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Q_u, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw Error("Q_u must be positive definite");
    if (rho < 0.0)
        throw Error("rho must be nonnegative");
}

CostWeights CostWeights::scalar(double qx, double qu, double rho) {
    Matrix Qx(1, 1), Qu(1, 1);
    Qx << qx;
    Qu << qu;
    return CostWeights(Qx, Qu, rho);
}

double spectral_radius(const Matrix& A) {
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

int controllability_index(const LinearSystem& sys, const ModelTolerances& tol) {
    const int n = sys.n();
    const int m = sys.m();
    Eigen::FullPivLU<Matrix> lu(sys.A);
    lu.setThreshold(tol.rel);
    if (!lu.isInvertible())
        throw SingularA("A is singular within tolerance; the rank test requires invertible A");
    const Matrix Ainv = lu.inverse();

    Matrix cols(n, n * m);
    Matrix blk = sys.B;
    for (int nu = 1; nu <= n; ++nu) {
        blk = Ainv * blk;  // A^-nu B
        cols.middleCols((nu - 1) * m, m) = blk;
        Eigen::ColPivHouseholderQR<Matrix> qr(cols.leftCols(nu * m));
        qr.setThreshold(tol.rel);
        if (qr.rank() == n)
            return nu;
    }
    throw NotControllable("system is not nu-step controllable for any nu <= n");
}

DeadBeatController synthesize_deadbeat_gain(const LinearSystem& sys, const ModelTolerances& tol) {
    if (sys.m() != 1)
        throw MultiInputUnsupported(
            "dead-beat synthesis supports single-input systems only; "
            "supply a gain via validate_deadbeat_gain");
    const int nu = controllability_index(sys, tol);
    const int n = sys.n();

    // Ackermann with all poles at the origin: K = -e_n' C^-1 A^n.
    Matrix C(n, n);
    Matrix col = sys.B;
    for (int j = 0; j < n; ++j) {
        C.col(j) = col;
        col = sys.A * col;
    }
    Eigen::FullPivLU<Matrix> lu(C);
    lu.setThreshold(tol.rel);
    if (!lu.isInvertible())
        throw NotControllable("controllability matrix is rank deficient");
    Matrix An = Matrix::Identity(n, n);
    for (int j = 0; j < n; ++j)
        An = sys.A * An;
    Matrix K = -(lu.inverse().row(n - 1) * An);
    return validate_deadbeat_gain(sys, K, nu, tol);
}

DeadBeatController validate_deadbeat_gain(const LinearSystem& sys, const Matrix& K, int nu,
                                          const ModelTolerances& tol) {
    if (K.rows() != sys.m() || K.cols() != sys.n())
        throw DimensionMismatch("K must be m x n");
    if (nu < 1 || nu > sys.n())
        throw Error("nu must satisfy 1 <= nu <= n");
    const Matrix Ac = sys.A + sys.B * K;
    Matrix P = Matrix::Identity(sys.n(), sys.n());
    for (int j = 0; j < nu; ++j)
        P = Ac * P;
    const double residual = P.norm();
    const double bound = tol.rel * (1.0 + std::pow(sys.A.norm(), nu));
    if (residual > bound)
        throw NotNilpotent("(A+BK)^nu is not nilpotent: residual " + std::to_string(residual));
    return DeadBeatController{K, nu};
}

Matrix lyap_solve(const Matrix& A, const Matrix& Q) {
    if (A.rows() != A.cols() || Q.rows() != Q.cols() || A.rows() != Q.rows())
        throw DimensionMismatch("lyap_solve requires square A, Q of equal dimension");
    if (spectral_radius(A) >= 1.0)
        throw UnstableArgument("lyap_solve requires spectral radius < 1");
    const int n = static_cast<int>(A.rows());
    // vec(X) solves (I - A (x) A) vec(X) = vec(Q); dimensions here are tiny.
    Matrix M = Matrix::Identity(n * n, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            M.block(i * n, j * n, n, n) -= A(i, j) * A;
    Eigen::Map<const Vector> q(Q.data(), n * n);
    Vector x = M.partialPivLu().solve(q);
    Matrix X = Eigen::Map<Matrix>(x.data(), n, n);
    return 0.5 * (X + X.transpose());
}

std::vector<Vector> control_sequence(const LinearSystem& sys, const DeadBeatController& ctrl,
                                     const Vector& x) {
    std::vector<Vector> seq;
    seq.reserve(ctrl.nu);
    const Matrix Ac = sys.A + sys.B * ctrl.K;
    Vector state = x;
    for (int j = 0; j < ctrl.nu; ++j) {
        seq.push_back(ctrl.K * state);
        state = Ac * state;
    }
    return seq;
}

} // namespace etc
