#include "etc/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace etc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

} // namespace

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

double normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Acklam's rational approximation, polished with one Newton step.
double normal_quantile(double p) {
    if (p <= 0.0)
        return -kInf;
    if (p >= 1.0)
        return kInf;
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double e = normal_cdf(x) - p;
    x -= e / normal_pdf(x);
    return x;
}

GaussianVector::GaussianVector(Matrix cov_) : mean(Vector::Zero(cov_.rows())), cov(std::move(cov_)) {
    if (cov.rows() != cov.cols() || cov.rows() < 1)
        throw DimensionMismatch("covariance must be square, d >= 1");
    const double scale = 1.0 + cov.norm();
    if ((cov - cov.transpose()).norm() > 1e-10 * scale)
        throw Error("covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
        throw Error("covariance is not positive semi-definite");
}

GaussianVector::GaussianVector(Vector mean_, Matrix cov_) : GaussianVector(std::move(cov_)) {
    if (mean_.size() != cov.rows())
        throw DimensionMismatch("mean/covariance dimensions differ");
    mean = std::move(mean_);
}

Rectangle::Rectangle(Vector lower_, Vector upper_) : lower(std::move(lower_)), upper(std::move(upper_)) {
    if (lower.size() != upper.size())
        throw DimensionMismatch("rectangle bounds differ in dimension");
    for (int i = 0; i < lower.size(); ++i)
        if (lower[i] > upper[i])
            throw Error("rectangle requires lower <= upper componentwise");
}

Rectangle Rectangle::centered(double eps, int d) {
    return Rectangle(Vector::Constant(d, -eps), Vector::Constant(d, eps));
}

Rectangle Rectangle::unbounded(int d) {
    return Rectangle(Vector::Constant(d, -kInf), Vector::Constant(d, kInf));
}

Matrix xi_covariance(double a, double sigma_w2, int i) {
    if (i < 0)
        throw Error("xi_covariance requires i >= 0");
    if (sigma_w2 <= 0.0)
        throw Error("xi_covariance requires sigma_w2 > 0");
    // Xi[p][q] = a^{q-p} sum_{j=0}^{p} a^{2j} sigma_w2 for p <= q: the 1-D
    // special case of delta_covariance. Delegating keeps the scalar and
    // vector analysis paths bit-identical, which the reduction properties
    // rely on.
    return delta_covariance(LinearSystem::scalar(a, 1.0, sigma_w2, sigma_w2), 1, i);
}

Matrix delta_covariance(const LinearSystem& sys, int nu, int i) {
    if (i < 0 || nu < 1)
        throw Error("delta_covariance requires i >= 0, nu >= 1");
    const int n = sys.n();
    const int blocks = i + 1;
    std::vector<Matrix> Ap(blocks + 1);
    Ap[0] = Matrix::Identity(n, n);
    for (int k = 1; k <= blocks; ++k)
        Ap[k] = sys.A * Ap[k - 1];

    Matrix Astar = Matrix::Zero(n, n);
    Matrix P = Matrix::Identity(n, n);
    for (int l = 0; l < nu; ++l) {
        Astar += P * sys.Sigma_w * P.transpose();
        P = sys.A * P;
    }

    Matrix M(blocks * n, blocks * n);
    for (int p = 0; p < blocks; ++p) {
        for (int q = p; q < blocks; ++q) {
            Matrix blk = Ap[p] * Astar * Ap[q].transpose();
            for (int j = 0; j < p; ++j)
                blk += Ap[j] * sys.Sigma_w * Ap[j + q - p].transpose();
            M.block(p * n, q * n, n, n) = blk;
            M.block(q * n, p * n, n, n) = blk.transpose();
        }
    }
    return M;
}

namespace {

struct GenzResult {
    double prob = 0.0;
    double prob_err = 0.0;
    Vector mean;         // of selected coordinates, conditional
    Matrix second;       // of selected coordinates, conditional
    double moment_err = 0.0;
};

Matrix cholesky_with_jitter(const Matrix& cov) {
    const int d = static_cast<int>(cov.rows());
    double jitter = 0.0;
    const double base = 1e-13 * (1.0 + cov.trace() / d);
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::LLT<Matrix> llt(cov + jitter * Matrix::Identity(d, d));
        if (llt.info() == Eigen::Success)
            return llt.matrixL();
        jitter = (jitter == 0.0) ? base : jitter * 100.0;
    }
    throw Error("covariance Cholesky failed; matrix too far from PSD");
}

// Greedy variable reordering (smallest conditional interval mass first) with
// an interleaved Cholesky; sharply reduces the QMC variance on elongated
// covariances. Falls back to the natural order when a pivot degenerates.
struct OrderedFactor {
    Matrix L;
    Vector lower, upper;
    std::vector<int> perm;  // perm[j] = original coordinate at position j
    bool ok = false;
};

OrderedFactor reorder_cholesky(Matrix C, Vector a, Vector b) {
    const int d = static_cast<int>(C.rows());
    OrderedFactor o;
    o.L = Matrix::Zero(d, d);
    o.lower = std::move(a);
    o.upper = std::move(b);
    o.perm.resize(d);
    for (int i = 0; i < d; ++i)
        o.perm[i] = i;
    Vector yexp = Vector::Zero(d);
    const double floor_piv = 1e-13 * (1.0 + C.trace() / d);

    const auto interval = [&](double lo, double hi, double mu, double sd, double& at, double& bt) {
        at = (lo == -kInf) ? -kInf : (lo - mu) / sd;
        bt = (hi == kInf) ? kInf : (hi - mu) / sd;
        const double Fl = (at == -kInf) ? 0.0 : normal_cdf(at);
        const double Fu = (bt == kInf) ? 1.0 : normal_cdf(bt);
        return Fu - Fl;
    };

    for (int j = 0; j < d; ++j) {
        int best = -1;
        double best_p = 2.0;
        for (int i = j; i < d; ++i) {
            const double s2 = C(i, i) - o.L.row(i).head(j).squaredNorm();
            if (s2 <= floor_piv)
                continue;
            const double mu = o.L.row(i).head(j).dot(yexp.head(j));
            double at, bt;
            const double p = interval(o.lower[i], o.upper[i], mu, std::sqrt(s2), at, bt);
            if (p < best_p) {
                best_p = p;
                best = i;
            }
        }
        if (best < 0)
            return o;  // ok stays false
        if (best != j) {
            C.row(best).swap(C.row(j));
            C.col(best).swap(C.col(j));
            o.L.row(best).head(j).swap(o.L.row(j).head(j));
            std::swap(o.lower[best], o.lower[j]);
            std::swap(o.upper[best], o.upper[j]);
            std::swap(o.perm[best], o.perm[j]);
        }
        const double s2 = C(j, j) - o.L.row(j).head(j).squaredNorm();
        if (s2 <= floor_piv)
            return o;
        o.L(j, j) = std::sqrt(s2);
        for (int i = j + 1; i < d; ++i)
            o.L(i, j) = (C(i, j) - o.L.row(i).head(j).dot(o.L.row(j).head(j))) / o.L(j, j);
        const double mu = o.L.row(j).head(j).dot(yexp.head(j));
        double at, bt;
        const double p = interval(o.lower[j], o.upper[j], mu, o.L(j, j), at, bt);
        if (p > 0.0) {
            const double pl = (at == -kInf) ? 0.0 : normal_pdf(at);
            const double pu = (bt == kInf) ? 0.0 : normal_pdf(bt);
            yexp[j] = (pl - pu) / p;
        }
    }
    o.ok = true;
    return o;
}

long default_points(int d) {
    if (d <= 2) return 1L << 13;
    if (d <= 6) return 1L << 14;
    if (d <= 10) return 1L << 15;
    return 1L << 16;
}

double frac(double x) { return x - std::floor(x); }

std::vector<double> sqrt_primes(int d) {
    std::vector<double> q;
    q.reserve(d);
    for (int cand = 2; static_cast<int>(q.size()) < d; ++cand) {
        bool prime = true;
        for (int f = 2; f * f <= cand; ++f)
            if (cand % f == 0) { prime = false; break; }
        if (prime)
            q.push_back(frac(std::sqrt(static_cast<double>(cand))));
    }
    return q;
}

// Genz separation-of-variables transform with randomized Richtmyer QMC.
// Estimates P(lower <= x <= upper), x ~ N(0, cov), and (optionally) the
// conditional mean / second moment of the coordinates in `sel`.
GenzResult genz_rectangle(const Matrix& cov, const Vector& lower, const Vector& upper,
                          const std::vector<int>& sel, const QmcOptions& opt) {
    const int d = static_cast<int>(cov.rows());
    const int k = static_cast<int>(sel.size());
    GenzResult out;
    out.mean = Vector::Zero(k);
    out.second = Matrix::Zero(k, k);

    bool all_unbounded = true;
    for (int i = 0; i < d; ++i)
        if (lower[i] != -kInf || upper[i] != kInf) { all_unbounded = false; break; }
    if (all_unbounded) {
        out.prob = 1.0;
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b)
                out.second(a, b) = cov(sel[a], sel[b]);
        return out;
    }

    if (d == 1) {
        const double s = std::sqrt(cov(0, 0));
        const double al = lower[0] == -kInf ? -kInf : lower[0] / s;
        const double be = upper[0] == kInf ? kInf : upper[0] / s;
        const double Fl = al == -kInf ? 0.0 : normal_cdf(al);
        const double Fu = be == kInf ? 1.0 : normal_cdf(be);
        out.prob = std::max(0.0, Fu - Fl);
        if (k == 1 && out.prob > 0.0) {
            const double pl = al == -kInf ? 0.0 : normal_pdf(al);
            const double pu = be == kInf ? 0.0 : normal_pdf(be);
            const double apl = (al == -kInf || al == kInf) ? 0.0 : al * pl;
            const double bpu = (be == -kInf || be == kInf) ? 0.0 : be * pu;
            out.mean[0] = s * (pl - pu) / out.prob;
            out.second(0, 0) = cov(0, 0) * (1.0 - (bpu - apl) / out.prob);
        }
        return out;
    }

    Matrix L;
    Vector lo_p, up_p;
    std::vector<int> pos(d);  // pos[original coordinate] = permuted position
    {
        OrderedFactor of = reorder_cholesky(cov, lower, upper);
        if (of.ok) {
            L = std::move(of.L);
            lo_p = std::move(of.lower);
            up_p = std::move(of.upper);
            for (int j = 0; j < d; ++j)
                pos[of.perm[j]] = j;
        } else {
            L = cholesky_with_jitter(cov);
            lo_p = lower;
            up_p = upper;
            for (int j = 0; j < d; ++j)
                pos[j] = j;
        }
    }
    std::vector<int> sel_p(k);
    for (int c = 0; c < k; ++c)
        sel_p[c] = pos[sel[c]];
    const std::vector<double> gen = sqrt_primes(d);
    const int S = opt.shifts;

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<double>> shift(S, std::vector<double>(d));
    for (auto& sh : shift)
        for (auto& v : sh)
            v = unif(rng);

    struct Acc {
        double sw = 0.0;
        Vector sx;
        Matrix sxx;
        long n = 0;
    };
    std::vector<Acc> acc(S);
    for (auto& a : acc) {
        a.sx = Vector::Zero(k);
        a.sxx = Matrix::Zero(k, k);
    }

    const double clamp_lo = 1e-16, clamp_hi = 1.0 - 1e-16;
    std::vector<double> y(d), u(d);
    Vector xsel(k);

    long target = opt.points > 0 ? opt.points : default_points(d);
    const double mom_scale = [&] {
        double s = 0.0;
        for (int a = 0; a < k; ++a)
            s = std::max(s, std::abs(cov(sel[a], sel[a])));
        return 1.0 + s;
    }();

    auto estimate = [&](GenzResult& r) {
        double psum = 0.0, psum2 = 0.0;
        double swtot = 0.0;
        Vector sxtot = Vector::Zero(k);
        Matrix sxxtot = Matrix::Zero(k, k);
        std::vector<Matrix> per_shift_m2;
        per_shift_m2.reserve(S);
        for (const auto& a : acc) {
            const double p = a.sw / a.n;
            psum += p;
            psum2 += p * p;
            swtot += a.sw;
            sxtot += a.sx;
            sxxtot += a.sxx;
            if (a.sw > 0.0)
                per_shift_m2.push_back(a.sxx / a.sw);
        }
        r.prob = psum / S;
        const double var = std::max(0.0, psum2 / S - r.prob * r.prob);
        r.prob_err = 3.0 * std::sqrt(var / S);
        if (k > 0 && swtot > 0.0) {
            r.mean = sxtot / swtot;
            r.second = sxxtot / swtot;
            double merr = 0.0;
            if (per_shift_m2.size() > 1) {
                Matrix m = Matrix::Zero(k, k);
                for (const auto& M2 : per_shift_m2)
                    m += M2;
                m /= static_cast<double>(per_shift_m2.size());
                double v = 0.0;
                for (const auto& M2 : per_shift_m2)
                    v += (M2 - m).squaredNorm();
                v /= static_cast<double>(per_shift_m2.size());
                merr = 3.0 * std::sqrt(v / per_shift_m2.size());
            }
            r.moment_err = merr;
        }
    };

    while (true) {
        for (int s = 0; s < S; ++s) {
            Acc& a = acc[s];
            for (long pt = a.n; pt < target; ++pt) {
                const double kk = static_cast<double>(pt + 1);
                for (int i = 0; i < d; ++i)
                    u[i] = std::abs(2.0 * frac(kk * gen[i] + shift[s][i]) - 1.0);
                double w = 1.0;
                for (int i = 0; i < d && w > 0.0; ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < i; ++j)
                        dot += L(i, j) * y[j];
                    const double lii = L(i, i);
                    const double lo = lo_p[i] == -kInf ? 0.0 : normal_cdf((lo_p[i] - dot) / lii);
                    const double hi = up_p[i] == kInf ? 1.0 : normal_cdf((up_p[i] - dot) / lii);
                    const double width = hi - lo;
                    if (width <= 0.0) {
                        w = 0.0;
                        break;
                    }
                    w *= width;
                    const double t = std::clamp(lo + u[i] * width, clamp_lo, clamp_hi);
                    y[i] = normal_quantile(t);
                }
                a.sw += w;
                if (k > 0 && w > 0.0) {
                    for (int c = 0; c < k; ++c) {
                        double v = 0.0;
                        for (int j = 0; j <= sel_p[c]; ++j)
                            v += L(sel_p[c], j) * y[j];
                        xsel[c] = v;
                    }
                    a.sx.noalias() += w * xsel;
                    a.sxx.noalias() += w * (xsel * xsel.transpose());
                }
            }
            a.n = target;
        }
        estimate(out);
        const bool prob_ok = out.prob_err <= opt.abs_tol;
        const bool mom_ok = k == 0 || out.moment_err <= opt.moment_rel_tol * mom_scale;
        if ((prob_ok && mom_ok) || target >= opt.max_points)
            break;
        target = std::min(opt.max_points, target * 2);
    }

    if (out.prob_err > opt.abs_tol)
        throw ToleranceNotMet("mvn rectangle integration did not reach requested tolerance",
                              out.prob, out.prob_err);
    out.prob = std::clamp(out.prob, 0.0, 1.0);
    return out;
}

std::vector<int> trailing_indices(int d, int k) {
    std::vector<int> sel(k);
    for (int i = 0; i < k; ++i)
        sel[i] = d - k + i;
    return sel;
}

} // namespace

ProbEstimate mvn_rectangle_prob(const GaussianVector& g, const Rectangle& r, const QmcOptions& opt) {
    if (r.dim() != g.dim())
        throw DimensionMismatch("rectangle/gaussian dimensions differ");
    GenzResult res = genz_rectangle(g.cov, r.lower, r.upper, {}, opt);
    return ProbEstimate{res.prob, res.prob_err};
}

TruncatedMoments rect_truncated_moments(const GaussianVector& g, const Rectangle& r,
                                        const std::vector<int>& which, const QmcOptions& opt) {
    if (r.dim() != g.dim())
        throw DimensionMismatch("rectangle/gaussian dimensions differ");
    for (int idx : which)
        if (idx < 0 || idx >= g.dim())
            throw DimensionMismatch("selected coordinate out of range");
    GenzResult res = genz_rectangle(g.cov, r.lower, r.upper, which, opt);
    if (res.prob < opt.prob_floor)
        throw VanishingMass("region probability below floor in rect_truncated_moments");
    return TruncatedMoments{res.prob, res.mean, res.second, res.prob_err, res.moment_err};
}

TruncatedMoments exterior_truncated_moments(const GaussianVector& g, const Rectangle& inner_box,
                                            const Rectangle& outer_box, const QmcOptions& opt) {
    const int d = g.dim();
    const int nb = inner_box.dim();
    const int nl = outer_box.dim();
    if (nb + nl != d)
        throw DimensionMismatch("inner/outer box dimensions must partition the vector");

    const std::vector<int> sel = trailing_indices(d, nb);

    // A = {leading in outer_box, trailing free}; B = A and {trailing in inner_box}.
    Vector loA(d), upA(d), loB(d), upB(d);
    for (int i = 0; i < nl; ++i) {
        loA[i] = loB[i] = outer_box.lower[i];
        upA[i] = upB[i] = outer_box.upper[i];
    }
    for (int i = 0; i < nb; ++i) {
        loA[nl + i] = -kInf;
        upA[nl + i] = kInf;
        loB[nl + i] = inner_box.lower[i];
        upB[nl + i] = inner_box.upper[i];
    }

    GenzResult A = genz_rectangle(g.cov, loA, upA, sel, opt);
    GenzResult B = genz_rectangle(g.cov, loB, upB, sel, opt);

    const double mass = A.prob - B.prob;
    if (B.prob >= opt.prob_floor && mass <= 0.0)
        throw NegativeMassDifference("P(A) <= P(B) in exterior decomposition");
    if (mass < opt.prob_floor)
        throw VanishingMass("exterior region probability below floor");

    TruncatedMoments out;
    out.prob = mass;
    if (B.prob < opt.prob_floor) {
        out.mean = A.mean;
        out.second_moment = A.second;
    } else {
        out.mean = (A.prob * A.mean - B.prob * B.mean) / mass;
        out.second_moment = (A.prob * A.second - B.prob * B.second) / mass;
    }
    out.prob_error = A.prob_err + B.prob_err;
    out.moment_error = A.moment_err + B.moment_err;
    return out;
}

} // namespace etc
