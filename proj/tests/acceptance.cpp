// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "etc/experiment.hpp"
#include "etc/performance.hpp"
#include "etc/simulator.hpp"

using namespace etc;

namespace {

int g_failures = 0;

struct Criterion {
    explicit Criterion(int id, std::string title) : id(id), title(std::move(title)) {}
    int id;
    std::string title;
    bool ok = true;
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes.push_back(what);
        }
    }
    void finish() const {
        std::printf("criterion %d [%s]: %s\n", id, title.c_str(), ok ? "PASS" : "FAIL");
        for (const auto& n : notes)
            std::printf("    %s\n", n.c_str());
        if (!ok)
            ++g_failures;
        std::fflush(stdout);
    }
};

double now_s() {
    static const auto t0 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool in_ci99(double analytic, const Stat& sim) {
    return std::abs(analytic - sim.mean) <= 2.576 * sim.stderr_ + 1e-9;
}

std::string fmt_ci(const char* what, double eps, double analytic, const Stat& sim) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s at eps=%.2f: analytic %.6f vs sim %.6f +- %.6f", what, eps,
                  analytic, sim.mean, sim.stderr_);
    return buf;
}

// --- shared plants ---------------------------------------------------------

const double kA = 1.6, kSw2 = 1.44, kS02 = 1.0;
const int kT = 5;
const std::vector<double> kScalarGrid{0.0, 0.5, 1.0, 2.0, 3.0, 4.0};

LinearSystem scalar_plant() { return LinearSystem::scalar(kA, 1.0, kSw2, kS02); }

LinearSystem vector_plant() {
    Matrix A(2, 2), B(2, 1), Sw(2, 2), S0(2, 2);
    A << 2.2, -1.2, 1.0, 0.0;
    B << 0.8, 0.4;
    Sw << 1.0, 0.2, 0.2, 1.0;
    S0 << 6.224, 2.16, 2.16, 2.0;
    return LinearSystem(A, B, Sw, S0);
}

DeadBeatController vector_ctrl() {
    Matrix K(1, 2);
    K << -19.0 / 8.0, -3.0 / 4.0;
    return DeadBeatController{K, 2};
}

const int kVT = 4;
const std::vector<double> kVectorGrid{0.0, 0.5, 1.0, 2.0};

SimConfig make_sim(const LinearSystem& sys, const DeadBeatController& ctrl, const TriggerParams& t,
                   std::uint64_t seed) {
    return SimConfig{sys,  ctrl, CostWeights(Matrix::Identity(sys.n(), sys.n()),
                                             Matrix::Identity(sys.m(), sys.m()), 0.0),
                     t,    20000, 500,
                     seed, "",   0};
}

// --- criteria --------------------------------------------------------------

void criterion1() {
    Criterion c(1, "scalar lossless rate and loss vs simulation");
    const double t_start = now_s();
    const auto sys = scalar_plant();
    const DeadBeatController ctrl{Matrix::Constant(1, 1, -kA), 1};
    const auto W = CostWeights::scalar(1.0, 1.0, 0.0);
    for (std::size_t gi = 0; gi < kScalarGrid.size(); ++gi) {
        const double eps = kScalarGrid[gi];
        TriggerParams trig(eps, kT, 0.0);
        const auto probs = crossing_probs_scalar(kA, kSw2, trig);
        const double rate = rate_scalar_lossless(probs, kT);
        const auto loss = loss_scalar_lossless(kA, kSw2, W, -kA, trig);
        if (eps == 0.0) {
            c.expect(std::abs(rate - 1.0) <= 1e-6, "rate endpoint at eps=0 must be 1");
            c.expect(std::abs(loss.J_inf - 1.44) <= 1e-6, "loss endpoint at eps=0 must be 1.44");
        }
        const auto sim = simulate(make_sim(sys, ctrl, trig, 9000 + gi));
        c.expect(in_ci99(rate, sim.success_rate), fmt_ci("rate", eps, rate, sim.success_rate));
        c.expect(in_ci99(rate, sim.attempt_rate),
                 fmt_ci("attempt rate", eps, rate, sim.attempt_rate));
        c.expect(in_ci99(loss.J_inf, sim.loss), fmt_ci("loss", eps, loss.J_inf, sim.loss));
    }
    const double elapsed = now_s() - t_start;
    c.expect(elapsed < 120.0, "runtime " + std::to_string(elapsed) + "s exceeds 2 minutes");
    c.notes.push_back("runtime " + std::to_string(elapsed) + "s");
    c.finish();
}

void criterion2() {
    Criterion c(2, "scalar lossy rate and loss vs simulation");
    const auto sys = scalar_plant();
    const DeadBeatController ctrl{Matrix::Constant(1, 1, -kA), 1};
    const auto W = CostWeights::scalar(1.0, 1.0, 0.0);
    int run = 0;
    for (double pl : {0.1, 0.3}) {
        // The per-step cost has a finite variance only when p * a^4 < 1
        // (loss bursts during drop streaks are amplified by a^2 each step),
        // so the Monte Carlo CI on the loss is only meaningful at pl = 0.1.
        const bool loss_ci_valid = pl * kA * kA * kA * kA < 1.0;
        for (std::size_t gi = 0; gi < kScalarGrid.size(); ++gi) {
            const double eps = kScalarGrid[gi];
            TriggerParams trig(eps, kT, pl);
            const auto probs = crossing_probs_scalar(kA, kSw2, trig);
            const auto rates = rate_scalar_lossy(probs, kT, pl);
            const auto loss = loss_scalar_lossy(kA, kSw2, W, -kA, trig);
            if (eps == 0.0)
                c.expect(std::abs(loss.J_inf - 1.44 / (1.0 - pl * kA * kA)) <= 1e-6,
                         "loss endpoint at eps=0 must equal the closed form");
            const auto sim = simulate(make_sim(sys, ctrl, trig, 9100 + 17 * run++));
            c.expect(in_ci99(rates.success_rate, sim.success_rate),
                     fmt_ci("success rate", eps, rates.success_rate, sim.success_rate));
            if (loss_ci_valid)
                c.expect(in_ci99(loss.J_inf, sim.loss), fmt_ci("loss", eps, loss.J_inf, sim.loss));
        }
    }
    {
        TriggerParams trig(0.0, kT, 0.2);
        const auto loss = loss_scalar_lossy(kA, kSw2, W, -kA, trig);
        c.expect(std::abs(loss.J_inf - 1.44 / 0.488) <= 1e-6,
                 "loss endpoint at eps=0, p=0.2 must be 1.44/0.488");
    }
    bool rejected = false;
    try {
        TriggerParams trig(1.0, kT, 0.4);  // 0.4 * 1.6^2 >= 1
        loss_scalar_lossy(kA, kSw2, W, -kA, trig);
    } catch (const UnstableConfiguration&) {
        rejected = true;
    }
    c.expect(rejected, "p_loss=0.4 with a=1.6 must raise UnstableConfiguration");
    c.finish();
}

void criterion3() {
    Criterion c(3, "vector packetized rate and loss vs simulation");
    const auto sys = vector_plant();
    const auto ctrl = vector_ctrl();
    const CostWeights W(Matrix::Identity(2, 2), Matrix::Identity(1, 1), 0.0);
    int run = 0;
    for (double pl : {0.0, 0.2}) {
        for (std::size_t gi = 0; gi < kVectorGrid.size(); ++gi) {
            const double eps = kVectorGrid[gi];
            TriggerParams trig(eps, kVT, pl);
            const auto probs = crossing_probs_vector(sys, ctrl, trig);
            double rate;
            LossBreakdown loss;
            if (pl == 0.0) {
                rate = rate_vector_lossless(probs, kVT, ctrl.nu);
                loss = loss_vector_lossless(sys, ctrl, W, trig);
                if (eps == 0.0)
                    c.expect(std::abs(rate - 0.5) <= 1e-12, "rate endpoint at eps=0 must be 0.5");
            } else {
                rate = rate_vector_lossy(probs, kVT, ctrl.nu, pl).success_rate;
                loss = loss_vector_lossy(sys, ctrl, W, trig);
            }
            // the packetized benchmark start-up transient decays slowly; use a
            // longer horizon at the same total sample count to keep the O(1/H)
            // bias far below the CI half-width
            auto cfg = make_sim(sys, ctrl, trig, 9400 + 13 * run++);
            cfg.horizon = 80000;
            cfg.replications = 125;
            const auto sim = simulate(cfg);
            c.expect(in_ci99(rate, sim.success_rate),
                     fmt_ci("success rate", eps, rate, sim.success_rate));
            c.expect(in_ci99(loss.J_inf, sim.loss), fmt_ci("loss", eps, loss.J_inf, sim.loss));
        }
    }
    c.finish();
}

void criterion4() {
    Criterion c(4, "packetized loss dominates the non-packetized baseline");
    const auto sys = vector_plant();
    const auto ctrl = vector_ctrl();
    for (std::size_t gi = 0; gi < kVectorGrid.size(); ++gi) {
        TriggerParams trig(kVectorGrid[gi], kVT, 0.2);
        const auto cfg = make_sim(sys, ctrl, trig, 9300 + gi);
        const auto pk = simulate(cfg);
        const auto base = simulate_nonpacketized(cfg);
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "eps=%.2f: packetized J=%.4f att=%.4f vs baseline J=%.4f att=%.4f",
                      kVectorGrid[gi], pk.loss.mean, pk.attempt_rate.mean, base.loss.mean,
                      base.attempt_rate.mean);
        // strict dominance: fewer channel uses and lower loss, separated
        // beyond the joint 99% confidence width
        const double att_gap = 2.576 * (pk.attempt_rate.stderr_ + base.attempt_rate.stderr_);
        const double loss_gap = 2.576 * (pk.loss.stderr_ + base.loss.stderr_);
        c.expect(pk.attempt_rate.mean + att_gap < base.attempt_rate.mean, buf);
        c.expect(pk.loss.mean + loss_gap < base.loss.mean, buf);
    }
    c.finish();
}

void criterion5() {
    Criterion c(5, "reduction properties across 50 random configurations");
    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto rel = [](double x, double y) {
        return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-300});
    };
    for (int rep = 0; rep < 50; ++rep) {
        const int T = 1 + static_cast<int>(unif(rng) * 3);
        const double a = 0.4 + 1.1 * unif(rng);
        const double sw2 = 0.3 + 1.7 * unif(rng);
        const double eps = (rep % 10 == 0) ? 0.0 : 0.2 + 2.0 * unif(rng);
        double pl = 0.6 * unif(rng);
        while (pl * a * a >= 0.95)
            pl *= 0.5;
        QmcOptions opt;
        opt.moment_rel_tol = 1e-4;

        // closed-form rate vs dense stationary solve (random chain)
        {
            const int Tc = 1 + static_cast<int>(unif(rng) * 6);
            std::vector<double> probs(Tc);
            for (auto& v : probs)
                v = unif(rng);
            const auto pi = stationary_distribution_scalar(probs, Tc);
            Matrix P = transition_matrix_scalar(probs, Tc);
            Matrix Aug(Tc + 2, Tc + 1);
            Aug.topRows(Tc + 1) = P.transpose() - Matrix::Identity(Tc + 1, Tc + 1);
            Aug.bottomRows(1) = Matrix::Ones(1, Tc + 1);
            Vector b = Vector::Zero(Tc + 2);
            b(Tc + 1) = 1.0;
            Vector dense = Aug.colPivHouseholderQr().solve(b);
            c.expect(rel(rate_scalar_lossless(probs, Tc), dense(0)) <= 1e-12,
                     "rate formula vs dense solve exceeded 1e-12");
        }

        const auto sys = LinearSystem::scalar(a, 1.0, sw2, 1.0);
        const DeadBeatController ctrl{Matrix::Constant(1, 1, -a), 1};
        const auto W = CostWeights::scalar(1.0, 1.0, 0.0);
        TriggerParams t0(eps, T, 0.0);
        TriggerParams tp(eps, T, pl);

        const auto ps = crossing_probs_scalar(a, sw2, t0, opt);
        const auto pv = crossing_probs_vector(sys, ctrl, t0, opt);
        for (int i = 0; i < T; ++i)
            c.expect(rel(ps[i], pv[i]) <= 1e-9, "crossing prob reduction exceeded 1e-9");

        // lossy formulas at p=0 equal lossless
        const auto r0 = rate_scalar_lossy(ps, T, 0.0);
        c.expect(rel(r0.success_rate, rate_scalar_lossless(ps, T)) <= 1e-9,
                 "lossy rate at p=0 vs lossless exceeded 1e-9");
        c.expect(rel(rate_vector_lossy(ps, T, 1, 0.0).success_rate,
                     rate_vector_lossless(ps, T, 1)) <= 1e-9,
                 "vector lossy rate at p=0 vs lossless exceeded 1e-9");

        // vector formulas at n = nu = 1 equal scalar formulas
        c.expect(rel(rate_vector_lossless(pv, T, 1), rate_scalar_lossless(ps, T)) <= 1e-9,
                 "rate reduction exceeded 1e-9");
        c.expect(rel(rate_vector_lossy(pv, T, 1, pl).success_rate,
                     rate_scalar_lossy(ps, T, pl).success_rate) <= 1e-9,
                 "lossy rate reduction exceeded 1e-9");

        const auto Js = loss_scalar_lossless(a, sw2, W, -a, t0, opt);
        const auto Jv = loss_vector_lossless(sys, ctrl, W, t0, opt);
        c.expect(rel(Js.J_inf, Jv.J_inf) <= 1e-9, "lossless loss reduction exceeded 1e-9");
        const auto Jsp = loss_scalar_lossy(a, sw2, W, -a, tp, opt);
        const auto Jvp = loss_vector_lossy(sys, ctrl, W, tp, opt);
        c.expect(rel(Jsp.J_inf, Jvp.J_inf) <= 1e-9, "lossy loss reduction exceeded 1e-9");

        TriggerParams tz(eps, T, 0.0);
        const auto Js0 = loss_scalar_lossy(a, sw2, W, -a, tz, opt);
        c.expect(rel(Js0.J_inf, Js.J_inf) <= 1e-9, "lossy loss at p=0 vs lossless exceeded 1e-9");
    }
    c.finish();
}

void criterion6() {
    Criterion c(6, "numerical kernels across 25 random covariances");
    std::mt19937_64 rng(777);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 12);
    for (int rep = 0; rep < 25; ++rep) {
        const int d = dim(rng);
        Matrix G(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                G(i, j) = g(rng);
        const Matrix C = G * G.transpose() / d + 0.15 * Matrix::Identity(d, d);
        const double eps = 1.4 * std::sqrt(C.diagonal().maxCoeff());

        // (a) diagonal covariance: product form to 1e-6
        {
            GaussianVector gd(Matrix(C.diagonal().asDiagonal()));
            const auto p = mvn_rectangle_prob(gd, Rectangle::centered(eps, d));
            double prod = 1.0;
            for (int i = 0; i < d; ++i)
                prod *= 2.0 * normal_cdf(eps / std::sqrt(C(i, i))) - 1.0;
            c.expect(std::abs(p.value - prod) <= 1e-6,
                     "diagonal product form mismatch, d=" + std::to_string(d));
        }

        // high-dimensional correlated boxes need a looser budget; the checks
        // below have error allowances far above these tolerances
        QmcOptions qopt;
        qopt.abs_tol = 5e-6;
        qopt.moment_rel_tol = 2e-4;

        GaussianVector gv(C);
        const auto interior =
            rect_truncated_moments(gv, Rectangle::centered(eps, d), {d - 1}, qopt);
        const auto exterior =
            (d > 1) ? exterior_truncated_moments(gv, Rectangle::centered(eps, 1),
                                                 Rectangle::centered(eps, d - 1), qopt)
                    : exterior_truncated_moments(gv, Rectangle::centered(eps, 1),
                                                 Rectangle::centered(eps, 0), qopt);

        // (b) truncated variance vs rejection-sampling oracle (1e6 samples, 3 se)
        {
            Eigen::SelfAdjointEigenSolver<Matrix> es(C);
            const Matrix L =
                es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
            std::mt19937_64 orng(1000 + rep);
            long hits = 0;
            double sum = 0.0, sum2 = 0.0;
            Vector z(d);
            for (long s = 0; s < 1'000'000; ++s) {
                for (int i = 0; i < d; ++i)
                    z(i) = g(orng);
                Vector x = L * z;
                bool inside = true;
                for (int i = 0; i < d && inside; ++i)
                    inside = std::abs(x(i)) <= eps;
                if (!inside)
                    continue;
                ++hits;
                const double v = x(d - 1) * x(d - 1);
                sum += v;
                sum2 += v * v;
            }
            if (hits > 1000) {
                const double m = sum / hits;
                const double se = std::sqrt(std::max(0.0, sum2 / hits - m * m) / hits);
                c.expect(std::abs(interior.second_moment(0, 0) - m) <= 3.0 * se + 1e-12,
                         "interior second moment vs oracle, d=" + std::to_string(d));
            }
        }

        // (c) mass and second-moment mixture identities (shared options)
        {
            Vector lo = Vector::Constant(d, -eps), up = Vector::Constant(d, eps);
            lo(d - 1) = -std::numeric_limits<double>::infinity();
            up(d - 1) = std::numeric_limits<double>::infinity();
            const auto A = rect_truncated_moments(gv, Rectangle(lo, up), {d - 1}, qopt);
            const auto B = rect_truncated_moments(gv, Rectangle::centered(eps, d), {d - 1}, qopt);
            const double mass_err =
                std::abs(A.prob - B.prob - exterior.prob) / std::max(A.prob, 1e-300);
            c.expect(mass_err <= 1e-6, "mass mixture identity, d=" + std::to_string(d));
            const double lhs = A.prob * A.second_moment(0, 0);
            const double rhs =
                B.prob * B.second_moment(0, 0) + exterior.prob * exterior.second_moment(0, 0);
            c.expect(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300) <= 1e-6,
                     "second-moment mixture identity, d=" + std::to_string(d));
        }
    }
    c.finish();
}

void criterion7() {
    Criterion c(7, "byte-identical CSV outputs across repeated runs");
    for (const bool vector_case : {false, true}) {
        ExperimentSpec spec;
        if (vector_case) {
            const auto sys = vector_plant();
            spec.A = sys.A;
            spec.B = sys.B;
            spec.Sigma_w = sys.Sigma_w;
            spec.Sigma_0 = sys.Sigma_0;
            spec.has_K = true;
            spec.K = vector_ctrl().K;
            spec.nu = 2;
            spec.timeout_T = kVT;
            spec.epsilon_grid = {0.5, 1.0};
        } else {
            const auto sys = scalar_plant();
            spec.A = sys.A;
            spec.B = sys.B;
            spec.Sigma_w = sys.Sigma_w;
            spec.Sigma_0 = sys.Sigma_0;
            spec.timeout_T = kT;
            spec.epsilon_grid = {0.0, 1.0};
        }
        spec.p_loss = 0.2;
        spec.modes = {"analytic", "simulate", "baseline"};
        spec.seed = 31;
        spec.replications = 200;
        spec.horizon = 1500;
        std::ostringstream run1, run2;
        run_experiment(spec, run1);
        run_experiment(spec, run2);
        c.expect(!run1.str().empty(), "experiment produced no output");
        c.expect(run1.str() == run2.str(),
                 std::string(vector_case ? "vector" : "scalar") + " sweep not byte-identical");
        // the dumped spec re-parses to the same experiment
        c.expect(parse_config(dump_config(spec)) == spec, "config round-trip mismatch");
    }
    c.finish();
}

} // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    std::printf("%s (%d criterion failures)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
