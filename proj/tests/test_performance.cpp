#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "etc/performance.hpp"

using namespace etc;

namespace {

LinearSystem bench_plant() {
    Matrix A(2, 2), B(2, 1), Sw(2, 2), S0(2, 2);
    A << 2.2, -1.2, 1.0, 0.0;
    B << 0.8, 0.4;
    Sw << 1.0, 0.2, 0.2, 1.0;
    S0 << 6.224, 2.16, 2.16, 2.0;
    return LinearSystem(A, B, Sw, S0);
}

DeadBeatController bench_ctrl() {
    Matrix K(1, 2);
    K << -19.0 / 8.0, -3.0 / 4.0;
    return DeadBeatController{K, 2};
}

const CostWeights kUnitW = CostWeights::scalar(1.0, 1.0, 0.0);

} // namespace

TEST_CASE("always-transmit loss equals the one-step noise power") {
    TriggerParams trig(0.0, 5, 0.0);
    auto lb = loss_scalar_lossless(1.6, 1.44, kUnitW, -1.6, trig);
    CHECK(lb.J_inf == doctest::Approx(1.44).epsilon(1e-9));
    CHECK(lb.terms.size() == 6);
    CHECK(lb.terms[0] == doctest::Approx(1.44).epsilon(1e-9));
    for (std::size_t i = 1; i < lb.terms.size(); ++i)
        CHECK(lb.terms[i] == 0.0);
}

TEST_CASE("always-transmit lossy loss has a closed form") {
    // J = sigma_w^2 / (1 - p a^2) at eps = 0
    TriggerParams trig(0.0, 5, 0.2);
    auto lb = loss_scalar_lossy(1.6, 1.44, kUnitW, -1.6, trig);
    CHECK(lb.J_inf == doctest::Approx(1.44 / 0.488).epsilon(1e-9));
    CHECK(lb.stability_margin == doctest::Approx(0.488).epsilon(1e-12));
}

TEST_CASE("unstable loss-channel combination is rejected") {
    TriggerParams trig(1.0, 5, 0.4);  // 0.4 * 1.6^2 = 1.024 >= 1
    CHECK_THROWS_AS(loss_scalar_lossy(1.6, 1.44, kUnitW, -1.6, trig), UnstableConfiguration);
    TriggerParams trig_v(1.0, 4, 0.7);  // 0.7 * 1.2^2 = 1.008 >= 1
    CHECK_THROWS_AS(loss_vector_lossy(bench_plant(), bench_ctrl(),
                                      CostWeights(Matrix::Identity(2, 2), Matrix::Identity(1, 1)),
                                      trig_v),
                    UnstableConfiguration);
}

TEST_CASE("per-state terms sum to the total") {
    TriggerParams trig(1.0, 4, 0.0);
    auto lb = loss_scalar_lossless(1.6, 1.44, kUnitW, -1.6, trig);
    const double sum = std::accumulate(lb.terms.begin(), lb.terms.end(), 0.0);
    CHECK(lb.J_inf == doctest::Approx(sum).epsilon(1e-15));
    for (double t : lb.terms)
        CHECK(t >= 0.0);
    CHECK(lb.J_inf > 1.44);  // withholding transmissions costs more than always sending
}

TEST_CASE("lossy loss reduces to lossless at p_loss = 0") {
    TriggerParams l0(0.8, 3, 0.0);
    auto a = loss_scalar_lossless(1.5, 1.0, kUnitW, -1.5, l0);
    auto b = loss_scalar_lossy(1.5, 1.0, kUnitW, -1.5, l0);
    CHECK(b.J_inf == doctest::Approx(a.J_inf).epsilon(1e-12));

    auto sys = bench_plant();
    auto ctrl = bench_ctrl();
    CostWeights w(Matrix::Identity(2, 2), Matrix::Identity(1, 1), 0.0);
    TriggerParams tv(1.0, 4, 0.0);
    auto av = loss_vector_lossless(sys, ctrl, w, tv);
    auto bv = loss_vector_lossy(sys, ctrl, w, tv);
    CHECK(bv.J_inf == doctest::Approx(av.J_inf).epsilon(1e-12));
}

TEST_CASE("vector loss at n = nu = 1 matches the scalar loss") {
    const double a = 1.4, sw2 = 0.9;
    auto sys = LinearSystem::scalar(a, 1.0, sw2, 1.0);
    DeadBeatController ctrl{Matrix::Constant(1, 1, -a), 1};
    for (double pl : {0.0, 0.25}) {
        TriggerParams trig(1.1, 3, pl);
        auto s = pl > 0.0 ? loss_scalar_lossy(a, sw2, kUnitW, -a, trig)
                          : loss_scalar_lossless(a, sw2, kUnitW, -a, trig);
        auto v = pl > 0.0 ? loss_vector_lossy(sys, ctrl, kUnitW, trig)
                          : loss_vector_lossless(sys, ctrl, kUnitW, trig);
        CHECK(v.J_inf == doctest::Approx(s.J_inf).epsilon(1e-9));
        REQUIRE(v.terms.size() == s.terms.size());
        for (std::size_t i = 0; i < s.terms.size(); ++i)
            CHECK(v.terms[i] == doctest::Approx(s.terms[i]).epsilon(1e-9));
    }
}

TEST_CASE("vector always-transmit endpoint") {
    auto sys = bench_plant();
    auto ctrl = bench_ctrl();
    CostWeights w(Matrix::Identity(2, 2), Matrix::Identity(1, 1), 0.0);
    TriggerParams trig(0.0, 4, 0.0);
    auto lb = loss_vector_lossless(sys, ctrl, w, trig);
    // pi_00 = 1/nu; delivered windows alternate fresh-noise and rolled-out steps
    Matrix Sstar = sys.Sigma_w + sys.A * sys.Sigma_w * sys.A.transpose();
    Matrix Ac = sys.A + sys.B * ctrl.K;
    double X = Sstar.trace() + (Ac.transpose() * Ac * Sstar).trace();
    double Z = sys.Sigma_w.trace();
    CHECK(lb.J_inf == doctest::Approx(0.5 * (X + Z)).epsilon(1e-9));
}

TEST_CASE("control-effort weighting increases the reported loss") {
    TriggerParams trig(1.0, 3, 0.0);
    auto cheap = loss_scalar_lossless(1.6, 1.44, CostWeights::scalar(1.0, 1.0, 0.0), -1.6, trig);
    auto dear = loss_scalar_lossless(1.6, 1.44, CostWeights::scalar(1.0, 1.0, 0.5), -1.6, trig);
    CHECK(dear.J_inf > cheap.J_inf);
}
