#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "etc/errors.hpp"
#include "etc/model.hpp"

namespace etc {

// Zero-mean throughout this artifact; the mean field exists for completeness.
struct GaussianVector {
    Vector mean;
    Matrix cov;

    explicit GaussianVector(Matrix cov);
    GaussianVector(Vector mean, Matrix cov);

    int dim() const { return static_cast<int>(cov.rows()); }
};

// Axis-aligned box; +-infinity entries are allowed.
struct Rectangle {
    Vector lower;
    Vector upper;

    Rectangle(Vector lower, Vector upper);

    static Rectangle centered(double eps, int d);    // [-eps, eps]^d
    static Rectangle unbounded(int d);               // (-inf, inf)^d

    int dim() const { return static_cast<int>(lower.size()); }
};

struct TruncatedMoments {
    double prob = 0.0;       // mass of the conditioning region
    Vector mean;             // E[x_sel | region]
    Matrix second_moment;    // E[x_sel x_sel' | region]
    double prob_error = 0.0; // error estimate on prob
    double moment_error = 0.0;
};

// Randomized QMC controls for the Genz separation-of-variables integrator.
struct QmcOptions {
    double abs_tol = 1e-6;          // probability error target
    double moment_rel_tol = 5e-5;   // second-moment error target, relative
    std::uint64_t seed = 0x5e3a1fULL;
    int shifts = 10;
    long points = 0;            // per shift; 0 picks a dimension-based default
    long max_points = 1 << 19;  // per shift, adaptive doubling cap
    double prob_floor = 1e-12;  // guards conditional-moment division
};

struct ProbEstimate {
    double value = 0.0;
    double error = 0.0;
};

// P(lower <= x <= upper) for x ~ g, with an error estimate <= abs_tol.
ProbEstimate mvn_rectangle_prob(const GaussianVector& g, const Rectangle& r,
                                const QmcOptions& opt = {});

// Covariance Xi_{i+1} of (xi_0, ..., xi_i), xi_i = sum_{j<=i} a^j w_{k-j}.
Matrix xi_covariance(double a, double sigma_w2, int i);

// Covariance of (delta_0, ..., delta_i) for the nu-packetized vector loop,
// built from Sigma* = sum_{l<nu} A^l Sigma_w A'^l. Size (i+1)n x (i+1)n.
Matrix delta_covariance(const LinearSystem& sys, int nu, int i);

// Moments of the coordinates `which` of x ~ g conditioned on x in r.
TruncatedMoments rect_truncated_moments(const GaussianVector& g, const Rectangle& r,
                                        const std::vector<int>& which,
                                        const QmcOptions& opt = {});

// Moments of the trailing block (dimension inner_box.dim()) conditioned on
// {leading coords in outer_box} and {trailing block outside inner_box},
// via the set-difference identity on origin-symmetric boxes.
TruncatedMoments exterior_truncated_moments(const GaussianVector& g, const Rectangle& inner_box,
                                            const Rectangle& outer_box, const QmcOptions& opt = {});

// Standard-normal helpers shared with the simulator and tests.
double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

} // namespace etc
