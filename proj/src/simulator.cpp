#include "etc/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>

namespace etc {

namespace {

constexpr double kOverflowNorm = 1e150;

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct RepOutcome {
    double success_rate = 0.0;
    double attempt_rate = 0.0;
    double loss = 0.0;
};

struct TraceRow {
    long step;
    Vector state;
    Vector input;
    bool triggered, timeout, attempted, delivered, dropped;
};

Matrix safe_cholesky(const Matrix& S, const char* what) {
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
        // Allow positive-semidefinite inputs (e.g. a zero initial covariance).
        Eigen::SelfAdjointEigenSolver<Matrix> es(S);
        if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + S.norm()))
            throw Error(std::string(what) + " must be positive semidefinite");
        Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return es.eigenvectors() * d.asDiagonal();
    }
    return llt.matrixL();
}

RepOutcome run_replication(const SimConfig& cfg, int nu_eff, const Matrix& L0, const Matrix& Lw,
                           const std::vector<Matrix>& gains, std::uint64_t rep_seed,
                           std::vector<TraceRow>* trace) {
    const int n = cfg.sys.n();
    const int m = cfg.sys.m();
    const int T = cfg.trig.timeout_T;
    const double eps = cfg.trig.epsilon;
    const double pl = cfg.trig.p_loss;

    std::mt19937_64 rng(rep_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto draw = [&](int d) {
        Vector z(d);
        for (int i = 0; i < d; ++i)
            z(i) = gauss(rng);
        return z;
    };

    Vector x = L0 * draw(n);
    int r = 0;
    bool tx = true;    // the packet for this step was delivered
    bool fail = false; // the packet for this step was attempted and dropped
    bool ev_trig = true, ev_timeout = false;
    std::deque<Vector> buf;

    long succ = 0, att = 0;
    double loss = 0.0;
    for (long k = 0; k < cfg.horizon; ++k) {
        Vector u = Vector::Zero(m);
        if (tx) {
            buf.clear();
            u = gains[0] * x;
            for (int j = 1; j < nu_eff; ++j)
                buf.push_back(gains[j] * x);
        } else if (!buf.empty()) {
            u = buf.front();
            buf.pop_front();
        }
        loss += x.dot(cfg.weights.Q_x * x) + cfg.weights.rho * u.dot(cfg.weights.Q_u * u);
        if (tx || fail)
            ++att;
        if (tx)
            ++succ;
        if (trace)
            trace->push_back({k, x, u, ev_trig, ev_timeout, tx || fail, tx, fail});

        Vector xn = cfg.sys.A * x + cfg.sys.B * u + Lw * draw(n);
        if (xn.lpNorm<Eigen::Infinity>() > kOverflowNorm)
            throw UnstableConfiguration("simulated state overflow; configuration diverges");

        if (!buf.empty()) {
            // Buffered commands are still rolling out: the loop is inactive
            // and the timeout counter is pinned at 0.
            tx = fail = false;
            ev_trig = ev_timeout = false;
            r = 0;
        } else {
            ev_trig = xn.lpNorm<Eigen::Infinity>() > eps;
            ev_timeout = (r == T);
            const bool attempt = fail || ev_trig || ev_timeout;
            if (attempt) {
                if (unif(rng) < pl) {
                    fail = true;
                    tx = false;
                } else {
                    fail = false;
                    tx = true;
                    r = 0;
                }
            } else {
                fail = tx = false;
                ++r;
            }
        }
        x = xn;
    }
    const double H = static_cast<double>(cfg.horizon);
    return {static_cast<double>(succ) / H, static_cast<double>(att) / H, loss / H};
}

int worker_count(int reps) {
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ETC_WORKERS")) {
        const int v = std::atoi(env);
        if (v >= 1)
            workers = v;
    }
    return std::clamp(workers, 1, std::max(1, reps));
}

Stat reduce(const std::vector<double>& v) {
    const double N = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= N;
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    const double sd = (v.size() > 1) ? std::sqrt(ss / (N - 1.0)) : 0.0;
    return {mean, sd / std::sqrt(N)};
}

void write_trace(const std::string& path, const std::vector<TraceRow>& rows, int n, int m) {
    std::ofstream f(path);
    if (!f)
        throw Error("cannot open trace file: " + path);
    f << "step";
    for (int i = 0; i < n; ++i)
        f << ",x" << i;
    for (int i = 0; i < m; ++i)
        f << ",u" << i;
    f << ",triggered,timeout,attempted,delivered,dropped\n";
    f.precision(17);
    for (const auto& row : rows) {
        f << row.step;
        for (int i = 0; i < n; ++i)
            f << ',' << row.state(i);
        for (int i = 0; i < m; ++i)
            f << ',' << row.input(i);
        f << ',' << row.triggered << ',' << row.timeout << ',' << row.attempted << ','
          << row.delivered << ',' << row.dropped << '\n';
    }
}

SimResult run(const SimConfig& cfg, int nu_eff) {
    if (cfg.replications < 1)
        throw Error("replications must be >= 1");
    if (cfg.horizon < 1)
        throw Error("horizon must be >= 1");
    const int n = cfg.sys.n();
    if (cfg.ctrl.K.cols() != n || cfg.weights.Q_x.rows() != n)
        throw DimensionMismatch("controller/weights do not match the plant dimension");

    const Matrix L0 = safe_cholesky(cfg.sys.Sigma_0, "Sigma_0");
    const Matrix Lw = safe_cholesky(cfg.sys.Sigma_w, "Sigma_w");
    // gains[j] = K (A+BK)^j: the packet payload as a function of the state.
    std::vector<Matrix> gains(nu_eff);
    const Matrix Ac = cfg.sys.A + cfg.sys.B * cfg.ctrl.K;
    Matrix Acj = Matrix::Identity(n, n);
    for (int j = 0; j < nu_eff; ++j) {
        gains[j] = cfg.ctrl.K * Acj;
        Acj = Acj * Ac;
    }

    std::vector<std::uint64_t> rep_seeds(cfg.replications);
    std::uint64_t state = cfg.seed;
    for (auto& s : rep_seeds)
        s = splitmix64(state);

    std::vector<RepOutcome> outcomes(cfg.replications);
    std::exception_ptr first_error;
    std::mutex err_mu;
    const int workers = worker_count(cfg.replications);
    std::atomic<int> next{0};
    const auto work = [&] {
        for (;;) {
            const int rep = next.fetch_add(1);
            if (rep >= cfg.replications)
                return;
            try {
                std::vector<TraceRow> trace;
                const bool want_trace = (rep == 0) && !cfg.trace_path.empty();
                outcomes[rep] = run_replication(cfg, nu_eff, L0, Lw, gains, rep_seeds[rep],
                                                want_trace ? &trace : nullptr);
                if (want_trace) {
                    const long limit = cfg.trace_steps > 0 ? cfg.trace_steps : cfg.horizon;
                    if (static_cast<long>(trace.size()) > limit)
                        trace.resize(limit);
                    write_trace(cfg.trace_path, trace, n, cfg.sys.m());
                }
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(work);
        for (auto& t : pool)
            t.join();
    }
    if (first_error)
        std::rethrow_exception(first_error);

    std::vector<double> sr(cfg.replications), ar(cfg.replications), lo(cfg.replications);
    for (int i = 0; i < cfg.replications; ++i) {
        sr[i] = outcomes[i].success_rate;
        ar[i] = outcomes[i].attempt_rate;
        lo[i] = outcomes[i].loss;
    }
    return {reduce(sr), reduce(ar), reduce(lo), cfg.replications};
}

} // namespace

SimResult simulate(const SimConfig& cfg) { return run(cfg, cfg.ctrl.nu); }

SimResult simulate_nonpacketized(const SimConfig& cfg) { return run(cfg, 1); }

} // namespace etc
