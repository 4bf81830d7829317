#include "etc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "etc/performance.hpp"
#include "etc/simulator.hpp"

namespace etc {

namespace {

using json = nlohmann::ordered_json;

Matrix parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigInvalid(path + ": expected an array of row arrays");
    const auto rows = j.size();
    const auto cols = j[0].size();
    Matrix M(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw ConfigInvalid(path + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number())
                throw ConfigInvalid(path + ": non-numeric entry");
            M(r, c) = j[r][c].get<double>();
        }
    }
    return M;
}

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c)
            row.push_back(M(r, c));
        rows.push_back(row);
    }
    return rows;
}

const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key))
        throw ConfigInvalid(path + "." + key + ": missing");
    return j.at(key);
}

bool mode_on(const ExperimentSpec& s, const char* m) {
    return std::find(s.modes.begin(), s.modes.end(), m) != s.modes.end();
}

// Shortest round-trippable decimal form, locale-independent.
std::string fmt(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << v;
    return os.str();
}

struct Resolved {
    LinearSystem sys;
    DeadBeatController ctrl;
    CostWeights weights;
};

Resolved resolve(const ExperimentSpec& s) {
    LinearSystem sys(s.A, s.B, s.Sigma_w, s.Sigma_0);
    DeadBeatController ctrl =
        s.has_K ? validate_deadbeat_gain(sys, s.K, s.nu > 0 ? s.nu : controllability_index(sys))
                : synthesize_deadbeat_gain(sys);
    Matrix Qx = s.Q_x.size() ? s.Q_x : Matrix::Identity(sys.n(), sys.n());
    Matrix Qu = s.Q_u.size() ? s.Q_u : Matrix::Identity(sys.m(), sys.m());
    return {std::move(sys), DeadBeatController{ctrl.K, ctrl.nu},
            CostWeights(std::move(Qx), std::move(Qu), s.rho)};
}

} // namespace

bool ExperimentSpec::operator==(const ExperimentSpec& o) const {
    const auto eq = [](const Matrix& a, const Matrix& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
    };
    return eq(A, o.A) && eq(B, o.B) && eq(Sigma_w, o.Sigma_w) && eq(Sigma_0, o.Sigma_0) &&
           eq(Q_x, o.Q_x) && eq(Q_u, o.Q_u) && rho == o.rho && has_K == o.has_K &&
           (!has_K || eq(K, o.K)) && nu == o.nu && p_loss == o.p_loss &&
           timeout_T == o.timeout_T && epsilon_grid == o.epsilon_grid && modes == o.modes &&
           seed == o.seed && replications == o.replications && horizon == o.horizon &&
           output == o.output;
}

ExperimentSpec parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentSpec s;
    const json& plant = require(j, "plant", "$");
    s.A = parse_matrix(require(plant, "A", "plant"), "plant.A");
    s.B = parse_matrix(require(plant, "B", "plant"), "plant.B");
    s.Sigma_w = parse_matrix(require(plant, "Sigma_w", "plant"), "plant.Sigma_w");
    s.Sigma_0 = parse_matrix(require(plant, "Sigma_0", "plant"), "plant.Sigma_0");
    if (j.contains("controller")) {
        const json& c = j.at("controller");
        if (c.contains("K")) {
            s.has_K = true;
            s.K = parse_matrix(c.at("K"), "controller.K");
        }
        if (c.contains("nu"))
            s.nu = c.at("nu").get<int>();
    }
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        if (w.contains("Q_x"))
            s.Q_x = parse_matrix(w.at("Q_x"), "weights.Q_x");
        if (w.contains("Q_u"))
            s.Q_u = parse_matrix(w.at("Q_u"), "weights.Q_u");
        if (w.contains("rho"))
            s.rho = w.at("rho").get<double>();
    }
    if (j.contains("channel") && j.at("channel").contains("p_loss"))
        s.p_loss = j.at("channel").at("p_loss").get<double>();
    s.timeout_T = require(require(j, "trigger", "$"), "timeout_T", "trigger").get<int>();
    for (const auto& e : require(j, "epsilon_grid", "$"))
        s.epsilon_grid.push_back(e.get<double>());
    for (const auto& m : require(j, "modes", "$"))
        s.modes.push_back(m.get<std::string>());
    if (j.contains("seed"))
        s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("replications"))
        s.replications = j.at("replications").get<int>();
    if (j.contains("horizon"))
        s.horizon = j.at("horizon").get<long>();
    if (j.contains("output"))
        s.output = j.at("output").get<std::string>();
    return s;
}

ExperimentSpec load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw ConfigInvalid("cannot open config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

std::string dump_config(const ExperimentSpec& s) {
    json j;
    j["plant"] = {{"A", matrix_to_json(s.A)},
                  {"B", matrix_to_json(s.B)},
                  {"Sigma_w", matrix_to_json(s.Sigma_w)},
                  {"Sigma_0", matrix_to_json(s.Sigma_0)}};
    json c = json::object();
    if (s.has_K)
        c["K"] = matrix_to_json(s.K);
    if (s.nu > 0)
        c["nu"] = s.nu;
    if (!c.empty())
        j["controller"] = c;
    json w = json::object();
    if (s.Q_x.size())
        w["Q_x"] = matrix_to_json(s.Q_x);
    if (s.Q_u.size())
        w["Q_u"] = matrix_to_json(s.Q_u);
    w["rho"] = s.rho;
    j["weights"] = w;
    j["channel"] = {{"p_loss", s.p_loss}};
    j["trigger"] = {{"timeout_T", s.timeout_T}};
    j["epsilon_grid"] = s.epsilon_grid;
    j["modes"] = s.modes;
    j["seed"] = s.seed;
    j["replications"] = s.replications;
    j["horizon"] = s.horizon;
    if (!s.output.empty())
        j["output"] = s.output;
    return j.dump(2) + "\n";
}

std::vector<std::string> validate_config(const ExperimentSpec& s) {
    std::vector<std::string> diags;
    const auto bad = [&](const std::string& msg) { diags.push_back(msg); };

    const Eigen::Index n = s.A.rows();
    if (n == 0 || s.A.cols() != n)
        bad("plant.A: must be square and non-empty");
    if (s.B.rows() != n)
        bad("plant.B: row count must match plant.A");
    if (s.B.cols() >= 1 && s.B.rows() >= s.B.cols()) {
        Eigen::ColPivHouseholderQR<Matrix> qr(s.B);
        if (qr.rank() < s.B.cols())
            bad("plant.B: must have full column rank");
    } else if (s.B.cols() >= 1) {
        bad("plant.B: more inputs than states");
    }
    if (s.Sigma_w.rows() != n || s.Sigma_w.cols() != n)
        bad("plant.Sigma_w: must be n x n");
    if (s.Sigma_0.rows() != n || s.Sigma_0.cols() != n)
        bad("plant.Sigma_0: must be n x n");
    if (s.Q_x.size() && (s.Q_x.rows() != n || s.Q_x.cols() != n))
        bad("weights.Q_x: must be n x n");
    if (s.Q_u.size() && (s.Q_u.rows() != s.B.cols() || s.Q_u.cols() != s.B.cols()))
        bad("weights.Q_u: must be m x m");
    if (s.rho < 0.0)
        bad("weights.rho: must be nonnegative");
    if (s.has_K && (s.K.rows() != s.B.cols() || s.K.cols() != n))
        bad("controller.K: must be m x n");
    if (s.p_loss < 0.0 || s.p_loss >= 1.0)
        bad("channel.p_loss: must lie in [0, 1)");
    if (s.timeout_T < 1)
        bad("trigger.timeout_T: must be >= 1");
    if (s.epsilon_grid.empty())
        bad("epsilon_grid: must be non-empty");
    if (!std::is_sorted(s.epsilon_grid.begin(), s.epsilon_grid.end()))
        bad("epsilon_grid: must be sorted ascending");
    for (double e : s.epsilon_grid)
        if (e < 0.0) {
            bad("epsilon_grid: entries must be nonnegative");
            break;
        }
    if (s.modes.empty())
        bad("modes: must request at least one of analytic/simulate/baseline");
    for (const auto& m : s.modes)
        if (m != "analytic" && m != "simulate" && m != "baseline")
            bad("modes: unknown mode '" + m + "'");
    if (s.replications < 1)
        bad("replications: must be >= 1");
    if (s.horizon < 1)
        bad("horizon: must be >= 1");

    if (diags.empty()) {
        try {
            Resolved r = resolve(s);
            if (s.p_loss > 0.0 && mode_on(s, "analytic")) {
                const double rho_A = spectral_radius(r.sys.A);
                if (s.p_loss * rho_A * rho_A >= 1.0)
                    bad("channel.p_loss: p_loss * lambda_max(A)^2 = " +
                        fmt(s.p_loss * rho_A * rho_A) +
                        " >= 1; the expected loss is unbounded");
            }
        } catch (const Error& e) {
            bad(std::string("plant/controller: ") + e.what());
        }
    }
    return diags;
}

void run_experiment(const ExperimentSpec& s, std::ostream& out) {
    const auto diags = validate_config(s);
    if (!diags.empty()) {
        std::string joined;
        for (const auto& d : diags)
            joined += (joined.empty() ? "" : "; ") + d;
        throw ConfigInvalid(joined);
    }
    const Resolved r = resolve(s);
    const bool scalar = (r.sys.n() == 1 && r.ctrl.nu == 1);
    const bool lossy = s.p_loss > 0.0;
    const bool w_analytic = mode_on(s, "analytic");
    const bool w_sim = mode_on(s, "simulate");
    const bool w_base = mode_on(s, "baseline");

    out << "epsilon,attempt_rate_analytic,success_rate_analytic,J_analytic,"
           "attempt_rate_sim,attempt_rate_sim_stderr,success_rate_sim,success_rate_sim_stderr,"
           "J_sim,J_sim_stderr";
    if (w_base)
        out << ",attempt_rate_baseline,attempt_rate_baseline_stderr,"
               "success_rate_baseline,success_rate_baseline_stderr,J_baseline,J_baseline_stderr";
    out << "\n";

    for (std::size_t gi = 0; gi < s.epsilon_grid.size(); ++gi) {
        const TriggerParams trig(s.epsilon_grid[gi], s.timeout_T, s.p_loss);
        std::vector<std::string> cells;
        cells.push_back(fmt(trig.epsilon));
        if (w_analytic) {
            LossyRates rates{};
            LossBreakdown loss;
            if (scalar) {
                const double a = r.sys.A(0, 0), sw2 = r.sys.Sigma_w(0, 0);
                const double K = r.ctrl.K(0, 0);
                const auto p = crossing_probs_scalar(a, sw2, trig);
                rates = lossy ? rate_scalar_lossy(p, trig.timeout_T, s.p_loss)
                              : LossyRates{rate_scalar_lossless(p, trig.timeout_T),
                                           rate_scalar_lossless(p, trig.timeout_T)};
                loss = lossy ? loss_scalar_lossy(a, sw2, r.weights, K, trig)
                             : loss_scalar_lossless(a, sw2, r.weights, K, trig);
            } else {
                const auto p = crossing_probs_vector(r.sys, r.ctrl, trig);
                rates = lossy
                            ? rate_vector_lossy(p, trig.timeout_T, r.ctrl.nu, s.p_loss)
                            : LossyRates{rate_vector_lossless(p, trig.timeout_T, r.ctrl.nu),
                                         rate_vector_lossless(p, trig.timeout_T, r.ctrl.nu)};
                loss = lossy ? loss_vector_lossy(r.sys, r.ctrl, r.weights, trig)
                             : loss_vector_lossless(r.sys, r.ctrl, r.weights, trig);
            }
            cells.push_back(fmt(rates.attempt_rate));
            cells.push_back(fmt(rates.success_rate));
            cells.push_back(fmt(loss.J_inf));
        } else {
            cells.insert(cells.end(), 3, "");
        }
        SimConfig sc{r.sys,     r.ctrl, r.weights,          trig,
                     s.horizon, s.replications, s.seed + gi, "", 0};
        if (w_sim) {
            const SimResult sim = simulate(sc);
            cells.push_back(fmt(sim.attempt_rate.mean));
            cells.push_back(fmt(sim.attempt_rate.stderr_));
            cells.push_back(fmt(sim.success_rate.mean));
            cells.push_back(fmt(sim.success_rate.stderr_));
            cells.push_back(fmt(sim.loss.mean));
            cells.push_back(fmt(sim.loss.stderr_));
        } else {
            cells.insert(cells.end(), 6, "");
        }
        if (w_base) {
            const SimResult base = simulate_nonpacketized(sc);
            cells.push_back(fmt(base.attempt_rate.mean));
            cells.push_back(fmt(base.attempt_rate.stderr_));
            cells.push_back(fmt(base.success_rate.mean));
            cells.push_back(fmt(base.success_rate.stderr_));
            cells.push_back(fmt(base.loss.mean));
            cells.push_back(fmt(base.loss.stderr_));
        }
        for (std::size_t i = 0; i < cells.size(); ++i)
            out << (i ? "," : "") << cells[i];
        out << "\n";
    }
    out.flush();
}

void run_experiment(const ExperimentSpec& s) {
    if (s.output.empty()) {
        run_experiment(s, std::cout);
        return;
    }
    std::ofstream f(s.output);
    if (!f)
        throw ConfigInvalid("cannot open output file: " + s.output);
    run_experiment(s, f);
}

} // namespace etc
