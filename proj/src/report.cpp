#include "agediff/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>

namespace agediff {

namespace {

using nlohmann::ordered_json;

/// JSON has no literal for non-finite numbers; encode them as strings so the
/// report stays parseable instead of silently degrading to null.
ordered_json json_num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

std::string hash_hex(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "0x%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_trajectory_csv(std::ostream& out, const Scenario& s,
                          const std::vector<TrajectorySnapshot>& snaps) {
    const double delta = s.age.delta();
    out << "t,a,cell,value\n";
    for (const TrajectorySnapshot& snap : snaps) {
        for (int j = 0; j <= s.age.n_age; ++j) {
            const Vector& x = snap.u.v[static_cast<std::size_t>(j)];
            for (int i = 0; i < x.size(); ++i) {
                out << fmt_double(snap.t) << ',' << fmt_double(j * delta) << ',' << i
                    << ',' << fmt_double(x[i]) << '\n';
            }
        }
    }
}

void write_summary_csv(std::ostream& out, const Scenario& s,
                       const std::vector<TrajectorySnapshot>& snaps) {
    out << "t,total_population,boundary_norm\n";
    for (const TrajectorySnapshot& snap : snaps) {
        out << fmt_double(snap.t) << ',' << fmt_double(snap.total_population) << ','
            << fmt_double(s.state_norm(snap.u.v.front())) << '\n';
    }
}

void write_birth_csv(std::ostream& out, const BirthTrajectory& births) {
    if (births.B.empty()) {
        out << "t\n";
        return;
    }
    const Eigen::Index m = births.B.front().size();
    out << 't';
    for (Eigen::Index i = 0; i < m; ++i) out << ",B" << i;
    out << '\n';
    for (int k = 0; k <= births.steps(); ++k) {
        out << fmt_double(births.time(k));
        const Vector& b = births.B[static_cast<std::size_t>(k)];
        for (Eigen::Index i = 0; i < m; ++i) out << ',' << fmt_double(b[i]);
        out << '\n';
    }
}

void write_residuals_csv(std::ostream& out, const AegReport& report) {
    out << "t,residual\n";
    for (std::size_t k = 0; k < report.times.size(); ++k) {
        out << fmt_double(report.times[k]) << ','
            << fmt_double(report.residuals[k]) << '\n';
    }
}

void write_profile_csv(std::ostream& out, const Scenario& s,
                       const AgeDensity& u) {
    const double delta = s.age.delta();
    out << "a,cell,value\n";
    for (int j = 0; j <= s.age.n_age; ++j) {
        const Vector& x = u.v[static_cast<std::size_t>(j)];
        for (int i = 0; i < x.size(); ++i) {
            out << fmt_double(j * delta) << ',' << i << ',' << fmt_double(x[i])
                << '\n';
        }
    }
}

nlohmann::ordered_json run_header_json(const ParsedScenario& ps) {
    const ScenarioConfig& cfg = ps.config;
    ordered_json j;
    j["scenario_hash"] = hash_hex(ps.source_hash);
    j["backend"] =
        cfg.backend == Backend::diffusion1d ? "diffusion1d" : "matrix";
    ordered_json grid;
    grid["a_max"] = json_num(cfg.age.a_max);
    grid["n_age"] = cfg.age.n_age;
    grid["delta"] = json_num(cfg.age.delta());
    grid["infinite_age"] = cfg.infinite_age;
    if (cfg.backend == Backend::diffusion1d) {
        grid["x_min"] = json_num(cfg.space.x_min);
        grid["x_max"] = json_num(cfg.space.x_max);
        grid["n_cells"] = cfg.space.n_cells;
        grid["h"] = json_num(cfg.space.h());
    }
    j["grid"] = grid;
    ordered_json coeffs;
    if (cfg.backend == Backend::diffusion1d) coeffs["d"] = ps.d_src;
    coeffs["m"] = ps.m_src;
    coeffs["b"] = ps.b_src;
    coeffs["holder_rho"] = json_num(cfg.coeffs.holder_rho);
    j["coefficients"] = coeffs;
    ordered_json run;
    run["T"] = json_num(ps.run.T);
    run["stride"] = ps.run.stride;
    j["run"] = run;
    return j;
}

nlohmann::ordered_json spectral_json(const Scenario& s, const SpectralData& d,
                                     double root_tol) {
    ordered_json j;
    j["lambda0"] = json_num(d.lambda0);
    j["root_tol"] = json_num(root_tol);
    j["r_of_Q0"] = json_num(d.r_of_Q0);
    j["projection_denominator"] = json_num(d.denom);
    j["growth_bound"] = json_num(d.omega_hat);
    j["state_dim"] = s.dim();
    ordered_json zeta = ordered_json::array();
    for (Eigen::Index i = 0; i < d.zeta.size(); ++i)
        zeta.push_back(json_num(d.zeta[i]));
    j["zeta"] = zeta;
    ordered_json dual = ordered_json::array();
    for (Eigen::Index i = 0; i < d.zeta_dual.size(); ++i)
        dual.push_back(json_num(d.zeta_dual[i]));
    j["zeta_dual"] = dual;
    return j;
}

nlohmann::ordered_json trichotomy_json(const TrichotomyVerdict& v,
                                       double band_tol) {
    ordered_json j;
    j["verdict"] = to_string(v.verdict);
    j["r_of_Q0"] = json_num(v.r_of_Q0);
    j["band_tol"] = json_num(band_tol);
    if (v.lambda0.has_value())
        j["lambda0"] = json_num(*v.lambda0);
    else
        j["lambda0"] = nullptr;
    return j;
}

nlohmann::ordered_json aeg_json(const AegReport& r) {
    ordered_json j;
    j["lambda0"] = json_num(r.lambda0);
    j["decay_rate"] = json_num(r.epsilon);
    j["amplitude"] = json_num(r.amplitude);
    j["converged_early"] = r.converged_early;
    j["passed"] = r.passed;
    j["pass_rule"] = "fitted decay rate > 0, or residuals at roundoff floor";
    ordered_json samples = ordered_json::array();
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        ordered_json row;
        row["t"] = json_num(r.times[k]);
        row["residual"] = json_num(r.residuals[k]);
        samples.push_back(row);
    }
    j["residuals"] = samples;
    return j;
}

}  // namespace agediff
