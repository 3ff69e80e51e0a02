#include "agediff/evolution.hpp"
#include "agediff/expr.hpp"
#include "agediff/model.hpp"
#include "agediff/renewal.hpp"
#include "agediff/report.hpp"
#include "agediff/scenario_file.hpp"
#include "agediff/selfcheck.hpp"
#include "agediff/semigroup.hpp"
#include "agediff/spectral.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace agediff;
using nlohmann::ordered_json;

struct CommonOpts {
    std::string scenario_path;
    double delta = 0.0;  // 0 keeps the scenario file's grid
    double T = 0.0;      // 0 keeps the scenario file's horizon
    int stride = 0;      // 0 keeps the scenario file's stride
    std::string out;     // empty writes to stdout
};

ParsedScenario load_with_overrides(const CommonOpts& o) {
    ParsedScenario ps = load_scenario(o.scenario_path);
    if (o.delta > 0.0) {
        const double n_real = ps.config.age.a_max / o.delta;
        const long n = std::lround(n_real);
        if (n < 2 || std::abs(n_real - static_cast<double>(n)) >
                         1e-9 * std::max(1.0, n_real))
            throw Error(
                "--delta must divide a_max into at least 2 whole steps");
        ps.config.age.n_age = static_cast<int>(n);
    }
    if (o.T > 0.0) ps.run.T = o.T;
    if (o.stride > 0) ps.run.stride = o.stride;
    return ps;
}

void write_to(const std::string& path,
              const std::function<void(std::ostream&)>& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open output file '" + path + "'");
    fn(f);
    if (!f) throw Error("failed while writing '" + path + "'");
}

void write_json(const std::string& path, const ordered_json& j) {
    write_to(path, [&](std::ostream& os) { os << j.dump(2) << "\n"; });
}

AgeDensity initial_density(const Scenario& s, const std::string& text) {
    const expr::Expression e = expr::Expression::parse(text);
    return AgeDensity::sampled(
        s, [&e](double a, double x) { return e.eval(a, x); });
}

NonlinearMortality parse_mortality(const std::string& mode,
                                   const Scenario& s) {
    if (mode == "logistic") return NonlinearMortality::logistic(s);
    if (mode.rfind("const:", 0) == 0) {
        const std::string num = mode.substr(6);
        char* end = nullptr;
        const double v = std::strtod(num.c_str(), &end);
        if (end == num.c_str() || *end != '\0' || !std::isfinite(v) || v < 0.0)
            throw Error("--semilinear const:VALUE needs a nonnegative number");
        return NonlinearMortality::constant(s, v);
    }
    throw Error("unknown --semilinear mode '" + mode +
                "' (use logistic or const:VALUE)");
}

int cmd_simulate(const CommonOpts& o, const std::string& phi_expr,
                 const std::string& semilinear,
                 const std::string& trajectory_path,
                 const std::string& births_path,
                 const std::string& report_path) {
    const ParsedScenario ps = load_with_overrides(o);
    const Scenario s = build_scenario(ps.config);
    const PropagatorCache c = build_propagators(s);
    const AgeDensity phi = initial_density(s, phi_expr);

    std::vector<TrajectorySnapshot> snaps;
    if (semilinear == "none")
        snaps = evolve_trajectory(s, c, phi, ps.run.T, ps.run.stride);
    else
        snaps = solve_semilinear(s, c, parse_mortality(semilinear, s), phi,
                                 ps.run.T, ps.run.stride);

    write_to(o.out, [&](std::ostream& os) { write_summary_csv(os, s, snaps); });
    if (!trajectory_path.empty())
        write_to(trajectory_path,
                 [&](std::ostream& os) { write_trajectory_csv(os, s, snaps); });
    if (!births_path.empty()) {
        if (semilinear != "none")
            throw Error("--births reports the linear renewal problem; it "
                        "cannot be combined with --semilinear");
        const BirthTrajectory births = solve_birth(s, c, phi, ps.run.T);
        write_to(births_path,
                 [&](std::ostream& os) { write_birth_csv(os, births); });
    }
    if (!report_path.empty()) {
        ordered_json j;
        j["meta"] = run_header_json(ps);
        ordered_json sim;
        sim["mode"] = semilinear == "none" ? "linear" : semilinear;
        sim["snapshots"] = snaps.size();
        sim["final_t"] = snaps.back().t;
        sim["final_total_population"] = snaps.back().total_population;
        j["simulate"] = sim;
        write_json(report_path, j);
    }
    return 0;
}

int cmd_spectral(const CommonOpts& o, double root_tol,
                 const std::string& profile_path) {
    const ParsedScenario ps = load_with_overrides(o);
    const Scenario s = build_scenario(ps.config);
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c, root_tol);
    ordered_json j;
    j["meta"] = run_header_json(ps);
    j["spectral"] = spectral_json(s, data, root_tol);
    write_json(o.out, j);
    if (!profile_path.empty()) {
        const AgeDensity star = eigen_profile(s, c, data);
        write_to(profile_path,
                 [&](std::ostream& os) { write_profile_csv(os, s, star); });
    }
    return 0;
}

int cmd_classify(const CommonOpts& o, double band_tol) {
    const ParsedScenario ps = load_with_overrides(o);
    const Scenario s = build_scenario(ps.config);
    const PropagatorCache c = build_propagators(s);
    const TrichotomyVerdict v = classify_stability(s, c, band_tol);
    ordered_json j;
    j["meta"] = run_header_json(ps);
    j["trichotomy"] = trichotomy_json(v, band_tol);
    write_json(o.out, j);
    return 0;
}

int cmd_aeg(const CommonOpts& o, const std::string& phi_expr, double window,
            const std::string& residuals_path) {
    const ParsedScenario ps = load_with_overrides(o);
    const Scenario s = build_scenario(ps.config);
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    const AgeDensity phi = initial_density(s, phi_expr);
    const std::optional<double> win =
        window > 0.0 ? std::optional<double>(window) : std::nullopt;
    const AegReport rep =
        aeg_report(s, c, data, phi, ps.run.T, ps.run.stride, win);
    ordered_json j;
    j["meta"] = run_header_json(ps);
    j["aeg"] = aeg_json(rep);
    write_json(o.out, j);
    if (!residuals_path.empty())
        write_to(residuals_path,
                 [&](std::ostream& os) { write_residuals_csv(os, rep); });
    return rep.passed ? 0 : 1;
}

int cmd_resolvent_check(const CommonOpts& o, double lambda, double tol,
                        const std::string& phi_expr,
                        const std::string& profile_path) {
    const ParsedScenario ps = load_with_overrides(o);
    const Scenario s = build_scenario(ps.config);
    const PropagatorCache c = build_propagators(s);
    const AgeDensity phi = initial_density(s, phi_expr);
    const AgeDensity psi = resolvent(s, c, lambda, phi);
    const DomainCheck dc = check_generator_domain(s, c, lambda, phi, psi);
    const bool pass = dc.mild_residual <= tol && dc.boundary_residual <= tol;
    ordered_json j;
    j["meta"] = run_header_json(ps);
    ordered_json res;
    res["lambda"] = lambda;
    res["mild_residual"] = dc.mild_residual;
    res["boundary_residual"] = dc.boundary_residual;
    res["tol"] = tol;
    res["passed"] = pass;
    j["resolvent"] = res;
    write_json(o.out, j);
    if (!profile_path.empty())
        write_to(profile_path,
                 [&](std::ostream& os) { write_profile_csv(os, s, psi); });
    return pass ? 0 : 1;
}

int cmd_selfcheck(const std::string& out_path) {
    const std::vector<CriterionResult> results =
        run_acceptance_suite(std::cout);
    if (!out_path.empty()) {
        ordered_json arr = ordered_json::array();
        for (const CriterionResult& r : results) {
            ordered_json row;
            row["criterion"] = r.id;
            row["name"] = r.name;
            row["passed"] = r.passed;
            row["detail"] = r.detail;
            arr.push_back(row);
        }
        write_json(out_path, arr);
    }
    return all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"age-structured populations with spatial diffusion: "
                 "semigroup evolution, growth rate, spectral projection"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string phi_expr = "1";
    std::string semilinear = "none";
    std::string trajectory_path, births_path, report_path, profile_path,
        residuals_path;
    double window = 0.0;
    double lambda = 0.0;
    double root_tol = 1e-10;
    double band_tol = 1e-8;
    double res_tol = 1e-10;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--scenario", common.scenario_path, "scenario file")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--delta", common.delta,
                        "age/time step override; must divide a_max");
        cmd->add_option("--out", common.out, "output file (default: stdout)");
    };

    CLI::App* sim = app.add_subcommand(
        "simulate", "evolve the population and write the summary table");
    add_common(sim);
    sim->add_option("--T", common.T, "time horizon override");
    sim->add_option("--stride", common.stride, "steps between snapshots");
    sim->add_option("--phi", phi_expr, "initial density expression in a, x");
    sim->add_option("--semilinear", semilinear,
                    "density-dependent mortality: logistic or const:VALUE");
    sim->add_option("--trajectory", trajectory_path,
                    "write the full density table here");
    sim->add_option("--births", births_path,
                    "write the renewal birth table here");
    sim->add_option("--report", report_path, "write a JSON run report here");

    CLI::App* spc = app.add_subcommand(
        "spectral", "growth rate, Perron profile, and projection data");
    add_common(spc);
    spc->add_option("--tol", root_tol, "root tolerance for the growth rate");
    spc->add_option("--profile", profile_path,
                    "write the eigenprofile table here");

    CLI::App* cls = app.add_subcommand(
        "classify", "stability trichotomy by the reproduction radius");
    add_common(cls);
    cls->add_option("--tol", band_tol,
                    "half-width of the neutral band around r(Q_0) = 1");

    CLI::App* aeg = app.add_subcommand(
        "aeg", "rescaled-gap decay toward the spectral projection");
    add_common(aeg);
    aeg->add_option("--T", common.T, "time horizon override");
    aeg->add_option("--stride", common.stride, "steps between residual samples");
    aeg->add_option("--phi", phi_expr, "initial density expression in a, x");
    aeg->add_option("--window", window,
                    "trailing fit window length (default: T/2)");
    aeg->add_option("--residuals", residuals_path,
                    "write the residual curve here");

    CLI::App* res = app.add_subcommand(
        "resolvent-check", "domain residuals of the resolvent at lambda");
    add_common(res);
    res->add_option("--lambda", lambda, "resolvent parameter")->required();
    res->add_option("--tol", res_tol, "residual tolerance");
    res->add_option("--phi", phi_expr, "inhomogeneity expression in a, x");
    res->add_option("--profile", profile_path,
                    "write the resolvent profile table here");

    CLI::App* chk =
        app.add_subcommand("selfcheck", "run the full acceptance suite");
    chk->add_option("--out", common.out, "also write a JSON summary here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(common, phi_expr, semilinear, trajectory_path,
                                births_path, report_path);
        if (spc->parsed()) return cmd_spectral(common, root_tol, profile_path);
        if (cls->parsed()) return cmd_classify(common, band_tol);
        if (aeg->parsed())
            return cmd_aeg(common, phi_expr, window, residuals_path);
        if (res->parsed())
            return cmd_resolvent_check(common, lambda, res_tol, phi_expr,
                                       profile_path);
        if (chk->parsed()) return cmd_selfcheck(common.out);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    std::cerr << "error: no command selected\n";
    return 2;
}
