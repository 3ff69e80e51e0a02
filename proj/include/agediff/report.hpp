#pragma once

#include "agediff/renewal.hpp"
#include "agediff/scenario_file.hpp"
#include "agediff/semigroup.hpp"
#include "agediff/spectral.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>

namespace agediff {

/// Shortest decimal form that parses back to the same double; used for all
/// CSV numbers, so identical inputs produce bitwise-identical output files.
std::string fmt_double(double v);

/// Long-format density trajectory: t,a,cell,value.
void write_trajectory_csv(std::ostream& out, const Scenario& s,
                          const std::vector<TrajectorySnapshot>& snaps);

/// Per-snapshot summary: t,total_population,boundary_norm.
void write_summary_csv(std::ostream& out, const Scenario& s,
                       const std::vector<TrajectorySnapshot>& snaps);

/// Birth values over time, one column per cell: t,B0,B1,...
void write_birth_csv(std::ostream& out, const BirthTrajectory& births);

/// Rescaled-gap curve of an AEG run: t,residual.
void write_residuals_csv(std::ostream& out, const AegReport& report);

/// Age profile (eigenprofile, resolvent output): a,cell,value.
void write_profile_csv(std::ostream& out, const Scenario& s,
                       const AgeDensity& u);

/// Run metadata embedded in every JSON report: scenario hash, grid and run
/// parameters, canonical coefficient expressions.
nlohmann::ordered_json run_header_json(const ParsedScenario& ps);

nlohmann::ordered_json spectral_json(const Scenario& s, const SpectralData& d,
                                     double root_tol);
nlohmann::ordered_json trichotomy_json(const TrichotomyVerdict& v,
                                       double band_tol);
nlohmann::ordered_json aeg_json(const AegReport& r);

}  // namespace agediff
