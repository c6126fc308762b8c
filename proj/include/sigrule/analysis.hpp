#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace sigrule {

// One Monte Carlo cell: a (d, rates, tau, bound) setting and its failure counts.
struct SweepRow {
    int d = 0;
    double eps_d = 0.0;
    double eps_m = 0.0;
    int tau = 0;
    std::optional<int> stack_bound;
    long trials = 0;
    long fail_any = 0;
    long fail_h = 0;
    long fail_v = 0;
    double p_l = 0.0;
    double eps_l = 0.0;
    double ci_low = 0.0;  // bounds on P_L
    double ci_high = 0.0;
    std::uint64_t master_seed = 0;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

// Raised when data cannot determine a requested quantity (too few points,
// parallel lines, ...). The message is the reason reported to users.
class FitError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class Weighting { Wilson, Uniform };

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double intercept_se = 0.0;  // NaN with no residual degrees of freedom
    double slope_se = 0.0;
    double r_squared = 0.0;
    int points = 0;
};

// Weighted least squares y = intercept + slope * x. Weights must be
// positive; an empty span means uniform. Throws FitError when fewer than two
// distinct x values are given.
[[nodiscard]] LineFit fit_line(std::span<const double> x, std::span<const double> y,
                               std::span<const double> w = {});

// log eps_L = intercept + slope * log eps_d for a single distance.
struct PowerLawFit {
    int d = 0;
    double intercept = 0.0;
    double gamma = 0.0;
    double intercept_se = 0.0;
    double gamma_se = 0.0;
    int points = 0;    // rows used
    int excluded = 0;  // rows dropped: no failures or saturated
    bool weighted = false;
};

// Rows with zero failures or P_L >= 3/4 are skipped. With Wilson weighting
// each row is weighted by the inverse square width of its interval in log
// eps_L; a row with a degenerate interval turns weighting off for the fit.
[[nodiscard]] PowerLawFit fit_powerlaw_per_d(std::span<const SweepRow> rows,
                                             Weighting weighting = Weighting::Wilson);

// eps_L = A/d (eps/eps_c)^gamma_d over several distances.
struct AnsatzFit {
    double a = 0.0;
    double eps_c = 0.0;
    std::map<int, double> gamma;
    std::map<int, double> residuals;  // stage-two residual per d
};

// Stage two on top of per-d fits: ordinary least squares of intercept + log d
// against gamma_d. Throws FitError("eps_c unidentifiable") with fewer than
// three distances or when all exponents coincide.
[[nodiscard]] AnsatzFit fit_ansatz(std::span<const PowerLawFit> fits);

struct Crossing {
    int d_i = 0;
    int d_j = 0;
    double eps_c_tilde = 0.0;
    double gamma_i = 0.0;
    double gamma_j = 0.0;
};

// Intersection of two fitted log-log lines. Throws FitError("no crossing")
// for equal slopes.
[[nodiscard]] Crossing crossing_point(const PowerLawFit& a, const PowerLawFit& b);
[[nodiscard]] Crossing crossing_point(std::span<const SweepRow> rows_i, std::span<const SweepRow> rows_j,
                                      Weighting weighting = Weighting::Wilson);

// Crossings of consecutive distances; parallel pairs are skipped.
[[nodiscard]] std::vector<Crossing> adjacent_crossings(std::span<const PowerLawFit> fits);

struct SeriesPoint {
    int tau = 0;
    double p_l = 0.0;
};

struct PoissonFit {
    double lambda = 0.0;
    double eps_l = 0.0;     // 3/4 lambda
    double rms_residual = 0.0;  // of the through-origin model
    double r_squared = 0.0;     // straight line with free intercept, same coordinates
    int points = 0;
    int excluded = 0;  // points with P_L >= 3/4
};

// Least squares through the origin of log(1 - 4/3 P_L) against tau.
// Needs at least three points, at least one of them usable.
[[nodiscard]] PoissonFit fit_poisson(std::span<const SeriesPoint> series);

// Smallest sampled tau0 with P_L(tau)/tau > 0.9 eps_l for every sampled
// tau >= tau0; nullopt when the last sample already fails the bound.
[[nodiscard]] std::optional<int> convergence_time(std::span<const SeriesPoint> series, double eps_l);

}  // namespace sigrule
