#include "sigrule/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sigrule/montecarlo.hpp"

namespace sigrule {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool usable(const SweepRow& row) { return row.fail_any > 0 && row.p_l < 0.75 && row.eps_l > 0.0; }

// Width of the Wilson interval after mapping both ends to per-round rates,
// in log space. Zero or non-finite when the interval is degenerate.
double log_width(const SweepRow& row) {
    if (row.ci_low <= 0.0 || row.ci_high <= row.ci_low) return 0.0;
    const double lo = p_to_rate(row.ci_low, row.tau).eps_l;
    const double hi = p_to_rate(row.ci_high, row.tau).eps_l;
    return std::log(hi) - std::log(lo);
}

}  // namespace

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
    if (x.size() != y.size() || (!w.empty() && w.size() != x.size())) {
        throw std::invalid_argument("fit_line: mismatched input lengths");
    }
    const std::size_t n = x.size();
    auto weight = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weight(i) > 0.0) || !std::isfinite(weight(i))) throw std::invalid_argument("fit_line: weights must be positive");
        sw += weight(i);
        sx += weight(i) * x[i];
        sy += weight(i) * y[i];
    }
    const bool distinct = n >= 2 && std::any_of(x.begin(), x.end(), [&](double v) { return v != x[0]; });
    if (!distinct) throw FitError("insufficient points");
    const double xbar = sx / sw;
    const double ybar = sy / sw;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - xbar;
        const double dy = y[i] - ybar;
        sxx += weight(i) * dx * dx;
        sxy += weight(i) * dx * dy;
        syy += weight(i) * dy * dy;
    }
    LineFit fit;
    fit.points = static_cast<int>(n);
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        rss += weight(i) * r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
    if (n > 2) {
        const double s2 = rss / static_cast<double>(n - 2);
        fit.slope_se = std::sqrt(s2 / sxx);
        fit.intercept_se = std::sqrt(s2 * (1.0 / sw + xbar * xbar / sxx));
    } else {
        fit.slope_se = kNaN;
        fit.intercept_se = kNaN;
    }
    return fit;
}

PowerLawFit fit_powerlaw_per_d(std::span<const SweepRow> rows, Weighting weighting) {
    if (rows.empty()) throw FitError("insufficient points");
    PowerLawFit out;
    out.d = rows.front().d;
    std::vector<double> x, y, w;
    bool any_failures = false;
    for (const auto& row : rows) {
        if (row.d != out.d) throw std::invalid_argument("fit_powerlaw_per_d: rows mix distances");
        any_failures = any_failures || row.fail_any > 0;
        if (!usable(row)) {
            ++out.excluded;
            continue;
        }
        if (!(row.eps_d > 0.0)) throw std::invalid_argument("fit_powerlaw_per_d: eps_d must be positive");
        x.push_back(std::log(row.eps_d));
        y.push_back(std::log(row.eps_l));
        const double width = log_width(row);
        w.push_back(width > 0.0 && std::isfinite(width) ? 1.0 / (width * width) : 0.0);
    }
    if (!any_failures) throw FitError("all-zero failures");
    out.weighted = weighting == Weighting::Wilson &&
                   std::all_of(w.begin(), w.end(), [](double v) { return v > 0.0 && std::isfinite(v); });
    const auto line = fit_line(x, y, out.weighted ? std::span<const double>(w) : std::span<const double>());
    out.intercept = line.intercept;
    out.gamma = line.slope;
    out.intercept_se = line.intercept_se;
    out.gamma_se = line.slope_se;
    out.points = line.points;
    return out;
}

AnsatzFit fit_ansatz(std::span<const PowerLawFit> fits) {
    std::vector<double> gamma, y;
    AnsatzFit out;
    for (const auto& f : fits) {
        if (out.gamma.contains(f.d)) throw std::invalid_argument("fit_ansatz: duplicate distance " + std::to_string(f.d));
        out.gamma[f.d] = f.gamma;
        gamma.push_back(f.gamma);
        y.push_back(f.intercept + std::log(static_cast<double>(f.d)));
    }
    if (fits.size() < 3) throw FitError("eps_c unidentifiable");
    LineFit line;
    try {
        line = fit_line(gamma, y);
    } catch (const FitError&) {
        throw FitError("eps_c unidentifiable");
    }
    out.a = std::exp(line.intercept);
    out.eps_c = std::exp(-line.slope);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        out.residuals[fits[i].d] = y[i] - line.intercept - line.slope * gamma[i];
    }
    return out;
}

Crossing crossing_point(const PowerLawFit& a, const PowerLawFit& b) {
    if (a.gamma == b.gamma) throw FitError("no crossing");
    Crossing c;
    c.d_i = a.d;
    c.d_j = b.d;
    c.gamma_i = a.gamma;
    c.gamma_j = b.gamma;
    c.eps_c_tilde = std::exp((b.intercept - a.intercept) / (a.gamma - b.gamma));
    return c;
}

Crossing crossing_point(std::span<const SweepRow> rows_i, std::span<const SweepRow> rows_j, Weighting weighting) {
    return crossing_point(fit_powerlaw_per_d(rows_i, weighting), fit_powerlaw_per_d(rows_j, weighting));
}

std::vector<Crossing> adjacent_crossings(std::span<const PowerLawFit> fits) {
    std::vector<PowerLawFit> sorted(fits.begin(), fits.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.d < b.d; });
    std::vector<Crossing> out;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (sorted[i].gamma == sorted[i + 1].gamma) continue;
        out.push_back(crossing_point(sorted[i], sorted[i + 1]));
    }
    return out;
}

PoissonFit fit_poisson(std::span<const SeriesPoint> series) {
    if (series.size() < 3) throw FitError("insufficient points");
    PoissonFit out;
    std::vector<double> x, y;
    for (const auto& p : series) {
        if (p.tau < 1 || p.p_l < 0.0) throw std::invalid_argument("fit_poisson: invalid series point");
        if (p.p_l >= 0.75) {
            ++out.excluded;
            continue;
        }
        x.push_back(static_cast<double>(p.tau));
        y.push_back(std::log1p(-p.p_l / 0.75));
    }
    if (x.empty()) throw FitError("insufficient points");
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
    }
    const double slope = sxy / sxx;
    out.lambda = slope == 0.0 ? 0.0 : -std::expm1(slope);
    out.eps_l = 0.75 * out.lambda;
    out.points = static_cast<int>(x.size());
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) rss += (y[i] - slope * x[i]) * (y[i] - slope * x[i]);
    out.rms_residual = std::sqrt(rss / static_cast<double>(x.size()));
    try {
        out.r_squared = fit_line(x, y).r_squared;
    } catch (const FitError&) {
        out.r_squared = kNaN;
    }
    return out;
}

std::optional<int> convergence_time(std::span<const SeriesPoint> series, double eps_l) {
    if (series.empty()) throw std::invalid_argument("convergence_time: empty series");
    if (!(eps_l > 0.0)) throw std::invalid_argument("convergence_time: eps_L must be positive");
    for (std::size_t i = 1; i < series.size(); ++i) {
        if (series[i].tau <= series[i - 1].tau) throw std::invalid_argument("convergence_time: series must be sorted by tau");
    }
    std::optional<int> tau0;
    for (auto it = series.rbegin(); it != series.rend(); ++it) {
        if (it->tau <= 0 || !(it->p_l / it->tau > 0.9 * eps_l)) break;
        tau0 = it->tau;
    }
    return tau0;
}

}  // namespace sigrule
