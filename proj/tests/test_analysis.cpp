#include <doctest.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "sigrule/analysis.hpp"
#include "sigrule/montecarlo.hpp"

using namespace sigrule;

namespace {

constexpr double kA = 5.7e-4;
constexpr double kEpsC = 0.0068;

double model(int d, double eps, double a = kA, double eps_c = kEpsC) {
    return a / d * std::pow(eps / eps_c, 0.5 * (d + 1));
}

// A row whose per-round rate is exactly `eps_l`, with counts and an interval
// of the size a real run of `trials` would carry.
SweepRow synthetic_row(int d, double eps, double eps_l, int tau = 100, long trials = 100000) {
    SweepRow r;
    r.d = d;
    r.eps_d = eps;
    r.eps_m = eps;
    r.tau = tau;
    r.trials = trials;
    r.eps_l = eps_l;
    r.p_l = 0.75 * (1.0 - std::pow(1.0 - eps_l / 0.75, tau));
    r.fail_any = std::max<long>(1, std::lround(r.p_l * static_cast<double>(trials)));
    r.fail_h = r.fail_any;
    const auto ci = wilson_interval(r.fail_any, trials);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
    return r;
}

std::vector<double> grid(double lo, double hi, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return out;
}

std::vector<SweepRow> rows_for(int d, const std::vector<double>& eps, double noise = 0.0, std::mt19937_64* rng = nullptr) {
    std::normal_distribution<double> jitter(0.0, noise);
    std::vector<SweepRow> rows;
    for (double e : eps) {
        double v = model(d, e);
        if (rng != nullptr) v *= std::exp(jitter(*rng));
        rows.push_back(synthetic_row(d, e, v));
    }
    return rows;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("line fit") {
    const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    const auto f = fit_line(x, y);
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.r_squared == doctest::Approx(1.0));
    CHECK(f.slope_se == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.points == 4);

    // Hand-computed: y = 0, 2, 1 at x = 0, 1, 2 gives slope 1/2, intercept
    // 1/2, RSS 3/2 and slope variance (3/2) / 2.
    const std::vector<double> x3{0, 1, 2}, y3{0, 2, 1};
    const auto g = fit_line(x3, y3);
    CHECK(g.slope == doctest::Approx(0.5));
    CHECK(g.intercept == doctest::Approx(0.5));
    CHECK(g.slope_se == doctest::Approx(std::sqrt(0.75)));

    // A weight of zero would drop a point; a huge weight pins the line to it.
    const std::vector<double> w{1, 1, 1e12};
    const auto h = fit_line(x3, y3, w);
    CHECK(h.intercept + 2 * h.slope == doctest::Approx(1.0).epsilon(1e-6));

    const std::vector<double> same{1, 1, 1};
    CHECK_THROWS_AS((void)fit_line(same, y3), FitError);
    const std::vector<double> one{1};
    CHECK_THROWS_AS((void)fit_line(one, one), FitError);
}

TEST_CASE("two points give an exact line without errors") {
    const std::vector<double> x{1, 2}, y{3, 5};
    const auto f = fit_line(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(std::isnan(f.slope_se));
    CHECK(std::isnan(f.intercept_se));
}

TEST_CASE("exact data is recovered") {
    const auto start = std::chrono::steady_clock::now();
    const auto eps = grid(0.002, 0.0045, 6);
    std::vector<PowerLawFit> fits;
    for (int d : {5, 7, 9, 11}) {
        for (auto weighting : {Weighting::Wilson, Weighting::Uniform}) {
            const auto rows = rows_for(d, eps);
            const auto f = fit_powerlaw_per_d(rows, weighting);
            CHECK(std::abs(f.gamma - 0.5 * (d + 1)) <= 1e-10);
            CHECK(f.points == 6);
            CHECK(f.excluded == 0);
            CHECK(f.weighted == (weighting == Weighting::Wilson));
            if (weighting == Weighting::Wilson) fits.push_back(f);
        }
    }
    const auto ansatz = fit_ansatz(fits);
    CHECK(std::abs(ansatz.a / kA - 1.0) <= 1e-10);
    CHECK(std::abs(ansatz.eps_c / kEpsC - 1.0) <= 1e-10);
    for (auto [d, g] : ansatz.gamma) CHECK(std::abs(g - 0.5 * (d + 1)) <= 1e-10);
    for (auto [d, r] : ansatz.residuals) CHECK(std::abs(r) <= 1e-10);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 1.0);
}

TEST_CASE("fits tolerate multiplicative noise") {
    // 5% log-normal scatter on every rate, 10 rates per distance.
    const auto eps = grid(0.0015, 0.0045, 10);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<PowerLawFit> fits;
        for (int d : {5, 7, 9}) {
            const auto rows = rows_for(d, eps, 0.05, &rng);
            fits.push_back(fit_powerlaw_per_d(rows));
            CHECK(std::abs(fits.back().gamma - 0.5 * (d + 1)) <= 0.3);
        }
        const auto ansatz = fit_ansatz(fits);
        CHECK(std::abs(ansatz.eps_c / kEpsC - 1.0) <= 0.1);
    }
}

TEST_CASE("rows without information are excluded") {
    auto rows = rows_for(7, grid(0.002, 0.004, 4));
    SweepRow zero = rows.front();
    zero.eps_d = 0.001;
    zero.fail_any = zero.fail_h = zero.fail_v = 0;
    zero.p_l = zero.eps_l = 0.0;
    zero.ci_low = 0.0;
    rows.push_back(zero);
    SweepRow saturated = rows.front();
    saturated.eps_d = 0.1;
    saturated.p_l = 0.8;
    saturated.eps_l = 0.75;
    rows.push_back(saturated);
    const auto f = fit_powerlaw_per_d(rows);
    CHECK(f.points == 4);
    CHECK(f.excluded == 2);
    CHECK(f.gamma == doctest::Approx(4.0));
}

TEST_CASE("fit failures carry their reason") {
    auto rows = rows_for(5, grid(0.002, 0.004, 3));
    for (auto& r : rows) r.fail_any = 0;
    CHECK_THROWS_WITH_AS((void)fit_powerlaw_per_d(rows), "all-zero failures", FitError);

    const auto one = rows_for(5, {0.003});
    CHECK_THROWS_WITH_AS((void)fit_powerlaw_per_d(one), "insufficient points", FitError);

    auto mixed = rows_for(5, {0.002, 0.003});
    mixed.push_back(rows_for(7, {0.003}).front());
    CHECK_THROWS_AS((void)fit_powerlaw_per_d(mixed), std::invalid_argument);

    std::vector<PowerLawFit> two{fit_powerlaw_per_d(rows_for(5, {0.002, 0.004})),
                                 fit_powerlaw_per_d(rows_for(7, {0.002, 0.004}))};
    CHECK_THROWS_WITH_AS((void)fit_ansatz(two), "eps_c unidentifiable", FitError);
    std::vector<PowerLawFit> flat(3, two.front());
    flat[1].d = 7;
    flat[2].d = 9;
    CHECK_THROWS_WITH_AS((void)fit_ansatz(flat), "eps_c unidentifiable", FitError);
}

TEST_CASE("degenerate intervals turn weighting off") {
    auto rows = rows_for(5, grid(0.002, 0.004, 4));
    rows[1].ci_low = 0.0;
    const auto f = fit_powerlaw_per_d(rows);
    CHECK_FALSE(f.weighted);
    CHECK(f.gamma == doctest::Approx(3.0));
}

TEST_CASE("weights favor the tighter intervals") {
    // Identical lines except one outlier row with a very wide interval.
    auto rows = rows_for(5, grid(0.002, 0.004, 5));
    rows[2].eps_l *= 3.0;
    rows[2].trials = 200;
    rows[2].fail_any = 1;
    const auto ci = wilson_interval(1, 200);
    rows[2].ci_low = ci.low;
    rows[2].ci_high = ci.high;
    const auto w = fit_powerlaw_per_d(rows, Weighting::Wilson);
    const auto u = fit_powerlaw_per_d(rows, Weighting::Uniform);
    CHECK(std::abs(w.intercept + w.gamma * std::log(0.003) - std::log(model(5, 0.003))) <
          std::abs(u.intercept + u.gamma * std::log(0.003) - std::log(model(5, 0.003))));
}

TEST_CASE("crossing of two power laws") {
    // Both lines pass through eps = 0.005 at the same rate.
    auto line = [](int d, double gamma) {
        std::vector<SweepRow> rows;
        for (double e : {0.002, 0.003, 0.004}) rows.push_back(synthetic_row(d, e, 1e-4 * std::pow(e / 0.005, gamma)));
        return rows;
    };
    const auto a = line(5, 3.0), b = line(7, 4.0);
    const auto c = crossing_point(a, b);
    CHECK(c.eps_c_tilde == doctest::Approx(0.005).epsilon(1e-10));
    CHECK(c.d_i == 5);
    CHECK(c.d_j == 7);
    CHECK(c.gamma_i == doctest::Approx(3.0));
    CHECK(c.gamma_j == doctest::Approx(4.0));

    // Scaling every rate by the same factor leaves the crossing in place.
    auto scaled_a = a, scaled_b = b;
    for (auto* rows : {&scaled_a, &scaled_b})
        for (auto& r : *rows) r.eps_l *= 7.5;
    CHECK(crossing_point(scaled_a, scaled_b).eps_c_tilde == doctest::Approx(0.005).epsilon(1e-10));

    const auto parallel = line(9, 3.0);
    CHECK_THROWS_WITH_AS((void)crossing_point(a, parallel), "no crossing", FitError);

    std::vector<PowerLawFit> fits{fit_powerlaw_per_d(b), fit_powerlaw_per_d(a), fit_powerlaw_per_d(parallel)};
    const auto all = adjacent_crossings(fits);
    // 5-7 crosses, 7-9 crosses as well; nothing is reported twice.
    REQUIRE(all.size() == 2);
    CHECK(all[0].d_i == 5);
    CHECK(all[0].d_j == 7);
    CHECK(all[1].d_i == 7);
    CHECK(all[1].d_j == 9);
}

TEST_CASE("crossings of the reference model sit at the threshold") {
    std::vector<PowerLawFit> fits;
    for (int d : {5, 7, 9}) fits.push_back(fit_powerlaw_per_d(rows_for(d, grid(0.002, 0.004, 4))));
    for (const auto& c : adjacent_crossings(fits)) {
        // The 1/d prefactor moves the crossing away from eps_c by (d_j/d_i)^(1/(gamma_j - gamma_i)).
        const double expected = kEpsC * std::pow(static_cast<double>(c.d_j) / c.d_i, 1.0 / (c.gamma_j - c.gamma_i));
        CHECK(c.eps_c_tilde == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("poisson fit") {
    const double lambda = 1e-3;
    std::vector<SeriesPoint> s;
    for (int tau = 10; tau <= 200; tau += 10) s.push_back({tau, 0.75 * (1.0 - std::pow(1.0 - lambda, tau))});
    const auto f = fit_poisson(s);
    CHECK(f.lambda == doctest::Approx(lambda).epsilon(1e-10));
    CHECK(f.eps_l == doctest::Approx(0.75 * lambda).epsilon(1e-10));
    CHECK(f.rms_residual == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.r_squared == doctest::Approx(1.0));
    CHECK(f.points == 20);

    // The per-round rate agrees with inverting a single point.
    CHECK(f.eps_l == doctest::Approx(p_to_rate(s.back().p_l, s.back().tau).eps_l).epsilon(1e-10));

    std::vector<SeriesPoint> zeros{{10, 0.0}, {20, 0.0}, {30, 0.0}};
    CHECK(fit_poisson(zeros).lambda == 0.0);

    auto with_saturated = s;
    with_saturated.push_back({5000, 0.76});
    const auto g = fit_poisson(with_saturated);
    CHECK(g.excluded == 1);
    CHECK(g.lambda == doctest::Approx(lambda).epsilon(1e-10));

    std::vector<SeriesPoint> short_series{{10, 0.01}, {20, 0.02}};
    CHECK_THROWS_AS((void)fit_poisson(short_series), FitError);
    std::vector<SeriesPoint> all_saturated{{10, 0.8}, {20, 0.8}, {30, 0.9}};
    CHECK_THROWS_AS((void)fit_poisson(all_saturated), FitError);
}

TEST_CASE("convergence time") {
    const double eps_l = 1e-3;
    // Ratio P/tau climbs to the asymptotic rate after a transient of 30.
    std::vector<SeriesPoint> s{{10, 0.0}, {20, 0.005}, {30, 0.028}, {40, 0.038}, {50, 0.048}};
    CHECK(convergence_time(s, eps_l) == 30);
    std::vector<SeriesPoint> all_good{{10, 0.01}, {20, 0.02}};
    CHECK(convergence_time(all_good, eps_l) == 10);
    std::vector<SeriesPoint> late_dip{{10, 0.01}, {20, 0.001}};
    CHECK_FALSE(convergence_time(late_dip, eps_l).has_value());
    // A dip in the middle resets the scan.
    std::vector<SeriesPoint> dip{{10, 0.01}, {20, 0.001}, {30, 0.03}};
    CHECK(convergence_time(dip, eps_l) == 30);

    CHECK_THROWS_AS((void)convergence_time({}, eps_l), std::invalid_argument);
    CHECK_THROWS_AS((void)convergence_time(s, 0.0), std::invalid_argument);
    std::vector<SeriesPoint> unsorted{{20, 0.01}, {10, 0.01}};
    CHECK_THROWS_AS((void)convergence_time(unsorted, eps_l), std::invalid_argument);
}

}  // TEST_SUITE
