#include <doctest.h>

#include <cmath>
#include <functional>

#include "drglm/stats.hpp"

using namespace drglm;

namespace {

// Independent quantile oracle: bisection against a CDF callable.
double bisect_quantile(double p, const std::function<double(double)>& cdf) {
    double lo = -60.0, hi = 60.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-14 * std::max(1.0, std::fabs(lo))) break;
    }
    return 0.5 * (lo + hi);
}

// t density by its closed form; integrated with Simpson's rule for a CDF
// oracle fully independent of the incomplete-beta implementation.
double t_pdf_direct(double x, double df) {
    const double c = std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI);
    return std::exp(c - 0.5 * (df + 1) * std::log1p(x * x / df));
}

double simpson(const std::function<double(double)>& f, double a, double b, int steps) {
    const double h = (b - a) / steps;
    double sum = f(a) + f(b);
    for (int i = 1; i < steps; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

double t_cdf_quadrature(double x, double df) {
    // 0.5 + integral of the density from 0 to x; 20k panels keep the error
    // far below 1e-12 on the |x| <= 10 range used here.
    const double body =
        simpson([df](double u) { return t_pdf_direct(u, df); }, 0.0, std::fabs(x), 20000);
    return x >= 0 ? 0.5 + body : 0.5 - body;
}

} // namespace

TEST_CASE("normal quantile matches bisection on erfc to 1e-10") {
    for (double p : {1e-9, 1e-6, 0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999, 1 - 1e-7}) {
        const double oracle = bisect_quantile(p, [](double x) { return normal_cdf(x); });
        CHECK(normal_quantile(p) == doctest::Approx(oracle).epsilon(1e-10));
    }
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(std::isinf(normal_quantile(0.0)));
    CHECK(std::isinf(normal_quantile(1.0)));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}

TEST_CASE("t quantile matches the quadrature oracle") {
    for (double df : {3.0, 7.0, 30.0, 120.0, 9992.0}) {
        for (double p : {0.005, 0.05, 0.3, 0.5, 0.7, 0.95, 0.975, 0.995}) {
            const double oracle =
                bisect_quantile(p, [df](double x) { return t_cdf_quadrature(x, df); });
            CHECK_MESSAGE(students_t_quantile(p, df) == doctest::Approx(oracle).epsilon(1e-9),
                          "df=", df, " p=", p);
        }
    }
}

TEST_CASE("t quantile round-trips through the cdf at df 1 and 2") {
    // The closed-form quantiles are checked against the incomplete-beta
    // CDF, an independent code path.
    for (double df : {1.0, 2.0}) {
        for (double p : {0.001, 0.04, 0.25, 0.5, 0.77, 0.95, 0.999}) {
            CHECK_MESSAGE(students_t_cdf(students_t_quantile(p, df), df) ==
                              doctest::Approx(p).epsilon(1e-11),
                          "df=", df, " p=", p);
        }
    }
}

TEST_CASE("t quantile at 0.975 with df 10000 rounds to 1.9602") {
    const double q = students_t_quantile(0.975, 10000.0);
    const double oracle =
        bisect_quantile(0.975, [](double x) { return t_cdf_quadrature(x, 10000.0); });
    CHECK(q == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(std::round(q * 1e4) / 1e4 == 1.9602);
}

TEST_CASE("t distribution approaches normal for large df") {
    CHECK(students_t_quantile(0.975, 1e7) == doctest::Approx(normal_quantile(0.975)).epsilon(1e-6));
}

TEST_CASE("two-sided p-values") {
    CHECK(normal_two_sided_p(0.0) == 1.0);
    CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(students_t_two_sided_p(0.0, 10.0) == 1.0);
    CHECK(normal_two_sided_p(-2.5) == normal_two_sided_p(2.5));
    // Monotone decreasing in |stat| and always inside [0, 1].
    double prev = 2.0;
    for (int i = 0; i <= 100; ++i) {
        const double p = normal_two_sided_p(0.08 * i);
        CHECK(p <= prev);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        prev = p;
    }
    prev = 2.0;
    for (int i = 0; i <= 100; ++i) {
        const double p = students_t_two_sided_p(0.08 * i, 17.0);
        CHECK(p <= prev);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        prev = p;
    }
}

TEST_CASE("t cdf agrees with quadrature") {
    for (double df : {2.5, 5.0, 50.0}) {
        for (double x : {-4.0, -1.0, -0.1, 0.0, 0.3, 2.0, 6.0}) {
            CHECK(students_t_cdf(x, df) == doctest::Approx(t_cdf_quadrature(x, df)).epsilon(1e-11));
        }
    }
}

TEST_CASE("incomplete beta edge cases") {
    CHECK(regularized_incomplete_beta(0.0, 2.0, 3.0) == 0.0);
    CHECK(regularized_incomplete_beta(1.0, 2.0, 3.0) == 1.0);
    // I_x(1,1) = x.
    CHECK(regularized_incomplete_beta(0.37, 1.0, 1.0) == doctest::Approx(0.37).epsilon(1e-14));
}
