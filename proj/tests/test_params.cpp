#include "doctest.h"

#include "ftpram/params.hpp"

#include <cmath>

using namespace ftpram;

namespace {

// Independent iteration: first alpha meeting the three conditions.
int alpha_by_iteration(double fp, double fs, int beta, double m, double n)
{
    for (int a = beta;; ++a) {
        if (!(a > (beta - 1) / (1.0 - fs))) continue;
        const double lhs = fp + fs * (double(a) / (a - beta + 1)) * (m / (m - n));
        if (lhs < (fp + fs + 1) / 2) return a;
    }
}

}  // namespace

TEST_CASE("minimum beta counts structural roles plus storage")
{
    SegmentLayout l;
    l.cells_per_virtual = 1;
    l.contact_roles.assign(29, "r");
    CHECK(minimum_beta(l) == 30);
    l.contact_roles.clear();
    l.regular_roles.assign(3, "r");
    CHECK(minimum_beta(l) == 4);
    l.regular_roles.clear();
    CHECK(minimum_beta(l) == 2);
}

TEST_CASE("choose_alpha")
{
    CHECK(choose_alpha(0, 0, 8, 16, 1024) == 8);
    // m = alpha * n: 0.3 + 0.3 * (a/(a-1))^2 < 0.8 first at a = 5
    CHECK(choose_alpha_scaled(0.3, 0.3, 2, 1.0) == 5);
    CHECK(choose_alpha(0.1, 0.1, 32, 16, 1 << 16) == alpha_by_iteration(0.1, 0.1, 32, 1 << 16, 16));
    for (double fs : {0.0, 0.1, 0.2, 0.3})
        for (int beta : {2, 4, 8, 40})
            CHECK(choose_alpha(0.2, fs, beta, 64, 1 << 14) == alpha_by_iteration(0.2, fs, beta, 1 << 14, 64));
}

TEST_CASE("choose_alpha is monotone in fs and beta")
{
    for (double fp : {0.0, 0.1, 0.3}) {
        int prev = 0;
        for (double fs = 0.0; fs < 0.6 - fp; fs += 0.05) {
            int a = choose_alpha(fp, fs, 8, 32, 1 << 13);
            CHECK(a >= prev);
            prev = a;
        }
        prev = 0;
        for (int beta = 2; beta <= 48; beta += 3) {
            int a = choose_alpha(fp, 0.2, beta, 32, 1 << 13);
            CHECK(a >= prev);
            prev = a;
        }
    }
}

TEST_CASE("compute_delta follows the derivation")
{
    CHECK(compute_delta(0, 7, 3) == doctest::Approx(1.0 / 7));
    // (1/5)(1 - 0.3 - 0.3 * 1/4)
    CHECK(compute_delta(0.3, 5, 2) == doctest::Approx(0.125));
    CHECK_THROWS_AS(compute_delta(0.5, 2, 2), ParameterError);
}

TEST_CASE("field exponent and input strings")
{
    CHECK(field_exponent(1) == 1);
    CHECK(field_exponent(3) == 2);
    CHECK(field_exponent(7) == 3);
    CHECK(field_exponent(8) == 4);
    CHECK(input_string_count(0.3, 10) == 3);
    CHECK(input_string_count(0.3, 16) == 5);
    CHECK(input_string_count(0.5, 6) == 3);
}

TEST_CASE("validate_normal")
{
    auto p = derive_params(0.6, 0.5, 16, 4096);
    auto v = validate_normal(p);
    REQUIRE(!v.empty());
    bool found = false;
    for (const auto& s : v) found |= s.find("f_p+f_s<1") != std::string::npos;
    CHECK(found);

    auto ok = derive_params(0.2, 0.2, 16, 1 << 14);
    CHECK(validate_normal(ok).empty());
    CHECK(ok.gamma == doctest::Approx(0.3));
    CHECK(ok.k == 5);
    CHECK(ok.t == 5);

    auto small = ok;
    small.m = static_cast<std::size_t>(small.alpha) * small.n - 1;
    CHECK(!validate_normal(small).empty());

    CHECK(!validate_normal(ok, 4, 0).empty());  // 4 > 0.2 * 16
}
