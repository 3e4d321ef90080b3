#include "doctest.h"

#include <algorithm>
#include <random>

#include "pcf/cone.hpp"
#include "pcf/errors.hpp"

using namespace pcf;

namespace {

ConeProblem nonkahler(std::vector<Curve> curves) {
    ConeProblem p;
    p.curves = std::move(curves);
    p.gamma_pairing = 1.0;
    return p;
}

// first time a negative curve pairing reaches zero, by bisection on the trajectory
double exit_time(const ConeProblem& p, double t_max) {
    auto inside = [&](double t) {
        auto c = class_trajectory(p, t);
        for (std::size_t i = 0; i < p.curves.size(); ++i)
            if (p.curves[i].self_int < 0 && c.pairings[i] <= 0) return false;
        return true;
    };
    if (inside(t_max)) return kInfinity;
    double lo = 0, hi = t_max;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (inside(mid) ? lo : hi) = mid;
    }
    return hi;
}

ConeProblem random_problem(std::mt19937_64& rng, int ncurves) {
    std::uniform_int_distribution<int> self(-4, 2), kd(-3, 3);
    std::uniform_real_distribution<double> area(0.1, 10.0);
    std::vector<Curve> cs;
    for (int i = 0; i < ncurves; ++i) cs.push_back({"D" + std::to_string(i), self(rng), kd(rng), area(rng)});
    return nonkahler(cs);
}

}  // namespace

TEST_CASE("class trajectory") {
    auto p = nonkahler({{"E", -1, -1, 3.0}});
    CHECK(class_trajectory(p, 0).pairings[0] == 3.0);
    CHECK(class_trajectory(p, 1.25).pairings[0] == doctest::Approx(1.75));
    CHECK(class_trajectory(p, 2).gamma_pairing.value() == 1.0);
    CHECK(class_trajectory(nonkahler({}), 5).pairings.empty());
    CHECK_THROWS_AS(class_trajectory(p, -1), ValidationError);
}

TEST_CASE("tau star") {
    SUBCASE("(-1)-curve") {
        auto r = tau_star(nonkahler({{"E", -1, -1, 3.0}}));
        CHECK(r.value == 3.0);
        CHECK(r.binding == "E");
    }
    SUBCASE("class VII+: intersection form negative definite, K.D >= 0") {
        auto r = tau_star(nonkahler({{"C1", -2, 0, 1.0}, {"C2", -3, 1, 0.5}, {"C3", -4, 2, 2.0}}));
        CHECK_FALSE(r.finite());
    }
    SUBCASE("K nef") {
        auto r = tau_star(nonkahler({{"A", -1, 1, 1.0}, {"B", 3, 5, 1.0}}));
        CHECK_FALSE(r.finite());
    }
    SUBCASE("non-negative self intersection is ignored") {
        CHECK_FALSE(tau_star(nonkahler({{"L", 1, -3, 1.0}})).finite());
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(tau_star(nonkahler({{"E", -1, -1, 0.0}})), ValidationError);
        ConeProblem p = nonkahler({});
        p.gamma_pairing = -1;
        CHECK_THROWS_AS(tau_star(p), ValidationError);
        p.gamma_pairing.reset();
        CHECK_THROWS_AS(tau_star(p), ValidationError);
    }
}

TEST_CASE("kahler tau star") {
    ConeProblem p;
    p.kahler = true;
    CHECK_FALSE(kahler_tau_star(p).finite());
    CHECK_FALSE(kahler_tau_star(p).incomplete);
    p.c1_polarization = 2.0;
    CHECK(kahler_tau_star(p).incomplete);
    p.curves = {{"H", 1, -1, 2.0}};
    auto r = kahler_tau_star(p);
    CHECK(r.value == 2.0);
    CHECK_FALSE(r.incomplete);
    p.curves = {{"F", 0, 0, 2.0}};
    CHECK_FALSE(kahler_tau_star(p).finite());
}

TEST_CASE("randomized properties") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        auto p = random_problem(rng, 1 + trial % 6);
        auto tau = tau_star(p).value;

        double oracle = exit_time(p, 1e3);
        if (std::isinf(oracle)) CHECK(std::isinf(tau));
        else CHECK(tau == doctest::Approx(oracle).epsilon(1e-12));

        double lam = scale(rng);
        auto q = p;
        for (auto& c : q.curves) c.area *= lam;
        auto tq = tau_star(q).value;
        if (std::isinf(tau)) CHECK(std::isinf(tq));
        else CHECK(tq == doctest::Approx(lam * tau).epsilon(1e-12));

        auto bigger = p;
        for (auto& c : random_problem(rng, 3).curves) bigger.curves.push_back(c);
        CHECK(tau_star(bigger).value <= tau);

        if (!std::isinf(tau)) {
            auto at = class_trajectory(p, tau);
            auto before = class_trajectory(p, 0.999 * tau);
            bool zero = false;
            for (std::size_t i = 0; i < p.curves.size(); ++i) {
                if (p.curves[i].self_int >= 0) continue;
                CHECK(before.pairings[i] > 0);
                zero = zero || std::abs(at.pairings[i]) < 1e-12;
            }
            CHECK(zero);
        }
    }
}
