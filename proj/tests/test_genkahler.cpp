#include "doctest.h"

#include <cmath>

#include "pcf/errors.hpp"
#include "pcf/genkahler.hpp"
#include "pcf/potential.hpp"

using namespace pcf;
using X4 = std::array<double, 4>;

namespace {

// Kahler metric from a potential: h = Id + d dbar u with u = eps cos(x0) cos(x2)
HermField kahler_metric(const ChartGrid& grid, double eps) {
    return HermField::from_function(grid, [eps](const X4& x) {
        double c0 = std::cos(x[0]), s0 = std::sin(x[0]), c2 = std::cos(x[2]), s2 = std::sin(x[2]);
        Mat2c m = Mat2c::Identity();
        m(0, 0) += -0.25 * eps * c0 * c2;
        m(1, 1) += -0.25 * eps * c0 * c2;
        m(0, 1) += 0.25 * eps * s0 * s2;
        m(1, 0) += 0.25 * eps * s0 * s2;
        return m;
    });
}

// 1-D periodic Fourier second-derivative matrix
Eigen::MatrixXd fourier_d2(int n, double period) {
    double h = 2 * M_PI / n, sc = std::pow(2 * M_PI / period, 2);
    Eigen::MatrixXd D(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j)
                D(i, j) = -M_PI * M_PI / (3 * h * h) - 1.0 / 6;
            else
                D(i, j) = -0.5 * std::pow(-1.0, i - j) / std::pow(std::sin((i - j) * h / 2), 2);
        }
    return sc * D;
}

}  // namespace

TEST_CASE("Poisson structure and angle") {
    ChartGrid grid(8);
    SUBCASE("Kahler: sigma = 0, p = -1") {
        PoissonReport r = poisson_sigma(kahler_triple(kahler_metric(grid, 0.3)));
        CHECK(r.sigma.sup() < 1e-14);
        CHECK(r.max_rank == 0);
        for (double p : r.p) CHECK(p == doctest::Approx(-1).epsilon(1e-14));
        CHECK(r.degenerate.size() == grid.size());
    }
    SUBCASE("hyperkahler: sigma = K, p = 0") {
        GKTriple t = hyperkahler_triple(grid);
        PoissonReport r = poisson_sigma(t);
        Mat4 K = J_std() * t.J.at(0);
        CHECK((r.sigma.at(17) - K).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(r.min_rank == 4);
        CHECK(r.max_abs_p < 1e-15);
        CHECK(r.degenerate.empty());
        CHECK(r.sigma_asym < 1e-15);
    }
    SUBCASE("commuting split: sigma = 0, p = 0") {
        PoissonReport r = poisson_sigma(split_triple(random_split(grid, 3, 4, 0.3)));
        CHECK(r.sigma.sup() < 1e-14);
        CHECK(r.max_abs_p < 1e-14);
        CHECK(r.max_rank == 0);
    }
    SUBCASE("rank is 0 or 4 along a deformation") {
        GKTriple t = hyperkahler_triple(grid);
        Field f(grid.size());
        for (std::size_t p = 0; p < f.size(); ++p) {
            auto x = grid.coords(p);
            f[p] = 0.2 * std::sin(x[1] + x[2]) + 0.1 * std::cos(x[0]);
        }
        PoissonReport r = poisson_sigma(joyce_deform(t, f, 0.05));
        CHECK(r.min_rank == 4);
        CHECK(r.max_abs_p < 1);
    }
}

TEST_CASE("generalized Kahler compatibility") {
    ChartGrid grid(8);
    CHECK(hyperkahler_triple(grid).check().ok(1e-13));
    CHECK(kahler_triple(kahler_metric(grid, 0.3)).check().ok(1e-10));
    SplitPotential s = random_split(grid, 5, 5, 0.3);
    GKReport r = split_triple(s).check();
    CHECK(r.ok(1e-10));
    CHECK(dc_torsion(split_triple(s).g, split_triple(s).I).sup() > 1e-2);
    SUBCASE("a non-Kahler pluriclosed metric with I = J is not generalized Kahler") {
        HermField w = random_alpha(21, 6, 1, 0.05).metric_field(grid);
        GKReport k = GKTriple{SymField::from_herm(w), MatField::constant(grid, J_std()),
                              MatField::constant(grid, J_std())}
                         .check();
        CHECK(k.ddc < 1e-10);
        CHECK(k.compat > 1e-2);
        CHECK_THROWS_AS(GKTriple({SymField::from_herm(w), MatField::constant(grid, J_std()),
                                  MatField::constant(grid, J_std())})
                            .validate(),
                        PreconditionError);
    }
    SUBCASE("split potential with the wrong relative sign fails") {
        GKTriple t = split_triple(s);
        t.J = t.I;
        CHECK(t.check().compat > 1e-2);
    }
}

TEST_CASE("Nijenhuis tensor") {
    ChartGrid grid(8);
    CHECK(nijenhuis_residual(MatField::constant(grid, J_std())) < 1e-15);
    // rotate the e2,e3 plane into e0 by an x3-dependent angle: not integrable
    MatField A = MatField::from_function(grid, [](const X4& x) {
        double c = std::cos(0.3 * std::sin(x[3])), s = std::sin(0.3 * std::sin(x[3]));
        Mat4 R = Mat4::Identity();
        R(0, 0) = c;
        R(0, 2) = -s;
        R(2, 0) = s;
        R(2, 2) = c;
        return Mat4(R * J_std() * R.transpose());
    });
    CHECK(nijenhuis_residual(A) > 1e-2);
}

TEST_CASE("twisted Monge-Ampere right-hand side") {
    ChartGrid grid(8);
    SUBCASE("f = 0 with any background") {
        SplitPotential s(grid, 2.0, 0.5);
        for (double v : twisted_ma_rhs(s)) CHECK(v == 0);
    }
    SUBCASE("plus-only potential against the 2-torus driver") {
        double a = 0.4, b = 0.3;
        SplitPotential s = SplitPotential::from_function(
            grid, [&](const X4& x) { return a * std::cos(x[0]) + b * std::sin(x[0] + 2 * x[1]); }, 1.5, 1.0);
        Field r = twisted_ma_rhs(s);
        for (std::size_t p = 0; p < r.size(); ++p) {
            auto x = grid.coords(p);
            double lap = -a * std::cos(x[0]) - 5 * b * std::sin(x[0] + 2 * x[1]);
            CHECK(std::abs(r[p] - std::log(1 + 0.25 * lap / 1.5)) < 1e-8);
        }
    }
    SUBCASE("positivity loss names the factor") {
        SplitPotential s = SplitPotential::from_function(grid, [](const X4& x) { return 8 * std::cos(x[2]); });
        try {
            twisted_ma_rhs(s);
            FAIL("no throw");
        } catch (const SingularityError& e) {
            CHECK(std::string(e.what()).find("minus") != std::string::npos);
        }
        SplitPotential t = SplitPotential::from_function(grid, [](const X4& x) { return 8 * std::cos(x[1]); });
        CHECK_THROWS_WITH_AS(twisted_ma_rhs(t), doctest::Contains("plus"), SingularityError);
    }
}

TEST_CASE("twisted flow") {
    SUBCASE("f = 0 is constant") {
        ChartGrid grid(8);
        TwistedRun run = run_twisted_flow(SplitPotential(grid), 0.5);
        CHECK(run.final_state.f == Field(grid.size(), 0.0));
    }
    SUBCASE("scalar and tensor flow agree, decay to flat") {
        ChartGrid grid(8);
        // 8^4 resolves amplitude 0.1 to ~5e-6; 0.3 needs 16^4
        SplitPotential s = random_split(grid, 11, 4, 0.1);
        TwistedOptions opt;
        opt.sample_every = 20;
        TwistedRun run = run_twisted_flow(s, 6.0, opt);
        CHECK(run.max_consistency < 1e-5);
        CHECK(run.samples.front().flat_distance > 0.05);
        CHECK(run.samples.back().flat_distance < 0.02 * run.samples.front().flat_distance);
        CHECK(run.monotone_tail);
        MESSAGE("tensor consistency " << run.max_consistency << ", flat distance "
                                      << run.samples.front().flat_distance << " -> "
                                      << run.samples.back().flat_distance);
    }
    SUBCASE("two resolutions") {
        ChartGrid g8(8), g16(16);
        TwistedOptions opt;
        opt.dt = 0.02;
        opt.check_tensor = false;
        TwistedRun a = run_twisted_flow(random_split(g8, 12, 4, 0.3), 1.0, opt);
        TwistedRun b = run_twisted_flow(random_split(g16, 12, 4, 0.3), 1.0, opt);
        double d = 0;
        for (std::size_t p = 0; p < g8.size(); ++p) {
            auto i = g8.multi_index(p);
            std::size_t q = g16.index(2 * i[0], 2 * i[1], 2 * i[2], 2 * i[3]);
            d = std::max(d, std::abs(a.final_state.f[p] - b.final_state.f[q]));
        }
        CHECK(d < 1e-6);
    }
    SUBCASE("plus-only potential follows the 2-torus parabolic Monge-Ampere flow") {
        ChartGrid grid(16);
        SplitPotential s = random_split(grid, 13, 4, 0.4, true);
        TwistedOptions opt;
        opt.dt = 0.01;
        opt.sample_every = 10;
        opt.keep_fields = true;
        TwistedRun run = run_twisted_flow(s, 1.0, opt);
        // independent 2-D solver on the (x0, x1) slice: u_t = log(1 + (u_00 + u_11) / 4)
        int n = grid.n;
        Eigen::MatrixXd D = fourier_d2(n, grid.periods[0]);
        Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd L(n * n, n * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) L.block(i * n, j * n, n, n) = D(i, j) * I + (i == j ? 1.0 : 0.0) * D;
        Eigen::VectorXd u(n * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) u(i * n + j) = s.f[grid.index(i, j, 0, 0)];
        auto rhs = [&](const Eigen::VectorXd& v) {
            Eigen::VectorXd w = L * v;
            for (int k = 0; k < w.size(); ++k) w(k) = std::log(1 + 0.25 * w(k));
            return w;
        };
        double h = 0.0025, t = 0;
        double worst = 0;
        for (std::size_t k = 0; k < run.t.size(); ++k) {
            while (t < run.t[k] - 1e-12) {
                Eigen::VectorXd k1 = rhs(u), k2 = rhs(u + 0.5 * h * k1), k3 = rhs(u + 0.5 * h * k2),
                                k4 = rhs(u + h * k3);
                u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
                t += h;
            }
            for (std::size_t p = 0; p < grid.size(); ++p) {
                auto i = grid.multi_index(p);
                worst = std::max(worst, std::abs(run.f[k][p] - u(i[0] * n + i[1])));
            }
        }
        CHECK(worst < 1e-6);
        MESSAGE("2-torus oracle deviation " << worst);
    }
    SUBCASE("singularity is reported") {
        ChartGrid grid(8);
        // far beyond the explicit stability limit
        SplitPotential s = SplitPotential::from_function(grid, [](const X4& x) { return 0.5 * std::cos(3 * x[0]); });
        TwistedOptions opt;
        opt.dt = 1.0;
        CHECK_THROWS_AS(run_twisted_flow(s, 1.0, opt), SingularityError);
    }
}

TEST_CASE("Joyce deformation") {
    ChartGrid grid(16);
    GKTriple hk = hyperkahler_triple(grid);
    SUBCASE("constant f is the identity") {
        GKTriple t = joyce_deform(hk, Field(grid.size(), 0.7), 0.1);
        CHECK(t.J.sup_diff(hk.J) == 0);
        CHECK(t.g.sup_diff(hk.g) == 0);
    }
    SUBCASE("single mode on the hyperkahler torus") {
        Field f(grid.size());
        for (std::size_t p = 0; p < f.size(); ++p) f[p] = 0.1 * std::sin(grid.coords(p)[1]);
        GKTriple t = joyce_deform(hk, f, 0.5);
        GKReport r = t.check();
        CHECK(r.ok(1e-6));
        CHECK(t.J.sup_diff(hk.J) > 1e-2);
        PoissonReport P = poisson_sigma(t);
        CHECK(P.max_abs_p < 1);
        CHECK(P.min_rank == 4);
        // no longer hyperkahler: the angle varies
        auto [lo, hi] = std::minmax_element(P.p.begin(), P.p.end());
        CHECK(*hi - *lo > 1e-3);
        MESSAGE("GK residual " << std::max({r.compat, r.ddc, r.nijenhuis_J, r.hermitian}));
    }
    SUBCASE("generic f on a deformed triple: residual shrinks with dt") {
        // the first step is exact on constant J; the second transports a varying J
        Field f0(grid.size()), f(grid.size());
        for (std::size_t p = 0; p < f.size(); ++p) {
            auto x = grid.coords(p);
            f0[p] = 0.15 * std::sin(x[1]);
            f[p] = 0.2 * std::sin(x[1] + x[2]) + 0.1 * std::cos(x[0] - x[3]);
        }
        GKTriple base = joyce_deform(hk, f0, 0.5);
        auto residual = [](const GKReport& r) {
            return std::max({r.compat, r.ddc, r.nijenhuis_J, r.hermitian, r.complex_sq});
        };
        double r1 = residual(joyce_deform(base, f, 0.1).check());
        double r2 = residual(joyce_deform(base, f, 0.05).check());
        CHECK(r1 < 1e-2);
        // one Euler step: first order in dt
        CHECK(r2 < 0.6 * r1);
        MESSAGE("residuals " << r1 << " " << r2);
    }
    SUBCASE("f then -f returns to the start") {
        Field f(grid.size()), mf(grid.size());
        for (std::size_t p = 0; p < f.size(); ++p) {
            auto x = grid.coords(p);
            f[p] = 0.2 * std::sin(x[1] + x[2]) + 0.1 * std::cos(x[0]);
            mf[p] = -f[p];
        }
        double e1 = joyce_deform(joyce_deform(hk, f, 0.1), mf, 0.1).J.sup_diff(hk.J);
        double e2 = joyce_deform(joyce_deform(hk, f, 0.05), mf, 0.05).J.sup_diff(hk.J);
        CHECK(e1 < 1e-2);
        CHECK(e2 / e1 == doctest::Approx(0.25).epsilon(0.2));
    }
    SUBCASE("type change is rejected") {
        Field f(grid.size());
        for (std::size_t p = 0; p < f.size(); ++p) f[p] = std::sin(grid.coords(p)[0]);
        CHECK_THROWS_AS(joyce_deform(kahler_triple(HermField::identity(grid)), f, 0.1), PreconditionError);
    }
}

TEST_CASE("Lee-vector deformation of I stays integrable to second order") {
    ChartGrid grid(8);
    GKTriple t = split_triple(random_split(grid, 7, 5, 0.3));
    auto X = lee_vector(t);
    MatField L = lie_derivative(t.I, X);
    CHECK(L.sup() > 1e-2);
    auto perturbed = [&](const MatField& dir, double dt) {
        MatField A = t.I;
        for (int k = 0; k < 16; ++k)
            for (std::size_t p = 0; p < grid.size(); ++p) A.c[k][p] += dt * dir.c[k][p];
        return nijenhuis_residual(A);
    };
    double n1 = perturbed(L, 0.02), n2 = perturbed(L, 0.01);
    CHECK(n2 / n1 == doctest::Approx(0.25).epsilon(0.05));
    // a generic direction is first order
    MatField G = MatField::from_function(grid, [](const X4& x) {
        Mat4 m = Mat4::Zero();
        m(0, 2) = std::sin(x[1]);
        m(3, 1) = std::cos(x[0]);
        return m;
    });
    double g1 = perturbed(G, 0.02), g2 = perturbed(G, 0.01);
    CHECK(g2 / g1 == doctest::Approx(0.5).epsilon(0.05));
    MESSAGE("Nijenhuis along L_theta I: " << n1 << " " << n2 << "; generic: " << g1 << " " << g2);
}
