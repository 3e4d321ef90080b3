#include <cmath>

#include "doctest.h"
#include "pcf/errors.hpp"
#include "pcf/potential.hpp"

using namespace pcf;

namespace {

// complex Hessian f_{i jbar} of a real field, spectrally
std::array<Field, 4> complex_hessian(const Field& f, const ChartGrid& g) {
    auto H = spectral_for(g).hessian(f);
    std::array<Field, 4> out;
    for (auto& o : out) o.assign(g.size(), 0.0);
    for (std::size_t p = 0; p < g.size(); ++p) {
        Mat2c m;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                cplx s = 0;
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b) s += P(i, a) * std::conj(P(j, b)) * H[sym_index(a, b)][p];
                m(i, j) = s;
            }
        out[0][p] = m(0, 0).real();
        out[1][p] = m(1, 1).real();
        out[2][p] = m(0, 1).real();
        out[3][p] = m(0, 1).imag();
    }
    return out;
}

// alpha = c * (i/2) d f for a real field f
PotentialForm alpha_of_potential(const Field& f, const ChartGrid& g, double c) {
    auto d = spectral_for(g).grad(f);
    PotentialForm a(g);
    for (std::size_t p = 0; p < g.size(); ++p)
        for (int i = 0; i < 2; ++i) {
            cplx di = 0;
            for (int b = 0; b < 4; ++b) di += P(i, b) * d[b][p];
            a.set(p, i, c * cplx(0, 0.5) * di);
        }
    return a;
}

Field potential_field(const ChartGrid& g, double amp) {
    Field f(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
        auto x = g.coords(p);
        f[p] = amp * (std::cos(x[0] + x[2]) + 0.6 * std::sin(x[1] - x[3]) + 0.3 * std::cos(x[0] - x[1] + x[3]));
    }
    return f;
}

HermField kahler_from_f(const Field& f, const ChartGrid& g) {
    HermField h = HermField::identity(g);
    auto H = complex_hessian(f, g);
    for (int k = 0; k < 4; ++k)
        for (std::size_t p = 0; p < g.size(); ++p) h.c[k][p] += H[k][p];
    return h;
}

}  // namespace

TEST_CASE("metric_from_alpha") {
    ChartGrid g(8);
    PotentialForm zero(g);
    CHECK(metric_from_alpha(zero).sup_diff(HermField::identity(g)) == 0.0);

    Field f = potential_field(g, 0.05);
    // alpha = -(i/2) d f generates i ddbar f; the opposite sign generates -i ddbar f
    HermField plus = metric_from_alpha(alpha_of_potential(f, g, -1));
    CHECK(plus.sup_diff(kahler_from_f(f, g)) < 1e-12);
    HermField minus = metric_from_alpha(alpha_of_potential(f, g, 1));
    Field mf = f;
    for (auto& v : mf) v = -v;
    CHECK(minus.sup_diff(kahler_from_f(mf, g)) < 1e-12);

    AlphaModes m;
    m.modes.push_back({0, {0, 0, 1, 0}, 0.1});
    HermField h = metric_from_alpha(m.sample(g));
    CHECK(check_pluriclosed(h) < 1e-10);
    CHECK(h.sup_diff(m.metric_field(g)) < 1e-12);

    PotentialForm big = m.scaled(40).sample(g);
    CHECK_THROWS_AS(metric_from_alpha(big), SingularityError);
}

TEST_CASE("gauge redundancy alpha -> alpha + d h") {
    ChartGrid g(8);
    PotentialForm a = random_alpha(11, 5, 1, 0.04).sample(g);
    Field hfun = potential_field(g, 0.3);
    auto d = spectral_for(g).grad(hfun);
    PotentialForm b = a;
    for (std::size_t p = 0; p < g.size(); ++p)
        for (int i = 0; i < 2; ++i) {
            cplx di = 0;
            for (int c = 0; c < 4; ++c) di += P(i, c) * d[c][p];
            b.set(p, i, a.at(p, i) + di);
        }
    CHECK(metric_from_alpha(a).sup_diff(metric_from_alpha(b)) < 1e-12);
    PotentialRunOptions opt;
    opt.sample_every = 1000;
    auto ra = run_potential_flow(a, 0.3, opt);
    auto rb = run_potential_flow(b, 0.3, opt);
    CHECK(metric_from_alpha(ra.final_alpha).sup_diff(metric_from_alpha(rb.final_alpha)) < 1e-8);
}

TEST_CASE("alpha_flow_rhs") {
    SUBCASE("flat") {
        ChartGrid g(8);
        PotentialForm r = alpha_flow_rhs(PotentialForm(g));
        CHECK(dbar_plus_d(r).sup() < 1e-14);
    }
    SUBCASE("consistency with the tensor flow") {
        ChartGrid g(16);
        PotentialForm a = random_alpha(5, 6, 1, 0.04).sample(g);
        HermField lhs = dbar_plus_d(alpha_flow_rhs(a));
        HermField rhs = pcf_rate(metric_from_alpha(a));
        CHECK(rhs.sup() > 1e-3);
        CHECK(lhs.sup_diff(rhs) < 1e-6);
    }
    SUBCASE("Kahler potential gives the Monge-Ampere driver") {
        ChartGrid g(16);
        Field f = potential_field(g, 0.05);
        PotentialForm a = alpha_of_potential(f, g, -1);
        PotentialForm r = alpha_flow_rhs(a);
        HermField h = metric_from_alpha(a);
        Field L(g.size());
        for (std::size_t p = 0; p < g.size(); ++p) L[p] = std::log(h.at(p).determinant().real());
        PotentialForm expect = alpha_of_potential(L, g, -1);
        double m = 0;
        for (int k = 0; k < 4; ++k) m = std::max(m, max_abs_diff(r.a[k], expect.a[k]));
        CHECK(m < 1e-8);
    }
}

TEST_CASE("generalized metric W") {
    ChartGrid g(8);
    SUBCASE("alpha = 0 with Riemannian identity metric") {
        PotentialForm a(g);
        a.background = 0.5 * Mat2c::Identity();  // g_ij = 1/2 delta is the Euclidean metric
        Mat8 W = w_matrix_at(a, 5);
        CHECK((W - Mat8::Identity()).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("determinant one, symmetric, positive") {
        PotentialForm a = random_alpha(2, 6, 1, 0.08).sample(g);
        WReport r = w_matrix(a);
        CHECK(r.max_det_dev < 1e-8);
        CHECK(r.max_asym < 1e-12);
        CHECK(r.min_eig > 0);
    }
    SUBCASE("Kahler alpha: symmetric d alpha and direct block assembly") {
        Field f = potential_field(g, 0.05);
        PotentialForm a = alpha_of_potential(f, g, -1);
        auto H = spectral_for(g).hessian(f);
        HermField h = metric_from_alpha(a);
        for (std::size_t p : {std::size_t(0), std::size_t(777), std::size_t(3001)}) {
            // B = i d alpha = (1/2) d_i d_j f, symmetric
            Eigen::Matrix2cd B;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    cplx s = 0;
                    for (int c = 0; c < 4; ++c)
                        for (int d = 0; d < 4; ++d) s += P(i, c) * P(j, d) * H[sym_index(c, d)][p];
                    B(i, j) = 0.5 * s;
                }
            CHECK(std::abs(B(0, 1) - B(1, 0)) < 1e-14);
            // b(e_x,e_y) = 2 Re sum B_ij dz^i(e_x) dz^j(e_y); the symmetric real Hessian part
            Mat4 b;
            const cplx dz[2][4] = {{1, cplx(0, 1), 0, 0}, {0, 0, 1, cplx(0, 1)}};
            for (int x = 0; x < 4; ++x)
                for (int y = 0; y < 4; ++y) {
                    cplx s = 0;
                    for (int i = 0; i < 2; ++i)
                        for (int j = 0; j < 2; ++j) s += B(i, j) * dz[i][x] * dz[j][y];
                    b(x, y) = 2 * s.real();
                }
            Mat4 gr = herm_to_riem(h.at(p));
            Mat8 W = w_matrix_at(a, p);
            CHECK((W.topRightCorner<4, 4>() - b * gr.inverse()).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((b - b.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        }
    }
}

TEST_CASE("potential flow trajectories") {
    SUBCASE("alpha = 0 stays put") {
        ChartGrid g(8);
        auto run = run_potential_flow(PotentialForm(g), 0.5);
        CHECK(metric_from_alpha(run.final_alpha).sup_diff(HermField::identity(g)) < 1e-14);
    }
    SUBCASE("Kahler data follows the scalar parabolic Monge-Ampere flow") {
        ChartGrid g(8);
        Field f = potential_field(g, 0.05);
        PotentialForm a = alpha_of_potential(f, g, -1);
        double t_end = 1.0;
        double dt = max_stable_dt(g);
        int n = int(std::ceil(t_end / dt));
        dt = t_end / n;
        PotentialRunOptions opt;
        opt.dt = dt;
        opt.sample_every = n;
        auto run = run_potential_flow(a, t_end, opt);
        // scalar oracle: f_t = log det(I + f_{i jbar})
        auto rate = [&](const Field& u) {
            HermField h = kahler_from_f(u, g);
            Field L(g.size());
            for (std::size_t p = 0; p < g.size(); ++p) L[p] = std::log(h.at(p).determinant().real());
            return L;
        };
        Field u = f;
        for (int s = 0; s < n; ++s) {
            Field k1 = rate(u), y = u;
            for (std::size_t p = 0; p < y.size(); ++p) y[p] = u[p] + 0.5 * dt * k1[p];
            Field k2 = rate(y);
            for (std::size_t p = 0; p < y.size(); ++p) y[p] = u[p] + 0.5 * dt * k2[p];
            Field k3 = rate(y);
            for (std::size_t p = 0; p < y.size(); ++p) y[p] = u[p] + dt * k3[p];
            Field k4 = rate(y);
            for (std::size_t p = 0; p < y.size(); ++p)
                u[p] += dt / 6 * (k1[p] + 2 * k2[p] + 2 * k3[p] + k4[p]);
        }
        CHECK(metric_from_alpha(run.final_alpha).sup_diff(kahler_from_f(u, g)) < 1e-6);
        CHECK(run.series.back().det_w_dev < 1e-8);
    }
}
