#include "pcf/potential.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "pcf/errors.hpp"

namespace pcf {

PotentialForm::PotentialForm(const ChartGrid& g) : grid(g) {
    for (auto& f : a) f.assign(g.size(), 0.0);
}

PotentialForm& PotentialForm::axpy(double s, const PotentialForm& o) {
    for (int k = 0; k < 4; ++k)
        for (std::size_t p = 0; p < a[k].size(); ++p) a[k][p] += s * o.a[k][p];
    return *this;
}

static std::array<double, 4> kvec(const ChartGrid& g, const std::array<int, 4>& k) {
    std::array<double, 4> v{};
    for (int a = 0; a < 4; ++a) v[a] = k[a] * 2 * M_PI / g.periods[a];
    return v;
}

Vec2c AlphaModes::alpha(const ChartGrid& g, const std::array<double, 4>& x) const {
    Vec2c v = Vec2c::Zero();
    for (const auto& m : modes) {
        auto kv = kvec(g, m.k);
        double ph = kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2] + kv[3] * x[3];
        v(m.comp) += m.coef * std::exp(cplx(0, ph));
    }
    return v;
}

Mat2c AlphaModes::metric(const ChartGrid& g, const std::array<double, 4>& x) const {
    Mat2c h = background;
    for (const auto& m : modes) {
        auto kv = kvec(g, m.k);
        double ph = kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2] + kv[3] * x[3];
        cplx e = m.coef * std::exp(cplx(0, ph));
        // d_a alpha = i k_a alpha
        for (int j = 0; j < 2; ++j) {
            cplx dbar = 0, d = 0;
            for (int a = 0; a < 4; ++a) {
                dbar += std::conj(P(j, a)) * cplx(0, kv[a]);
                d += P(j, a) * cplx(0, -kv[a]);
            }
            // i dbar_j alpha_i  with i = m.comp
            h(m.comp, j) += cplx(0, 1) * dbar * e;
            // -i d_j conj(alpha_i) enters entry (j, i)
            h(j, m.comp) += cplx(0, -1) * d * std::conj(e);
        }
    }
    return h;
}

HermField AlphaModes::metric_field(const ChartGrid& g) const {
    return HermField::from_function(g, [&](const std::array<double, 4>& x) { return metric(g, x); });
}

PotentialForm AlphaModes::sample(const ChartGrid& g) const {
    PotentialForm p(g);
    p.background = background;
    for (std::size_t q = 0; q < g.size(); ++q) {
        Vec2c v = alpha(g, g.coords(q));
        p.set(q, 0, v(0));
        p.set(q, 1, v(1));
    }
    return p;
}

AlphaModes AlphaModes::scaled(double s) const {
    AlphaModes o = *this;
    for (auto& m : o.modes) m.coef *= s;
    return o;
}

AlphaModes random_alpha(std::uint64_t seed, int nmodes, int kmax, double amplitude) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> kd(-kmax, kmax), cd(0, 1);
    std::normal_distribution<double> nd(0, 1);
    AlphaModes m;
    for (int i = 0; i < nmodes; ++i) {
        AlphaMode md;
        md.comp = cd(rng);
        do {
            for (auto& k : md.k) k = kd(rng);
        } while (md.k == std::array<int, 4>{0, 0, 0, 0});
        md.coef = amplitude * cplx(nd(rng), nd(rng));
        m.modes.push_back(md);
    }
    return m;
}

HermField dbar_plus_d(const PotentialForm& r) {
    const Spectral& sp = spectral_for(r.grid);
    std::array<std::array<Field, 4>, 4> d;
    for (int k = 0; k < 4; ++k) d[k] = sp.grad(r.a[k]);
    HermField out(r.grid);
    for (std::size_t p = 0; p < r.grid.size(); ++p) {
        // D[i][a] = d_a alpha_i
        cplx D[2][4];
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 4; ++a) D[i][a] = cplx(d[2 * i][a][p], d[2 * i + 1][a][p]);
        Mat2c h;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                cplx dbar_j_ai = 0, d_i_conj_aj = 0;
                for (int a = 0; a < 4; ++a) {
                    dbar_j_ai += std::conj(P(j, a)) * D[i][a];
                    d_i_conj_aj += P(i, a) * std::conj(D[j][a]);
                }
                h(i, j) = cplx(0, 1) * dbar_j_ai - cplx(0, 1) * d_i_conj_aj;
            }
        out.set(p, h);
    }
    return out;
}

HermField metric_from_alpha(const PotentialForm& a) {
    HermField h = dbar_plus_d(a);
    for (std::size_t p = 0; p < h.size(); ++p) h.set(p, h.at(p) + a.background);
    auto [lam, loc] = h.min_eigenvalue();
    if (!(lam > 0)) {
        std::ostringstream os;
        os << "alpha generates a degenerate metric: eigenvalue " << lam << " at point " << loc;
        throw SingularityError(os.str(), long(loc));
    }
    return h;
}

PotentialForm alpha_flow_rhs(const PotentialForm& a) {
    HermField h = metric_from_alpha(a);
    HermJet j(h, false);
    const ChartGrid& grid = a.grid;
    Field L(grid.size());
    std::array<Field, 4> phi;
    for (auto& f : phi) f.assign(grid.size(), 0.0);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        Mat2c hp = j.h(p);
        std::array<Mat2c, 4> dh{j.dh(p, 0), j.dh(p, 1), j.dh(p, 2), j.dh(p, 3)};
        PointGeometry G = point_geometry(hp, dh, kGeoDstar);
        for (int b = 0; b < 4; ++b) phi[b][p] = G.dstar_w(b);
        L[p] = std::log(hp.determinant().real());
    }
    auto dL = spectral_for(grid).grad(L);
    PotentialForm r(grid);
    r.background = a.background;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        Vec4 ph(phi[0][p], phi[1][p], phi[2][p], phi[3][p]);
        Vec2c p10 = one_form_10(ph);
        for (int i = 0; i < 2; ++i) {
            cplx dLi = 0;
            for (int b = 0; b < 4; ++b) dLi += P(i, b) * dL[b][p];
            r.set(p, i, p10(i) - cplx(0, 0.5) * dLi);
        }
    }
    return r;
}

Mat8 w_matrix_point(const Mat2c& h, const Eigen::Matrix2cd& B) {
    Mat4 g = herm_to_riem(h);
    Mat4 b;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) {
            cplx s = 0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    cplx dzi = (x == 2 * i) ? cplx(1) : (x == 2 * i + 1 ? cplx(0, 1) : cplx(0));
                    cplx dzj = (y == 2 * j) ? cplx(1) : (y == 2 * j + 1 ? cplx(0, 1) : cplx(0));
                    s += B(i, j) * dzi * dzj;
                }
            b(x, y) = 2 * s.real();
        }
    Mat4 gi = g.inverse();
    Mat8 W;
    W.topLeftCorner<4, 4>() = g + b * gi * b.transpose();
    W.topRightCorner<4, 4>() = b * gi;
    W.bottomLeftCorner<4, 4>() = gi * b.transpose();
    W.bottomRightCorner<4, 4>() = gi;
    return W;
}

namespace {
struct WInputs {
    HermField h;
    std::array<std::array<Field, 4>, 4> d;
};
WInputs w_inputs(const PotentialForm& a) {
    WInputs w{metric_from_alpha(a), {}};
    const Spectral& sp = spectral_for(a.grid);
    for (int k = 0; k < 4; ++k) w.d[k] = sp.grad(a.a[k]);
    return w;
}
Eigen::Matrix2cd B_at(const WInputs& w, std::size_t p) {
    // B_ij = i d_i alpha_j
    Eigen::Matrix2cd B;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            cplx s = 0;
            for (int a = 0; a < 4; ++a) s += P(i, a) * cplx(w.d[2 * j][a][p], w.d[2 * j + 1][a][p]);
            B(i, j) = cplx(0, 1) * s;
        }
    return B;
}
}  // namespace

Mat8 w_matrix_at(const PotentialForm& a, std::size_t p) {
    WInputs w = w_inputs(a);
    return w_matrix_point(w.h.at(p), B_at(w, p));
}

WReport w_matrix(const PotentialForm& a) {
    WInputs w = w_inputs(a);
    WReport r;
    r.min_eig = 1e300;
    for (std::size_t p = 0; p < a.grid.size(); ++p) {
        Mat8 W = w_matrix_point(w.h.at(p), B_at(w, p));
        r.max_det_dev = std::max(r.max_det_dev, std::abs(W.determinant() - 1));
        r.max_asym = std::max(r.max_asym, (W - W.transpose()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Mat8> es(W, Eigen::EigenvaluesOnly);
        r.min_eig = std::min(r.min_eig, es.eigenvalues()(0));
    }
    return r;
}

double flat_distance(const HermField& g) {
    // volume normalization is a constant rescaling and cancels in the relative distance
    Mat2c avg = g.average();
    double na = avg.cwiseAbs().maxCoeff();
    double m = 0;
    for (std::size_t p = 0; p < g.size(); ++p)
        m = std::max(m, (g.at(p) - avg).cwiseAbs().maxCoeff());
    return m / na;
}

double torsion_l2(const HermField& g) {
    TorsionField t = chern_torsion(g);
    double s = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        Mat4 gr = herm_to_riem(g.at(p));
        Tensor3 H = three_form({t.H[0][p], t.H[1][p], t.H[2][p], t.H[3][p]});
        Mat4 gi = gr.inverse();
        double n2 = 0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    for (int d = 0; d < 4; ++d)
                        for (int e = 0; e < 4; ++e)
                            for (int f = 0; f < 4; ++f)
                                n2 += gi(a, d) * gi(b, e) * gi(c, f) * H[a][b][c] * H[d][e][f];
        s += n2 / 6.0 * std::sqrt(gr.determinant());
    }
    return std::sqrt(s * g.grid.cell_volume());
}

bool monotone_tail(const std::vector<double>& v, double tail_fraction, double slack) {
    if (v.size() < 2) return true;
    std::size_t start = std::size_t(double(v.size()) * (1 - tail_fraction));
    for (std::size_t i = std::max<std::size_t>(start, 1); i < v.size(); ++i)
        if (v[i] > v[i - 1] * (1 + slack) + slack) return false;
    return true;
}

PotentialRun run_potential_flow(const PotentialForm& a0, double t_end,
                                const PotentialRunOptions& opt,
                                const std::function<void(const PotentialSample&)>& on_sample) {
    if (!(t_end >= 0)) throw ValidationError("t_end must be nonnegative");
    double dtmax = max_stable_dt(a0.grid, opt.cfl);
    double dt = opt.dt > 0 ? opt.dt : dtmax;
    if (dt > dtmax * (1 + 1e-12)) throw ValidationError("dt exceeds CFL bound");
    int nsteps = int(std::ceil(t_end / dt - 1e-9));
    if (nsteps > 0) dt = t_end / nsteps;
    PotentialRun run;
    PotentialForm a = a0;
    auto sample = [&](double t) {
        HermField h = metric_from_alpha(a);
        PotentialSample s{t, flat_distance(h), w_matrix(a).max_det_dev, torsion_l2(h),
                          h.min_eigenvalue().first};
        run.series.push_back(s);
        if (on_sample) on_sample(s);
    };
    sample(0);
    for (int n = 1; n <= nsteps; ++n) {
        PotentialForm k1 = alpha_flow_rhs(a);
        PotentialForm y = a;
        y.axpy(0.5 * dt, k1);
        PotentialForm k2 = alpha_flow_rhs(y);
        y = a;
        y.axpy(0.5 * dt, k2);
        PotentialForm k3 = alpha_flow_rhs(y);
        y = a;
        y.axpy(dt, k3);
        PotentialForm k4 = alpha_flow_rhs(y);
        a.axpy(dt / 6, k1).axpy(dt / 3, k2).axpy(dt / 3, k3).axpy(dt / 6, k4);
        if (n % opt.sample_every == 0 || n == nsteps) sample(n * dt);
    }
    run.final_alpha = a;
    std::vector<double> d;
    for (auto& s : run.series) d.push_back(s.flat_distance);
    run.monotone_tail = monotone_tail(d);
    return run;
}

}  // namespace pcf
