#include "pcf/genkahler.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pcf/errors.hpp"
#include "pcf/potential.hpp"

namespace pcf {

namespace {

void check_grid(const ChartGrid& a, const ChartGrid& b, const char* what) {
    if (!(a == b)) throw ValidationError(std::string(what) + ": grid mismatch");
}

// D[comp][a] = d_a of every component
std::array<std::array<Field, 4>, 16> jet(const MatField& A) {
    const Spectral& sp = spectral_for(A.grid);
    std::array<std::array<Field, 4>, 16> D;
    for (int k = 0; k < 16; ++k) D[k] = sp.grad(A.c[k]);
    return D;
}

Mat4 grad_at(const std::array<std::array<Field, 4>, 16>& D, std::size_t p, int a) {
    Mat4 m;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = D[4 * i + j][a][p];
    return m;
}

// DX(a, b) = d_b X^a
std::array<std::array<Field, 4>, 4> vector_jet(const ChartGrid& grid, const std::array<Field, 4>& X) {
    const Spectral& sp = spectral_for(grid);
    std::array<std::array<Field, 4>, 4> D;
    for (int a = 0; a < 4; ++a) D[a] = sp.grad(X[a]);
    return D;
}

Mat4 dx_at(const std::array<std::array<Field, 4>, 4>& D, std::size_t p) {
    Mat4 m;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) m(a, b) = D[a][b][p];
    return m;
}

// t(A e_a, A e_b, A e_c)
Tensor3 act3(const Tensor3& t, const Mat4& A) {
    Tensor3 u{};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double s = 0;
                for (int x = 0; x < 4; ++x)
                    for (int y = 0; y < 4; ++y)
                        for (int z = 0; z < 4; ++z) s += t[x][y][z] * A(x, a) * A(y, b) * A(z, c);
                u[a][b][c] = s;
            }
    return u;
}

// periodic cubic Lagrange weights around y (in units of the spacing)
struct Stencil {
    std::array<int, 4> i0;
    std::array<std::array<double, 4>, 4> w;
};

Stencil stencil(const ChartGrid& grid, const std::array<double, 4>& y) {
    Stencil s;
    for (int a = 0; a < 4; ++a) {
        double u = y[a] / grid.spacing(a);
        double fl = std::floor(u);
        double t = u - fl;
        int i = int(fl);
        s.i0[a] = ((i - 1) % grid.n + grid.n) % grid.n;
        s.w[a] = {-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2, -(t + 1) * t * (t - 2) / 2,
                  (t + 1) * t * (t - 1) / 6};
    }
    return s;
}

Mat4 interpolate(const MatField& A, const Stencil& s) {
    const ChartGrid& g = A.grid;
    Mat4 m = Mat4::Zero();
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                for (int d = 0; d < 4; ++d) {
                    double w = s.w[0][a] * s.w[1][b] * s.w[2][c] * s.w[3][d];
                    std::size_t q = g.index((s.i0[0] + a) % g.n, (s.i0[1] + b) % g.n, (s.i0[2] + c) % g.n,
                                            (s.i0[3] + d) % g.n);
                    m += w * A.at(q);
                }
    return m;
}

double d2_symbol_plus(const std::array<double, 4>& k) { return -0.25 * (k[0] * k[0] + k[1] * k[1]); }
double d2_symbol_minus(const std::array<double, 4>& k) { return -0.25 * (k[2] * k[2] + k[3] * k[3]); }

const Mat4& quaternion_J() {
    static const Mat4 J = [] {
        Mat4 m = Mat4::Zero();
        m(2, 0) = 1;   // J e0 = e2
        m(0, 2) = -1;  // J e2 = -e0
        m(3, 1) = -1;  // J e1 = -e3
        m(1, 3) = 1;   // J e3 = e1
        return m;
    }();
    return J;
}

Mat4 split_J() {
    Mat4 m = J_std();
    m.block<2, 2>(2, 2) *= -1;
    return m;
}

}  // namespace

// ---- matrix fields

MatField::MatField(const ChartGrid& g) : grid(g) {
    for (auto& f : c) f.assign(g.size(), 0.0);
}

MatField MatField::constant(const ChartGrid& g, const Mat4& m) {
    MatField A(g);
    for (std::size_t p = 0; p < g.size(); ++p) A.set(p, m);
    return A;
}

MatField MatField::from_function(const ChartGrid& g, const std::function<Mat4(const std::array<double, 4>&)>& fn) {
    MatField A(g);
    for (std::size_t p = 0; p < g.size(); ++p) A.set(p, fn(g.coords(p)));
    return A;
}

double MatField::sup() const {
    double m = 0;
    for (auto& f : c)
        for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

double MatField::sup_diff(const MatField& o) const {
    check_grid(grid, o.grid, "MatField::sup_diff");
    double m = 0;
    for (int k = 0; k < 16; ++k)
        for (std::size_t p = 0; p < c[k].size(); ++p) m = std::max(m, std::abs(c[k][p] - o.c[k][p]));
    return m;
}

// ---- integrability and Lie derivatives

double nijenhuis_residual(const MatField& J) {
    auto D = jet(J);
    double worst = 0;
    for (std::size_t p = 0; p < J.grid.size(); ++p) {
        Mat4 j = J.at(p);
        std::array<Mat4, 4> dj;
        for (int a = 0; a < 4; ++a) dj[a] = grad_at(D, p, a);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = b + 1; c < 4; ++c) {
                    double s = 0;
                    for (int d = 0; d < 4; ++d) {
                        s += j(d, b) * dj[d](a, c) - j(d, c) * dj[d](a, b);
                        s -= j(a, d) * (dj[b](d, c) - dj[c](d, b));
                    }
                    worst = std::max(worst, std::abs(s));
                }
    }
    return worst;
}

MatField lie_derivative(const MatField& A, const std::array<Field, 4>& X) {
    auto D = jet(A);
    auto DX = vector_jet(A.grid, X);
    MatField out(A.grid);
    for (std::size_t p = 0; p < A.grid.size(); ++p) {
        Mat4 m = A.at(p), dx = dx_at(DX, p);
        Mat4 r = m * dx - dx * m;
        for (int c = 0; c < 4; ++c) r += X[c][p] * grad_at(D, p, c);
        out.set(p, r);
    }
    return out;
}

ThreeFormField dc_torsion(const SymField& g, const MatField& I) {
    check_grid(g.grid, I.grid, "dc_torsion");
    TwoFormField w(g.grid);
    for (std::size_t p = 0; p < g.grid.size(); ++p) {
        Mat4 m = I.at(p).transpose() * g.at(p);  // w(X, Y) = g(IX, Y)
        w.set(p, 0.5 * (m - m.transpose()));
    }
    ThreeFormField dw = exterior_d(w);
    ThreeFormField H(g.grid);
    double s = conventions().dc_sign;
    for (std::size_t p = 0; p < g.grid.size(); ++p) H.set(p, act3(dw.at(p), I.at(p)));
    for (auto& f : H.c)
        for (double& v : f) v *= s;
    return H;
}

std::array<Field, 4> lee_vector(const GKTriple& t) {
    ThreeFormField H = dc_torsion(t.g, t.I);
    std::array<Field, 4> X;
    for (auto& f : X) f.resize(t.grid().size());
    for (std::size_t p = 0; p < t.grid().size(); ++p) {
        Mat4 g = t.g.at(p);
        Vec4 v = g.inverse() * hodge3(H.at(p), g);
        for (int a = 0; a < 4; ++a) X[a][p] = v(a);
    }
    return X;
}

// ---- triples

GKReport GKTriple::check() const {
    check_grid(g.grid, I.grid, "GKTriple");
    check_grid(g.grid, J.grid, "GKTriple");
    GKReport r;
    for (std::size_t p = 0; p < grid().size(); ++p) {
        Mat4 m = g.at(p), i = I.at(p), j = J.at(p);
        r.complex_sq = std::max({r.complex_sq, (i * i + Mat4::Identity()).cwiseAbs().maxCoeff(),
                                 (j * j + Mat4::Identity()).cwiseAbs().maxCoeff()});
        r.hermitian = std::max({r.hermitian, (i.transpose() * m * i - m).cwiseAbs().maxCoeff(),
                                (j.transpose() * m * j - m).cwiseAbs().maxCoeff()});
    }
    ThreeFormField HI = dc_torsion(g, I), HJ = dc_torsion(g, J);
    r.ddc = closedness(HI);
    HI.axpy(1, HJ);
    r.compat = HI.sup();
    r.nijenhuis_I = nijenhuis_residual(I);
    r.nijenhuis_J = nijenhuis_residual(J);
    return r;
}

void GKTriple::validate(double tol) const {
    grid().validate();
    GKReport r = check();
    if (g.min_eigenvalue() <= 0) throw SingularityError("GKTriple: metric is not positive");
    if (r.complex_sq > tol || r.hermitian > tol)
        throw PreconditionError("GKTriple: I, J are not g-orthogonal complex structures",
                                std::max(r.complex_sq, r.hermitian));
    if (r.nijenhuis_I > tol || r.nijenhuis_J > tol)
        throw PreconditionError("GKTriple: structure not integrable", std::max(r.nijenhuis_I, r.nijenhuis_J));
    if (r.compat > tol || r.ddc > tol)
        throw PreconditionError("GKTriple: d^c_I w_I + d^c_J w_J or d d^c_I w_I nonzero", std::max(r.compat, r.ddc));
}

GKTriple kahler_triple(const HermField& h) {
    validate_metric(h);
    GKTriple t{SymField::from_herm(h), MatField::constant(h.grid, J_std()), MatField::constant(h.grid, J_std())};
    return t;
}

GKTriple hyperkahler_triple(const ChartGrid& grid) {
    return GKTriple{SymField::identity(grid), MatField::constant(grid, J_std()), MatField::constant(grid, quaternion_J())};
}

PoissonReport poisson_sigma(const GKTriple& t, double locus_tol) {
    check_grid(t.g.grid, t.I.grid, "poisson_sigma");
    check_grid(t.g.grid, t.J.grid, "poisson_sigma");
    const ChartGrid& grid = t.grid();
    PoissonReport r;
    r.sigma = MatField(grid);
    r.p.resize(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p) {
        Mat4 i = t.I.at(p), j = t.J.at(p);
        Mat4 s = 0.5 * (i * j - j * i) * t.g.at(p).inverse();
        r.sigma.set(p, s);
        r.sigma_asym = std::max(r.sigma_asym, (s + s.transpose()).cwiseAbs().maxCoeff());
        double pv = 0.25 * (i * j).trace();
        r.p[p] = pv;
        r.max_abs_p = std::max(r.max_abs_p, std::abs(pv));
        if (std::abs(pv) >= 1 - locus_tol) r.degenerate.push_back(p);
        Eigen::JacobiSVD<Mat4> svd(s);
        double top = svd.singularValues()(0);
        int rank = 0;
        for (int k = 0; k < 4; ++k)
            if (svd.singularValues()(k) > 1e-10 * std::max(1.0, top)) ++rank;
        r.min_rank = std::min(r.min_rank, rank);
        r.max_rank = std::max(r.max_rank, rank);
    }
    return r;
}

// ---- commuting case

SplitPotential::SplitPotential(const ChartGrid& g, double bp, double bm)
    : f(g.size(), 0.0), grid(g), b_plus(bp), b_minus(bm) {}

SplitPotential SplitPotential::from_function(const ChartGrid& g,
                                             const std::function<double(const std::array<double, 4>&)>& fn,
                                             double bp, double bm) {
    SplitPotential s(g, bp, bm);
    for (std::size_t p = 0; p < g.size(); ++p) s.f[p] = fn(g.coords(p));
    return s;
}

HermField SplitPotential::metric() const {
    if (!(b_plus > 0) || !(b_minus > 0)) throw ValidationError("SplitPotential: background must be positive");
    if (f.size() != grid.size()) throw ValidationError("SplitPotential: size mismatch");
    const Spectral& sp = spectral_for(grid);
    Field lp = sp.apply_symbol(f, d2_symbol_plus), lm = sp.apply_symbol(f, d2_symbol_minus);
    HermField h(grid);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        h.c[0][p] = b_plus + lp[p];
        h.c[1][p] = b_minus - lm[p];
    }
    return h;
}

void SplitPotential::validate() const {
    HermField h = metric();
    for (std::size_t p = 0; p < grid.size(); ++p) {
        if (!(h.c[0][p] > 0)) throw SingularityError("SplitPotential: plus factor is not positive", long(p));
        if (!(h.c[1][p] > 0)) throw SingularityError("SplitPotential: minus factor is not positive", long(p));
    }
}

SplitPotential random_split(const ChartGrid& grid, std::uint64_t seed, int nmodes, double amplitude,
                            bool plus_only) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1);
    std::uniform_int_distribution<int> K(-1, 1);
    struct Mode {
        std::array<int, 4> k;
        double phase, c;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < nmodes; ++m) {
        Mode md{};
        for (int& k : md.k) k = K(rng);
        if (plus_only) md.k[2] = md.k[3] = 0;
        if (md.k == std::array<int, 4>{0, 0, 0, 0}) md.k[plus_only ? 0 : m % 4] = 1;
        md.phase = 3 * U(rng);
        md.c = amplitude * U(rng);
        modes.push_back(md);
    }
    return SplitPotential::from_function(grid, [&](const std::array<double, 4>& x) {
        double v = 0;
        for (auto& m : modes) {
            double arg = m.phase;
            for (int a = 0; a < 4; ++a) arg += m.k[a] * x[a] * 2 * M_PI / grid.periods[a];
            v += m.c * std::cos(arg);
        }
        return v;
    });
}

GKTriple split_triple(const SplitPotential& s) {
    s.validate();
    HermField h = s.metric();
    return GKTriple{SymField::from_herm(h), MatField::constant(s.grid, J_std()), MatField::constant(s.grid, split_J())};
}

Field twisted_ma_rhs(const SplitPotential& s) {
    HermField h = s.metric();
    Field r(s.grid.size());
    for (std::size_t p = 0; p < r.size(); ++p) {
        double a = h.c[0][p], b = h.c[1][p];
        if (!(a > 0)) throw SingularityError("twisted_ma_rhs: plus factor lost positivity", long(p));
        if (!(b > 0)) throw SingularityError("twisted_ma_rhs: minus factor lost positivity", long(p));
        r[p] = std::log(a / s.b_plus) - std::log(b / s.b_minus);
    }
    return r;
}

HermField split_metric_rate(const SplitPotential& s, const Field& fdot) {
    const Spectral& sp = spectral_for(s.grid);
    Field lp = sp.apply_symbol(fdot, d2_symbol_plus), lm = sp.apply_symbol(fdot, d2_symbol_minus);
    HermField r(s.grid);
    r.c[0] = lp;
    r.c[1] = lm;
    for (double& v : r.c[1]) v = -v;
    return r;
}

double twisted_stable_dt(const SplitPotential& s, double cfl) {
    HermField h = s.metric();
    double m = 1e300;
    for (std::size_t p = 0; p < s.grid.size(); ++p) m = std::min({m, h.c[0][p], h.c[1][p]});
    if (!(m > 0)) throw SingularityError("twisted flow: metric lost positivity");
    double hs = s.grid.min_spacing();
    return cfl * hs * hs * m;
}

TwistedRun run_twisted_flow(const SplitPotential& s0, double t_end, const TwistedOptions& opt,
                            const std::function<void(const TwistedSample&)>& on_sample) {
    s0.validate();
    if (!(t_end >= 0)) throw ValidationError("run_twisted_flow: negative end time");
    if (opt.sample_every < 1) throw ValidationError("run_twisted_flow: sample_every must be >= 1");
    TwistedRun run;
    SplitPotential s = s0;
    auto sample = [&](double t) {
        TwistedSample ts;
        ts.t = t;
        auto [lo, hi] = std::minmax_element(s.f.begin(), s.f.end());
        ts.f_osc = *hi - *lo;
        HermField h = s.metric();
        ts.flat_distance = flat_distance(h);
        ts.min_eig = h.min_eigenvalue().first;
        ts.consistency = -1;
        if (opt.check_tensor) {
            HermField scalar = split_metric_rate(s, twisted_ma_rhs(s));
            ts.consistency = pcf_rate(h).sup_diff(scalar);
            run.max_consistency = std::max(run.max_consistency, ts.consistency);
        }
        run.samples.push_back(ts);
        if (opt.keep_fields) {
            run.t.push_back(t);
            run.f.push_back(s.f);
        }
        if (on_sample) on_sample(ts);
    };
    auto with = [&](const Field& base, double c, const Field& k) {
        SplitPotential x = s;
        for (std::size_t p = 0; p < x.f.size(); ++p) x.f[p] = base[p] + c * k[p];
        return x;
    };
    double t = 0;
    long step = 0;
    sample(0);
    while (t < t_end - 1e-14) {
        double dt = opt.dt > 0 ? opt.dt : twisted_stable_dt(s, opt.cfl);
        dt = std::min(dt, t_end - t);
        try {
            Field k1 = twisted_ma_rhs(s);
            Field k2 = twisted_ma_rhs(with(s.f, 0.5 * dt, k1));
            Field k3 = twisted_ma_rhs(with(s.f, 0.5 * dt, k2));
            Field k4 = twisted_ma_rhs(with(s.f, dt, k3));
            for (std::size_t p = 0; p < s.f.size(); ++p) s.f[p] += dt / 6 * (k1[p] + 2 * k2[p] + 2 * k3[p] + k4[p]);
            s.validate();
        } catch (const SingularityError& e) {
            throw SingularityError(e.what(), e.location, t);
        }
        t += dt;
        ++step;
        if (step % opt.sample_every == 0 || t >= t_end - 1e-14) sample(t);
    }
    std::vector<double> fd;
    for (auto& x : run.samples) fd.push_back(x.flat_distance);
    run.monotone_tail = monotone_tail(fd);
    run.final_state = s;
    return run;
}

// ---- nondegenerate deformation

GKTriple joyce_deform(const GKTriple& t, const Field& f, double dt, const JoyceOptions& opt) {
    const ChartGrid& grid = t.grid();
    check_grid(grid, t.I.grid, "joyce_deform");
    check_grid(grid, t.J.grid, "joyce_deform");
    if (f.size() != grid.size()) throw ValidationError("joyce_deform: size mismatch");
    PoissonReport P = poisson_sigma(t);
    const Spectral& sp = spectral_for(grid);
    auto df = sp.grad(f);
    double dfmax = 0;
    for (std::size_t p = 0; p < grid.size(); ++p)
        for (int a = 0; a < 4; ++a) dfmax = std::max(dfmax, std::abs(df[a][p]));
    std::array<Field, 4> X;
    for (auto& x : X) x.assign(grid.size(), 0.0);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        Vec4 d(df[0][p], df[1][p], df[2][p], df[3][p]);
        bool support = d.cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, dfmax);
        if (support && std::abs(P.p[p]) >= 1 - opt.type_tol)
            throw PreconditionError("joyce_deform: type change on the support of df", std::abs(P.p[p]));
        Vec4 v = P.sigma.at(p) * d;
        for (int a = 0; a < 4; ++a) X[a][p] = v(a);
    }
    auto DX = vector_jet(grid, X);
    GKTriple out = t;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        Mat4 dx = dx_at(DX, p);
        Vec4 xv(X[0][p], X[1][p], X[2][p], X[3][p]);
        if (xv.cwiseAbs().maxCoeff() == 0 && dx.cwiseAbs().maxCoeff() == 0) continue;
        if (std::abs(P.p[p]) >= 1 - opt.type_tol)
            throw PreconditionError("joyce_deform: sigma degenerate where the deformation acts", std::abs(P.p[p]));
        auto x = grid.coords(p);
        std::array<double, 4> y;
        for (int a = 0; a < 4; ++a) y[a] = x[a] + dt * xv(a);
        Mat4 dphi = Mat4::Identity() + dt * dx;
        Mat4 Jn = dphi.inverse() * interpolate(t.J, stencil(grid, y)) * dphi;
        Mat4 omega = P.sigma.at(p).inverse();
        Mat4 i = t.I.at(p);
        Mat4 g = 0.5 * omega * (i * Jn - Jn * i);
        out.J.set(p, Jn);
        out.g.set(p, g);
    }
    if (!(out.g.min_eigenvalue() > 0)) throw SingularityError("joyce_deform: rebuilt metric is not positive");
    return out;
}

}  // namespace pcf
