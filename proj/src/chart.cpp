#include "pcf/chart.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include "pcf/errors.hpp"

namespace pcf {

Conventions& conventions() {
    static Conventions c;
    return c;
}

const Spectral& spectral_for(const ChartGrid& g) {
    static std::map<std::pair<int, std::array<double, 4>>, std::unique_ptr<Spectral>> cache;
    auto key = std::make_pair(g.n, g.periods);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, std::make_unique<Spectral>(g)).first;
    return *it->second;
}

HermField::HermField(const ChartGrid& g) : grid(g) {
    for (auto& f : c) f.assign(g.size(), 0.0);
}

HermField HermField::identity(const ChartGrid& g) {
    HermField h(g);
    std::fill(h.c[0].begin(), h.c[0].end(), 1.0);
    std::fill(h.c[1].begin(), h.c[1].end(), 1.0);
    return h;
}

HermField HermField::from_function(const ChartGrid& g,
                                   const std::function<Mat2c(const std::array<double, 4>&)>& fn) {
    HermField h(g);
    for (std::size_t p = 0; p < g.size(); ++p) h.set(p, fn(g.coords(p)));
    return h;
}

HermField& HermField::axpy(double s, const HermField& o) {
    for (int k = 0; k < 4; ++k)
        for (std::size_t p = 0; p < c[k].size(); ++p) c[k][p] += s * o.c[k][p];
    return *this;
}

double HermField::sup() const {
    double m = 0;
    for (std::size_t p = 0; p < size(); ++p) m = std::max(m, at(p).cwiseAbs().maxCoeff());
    return m;
}

double HermField::sup_diff(const HermField& o) const {
    double m = 0;
    for (std::size_t p = 0; p < size(); ++p)
        m = std::max(m, (at(p) - o.at(p)).cwiseAbs().maxCoeff());
    return m;
}

std::pair<double, std::size_t> HermField::min_eigenvalue() const {
    double best = 1e300;
    std::size_t loc = 0;
    for (std::size_t p = 0; p < size(); ++p) {
        double a = c[0][p], b = c[1][p], r2 = c[2][p] * c[2][p] + c[3][p] * c[3][p];
        double lam = 0.5 * (a + b) - std::sqrt(0.25 * (a - b) * (a - b) + r2);
        if (lam < best) best = lam, loc = p;
    }
    return {best, loc};
}

Mat2c HermField::average() const {
    Mat2c s = Mat2c::Zero();
    for (std::size_t p = 0; p < size(); ++p) s += at(p);
    return s / double(size());
}

void validate_metric(const HermField& g) {
    auto [lam, loc] = g.min_eigenvalue();
    if (!(lam > 0)) {
        std::ostringstream os;
        os << "metric not positive definite: smallest eigenvalue " << lam << " at point " << loc;
        throw ValidationError(os.str());
    }
}

HermJet::HermJet(const HermField& h, bool second) : grid(h.grid), val(h.c) {
    const Spectral& sp = spectral_for(grid);
    for (int k = 0; k < 4; ++k) {
        d[k] = sp.grad(h.c[k]);
        if (second) dd[k] = sp.hessian(h.c[k]);
    }
}

static Mat2c assemble(double a, double b, double re, double im) {
    Mat2c m;
    m(0, 0) = a;
    m(1, 1) = b;
    m(0, 1) = cplx(re, im);
    m(1, 0) = cplx(re, -im);
    return m;
}

Mat2c HermJet::h(std::size_t p) const { return assemble(val[0][p], val[1][p], val[2][p], val[3][p]); }
Mat2c HermJet::dh(std::size_t p, int a) const {
    return assemble(d[0][a][p], d[1][a][p], d[2][a][p], d[3][a][p]);
}
Mat2c HermJet::ddh(std::size_t p, int a, int b) const {
    int s = sym_index(a, b);
    return assemble(dd[0][s][p], dd[1][s][p], dd[2][s][p], dd[3][s][p]);
}

// J e_a = sgn[a] e_{perm[a]}
static const int kPerm[4] = {1, 0, 3, 2};
static const double kSgn[4] = {1, -1, 1, -1};

PointGeometry point_geometry(const Mat2c& h, const std::array<Mat2c, 4>& dh, unsigned parts) {
    PointGeometry G;
    G.g = herm_to_riem(h);
    G.gi = G.g.inverse();
    const Mat4& J = J_std();
    std::array<Mat4, 4> dw2;
    for (int a = 0; a < 4; ++a) {
        G.dg[a] = herm_to_riem(dh[a]);
        dw2[a] = J.transpose() * G.dg[a];
    }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                G.dw[a][b][c] = dw2[a](b, c) + dw2[b](c, a) + dw2[c](a, b);
    double s = conventions().dc_sign;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                G.H[a][b][c] = s * kSgn[a] * kSgn[b] * kSgn[c] * G.dw[kPerm[a]][kPerm[b]][kPerm[c]];
    Tensor3 low;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int d = 0; d < 4; ++d)
                low[a][b][d] = 0.5 * (G.dg[a](b, d) + G.dg[b](a, d) - G.dg[d](a, b));
    for (int c = 0; c < 4; ++c)
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                double v = 0;
                for (int d = 0; d < 4; ++d) v += G.gi(c, d) * low[a][b][d];
                G.gamma[c][a][b] = v;
            }
    // tau_a = tr(J Gamma^B_a),  (Gamma^B_a)^d_c = Gamma^d_{ac} + 1/2 H_{ac}^d
    for (int a = 0; a < 4; ++a) {
        double t = 0;
        for (int d = 0; d < 4; ++d) {
            int c = kPerm[d];
            double gb = G.gamma[d][a][c];
            for (int e = 0; e < 4; ++e) gb += 0.5 * G.gi(d, e) * G.H[a][c][e];
            t += kSgn[d] * gb;
        }
        G.tau(a) = t;
    }
    if (parts & kGeoDstar) G.dstar_w = -hodge3(G.dw, G.g);
    if (parts & kGeoTheta) G.theta = hodge3(G.H, G.g);
    return G;
}

static std::array<Mat2c, 4> dh_at(const HermJet& j, std::size_t p) {
    return {j.dh(p, 0), j.dh(p, 1), j.dh(p, 2), j.dh(p, 3)};
}

// complex derivatives: D[i] = d_i h, Db[i] = dbar_i h, DDb[i][j] = d_i dbar_j h
struct ComplexJet {
    std::array<Mat2c, 2> D, Db;
    std::array<std::array<Mat2c, 2>, 2> DDb;
};

static ComplexJet complex_jet(const HermJet& j, std::size_t p, bool second) {
    ComplexJet c;
    std::array<Mat2c, 4> dh = dh_at(j, p);
    for (int i = 0; i < 2; ++i) {
        c.D[i] = Mat2c::Zero();
        c.Db[i] = Mat2c::Zero();
        for (int a = 0; a < 4; ++a) {
            c.D[i] += P(i, a) * dh[a];
            c.Db[i] += std::conj(P(i, a)) * dh[a];
        }
    }
    if (second)
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < 2; ++k) {
                Mat2c m = Mat2c::Zero();
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b) {
                        cplx w = P(i, a) * std::conj(P(k, b));
                        if (w != 0.0) m += w * j.ddh(p, a, b);
                    }
                c.DDb[i][k] = m;
            }
    return c;
}

// d_i dbar_j log det h
static Mat2c logdet_ddbar(const Mat2c& h, const ComplexJet& c) {
    Mat2c hi = h.inverse(), out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out(i, j) = (hi * c.DDb[i][j]).trace() - (hi * c.D[i] * hi * c.Db[j]).trace();
    return out;
}

// T_{ik pbar}, antisymmetric in i,k; only T_{01p} is independent
static Vec2c chern_T(const ComplexJet& c) {
    Vec2c t;
    for (int p = 0; p < 2; ++p) t(p) = c.D[0](1, p) - c.D[1](0, p);
    return t;
}

static cplx Tfull(const Vec2c& t, int i, int k, int p) {
    if (i == k) return 0.0;
    return i == 0 ? t(p) : -t(p);
}

static Mat2c S_tensor(const Mat2c& h, const ComplexJet& c) {
    Mat2c G = h.inverse();  // G(l,k) = g^{lbar k}
    Mat2c S = Mat2c::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            cplx s = 0;
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    cplx om = -c.DDb[k][l](i, j);
                    for (int p = 0; p < 2; ++p)
                        for (int q = 0; q < 2; ++q) om += G(q, p) * c.D[k](i, q) * c.Db[l](p, j);
                    s += G(l, k) * om;
                }
            S(i, j) = s;
        }
    return S;
}

static Mat2c Q1_tensor(const Mat2c& h, const Vec2c& t) {
    Mat2c G = h.inverse();
    Mat2c Q = Mat2c::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l)
                    for (int p = 0; p < 2; ++p)
                        for (int q = 0; q < 2; ++q)
                            Q(i, j) += G(l, k) * G(q, p) * Tfull(t, i, k, q) * std::conj(Tfull(t, j, l, p));
    return Q;
}

// (1,1) part of d(phi) for a 1-form field, as Hermitian components
static HermField d_one_form_11(const ChartGrid& grid, const std::array<Field, 4>& phi, double scale) {
    const Spectral& sp = spectral_for(grid);
    std::array<std::array<Field, 4>, 4> dphi;
    for (int b = 0; b < 4; ++b) dphi[b] = sp.grad(phi[b]);
    HermField out(grid);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        Mat4 w;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) w(a, b) = scale * (dphi[b][a][p] - dphi[a][b][p]);
        out.set(p, form_to_herm(proj11(w)));
    }
    return out;
}

double check_pluriclosed(const HermField& w) {
    validate_metric(w);
    const Spectral& sp = spectral_for(w.grid);
    // only the Hessian blocks entering d1 d1bar h22 + d2 d2bar h11 - 2 Re d2 d1bar h12
    auto H11 = sp.hessian(w.c[0]);
    auto H22 = sp.hessian(w.c[1]);
    auto Hre = sp.hessian(w.c[2]);
    auto Him = sp.hessian(w.c[3]);
    double m = 0;
    for (std::size_t p = 0; p < w.size(); ++p) {
        auto ddb = [&](const std::array<Field, 10>& H, int i, int j) {
            cplx s = 0;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    cplx q = P(i, a) * std::conj(P(j, b));
                    if (q != 0.0) s += q * H[sym_index(a, b)][p];
                }
            return s;
        };
        cplx v = ddb(H22, 0, 0) + ddb(H11, 1, 1) -
                 2.0 * (ddb(Hre, 1, 0) + cplx(0, 1) * ddb(Him, 1, 0)).real();
        m = std::max(m, std::abs(v));
    }
    return m;
}

TorsionField chern_torsion(const HermField& g) {
    validate_metric(g);
    HermJet j(g, false);
    TorsionField t;
    t.grid = g.grid;
    for (auto* arr : {&t.T, &t.H, &t.theta})
        for (auto& f : *arr) f.assign(g.size(), 0.0);
    for (std::size_t p = 0; p < g.size(); ++p) {
        ComplexJet c = complex_jet(j, p, false);
        Vec2c T = chern_T(c);
        t.T[0][p] = T(0).real();
        t.T[1][p] = T(0).imag();
        t.T[2][p] = T(1).real();
        t.T[3][p] = T(1).imag();
        PointGeometry G = point_geometry(j.h(p), dh_at(j, p));
        auto hc = three_form_components(G.H);
        for (int k = 0; k < 4; ++k) {
            t.H[k][p] = hc[k];
            t.theta[k][p] = G.theta(k);
        }
    }
    return t;
}

namespace {
struct AllForms {
    HermField rhoB11, S, Q1, rhoC, dds11;
};

AllForms compute_forms(const HermField& g, bool second, bool want_c) {
    HermJet j(g, second);
    const ChartGrid& grid = g.grid;
    AllForms out;
    std::array<Field, 4> tau, phi;
    for (int a = 0; a < 4; ++a) {
        tau[a].assign(grid.size(), 0.0);
        if (want_c) phi[a].assign(grid.size(), 0.0);
    }
    if (second) {
        out.S = HermField(grid);
        out.Q1 = HermField(grid);
        out.rhoC = HermField(grid);
    }
    for (std::size_t p = 0; p < grid.size(); ++p) {
        Mat2c h = j.h(p);
        PointGeometry G = point_geometry(h, dh_at(j, p), want_c ? kGeoDstar : 0u);
        for (int a = 0; a < 4; ++a) {
            tau[a][p] = G.tau(a);
            if (want_c) phi[a][p] = G.dstar_w(a);
        }
        if (second) {
            ComplexJet c = complex_jet(j, p, true);
            out.S.set(p, S_tensor(h, c));
            out.Q1.set(p, Q1_tensor(h, chern_T(c)));
            out.rhoC.set(p, -logdet_ddbar(h, c));
        }
    }
    out.rhoB11 = d_one_form_11(grid, tau, 0.5);
    if (want_c) out.dds11 = d_one_form_11(grid, phi, 1.0);
    return out;
}
}  // namespace

CurvatureForms curvature_forms(const HermField& g) {
    validate_metric(g);
    AllForms f = compute_forms(g, true, false);
    return {std::move(f.rhoC), std::move(f.rhoB11), std::move(f.S), std::move(f.Q1)};
}

HermField pcf_rate(const HermField& g) {
    AllForms f = compute_forms(g, false, false);
    HermField r(g.grid);
    r.axpy(-1.0, f.rhoB11);
    return r;
}

HermField krf_rate(const HermField& g) {
    HermJet j(g, true);
    HermField r(g.grid);
    for (std::size_t p = 0; p < g.size(); ++p)
        r.set(p, logdet_ddbar(j.h(p), complex_jet(j, p, true)));
    return r;
}

PcfRhs pcf_rhs(const HermField& g, const RhsOptions& opt) {
    validate_metric(g);
    PcfRhs out;
    out.report.grid_n = g.grid.n;
    out.report.pluriclosed_residual = check_pluriclosed(g);
    if (out.report.pluriclosed_residual > opt.pluriclosed_tol) {
        std::ostringstream os;
        os << "metric is not pluriclosed: residual " << out.report.pluriclosed_residual;
        throw PreconditionError(os.str(), out.report.pluriclosed_residual);
    }
    AllForms f = compute_forms(g, opt.cross_check, opt.cross_check);
    out.rhs = HermField(g.grid);
    out.rhs.axpy(-1.0, f.rhoB11);
    out.report.rhs_sup = out.rhs.sup();
    if (opt.cross_check) {
        out.form_a = f.Q1;
        out.form_a.axpy(-1.0, f.S);
        out.form_c = f.dds11;
        out.form_c.axpy(-1.0, f.rhoC);
        out.report.sup_ab = out.form_a.sup_diff(out.rhs);
        out.report.sup_ac = out.form_a.sup_diff(out.form_c);
        out.report.sup_bc = out.rhs.sup_diff(out.form_c);
    }
    return out;
}

double max_stable_dt(const ChartGrid& grid, double cfl) {
    double h = grid.min_spacing();
    return cfl * h * h;
}

HermField step_flow(const HermField& g, double dt, const StepOptions& opt) {
    if (!(dt >= 0)) throw ValidationError("dt must be nonnegative");
    if (dt > max_stable_dt(g.grid, opt.cfl) * (1 + 1e-12)) {
        std::ostringstream os;
        os << "dt " << dt << " exceeds CFL bound " << max_stable_dt(g.grid, opt.cfl);
        throw ValidationError(os.str());
    }
    validate_metric(g);
    auto rate = [&](const HermField& x) { return opt.kahler_ricci ? krf_rate(x) : pcf_rate(x); };
    HermField k1 = rate(g);
    HermField y = g;
    y.axpy(0.5 * dt, k1);
    HermField k2 = rate(y);
    y = g;
    y.axpy(0.5 * dt, k2);
    HermField k3 = rate(y);
    y = g;
    y.axpy(dt, k3);
    HermField k4 = rate(y);
    HermField out = g;
    out.axpy(dt / 6, k1).axpy(dt / 3, k2).axpy(dt / 3, k3).axpy(dt / 6, k4);
    auto [lam, loc] = out.min_eigenvalue();
    if (lam < opt.positivity_floor) {
        std::ostringstream os;
        os << "metric eigenvalue " << lam << " below " << opt.positivity_floor << " at point " << loc;
        throw SingularityError(os.str(), long(loc));
    }
    return out;
}

double pairing_with(const HermField& g, const Mat4& gamma) {
    // omega ^ gamma = (1/4) omega_ab gamma_cd eps^{abcd} dx^0123
    double tot = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        Mat4 w = herm_to_form(g.at(p));
        double s = 0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    for (int d = 0; d < 4; ++d) {
                        double e = eps4(a, b, c, d);
                        if (e != 0) s += e * w(a, b) * gamma(c, d);
                    }
        tot += 0.25 * s;
    }
    return tot * g.grid.cell_volume();
}

}  // namespace pcf
