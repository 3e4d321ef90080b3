#include "pcf/grf.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "pcf/errors.hpp"

namespace pcf {

namespace {

const int kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
const int kTrip[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};

void check_grid(const ChartGrid& a, const ChartGrid& b, const char* what) {
    if (!(a == b)) throw ValidationError(std::string(what) + ": grid mismatch");
}

// m_aa' m_bb' m_cc' t_a'b'c'
Tensor3 contract3(const Tensor3& t, const Mat4& m) {
    Tensor3 u{}, v{}, w{};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double s = 0;
                for (int e = 0; e < 4; ++e) s += m(c, e) * t[a][b][e];
                u[a][b][c] = s;
            }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double s = 0;
                for (int e = 0; e < 4; ++e) s += m(b, e) * u[a][e][c];
                v[a][b][c] = s;
            }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double s = 0;
                for (int e = 0; e < 4; ++e) s += m(a, e) * v[e][b][c];
                w[a][b][c] = s;
            }
    return w;
}

// value, first and second partials of every component of g
struct MetricJet {
    std::array<std::array<Field, 4>, 10> d;
    std::array<std::array<Field, 10>, 10> dd;
    bool second;

    MetricJet(const SymField& g, bool second_) : second(second_) {
        const Spectral& sp = spectral_for(g.grid);
        for (int k = 0; k < 10; ++k) {
            d[k] = sp.grad(g.c[k]);
            if (second) dd[k] = sp.hessian(g.c[k]);
        }
    }
    std::array<Mat4, 4> dg(std::size_t p) const {
        std::array<Mat4, 4> r;
        for (int e = 0; e < 4; ++e)
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) r[e](a, b) = d[sym_index(a, b)][e][p];
        return r;
    }
    double ddg(std::size_t p, int e, int f, int a, int b) const {
        return dd[sym_index(a, b)][sym_index(e, f)][p];
    }
};

// Gamma^a_bd stored as G[a](b, d)
std::array<Mat4, 4> christoffel(const Mat4& gi, const std::array<Mat4, 4>& dg) {
    std::array<Mat4, 4> G;
    Tensor3 low{};
    for (int c = 0; c < 4; ++c)
        for (int b = 0; b < 4; ++b)
            for (int d = 0; d < 4; ++d) low[c][b][d] = 0.5 * (dg[b](c, d) + dg[d](c, b) - dg[c](b, d));
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int d = 0; d < 4; ++d) {
                double s = 0;
                for (int c = 0; c < 4; ++c) s += gi(a, c) * low[c][b][d];
                G[a](b, d) = s;
            }
    return G;
}

Mat4 ricci_point(const MetricJet& J, std::size_t p, const Mat4& gi, const std::array<Mat4, 4>& dg,
                 const std::array<Mat4, 4>& G) {
    // S1_bd = d_a Gamma^a_bd
    Mat4 S1 = Mat4::Zero();
    for (int a = 0; a < 4; ++a) {
        Mat4 gdg = gi * dg[a];  // (gi d_a g)(a', q)
        for (int b = 0; b < 4; ++b)
            for (int d = b; d < 4; ++d) {
                double s = 0;
                for (int q = 0; q < 4; ++q) s -= gdg(a, q) * G[q](b, d);
                for (int c = 0; c < 4; ++c)
                    s += gi(a, c) * 0.5 *
                         (J.ddg(p, a, b, c, d) + J.ddg(p, a, d, c, b) - J.ddg(p, a, c, b, d));
                S1(b, d) += s;
            }
    }
    // S2_bd = d_d d_b (1/2 log det g)
    Mat4 S2;
    std::array<Mat4, 4> gdgg;
    for (int d = 0; d < 4; ++d) gdgg[d] = gi * dg[d] * gi;
    for (int b = 0; b < 4; ++b)
        for (int d = b; d < 4; ++d) {
            double s = 0;
            for (int c = 0; c < 4; ++c)
                for (int a = 0; a < 4; ++a) s += -gdgg[d](c, a) * dg[b](c, a) + gi(c, a) * J.ddg(p, d, b, c, a);
            S2(b, d) = 0.5 * s;
        }
    Vec4 tr;
    for (int e = 0; e < 4; ++e) {
        double s = 0;
        for (int a = 0; a < 4; ++a) s += G[a](a, e);
        tr(e) = s;
    }
    Mat4 R;
    for (int b = 0; b < 4; ++b)
        for (int d = b; d < 4; ++d) {
            double s = S1(b, d) - S2(b, d);
            for (int e = 0; e < 4; ++e) {
                s += tr(e) * G[e](b, d);
                for (int a = 0; a < 4; ++a) s -= G[a](d, e) * G[e](a, b);
            }
            R(b, d) = R(d, b) = s;
        }
    return R;
}

Mat4 h_square(const Tensor3& H, const Mat4& gi, double& norm2) {
    Mat4 H2;
    Tensor3 Hr{};  // H_i^{pq}
    for (int i = 0; i < 4; ++i) {
        Mat4 Hi, up;
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) Hi(p, q) = H[i][p][q];
        up = gi * Hi * gi;
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) Hr[i][p][q] = up(p, q);
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0;
            for (int p = 0; p < 4; ++p)
                for (int q = 0; q < 4; ++q) s += H[i][p][q] * Hr[j][p][q];
            H2(i, j) = s;
        }
    norm2 = (gi.cwiseProduct(H2)).sum();
    return H2;
}

double sym_norm2(const Mat4& A, const Mat4& gi) { return (gi * A * gi * A).trace(); }

// (i_X H)_ab = X^c H_cab
Mat4 interior(const Vec4& X, const Tensor3& H) {
    Mat4 r = Mat4::Zero();
    for (int c = 0; c < 4; ++c)
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) r(a, b) += X(c) * H[c][a][b];
    return r;
}

// weighted Laplace-Beltrami pieces
struct Operator {
    const ChartGrid& grid;
    const Spectral& sp;
    Field vol;
    std::array<Field, 10> vgi;  // sqrt(g) g^{ab}
    Operator(const SymField& g) : grid(g.grid), sp(spectral_for(g.grid)) {
        vol.resize(grid.size());
        for (auto& f : vgi) f.resize(grid.size());
        for (std::size_t p = 0; p < grid.size(); ++p) {
            Mat4 m = g.at(p);
            double dt = m.determinant();
            if (!(dt > 0)) throw SingularityError("degenerate metric", long(p));
            vol[p] = std::sqrt(dt);
            Mat4 gi = m.inverse();
            for (int a = 0; a < 4; ++a)
                for (int b = a; b < 4; ++b) vgi[sym_index(a, b)][p] = vol[p] * gi(a, b);
        }
    }
    // d_a (sqrt g g^{ab} d_b u)
    Field div_grad(const Field& u) const {
        auto du = sp.grad(u);
        std::array<Field, 4> q;
        for (int a = 0; a < 4; ++a) {
            q[a].resize(grid.size());
            for (std::size_t p = 0; p < grid.size(); ++p) {
                double s = 0;
                for (int b = 0; b < 4; ++b) s += vgi[sym_index(a, b)][p] * du[b][p];
                q[a][p] = s;
            }
        }
        return sp.divergence(q);
    }
    Field laplacian(const Field& u) const {
        Field r = div_grad(u);
        for (std::size_t p = 0; p < r.size(); ++p) r[p] /= vol[p];
        return r;
    }
};

double dot(const Field& a, const Field& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

// ---- fields

SymField::SymField(const ChartGrid& g) : grid(g) {
    for (auto& f : c) f.assign(g.size(), 0.0);
}

SymField SymField::identity(const ChartGrid& g, double scale) {
    SymField s(g);
    for (int a = 0; a < 4; ++a) std::fill(s.c[sym_index(a, a)].begin(), s.c[sym_index(a, a)].end(), scale);
    return s;
}

SymField SymField::from_function(const ChartGrid& g,
                                 const std::function<Mat4(const std::array<double, 4>&)>& fn) {
    SymField s(g);
    for (std::size_t p = 0; p < g.size(); ++p) s.set(p, fn(g.coords(p)));
    return s;
}

SymField SymField::from_herm(const HermField& h) {
    SymField s(h.grid);
    for (std::size_t p = 0; p < h.size(); ++p) s.set(p, herm_to_riem(h.at(p)));
    return s;
}

SymField& SymField::axpy(double s, const SymField& o) {
    check_grid(grid, o.grid, "SymField::axpy");
    for (int k = 0; k < 10; ++k)
        for (std::size_t p = 0; p < c[k].size(); ++p) c[k][p] += s * o.c[k][p];
    return *this;
}

double SymField::sup() const {
    double m = 0;
    for (auto& f : c)
        for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

double SymField::sup_diff(const SymField& o) const {
    check_grid(grid, o.grid, "SymField::sup_diff");
    double m = 0;
    for (int k = 0; k < 10; ++k)
        for (std::size_t p = 0; p < c[k].size(); ++p) m = std::max(m, std::abs(c[k][p] - o.c[k][p]));
    return m;
}

double SymField::min_eigenvalue() const {
    double m = INFINITY;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        Eigen::SelfAdjointEigenSolver<Mat4> es(at(p), Eigen::EigenvaluesOnly);
        m = std::min(m, es.eigenvalues()(0));
    }
    return m;
}

ThreeFormField::ThreeFormField(const ChartGrid& g) : grid(g) {
    for (auto& f : c) f.assign(g.size(), 0.0);
}

ThreeFormField ThreeFormField::from_function(
    const ChartGrid& g, const std::function<std::array<double, 4>(const std::array<double, 4>&)>& fn) {
    ThreeFormField H(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
        auto v = fn(g.coords(p));
        for (int k = 0; k < 4; ++k) H.c[k][p] = v[k];
    }
    return H;
}

ThreeFormField ThreeFormField::torsion_of(const HermField& w) {
    TorsionField t = chern_torsion(w);
    ThreeFormField H(w.grid);
    H.c = t.H;
    return H;
}

void ThreeFormField::set(std::size_t p, const Tensor3& t) {
    auto v = three_form_components(t);
    for (int k = 0; k < 4; ++k) c[k][p] = v[k];
}

ThreeFormField& ThreeFormField::axpy(double s, const ThreeFormField& o) {
    check_grid(grid, o.grid, "ThreeFormField::axpy");
    for (int k = 0; k < 4; ++k)
        for (std::size_t p = 0; p < c[k].size(); ++p) c[k][p] += s * o.c[k][p];
    return *this;
}

double ThreeFormField::sup() const {
    double m = 0;
    for (auto& f : c)
        for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

TwoFormField::TwoFormField(const ChartGrid& g) : grid(g) {
    for (auto& f : c) f.assign(g.size(), 0.0);
}

Mat4 TwoFormField::at(std::size_t p) const {
    Mat4 m = Mat4::Zero();
    for (int k = 0; k < 6; ++k) {
        m(kPairs[k][0], kPairs[k][1]) = c[k][p];
        m(kPairs[k][1], kPairs[k][0]) = -c[k][p];
    }
    return m;
}

void TwoFormField::set(std::size_t p, const Mat4& m) {
    for (int k = 0; k < 6; ++k) {
        int a = kPairs[k][0], b = kPairs[k][1];
        c[k][p] = 0.5 * (m(a, b) - m(b, a));
    }
}

double TwoFormField::sup() const {
    double m = 0;
    for (auto& f : c)
        for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

// ---- exterior calculus

ThreeFormField exterior_d(const TwoFormField& B) {
    const Spectral& sp = spectral_for(B.grid);
    ThreeFormField out(B.grid);
    Field zero(B.grid.size(), 0.0);
    auto comp = [&](int a, int b) -> Field {
        Field r(B.grid.size());
        for (std::size_t p = 0; p < r.size(); ++p) r[p] = B.at(p)(a, b);
        return r;
    };
    for (int m = 0; m < 4; ++m) {
        int a = kTrip[m][0], b = kTrip[m][1], c = kTrip[m][2];
        std::array<Field, 4> v{zero, zero, zero, zero};
        v[a] = comp(b, c);
        v[b] = comp(c, a);
        v[c] = comp(a, b);
        out.c[m] = sp.divergence(v);
    }
    return out;
}

Field exterior_d(const ThreeFormField& H) {
    const Spectral& sp = spectral_for(H.grid);
    std::array<Field, 4> v{H.c[3], H.c[2], H.c[1], H.c[0]};
    for (double& x : v[1]) x = -x;
    for (double& x : v[3]) x = -x;
    return sp.divergence(v);
}

double closedness(const ThreeFormField& H) {
    double m = 0;
    for (double v : exterior_d(H)) m = std::max(m, std::abs(v));
    return m;
}

TwoFormField codifferential(const SymField& g, const ThreeFormField& H) {
    check_grid(g.grid, H.grid, "codifferential");
    const ChartGrid& grid = g.grid;
    const Spectral& sp = spectral_for(grid);
    std::size_t N = grid.size();
    std::array<std::array<Field, 4>, 6> V;
    for (auto& pr : V)
        for (auto& f : pr) f.resize(N);
    Field vol(N);
    for (std::size_t p = 0; p < N; ++p) {
        Mat4 m = g.at(p);
        double det = m.determinant();
        if (!(det > 0)) throw SingularityError("degenerate metric", long(p));
        vol[p] = std::sqrt(det);
        Tensor3 up = contract3(H.at(p), m.inverse());
        for (int k = 0; k < 6; ++k)
            for (int c = 0; c < 4; ++c) V[k][c][p] = vol[p] * up[c][kPairs[k][0]][kPairs[k][1]];
    }
    std::array<Field, 6> W;
    for (int k = 0; k < 6; ++k) W[k] = sp.divergence(V[k]);
    TwoFormField out(grid);
    for (std::size_t p = 0; p < N; ++p) {
        Mat4 w = Mat4::Zero();
        for (int k = 0; k < 6; ++k) {
            w(kPairs[k][0], kPairs[k][1]) = W[k][p];
            w(kPairs[k][1], kPairs[k][0]) = -W[k][p];
        }
        Mat4 m = g.at(p);
        out.set(p, -(m * w * m) / vol[p]);
    }
    return out;
}

ThreeFormField hodge_laplacian(const SymField& g, const ThreeFormField& H) {
    ThreeFormField out = exterior_d(codifferential(g, H));
    // d^* of the 4-form dH
    const ChartGrid& grid = g.grid;
    const Spectral& sp = spectral_for(grid);
    std::size_t N = grid.size();
    Field F = exterior_d(H);
    Field phi(N), vol(N);
    for (std::size_t p = 0; p < N; ++p) {
        vol[p] = std::sqrt(g.at(p).determinant());
        phi[p] = F[p] / vol[p];
    }
    auto dphi = sp.grad(phi);
    for (std::size_t p = 0; p < N; ++p) {
        Tensor3 W{};
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c) {
                    double s = 0;
                    for (int d = 0; d < 4; ++d) s += eps4(d, a, b, c) * dphi[d][p];
                    W[a][b][c] = -s / vol[p];
                }
        Tensor3 low = contract3(W, g.at(p));
        auto v = three_form_components(low);
        for (int k = 0; k < 4; ++k) out.c[k][p] += v[k];
    }
    for (auto& f : out.c)
        for (double& v : f) v = -v;
    return out;
}

// ---- state

GRFState::GRFState(const SymField& g_, const ThreeFormField& H_)
    : g(g_), H(H_), f(g_.grid.size(), 0.0) {}

GRFState::GRFState(const SymField& g_, const ThreeFormField& H_, const Field& f_) : g(g_), H(H_), f(f_) {}

GRFState GRFState::flat(const ChartGrid& grid) {
    return GRFState(SymField::identity(grid), ThreeFormField(grid));
}

void GRFState::validate(double closed_tol) const {
    g.grid.validate();
    check_grid(g.grid, H.grid, "GRFState");
    if (f.size() != g.grid.size()) throw ValidationError("GRFState: dilaton size mismatch");
    for (const auto& comp : g.c)
        for (double v : comp)
            if (!std::isfinite(v)) throw ValidationError("GRFState: non-finite metric entry");
    double m = g.min_eigenvalue();
    if (!(m > 0)) throw SingularityError("GRFState: metric not positive definite");
    double r = closedness(H);
    if (r > closed_tol) throw PreconditionError("GRFState: H is not closed", r);
}

GrfGeometry grf_geometry(const GRFState& s) {
    const ChartGrid& grid = s.grid();
    check_grid(grid, s.H.grid, "grf_geometry");
    const Spectral& sp = spectral_for(grid);
    std::size_t N = grid.size();
    MetricJet J(s.g, true);
    auto df = sp.grad(s.f);
    auto ddf = sp.hessian(s.f);
    GrfGeometry out;
    out.ric = SymField(grid);
    out.H2 = SymField(grid);
    out.hess_f = SymField(grid);
    for (Field* f : {&out.scal, &out.H_norm2, &out.vol, &out.lap_f, &out.grad_f2}) f->resize(N);
    for (auto& f : out.grad_f_up) f.resize(N);
    for (std::size_t p = 0; p < N; ++p) {
        Mat4 g = s.g.at(p);
        double det = g.determinant();
        if (!(det > 0)) throw SingularityError("degenerate metric", long(p));
        Mat4 gi = g.inverse();
        auto dg = J.dg(p);
        auto G = christoffel(gi, dg);
        Mat4 R = ricci_point(J, p, gi, dg, G);
        out.ric.set(p, R);
        out.scal[p] = gi.cwiseProduct(R).sum();
        double hn;
        out.H2.set(p, h_square(s.H.at(p), gi, hn));
        out.H_norm2[p] = hn;
        out.vol[p] = std::sqrt(det);
        Vec4 d1(df[0][p], df[1][p], df[2][p], df[3][p]);
        Mat4 hf;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                double v = ddf[sym_index(a, b)][p];
                for (int c = 0; c < 4; ++c) v -= G[c](a, b) * d1(c);
                hf(a, b) = v;
            }
        out.hess_f.set(p, hf);
        out.lap_f[p] = gi.cwiseProduct(hf).sum();
        Vec4 up = gi * d1;
        out.grad_f2[p] = d1.dot(up);
        for (int a = 0; a < 4; ++a) out.grad_f_up[a][p] = up(a);
    }
    return out;
}

SymField ricci(const SymField& g) {
    return grf_geometry(GRFState(g, ThreeFormField(g.grid))).ric;
}

GrfRates grf_rhs(const GRFState& s) {
    GrfGeometry G = grf_geometry(s);
    GrfRates r{SymField(s.grid()), hodge_laplacian(s.g, s.H)};
    for (int k = 0; k < 10; ++k)
        for (std::size_t p = 0; p < s.grid().size(); ++p)
            r.dg.c[k][p] = -2 * G.ric.c[k][p] + 0.5 * G.H2.c[k][p];
    return r;
}

SymField lie_derivative(const SymField& g, const std::array<Field, 4>& X) {
    const Spectral& sp = spectral_for(g.grid);
    MetricJet J(g, false);
    std::array<std::array<Field, 4>, 4> dX;
    for (int c = 0; c < 4; ++c) dX[c] = sp.grad(X[c]);
    SymField out(g.grid);
    for (std::size_t p = 0; p < g.grid.size(); ++p) {
        Mat4 m = g.at(p);
        auto dg = J.dg(p);
        Mat4 DX;  // DX(c, a) = d_a X^c
        Mat4 L = Mat4::Zero();
        for (int c = 0; c < 4; ++c) {
            for (int a = 0; a < 4; ++a) DX(c, a) = dX[c][a][p];
            L += X[c][p] * dg[c];
        }
        Mat4 gd = m * DX;  // (g DX)(b, a) = g_bc d_a X^c
        L += gd.transpose() + gd;
        out.set(p, L);
    }
    return out;
}

GaugeReport gauge_equivalence_check(const HermField& w, double pluriclosed_tol) {
    validate_metric(w);
    GaugeReport rep;
    rep.grid_n = w.grid.n;
    rep.pluriclosed_residual = check_pluriclosed(w);
    if (rep.pluriclosed_residual > pluriclosed_tol)
        throw PreconditionError("gauge check: metric is not pluriclosed", rep.pluriclosed_residual);
    TorsionField t = chern_torsion(w);
    SymField g = SymField::from_herm(w);
    ThreeFormField H(w.grid);
    H.c = t.H;
    SymField grf(w.grid);
    {
        GrfGeometry G = grf_geometry(GRFState(g, H));
        for (int k = 0; k < 10; ++k)
            for (std::size_t p = 0; p < w.size(); ++p) grf.c[k][p] = -2 * G.ric.c[k][p] + 0.5 * G.H2.c[k][p];
    }
    std::array<Field, 4> X;
    for (auto& f : X) f.resize(w.size());
    for (std::size_t p = 0; p < w.size(); ++p) {
        Vec4 th(t.theta[0][p], t.theta[1][p], t.theta[2][p], t.theta[3][p]);
        Vec4 v = g.at(p).inverse() * th;
        for (int a = 0; a < 4; ++a) X[a][p] = v(a);
    }
    grf.axpy(-1, lie_derivative(g, X));
    HermField rate = pcf_rate(w);
    SymField pcf(w.grid);
    for (std::size_t p = 0; p < w.size(); ++p) pcf.set(p, 2 * herm_to_riem(rate.at(p)));
    rep.sup_pcf = pcf.sup();
    rep.sup_grf = grf.sup();
    rep.sup_diff = pcf.sup_diff(grf);
    return rep;
}

// ---- functionals

double integrate(const GRFState& s, const Field& density) {
    double sum = 0;
    for (std::size_t p = 0; p < density.size(); ++p) sum += density[p] * std::sqrt(s.g.at(p).determinant());
    return sum * s.grid().cell_volume();
}

double weighted_volume(const GRFState& s) {
    Field d(s.f.size());
    for (std::size_t p = 0; p < d.size(); ++p) d[p] = std::exp(-s.f[p]);
    return integrate(s, d);
}

double f_functional(const GRFState& s) {
    GrfGeometry G = grf_geometry(s);
    double sum = 0;
    for (std::size_t p = 0; p < s.f.size(); ++p)
        sum += (G.scal[p] - G.H_norm2[p] / 12 + G.grad_f2[p]) * std::exp(-s.f[p]) * G.vol[p];
    return sum * s.grid().cell_volume();
}

Field schrodinger_apply(const SymField& g, const ThreeFormField& H, const Field& u) {
    GrfGeometry G = grf_geometry(GRFState(g, H));
    Operator op(g);
    Field r = op.laplacian(u);
    for (std::size_t p = 0; p < r.size(); ++p) r[p] = -4 * r[p] + (G.scal[p] - G.H_norm2[p] / 12) * u[p];
    return r;
}

LambdaResult lambda_lowest(const SymField& g, const ThreeFormField& H, const LambdaOptions& opt) {
    check_grid(g.grid, H.grid, "lambda_lowest");
    GrfGeometry G = grf_geometry(GRFState(g, H));
    Operator op(g);
    const Spectral& sp = op.sp;
    std::size_t N = g.grid.size();
    Field V(N);
    double vmax = 0;
    for (std::size_t p = 0; p < N; ++p) {
        V[p] = G.scal[p] - G.H_norm2[p] / 12;
        vmax = std::max(vmax, std::abs(V[p]));
    }
    double sigma = -vmax - 1;
    // A x = P sqrt g (L - sigma) x on the range of P, the projector dropping Nyquist modes;
    // the collocated gradient vanishes on those, so they carry no kinetic energy
    auto applyA = [&](const Field& x) {
        Field r = op.div_grad(x);
        for (std::size_t p = 0; p < N; ++p) r[p] = -4 * r[p] + op.vol[p] * (V[p] - sigma) * x[p];
        return sp.drop_nyquist(r);
    };
    double scale = 0, shift = 0;
    for (std::size_t p = 0; p < N; ++p) {
        double tr = 0;
        for (int a = 0; a < 4; ++a) tr += op.vgi[sym_index(a, a)][p];
        scale += tr;
        shift += op.vol[p] * (V[p] - sigma);
    }
    scale = 4 * scale / (4.0 * double(N));
    shift /= double(N);
    // roundoff leaks into the Nyquist modes, where A vanishes; keep every iterate projected
    auto precond = [&](const Field& r) { return sp.drop_nyquist(sp.solve_flat_shifted(r, shift, scale)); };
    auto solve = [&](const Field& b, Field x) {
        Field r = applyA(x);
        for (std::size_t p = 0; p < N; ++p) r[p] = b[p] - r[p];
        Field z = precond(r), d = z;
        double rz = dot(r, z), bn = std::sqrt(dot(b, b));
        for (int it = 0; it < opt.cg_max; ++it) {
            if (std::sqrt(dot(r, r)) <= opt.cg_tol * bn) return x;
            Field Ad = applyA(d);
            double al = rz / dot(d, Ad);
            for (std::size_t p = 0; p < N; ++p) {
                x[p] += al * d[p];
                r[p] -= al * Ad[p];
            }
            z = precond(r);
            double rz2 = dot(r, z);
            for (std::size_t p = 0; p < N; ++p) d[p] = z[p] + (rz2 / rz) * d[p];
            rz = rz2;
        }
        if (std::sqrt(dot(r, r)) > 1e3 * opt.cg_tol * bn)
            throw ConvergenceError("lambda_lowest: inner solve did not converge");
        return x;
    };
    double cv = g.grid.cell_volume();
    auto wnorm = [&](const Field& u) {
        double s = 0;
        for (std::size_t p = 0; p < N; ++p) s += u[p] * u[p] * op.vol[p];
        return std::sqrt(s * cv);
    };
    auto rayleigh = [&](const Field& u) {
        Field Au = applyA(u);  // sqrt g (L - sigma) u
        return dot(u, Au) * cv / std::pow(wnorm(u), 2) + sigma;
    };
    Field u(N, 1.0);
    double n0 = wnorm(u);
    for (double& x : u) x /= n0;
    auto residual = [&](const Field& u, double lam) {
        Field Ru = applyA(u), Bu(N);
        for (std::size_t p = 0; p < N; ++p) Bu[p] = op.vol[p] * u[p];
        Bu = sp.drop_nyquist(Bu);
        double r2 = 0;
        for (std::size_t p = 0; p < N; ++p) {
            double v = Ru[p] - (lam - sigma) * Bu[p];
            r2 += v * v / op.vol[p];
        }
        return std::sqrt(r2 * cv);
    };
    LambdaResult res;
    for (int it = 1;; ++it) {
        Field b(N);
        for (std::size_t p = 0; p < N; ++p) b[p] = op.vol[p] * u[p];
        u = sp.drop_nyquist(solve(sp.drop_nyquist(b), u));
        double nn = wnorm(u);
        for (double& x : u) x /= nn;
        res.iterations = it;
        res.lambda = rayleigh(u);
        res.residual = residual(u, res.lambda);
        if (res.residual <= opt.tol * std::max(1.0, std::abs(res.lambda))) break;
        if (it == opt.max_iter) throw ConvergenceError("lambda_lowest: inverse iteration did not converge");
    }
    double mean = 0;
    for (double x : u) mean += x;
    if (mean < 0)
        for (double& x : u) x = -x;
    res.f.resize(N);
    for (std::size_t p = 0; p < N; ++p) {
        if (!(u[p] > 0)) throw ConvergenceError("lambda_lowest: ground state changes sign");
        res.f[p] = -2 * std::log(u[p]);
    }
    return res;
}

double lambda_variation(const SymField& g, const ThreeFormField& H, const Field& f, const SymField& h) {
    GRFState s(g, H, f);
    GrfGeometry G = grf_geometry(s);
    double sum = 0;
    for (std::size_t p = 0; p < f.size(); ++p) {
        Mat4 gi = g.at(p).inverse();
        Mat4 A = -G.ric.at(p) + 0.25 * G.H2.at(p) - G.hess_f.at(p);
        sum += (gi * A * gi * h.at(p)).trace() * std::exp(-f[p]) * G.vol[p];
    }
    return sum * g.grid.cell_volume();
}

SolitonResidual soliton_residual(const GRFState& s) {
    GrfGeometry G = grf_geometry(s);
    TwoFormField dsH = codifferential(s.g, s.H);
    SolitonResidual r;
    r.metric = SymField(s.grid());
    r.torsion = TwoFormField(s.grid());
    double m2 = 0, t2 = 0;
    for (std::size_t p = 0; p < s.f.size(); ++p) {
        Mat4 gi = s.g.at(p).inverse();
        Mat4 M = G.ric.at(p) - 0.25 * G.H2.at(p) + G.hess_f.at(p);
        Vec4 X(G.grad_f_up[0][p], G.grad_f_up[1][p], G.grad_f_up[2][p], G.grad_f_up[3][p]);
        Mat4 T = dsH.at(p) + interior(X, s.H.at(p));
        r.metric.set(p, M);
        r.torsion.set(p, T);
        double mn = sym_norm2(M, gi), tn = 0.5 * (gi * T * gi * T.transpose()).trace();
        r.metric_sup = std::max(r.metric_sup, std::sqrt(std::max(0.0, mn)));
        r.torsion_sup = std::max(r.torsion_sup, std::sqrt(std::max(0.0, tn)));
        m2 += mn * G.vol[p];
        t2 += tn * G.vol[p];
    }
    double cv = s.grid().cell_volume();
    r.metric_l2 = std::sqrt(m2 * cv);
    r.torsion_l2 = std::sqrt(t2 * cv);
    return r;
}

double monotonicity_integrand(const GRFState& s) {
    GrfGeometry G = grf_geometry(s);
    TwoFormField dsH = codifferential(s.g, s.H);
    double sum = 0;
    for (std::size_t p = 0; p < s.f.size(); ++p) {
        Mat4 gi = s.g.at(p).inverse();
        Mat4 M = G.ric.at(p) - 0.25 * G.H2.at(p) + G.hess_f.at(p);
        Vec4 X(G.grad_f_up[0][p], G.grad_f_up[1][p], G.grad_f_up[2][p], G.grad_f_up[3][p]);
        Mat4 T = dsH.at(p) + interior(X, s.H.at(p));
        double v = 2 * sym_norm2(M, gi) + 0.5 * (gi * T * gi * T.transpose()).trace();
        sum += v * std::exp(-s.f[p]) * G.vol[p];
    }
    return sum * s.grid().cell_volume();
}

Field conjugate_heat_rate(const GRFState& s) {
    GrfGeometry G = grf_geometry(s);
    Field r(s.f.size());
    for (std::size_t p = 0; p < r.size(); ++p)
        r[p] = -G.lap_f[p] + G.grad_f2[p] - G.scal[p] + 0.25 * G.H_norm2[p];
    return r;
}

// ---- flows

double grf_stable_dt(const SymField& g, double cfl) {
    double h = g.grid.min_spacing();
    double m = g.min_eigenvalue();
    if (!(m > 0)) throw SingularityError("grf: metric not positive definite");
    return cfl * h * h * m;
}

std::array<Field, 4> deturck_field(const SymField& g) {
    MetricJet J(g, false);
    std::array<Field, 4> W;
    for (auto& f : W) f.resize(g.grid.size());
    for (std::size_t p = 0; p < g.grid.size(); ++p) {
        Mat4 gi = g.at(p).inverse();
        auto G = christoffel(gi, J.dg(p));
        for (int k = 0; k < 4; ++k) W[k][p] = gi.cwiseProduct(G[k]).sum();
    }
    return W;
}

ThreeFormField lie_derivative(const ThreeFormField& H, const std::array<Field, 4>& X) {
    TwoFormField iXH(H.grid);
    for (std::size_t p = 0; p < H.grid.size(); ++p) {
        Vec4 x(X[0][p], X[1][p], X[2][p], X[3][p]);
        iXH.set(p, interior(x, H.at(p)));
    }
    ThreeFormField out = exterior_d(iXH);
    Field F = exterior_d(H);
    for (std::size_t p = 0; p < H.grid.size(); ++p) {
        Tensor3 t{};
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    for (int d = 0; d < 4; ++d) t[a][b][c] += X[d][p] * eps4(d, a, b, c) * F[p];
        auto v = three_form_components(t);
        for (int k = 0; k < 4; ++k) out.c[k][p] += v[k];
    }
    return out;
}

GrfTrajectory run_grf(const SymField& g0, const ThreeFormField& H0, double t_end, const GrfRunOptions& opt) {
    GRFState(g0, H0).validate(std::max(opt.closed_tol, 1e-6));
    if (!(t_end >= 0)) throw ValidationError("run_grf: negative end time");
    GrfTrajectory tr;
    tr.deturck = opt.deturck;
    tr.t.push_back(0);
    tr.g.push_back(g0);
    tr.H.push_back(H0);
    auto rhs = [&](const GRFState& s) {
        GrfRates r = grf_rhs(s);
        if (opt.deturck) {
            auto W = deturck_field(s.g);
            r.dg.axpy(1, lie_derivative(s.g, W));
            r.dH.axpy(1, lie_derivative(s.H, W));
        }
        return r;
    };
    double t = 0;
    while (t < t_end - 1e-14) {
        const SymField& g = tr.g.back();
        const ThreeFormField& H = tr.H.back();
        double dt = opt.dt > 0 ? opt.dt : grf_stable_dt(g, opt.cfl);
        dt = std::min(dt, t_end - t);
        auto stage = [&](double c, const GrfRates* k) {
            GRFState s(g, H);
            if (k) {
                s.g.axpy(c, k->dg);
                s.H.axpy(c, k->dH);
            }
            return rhs(s);
        };
        GrfRates k1 = stage(0, nullptr);
        GrfRates k2 = stage(0.5 * dt, &k1);
        GrfRates k3 = stage(0.5 * dt, &k2);
        GrfRates k4 = stage(dt, &k3);
        SymField gn = g;
        ThreeFormField Hn = H;
        for (auto [w, k] : {std::pair{1.0, &k1}, {2.0, &k2}, {2.0, &k3}, {1.0, &k4}}) {
            gn.axpy(w * dt / 6, k->dg);
            Hn.axpy(w * dt / 6, k->dH);
        }
        t += dt;
        if (!(gn.min_eigenvalue() > 0)) throw SingularityError("run_grf: metric lost positivity", -1, t);
        tr.t.push_back(t);
        tr.g.push_back(std::move(gn));
        tr.H.push_back(std::move(Hn));
    }
    return tr;
}

namespace {

// coefficients of the backward equation at one stored time:
// du/dtau = (1/vol) d(vol g^-1 du) - V u - W . du,  V = R - 1/4 |H|^2
struct HeatNode {
    Field vol, V;
    std::array<Field, 10> vgi;
    std::array<Field, 4> W;
    double min_eig = 0;
};

HeatNode heat_node(const SymField& g, const ThreeFormField& H, bool deturck) {
    GrfGeometry G = grf_geometry(GRFState(g, H));
    Operator op(g);
    HeatNode n;
    n.vol = op.vol;
    n.vgi = op.vgi;
    n.V.resize(g.grid.size());
    for (std::size_t p = 0; p < n.V.size(); ++p) n.V[p] = G.scal[p] - 0.25 * G.H_norm2[p];
    if (deturck) n.W = deturck_field(g);
    n.min_eig = g.min_eigenvalue();
    return n;
}

HeatNode combine(const std::vector<const HeatNode*>& nodes, const std::vector<double>& w) {
    HeatNode r = *nodes[0];
    auto mix = [&](Field& out, auto get) {
        for (std::size_t p = 0; p < out.size(); ++p) {
            double s = 0;
            for (std::size_t a = 0; a < nodes.size(); ++a) s += w[a] * get(*nodes[a])[p];
            out[p] = s;
        }
    };
    mix(r.vol, [](const HeatNode& n) -> const Field& { return n.vol; });
    mix(r.V, [](const HeatNode& n) -> const Field& { return n.V; });
    for (int k = 0; k < 10; ++k) mix(r.vgi[k], [k](const HeatNode& n) -> const Field& { return n.vgi[k]; });
    if (!r.W[0].empty())
        for (int k = 0; k < 4; ++k) mix(r.W[k], [k](const HeatNode& n) -> const Field& { return n.W[k]; });
    return r;
}

Field heat_rate(const HeatNode& n, const Spectral& sp, const Field& u) {
    auto du = sp.grad(u);
    std::size_t N = u.size();
    std::array<Field, 4> q;
    for (int a = 0; a < 4; ++a) {
        q[a].resize(N);
        for (std::size_t p = 0; p < N; ++p) {
            double s = 0;
            for (int b = 0; b < 4; ++b) s += n.vgi[sym_index(a, b)][p] * du[b][p];
            q[a][p] = s;
        }
    }
    Field r = sp.divergence(q);
    for (std::size_t p = 0; p < N; ++p) {
        r[p] = r[p] / n.vol[p] - n.V[p] * u[p];
        if (!n.W[0].empty())
            for (int a = 0; a < 4; ++a) r[p] -= n.W[a][p] * du[a][p];
    }
    return r;
}

struct HeatCache {
    const GrfTrajectory& tr;
    std::vector<std::unique_ptr<HeatNode>> nodes;
    explicit HeatCache(const GrfTrajectory& t) : tr(t), nodes(t.t.size()) {}
    const HeatNode& at(std::size_t i) {
        if (!nodes[i]) nodes[i] = std::make_unique<HeatNode>(heat_node(tr.g[i], tr.H[i], tr.deturck));
        return *nodes[i];
    }
    // cubic Lagrange interpolation through four stored times around [t_{k-1}, t_k]
    HeatNode interpolate(std::size_t k, double t) {
        std::size_t n = tr.t.size(), m = std::min<std::size_t>(4, n);
        std::size_t i0 = std::min(k >= 2 ? k - 2 : 0, n - m);
        std::vector<const HeatNode*> ptr;
        std::vector<double> w;
        for (std::size_t a = 0; a < m; ++a) {
            double c = 1;
            for (std::size_t b = 0; b < m; ++b)
                if (b != a) c *= (t - tr.t[i0 + b]) / (tr.t[i0 + a] - tr.t[i0 + b]);
            ptr.push_back(&at(i0 + a));
            w.push_back(c);
        }
        return combine(ptr, w);
    }
};

void check_trajectory(const GrfTrajectory& tr) {
    if (tr.t.size() < 2 || tr.g.size() != tr.t.size() || tr.H.size() != tr.t.size())
        throw ValidationError("conjugate heat: forward trajectory not stored");
}

Field heat_step(HeatCache& cache, std::size_t k, const Field& f_k, const ConjugateHeatOptions& opt) {
    const GrfTrajectory& tr = cache.tr;
    if (k == 0 || k >= tr.t.size()) throw ValidationError("conjugate_heat_step: step index out of range");
    if (f_k.size() != tr.g[k].grid.size()) throw ValidationError("conjugate_heat_step: size mismatch");
    const Spectral& sp = spectral_for(tr.g[k].grid);
    double t1 = tr.t[k], t0 = tr.t[k - 1];
    double h = tr.g[k].grid.min_spacing();
    double lim = opt.cfl * h * h * std::min(cache.at(k).min_eig, cache.at(k - 1).min_eig);
    int nsub = std::max(1, int(std::ceil((t1 - t0) / lim)));
    double dt = (t1 - t0) / nsub;
    Field u(f_k.size());
    for (std::size_t p = 0; p < u.size(); ++p) u[p] = std::exp(-f_k[p]);
    auto axpy = [](Field a, double s, const Field& b) {
        for (std::size_t p = 0; p < a.size(); ++p) a[p] += s * b[p];
        return a;
    };
    auto node_at = [&](double t) {
        if (t == t1) return cache.at(k);
        if (t == t0) return cache.at(k - 1);
        return cache.interpolate(k, t);
    };
    HeatNode cur = node_at(t1);
    for (int s = 0; s < nsub; ++s) {
        double ta = t1 - s * dt, tb = (s + 1 == nsub) ? t0 : ta - dt;
        HeatNode mid = node_at(0.5 * (ta + tb));
        HeatNode end = node_at(tb);
        Field k1 = heat_rate(cur, sp, u);
        Field k2 = heat_rate(mid, sp, axpy(u, 0.5 * dt, k1));
        Field k3 = heat_rate(mid, sp, axpy(u, 0.5 * dt, k2));
        Field k4 = heat_rate(end, sp, axpy(u, dt, k3));
        for (std::size_t p = 0; p < u.size(); ++p) u[p] += dt / 6 * (k1[p] + 2 * k2[p] + 2 * k3[p] + k4[p]);
        cur = std::move(end);
    }
    Field out(u.size());
    for (std::size_t p = 0; p < u.size(); ++p) {
        if (!(u[p] > 0)) throw SingularityError("conjugate heat: density lost positivity", long(p), t0);
        out[p] = -std::log(u[p]);
    }
    return out;
}

}  // namespace

Field conjugate_heat_step(const GrfTrajectory& tr, std::size_t k, const Field& f_k,
                          const ConjugateHeatOptions& opt) {
    check_trajectory(tr);
    HeatCache cache(tr);
    return heat_step(cache, k, f_k, opt);
}

std::vector<Field> solve_conjugate_heat(const GrfTrajectory& tr, const Field& f_end,
                                        const ConjugateHeatOptions& opt) {
    check_trajectory(tr);
    HeatCache cache(tr);
    std::vector<Field> f(tr.t.size());
    f.back() = f_end;
    for (std::size_t k = tr.t.size() - 1; k > 0; --k) {
        f[k - 1] = heat_step(cache, k, f[k], opt);
        // nodes above k + 1 are no longer needed
        if (k + 1 < cache.nodes.size()) cache.nodes[k + 1].reset();
    }
    return f;
}

std::vector<MonotonicityRow> f_monotonicity(const GrfTrajectory& tr, const std::vector<Field>& f) {
    if (f.size() != tr.t.size()) throw ValidationError("f_monotonicity: dilaton series length mismatch");
    std::vector<MonotonicityRow> rows(tr.t.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        GRFState s(tr.g[k], tr.H[k], f[k]);
        rows[k].t = tr.t[k];
        rows[k].F = f_functional(s);
        rows[k].weighted_volume = weighted_volume(s);
        rows[k].integrand = monotonicity_integrand(s);
    }
    for (std::size_t k = 1; k + 1 < rows.size(); ++k)
        rows[k].dFdt = (rows[k + 1].F - rows[k - 1].F) / (rows[k + 1].t - rows[k - 1].t);
    return rows;
}

// ---- algebraic backend

InvariantGrf invariant_grf(const LieModel& m, const InvariantMetric& h) {
    AlgebraicGeometry G = algebraic_geometry(m, h);
    InvariantGrf r;
    r.metric_rate = -2 * G.ric + 0.5 * G.H2;
    r.soliton_metric = G.ric - 0.25 * G.H2;
    r.soliton_torsion = G.dstarH;
    r.F_density = G.scal - G.H_norm2 / 12;
    // d of the invariant 2-form d^* H
    const Mat4& b = G.dstarH;
    auto br = [&](int x, int y, int z) {  // beta([f_x, f_y], f_z)
        double s = 0;
        for (int k = 0; k < 4; ++k) s += m.cf[k][x][y] * b(k, z);
        return s;
    };
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int z = 0; z < 4; ++z) r.torsion_rate[x][y][z] = br(x, y, z) - br(x, z, y) + br(y, z, x);
    Mat4 lhs = 2 * herm_to_riem(InvariantMetric::from_vec(invariant_pcf_rhs(m, h)).herm());
    r.gauge_residual = (lhs - (r.metric_rate - G.lie_theta_g)).cwiseAbs().maxCoeff();
    r.lie_theta_g = G.lie_theta_g.cwiseAbs().maxCoeff();
    return r;
}

}  // namespace pcf
