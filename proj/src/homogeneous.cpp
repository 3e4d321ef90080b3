#include "pcf/homogeneous.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "pcf/chart.hpp"
#include "pcf/errors.hpp"

namespace pcf {

namespace {

const int kPerm[4] = {1, 0, 3, 2};
const double kSgn[4] = {1, -1, 1, -1};

Tensor3 zero3() {
    Tensor3 t;
    for (auto& a : t)
        for (auto& b : a) b.fill(0.0);
    return t;
}

// [e_i, e_j] = v e_k, antisymmetrized
void put(Tensor3& c, int i, int j, int k, double v) {
    c[k][i][j] += v;
    c[k][j][i] -= v;
}

Vec4 bracket(const Tensor3& c, const Vec4& x, const Vec4& y) {
    Vec4 out = Vec4::Zero();
    for (int k = 0; k < 4; ++k)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) out(k) += c[k][i][j] * x(i) * y(j);
    return out;
}

// J e_p = s e_q, J e_q = -s e_p
void pair(Mat4& J, int p, int q, double s) {
    J(q, p) = s;
    J(p, q) = -s;
}

Mat4 adapted_frame(const Mat4& J) {
    Mat4 F;
    F.col(0) = Vec4::Unit(0);
    F.col(1) = J * F.col(0);
    double best = 0;
    for (int k = 1; k < 4; ++k) {
        Mat4 T = F;
        T.col(2) = Vec4::Unit(k);
        T.col(3) = J * T.col(2);
        double d = std::abs(T.determinant());
        if (d > best + 1e-12) {
            best = d;
            F = T;
        }
    }
    if (best < 1e-12) throw ValidationError("complex structure has no adapted frame");
    return F;
}

Mat4 mat_of(const std::array<Mat4, 4>& A, const Tensor3& c, int x, int y) {
    Mat4 m = Mat4::Zero();
    for (int k = 0; k < 4; ++k)
        if (c[k][x][y] != 0.0) m += c[k][x][y] * A[k];
    return m;
}

}  // namespace

double LieModel::jacobi_residual() const {
    double r = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) {
                Vec4 a = Vec4::Unit(i), b = Vec4::Unit(j), d = Vec4::Unit(k);
                Vec4 s = bracket(c, a, bracket(c, b, d)) + bracket(c, b, bracket(c, d, a)) +
                         bracket(c, d, bracket(c, a, b));
                r = std::max(r, s.cwiseAbs().maxCoeff());
            }
    return r;
}

double LieModel::nijenhuis_residual() const {
    double r = std::max(0.0, (J * J + Mat4::Identity()).cwiseAbs().maxCoeff());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            Vec4 x = Vec4::Unit(i), y = Vec4::Unit(j);
            Vec4 n = bracket(c, J * x, J * y) - J * bracket(c, J * x, y) - J * bracket(c, x, J * y) - bracket(c, x, y);
            r = std::max(r, n.cwiseAbs().maxCoeff());
        }
    return r;
}

double LieModel::unimodularity() const {
    double r = 0;
    for (int i = 0; i < 4; ++i) {
        double t = 0;
        for (int k = 0; k < 4; ++k) t += c[k][i][k];
        r = std::max(r, std::abs(t));
    }
    return r;
}

LieModel make_model(const std::string& name, const Tensor3& c, const Mat4& J, std::vector<std::string> axis) {
    LieModel m;
    m.name = name;
    m.c = c;
    m.J = J;
    m.frame = adapted_frame(J);
    Mat4 Fi = m.frame.inverse();
    m.cf = zero3();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            Vec4 v = Fi * bracket(c, m.frame.col(i), m.frame.col(j));
            for (int k = 0; k < 4; ++k) m.cf[k][i][j] = std::abs(v(k)) < 1e-15 ? 0.0 : v(k);
        }
    if (axis.empty()) axis = {"f0", "f1", "f2", "f3"};
    m.axis = std::move(axis);
    return m;
}

std::vector<std::string> model_names() {
    return {"R4", "Hopf", "Nil3xR", "Sol0_4", "Sol1_4", "Sol1_4_prime", "SL2tilde_xR", "H2xR2", "H2xH2", "torus"};
}

LieModel sol1_candidate(int which) {
    // upper triangular [[1,b,c],[0,alpha,a],[0,0,1]]: e0 = b, e1 = a, e2 = c, e3 = alpha
    Tensor3 c = zero3();
    put(c, 3, 0, 0, -1);
    put(c, 3, 1, 1, 1);
    put(c, 0, 1, 2, 1);
    Mat4 J = Mat4::Zero();
    if (which == 0) {
        pair(J, 0, 2, 1);
        pair(J, 1, 3, -1);
        return make_model("Sol1_4", c, J, {"b", "c", "a", "-alpha"});
    }
    pair(J, 0, 3, 1);
    pair(J, 1, 2, -1);
    return make_model("Sol1_4_prime", c, J, {"b", "alpha", "a", "-c"});
}

LieModel build_model(const std::string& name) {
    Tensor3 c = zero3();
    Mat4 J = J_std();
    if (name == "R4" || name == "torus") return make_model(name, c, J, {"x0", "x1", "x2", "x3"});
    if (name == "Hopf") {
        // e0 = d/ds, e1..e3 left-invariant on the unit S^3
        put(c, 1, 2, 3, 2);
        put(c, 2, 3, 1, 2);
        put(c, 3, 1, 2, 2);
        return make_model(name, c, J, {"s", "X1", "X2", "X3"});
    }
    if (name == "Nil3xR") {
        put(c, 0, 1, 2, 1);
        return make_model(name, c, J, {"X", "Y", "Z", "T"});
    }
    if (name == "Sol0_4") {
        // delta(t)(x,y,z) = (e^t x, e^t y, e^-2t z); e3 = d/dt
        put(c, 3, 0, 0, 1);
        put(c, 3, 1, 1, 1);
        put(c, 3, 2, 2, -2);
        J = Mat4::Zero();
        pair(J, 0, 1, 1);
        pair(J, 3, 2, 1);
        LieModel m = make_model(name, c, J);
        // prefer f2 = d/dt, f3 = J d/dt = e2
        Mat4 F;
        F << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0;
        m.frame = F;
        Mat4 Fi = F.inverse();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                Vec4 v = Fi * bracket(c, F.col(i), F.col(j));
                for (int k = 0; k < 4; ++k) m.cf[k][i][j] = v(k);
            }
        m.axis = {"x", "y", "t", "z"};
        m.fiber = {true, true, false, true};
        m.dense_fiber_lattice = true;
        return m;
    }
    if (name == "Sol1_4") return sol1_candidate(0);
    if (name == "Sol1_4_prime") return sol1_candidate(1);
    if (name == "SL2tilde_xR") {
        // sl(2,R): [e0,e1] = -e2, [e1,e2] = e0, [e2,e0] = e1; e2 generates rotations
        put(c, 0, 1, 2, -1);
        put(c, 1, 2, 0, 1);
        put(c, 2, 0, 1, 1);
        return make_model(name, c, J, {"X", "Y", "K", "T"});
    }
    if (name == "H2xR2") {
        put(c, 0, 1, 1, 1);
        return make_model(name, c, J, {"A", "N", "x", "y"});
    }
    if (name == "H2xH2") {
        put(c, 0, 1, 1, 1);
        put(c, 2, 3, 3, 1);
        return make_model(name, c, J, {"A1", "N1", "A2", "N2"});
    }
    throw ValidationError("unsupported model '" + name + "'");
}

Mat2c InvariantMetric::herm() const {
    Mat2c h;
    h << cplx(a, 0), cplx(r, s), cplx(r, -s), cplx(b, 0);
    return h;
}

InvariantMetric InvariantMetric::from_herm(const Mat2c& h) {
    return {h(0, 0).real(), h(1, 1).real(), 0.5 * (h(0, 1).real() + h(1, 0).real()),
            0.5 * (h(0, 1).imag() - h(1, 0).imag())};
}

bool InvariantMetric::positive() const { return a > 0 && b > 0 && a * b - r * r - s * s > 0; }

AlgebraicGeometry algebraic_geometry(const LieModel& m, const InvariantMetric& h) {
    if (!h.positive()) throw SingularityError("invariant metric is not positive definite");
    return algebraic_geometry(m, h.riem());
}

AlgebraicGeometry algebraic_geometry(const LieModel& m, const Mat4& g) {
    const Tensor3& C = m.cf;
    AlgebraicGeometry G;
    G.g = g;
    G.gi = g.inverse();

    Tensor3 cl;  // g([f_i, f_j], f_k)
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) {
                double v = 0;
                for (int q = 0; q < 4; ++q) v += C[q][i][j] * g(q, k);
                cl[i][j][k] = v;
            }
    for (int i = 0; i < 4; ++i) {
        Mat4 low;  // low(c, k) = g(nabla_i f_c, f_k)
        for (int c = 0; c < 4; ++c)
            for (int k = 0; k < 4; ++k) low(c, k) = 0.5 * (cl[i][c][k] - cl[c][k][i] + cl[k][i][c]);
        G.lc[i] = G.gi * low.transpose();
    }

    // omega(X,Y) = g(JX, Y); d omega(X,Y,Z) = -omega([X,Y],Z) - cyclic
    Mat4 w = J_std().transpose() * g;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double v = 0;
                for (int q = 0; q < 4; ++q) v -= C[q][a][b] * w(q, c) + C[q][b][c] * w(q, a) + C[q][c][a] * w(q, b);
                G.domega[a][b][c] = v;
            }
    double s = conventions().dc_sign;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                G.H[a][b][c] = s * kSgn[a] * kSgn[b] * kSgn[c] * G.domega[kPerm[a]][kPerm[b]][kPerm[c]];

    for (int i = 0; i < 4; ++i) {
        Mat4 t;
        for (int c = 0; c < 4; ++c)
            for (int e = 0; e < 4; ++e) t(e, c) = G.H[i][c][e];
        G.bismut[i] = G.lc[i] + 0.5 * G.gi * t;
    }
    const Mat4& J = J_std();
    G.rhoB.setZero();
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) G.rhoB(x, y) = -0.5 * (J * mat_of(G.bismut, C, x, y)).trace();

    // Levi-Civita curvature R_xy = [A_x, A_y] - A_[x,y]; Rl[e][c][x][y] = g(R(f_x,f_y) f_c, f_e)
    double Rl[4][4][4][4];
    G.ric.setZero();
    double bflat = 0;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) {
            Mat4 R = G.lc[x] * G.lc[y] - G.lc[y] * G.lc[x] - mat_of(G.lc, C, x, y);
            Mat4 RB = G.bismut[x] * G.bismut[y] - G.bismut[y] * G.bismut[x] - mat_of(G.bismut, C, x, y);
            bflat = std::max(bflat, RB.cwiseAbs().maxCoeff());
            Mat4 low = g * R;
            for (int e = 0; e < 4; ++e)
                for (int c = 0; c < 4; ++c) Rl[e][c][x][y] = low(e, c);
            for (int c = 0; c < 4; ++c) G.ric(y, c) += R(x, c);
        }
    G.bismut_flatness = bflat;
    G.ric = 0.5 * (G.ric + G.ric.transpose()).eval();
    G.scal = (G.gi * G.ric).trace();

    // raise all indices with an orthonormalizing factor: g^{-1} = L L^T
    Eigen::LLT<Mat4> llt(G.gi);
    Mat4 L = llt.matrixL();
    double n2 = 0;
    {
        // T[a][b][c][d] -> T(L e_a, ...)
        double A[4][4][4][4], B[4][4][4][4];
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    for (int d = 0; d < 4; ++d) {
                        double v = 0;
                        for (int p = 0; p < 4; ++p) v += L(p, a) * Rl[p][b][c][d];
                        A[a][b][c][d] = v;
                    }
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    for (int d = 0; d < 4; ++d) {
                        double v = 0;
                        for (int p = 0; p < 4; ++p) v += L(p, b) * A[a][p][c][d];
                        B[a][b][c][d] = v;
                    }
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    for (int d = 0; d < 4; ++d) {
                        double v = 0;
                        for (int p = 0; p < 4; ++p) v += L(p, c) * B[a][b][p][d];
                        A[a][b][c][d] = v;
                    }
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    for (int d = 0; d < 4; ++d) {
                        double v = 0;
                        for (int p = 0; p < 4; ++p) v += L(p, d) * A[a][b][c][p];
                        n2 += v * v;
                    }
    }
    G.rm_norm = std::sqrt(n2);

    G.H2.setZero();
    double hh = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double v = 0;
            for (int p = 0; p < 4; ++p)
                for (int q = 0; q < 4; ++q)
                    for (int pp = 0; pp < 4; ++pp)
                        for (int qq = 0; qq < 4; ++qq)
                            v += G.H[i][p][q] * G.H[j][pp][qq] * G.gi(p, pp) * G.gi(q, qq);
            G.H2(i, j) = v;
        }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) hh += G.gi(i, j) * G.H2(i, j);
    G.H_norm2 = hh;

    // (nabla_x H)(c,a,b) for invariant H
    auto dH = [&](int x, int c, int a, int b) {
        double v = 0;
        for (int d = 0; d < 4; ++d)
            v -= G.lc[x](d, c) * G.H[d][a][b] + G.lc[x](d, a) * G.H[c][d][b] + G.lc[x](d, b) * G.H[c][a][d];
        return v;
    };
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            double v = 0;
            for (int c = 0; c < 4; ++c)
                for (int x = 0; x < 4; ++x)
                    if (G.gi(c, x) != 0.0) v -= G.gi(c, x) * dH(x, c, a, b);
            G.dstarH(a, b) = v;
        }
    G.theta = hodge3(G.H, g);
    Vec4 v = G.gi * G.theta;
    Mat4 nv;  // nv.col(y) = nabla_{f_y} theta^#
    for (int y = 0; y < 4; ++y) nv.col(y) = G.lc[y] * v;
    Mat4 gn = g * nv;  // gn(z, y) = g(nabla_y v, f_z)
    G.lie_theta_g = gn + gn.transpose();

    // dH(f0,f1,f2,f3) = sum_{i<j} (-1)^{i+j} H([f_i,f_j], f_k, f_l)
    double d4 = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            int rest[2], n = 0;
            for (int k = 0; k < 4; ++k)
                if (k != i && k != j) rest[n++] = k;
            double t = 0;
            for (int q = 0; q < 4; ++q) t += C[q][i][j] * G.H[q][rest[0]][rest[1]];
            d4 += ((i + j) % 2 ? -1.0 : 1.0) * t;
        }
    G.pluriclosed = std::abs(d4);
    return G;
}

Vec4 invariant_pcf_rhs(const LieModel& m, const InvariantMetric& h, bool normalized) {
    AlgebraicGeometry G = algebraic_geometry(m, h);
    Mat2c rate = form_to_herm(proj11(Mat4(-G.rhoB)));
    if (normalized) {
        Mat2c hm = h.herm();
        cplx tr = (hm.inverse() * rate).trace();
        rate -= 0.5 * tr.real() * hm;
    }
    return InvariantMetric::from_herm(rate).vec();
}

Vec4 directional_eigenvalues(const Mat4& g) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (g + g.transpose()));
    Vec4 out = Vec4::Zero();
    std::array<bool, 4> used_dir{}, used_vec{};
    for (int round = 0; round < 4; ++round) {
        double best = -1;
        int bi = 0, bk = 0;
        for (int k = 0; k < 4; ++k) {
            if (used_vec[k]) continue;
            for (int i = 0; i < 4; ++i) {
                if (used_dir[i]) continue;
                double w = std::abs(es.eigenvectors()(i, k));
                if (w > best) {
                    best = w;
                    bi = i;
                    bk = k;
                }
            }
        }
        used_dir[bi] = used_vec[bk] = true;
        out(bi) = es.eigenvalues()(bk);
    }
    return out;
}

namespace {

using State = std::array<double, 4>;

InvariantMetric to_metric(const State& x) { return {x[0], x[1], x[2], x[3]}; }

struct FlowSystem {
    const LieModel& m;
    bool normalized;
    void operator()(const State& x, State& dx, double) const {
        InvariantMetric h = to_metric(x);
        if (!h.positive()) {
            // outside the cone the stepper will reject the step through the error estimate
            dx.fill(std::numeric_limits<double>::quiet_NaN());
            return;
        }
        Vec4 r = invariant_pcf_rhs(m, h, normalized);
        for (int i = 0; i < 4; ++i) dx[i] = r(i);
    }
};

void record(Trajectory& tr, const LieModel& m, double t, const InvariantMetric& h) {
    AlgebraicGeometry G = algebraic_geometry(m, h);
    tr.times.push_back(t);
    tr.states.push_back(h);
    tr.rm.push_back(G.rm_norm);
    tr.volume.push_back(std::sqrt(G.g.determinant()));
    tr.eig.push_back(directional_eigenvalues(G.g));
}

}  // namespace

Trajectory integrate(const LieModel& m, const InvariantMetric& m0, double t_end, bool normalized,
                     const IntegrateOptions& opt) {
    namespace ode = boost::numeric::odeint;
    if (!m0.positive()) throw ValidationError("initial metric is not positive definite");
    if (!(t_end > 0)) throw ValidationError("t_end must be positive");
    Trajectory tr;
    tr.model = m.name;
    tr.normalized = normalized;
    record(tr, m, 0, m0);

    FlowSystem sys{m, normalized};
    auto stepper = ode::make_dense_output(opt.atol, opt.rtol, ode::runge_kutta_dopri5<State>());
    State x = {m0.a, m0.b, m0.r, m0.s};
    stepper.initialize(x, 0.0, std::min(opt.dt0, t_end));
    while (stepper.current_time() < t_end) {
        double t0 = stepper.current_time();
        try {
            stepper.do_step(sys);
        } catch (const ode::step_adjustment_error&) {
            throw ConvergenceError("step size underflow at t = " + std::to_string(t0) + " (stiff)");
        }
        double t1 = stepper.current_time();
        if (t1 - t0 < 1e-13 * std::max(1.0, t1))
            throw ConvergenceError("step size underflow at t = " + std::to_string(t1) + " (stiff)");
        State y;
        double t = t1;
        if (t1 >= t_end) {
            stepper.calc_state(t_end, y);
            t = t_end;
        } else {
            y = stepper.current_state();
        }
        InvariantMetric h = to_metric(y);
        if (!h.positive() || std::isnan(y[0])) {
            tr.singular = true;
            tr.halt_reason = "metric degenerates";
            break;
        }
        record(tr, m, t, h);
        if (tr.eig.back().minCoeff() < opt.min_eig) {
            tr.singular = true;
            tr.halt_reason = "metric eigenvalue below threshold";
            break;
        }
        if (tr.rm.back() > opt.max_rm) {
            tr.singular = true;
            tr.halt_reason = "curvature blowup";
            break;
        }
    }
    return tr;
}

InvariantMetric state_at(const LieModel& m, const Trajectory& tr, double t, const IntegrateOptions& opt) {
    namespace ode = boost::numeric::odeint;
    if (tr.times.empty() || t < 0 || t > tr.times.back() * (1 + 1e-12))
        throw ValidationError("time outside the stored trajectory");
    auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
    std::size_t i = (it == tr.times.begin()) ? 0 : std::size_t(it - tr.times.begin()) - 1;
    InvariantMetric h = tr.states[i];
    if (t == tr.times[i]) return h;
    State x = {h.a, h.b, h.r, h.s};
    FlowSystem sys{m, tr.normalized};
    ode::integrate_adaptive(ode::make_controlled(opt.atol, opt.rtol, ode::runge_kutta_dopri5<State>()), sys, x,
                            tr.times[i], t, std::min(1e-3, t - tr.times[i]));
    return to_metric(x);
}

const char* to_string(Asymptotics a) {
    switch (a) {
        case Asymptotics::finite_time_I: return "finite_time_I";
        case Asymptotics::infinite_IIb: return "infinite_IIb";
        case Asymptotics::infinite_III: return "infinite_III";
        default: return "inconclusive";
    }
}

Classification classify_asymptotics(const LieModel& m, const Trajectory& tr, double exponent_slack) {
    Classification c;
    if (tr.times.size() < 2) throw ValidationError("trajectory too short");
    double T = tr.times.back();
    if (tr.singular) {
        c.verdict = Asymptotics::finite_time_I;
        c.collapse = "singular";
        return c;
    }
    if (T < 100) throw ValidationError("classification needs t_end >= 100 or a singular trajectory");
    std::size_t i0 = tr.times.size();
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        if (tr.times[i] < 0.1 * T) continue;
        double s = tr.rm[i] * tr.times[i];
        if (i0 == tr.times.size()) {
            i0 = i;
            c.stat_start = s;
        }
        c.stat_max = std::max(c.stat_max, s);
        c.stat_end = s;
    }
    if (c.stat_end > 1e3 && c.stat_end > c.stat_start)
        c.verdict = Asymptotics::infinite_IIb;
    else if (c.stat_max <= 1e2)
        c.verdict = Asymptotics::infinite_III;
    c.profile = directional_eigenvalues(tr.states.back().riem() / T);
    Vec4 e0 = tr.eig[i0], e1 = tr.eig.back();
    double lt = std::log(T / tr.times[i0]);
    for (int i = 0; i < 4; ++i) {
        c.exponents(i) = std::log(e1(i) / e0(i)) / lt;
        if (c.exponents(i) > 1 - exponent_slack) {
            ++c.surviving;
            // a dense lattice in the fiber makes that direction collapse in the Gromov-Hausdorff sense
            if (!(m.fiber[i] && m.dense_fiber_lattice)) ++c.gh_dimension;
        }
    }
    static const char* names[] = {"point", "circle", "surface", "3-dimensional", "no collapse"};
    c.collapse = names[c.gh_dimension];
    // g_t itself settles: nothing collapses, g_t / t -> 0 only by the scaling
    if (c.exponents.cwiseAbs().maxCoeff() < exponent_slack) c.collapse = "none";
    return c;
}

Blowdown blowdown(const LieModel& m, const Trajectory& tr, const std::vector<double>& s_list,
                  const IntegrateOptions& opt) {
    if (tr.singular) throw PreconditionError("blowdown needs an infinite-time trajectory", tr.times.back());
    Blowdown b;
    for (double s : s_list) {
        if (2 * s > tr.times.back()) throw ValidationError("trajectory too short for blowdown at s = " + std::to_string(s));
        Mat4 g1 = state_at(m, tr, s, opt).riem() / s;
        double def = 0;
        for (double tau : {0.5, 2.0}) {
            Mat4 gt = state_at(m, tr, s * tau, opt).riem() / s;
            def = std::max(def, frob(Mat4(gt - tau * g1)) / frob(Mat4(tau * g1)));
        }
        InvariantMetric gs = InvariantMetric::from_herm(riem_to_herm(g1));
        Vec4 rhs = invariant_pcf_rhs(m, gs, false);
        b.s.push_back(s);
        b.rescaled.push_back(gs);
        b.defect.push_back(def);
        b.soliton_identity.push_back(frob(InvariantMetric::from_vec(rhs - gs.vec()).herm()) / frob(gs.herm()));
    }
    return b;
}

double ray_distance(const InvariantMetric& h, const InvariantMetric& ref) {
    Mat2c a = h.herm(), r = ref.herm();
    return frob(Mat2c(a / frob(a) - r / frob(r)));
}

ExpFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size() || t.size() < 3) throw ValidationError("exponential fit needs at least 3 samples");
    Eigen::MatrixXd A(t.size(), 2);
    Eigen::VectorXd b(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(y[i] > 0)) throw ValidationError("exponential fit needs positive samples");
        A(i, 0) = 1;
        A(i, 1) = t[i];
        b(i) = std::log(y[i]);
    }
    Eigen::Vector2d x = A.colPivHouseholderQr().solve(b);
    Eigen::VectorXd res = b - A * x;
    double mean = b.mean();
    double ss = (b.array() - mean).square().sum();
    ExpFit f;
    f.intercept = x(0);
    f.rate = -x(1);
    f.r2 = ss > 0 ? 1 - res.squaredNorm() / ss : 1;
    return f;
}

InvariantMetric hopf_metric(double scale) { return {0.5 * scale, 0.5 * scale, 0, 0}; }

InoueLattice inoue_lattice(const Eigen::Matrix3i& Z) {
    long det = long(Z(0, 0)) * (long(Z(1, 1)) * Z(2, 2) - long(Z(1, 2)) * Z(2, 1)) -
               long(Z(0, 1)) * (long(Z(1, 0)) * Z(2, 2) - long(Z(1, 2)) * Z(2, 0)) +
               long(Z(0, 2)) * (long(Z(1, 0)) * Z(2, 1) - long(Z(1, 1)) * Z(2, 0));
    if (det != 1) throw ValidationError("not an Inoue matrix: det Z = " + std::to_string(det));
    Eigen::Matrix3d Zd = Z.cast<double>();
    Eigen::EigenSolver<Eigen::Matrix3d> es(Zd);
    int ireal = -1, icplx = -1;
    for (int i = 0; i < 3; ++i) {
        cplx ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) < 1e-10 * std::max(1.0, std::abs(ev))) {
            if (ev.real() > 1) ireal = i;
        } else if (ev.imag() > 0) {
            icplx = i;
        }
    }
    if (ireal < 0 || icplx < 0)
        throw ValidationError("not an Inoue matrix: need one real eigenvalue > 1 and a complex pair");
    InoueLattice L;
    L.Z = Z;
    L.alpha = es.eigenvalues()(ireal).real();
    L.beta = es.eigenvalues()(icplx);
    Eigen::Vector3cd va = es.eigenvectors().col(ireal);
    // fix the phase so the real eigenvector is real
    int big = 0;
    va.cwiseAbs().maxCoeff(&big);
    va /= va(big) / std::abs(va(big));
    L.a = va.real();
    L.b = es.eigenvectors().col(icplx);
    Eigen::Matrix3d M;
    M.col(0) = L.a;
    M.col(1) = L.b.real();
    M.col(2) = L.b.imag();
    if (std::abs(M.determinant()) < 1e-12) throw ValidationError("lattice vectors are dependent");
    L.generators[0] = {L.alpha, 0, L.beta, 0};
    for (int i = 0; i < 3; ++i) L.generators[i + 1] = {1, L.a(i), 1, L.b(i)};
    double res = std::abs(L.alpha * std::norm(L.beta) - 1);
    res = std::max(res, (Zd * L.a - L.alpha * L.a).cwiseAbs().maxCoeff());
    res = std::max(res, (Zd.cast<cplx>() * L.b - L.beta * L.b).cwiseAbs().maxCoeff());
    L.invariant_residual = res;
    return L;
}

}  // namespace pcf
