#pragma once
#include <string>
#include <vector>

#include "pcf/pointwise.hpp"

namespace pcf {

// 4-dim real Lie algebra with a left-invariant complex structure.
// Structure constants are stored twice: in the natural basis e_0..e_3 of the model and in a
// J-adapted frame f_0..f_3 (J f_0 = f_1, J f_2 = f_3) where J is the standard matrix.
struct LieModel {
    std::string name;
    Tensor3 c{};    // [e_i, e_j] = c[k][i][j] e_k
    Mat4 J;         // on the natural basis, columns are J e_i
    Mat4 frame;     // columns f_a in natural coordinates
    Tensor3 cf{};   // [f_i, f_j] = cf[k][i][j] f_k
    std::vector<std::string> axis;  // labels of f_0..f_3
    // adapted directions tangent to the torus fiber of the standard compact quotient, and whether
    // that lattice projects densely onto every fiber direction (Inoue quotients)
    std::array<bool, 4> fiber{};
    bool dense_fiber_lattice = false;

    double jacobi_residual() const;
    double nijenhuis_residual() const;
    double unimodularity() const;  // max |tr ad_X|
};

std::vector<std::string> model_names();
LieModel build_model(const std::string& name);
// Both J candidates shipped for Sol^4_1; index 0 and 1.
LieModel sol1_candidate(int which);
// Structure constants from a bracket table, adapted frame computed from J.
LieModel make_model(const std::string& name, const Tensor3& c, const Mat4& J,
                    std::vector<std::string> axis = {});

// Left-invariant J-Hermitian metric h = [[a, r + i s], [r - i s, b]] in the adapted frame.
struct InvariantMetric {
    double a = 1, b = 1, r = 0, s = 0;

    Mat2c herm() const;
    Mat4 riem() const { return herm_to_riem(herm()); }
    Vec4 vec() const { return {a, b, r, s}; }
    static InvariantMetric from_vec(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }
    static InvariantMetric from_herm(const Mat2c& h);
    bool positive() const;
};

// Everything the algebraic backend knows about (model, g). All tensors are in the adapted frame.
struct AlgebraicGeometry {
    Mat4 g, gi;
    std::array<Mat4, 4> lc;      // (lc[i])(d, c) = Gamma^d_{ic}:  nabla_{f_i} f_c = Gamma^d_{ic} f_d
    std::array<Mat4, 4> bismut;  // same for nabla^B = nabla + 1/2 g^{-1} H
    Tensor3 domega{}, H{};
    Mat4 rhoB;                   // rho^B(X,Y) = -1/2 tr(J nabla^B_{[X,Y]})
    Mat4 ric;
    double scal = 0;
    double rm_norm = 0;          // |Rm| = sqrt(R_abcd R^abcd)
    Mat4 H2;                     // H_ipq H_j^pq
    double H_norm2 = 0;          // |H|^2 = H_pqr H^pqr
    Mat4 dstarH;                 // (d^* H)_ab = -nabla^c H_cab
    Vec4 theta;                  // *H
    Mat4 lie_theta_g;            // L_{theta^#} g
    double pluriclosed = 0;      // max |dH|
    double bismut_flatness = 0;  // max |R^B|
};

AlgebraicGeometry algebraic_geometry(const LieModel& m, const Mat4& g);
AlgebraicGeometry algebraic_geometry(const LieModel& m, const InvariantMetric& h);

// -rho_B^{1,1} as a Hermitian rate in the parameter space
Vec4 invariant_pcf_rhs(const LieModel& m, const InvariantMetric& h, bool normalized = false);

struct Trajectory {
    std::string model;
    bool normalized = false;
    std::vector<double> times;
    std::vector<InvariantMetric> states;
    std::vector<double> rm;       // |Rm|
    std::vector<double> volume;   // sqrt det g
    std::vector<Vec4> eig;        // eigenvalues of g, matched to f_0..f_3
    bool singular = false;
    std::string halt_reason;
};

struct IntegrateOptions {
    double rtol = 1e-8;
    double atol = 1e-12;
    double dt0 = 1e-3;
    double min_eig = 1e-8;
    double max_rm = 1e8;
};

Trajectory integrate(const LieModel& m, const InvariantMetric& m0, double t_end, bool normalized = false,
                     const IntegrateOptions& opt = {});
// state at time t, re-integrated from the closest stored state
InvariantMetric state_at(const LieModel& m, const Trajectory& tr, double t, const IntegrateOptions& opt = {});

// eigenvalues of a metric matched to the adapted frame directions (largest overlap, greedy)
Vec4 directional_eigenvalues(const Mat4& g);

enum class Asymptotics { finite_time_I, infinite_IIb, infinite_III, inconclusive };
const char* to_string(Asymptotics a);

struct Classification {
    Asymptotics verdict = Asymptotics::inconclusive;
    double stat_start = 0, stat_end = 0, stat_max = 0;  // |Rm| t over the last decade
    Vec4 profile;       // eigenvalues of g_t / t per adapted direction
    Vec4 exponents;     // growth exponents p in g ~ t^p over the last decade
    int surviving = 0;  // directions growing linearly (p > 1 - exponent_slack)
    int gh_dimension = 0;  // surviving directions after collapsing dense fiber directions
    std::string collapse;  // point, circle, surface, ...
};

Classification classify_asymptotics(const LieModel& m, const Trajectory& tr, double exponent_slack = 0.1);

struct Blowdown {
    std::vector<double> s;
    std::vector<InvariantMetric> rescaled;   // s^{-1} g(s)
    std::vector<double> defect;              // self-similarity defect at each s
    std::vector<double> soliton_identity;    // |RHS(g~) - g~| / |g~|
};

// requires tr.times.back() >= 2 max(s)
Blowdown blowdown(const LieModel& m, const Trajectory& tr, const std::vector<double>& s_list,
                  const IntegrateOptions& opt = {});

// relative distance of h to the ray through h_ref
double ray_distance(const InvariantMetric& h, const InvariantMetric& ref);

struct ExpFit {
    double rate = 0, intercept = 0, r2 = 0;
};
// least squares log y = intercept - rate t
ExpFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y);

InvariantMetric hopf_metric(double scale = 1);

struct Affine {
    // (w, z) -> (mw w + tw, mz z + tz)
    cplx mw = 1, tw = 0, mz = 1, tz = 0;
};

struct InoueLattice {
    Eigen::Matrix3i Z;
    double alpha = 0;
    cplx beta;
    Eigen::Vector3d a;
    Eigen::Vector3cd b;
    std::array<Affine, 4> generators;
    double invariant_residual = 0;  // max of |det Z - 1|, |alpha |beta|^2 - 1|, lattice closure defect
};

InoueLattice inoue_lattice(const Eigen::Matrix3i& Z);

}  // namespace pcf
