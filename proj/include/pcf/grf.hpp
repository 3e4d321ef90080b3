#pragma once
#include <vector>

#include "pcf/chart.hpp"
#include "pcf/homogeneous.hpp"

namespace pcf {

// Symmetric 4x4 tensor field, packed by sym_index.
struct SymField {
    ChartGrid grid;
    std::array<Field, 10> c;

    SymField() = default;
    explicit SymField(const ChartGrid& g);
    static SymField identity(const ChartGrid& g, double scale = 1);
    static SymField from_function(const ChartGrid& g,
                                  const std::function<Mat4(const std::array<double, 4>&)>& fn);
    static SymField from_herm(const HermField& h);  // g_R of a Hermitian metric

    Mat4 at(std::size_t p) const {
        Mat4 m;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) m(a, b) = c[sym_index(a, b)][p];
        return m;
    }
    void set(std::size_t p, const Mat4& m) {
        for (int a = 0; a < 4; ++a)
            for (int b = a; b < 4; ++b) c[sym_index(a, b)][p] = 0.5 * (m(a, b) + m(b, a));
    }
    SymField& axpy(double s, const SymField& o);
    double sup() const;
    double sup_diff(const SymField& o) const;
    double min_eigenvalue() const;
};

// 3-form field, components 012, 013, 023, 123
struct ThreeFormField {
    ChartGrid grid;
    std::array<Field, 4> c;

    ThreeFormField() = default;
    explicit ThreeFormField(const ChartGrid& g);
    static ThreeFormField from_function(
        const ChartGrid& g, const std::function<std::array<double, 4>(const std::array<double, 4>&)>& fn);
    // H = d^c omega of a Hermitian metric (sign from conventions())
    static ThreeFormField torsion_of(const HermField& w);

    Tensor3 at(std::size_t p) const { return three_form({c[0][p], c[1][p], c[2][p], c[3][p]}); }
    void set(std::size_t p, const Tensor3& t);
    ThreeFormField& axpy(double s, const ThreeFormField& o);
    double sup() const;
};

// 2-form field, components 01, 02, 03, 12, 13, 23
struct TwoFormField {
    ChartGrid grid;
    std::array<Field, 6> c;

    TwoFormField() = default;
    explicit TwoFormField(const ChartGrid& g);
    Mat4 at(std::size_t p) const;
    void set(std::size_t p, const Mat4& m);
    double sup() const;
};

ThreeFormField exterior_d(const TwoFormField& b);
Field exterior_d(const ThreeFormField& H);  // (dH)_0123
double closedness(const ThreeFormField& H);  // sup |dH|
TwoFormField codifferential(const SymField& g, const ThreeFormField& H);
ThreeFormField hodge_laplacian(const SymField& g, const ThreeFormField& H);  // -(d d^* + d^* d) H

struct GRFState {
    SymField g;
    ThreeFormField H;
    Field f;

    GRFState() = default;
    GRFState(const SymField& g_, const ThreeFormField& H_);
    GRFState(const SymField& g_, const ThreeFormField& H_, const Field& f_);
    static GRFState flat(const ChartGrid& grid);
    const ChartGrid& grid() const { return g.grid; }
    // throws on shape mismatch, degenerate g, or dH above tol
    void validate(double closed_tol = 1e-6) const;
};

// Levi-Civita curvature and the torsion/dilaton tensors of a state
struct GrfGeometry {
    SymField ric, H2, hess_f;
    Field scal, H_norm2, vol, lap_f, grad_f2;  // vol = sqrt det g, grad_f2 = |df|^2
    std::array<Field, 4> grad_f_up;            // g^{-1} df
};
GrfGeometry grf_geometry(const GRFState& s);
SymField ricci(const SymField& g);

struct GrfRates {
    SymField dg;        // -2 Rc + 1/2 H^2
    ThreeFormField dH;  // Delta_d H
};
GrfRates grf_rhs(const GRFState& s);

struct GaugeReport {
    double sup_diff = 0;
    double sup_pcf = 0, sup_grf = 0;
    double pluriclosed_residual = 0;
    int grid_n = 0;
};
// 2 g_R(pcf rate) against -2 Rc + 1/2 H^2 - L_theta g, with H = d^c omega, theta = *H
GaugeReport gauge_equivalence_check(const HermField& w, double pluriclosed_tol = 1e-6);
SymField lie_derivative(const SymField& g, const std::array<Field, 4>& X);

double f_functional(const GRFState& s);
double weighted_volume(const GRFState& s);  // integral of e^{-f} dV
double integrate(const GRFState& s, const Field& density);  // integral of density dV

struct LambdaOptions {
    double tol = 1e-9;  // on the eigen-residual
    int max_iter = 500;
    int cg_max = 1000;
    double cg_tol = 1e-13;
};
struct LambdaResult {
    double lambda = 0;
    Field f;  // minimizer, normalized so that integral e^{-f} dV = 1
    int iterations = 0;
    double residual = 0;
};
LambdaResult lambda_lowest(const SymField& g, const ThreeFormField& H, const LambdaOptions& opt = {});
// -4 Delta u + (R - |H|^2/12) u
Field schrodinger_apply(const SymField& g, const ThreeFormField& H, const Field& u);
// first variation of lambda along h at the minimizer f: integral <-Rc + 1/4 H^2 - Hess f, h> e^{-f} dV
double lambda_variation(const SymField& g, const ThreeFormField& H, const Field& f, const SymField& h);

struct SolitonResidual {
    SymField metric;       // Rc - 1/4 H^2 + Hess f
    TwoFormField torsion;  // d^* H + i_{grad f} H
    double metric_sup = 0, metric_l2 = 0, torsion_sup = 0, torsion_l2 = 0;
    bool solitonic(double tol = 1e-6) const { return metric_sup < tol && torsion_sup < tol; }
};
SolitonResidual soliton_residual(const GRFState& s);

// 2 |Rc - 1/4 H^2 + Hess f|^2 + |d^* H + i_{grad f} H|^2 (form norm on 2-forms), integrated against e^{-f} dV
double monotonicity_integrand(const GRFState& s);
// f_t = -Delta f + |df|^2 - R + 1/4 |H|^2
Field conjugate_heat_rate(const GRFState& s);

// DeTurck vector field W^k = g^{ij} Gamma^k_ij relative to the flat chart metric
std::array<Field, 4> deturck_field(const SymField& g);
// L_X H = d i_X H + i_X dH
ThreeFormField lie_derivative(const ThreeFormField& H, const std::array<Field, 4>& X);

struct GrfTrajectory {
    std::vector<double> t;
    std::vector<SymField> g;
    std::vector<ThreeFormField> H;
    bool deturck = false;  // stored states solve the flow modified by L_W
};
struct GrfRunOptions {
    double dt = 0;  // 0 -> CFL limited
    double cfl = 0.05;
    double closed_tol = 1e-8;
    // add (L_W g, L_W H): a diffeomorphic image of the plain flow
    bool deturck = true;
};
double grf_stable_dt(const SymField& g, double cfl = 0.05);
// RK4 on (g, H); every step is stored
GrfTrajectory run_grf(const SymField& g0, const ThreeFormField& H0, double t_end, const GrfRunOptions& opt = {});

struct ConjugateHeatOptions {
    double cfl = 0.01;  // substep limit cfl * h^2 * min eig g
};
// one backward step of the conjugate heat equation from t[k] to t[k-1]
// (with the W . grad f term when the trajectory is in DeTurck gauge)
Field conjugate_heat_step(const GrfTrajectory& tr, std::size_t k, const Field& f_k,
                          const ConjugateHeatOptions& opt = {});
// f at every stored time, given f at the final time
std::vector<Field> solve_conjugate_heat(const GrfTrajectory& tr, const Field& f_end,
                                        const ConjugateHeatOptions& opt = {});

struct MonotonicityRow {
    double t = 0, F = 0, weighted_volume = 0, integrand = 0;
    double dFdt = 0;  // central difference, 0 at the ends
};
std::vector<MonotonicityRow> f_monotonicity(const GrfTrajectory& tr, const std::vector<Field>& f);

// Left-invariant data on a Lie algebra (adapted frame), f = 0
struct InvariantGrf {
    Mat4 metric_rate;      // -2 Rc + 1/2 H^2
    Tensor3 torsion_rate;  // Delta_d H = -d d^* H for closed H
    Mat4 soliton_metric;   // Rc - 1/4 H^2
    Mat4 soliton_torsion;  // d^* H
    double F_density = 0;  // R - |H|^2/12
    double gauge_residual = 0;
    double lie_theta_g = 0;
};
InvariantGrf invariant_grf(const LieModel& m, const InvariantMetric& h);

}  // namespace pcf
