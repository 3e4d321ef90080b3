#pragma once
#include <functional>
#include <string>

#include "pcf/grid.hpp"
#include "pcf/pointwise.hpp"

namespace pcf {

// Global sign in front of H = d^c omega. +1 is the Bismut torsion; -1 exists only to
// demonstrate that the checks notice a wrong convention.
struct Conventions {
    int dc_sign = 1;
};
Conventions& conventions();

struct ScopedDcSign {
    int saved;
    explicit ScopedDcSign(int s) : saved(conventions().dc_sign) { conventions().dc_sign = s; }
    ~ScopedDcSign() { conventions().dc_sign = saved; }
};

const Spectral& spectral_for(const ChartGrid& g);

// Hermitian (1,1) tensor b_ij on the grid, stored as b11, b22, Re b12, Im b12.
// Used both for metrics g_ij and for real (1,1)-forms i b_ij dz^i ^ dzbar^j.
struct HermField {
    ChartGrid grid;
    std::array<Field, 4> c;

    HermField() = default;
    explicit HermField(const ChartGrid& g);
    static HermField identity(const ChartGrid& g);
    static HermField from_function(const ChartGrid& g,
                                   const std::function<Mat2c(const std::array<double, 4>&)>& fn);

    std::size_t size() const { return grid.size(); }
    Mat2c at(std::size_t p) const {
        Mat2c m;
        m(0, 0) = c[0][p];
        m(1, 1) = c[1][p];
        m(0, 1) = cplx(c[2][p], c[3][p]);
        m(1, 0) = cplx(c[2][p], -c[3][p]);
        return m;
    }
    void set(std::size_t p, const Mat2c& m) {
        c[0][p] = m(0, 0).real();
        c[1][p] = m(1, 1).real();
        c[2][p] = 0.5 * (m(0, 1).real() + m(1, 0).real());
        c[3][p] = 0.5 * (m(0, 1).imag() - m(1, 0).imag());
    }
    HermField& axpy(double s, const HermField& o);
    double sup() const;
    double sup_diff(const HermField& o) const;
    // smallest eigenvalue over the grid and where it occurs
    std::pair<double, std::size_t> min_eigenvalue() const;
    Mat2c average() const;
};

// First and second real partial derivatives of a Hermitian field, per grid point.
struct HermJet {
    ChartGrid grid;
    std::array<Field, 4> val;
    std::array<std::array<Field, 4>, 4> d;    // d[comp][a]
    std::array<std::array<Field, 10>, 4> dd;  // dd[comp][sym(a,b)]
    explicit HermJet(const HermField& h, bool second = true);
    Mat2c h(std::size_t p) const;
    Mat2c dh(std::size_t p, int a) const;
    Mat2c ddh(std::size_t p, int a, int b) const;
};

struct TorsionField {
    ChartGrid grid;
    std::array<Field, 4> T;      // Re/Im T_{12,1bar}, Re/Im T_{12,2bar}
    std::array<Field, 4> H;      // components 012, 013, 023, 123
    std::array<Field, 4> theta;  // Lee form = *H
};

struct CurvatureForms {
    HermField rho_C, rho_B11, S, Q1;
};

struct RhsReport {
    double sup_ab = 0, sup_ac = 0, sup_bc = 0;  // pairwise sup differences of the three forms
    double pluriclosed_residual = 0;
    double rhs_sup = 0;
    int grid_n = 0;
};

struct PcfRhs {
    HermField rhs;  // -rho_B^{1,1}, i.e. d g_ij / dt
    HermField form_a, form_c;
    RhsReport report;
};

// Pointwise geometry from g and dg (real partials), in the real frame.
struct PointGeometry {
    Mat4 g, gi;
    std::array<Mat4, 4> dg;
    Tensor3 dw;      // d omega
    Tensor3 H;       // dc_sign * domega(J.,J.,J.)
    Tensor3 gamma;   // Levi-Civita Gamma^c_{ab} stored as gamma[c][a][b]
    Vec4 tau;        // tr(J Gamma^B_a)
    Vec4 dstar_w;    // d^* omega = -* d omega
    Vec4 theta;      // *H
};
enum GeoParts : unsigned { kGeoDstar = 1, kGeoTheta = 2, kGeoAll = 3 };
PointGeometry point_geometry(const Mat2c& h, const std::array<Mat2c, 4>& dh,
                             unsigned parts = kGeoAll);

double check_pluriclosed(const HermField& w);
TorsionField chern_torsion(const HermField& g);
CurvatureForms curvature_forms(const HermField& g);

struct RhsOptions {
    bool cross_check = true;
    double pluriclosed_tol = 1e-6;
};
PcfRhs pcf_rhs(const HermField& g, const RhsOptions& opt = {});
HermField pcf_rate(const HermField& g);  // -rho_B^{1,1} only, no checks
HermField krf_rate(const HermField& g);  // i ddbar log det g

struct StepOptions {
    double cfl = 0.2;
    double positivity_floor = 1e-6;
    bool kahler_ricci = false;  // drive with i ddbar log det g instead
};
HermField step_flow(const HermField& g, double dt, const StepOptions& opt = {});
double max_stable_dt(const ChartGrid& grid, double cfl = 0.2);

void validate_metric(const HermField& g);

// integral of omega ^ gamma for a constant real 2-form gamma (components gamma_ab)
double pairing_with(const HermField& g, const Mat4& gamma);

}  // namespace pcf
