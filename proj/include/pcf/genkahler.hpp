#pragma once
#include <functional>
#include <vector>

#include "pcf/grf.hpp"

namespace pcf {

// Field of real 4x4 endomorphisms, A(a, b) = A^a_b.
struct MatField {
    ChartGrid grid;
    std::array<Field, 16> c;

    MatField() = default;
    explicit MatField(const ChartGrid& g);
    static MatField constant(const ChartGrid& g, const Mat4& m);
    static MatField from_function(const ChartGrid& g,
                                  const std::function<Mat4(const std::array<double, 4>&)>& fn);

    Mat4 at(std::size_t p) const {
        Mat4 m;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) m(a, b) = c[4 * a + b][p];
        return m;
    }
    void set(std::size_t p, const Mat4& m) {
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) c[4 * a + b][p] = m(a, b);
    }
    double sup() const;
    double sup_diff(const MatField& o) const;
};

struct GKReport {
    double complex_sq = 0;   // sup |I^2 + 1|, |J^2 + 1|
    double hermitian = 0;    // sup |g(I., I.) - g|, same for J
    double compat = 0;       // sup |d^c_I w_I + d^c_J w_J|
    double ddc = 0;          // sup |d d^c_I w_I|
    double nijenhuis_I = 0, nijenhuis_J = 0;
    bool ok(double tol = 1e-6) const {
        return complex_sq < tol && hermitian < tol && compat < tol && ddc < tol && nijenhuis_I < tol &&
               nijenhuis_J < tol;
    }
};

struct GKTriple {
    SymField g;
    MatField I, J;

    const ChartGrid& grid() const { return g.grid; }
    GKReport check() const;
    // throws PreconditionError when check() exceeds tol
    void validate(double tol = 1e-6) const;
};

// I = J = standard structure, g from a Hermitian metric
GKTriple kahler_triple(const HermField& h);
// flat T^4 with g = identity, I standard and J e0 = e2, J e1 = -e3 (IJ = K)
GKTriple hyperkahler_triple(const ChartGrid& grid);

struct PoissonReport {
    MatField sigma;  // sigma^{ab} = 1/2 ([I,J] g^-1)^{ab}
    Field p;         // 1/4 tr IJ
    double max_abs_p = 0;
    double sigma_asym = 0;
    int min_rank = 4, max_rank = 0;
    std::vector<std::size_t> degenerate;  // points with |p| >= 1 - locus_tol
};
PoissonReport poisson_sigma(const GKTriple& t, double locus_tol = 1e-9);

// T^2_+ (x0, x1) times T^2_- (x2, x3); h = diag(b+ + d+dbar+ f, b- - d-dbar- f)
struct SplitPotential {
    Field f;
    ChartGrid grid;
    double b_plus = 1, b_minus = 1;

    SplitPotential() = default;
    explicit SplitPotential(const ChartGrid& g, double bp = 1, double bm = 1);
    static SplitPotential from_function(const ChartGrid& g, const std::function<double(const std::array<double, 4>&)>& fn,
                                        double bp = 1, double bm = 1);
    HermField metric() const;
    // throws SingularityError naming the factor that is not positive
    void validate() const;
};
SplitPotential random_split(const ChartGrid& grid, std::uint64_t seed, int nmodes, double amplitude,
                            bool plus_only = false);
// I standard, J = I on T_+ and -I on T_-
GKTriple split_triple(const SplitPotential& s);

// log(det_+ / b+) - log(det_- / b-)
Field twisted_ma_rhs(const SplitPotential& s);
// metric rate induced by a potential rate: diag(d+dbar+ fdot, -d-dbar- fdot)
HermField split_metric_rate(const SplitPotential& s, const Field& fdot);

struct TwistedSample {
    double t = 0;
    double f_osc = 0;         // max f - min f
    double flat_distance = 0;
    double consistency = 0;   // sup |tensor rate - scalar-induced rate|, -1 if not checked
    double min_eig = 0;
};
struct TwistedRun {
    std::vector<TwistedSample> samples;
    std::vector<double> t;   // times of the stored potentials
    std::vector<Field> f;    // filled when keep_fields
    SplitPotential final_state;
    double max_consistency = 0;
    bool monotone_tail = false;
};
struct TwistedOptions {
    double dt = 0;  // 0 -> cfl * h^2 * min diag h
    double cfl = 0.25;
    int sample_every = 10;
    bool check_tensor = true;
    bool keep_fields = false;
};
double twisted_stable_dt(const SplitPotential& s, double cfl = 0.25);
TwistedRun run_twisted_flow(const SplitPotential& s0, double t_end, const TwistedOptions& opt = {},
                            const std::function<void(const TwistedSample&)>& on_sample = {});

// sup |N_J| with N^a_bc = J^d_b d_d J^a_c - J^d_c d_d J^a_b - J^a_d (d_b J^d_c - d_c J^d_b)
double nijenhuis_residual(const MatField& J);
// (L_X A)^a_b = X^c d_c A^a_b - A^c_b d_c X^a + A^a_c d_b X^c
MatField lie_derivative(const MatField& A, const std::array<Field, 4>& X);
// theta_I^# with theta_I = *(d^c_I w_I)
std::array<Field, 4> lee_vector(const GKTriple& t);
// d^c_I w_I for the pair (g, I)
ThreeFormField dc_torsion(const SymField& g, const MatField& I);

struct JoyceOptions {
    double type_tol = 1e-6;  // |p| >= 1 - type_tol on the support of df is a type change
};
// one Euler step of the flow of X = sigma df applied to J by pullback; g = 1/2 Omega [I, J_new]
GKTriple joyce_deform(const GKTriple& t, const Field& f, double dt, const JoyceOptions& opt = {});

}  // namespace pcf
