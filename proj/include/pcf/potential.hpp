#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "pcf/chart.hpp"

namespace pcf {

// alpha = alpha_1 dz^1 + alpha_2 dz^2, stored as Re/Im of each component.
struct PotentialForm {
    ChartGrid grid;
    std::array<Field, 4> a;
    Mat2c background = Mat2c::Identity();

    PotentialForm() = default;
    explicit PotentialForm(const ChartGrid& g);
    cplx at(std::size_t p, int i) const { return {a[2 * i][p], a[2 * i + 1][p]}; }
    void set(std::size_t p, int i, cplx v) {
        a[2 * i][p] = v.real();
        a[2 * i + 1][p] = v.imag();
    }
    PotentialForm& axpy(double s, const PotentialForm& o);
};

// Trigonometric alpha: alpha_i += coef * exp(i k.x) with k in units of 2 pi / period.
struct AlphaMode {
    int comp = 0;
    std::array<int, 4> k{};
    cplx coef = 0;
};

struct AlphaModes {
    std::vector<AlphaMode> modes;
    Mat2c background = Mat2c::Identity();

    Vec2c alpha(const ChartGrid& g, const std::array<double, 4>& x) const;
    // exact metric background + dbar alpha + d alphabar at a point
    Mat2c metric(const ChartGrid& g, const std::array<double, 4>& x) const;
    HermField metric_field(const ChartGrid& g) const;
    PotentialForm sample(const ChartGrid& g) const;
    AlphaModes scaled(double s) const;
};

AlphaModes random_alpha(std::uint64_t seed, int nmodes, int kmax, double amplitude);

// g_ij = background + i dbar_j alpha_i - i d_i conj(alpha_j)
HermField metric_from_alpha(const PotentialForm& a);
// the tensor (1,1) form generated by a (1,0)-form field, without background
HermField dbar_plus_d(const PotentialForm& r);
// d alpha/dt = (d^* omega)^{1,0} - (i/2) d log det g
PotentialForm alpha_flow_rhs(const PotentialForm& a);

using Mat8 = Eigen::Matrix<double, 8, 8>;
Mat8 w_matrix_point(const Mat2c& h, const Eigen::Matrix2cd& B);

struct WReport {
    double max_det_dev = 0;   // max |det W - 1|
    double max_asym = 0;      // max |W - W^T|
    double min_eig = 0;       // smallest eigenvalue of W over the grid
};
WReport w_matrix(const PotentialForm& a);
Mat8 w_matrix_at(const PotentialForm& a, std::size_t p);

struct PotentialSample {
    double t;
    double flat_distance;
    double det_w_dev;
    double torsion_l2;
    double min_eig;
};

struct PotentialRun {
    std::vector<PotentialSample> series;
    PotentialForm final_alpha;
    bool monotone_tail = false;
};

struct PotentialRunOptions {
    double dt = 0;  // 0 -> CFL limited
    double cfl = 0.2;
    int sample_every = 10;
};

PotentialRun run_potential_flow(const PotentialForm& a0, double t_end,
                                const PotentialRunOptions& opt = {},
                                const std::function<void(const PotentialSample&)>& on_sample = {});

// sup |g - <g>| / |<g>| after volume normalization
double flat_distance(const HermField& g);
double torsion_l2(const HermField& g);
bool monotone_tail(const std::vector<double>& v, double tail_fraction = 0.5, double slack = 1e-12);

}  // namespace pcf
