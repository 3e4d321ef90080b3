#pragma once
#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace pcf {

using Field = std::vector<double>;
using CField = std::vector<std::complex<double>>;

// Periodic chart with the same number of points on each of the four real axes.
// Axis a is the real coordinate x_{a+1}; z1 = x1 + i x2, z2 = x3 + i x4.
struct ChartGrid {
    int n = 16;
    std::array<double, 4> periods{6.283185307179586, 6.283185307179586, 6.283185307179586,
                                  6.283185307179586};

    ChartGrid() = default;
    explicit ChartGrid(int n_, double period = 6.283185307179586);

    std::size_t size() const { return std::size_t(n) * n * n * n; }
    double spacing(int a) const { return periods[a] / n; }
    double min_spacing() const;
    double cell_volume() const;
    double volume() const;
    std::size_t index(int i0, int i1, int i2, int i3) const {
        return ((std::size_t(i0) * n + i1) * n + i2) * n + i3;
    }
    std::array<int, 4> multi_index(std::size_t p) const;
    std::array<double, 4> coords(std::size_t p) const;
    void validate() const;
    bool operator==(const ChartGrid& o) const { return n == o.n && periods == o.periods; }
};

// Fourier differentiation on a ChartGrid. Plans are built once per object.
class Spectral {
public:
    explicit Spectral(const ChartGrid& g);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    const ChartGrid& grid() const { return grid_; }

    void forward(const Field& f, CField& out) const;
    void inverse(const CField& in, Field& f) const;  // normalized

    Field deriv(const Field& f, int a) const;
    std::array<Field, 4> grad(const Field& f) const;
    // sum_a d_a v[a]
    Field divergence(const std::array<Field, 4>& v) const;
    // packed symmetric: (0,0),(0,1),(0,2),(0,3),(1,1),(1,2),(1,3),(2,2),(2,3),(3,3)
    std::array<Field, 10> hessian(const Field& f) const;
    Field flat_laplacian(const Field& f) const;
    // multiply spectrum by m(k) and transform back
    Field apply_symbol(const Field& f, double (*sym)(const std::array<double, 4>&)) const;
    // exp(s * flat Laplacian)
    Field heat(const Field& f, double s) const;
    Field solve_flat_shifted(const Field& f, double shift, double scale) const;
    // remove every mode with a Nyquist index on some axis
    Field drop_nyquist(const Field& f) const;

    // wavenumber for axis a of the spectral index j (Nyquist gives 0 for odd derivatives)
    double wavenumber(int a, int j) const;
    std::size_t spec_size() const { return spec_size_; }
    double mean(const Field& f) const;
    // energy fraction of modes with |k_a| > n/4 on some axis
    double high_mode_fraction(const Field& f) const;

private:
    template <class Fn>
    void each_mode(Fn&& fn) const;

    ChartGrid grid_;
    std::size_t spec_size_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

inline int sym_index(int a, int b) {
    if (a > b) std::swap(a, b);
    static const int tab[4][4] = {{0, 1, 2, 3}, {1, 4, 5, 6}, {2, 5, 7, 8}, {3, 6, 8, 9}};
    return tab[a][b];
}

double sup_norm(const Field& f);
double max_abs_diff(const Field& a, const Field& b);

}  // namespace pcf
