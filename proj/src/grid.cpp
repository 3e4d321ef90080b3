#include "pcf/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "pcf/errors.hpp"

namespace pcf {

ChartGrid::ChartGrid(int n_, double period) : n(n_) { periods.fill(period); }

double ChartGrid::min_spacing() const {
    double h = spacing(0);
    for (int a = 1; a < 4; ++a) h = std::min(h, spacing(a));
    return h;
}

double ChartGrid::cell_volume() const {
    return spacing(0) * spacing(1) * spacing(2) * spacing(3);
}

double ChartGrid::volume() const { return periods[0] * periods[1] * periods[2] * periods[3]; }

std::array<int, 4> ChartGrid::multi_index(std::size_t p) const {
    std::array<int, 4> m{};
    for (int a = 3; a >= 0; --a) {
        m[a] = int(p % n);
        p /= n;
    }
    return m;
}

std::array<double, 4> ChartGrid::coords(std::size_t p) const {
    auto m = multi_index(p);
    std::array<double, 4> x{};
    for (int a = 0; a < 4; ++a) x[a] = m[a] * spacing(a);
    return x;
}

void ChartGrid::validate() const {
    if (n < 8) throw ValidationError("grid.points_per_axis must be >= 8");
    if (n & (n - 1)) throw ValidationError("grid.points_per_axis must be a power of 2");
    for (double p : periods)
        if (!(p > 0)) throw ValidationError("grid.periods must be strictly positive");
}

struct Spectral::Impl {
    double* rbuf = nullptr;
    fftw_complex* cbuf = nullptr;
    fftw_plan fwd = nullptr, bwd = nullptr;
};

Spectral::Spectral(const ChartGrid& g) : grid_(g), impl_(std::make_unique<Impl>()) {
    grid_.validate();
    int n = g.n;
    spec_size_ = std::size_t(n) * n * n * (n / 2 + 1);
    impl_->rbuf = fftw_alloc_real(g.size());
    impl_->cbuf = fftw_alloc_complex(spec_size_);
    int dims[4] = {n, n, n, n};
    impl_->fwd = fftw_plan_dft_r2c(4, dims, impl_->rbuf, impl_->cbuf, FFTW_ESTIMATE);
    impl_->bwd = fftw_plan_dft_c2r(4, dims, impl_->cbuf, impl_->rbuf, FFTW_ESTIMATE);
}

Spectral::~Spectral() {
    fftw_destroy_plan(impl_->fwd);
    fftw_destroy_plan(impl_->bwd);
    fftw_free(impl_->rbuf);
    fftw_free(impl_->cbuf);
}

double Spectral::wavenumber(int a, int j) const {
    int n = grid_.n;
    double scale = 2 * M_PI / grid_.periods[a];
    if (a == 3) return (j == n / 2 ? 0.0 : j) * scale;
    if (j == n / 2) return 0.0;
    return (j < n / 2 ? j : j - n) * scale;
}

template <class Fn>
void Spectral::each_mode(Fn&& fn) const {
    int n = grid_.n, nh = n / 2 + 1;
    std::size_t q = 0;
    for (int i0 = 0; i0 < n; ++i0)
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2)
                for (int i3 = 0; i3 < nh; ++i3, ++q) fn(q, std::array<int, 4>{i0, i1, i2, i3});
}

void Spectral::forward(const Field& f, CField& out) const {
    std::memcpy(impl_->rbuf, f.data(), sizeof(double) * grid_.size());
    fftw_execute(impl_->fwd);
    out.resize(spec_size_);
    std::memcpy(reinterpret_cast<double*>(out.data()), impl_->cbuf,
                sizeof(fftw_complex) * spec_size_);
}

void Spectral::inverse(const CField& in, Field& f) const {
    std::memcpy(impl_->cbuf, reinterpret_cast<const double*>(in.data()),
                sizeof(fftw_complex) * spec_size_);
    fftw_execute(impl_->bwd);
    f.resize(grid_.size());
    double s = 1.0 / double(grid_.size());
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = impl_->rbuf[p] * s;
}

Field Spectral::deriv(const Field& f, int a) const {
    CField F, G(spec_size_);
    forward(f, F);
    each_mode([&](std::size_t q, const std::array<int, 4>& j) {
        G[q] = F[q] * std::complex<double>(0, wavenumber(a, j[a]));
    });
    Field out;
    inverse(G, out);
    return out;
}

std::array<Field, 4> Spectral::grad(const Field& f) const {
    CField F, G(spec_size_);
    forward(f, F);
    std::array<Field, 4> out;
    for (int a = 0; a < 4; ++a) {
        each_mode([&](std::size_t q, const std::array<int, 4>& j) {
            G[q] = F[q] * std::complex<double>(0, wavenumber(a, j[a]));
        });
        inverse(G, out[a]);
    }
    return out;
}

Field Spectral::divergence(const std::array<Field, 4>& v) const {
    CField F, G(spec_size_, 0.0);
    for (int a = 0; a < 4; ++a) {
        forward(v[a], F);
        each_mode([&](std::size_t q, const std::array<int, 4>& j) {
            G[q] += F[q] * std::complex<double>(0, wavenumber(a, j[a]));
        });
    }
    Field out;
    inverse(G, out);
    return out;
}

std::array<Field, 10> Spectral::hessian(const Field& f) const {
    CField F, G(spec_size_);
    forward(f, F);
    std::array<Field, 10> out;
    for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b) {
            each_mode([&](std::size_t q, const std::array<int, 4>& j) {
                G[q] = -F[q] * (wavenumber(a, j[a]) * wavenumber(b, j[b]));
            });
            inverse(G, out[sym_index(a, b)]);
        }
    return out;
}

Field Spectral::flat_laplacian(const Field& f) const {
    CField F;
    forward(f, F);
    each_mode([&](std::size_t q, const std::array<int, 4>& j) {
        double k2 = 0;
        for (int a = 0; a < 4; ++a) k2 += std::pow(wavenumber(a, j[a]), 2);
        F[q] *= -k2;
    });
    Field out;
    inverse(F, out);
    return out;
}

Field Spectral::apply_symbol(const Field& f, double (*sym)(const std::array<double, 4>&)) const {
    CField F;
    forward(f, F);
    each_mode([&](std::size_t q, const std::array<int, 4>& j) {
        std::array<double, 4> k{};
        for (int a = 0; a < 4; ++a) k[a] = wavenumber(a, j[a]);
        F[q] *= sym(k);
    });
    Field out;
    inverse(F, out);
    return out;
}

// Full |k|^2 including the Nyquist row, used by the heat kernel and preconditioner.
static double full_k2(const ChartGrid& g, const std::array<int, 4>& j) {
    double k2 = 0;
    for (int a = 0; a < 4; ++a) {
        int n = g.n;
        int m = (a == 3) ? j[a] : (j[a] <= n / 2 ? j[a] : j[a] - n);
        double k = m * 2 * M_PI / g.periods[a];
        k2 += k * k;
    }
    return k2;
}

Field Spectral::heat(const Field& f, double s) const {
    CField F;
    forward(f, F);
    each_mode([&](std::size_t q, const std::array<int, 4>& j) {
        F[q] *= std::exp(-s * full_k2(grid_, j));
    });
    Field out;
    inverse(F, out);
    return out;
}

Field Spectral::drop_nyquist(const Field& f) const {
    CField F;
    forward(f, F);
    int nq = grid_.n / 2;
    each_mode([&](std::size_t q, const std::array<int, 4>& j) {
        if (j[0] == nq || j[1] == nq || j[2] == nq || j[3] == nq) F[q] = 0;
    });
    Field out;
    inverse(F, out);
    return out;
}

Field Spectral::solve_flat_shifted(const Field& f, double shift, double scale) const {
    CField F;
    forward(f, F);
    each_mode([&](std::size_t q, const std::array<int, 4>& j) {
        F[q] /= (scale * full_k2(grid_, j) + shift);
    });
    Field out;
    inverse(F, out);
    return out;
}

double Spectral::mean(const Field& f) const {
    double s = 0;
    for (double v : f) s += v;
    return s / double(f.size());
}

double Spectral::high_mode_fraction(const Field& f) const {
    CField F;
    forward(f, F);
    int n = grid_.n;
    double tot = 0, hi = 0;
    each_mode([&](std::size_t q, const std::array<int, 4>& j) {
        double w = (j[3] == 0 || j[3] == n / 2) ? 1.0 : 2.0;
        double e = w * std::norm(F[q]);
        tot += e;
        bool high = false;
        for (int a = 0; a < 4; ++a) {
            int m = (a == 3) ? j[a] : (j[a] <= n / 2 ? j[a] : j[a] - n);
            if (std::abs(m) > n / 4) high = true;
        }
        if (high) hi += e;
    });
    return tot > 0 ? hi / tot : 0.0;
}

double sup_norm(const Field& f) {
    double m = 0;
    for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Field& a, const Field& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace pcf
