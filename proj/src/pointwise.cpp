#include "pcf/pointwise.hpp"

#include <cmath>

namespace pcf {

const Mat4& J_std() {
    static const Mat4 J = [] {
        Mat4 m = Mat4::Zero();
        m(1, 0) = 1;
        m(0, 1) = -1;
        m(3, 2) = 1;
        m(2, 3) = -1;
        return m;
    }();
    return J;
}

// dz^i(e_a)
static cplx dz(int i, int a) {
    if (a == 2 * i) return 1.0;
    if (a == 2 * i + 1) return cplx(0, 1);
    return 0.0;
}

cplx P(int i, int a) {
    if (a == 2 * i) return 0.5;
    if (a == 2 * i + 1) return cplx(0, -0.5);
    return 0.0;
}

Mat4 herm_to_riem(const Mat2c& h) {
    // h11 = a, h22 = b, h12 = r + i s
    double a = h(0, 0).real(), b = h(1, 1).real();
    double r = 0.5 * (h(0, 1).real() + h(1, 0).real());
    double s = 0.5 * (h(0, 1).imag() - h(1, 0).imag());
    Mat4 g;
    g << a, 0, r, s,
         0, a, -s, r,
         r, -s, b, 0,
         s, r, 0, b;
    return 2 * g;
}

Mat2c riem_to_herm(const Mat4& s) {
    Mat2c h;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            cplx v = 0;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) v += P(i, a) * std::conj(P(j, b)) * s(a, b);
            h(i, j) = v;
        }
    return h;
}

Mat4 herm_to_form(const Mat2c& b) {
    Mat4 f;
    for (int a = 0; a < 4; ++a)
        for (int c = 0; c < 4; ++c) {
            cplx s = 0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    s += b(i, j) * (dz(i, a) * std::conj(dz(j, c)) - dz(i, c) * std::conj(dz(j, a)));
            f(a, c) = (cplx(0, 1) * s).real();
        }
    return f;
}

Mat2c form_to_herm(const Mat4& beta) {
    Mat2c h;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            cplx v = 0;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) v += P(i, a) * std::conj(P(j, b)) * beta(a, b);
            h(i, j) = cplx(0, -1) * v;
        }
    return h;
}

Mat4 proj11(const Mat4& beta) {
    const Mat4& J = J_std();
    return 0.5 * (beta + J.transpose() * beta * J);
}

Vec2c one_form_10(const Vec4& phi) {
    Vec2c v;
    for (int i = 0; i < 2; ++i) v(i) = 0.5 * cplx(phi(2 * i), -phi(2 * i + 1));
    return v;
}

double eps4(int a, int b, int c, int d) {
    int p[4] = {a, b, c, d};
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (p[i] == p[j]) return 0;
    int s = 1;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (p[i] > p[j]) s = -s;
    return s;
}

Vec4 hodge3(const Tensor3& beta, const Mat4& g) {
    Mat4 gi = g.inverse();
    double sq = std::sqrt(g.determinant());
    Tensor3 t1{}, t2{}, up{};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double s = 0;
                for (int f = 0; f < 4; ++f) s += gi(c, f) * beta[a][b][f];
                t1[a][b][c] = s;
            }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double s = 0;
                for (int e = 0; e < 4; ++e) s += gi(b, e) * t1[a][e][c];
                t2[a][b][c] = s;
            }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
                double s = 0;
                for (int d = 0; d < 4; ++d) s += gi(a, d) * t2[d][b][c];
                up[a][b][c] = s;
            }
    // (*beta)_d = sqrt(g) sum_{a<b<c} up^{abc} eps_{abcd}
    Vec4 out;
    out(0) = -up[1][2][3];
    out(1) = up[0][2][3];
    out(2) = -up[0][1][3];
    out(3) = up[0][1][2];
    return out * sq;
}

Tensor3 hodge1(const Vec4& phi, const Mat4& g) {
    Vec4 up = g.inverse() * phi;
    double sq = std::sqrt(g.determinant());
    Tensor3 out{};
    for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c)
            for (int d = 0; d < 4; ++d) {
                double s = 0;
                for (int a = 0; a < 4; ++a) s += up(a) * eps4(a, b, c, d);
                out[b][c][d] = s * sq;
            }
    return out;
}

static const int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};

Tensor3 three_form(const std::array<double, 4>& c) {
    Tensor3 t{};
    for (int m = 0; m < 4; ++m) {
        int a = kTriples[m][0], b = kTriples[m][1], d = kTriples[m][2];
        int p[6][3] = {{a, b, d}, {b, d, a}, {d, a, b}, {b, a, d}, {a, d, b}, {d, b, a}};
        for (int s = 0; s < 6; ++s) t[p[s][0]][p[s][1]][p[s][2]] = (s < 3 ? 1 : -1) * c[m];
    }
    return t;
}

std::array<double, 4> three_form_components(const Tensor3& t) {
    std::array<double, 4> c{};
    for (int m = 0; m < 4; ++m) c[m] = t[kTriples[m][0]][kTriples[m][1]][kTriples[m][2]];
    return c;
}

double frob(const Mat4& a) { return a.norm(); }
double frob(const Mat2c& a) { return a.norm(); }

}  // namespace pcf
