#pragma once
#include <Eigen/Dense>
#include <array>
#include <complex>

// Pointwise linear algebra in real dimension 4 with the standard complex structure
// J e0 = e1, J e2 = e3 (real index a = 2i + r for complex index i).
namespace pcf {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;
using Mat2c = Eigen::Matrix2cd;
using Vec2c = Eigen::Vector2cd;
using cplx = std::complex<double>;

// Rank-3 tensor T[a][b][c]
using Tensor3 = std::array<std::array<std::array<double, 4>, 4>, 4>;

const Mat4& J_std();

// Riemannian metric g(X,Y) = 2 Re sum h_ij dz^i(X) conj(dz^j(Y)), so that h_ij = g(d_i, dbar_j)
Mat4 herm_to_riem(const Mat2c& h);
// components S(d_i, dbar_j) of a real symmetric bilinear form (complex-bilinear extension)
Mat2c riem_to_herm(const Mat4& s);
// real 2-form  beta = i b_ij dz^i ^ dzbar^j
Mat4 herm_to_form(const Mat2c& b);
// b_ij = -i beta(d_i, dbar_j)
Mat2c form_to_herm(const Mat4& beta);
// (1,1) part of a real 2-form
Mat4 proj11(const Mat4& beta);
// (1,0) part of a real 1-form: phi_i = phi(d_i)
Vec2c one_form_10(const Vec4& phi);
// complex derivative operators in terms of real partials: d_i = sum_a P(i,a) d_a
cplx P(int i, int a);

// Levi-Civita symbol
double eps4(int a, int b, int c, int d);

// (*beta)_d for a 3-form; beta given with all lower indices
Vec4 hodge3(const Tensor3& beta, const Mat4& g);
// (*phi)_{bcd} for a 1-form
Tensor3 hodge1(const Vec4& phi, const Mat4& g);
// totally antisymmetric 3-form from 4 independent components (012),(013),(023),(123)
Tensor3 three_form(const std::array<double, 4>& c);
std::array<double, 4> three_form_components(const Tensor3& t);

double frob(const Mat4& a);
double frob(const Mat2c& a);

}  // namespace pcf
