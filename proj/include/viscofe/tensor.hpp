#pragma once

#include <array>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/LU>

namespace viscofe {

/// General second-order tensor. Component (i, j) is row i, column j.
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Fourth-order tensor with minor symmetries in six-component form.
///
/// Rows and columns follow the Sym3 ordering. Entry (I, J) is the tensor
/// component C_ijkl with I ~ (ij) and J ~ (kl); no shear weights are folded
/// in. Use contract() to apply it to a symmetric tensor.
using Tangent6 = Eigen::Matrix<double, 6, 6>;

/// Maps a Sym3 slot to its (i, j) pair.
inline constexpr std::array<std::array<int, 2>, 6> kSymPairs{{{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};

/// Maps (i, j) to the Sym3 slot.
inline constexpr int sym_index(int i, int j) {
  constexpr int table[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};
  return table[i][j];
}

/// Symmetric second-order tensor stored as (11, 22, 33, 12, 13, 23).
class Sym3 {
 public:
  Sym3() = default;
  Sym3(double a11, double a22, double a33, double a12, double a13, double a23)
      : v_{a11, a22, a33, a12, a13, a23} {}

  static Sym3 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
  static Sym3 zero() { return {}; }

  /// Symmetric part of a general tensor.
  static Sym3 from_matrix(const Mat3& m) {
    return {m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)),
            0.5 * (m(1, 2) + m(2, 1))};
  }

  Mat3 matrix() const {
    Mat3 m;
    m << v_[0], v_[3], v_[4], v_[3], v_[1], v_[5], v_[4], v_[5], v_[2];
    return m;
  }

  double operator[](int k) const { return v_[k]; }
  double& operator[](int k) { return v_[k]; }
  double operator()(int i, int j) const { return v_[sym_index(i, j)]; }

  const std::array<double, 6>& data() const { return v_; }

  double trace() const { return v_[0] + v_[1] + v_[2]; }

  double det() const {
    return v_[0] * (v_[1] * v_[2] - v_[5] * v_[5]) - v_[3] * (v_[3] * v_[2] - v_[5] * v_[4]) +
           v_[4] * (v_[3] * v_[5] - v_[1] * v_[4]);
  }

  /// Full double contraction A : B.
  double dot(const Sym3& o) const {
    return v_[0] * o.v_[0] + v_[1] * o.v_[1] + v_[2] * o.v_[2] +
           2.0 * (v_[3] * o.v_[3] + v_[4] * o.v_[4] + v_[5] * o.v_[5]);
  }

  double norm() const { return std::sqrt(dot(*this)); }

  /// All eigenvalues strictly positive (leading principal minors).
  bool is_spd() const {
    const double m1 = v_[0];
    const double m2 = v_[0] * v_[1] - v_[3] * v_[3];
    return m1 > 0.0 && m2 > 0.0 && det() > 0.0;
  }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  Sym3& operator+=(const Sym3& o) {
    for (int k = 0; k < 6; ++k) v_[k] += o.v_[k];
    return *this;
  }
  Sym3& operator-=(const Sym3& o) {
    for (int k = 0; k < 6; ++k) v_[k] -= o.v_[k];
    return *this;
  }
  Sym3& operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
  }

  friend Sym3 operator+(Sym3 a, const Sym3& b) { return a += b; }
  friend Sym3 operator-(Sym3 a, const Sym3& b) { return a -= b; }
  friend Sym3 operator*(Sym3 a, double s) { return a *= s; }
  friend Sym3 operator*(double s, Sym3 a) { return a *= s; }
  friend bool operator==(const Sym3&, const Sym3&) = default;

 private:
  std::array<double, 6> v_{};
};

/// Sym3 (P Q P) for symmetric P, Q, formed without the general product.
inline Sym3 sandwich(const Sym3& p, const Sym3& q) { return Sym3::from_matrix(p.matrix() * q.matrix() * p.matrix()); }

/// F S F^T for symmetric S.
inline Sym3 push_forward(const Mat3& f, const Sym3& s) { return Sym3::from_matrix(f * s.matrix() * f.transpose()); }

/// Applies a minor-symmetric tangent to a symmetric tensor: out_ij = C_ijkl e_kl.
inline Sym3 contract(const Tangent6& c, const Sym3& e) {
  Sym3 out;
  for (int a = 0; a < 6; ++a) {
    double s = 0.0;
    for (int b = 0; b < 6; ++b) s += c(a, b) * e[b] * (b < 3 ? 1.0 : 2.0);
    out[a] = s;
  }
  return out;
}

}  // namespace viscofe
