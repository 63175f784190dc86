#pragma once

// Small dense vectors and matrices with compile-time size. Everything a
// shooting method or a monodromy computation needs and nothing more: the
// dimensions in this project are 2, 3, 4 and 6, so O(n^3) direct solves
// are always the right tool.

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>

namespace hdl {

template <std::size_t N>
struct Vec {
  std::array<double, N> v{};

  double& operator[](std::size_t i) { return v[i]; }
  const double& operator[](std::size_t i) const { return v[i]; }

  Vec& operator+=(const Vec& o) {
    for (std::size_t i = 0; i < N; ++i) v[i] += o.v[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (std::size_t i = 0; i < N; ++i) v[i] -= o.v[i];
    return *this;
  }
  Vec& operator*=(double a) {
    for (std::size_t i = 0; i < N; ++i) v[i] *= a;
    return *this;
  }

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double a, Vec x) { return x *= a; }
  friend Vec operator*(Vec x, double a) { return x *= a; }
  friend Vec operator-(Vec a) {
    for (auto& c : a.v) c = -c;
    return a;
  }
};

template <std::size_t N>
inline double dot(const Vec<N>& a, const Vec<N>& b) {
  double s = 0;
  for (std::size_t i = 0; i < N; ++i) s += a.v[i] * b.v[i];
  return s;
}

template <std::size_t N>
inline double norm(const Vec<N>& a) {
  return std::sqrt(dot(a, a));
}

template <std::size_t N>
inline double norm_inf(const Vec<N>& a) {
  double m = 0;
  for (double c : a.v) m = std::max(m, std::abs(c));
  return m;
}

// Row-major fixed-size matrix.
template <std::size_t R, std::size_t C = R>
struct Mat {
  std::array<double, R * C> m{};

  double& operator()(std::size_t i, std::size_t j) { return m[i * C + j]; }
  const double& operator()(std::size_t i, std::size_t j) const { return m[i * C + j]; }

  static Mat identity()
    requires(R == C)
  {
    Mat I;
    for (std::size_t i = 0; i < R; ++i) I(i, i) = 1.0;
    return I;
  }

  friend Vec<R> operator*(const Mat& A, const Vec<C>& x) {
    Vec<R> y;
    for (std::size_t i = 0; i < R; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < C; ++j) s += A(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  template <std::size_t K>
  friend Mat<R, K> operator*(const Mat& A, const Mat<C, K>& B) {
    Mat<R, K> P;
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        double s = 0;
        for (std::size_t j = 0; j < C; ++j) s += A(i, j) * B(j, k);
        P(i, k) = s;
      }
    return P;
  }

  friend Mat operator+(Mat A, const Mat& B) {
    for (std::size_t i = 0; i < R * C; ++i) A.m[i] += B.m[i];
    return A;
  }
  friend Mat operator-(Mat A, const Mat& B) {
    for (std::size_t i = 0; i < R * C; ++i) A.m[i] -= B.m[i];
    return A;
  }
  friend Mat operator*(double a, Mat A) {
    for (auto& c : A.m) c *= a;
    return A;
  }
};

template <std::size_t N>
inline double trace(const Mat<N>& A) {
  double s = 0;
  for (std::size_t i = 0; i < N; ++i) s += A(i, i);
  return s;
}

// Solve A x = b by Gaussian elimination with partial pivoting.
// Throws on (numerically) singular A; callers treat that as "no Newton step".
template <std::size_t N>
inline Vec<N> solve(Mat<N> A, Vec<N> b) {
  std::array<std::size_t, N> piv;
  for (std::size_t i = 0; i < N; ++i) piv[i] = i;
  for (std::size_t k = 0; k < N; ++k) {
    std::size_t p = k;
    double best = std::abs(A(k, k));
    for (std::size_t i = k + 1; i < N; ++i) {
      if (std::abs(A(i, k)) > best) {
        best = std::abs(A(i, k));
        p = i;
      }
    }
    if (best == 0.0 || !std::isfinite(best)) throw std::runtime_error("singular matrix");
    if (p != k) {
      for (std::size_t j = 0; j < N; ++j) std::swap(A(k, j), A(p, j));
      std::swap(b[k], b[p]);
    }
    for (std::size_t i = k + 1; i < N; ++i) {
      double f = A(i, k) / A(k, k);
      A(i, k) = 0.0;
      for (std::size_t j = k + 1; j < N; ++j) A(i, j) -= f * A(k, j);
      b[i] -= f * b[k];
    }
  }
  Vec<N> x;
  for (std::size_t i = N; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < N; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return x;
}

template <std::size_t N>
inline double det(Mat<N> A) {
  double d = 1.0;
  for (std::size_t k = 0; k < N; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < N; ++i)
      if (std::abs(A(i, k)) > std::abs(A(p, k))) p = i;
    if (A(p, k) == 0.0) return 0.0;
    if (p != k) {
      for (std::size_t j = 0; j < N; ++j) std::swap(A(k, j), A(p, j));
      d = -d;
    }
    d *= A(k, k);
    for (std::size_t i = k + 1; i < N; ++i) {
      double f = A(i, k) / A(k, k);
      for (std::size_t j = k; j < N; ++j) A(i, j) -= f * A(k, j);
    }
  }
  return d;
}

// Eigenvalues of a symmetric 2x2 matrix, ascending.
struct SymEig2 {
  double lo, hi;
};

inline SymEig2 sym_eig2(double a, double b, double d) {
  // [[a, b], [b, d]]
  double tr = a + d;
  double disc = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
  return {0.5 * tr - disc, 0.5 * tr + disc};
}

struct SymEigPair {
  double lo, hi;
  Vec<2> v_lo, v_hi;  // unit eigenvectors, v_lo perpendicular to v_hi
};

inline SymEigPair sym_eig2_vectors(const Mat<2>& m) {
  SymEig2 ev = sym_eig2(m(0, 0), m(0, 1), m(1, 1));
  SymEigPair p;
  p.lo = ev.lo;
  p.hi = ev.hi;
  // (b, hi - a) and (hi - d, b) both solve (M - hi I) v = 0; take the bigger
  Vec<2> c1{{m(0, 1), ev.hi - m(0, 0)}};
  Vec<2> c2{{ev.hi - m(1, 1), m(0, 1)}};
  Vec<2> v = norm(c1) >= norm(c2) ? c1 : c2;
  double n = norm(v);
  p.v_hi = n > 0 ? (1.0 / n) * v : Vec<2>{{1.0, 0.0}};
  p.v_lo = {{-p.v_hi[1], p.v_hi[0]}};
  return p;
}

}  // namespace hdl
