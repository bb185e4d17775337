#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "mtnet/core.hpp"

namespace mtnet::numerics {

/// Eigenvalues of a real nonsymmetric matrix and the spectral abscissa.
///
/// Pipeline: diagonal balancing (radix 2), Householder reduction to upper
/// Hessenberg form, then the Francis implicit double-shift QR iteration with
/// deflation on small subdiagonals. Only eigenvalues are computed; the Schur
/// vectors are never accumulated.

namespace detail {

// Rescales rows/columns by powers of two until row and column norms are
// comparable. Similarity transform, so the spectrum is unchanged.
inline void balance(Matrix& a) {
  constexpr double radix = 2.0;
  constexpr double sqrdx = radix * radix;
  const Eigen::Index n = a.rows();
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0;
      double r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= sqrdx;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= sqrdx;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

inline void reduce_to_hessenberg(Matrix& h) {
  const Eigen::Index n = h.rows();
  const Eigen::Index high = n - 1;
  std::vector<double> ort(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index m = 1; m < high; ++m) {
    double scale = 0.0;
    for (Eigen::Index i = m; i <= high; ++i) scale += std::abs(h(i, m - 1));
    if (scale == 0.0) continue;

    double hh = 0.0;
    for (Eigen::Index i = high; i >= m; --i) {
      ort[i] = h(i, m - 1) / scale;
      hh += ort[i] * ort[i];
    }
    double g = std::sqrt(hh);
    if (ort[m] > 0) g = -g;
    hh -= ort[m] * g;
    ort[m] -= g;

    for (Eigen::Index j = m; j < n; ++j) {
      double f = 0.0;
      for (Eigen::Index i = high; i >= m; --i) f += ort[i] * h(i, j);
      f /= hh;
      for (Eigen::Index i = m; i <= high; ++i) h(i, j) -= f * ort[i];
    }
    for (Eigen::Index i = 0; i <= high; ++i) {
      double f = 0.0;
      for (Eigen::Index j = high; j >= m; --j) f += ort[j] * h(i, j);
      f /= hh;
      for (Eigen::Index j = m; j <= high; ++j) h(i, j) -= f * ort[j];
    }
    ort[m] *= scale;
    h(m, m - 1) = scale * g;
  }
  for (Eigen::Index i = 2; i < n; ++i) {
    for (Eigen::Index j = 0; j < i - 1; ++j) h(i, j) = 0.0;
  }
}

// Francis double-shift QR on an upper Hessenberg matrix; eigenvalues only.
inline std::vector<std::complex<double>> hessenberg_eigenvalues(Matrix h,
                                                                int max_iter) {
  const Eigen::Index nn = h.rows();
  std::vector<double> re(static_cast<std::size_t>(nn), 0.0);
  std::vector<double> im(static_cast<std::size_t>(nn), 0.0);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  double norm = 0.0;
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(i - 1, 0); j < nn; ++j) {
      norm += std::abs(h(i, j));
    }
  }

  Eigen::Index n = nn - 1;
  const Eigen::Index low = 0;
  double exshift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, z = 0, w = 0, x = 0, y = 0;
  int iter = 0;

  while (n >= low) {
    Eigen::Index l = n;
    while (l > low) {
      s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
      if (s == 0.0) s = norm;
      if (std::abs(h(l, l - 1)) <= eps * s) break;
      --l;
    }

    if (l == n) {
      re[n] = h(n, n) + exshift;
      im[n] = 0.0;
      --n;
      iter = 0;
    } else if (l == n - 1) {
      w = h(n, n - 1) * h(n - 1, n);
      p = (h(n - 1, n - 1) - h(n, n)) / 2.0;
      q = p * p + w;
      z = std::sqrt(std::abs(q));
      x = h(n, n) + exshift;
      if (q >= 0) {
        z = (p >= 0) ? p + z : p - z;
        re[n - 1] = x + z;
        re[n] = (z != 0.0) ? x - w / z : re[n - 1];
        im[n - 1] = 0.0;
        im[n] = 0.0;
      } else {
        re[n - 1] = x + p;
        re[n] = x + p;
        im[n - 1] = z;
        im[n] = -z;
      }
      n -= 2;
      iter = 0;
    } else {
      x = h(n, n);
      y = h(n - 1, n - 1);
      w = h(n, n - 1) * h(n - 1, n);

      // Exceptional shifts break cycles on pathological inputs.
      if (iter == 10) {
        exshift += x;
        for (Eigen::Index i = low; i <= n; ++i) h(i, i) -= x;
        s = std::abs(h(n, n - 1)) + std::abs(h(n - 1, n - 2));
        x = y = 0.75 * s;
        w = -0.4375 * s * s;
      }
      if (iter == 30) {
        s = (y - x) / 2.0;
        s = s * s + w;
        if (s > 0) {
          s = std::sqrt(s);
          if (y < x) s = -s;
          s = x - w / ((y - x) / 2.0 + s);
          for (Eigen::Index i = low; i <= n; ++i) h(i, i) -= s;
          exshift += s;
          x = y = w = 0.964;
        }
      }
      if (++iter > max_iter) {
        throw NumericError(
            "spectral_abscissa: QR iteration did not converge");
      }

      Eigen::Index m = n - 2;
      while (m >= l) {
        z = h(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - w) / h(m + 1, m) + h(m, m + 1);
        q = h(m + 1, m + 1) - z - r - s;
        r = h(m + 2, m + 1);
        s = std::abs(p) + std::abs(q) + std::abs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        if (std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r)) <
            eps * (std::abs(p) * (std::abs(h(m - 1, m - 1)) + std::abs(z) +
                                  std::abs(h(m + 1, m + 1))))) {
          break;
        }
        --m;
      }
      for (Eigen::Index i = m + 2; i <= n; ++i) {
        h(i, i - 2) = 0.0;
        if (i > m + 2) h(i, i - 3) = 0.0;
      }

      for (Eigen::Index k = m; k <= n - 1; ++k) {
        const bool notlast = (k != n - 1);
        if (k != m) {
          p = h(k, k - 1);
          q = h(k + 1, k - 1);
          r = notlast ? h(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x == 0.0) continue;
          p /= x;
          q /= x;
          r /= x;
        }
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0) s = -s;
        if (s == 0.0) continue;
        if (k != m) {
          h(k, k - 1) = -s * x;
        } else if (l != m) {
          h(k, k - 1) = -h(k, k - 1);
        }
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;

        for (Eigen::Index j = k; j <= n; ++j) {
          p = h(k, j) + q * h(k + 1, j);
          if (notlast) {
            p += r * h(k + 2, j);
            h(k + 2, j) -= p * z;
          }
          h(k, j) -= p * x;
          h(k + 1, j) -= p * y;
        }
        const Eigen::Index last = std::min(n, k + 3);
        for (Eigen::Index i = l; i <= last; ++i) {
          p = x * h(i, k) + y * h(i, k + 1);
          if (notlast) {
            p += z * h(i, k + 2);
            h(i, k + 2) -= p * r;
          }
          h(i, k) -= p;
          h(i, k + 1) -= p * q;
        }
      }
    }
  }

  std::vector<std::complex<double>> out;
  out.reserve(static_cast<std::size_t>(nn));
  for (Eigen::Index i = 0; i < nn; ++i) out.emplace_back(re[i], im[i]);
  return out;
}

}  // namespace detail

template <typename Derived>
std::vector<std::complex<double>> eigenvalues(
    const Eigen::MatrixBase<Derived>& b, int max_iter_per_eigenvalue = 100) {
  require(b.rows() == b.cols(), "eigenvalues: matrix must be square");
  Matrix a = b;
  if (!a.allFinite()) throw NumericError("eigenvalues: non-finite input");
  if (a.rows() == 0) return {};
  detail::balance(a);
  detail::reduce_to_hessenberg(a);
  return detail::hessenberg_eigenvalues(std::move(a),
                                        max_iter_per_eigenvalue);
}

/// max Re(lambda) over the spectrum of b.
template <typename Derived>
double spectral_abscissa(const Eigen::MatrixBase<Derived>& b) {
  require(b.rows() > 0, "spectral_abscissa: empty matrix");
  double omega = -std::numeric_limits<double>::infinity();
  for (const auto& ev : eigenvalues(b)) omega = std::max(omega, ev.real());
  return omega;
}

}  // namespace mtnet::numerics
