#pragma once

// Dense and sparse complex kernels sized for cluster Hilbert spaces (2^k)
// and their superoperator spaces (4^k).
//
// Vectorization convention (fixed project-wide): column stacking, so that
//   vec(A X B) = (B^T kron A) vec(X).
// This matches Eigen's default column-major storage, which makes vec/unvec
// plain reinterpretations of the same buffer.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecce {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using ComplexRowVector = Eigen::RowVectorXcd;
using SparseComplexMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;

inline constexpr Complex kI{0.0, 1.0};

class AlgebraError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest dense dimension accepted by kron: the superoperator of an
/// order-6 cluster (4^6).
inline constexpr Eigen::Index kMaxDenseDim = 4096;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline void require_finite(const ComplexMatrix& m, const char* what) {
  if (!m.allFinite()) throw AlgebraError(std::string(what) + ": non-finite entries");
}

/// Standard Kronecker product a (x) b.
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_finite(a, "kron");
  require_finite(b, "kron");
  const Eigen::Index rows = a.rows() * b.rows();
  const Eigen::Index cols = a.cols() * b.cols();
  if (rows > kMaxDenseDim || cols > kMaxDenseDim) {
    throw AlgebraError("kron: result " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " exceeds the dense dimension limit " + std::to_string(kMaxDenseDim));
  }
  ComplexMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Sparse Kronecker product; no dimension cap (used for full-space oracles).
inline SparseComplexMatrix kron(const SparseComplexMatrix& a, const SparseComplexMatrix& b) {
  std::vector<Eigen::Triplet<Complex>> triplets;
  triplets.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (Eigen::Index ja = 0; ja < a.outerSize(); ++ja) {
    for (SparseComplexMatrix::InnerIterator ia(a, ja); ia; ++ia) {
      for (Eigen::Index jb = 0; jb < b.outerSize(); ++jb) {
        for (SparseComplexMatrix::InnerIterator ib(b, jb); ib; ++ib) {
          triplets.emplace_back(ia.row() * b.rows() + ib.row(), ja * b.cols() + jb,
                                ia.value() * ib.value());
        }
      }
    }
  }
  SparseComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

inline ComplexVector vec(const ComplexMatrix& m) {
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0 || rows * cols != v.size()) {
    throw AlgebraError("unvec: vector of length " + std::to_string(v.size()) +
                       " cannot be reshaped to " + std::to_string(rows) + "x" +
                       std::to_string(cols));
  }
  return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

inline double norm1(const ComplexMatrix& m) {
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

inline double norm1(const SparseComplexMatrix& m) {
  double best = 0.0;
  for (Eigen::Index j = 0; j < m.outerSize(); ++j) {
    double col = 0.0;
    for (SparseComplexMatrix::InnerIterator it(m, j); it; ++it) col += std::abs(it.value());
    best = std::max(best, col);
  }
  return best;
}

namespace detail {

// Pade coefficients and 1-norm thresholds for double precision
// (scaling-and-squaring, degrees 3, 5, 7, 9, 13).
inline constexpr std::array<double, 4> kPade3{120., 60., 12., 1.};
inline constexpr std::array<double, 6> kPade5{30240., 15120., 3360., 420., 30., 1.};
inline constexpr std::array<double, 8> kPade7{17297280., 8648640., 1995840., 277200.,
                                              25200.,    1512.,    56.,      1.};
inline constexpr std::array<double, 10> kPade9{17643225600., 8821612800., 2075673600.,
                                               302702400.,   30270240.,   2162160.,
                                               110880.,      3960.,       90.,
                                               1.};
inline constexpr std::array<double, 14> kPade13{
    64764752532480000., 32382376266240000., 7771770303897600., 1187353796428800.,
    129060195264000.,   10559470521600.,    670442572800.,     33522128640.,
    1323241920.,        40840800.,          960960.,           16380.,
    182.,               1.};
inline constexpr std::array<double, 4> kTheta{1.495585217958292e-2, 2.539398330063230e-1,
                                              9.504178996162932e-1, 2.097847961257068e0};
inline constexpr double kTheta13 = 5.371920351148152e0;

template <std::size_t N>
void pade_low(const ComplexMatrix& a, const std::array<double, N>& b, ComplexMatrix& u,
              ComplexMatrix& v) {
  const Eigen::Index n = a.rows();
  const ComplexMatrix ident = ComplexMatrix::Identity(n, n);
  const ComplexMatrix a2 = a * a;
  ComplexMatrix power = ident;
  ComplexMatrix odd = b[1] * ident;
  v = b[0] * ident;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    v += b[k] * power;
    odd += b[k + 1] * power;
  }
  u.noalias() = a * odd;
}

inline void pade13(const ComplexMatrix& a, ComplexMatrix& u, ComplexMatrix& v) {
  const auto& b = kPade13;
  const Eigen::Index n = a.rows();
  const ComplexMatrix ident = ComplexMatrix::Identity(n, n);
  const ComplexMatrix a2 = a * a;
  const ComplexMatrix a4 = a2 * a2;
  const ComplexMatrix a6 = a4 * a2;
  ComplexMatrix tmp = b[13] * a6 + b[11] * a4 + b[9] * a2;
  ComplexMatrix inner = a6 * tmp;
  inner += b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident;
  u.noalias() = a * inner;
  tmp = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v.noalias() = a6 * tmp;
  v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
}

}  // namespace detail

/// exp(g t) by scaling and squaring with a diagonal Pade approximant.
inline ComplexMatrix expm(const ComplexMatrix& g, double t = 1.0) {
  if (g.rows() != g.cols()) throw AlgebraError("expm: generator is not square");
  if (!std::isfinite(t) || t < 0.0) throw AlgebraError("expm: duration must be finite and >= 0");
  require_finite(g, "expm");
  const Eigen::Index n = g.rows();
  if (n == 0) return g;
  ComplexMatrix a = g * t;
  const double norm = norm1(a);
  ComplexMatrix u(n, n), v(n, n);
  int squarings = 0;
  if (norm <= detail::kTheta[0]) {
    detail::pade_low(a, detail::kPade3, u, v);
  } else if (norm <= detail::kTheta[1]) {
    detail::pade_low(a, detail::kPade5, u, v);
  } else if (norm <= detail::kTheta[2]) {
    detail::pade_low(a, detail::kPade7, u, v);
  } else if (norm <= detail::kTheta[3]) {
    detail::pade_low(a, detail::kPade9, u, v);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / detail::kTheta13))));
    if (squarings > 0) a /= std::ldexp(1.0, squarings);
    detail::pade13(a, u, v);
  }
  ComplexMatrix result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  if (!result.allFinite()) throw AlgebraError("expm: result overflowed");
  return result;
}

/// Action exp(g t) v without forming the exponential: truncated Taylor
/// series on s sub-steps with a trace shift and early termination.
/// Suited to large sparse generators where only a few vectors are needed.
inline ComplexVector expm_action(const SparseComplexMatrix& g, double t, ComplexVector v,
                                 double tol = 0x1p-53) {
  if (g.rows() != g.cols() || g.cols() != v.size()) throw AlgebraError("expm_action: dimension mismatch");
  if (!std::isfinite(t) || t < 0.0) throw AlgebraError("expm_action: duration must be finite and >= 0");
  if (t == 0.0 || v.size() == 0) return v;

  const Eigen::Index n = g.rows();
  const Complex mu = g.diagonal().sum() / static_cast<double>(n);
  // 1-norm of the shifted generator (only the diagonal changes)
  double norm = 0.0;
  for (Eigen::Index j = 0; j < g.outerSize(); ++j) {
    double col = 0.0;
    bool has_diag = false;
    for (SparseComplexMatrix::InnerIterator it(g, j); it; ++it) {
      if (it.row() == j) {
        col += std::abs(it.value() - mu);
        has_diag = true;
      } else {
        col += std::abs(it.value());
      }
    }
    if (!has_diag) col += std::abs(mu);
    norm = std::max(norm, col);
  }

  // |h| ||g - mu|| <= 5: about 40 terms, largest term ~ 5^5/5! = 26
  constexpr double kStepNorm = 5.0;
  constexpr int kMaxTerms = 60;
  const auto steps = std::max<long long>(1, static_cast<long long>(std::ceil(t * norm / kStepNorm)));
  const double h = t / static_cast<double>(steps);
  const Complex step_phase = std::exp(mu * h);

  ComplexVector term(n), next(n);
  for (long long s = 0; s < steps; ++s) {
    term = v;
    double prev_norm = v.lpNorm<Eigen::Infinity>();
    for (int j = 1; j <= kMaxTerms; ++j) {
      next.noalias() = g * term;
      next -= mu * term;
      next *= h / static_cast<double>(j);
      term.swap(next);
      v += term;
      const double term_norm = term.lpNorm<Eigen::Infinity>();
      if (term_norm + prev_norm <= tol * v.lpNorm<Eigen::Infinity>()) break;
      prev_norm = term_norm;
    }
    v *= step_phase;
  }
  if (!v.allFinite()) throw AlgebraError("expm_action: result overflowed");
  return v;
}

}  // namespace mecce
