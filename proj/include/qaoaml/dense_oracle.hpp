#pragma once

// Reference QAOA evolution with explicit 2^n x 2^n operators, for n <= 6.
// The cost operator is assembled from Pauli Z Kronecker products and the
// mixer exponential comes from an eigendecomposition of sum_q X_q, so this
// path shares nothing with the statevector kernels in qaoa.hpp.

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "qaoaml/errors.hpp"
#include "qaoaml/graph.hpp"
#include "qaoaml/qaoa.hpp"

namespace qaoaml {

inline constexpr int kMaxDenseQubits = 6;

namespace detail {

/// Kronecker product of single-qubit operators; ops[q] acts on qubit q
/// (qubit 0 is the least significant index bit, hence the rightmost factor).
inline Eigen::MatrixXd kron_chain(const std::vector<Eigen::Matrix2d>& ops) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(1, 1);
  for (auto it = ops.begin(); it != ops.end(); ++it) {
    Eigen::MatrixXd next(out.rows() * 2, out.cols() * 2);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        next.block(r * out.rows(), c * out.cols(), out.rows(), out.cols()) = (*it)(r, c) * out;
    out = std::move(next);
  }
  return out;
}

}  // namespace detail

inline StateVector dense_oracle(const Graph& g, const QaoaParams& params) {
  const int n = g.n();
  if (n > kMaxDenseQubits)
    throw ResourceError("dense oracle capped at " + std::to_string(kMaxDenseQubits) + " qubits");
  const Eigen::Index dim = Eigen::Index{1} << n;
  const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d pz;
  pz << 1, 0, 0, -1;
  Eigen::Matrix2d px;
  px << 0, 1, 1, 0;

  // H_C = sum_{(i,j)} (I - Z_i Z_j) / 2
  Eigen::MatrixXd hc = Eigen::MatrixXd::Zero(dim, dim);
  for (auto [u, v] : g.edges()) {
    std::vector<Eigen::Matrix2d> ops(n, id);
    ops[u] = pz;
    ops[v] = pz;
    hc += 0.5 * (Eigen::MatrixXd::Identity(dim, dim) - detail::kron_chain(ops));
  }
  // H_M = sum_q X_q
  Eigen::MatrixXd hm = Eigen::MatrixXd::Zero(dim, dim);
  for (int q = 0; q < n; ++q) {
    std::vector<Eigen::Matrix2d> ops(n, id);
    ops[q] = px;
    hm += detail::kron_chain(ops);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_c(hc);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_m(hm);

  auto expi = [dim](const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& e, double t) {
    const Eigen::MatrixXcd v = e.eigenvectors().cast<Complex>();
    Eigen::VectorXcd d(dim);
    for (Eigen::Index k = 0; k < dim; ++k)
      d[k] = std::exp(Complex(0.0, -t * e.eigenvalues()[k]));
    return Eigen::MatrixXcd(v * d.asDiagonal() * v.adjoint());
  };

  Eigen::VectorXcd psi = Eigen::VectorXcd::Constant(dim, Complex(1.0 / std::sqrt(double(dim)), 0));
  for (int k = 0; k < params.depth(); ++k) {
    psi = expi(eig_c, params.gammas()[k]) * psi;
    psi = expi(eig_m, params.betas()[k]) * psi;
  }
  StateVector s;
  s.amplitudes.assign(psi.data(), psi.data() + dim);
  return s;
}

}  // namespace qaoaml
