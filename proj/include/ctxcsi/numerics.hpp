// SPDX-License-Identifier: Apache-2.0
//
// ctxcsi: context-conditioned channel statistics prediction and AP selection
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CTXCSI_NUMERICS_HPP
#define CTXCSI_NUMERICS_HPP

#include <Eigen/Dense>

namespace ctxcsi {

// First N columns of the unitary 2N x 2N DFT matrix:
// q(k, m) = exp(-j*2*pi*k*m / (2N)) / sqrt(2N), so q^H q = I_N.
// One instance per N is built lazily and shared read-only.
struct SemiDft {
    int n = 0;
    Eigen::MatrixXcd q; // 2N x N

    static const SemiDft& get(int n);
};

// Nonnegative spectrum of length 2N defining an N x N Hermitian Toeplitz
// covariance C = q^H diag(spectrum) q, plus the observation noise floor.
struct SpectralCovariance {
    Eigen::VectorXd spectrum; // length 2N, entries >= 0
    double noise_variance = 0.0;
};

// Assembles the covariance; adds noise_variance * I when include_noise is set.
// The result is Hermitian, Toeplitz and positive semidefinite by construction.
Eigen::MatrixXcd toeplitz_cov(const SpectralCovariance& sc, bool include_noise);

struct LoglikGrad {
    double loglik = 0.0;
    Eigen::VectorXd grad; // d loglik / d spectrum, length 2N
};

// Circularly-symmetric Gaussian log-likelihood of y under
// Ct = sum_k c_k q_k q_k^H + noise_variance*I, with the analytic gradient
//   d loglik / d c_k = -q_k^H Ct^{-1} q_k + |q_k^H Ct^{-1} y|^2,
// all through a single Hermitian Cholesky factorization.
// Throws std::runtime_error("singular covariance") when Ct is not positive definite.
LoglikGrad gauss_loglik_grad(const Eigen::VectorXcd& y, const SpectralCovariance& sc);

// KL divergence between diagonal real Gaussians N(mu_q, diag(var_q)) and
// N(mu_p, diag(var_p)). Nonnegative; zero iff the parameters are equal.
double kl_diag_gauss(const Eigen::VectorXd& mu_q, const Eigen::VectorXd& var_q,
                     const Eigen::VectorXd& mu_p, const Eigen::VectorXd& var_p);

struct EigPair {
    double value = 0.0;
    Eigen::VectorXcd vector;
};

// Dominant eigenpair of a Hermitian PSD matrix by power iteration with the
// deterministic start vector e_0 (next basis vector when that lies in the
// null space). Zero matrix returns (0, e_0).
EigPair top_eigpair(const Eigen::MatrixXcd& c);

} // namespace ctxcsi

#endif
