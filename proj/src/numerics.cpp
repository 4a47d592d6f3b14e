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

#include "ctxcsi/numerics.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace ctxcsi {

namespace {
constexpr double pi = 3.141592653589793;
}

const SemiDft& SemiDft::get(int n) {
    static std::mutex mtx;
    static std::map<int, SemiDft> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end())
        return it->second;
    if (n < 1)
        throw std::invalid_argument("SemiDft: n must be >= 1");
    SemiDft d;
    d.n = n;
    d.q.resize(2 * n, n);
    const double scale = 1.0 / std::sqrt(2.0 * n);
    for (int k = 0; k < 2 * n; ++k)
        for (int m = 0; m < n; ++m)
            d.q(k, m) = std::polar(scale, -2.0 * pi * k * m / (2.0 * n));
    return cache.emplace(n, std::move(d)).first->second;
}

Eigen::MatrixXcd toeplitz_cov(const SpectralCovariance& sc, bool include_noise) {
    const int two_n = static_cast<int>(sc.spectrum.size());
    if (two_n <= 0 || two_n % 2 != 0)
        throw std::invalid_argument("toeplitz_cov: spectrum length must be even and positive");
    const int n = two_n / 2;

    // First column r_d = (1/2N) sum_k c_k exp(+j*2*pi*k*d / (2N)); the matrix
    // is C[m][l] = r_{m-l}, conjugate-symmetric in the lag.
    Eigen::VectorXcd r(n);
    for (int d = 0; d < n; ++d) {
        std::complex<double> acc = 0.0;
        for (int k = 0; k < two_n; ++k)
            acc += sc.spectrum[k] * std::polar(1.0, 2.0 * pi * k * d / (2.0 * n));
        r[d] = acc / (2.0 * n);
    }
    // Exact Hermitian diagonal
    r[0] = std::complex<double>(sc.spectrum.sum() / (2.0 * n), 0.0);

    Eigen::MatrixXcd c(n, n);
    for (int m = 0; m < n; ++m)
        for (int l = 0; l < n; ++l)
            c(m, l) = (m >= l) ? r[m - l] : std::conj(r[l - m]);
    if (include_noise)
        c.diagonal().array() += sc.noise_variance;
    return c;
}

LoglikGrad gauss_loglik_grad(const Eigen::VectorXcd& y, const SpectralCovariance& sc) {
    const int n = static_cast<int>(y.size());
    if (sc.spectrum.size() != 2 * n)
        throw std::invalid_argument("gauss_loglik_grad: spectrum length must be 2N");

    SpectralCovariance noisy = sc;
    Eigen::MatrixXcd ct = toeplitz_cov(noisy, true);

    Eigen::LLT<Eigen::MatrixXcd> llt(ct);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("singular covariance");

    const auto& l = llt.matrixLLT();
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = l(i, i).real();
        if (!(d > 0.0) || !std::isfinite(d))
            throw std::runtime_error("singular covariance");
        logdet += 2.0 * std::log(d);
    }

    const SemiDft& dft = SemiDft::get(n);

    // x_k = L^{-1} q_k for all k at once; q_k is the k-th column of Q^H.
    Eigen::MatrixXcd x = dft.q.adjoint();
    llt.matrixL().solveInPlace(x);

    Eigen::VectorXcd ly = y;
    llt.matrixL().solveInPlace(ly);
    const double quad = ly.squaredNorm();

    Eigen::VectorXcd w = llt.solve(y);
    const Eigen::VectorXcd u = dft.q * w; // u_k = q_k^H Ct^{-1} y

    LoglikGrad out;
    out.loglik = -n * std::log(pi) - logdet - quad;
    out.grad.resize(2 * n);
    for (int k = 0; k < 2 * n; ++k)
        out.grad[k] = -x.col(k).squaredNorm() + std::norm(u[k]);
    return out;
}

double kl_diag_gauss(const Eigen::VectorXd& mu_q, const Eigen::VectorXd& var_q,
                     const Eigen::VectorXd& mu_p, const Eigen::VectorXd& var_p) {
    const auto d = mu_q.size();
    if (var_q.size() != d || mu_p.size() != d || var_p.size() != d)
        throw std::invalid_argument("kl_diag_gauss: size mismatch");
    double kl = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(var_q[i] > 0.0) || !(var_p[i] > 0.0))
            throw std::invalid_argument("kl_diag_gauss: nonpositive variance");
        const double dm = mu_q[i] - mu_p[i];
        kl += 0.5 * (std::log(var_p[i] / var_q[i]) + (var_q[i] + dm * dm) / var_p[i] - 1.0);
    }
    return std::max(kl, 0.0);
}

namespace {

// Power iteration from a basis vector; Rayleigh quotient is nondecreasing on
// Hermitian PSD input, so the run started at e_start never falls below C_ss.
bool power_iterate(const Eigen::MatrixXcd& ch, int start, double scale, EigPair& out) {
    const int n = static_cast<int>(ch.rows());
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
    x[start] = 1.0;
    Eigen::VectorXcd cx = ch * x;
    if (cx.norm() <= 1e-14 * scale)
        return false; // start vector lies in the null space

    double lambda = std::real(x.dot(cx));
    for (int it = 0; it < 10000; ++it) {
        x = cx / cx.norm();
        cx = ch * x;
        const double next = std::real(x.dot(cx));
        const double resid = (cx - next * x).norm();
        if (std::abs(next - lambda) < 1e-12 * std::abs(next) &&
            resid <= 1e-8 * std::max(std::abs(next), 1e-300)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    out.value = lambda;
    out.vector = x;
    return true;
}

} // namespace

EigPair top_eigpair(const Eigen::MatrixXcd& c) {
    const int n = static_cast<int>(c.rows());
    if (c.cols() != n || n < 1)
        throw std::invalid_argument("top_eigpair: matrix must be square");

    EigPair out;
    out.vector = Eigen::VectorXcd::Zero(n);
    out.vector[0] = 1.0;

    const double scale = c.cwiseAbs().maxCoeff();
    if (scale == 0.0)
        return out; // zero matrix convention: (0, e_0)

    const Eigen::MatrixXcd ch = 0.5 * (c + c.adjoint());

    // Deterministic start e_0, falling back to the next basis vector when the
    // current one lies in the null space.
    bool found = false;
    for (int i = 0; i < n && !found; ++i)
        found = power_iterate(ch, i, scale, out);
    if (!found)
        return EigPair{0.0, Eigen::VectorXcd::Unit(n, 0)};

    // The largest diagonal entry lower-bounds the top eigenvalue of a
    // Hermitian PSD matrix. If the run stagnated on a minor eigenvector (the
    // start can be exactly orthogonal to the dominant one), restart there.
    int k_max = 0;
    ch.diagonal().real().maxCoeff(&k_max);
    if (out.value < ch(k_max, k_max).real() * (1.0 - 1e-12)) {
        EigPair rescued;
        if (power_iterate(ch, k_max, scale, rescued) && rescued.value > out.value)
            out = rescued;
    }
    return out;
}

} // namespace ctxcsi
