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

#include "ctxcsi/evalsel.hpp"

#include <cmath>
#include <doctest.h>

using namespace ctxcsi;

namespace {

Eigen::VectorXcd random_cvec(int n, Rng& rng) {
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = rng.cnormal();
    return v;
}

// 1-D quadrature for E[log2(1 + a*x)], x ~ Exp(1), Simpson on [0, 45]
double rank1_expected_rate(double a) {
    const int steps = 90000;
    const double hi = 45.0;
    const double h = hi / steps;
    double acc = 0.0;
    auto f = [a](double x) { return std::log2(1.0 + a * x) * std::exp(-x); };
    for (int i = 0; i < steps; i += 2)
        acc += f(i * h) + 4.0 * f((i + 1) * h) + f((i + 2) * h);
    return acc * h / 3.0;
}

} // namespace

TEST_CASE("eigen_precoder: rank-1 covariance recovers the channel direction") {
    Rng rng(1);
    const Eigen::VectorXcd h = random_cvec(6, rng);
    const Eigen::VectorXcd v = eigen_precoder(h * h.adjoint());
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(v.dot(h)) / h.norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("eigen_precoder: identity covariance keeps the start vector") {
    const Eigen::VectorXcd v = eigen_precoder(Eigen::MatrixXcd::Identity(4, 4));
    CHECK(std::abs(v[0]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rate: closed-form values and scale invariance") {
    Eigen::VectorXcd h(2);
    h << std::complex<double>(1.0, 0.0), std::complex<double>(0.0, 0.0);
    CHECK(rate(h, h, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15)); // log2(2)

    Eigen::VectorXcd v_perp(2);
    v_perp << std::complex<double>(0.0, 0.0), std::complex<double>(1.0, 0.0);
    CHECK(rate(h, v_perp, 1.0, 1.0) == 0.0);

    Rng rng(2);
    const Eigen::VectorXcd hr = random_cvec(5, rng);
    const Eigen::VectorXcd vr = random_cvec(5, rng);
    const std::complex<double> alpha = std::polar(3.0, 0.7);
    CHECK(rate(hr, vr, 2.0, 0.3) ==
          doctest::Approx(rate(hr, Eigen::VectorXcd(alpha * vr), 2.0, 0.3)).epsilon(1e-12));

    CHECK_THROWS_AS(rate(hr, Eigen::VectorXcd::Zero(5), 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("select_ap: argmax with deterministic tie-break") {
    auto diag_cov = [](double lam) {
        return Eigen::MatrixXcd(lam * Eigen::MatrixXcd::Identity(3, 3));
    };
    const std::vector<double> rho{1.0, 1.0};
    CHECK(select_ap({diag_cov(2.0), diag_cov(1.0)}, rho, 0.5) == 0);
    CHECK(select_ap({diag_cov(1.0), diag_cov(2.0)}, rho, 0.5) == 1);
    CHECK(select_ap({diag_cov(1.5), diag_cov(1.5)}, rho, 0.5) == 0); // tie to the lower index
}

TEST_CASE("select_ap: invariant to a common scaling of rho/sigma2") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<SpectralCovariance> stats(2);
        for (auto& sc : stats) {
            sc.spectrum = Eigen::VectorXd(8);
            for (int k = 0; k < 8; ++k)
                sc.spectrum[k] = rng.uniform(0.0, 2.0);
        }
        const std::vector<double> rho{1.3, 0.8};
        std::vector<double> rho_scaled{1.3 * 7.0, 0.8 * 7.0};
        const int a = select_ap(stats, rho, 0.25);
        CHECK(a == select_ap(stats, rho_scaled, 0.25));
        CHECK(a == select_ap(stats, rho, 0.25 / 7.0));
    }
}

TEST_CASE("expected_rate_mc: zero covariance gives zero rate") {
    Rng rng(4);
    const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(3, 3);
    CHECK(expected_rate_mc(zero, eigen_precoder(zero), 1.0, 1.0, 100, rng) == 0.0);
}

TEST_CASE("expected_rate_mc: Jensen bound holds for random covariances") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXcd b(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                b(i, j) = rng.cnormal();
        const Eigen::MatrixXcd c = b * b.adjoint();
        const double rho = 1.0, sigma2 = 0.2;
        const Eigen::VectorXcd v = eigen_precoder(c);
        const double bound = std::log2(1.0 + rho / sigma2 * top_eigpair(c).value);

        // batch means give a standard error estimate
        const int batches = 20, per = 500;
        double mean = 0.0, m2 = 0.0;
        for (int bt = 0; bt < batches; ++bt) {
            const double est = expected_rate_mc(c, v, rho, sigma2, per, rng);
            const double delta = est - mean;
            mean += delta / (bt + 1);
            m2 += delta * (est - mean);
        }
        const double se = std::sqrt(m2 / (batches - 1) / batches);
        CHECK(bound >= mean - 3.0 * se);
    }
}

TEST_CASE("expected_rate_mc: rank-1 closed form via quadrature") {
    Rng rng(6);
    Eigen::VectorXcd h = random_cvec(4, rng);
    h /= h.norm();
    const double lam = 2.5, rho = 1.0, sigma2 = 0.4;
    const Eigen::MatrixXcd c = lam * (h * h.adjoint());
    const Eigen::VectorXcd v = eigen_precoder(c);

    const double exact = rank1_expected_rate(rho * lam / sigma2);
    const int batches = 20, per = 500;
    double mean = 0.0, m2 = 0.0;
    for (int bt = 0; bt < batches; ++bt) {
        const double est = expected_rate_mc(c, v, rho, sigma2, per, rng);
        const double delta = est - mean;
        mean += delta / (bt + 1);
        m2 += delta * (est - mean);
    }
    const double se = std::sqrt(m2 / (batches - 1) / batches);
    CHECK(std::abs(mean - exact) <= 3.0 * se + 1e-3);
}

TEST_CASE("perfect_csi_reference: matched-filter argmax and value") {
    ChannelRecord rec;
    rec.clean.resize(2);
    rec.clean[0] = 2.0 * Eigen::VectorXcd::Ones(1); // ||h||^2 = 4
    rec.clean[1] = Eigen::VectorXcd::Ones(1);       // ||h||^2 = 1
    const std::vector<double> rho{1.0, 1.0};
    const PerfectCsiRef ref = perfect_csi_reference(rec, rho, 0.5);
    CHECK(ref.ap_index == 0);
    CHECK(ref.rate == doctest::Approx(std::log2(1.0 + 4.0 / 0.5)).epsilon(1e-12));

    rec.clean[1] = rec.clean[0];
    CHECK(perfect_csi_reference(rec, rho, 0.5).ap_index == 0); // tie to the lower index

    rec.clean[0].setZero();
    rec.clean[1].setZero();
    CHECK_THROWS_AS(perfect_csi_reference(rec, rho, 0.5), std::runtime_error);
}

TEST_CASE("perfect_csi_reference: no random probe beats it") {
    Rng rng(7);
    const std::vector<double> rho{1.0, 1.0};
    for (int trial = 0; trial < 200; ++trial) {
        ChannelRecord rec;
        rec.clean = {random_cvec(4, rng), random_cvec(4, rng)};
        const PerfectCsiRef ref = perfect_csi_reference(rec, rho, 0.3);
        for (int probe = 0; probe < 5; ++probe) {
            const int s = rng.uniform() < 0.5 ? 0 : 1;
            const Eigen::VectorXcd v = random_cvec(4, rng);
            CHECK(rate(rec.clean[s], v, rho[s], 0.3) <= ref.rate * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("normalized_rate: reference choice scores exactly one") {
    Rng rng(8);
    const std::vector<double> rho{1.0, 1.0};
    for (int trial = 0; trial < 50; ++trial) {
        ChannelRecord rec;
        rec.clean = {random_cvec(4, rng), random_cvec(4, rng)};
        const PerfectCsiRef ref = perfect_csi_reference(rec, rho, 0.3);
        CHECK(normalized_rate(ref.ap_index, rec.clean[ref.ap_index], rec, rho, 0.3) == 1.0);

        const Eigen::VectorXcd v = random_cvec(4, rng);
        const double nr = normalized_rate(0, v, rec, rho, 0.3);
        CHECK(nr > 0.0);
        CHECK(nr <= 1.0 + 1e-12);
    }

    // precoder orthogonal to the channel scores zero
    ChannelRecord rec;
    rec.clean.resize(2);
    rec.clean[0] = Eigen::VectorXcd::Zero(2);
    rec.clean[0][0] = 1.0;
    rec.clean[1] = Eigen::VectorXcd::Zero(2);
    rec.clean[1][1] = 0.5;
    Eigen::VectorXcd v_perp = Eigen::VectorXcd::Zero(2);
    v_perp[1] = 1.0;
    CHECK(normalized_rate(0, v_perp, rec, rho, 0.3) == 0.0);
}

TEST_CASE("build_testsets: defining properties of the three sets") {
    SceneConfig s = SceneConfig::defaults();
    for (auto& ap : s.aps)
        ap.num_antennas = 8;
    const T3Region region;
    const TestSets sets = build_testsets(s, 60, 10.0, 99, region);
    const std::vector<double> rho{1.0, 1.0};

    REQUIRE(sets.t1.records.size() == 60);
    REQUIRE(sets.t2.records.size() == 60);
    REQUIRE(sets.t3.records.size() == 60);
    CHECK(sets.t1.noise_variance == sets.t2.noise_variance);
    CHECK(sets.t1.noise_variance == sets.t3.noise_variance);

    // t2: removing the blocker flips the matched-filter optimum, every sample
    for (const auto& rec : sets.t2.records) {
        const int with_blocker = perfect_csi_reference(rec, rho, sets.t2.noise_variance).ap_index;
        ChannelRecord free;
        free.context = rec.context;
        free.clean = {synth_channel(s, rec.context, 0, false),
                      synth_channel(s, rec.context, 1, false)};
        const int without = perfect_csi_reference(free, rho, sets.t2.noise_variance).ap_index;
        CHECK(with_blocker != without);
    }

    // t3: UE inside the region, blocker outside it
    for (const auto& rec : sets.t3.records) {
        CHECK(rec.context.ue_xy.x() >= region.x_min);
        CHECK(rec.context.ue_xy.x() <= region.x_max);
        CHECK(rec.context.ue_xy.y() >= region.y_min);
        CHECK(rec.context.ue_xy.y() <= region.y_max);
        const bool blk_inside =
            rec.context.blocker_xy.x() >= region.x_min &&
            rec.context.blocker_xy.x() <= region.x_max &&
            rec.context.blocker_xy.y() >= region.y_min && rec.context.blocker_xy.y() <= region.y_max;
        CHECK(!blk_inside);
    }

    // deterministic rebuild
    const TestSets again = build_testsets(s, 60, 10.0, 99, region);
    CHECK(again.t2.records[17].context.ue_xy == sets.t2.records[17].context.ue_xy);
}

TEST_CASE("build_testsets: t1 sample mean near the room center") {
    SceneConfig s = SceneConfig::defaults();
    for (auto& ap : s.aps)
        ap.num_antennas = 4;
    const int count = 400;
    const TestSets sets = build_testsets(s, count, 10.0, 7);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& rec : sets.t1.records)
        mean += rec.context.ue_xy;
    mean /= static_cast<double>(count);
    const double se = 10.0 / std::sqrt(12.0) / std::sqrt(static_cast<double>(count));
    CHECK(std::abs(mean.x() - 5.0) <= 3.0 * se);
    CHECK(std::abs(mean.y() - 5.0) <= 3.0 * se);
}

TEST_CASE("build_testsets: sigma2 override is honored") {
    SceneConfig s = SceneConfig::defaults();
    for (auto& ap : s.aps)
        ap.num_antennas = 4;
    const TestSets sets = build_testsets(s, 10, 10.0, 1, T3Region{}, 1.25e-9);
    CHECK(sets.t1.noise_variance == 1.25e-9);
    CHECK(sets.t3.noise_variance == 1.25e-9);
}

TEST_CASE("ccdf_export: examples and monotonicity") {
    const auto single = ccdf_export({1.0, 1.0, 1.0});
    REQUIRE(single.size() == 1);
    CHECK(single[0].threshold == 1.0);
    CHECK(single[0].fraction == 1.0);

    const auto two = ccdf_export({0.5, 1.0});
    REQUIRE(two.size() == 2);
    CHECK(two[0].threshold == 0.5);
    CHECK(two[0].fraction == 1.0);
    CHECK(two[1].threshold == 1.0);
    CHECK(two[1].fraction == 0.5);

    Rng rng(9);
    std::vector<double> values(500);
    for (auto& v : values)
        v = rng.uniform();
    const auto rows = ccdf_export(values);
    CHECK(rows.front().fraction == 1.0);
    for (size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].threshold > rows[i - 1].threshold);
        CHECK(rows[i].fraction <= rows[i - 1].fraction);
    }
    CHECK_THROWS_AS(ccdf_export({}), std::invalid_argument);
}

TEST_CASE("random AP choice scores near one half with two APs") {
    SceneConfig s = SceneConfig::defaults();
    for (auto& ap : s.aps)
        ap.num_antennas = 4;
    const int count = 400;
    const TestSets sets = build_testsets(s, count, 10.0, 13);
    const std::vector<double> rho{1.0, 1.0};
    Rng rng(10);
    int hits = 0;
    for (const auto& rec : sets.t1.records) {
        const int pick = rng.uniform() < 0.5 ? 0 : 1;
        hits += pick == perfect_csi_reference(rec, rho, sets.t1.noise_variance).ap_index;
    }
    const double acc = static_cast<double>(hits) / count;
    const double se = 0.5 / std::sqrt(static_cast<double>(count));
    CHECK(std::abs(acc - 0.5) <= 3.0 * se);
}
