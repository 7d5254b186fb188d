#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/measures.hpp"
#include "core/rng.hpp"
#include "core/verify.hpp"
#include "oracles.hpp"

using namespace matinfo;

namespace {

KernelMatrix corr2(double rho) {
  Eigen::MatrixXd k(2, 2);
  k << 1.0, rho, rho, 1.0;
  return psd_sanitize(k);
}

KernelMatrix eye_kernel(int n) {
  return psd_sanitize(Eigen::MatrixXd::Identity(n, n));
}

KernelMatrix ones_kernel(int n) {
  return psd_sanitize(Eigen::MatrixXd::Ones(n, n));
}

}  // namespace

TEST_CASE("renyi entropy closed forms") {
  CHECK(renyi_entropy(eye_kernel(5), 2.0).value ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
  // the rank-1 kernel's numerically-zero eigenvalues leave ~1e-8 noise at
  // alpha < 1
  for (double a : {0.5, 1.0, 2.0, 3.0})
    CHECK(std::abs(renyi_entropy(ones_kernel(6), a).value) <= 1e-7);
  // spectrum (1.5, 0.5)/2: H_2 = ln 2 - ln 1.25
  CHECK(renyi_entropy(corr2(0.5), 2.0).value ==
        doctest::Approx(0.47000362924573555).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(renyi_entropy(eye_kernel(2), -1.0),
                       doctest::Contains("BadAlpha"), Error);
}

TEST_CASE("von Neumann entropy closed forms") {
  CHECK(von_neumann_entropy(eye_kernel(7)).value ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));
  CHECK(von_neumann_entropy(ones_kernel(4)).value ==
        doctest::Approx(0.0).epsilon(1e-10));
  CHECK(von_neumann_entropy(corr2(0.5)).value ==
        doctest::Approx(0.5623351446188083).epsilon(1e-12));
  // alpha = 1 routes through the same branch
  CHECK(renyi_entropy(corr2(0.5), 1.0).value ==
        doctest::Approx(0.5623351446188083).epsilon(1e-12));
}

TEST_CASE("mutual information") {
  SUBCASE("identity pair attains ln d") {
    for (double a : {0.5, 1.0, 2.0})
      CHECK(mutual_information(eye_kernel(9), eye_kernel(9), a).value ==
            doctest::Approx(std::log(9.0)).epsilon(1e-12));
  }
  SUBCASE("all-ones pair has zero information") {
    for (double a : {0.5, 1.0, 2.0})
      CHECK(mutual_information(ones_kernel(5), ones_kernel(5), a).value ==
            doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("random pairs match an independent spectral recomputation") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const KernelMatrix k1 = random_kernel(8, rng);
      const KernelMatrix k2 = random_kernel(8, rng);
      for (double a : {0.5, 1.0, 2.0}) {
        const double got = mutual_information(k1, k2, a).value;
        const double want =
            oracle::naive_renyi_entropy(k1.data(), a) +
            oracle::naive_renyi_entropy(k2.data(), a) -
            oracle::naive_renyi_entropy(k1.data().cwiseProduct(k2.data()), a);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
        CHECK(got <= std::log(8.0) + 1e-7);
      }
    }
  }
  SUBCASE("size mismatch is an error") {
    CHECK_THROWS_WITH_AS(mutual_information(eye_kernel(2), eye_kernel(3), 1.0),
                         doctest::Contains("SizeMismatch"), Error);
  }
}

TEST_CASE("joint entropy") {
  Rng rng(22);
  SUBCASE("joint with the identity is maximal") {
    const KernelMatrix k = random_kernel(6, rng);
    CHECK(joint_entropy(k, eye_kernel(6), 1.0).value ==
          doctest::Approx(std::log(6.0)).epsilon(1e-10));
  }
  SUBCASE("all-ones pair") {
    CHECK(joint_entropy(ones_kernel(4), ones_kernel(4), 1.0).value ==
          doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("2x2 off-diagonals multiply") {
    const double a = 0.6, b = -0.3;
    const double got = joint_entropy(corr2(a), corr2(b), 1.0).value;
    const double want = oracle::naive_vn_entropy(corr2(a * b).data());
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("matrix KL divergence") {
  SUBCASE("KL(I, I) = 0") {
    CHECK(matrix_kl(eye_kernel(3), Eigen::MatrixXd::Identity(3, 3)).value ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("KL against the identity measures the entropy gap") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 2 + static_cast<int>(rng.uniform_int(7));
      const KernelMatrix k = random_kernel(d, rng);
      const double kl = matrix_kl(k, Eigen::MatrixXd::Identity(d, d)).value;
      const double want =
          d * (std::log(static_cast<double>(d)) - von_neumann_entropy(k).value);
      CHECK(kl == doctest::Approx(want).epsilon(1e-9));
      CHECK(kl >= -1e-8);
    }
  }
  SUBCASE("KL(I2, I2/2) = 2 ln 2") {
    CHECK(matrix_kl(eye_kernel(2), 0.5 * Eigen::MatrixXd::Identity(2, 2)).value ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("singular second argument is an error") {
    CHECK_THROWS_WITH_AS(matrix_kl(eye_kernel(2), Eigen::MatrixXd::Ones(2, 2)),
                         doctest::Contains("SingularSecondArgument"), Error);
  }
}

TEST_CASE("matrix JS divergence") {
  Rng rng(24);
  SUBCASE("JS(K, K) = 0") {
    const KernelMatrix k = random_kernel(5, rng);
    CHECK(matrix_js(k, k).value == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("agrees with a definition-level recomputation") {
    const KernelMatrix k1 = eye_kernel(2);
    const KernelMatrix k2 = ones_kernel(2);
    const Eigen::MatrixXd mid = 0.5 * (k1.data() + k2.data());
    const double want = oracle::naive_vn_entropy(mid) -
                        0.5 * (oracle::naive_vn_entropy(k1.data()) +
                               oracle::naive_vn_entropy(k2.data()));
    CHECK(matrix_js(k1, k2).value == doctest::Approx(want).epsilon(1e-10));
  }
  SUBCASE("bounded by ln 2 over a random sweep") {
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_int(7));
      const double js = matrix_js(random_kernel(n, rng), random_kernel(n, rng)).value;
      CHECK(js >= -1e-8);
      CHECK(js <= std::log(2.0) + 1e-8);
    }
  }
}

TEST_CASE("eigenspace JS divergence") {
  SUBCASE("identical kernels give zero") {
    Rng rng(25);
    const KernelMatrix k = random_kernel(6, rng);
    CHECK(eigen_js(k, k).value == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("I2 vs J2 in closed form") {
    // JS((1/2,1/2),(1,0)) = 0.5 KL(p||m) + 0.5 KL(q||m) with m = (3/4, 1/4)
    CHECK(eigen_js(eye_kernel(2), ones_kernel(2)).value ==
          doctest::Approx(0.21576155433883565).epsilon(1e-12));
  }
  SUBCASE("classical JS bound") {
    Rng rng(26);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_int(7));
      const double v = eigen_js(random_kernel(n, rng), random_kernel(n, rng)).value;
      CHECK(v >= -1e-12);
      CHECK(v <= std::log(2.0) + 1e-12);
    }
  }
}

TEST_CASE("total coding rate") {
  Rng rng(27);
  SUBCASE("identity kernel closed form") {
    for (double mu : {0.5, 1.0, 3.0})
      CHECK(tcr(eye_kernel(6), mu).value ==
            doctest::Approx(6.0 * std::log1p(mu)).epsilon(1e-12));
  }
  SUBCASE("zero features give d ln mu") {
    const FeatureMatrix z(Eigen::MatrixXd::Zero(4, 3));
    CHECK(tcr(z, 0.5).value == doctest::Approx(4.0 * std::log(0.5)).epsilon(1e-12));
  }
  SUBCASE("2x2 correlation with rho = 0.5 at mu = 1") {
    CHECK(tcr(corr2(0.5), 1.0).value ==
          doctest::Approx(std::log(2.5) + std::log(1.5)).epsilon(1e-12));
  }
  SUBCASE("feature overload matches the LU determinant route") {
    for (int trial = 0; trial < 25; ++trial) {
      Eigen::MatrixXd z(4, 6);
      for (Eigen::Index j = 0; j < z.cols(); ++j)
        for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = rng.normal();
      for (double mu : {0.5, 1.0, 3.0})
        CHECK(tcr(FeatureMatrix(z), mu).value ==
              doctest::Approx(oracle::naive_tcr(z, mu)).epsilon(1e-10));
    }
  }
  SUBCASE("nonpositive mu is an error") {
    CHECK_THROWS_WITH_AS(tcr(eye_kernel(2), 0.0), doctest::Contains("BadMu"),
                         Error);
  }
}

TEST_CASE("effective rank") {
  Rng rng(28);
  SUBCASE("identity has full effective rank") {
    CHECK(effective_rank(Eigen::MatrixXd::Identity(5, 5)).value ==
          doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("rank-1 matrix has effective rank 1") {
    Eigen::VectorXd u(3), v(3);
    u << 1, -2, 0.5;
    v << 3, 1, 1;
    CHECK(effective_rank(u * v.transpose()).value ==
          doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("erank(K) = exp(H1(K)) on random kernels") {
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_int(15));
      const KernelMatrix k = random_kernel(n, rng);
      CHECK(std::abs(effective_rank(k.data()).value -
                     std::exp(von_neumann_entropy(k).value)) <= 1e-8);
    }
  }
  SUBCASE("zero matrix is an error") {
    CHECK_THROWS_WITH_AS(effective_rank(Eigen::MatrixXd::Zero(3, 3)),
                         doctest::Contains("AllZeroMatrix"), Error);
  }
}

TEST_CASE("log-det duality") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform_int(7));
    const int b = 2 + static_cast<int>(rng.uniform_int(11));
    Eigen::MatrixXd z(d, b);
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = rng.normal();
    const FeatureMatrix f(z);
    for (double mu : {0.5, 1.0, 3.0})
      CHECK(std::abs(log_det_primal(f, mu) - log_det_dual(f, mu)) <= 1e-8);
  }
}

TEST_CASE("measure bounds on random kernels") {
  Rng rng(30);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(15));
    const KernelMatrix k = random_kernel(n, rng);
    const double ln_n = std::log(static_cast<double>(n));
    for (double a : {0.5, 1.0, 2.0}) {
      const double h = renyi_entropy(k, a).value;
      CHECK(h >= -1e-8);
      CHECK(h <= ln_n + 1e-8);
    }
    const double er = effective_rank(k.data()).value;
    CHECK(er >= 1.0 - 1e-8);
    CHECK(er <= n + 1e-8);
  }
}

TEST_CASE("joint entropy bounds at alpha 1 and 2") {
  // Lower bound (majorization) holds for every alpha. The upper bound is
  // subadditivity, which only holds at alpha = 1: complementary block
  // kernels whose Hadamard product is the identity break it at alpha = 2.
  const int m = 8, n = 16;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n);
  a.topLeftCorner(m, m).setOnes();
  b.bottomRightCorner(m, m).setOnes();
  const KernelMatrix ka = psd_sanitize(a);
  const KernelMatrix kb = psd_sanitize(b);

  SUBCASE("alpha 2 subadditivity fails on the block pair") {
    const double sum =
        renyi_entropy(ka, 2.0).value + renyi_entropy(kb, 2.0).value;
    const double joint = joint_entropy(ka, kb, 2.0).value;
    CHECK(joint == doctest::Approx(std::log(16.0)).epsilon(1e-9));
    CHECK(joint - sum > 0.2);  // decisively violated, not noise
  }
  SUBCASE("alpha 1 subadditivity holds on the same pair and random kernels") {
    CHECK(joint_entropy(ka, kb, 1.0).value <=
          renyi_entropy(ka, 1.0).value + renyi_entropy(kb, 1.0).value + 1e-9);
    Rng rng(32);
    for (int trial = 0; trial < 300; ++trial) {
      const int size = 2 + static_cast<int>(rng.uniform_int(15));
      const KernelMatrix k1 = random_kernel(size, rng);
      const KernelMatrix k2 = random_kernel(size, rng);
      const double h1 = von_neumann_entropy(k1).value;
      const double h2 = von_neumann_entropy(k2).value;
      const double hj = joint_entropy(k1, k2, 1.0).value;
      CHECK(hj <= h1 + h2 + 1e-7);
      for (double alpha : {0.5, 1.0, 2.0})
        CHECK(joint_entropy(k1, k2, alpha).value >=
              std::max(renyi_entropy(k1, alpha).value,
                       renyi_entropy(k2, alpha).value) -
                  1e-7);
    }
  }
}

TEST_CASE("eigen distribution is a probability vector") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(15));
    const ProbVector p = eigen_distribution(random_kernel(n, rng));
    CHECK(std::abs(p.weights.sum() - 1.0) <= 1e-8);
    CHECK(p.weights.minCoeff() >= 0.0);
  }
}
