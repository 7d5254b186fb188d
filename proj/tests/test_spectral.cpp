#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/rng.hpp"
#include "core/spectral.hpp"
#include "core/verify.hpp"

using namespace matinfo;

namespace {

Eigen::MatrixXd corr2(double rho) {
  Eigen::MatrixXd k(2, 2);
  k << 1.0, rho, rho, 1.0;
  return k;
}

Eigen::MatrixXd random_symmetric(int n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = rng.normal();
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_CASE("symmetric_eig on closed-form matrices") {
  SUBCASE("identity") {
    const EigResult r = symmetric_eig(Eigen::MatrixXd::Identity(3, 3));
    for (int i = 0; i < 3; ++i)
      CHECK(r.spectrum.eigenvalues[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("rank-1 all-ones") {
    const EigResult r = symmetric_eig(Eigen::MatrixXd::Ones(2, 2));
    CHECK(r.spectrum.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.spectrum.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("2x2 correlation: eigenvalues 1 +- rho") {
    const EigResult r = symmetric_eig(corr2(0.5));
    CHECK(r.spectrum.eigenvalues[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.spectrum.eigenvalues[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("rejects asymmetric input") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 0.5, 0.2, 1.0;
    CHECK_THROWS_AS(symmetric_eig(m), Error);
  }
}

TEST_CASE("eigendecomposition round-trip on random symmetric matrices") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(63));
    const Eigen::MatrixXd m = random_symmetric(n, rng);
    const EigResult r = symmetric_eig(m);
    const Eigen::MatrixXd rebuilt =
        r.vectors * r.spectrum.eigenvalues.asDiagonal() * r.vectors.transpose();
    const double scale = m.cwiseAbs().maxCoeff();
    CHECK((rebuilt - m).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    const Eigen::MatrixXd vtv = r.vectors.transpose() * r.vectors;
    CHECK((vtv - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-8);
    for (Eigen::Index i = 1; i < r.spectrum.eigenvalues.size(); ++i)
      CHECK(r.spectrum.eigenvalues[i] <= r.spectrum.eigenvalues[i - 1]);
  }
}

TEST_CASE("psd_sanitize") {
  SUBCASE("identity passes through") {
    const KernelMatrix k = psd_sanitize(Eigen::MatrixXd::Identity(4, 4));
    CHECK(k.data() == Eigen::MatrixXd::Identity(4, 4));
    CHECK(k.spectrum().clamped_count == 0);
  }
  SUBCASE("near-unit diagonal is reset to exactly 1") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
    m(1, 1) = 1.0 + 5e-7;
    const KernelMatrix k = psd_sanitize(m);
    CHECK(k.data()(1, 1) == 1.0);
  }
  SUBCASE("bad diagonal is an error") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
    m(0, 0) = 1.1;
    CHECK_THROWS_WITH_AS(psd_sanitize(m), doctest::Contains("BadDiagonal"), Error);
  }
  SUBCASE("indefinite matrix is rejected") {
    CHECK_THROWS_WITH_AS(psd_sanitize(corr2(1.1)), doctest::Contains("NotPSD"),
                         Error);
  }
  SUBCASE("singular kernels clamp noise to zero") {
    const KernelMatrix k = psd_sanitize(Eigen::MatrixXd::Ones(3, 3));
    for (Eigen::Index i = 0; i < 3; ++i)
      CHECK(k.spectrum().eigenvalues[i] >= 0.0);
    CHECK(k.spectrum().eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("kernel trace equals matrix size") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(15));
    const KernelMatrix k = random_kernel(n, rng);
    CHECK(std::abs(k.spectrum().eigenvalues.sum() - n) <= 1e-6 * n);
    CHECK(std::abs(k.data().trace() - n) <= 1e-6 * n);
  }
}

TEST_CASE("covariance_kernel") {
  SUBCASE("hand-computed 2x4 sign pattern gives the identity") {
    Eigen::MatrixXd z(2, 4);
    z << 1, -1, 1, -1, 1, 1, -1, -1;
    const KernelMatrix k = covariance_kernel(FeatureMatrix(z));
    CHECK((k.data() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <=
          1e-12);
  }
  SUBCASE("single dimension gives [[1]]") {
    Eigen::MatrixXd z(1, 3);
    z << 0.3, -2.0, 5.5;
    const KernelMatrix k = covariance_kernel(FeatureMatrix(z));
    CHECK(k.data()(0, 0) == 1.0);
  }
  SUBCASE("constant dimension is an error") {
    Eigen::MatrixXd z(2, 3);
    z << 1, 1, 1, 0.5, -0.5, 2.0;
    CHECK_THROWS_WITH_AS(covariance_kernel(FeatureMatrix(z)),
                         doctest::Contains("ZeroVariance"), Error);
  }
}

TEST_CASE("gram_kernel") {
  SUBCASE("orthonormal columns give the identity") {
    const KernelMatrix k =
        gram_kernel(FeatureMatrix(Eigen::MatrixXd::Identity(4, 4)));
    CHECK((k.data() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <=
          1e-12);
  }
  SUBCASE("duplicated column pair shows up as off-diagonal 1") {
    Eigen::MatrixXd z(3, 2);
    z.col(0) << 1, 2, 3;
    z.col(1) << 2, 4, 6;
    const KernelMatrix k = gram_kernel(FeatureMatrix(z));
    CHECK(k.data()(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two columns at 60 degrees") {
    Eigen::MatrixXd z(2, 2);
    z.col(0) << 1, 0;
    z.col(1) << std::cos(M_PI / 3), std::sin(M_PI / 3);
    const KernelMatrix k = gram_kernel(FeatureMatrix(z));
    CHECK(k.data()(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("zero column is an error") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 2);
    z(0, 0) = 1.0;
    CHECK_THROWS_WITH_AS(gram_kernel(FeatureMatrix(z)),
                         doctest::Contains("ZeroColumn"), Error);
  }
}

TEST_CASE("hadamard") {
  Rng rng(3);
  SUBCASE("K o I = I for unit-diagonal kernels") {
    const KernelMatrix k = random_kernel(5, rng);
    const KernelMatrix eye = psd_sanitize(Eigen::MatrixXd::Identity(5, 5));
    const KernelMatrix h = hadamard(k, eye);
    CHECK((h.data() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <=
          1e-12);
  }
  SUBCASE("J o J = J") {
    const KernelMatrix j = psd_sanitize(Eigen::MatrixXd::Ones(3, 3));
    const KernelMatrix h = hadamard(j, j);
    CHECK((h.data() - Eigen::MatrixXd::Ones(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("entrywise on 2x2 correlations") {
    const KernelMatrix h =
        hadamard(psd_sanitize(corr2(0.8)), psd_sanitize(corr2(-0.5)));
    CHECK(h.data()(0, 1) == doctest::Approx(-0.4).epsilon(1e-12));
  }
  SUBCASE("size mismatch is an error") {
    const KernelMatrix a = psd_sanitize(Eigen::MatrixXd::Identity(2, 2));
    const KernelMatrix b = psd_sanitize(Eigen::MatrixXd::Identity(3, 3));
    CHECK_THROWS_WITH_AS(hadamard(a, b), doctest::Contains("SizeMismatch"), Error);
  }
  SUBCASE("product of random kernels stays PSD (Schur product theorem)") {
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_int(15));
      const KernelMatrix h =
          hadamard(random_kernel(n, rng), random_kernel(n, rng));
      const Eigen::VectorXd& ev = h.spectrum().eigenvalues;
      CHECK(ev[ev.size() - 1] >= -1e-8 * ev[0]);
    }
  }
}

TEST_CASE("matrix_power") {
  Rng rng(5);
  SUBCASE("identity is a fixed point") {
    const KernelMatrix eye = psd_sanitize(Eigen::MatrixXd::Identity(3, 3));
    CHECK((matrix_power(eye, 0.7) - Eigen::MatrixXd::Identity(3, 3))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
  SUBCASE("alpha = 1 reproduces the kernel") {
    const KernelMatrix k = random_kernel(6, rng);
    CHECK((matrix_power(k, 1.0) - k.data()).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("all-ones kernel: J^alpha = n^(alpha-1) J") {
    const int n = 4;
    const KernelMatrix j = psd_sanitize(Eigen::MatrixXd::Ones(n, n));
    const double alpha = 1.7;
    const Eigen::MatrixXd expect =
        std::pow(static_cast<double>(n), alpha - 1.0) * Eigen::MatrixXd::Ones(n, n);
    CHECK((matrix_power(j, alpha) - expect).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("power composition (K^a)^b = K^(ab)") {
    for (double a : {0.5, 1.0, 2.0}) {
      for (double b : {0.5, 1.0, 2.0}) {
        const KernelMatrix k = random_kernel(8, rng);
        const Eigen::MatrixXd lhs = matrix_power(matrix_power(k, a), b);
        CHECK((lhs - matrix_power(k, a * b)).cwiseAbs().maxCoeff() <= 1e-7);
      }
    }
  }
  SUBCASE("nonpositive alpha is an error") {
    const KernelMatrix k = psd_sanitize(Eigen::MatrixXd::Identity(2, 2));
    CHECK_THROWS_WITH_AS(matrix_power(k, 0.0), doctest::Contains("BadAlpha"),
                         Error);
  }
}

TEST_CASE("matrix_log") {
  SUBCASE("log of the identity is zero") {
    CHECK(matrix_log(Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <=
          1e-14);
  }
  SUBCASE("log of c I") {
    const Eigen::MatrixXd m = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd expect =
        std::log(0.5) * Eigen::MatrixXd::Identity(2, 2);
    CHECK((matrix_log(m) - expect).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("log of 2x2 correlation has eigenvalues ln 1.5, ln 0.5") {
    const EigResult r = symmetric_eig(matrix_log(corr2(0.5)));
    CHECK(r.spectrum.eigenvalues[0] == doctest::Approx(std::log(1.5)).epsilon(1e-10));
    CHECK(r.spectrum.eigenvalues[1] == doctest::Approx(std::log(0.5)).epsilon(1e-10));
  }
  SUBCASE("singular input is an error") {
    CHECK_THROWS_WITH_AS(matrix_log(Eigen::MatrixXd::Ones(2, 2)),
                         doctest::Contains("SingularLog"), Error);
  }
}

TEST_CASE("mask_sample_bits") {
  SUBCASE("default mask ratio leaves a quarter visible") {
    const MaskVector m = mask_sample_bits(16, 0.75, 42);
    CHECK(m.visible_count == 4);
    int ones = 0;
    for (auto b : m.bits) ones += b;
    CHECK(ones == 4);
  }
  SUBCASE("tiny ratio clamps so the target view stays nonempty") {
    const MaskVector m = mask_sample_bits(4, 0.001, 42);
    CHECK(m.visible_count == 3);
  }
  SUBCASE("deterministic under seed") {
    const MaskVector a = mask_sample_bits(16, 0.5, 9);
    const MaskVector b = mask_sample_bits(16, 0.5, 9);
    CHECK(a.bits == b.bits);
  }
  SUBCASE("ratio outside (0,1) is an error") {
    CHECK_THROWS_WITH_AS(mask_sample_bits(8, 1.0, 0),
                         doctest::Contains("BadRatio"), Error);
  }
}

TEST_CASE("feature matrix validation") {
  SUBCASE("unit-column flag enforces norms") {
    Eigen::MatrixXd z(2, 1);
    z << 0.6, 0.8;
    CHECK_NOTHROW((void)FeatureMatrix(z, true));
    z(0, 0) = 0.7;
    CHECK_THROWS_AS((void)FeatureMatrix(z, true), Error);
  }
  SUBCASE("non-finite entries rejected") {
    Eigen::MatrixXd z(1, 1);
    z << std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)FeatureMatrix(z), Error);
  }
}
