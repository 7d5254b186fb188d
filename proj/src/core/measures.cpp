#include "measures.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>

namespace matinfo {

const char* measure_name_str(MeasureName n) {
  switch (n) {
    case MeasureName::RenyiEntropy: return "renyi_entropy";
    case MeasureName::VonNeumannEntropy: return "von_neumann_entropy";
    case MeasureName::MutualInfo: return "mutual_information";
    case MeasureName::JointEntropy: return "joint_entropy";
    case MeasureName::MatrixKL: return "matrix_kl";
    case MeasureName::MatrixJS: return "matrix_js";
    case MeasureName::EigenJS: return "eigen_js";
    case MeasureName::Tcr: return "tcr";
    case MeasureName::EffectiveRank: return "effective_rank";
  }
  return "unknown";
}

namespace {

double xlnx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double shannon_entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) h -= xlnx(p[i]);
  return h;
}

// Entropy of a sanitized kernel spectrum at order alpha.
double spectrum_entropy(const Spectrum& s, double alpha) {
  const double n = static_cast<double>(s.eigenvalues.size());
  if (alpha == 1.0) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
      h -= xlnx(s.eigenvalues[i] / n);
    return h;
  }
  double tr = 0.0;
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    const double v = s.eigenvalues[i] / n;
    tr += v == 0.0 ? 0.0 : std::pow(v, alpha);
  }
  return std::log(tr) / (1.0 - alpha);
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0)) raise(Errc::BadAlpha, "entropy order must be positive");
}

void check_same_size(const KernelMatrix& k1, const KernelMatrix& k2) {
  if (k1.size() != k2.size())
    raise(Errc::SizeMismatch, "kernels differ in size");
}

}  // namespace

ProbVector eigen_distribution(const KernelMatrix& k) {
  ProbVector p;
  p.weights = k.spectrum().eigenvalues / static_cast<double>(k.size());
  return p;
}

MeasureValue renyi_entropy(const KernelMatrix& k, double alpha) {
  check_alpha(alpha);
  if (alpha == 1.0) return von_neumann_entropy(k);
  return {MeasureName::RenyiEntropy, alpha, std::nullopt,
          spectrum_entropy(k.spectrum(), alpha)};
}

MeasureValue von_neumann_entropy(const KernelMatrix& k) {
  return {MeasureName::VonNeumannEntropy, 1.0, std::nullopt,
          spectrum_entropy(k.spectrum(), 1.0)};
}

MeasureValue mutual_information(const KernelMatrix& k1, const KernelMatrix& k2,
                                double alpha) {
  check_alpha(alpha);
  check_same_size(k1, k2);
  const KernelMatrix joint = hadamard(k1, k2);
  const double v = spectrum_entropy(k1.spectrum(), alpha) +
                   spectrum_entropy(k2.spectrum(), alpha) -
                   spectrum_entropy(joint.spectrum(), alpha);
  return {MeasureName::MutualInfo, alpha, std::nullopt, v};
}

MeasureValue joint_entropy(const KernelMatrix& k1, const KernelMatrix& k2,
                           double alpha) {
  check_alpha(alpha);
  check_same_size(k1, k2);
  const KernelMatrix joint = hadamard(k1, k2);
  return {MeasureName::JointEntropy, alpha, std::nullopt,
          spectrum_entropy(joint.spectrum(), alpha)};
}

MeasureValue matrix_kl(const KernelMatrix& k1, const Eigen::MatrixXd& k2) {
  if (k1.size() != k2.rows() || k2.rows() != k2.cols())
    raise(Errc::SizeMismatch, "KL operands differ in size");
  // tr[K1 log K1] through the functional calculus: sum lambda ln lambda.
  double tr_self = 0.0;
  for (Eigen::Index i = 0; i < k1.spectrum().eigenvalues.size(); ++i)
    tr_self += xlnx(k1.spectrum().eigenvalues[i]);

  Eigen::MatrixXd log_k2;
  try {
    log_k2 = matrix_log(k2);
  } catch (const Error& e) {
    if (e.code() == Errc::SingularLog)
      raise(Errc::SingularSecondArgument,
            "second argument of KL must be strictly positive definite");
    throw;
  }
  const double tr_cross = k1.data().cwiseProduct(log_k2).sum();
  return {MeasureName::MatrixKL, std::nullopt, std::nullopt,
          tr_self - tr_cross};
}

MeasureValue matrix_js(const KernelMatrix& k1, const KernelMatrix& k2) {
  check_same_size(k1, k2);
  const KernelMatrix mid =
      psd_sanitize(0.5 * (k1.data() + k2.data()), k1.kind());
  const double v = spectrum_entropy(mid.spectrum(), 1.0) -
                   0.5 * (spectrum_entropy(k1.spectrum(), 1.0) +
                          spectrum_entropy(k2.spectrum(), 1.0));
  return {MeasureName::MatrixJS, std::nullopt, std::nullopt, v};
}

MeasureValue eigen_js(const KernelMatrix& k1, const KernelMatrix& k2) {
  check_same_size(k1, k2);
  const Eigen::VectorXd p = eigen_distribution(k1).weights;
  const Eigen::VectorXd q = eigen_distribution(k2).weights;
  const Eigen::VectorXd m = 0.5 * (p + q);
  // 0.5 KL(p||m) + 0.5 KL(q||m); p_i > 0 implies m_i > 0.
  double v = shannon_entropy(m) - 0.5 * (shannon_entropy(p) + shannon_entropy(q));
  return {MeasureName::EigenJS, std::nullopt, std::nullopt, v};
}

namespace {

double tcr_of_spectrum(const Spectrum& s, double mu) {
  if (!(mu > 0.0)) raise(Errc::BadMu, "TCR coefficient must be positive");
  double v = 0.0;
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
    v += std::log(mu + std::max(s.eigenvalues[i], 0.0));
  return v;
}

}  // namespace

MeasureValue tcr(const KernelMatrix& k, double mu) {
  return {MeasureName::Tcr, std::nullopt, mu, tcr_of_spectrum(k.spectrum(), mu)};
}

MeasureValue tcr(const FeatureMatrix& z, double mu) {
  if (!(mu > 0.0)) raise(Errc::BadMu, "TCR coefficient must be positive");
  const Eigen::MatrixXd zzT = z.data() * z.data().transpose();
  EigResult eig = symmetric_eig(zzT);
  double v = 0.0;
  for (Eigen::Index i = 0; i < eig.spectrum.eigenvalues.size(); ++i)
    v += std::log(mu + std::max(eig.spectrum.eigenvalues[i], 0.0));
  return {MeasureName::Tcr, std::nullopt, mu, v};
}

MeasureValue effective_rank(const Eigen::MatrixXd& a) {
  if (!a.allFinite())
    raise(Errc::ShapeMismatch, "effective rank input has non-finite entries");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double total = sigma.sum();
  if (!(total > 0.0))
    raise(Errc::AllZeroMatrix, "effective rank of the zero matrix is undefined");
  return {MeasureName::EffectiveRank, std::nullopt, std::nullopt,
          std::exp(shannon_entropy(sigma / total))};
}

double log_det_primal(const FeatureMatrix& z, double mu) {
  if (!(mu > 0.0)) raise(Errc::BadMu, "duality check requires mu > 0");
  const Eigen::Index d = z.dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) +
                      (z.data() * z.data().transpose()) / mu;
  return 2.0 * Eigen::LLT<Eigen::MatrixXd>(m)
                   .matrixL()
                   .toDenseMatrix()
                   .diagonal()
                   .array()
                   .log()
                   .sum();
}

double log_det_dual(const FeatureMatrix& z, double mu) {
  if (!(mu > 0.0)) raise(Errc::BadMu, "duality check requires mu > 0");
  const Eigen::Index b = z.batch();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(b, b) +
                      (z.data().transpose() * z.data()) / mu;
  return 2.0 * Eigen::LLT<Eigen::MatrixXd>(m)
                   .matrixL()
                   .toDenseMatrix()
                   .diagonal()
                   .array()
                   .log()
                   .sum();
}

}  // namespace matinfo
