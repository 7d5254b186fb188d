#include "losses.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

namespace matinfo {

namespace {

void check_same_shape(const FeatureMatrix& z1, const FeatureMatrix& z2) {
  if (z1.dim() != z2.dim() || z1.batch() != z2.batch())
    raise(Errc::ShapeMismatch, "branch feature matrices differ in shape");
}

// Backward pass of per-row standardization with population variance.
// g is dL/dZbar; returns dL/dZ.
Eigen::MatrixXd standardize_rows_backward(const Eigen::MatrixXd& z,
                                          const Eigen::MatrixXd& zbar,
                                          const Eigen::MatrixXd& g) {
  const double b = static_cast<double>(z.cols());
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mean = z.row(i).mean();
    const double var =
        (z.row(i).array() - mean).matrix().squaredNorm() / b;
    const double sigma = std::sqrt(var);
    const double g_mean = g.row(i).mean();
    const double gx_mean = g.row(i).cwiseProduct(zbar.row(i)).mean();
    out.row(i) =
        (g.row(i).array() - g_mean - zbar.row(i).array() * gx_mean) / sigma;
  }
  return out;
}

}  // namespace

LossValue infonce(const FeatureMatrix& z1, const FeatureMatrix& z2,
                  double temperature, PairGrad* grad) {
  check_same_shape(z1, z2);
  if (!(temperature > 0.0))
    raise(Errc::BadTemperature, "temperature must be positive");

  const Eigen::Index b = z1.batch();
  const Eigen::MatrixXd s = (z1.data().transpose() * z2.data()) / temperature;

  // Row softmax with max subtraction; cross-entropy target is the diagonal.
  auto row_softmax_ce = [b](const Eigen::MatrixXd& logits,
                            Eigen::MatrixXd& probs) {
    double ce = 0.0;
    probs.resize(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
      const double m = logits.row(i).maxCoeff();
      const Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
      const double denom = e.sum();
      probs.row(i) = (e / denom).matrix().transpose();
      ce += std::log(denom) + m - logits(i, i);
    }
    return ce;
  };

  Eigen::MatrixXd p, q;
  const double ce1 = row_softmax_ce(s, p);
  const double ce2 = row_softmax_ce(s.transpose(), q);
  const double total = 0.5 * (ce1 + ce2);

  if (grad) {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(b, b);
    const Eigen::MatrixXd ds = 0.5 * ((p - eye) + (q - eye).transpose());
    grad->d_z1 = z2.data() * ds.transpose() / temperature;
    grad->d_z2 = z1.data() * ds / temperature;
  }

  LossValue loss;
  loss.terms["view1"] = 0.5 * ce1;
  loss.terms["view2"] = 0.5 * ce2;
  loss.total = total;
  return loss;
}

LossValue spectral_contrastive(const FeatureMatrix& z1, const FeatureMatrix& z2,
                               double lambda, PairGrad* grad) {
  check_same_shape(z1, z2);
  const Eigen::MatrixXd diff = z1.data() - z2.data();
  const double alignment = diff.squaredNorm();

  Eigen::MatrixXd m = z1.data().transpose() * z2.data();
  m.diagonal().setZero();
  const double uniformity = m.squaredNorm();

  if (grad) {
    grad->d_z1 = 2.0 * diff + lambda * 2.0 * (z2.data() * m.transpose());
    grad->d_z2 = -2.0 * diff + lambda * 2.0 * (z1.data() * m);
  }

  LossValue loss;
  loss.terms["alignment"] = alignment;
  loss.terms["uniformity"] = lambda * uniformity;
  loss.total = alignment + lambda * uniformity;
  return loss;
}

LossValue barlow_twins(const FeatureMatrix& z1, const FeatureMatrix& z2,
                       double lambda, PairGrad* grad, CrossCorrelation* cross) {
  check_same_shape(z1, z2);
  if (z1.batch() < 2)
    raise(Errc::ShapeMismatch, "cross-correlation needs a batch of at least 2");

  const double b = static_cast<double>(z1.batch());
  const Eigen::MatrixXd zbar1 = standardize_rows(z1.data());
  const Eigen::MatrixXd zbar2 = standardize_rows(z2.data());
  const Eigen::MatrixXd c = (zbar1 * zbar2.transpose()) / b;
  if (cross) cross->data = c;

  double diag_term = 0.0;
  double off_term = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const double di = 1.0 - c(i, i);
    diag_term += di * di;
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      if (j != i) off_term += c(i, j) * c(i, j);
  }

  if (grad) {
    Eigen::MatrixXd dc = 2.0 * lambda * c;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      dc(i, i) = -2.0 * (1.0 - c(i, i));
    const Eigen::MatrixXd d_zbar1 = (dc * zbar2) / b;
    const Eigen::MatrixXd d_zbar2 = (dc.transpose() * zbar1) / b;
    grad->d_z1 = standardize_rows_backward(z1.data(), zbar1, d_zbar1);
    grad->d_z2 = standardize_rows_backward(z2.data(), zbar2, d_zbar2);
  }

  LossValue loss;
  loss.terms["diagonal"] = diag_term;
  loss.terms["off_diagonal"] = lambda * off_term;
  loss.total = diag_term + lambda * off_term;
  return loss;
}

PatchedSample mask_sample(const Eigen::VectorXd& x, int n_patches, double ratio,
                          std::uint64_t seed) {
  if (n_patches < 2)
    raise(Errc::BadRatio, "masking needs at least 2 patches");
  if (x.size() % n_patches != 0) {
    std::ostringstream os;
    os << "vector length " << x.size() << " not divisible into " << n_patches
       << " patches";
    raise(Errc::IndivisibleLength, os.str());
  }
  const Eigen::Index p = x.size() / n_patches;
  PatchedSample s;
  s.patches.resize(p, n_patches);
  for (int j = 0; j < n_patches; ++j)
    s.patches.col(j) = x.segment(static_cast<Eigen::Index>(j) * p, p);
  s.mask = mask_sample_bits(n_patches, ratio, seed);
  return s;
}

Eigen::VectorXd masked_target(const PatchedSample& s) {
  const int p = s.patch_size();
  Eigen::VectorXd t(static_cast<Eigen::Index>(s.masked_count()) * p);
  Eigen::Index at = 0;
  for (int j = 0; j < s.patch_count(); ++j) {
    if (!s.mask.bits[static_cast<std::size_t>(j)]) {
      t.segment(at, p) = s.patches.col(j);
      at += p;
    }
  }
  return t;
}

LossValue mae_loss(const std::vector<Eigen::VectorXd>& predicted,
                   const std::vector<PatchedSample>& samples,
                   std::vector<Eigen::VectorXd>* grad) {
  if (predicted.size() != samples.size())
    raise(Errc::ShapeMismatch, "prediction/sample count mismatch");
  if (grad) grad->resize(predicted.size());

  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::VectorXd target = masked_target(samples[i]);
    if (predicted[i].size() != target.size()) {
      std::ostringstream os;
      os << "sample " << i << ": prediction size " << predicted[i].size()
         << " vs masked content size " << target.size();
      raise(Errc::ShapeMismatch, os.str());
    }
    const Eigen::VectorXd r = predicted[i] - target;
    total += r.squaredNorm();
    if (grad) (*grad)[i] = 2.0 * r;
  }

  LossValue loss;
  loss.terms["reconstruction"] = total;
  loss.total = total;
  return loss;
}

LossValue mmae_loss(const LossValue& recon, const FeatureMatrix& z,
                    double lambda, double mu,
                    Eigen::MatrixXd* regularizer_grad) {
  const double tcr_value = tcr(z, mu).value;
  if (regularizer_grad) {
    // lambda = 0 contributes exactly nothing, bitwise.
    if (lambda == 0.0)
      regularizer_grad->setZero(z.dim(), z.batch());
    else
      *regularizer_grad = -lambda * tcr_gradient(z, mu);
  }
  LossValue loss;
  loss.terms["reconstruction"] = recon.total;
  loss.terms["tcr_term"] = -lambda * tcr_value;
  loss.total = recon.total - lambda * tcr_value;
  return loss;
}

LossValue umae_loss(const LossValue& recon, const FeatureMatrix& z,
                    double lambda, double mu,
                    Eigen::MatrixXd* regularizer_grad) {
  if (!(mu > 0.0)) raise(Errc::BadMu, "TCR coefficient must be positive");
  Eigen::MatrixXd m = z.data().transpose() * z.data();
  m.diagonal().setZero();
  const double coeff = lambda / (2.0 * mu * mu);
  const double uniformity = m.squaredNorm();
  if (regularizer_grad) {
    if (lambda == 0.0)
      regularizer_grad->setZero(z.dim(), z.batch());
    else
      *regularizer_grad = coeff * 4.0 * (z.data() * m);
  }
  LossValue loss;
  loss.terms["reconstruction"] = recon.total;
  loss.terms["uniformity"] = coeff * uniformity;
  loss.total = recon.total + coeff * uniformity;
  return loss;
}

Eigen::MatrixXd tcr_gradient(const FeatureMatrix& z, double mu) {
  if (!(mu > 0.0)) raise(Errc::BadMu, "TCR coefficient must be positive");
  const Eigen::Index d = z.dim();
  const Eigen::MatrixXd m =
      mu * Eigen::MatrixXd::Identity(d, d) + z.data() * z.data().transpose();
  Eigen::LDLT<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    raise(Errc::EigFailure, "TCR gradient solve failed");
  return 2.0 * solver.solve(z.data());
}

std::vector<double> taylor_residual(const FeatureMatrix& z, double mu,
                                    const std::vector<double>& scales) {
  if (!(mu > 0.0)) raise(Errc::BadMu, "TCR coefficient must be positive");
  const EigResult eig = symmetric_eig(z.data().transpose() * z.data());

  std::vector<double> residuals;
  residuals.reserve(scales.size());
  for (double s : scales) {
    const double s2 = s * s;
    double r = 0.0;
    for (Eigen::Index i = 0; i < eig.spectrum.eigenvalues.size(); ++i) {
      const double x = s2 * std::max(eig.spectrum.eigenvalues[i], 0.0) / mu;
      r += std::log1p(x) - x + 0.5 * x * x;
    }
    residuals.push_back(std::abs(r));
  }
  return residuals;
}

}  // namespace matinfo
