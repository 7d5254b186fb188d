#include "spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rng.hpp"

namespace matinfo {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::BadAlpha: return "BadAlpha";
    case Errc::BadMu: return "BadMu";
    case Errc::BadTemperature: return "BadTemperature";
    case Errc::BadRatio: return "BadRatio";
    case Errc::BadConfig: return "ConfigError";
    case Errc::ParseError: return "ParseError";
    case Errc::NonSymmetric: return "NonSymmetric";
    case Errc::BadDiagonal: return "BadDiagonal";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::ZeroColumn: return "ZeroColumn";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::IndivisibleLength: return "IndivisibleLength";
    case Errc::AllZeroMatrix: return "AllZeroMatrix";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::EmptyDirectory: return "EmptyDirectory";
    case Errc::MixedShapes: return "MixedShapes";
    case Errc::EigFailure: return "EigFailure";
    case Errc::NotPsd: return "NotPSD";
    case Errc::SingularLog: return "SingularLog";
    case Errc::SingularSecondArgument: return "SingularSecondArgument";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::VerificationFailed: return "VerificationFailed";
  }
  return "Unknown";
}

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd data, bool unit_columns)
    : data_(std::move(data)), unit_columns_(unit_columns) {
  if (data_.rows() < 1 || data_.cols() < 1)
    raise(Errc::ShapeMismatch, "feature matrix must be at least 1x1");
  if (!data_.allFinite())
    raise(Errc::ParseError, "feature matrix has non-finite entries");
  if (unit_columns_) {
    for (Eigen::Index j = 0; j < data_.cols(); ++j) {
      const double norm = data_.col(j).norm();
      if (std::abs(norm - 1.0) > tol::kUnitColumn) {
        std::ostringstream os;
        os << "column " << j << " has norm " << norm;
        raise(Errc::ShapeMismatch, os.str());
      }
    }
  }
}

namespace {

double max_asymmetry(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace

EigResult symmetric_eig(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    raise(Errc::NonSymmetric, "matrix is not square");
  if (!m.allFinite())
    raise(Errc::NonSymmetric, "matrix has non-finite entries");
  if (m.size() > 0 && max_asymmetry(m) > tol::kEigAsymmetry)
    raise(Errc::NonSymmetric, "asymmetry exceeds tolerance");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    raise(Errc::EigFailure, "eigensolver did not converge");

  const Eigen::Index n = m.rows();
  EigResult r;
  r.spectrum.eigenvalues.resize(n);
  r.vectors.resize(n, n);
  // Eigen returns ascending order; flip to descending.
  for (Eigen::Index i = 0; i < n; ++i) {
    r.spectrum.eigenvalues[i] = solver.eigenvalues()[n - 1 - i];
    r.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  r.spectrum.trace = m.trace();
  return r;
}

KernelMatrix psd_sanitize(const Eigen::MatrixXd& m, KernelKind kind) {
  if (m.rows() != m.cols())
    raise(Errc::NonSymmetric, "matrix is not square");
  if (!m.allFinite())
    raise(Errc::NonSymmetric, "matrix has non-finite entries");
  if (max_asymmetry(m) > tol::kAsymmetry)
    raise(Errc::NonSymmetric, "asymmetry exceeds kernel tolerance");

  Eigen::MatrixXd k = 0.5 * (m + m.transpose());
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    const double d = k(i, i);
    if (std::abs(d - 1.0) > tol::kDiagonal) {
      std::ostringstream os;
      os << "diagonal entry " << i << " = " << d;
      raise(Errc::BadDiagonal, os.str());
    }
    k(i, i) = 1.0;
  }

  EigResult eig = symmetric_eig(k);
  Spectrum s = eig.spectrum;
  const double lambda_max = std::max(s.eigenvalues[0], 0.0);
  const double clamp_floor = -tol::kEigClampRel * lambda_max;
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    const double v = s.eigenvalues[i];
    if (v < clamp_floor) {
      std::ostringstream os;
      os << "eigenvalue " << v << " below " << clamp_floor;
      raise(Errc::NotPsd, os.str());
    }
    if (v < 0.0) {
      s.eigenvalues[i] = 0.0;
      ++s.clamped_count;
    }
  }
  s.trace = k.trace();
  return KernelMatrix(std::move(k), std::move(s), kind);
}

Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& z) {
  const Eigen::Index b = z.cols();
  Eigen::MatrixXd out(z.rows(), b);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mean = z.row(i).mean();
    const Eigen::RowVectorXd centered = z.row(i).array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(b);
    const double scale = std::max(1.0, std::abs(mean));
    if (std::sqrt(var) <= 1e-12 * scale) {
      std::ostringstream os;
      os << "feature dimension " << i << " is constant across the batch";
      raise(Errc::ZeroVariance, os.str());
    }
    out.row(i) = centered / std::sqrt(var);
  }
  return out;
}

KernelMatrix covariance_kernel(const FeatureMatrix& z) {
  if (z.batch() < 2)
    raise(Errc::ShapeMismatch, "covariance kernel needs a batch of at least 2");
  const Eigen::MatrixXd zbar = standardize_rows(z.data());
  Eigen::MatrixXd k =
      (zbar * zbar.transpose()) / static_cast<double>(z.batch());
  return psd_sanitize(k, KernelKind::Covariance);
}

KernelMatrix gram_kernel(const FeatureMatrix& z) {
  Eigen::MatrixXd zn = z.data();
  for (Eigen::Index j = 0; j < zn.cols(); ++j) {
    const double norm = zn.col(j).norm();
    if (norm < 1e-150) {
      std::ostringstream os;
      os << "column " << j << " has zero norm";
      raise(Errc::ZeroColumn, os.str());
    }
    zn.col(j) /= norm;
  }
  return psd_sanitize(zn.transpose() * zn, KernelKind::Gram);
}

KernelMatrix hadamard(const KernelMatrix& k1, const KernelMatrix& k2) {
  if (k1.size() != k2.size())
    raise(Errc::SizeMismatch, "hadamard operands differ in size");
  return psd_sanitize(k1.data().cwiseProduct(k2.data()), k1.kind());
}

Eigen::MatrixXd matrix_power(const KernelMatrix& k, double alpha) {
  return matrix_power(k.data(), alpha);
}

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& m, double alpha) {
  if (!(alpha > 0.0))
    raise(Errc::BadAlpha, "matrix power requires alpha > 0");
  EigResult eig = symmetric_eig(m);
  Eigen::VectorXd powered = eig.spectrum.eigenvalues;
  for (Eigen::Index i = 0; i < powered.size(); ++i) {
    const double v = std::max(powered[i], 0.0);  // sanitized noise only
    powered[i] = v == 0.0 ? 0.0 : std::pow(v, alpha);
  }
  return eig.vectors * powered.asDiagonal() * eig.vectors.transpose();
}

Eigen::MatrixXd matrix_log(const Eigen::MatrixXd& m) {
  EigResult eig = symmetric_eig(m);
  const double lambda_max = eig.spectrum.eigenvalues[0];
  if (!(lambda_max > 0.0))
    raise(Errc::SingularLog, "matrix has no positive eigenvalue");
  const double floor = tol::kLogFloorRel * lambda_max;
  Eigen::VectorXd logged = eig.spectrum.eigenvalues;
  for (Eigen::Index i = 0; i < logged.size(); ++i) {
    if (!(logged[i] > floor)) {
      std::ostringstream os;
      os << "eigenvalue " << logged[i] << " below " << floor;
      raise(Errc::SingularLog, os.str());
    }
    logged[i] = std::log(logged[i]);
  }
  return eig.vectors * logged.asDiagonal() * eig.vectors.transpose();
}

int numerical_rank(const Spectrum& s) {
  if (s.eigenvalues.size() == 0) return 0;
  const double threshold = tol::kRankRel * std::max(s.eigenvalues[0], 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
    if (s.eigenvalues[i] > threshold) ++rank;
  return rank;
}

MaskVector mask_sample_bits(int n_patches, double ratio, std::uint64_t seed) {
  if (n_patches < 2)
    raise(Errc::BadRatio, "masking needs at least 2 patches");
  if (!(ratio > 0.0 && ratio < 1.0))
    raise(Errc::BadRatio, "mask ratio must lie in (0, 1)");

  int visible = static_cast<int>(std::lround((1.0 - ratio) * n_patches));
  visible = std::clamp(visible, 1, n_patches - 1);

  // Partial Fisher-Yates over patch indices.
  std::vector<int> idx(n_patches);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < visible; ++i) {
    const int j =
        i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_patches - i)));
    std::swap(idx[i], idx[j]);
  }

  MaskVector m;
  m.bits.assign(static_cast<std::size_t>(n_patches), 0);
  for (int i = 0; i < visible; ++i) m.bits[static_cast<std::size_t>(idx[i])] = 1;
  m.visible_count = visible;
  return m;
}

}  // namespace matinfo
