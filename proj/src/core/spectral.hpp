#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "error.hpp"

namespace matinfo {

// Tolerances shared by the kernel admissibility checks.
namespace tol {
inline constexpr double kAsymmetry = 1e-10;       // max |M - M^T| entry
inline constexpr double kEigAsymmetry = 1e-8;     // symmetric_eig precondition
inline constexpr double kDiagonal = 1e-6;         // |K_ii - 1| before renorm
inline constexpr double kEigClampRel = 1e-8;      // clamp window, rel lambda_max
inline constexpr double kUnitColumn = 1e-10;      // unit-column flag check
inline constexpr double kLogFloorRel = 1e-12;     // matrix_log PD threshold
inline constexpr double kRankRel = 1e-8;          // numerical-rank threshold
}  // namespace tol

// d x B matrix of column representations, one column per sample.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Eigen::MatrixXd data, bool unit_columns = false);

  const Eigen::MatrixXd& data() const { return data_; }
  Eigen::Index dim() const { return data_.rows(); }
  Eigen::Index batch() const { return data_.cols(); }
  bool unit_columns() const { return unit_columns_; }

 private:
  Eigen::MatrixXd data_;
  bool unit_columns_;
};

// Descending eigenvalues of a symmetric matrix plus sanitation metadata.
struct Spectrum {
  Eigen::VectorXd eigenvalues;  // nonincreasing
  int clamped_count = 0;        // negatives clamped to zero during sanitation
  double trace = 0.0;
};

enum class KernelKind { Covariance, Gram };

// Symmetric PSD matrix with unit diagonal; the admissible input of all
// matrix information measures. Construct through psd_sanitize /
// covariance_kernel / gram_kernel / hadamard, which establish the invariants
// and cache the sanitized spectrum.
class KernelMatrix {
 public:
  const Eigen::MatrixXd& data() const { return data_; }
  const Spectrum& spectrum() const { return spectrum_; }
  Eigen::Index size() const { return data_.rows(); }
  KernelKind kind() const { return kind_; }

 private:
  friend KernelMatrix psd_sanitize(const Eigen::MatrixXd&, KernelKind);
  KernelMatrix(Eigen::MatrixXd data, Spectrum spectrum, KernelKind kind)
      : data_(std::move(data)), spectrum_(std::move(spectrum)), kind_(kind) {}

  Eigen::MatrixXd data_;
  Spectrum spectrum_;
  KernelKind kind_;
};

// Binary patch mask; ones mark visible patches. Both views stay nonempty.
struct MaskVector {
  std::vector<std::uint8_t> bits;
  int visible_count = 0;

  int size() const { return static_cast<int>(bits.size()); }
};

struct EigResult {
  Spectrum spectrum;            // descending, unclamped
  Eigen::MatrixXd vectors;      // columns ordered to match the spectrum
};

// Dense symmetric eigendecomposition, eigenvalues descending.
EigResult symmetric_eig(const Eigen::MatrixXd& m);

// Validates symmetry and the unit diagonal, renormalizes the diagonal to
// exactly 1, clamps eigenvalue noise, and rejects genuinely indefinite input.
KernelMatrix psd_sanitize(const Eigen::MatrixXd& m,
                          KernelKind kind = KernelKind::Covariance);

// Per-dimension batch standardization (population variance), then
// K = (1/B) Zbar Zbar^T. The d x d kernel has unit diagonal by construction.
KernelMatrix covariance_kernel(const FeatureMatrix& z);

// Column-normalized K = Z^T Z, the B x B Gram kernel.
KernelMatrix gram_kernel(const FeatureMatrix& z);

// Entrywise product; PSD by the Schur product theorem, re-sanitized anyway.
KernelMatrix hadamard(const KernelMatrix& k1, const KernelMatrix& k2);

// V diag(lambda^alpha) V^T with 0^alpha := 0. The general overload accepts
// any symmetric PSD matrix (eigenvalue noise below zero is clamped).
Eigen::MatrixXd matrix_power(const KernelMatrix& k, double alpha);
Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& m, double alpha);

// V diag(ln lambda) V^T; requires all eigenvalues > 1e-12 * lambda_max.
Eigen::MatrixXd matrix_log(const Eigen::MatrixXd& m);

// Rows standardized to zero mean and unit population variance over the batch.
// Shared by covariance_kernel and the Barlow Twins cross-correlation.
Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& z);

// Count of eigenvalues above 1e-8 * lambda_max.
int numerical_rank(const Spectrum& s);

// Deterministic patch mask: visible_count = round((1-ratio)*n) clamped to
// [1, n-1]; visible patches drawn uniformly without replacement.
MaskVector mask_sample_bits(int n_patches, double ratio, std::uint64_t seed);

}  // namespace matinfo
