#pragma once

#include <optional>
#include <string>

#include "spectral.hpp"

namespace matinfo {

enum class MeasureName {
  RenyiEntropy,
  VonNeumannEntropy,
  MutualInfo,
  JointEntropy,
  MatrixKL,
  MatrixJS,
  EigenJS,
  Tcr,
  EffectiveRank,
};

const char* measure_name_str(MeasureName n);

// A named scalar in nats, with the order/coefficient that produced it.
struct MeasureValue {
  MeasureName name;
  std::optional<double> alpha;
  std::optional<double> mu;
  double value = 0.0;
};

// Normalized eigenvalue distribution of a kernel (weights sum to 1).
struct ProbVector {
  Eigen::VectorXd weights;
};

ProbVector eigen_distribution(const KernelMatrix& k);

// (1/(1-alpha)) ln tr((K/n)^alpha); alpha = 1 delegates to the von Neumann
// entropy.
MeasureValue renyi_entropy(const KernelMatrix& k, double alpha);

// -sum (lambda/n) ln(lambda/n) with 0 ln 0 = 0.
MeasureValue von_neumann_entropy(const KernelMatrix& k);

// H_a(K1) + H_a(K2) - H_a(K1 o K2)
MeasureValue mutual_information(const KernelMatrix& k1, const KernelMatrix& k2,
                                double alpha);

// H_a(K1 o K2)
MeasureValue joint_entropy(const KernelMatrix& k1, const KernelMatrix& k2,
                           double alpha);

// tr[K1 (log K1 - log K2)]; K1 may be singular, K2 must be strictly PD.
MeasureValue matrix_kl(const KernelMatrix& k1, const Eigen::MatrixXd& k2);

// H1((K1+K2)/2) - (H1(K1)+H1(K2))/2, bounded by ln 2.
MeasureValue matrix_js(const KernelMatrix& k1, const KernelMatrix& k2);

// Classical JS divergence between the two normalized eigen distributions,
// spectra paired in descending order.
MeasureValue eigen_js(const KernelMatrix& k1, const KernelMatrix& k2);

// log det(mu I + Z Z^T) = sum ln(mu + lambda_i)
MeasureValue tcr(const KernelMatrix& k, double mu);
MeasureValue tcr(const FeatureMatrix& z, double mu);

// exp of the Shannon entropy of the normalized singular-value distribution.
// Always goes through an SVD so the erank = exp(H1) identity stays a genuine
// two-route check.
MeasureValue effective_rank(const Eigen::MatrixXd& a);

// ln det(I_d + Z Z^T / mu) and its B x B dual, each via Cholesky.
double log_det_primal(const FeatureMatrix& z, double mu);
double log_det_dual(const FeatureMatrix& z, double mu);

}  // namespace matinfo
