#pragma once

#include <map>
#include <string>
#include <vector>

#include "measures.hpp"
#include "spectral.hpp"

namespace matinfo {

// total is the sum of the named terms; each term carries its coefficient
// already applied.
struct LossValue {
  double total = 0.0;
  std::map<std::string, double> terms;
};

// d x d cross-correlation between batch-normalized branch outputs.
struct CrossCorrelation {
  Eigen::MatrixXd data;
};

// One sample split into n patches of size p (one column per patch).
struct PatchedSample {
  Eigen::MatrixXd patches;  // p x n
  MaskVector mask;

  int patch_count() const { return static_cast<int>(patches.cols()); }
  int patch_size() const { return static_cast<int>(patches.rows()); }
  int masked_count() const { return patch_count() - mask.visible_count; }
};

struct PairGrad {
  Eigen::MatrixXd d_z1;
  Eigen::MatrixXd d_z2;
};

// Symmetric two-term InfoNCE with logits (z1_i . z2_j) / temperature, summed
// over the batch. Optional gradients w.r.t. both feature matrices.
LossValue infonce(const FeatureMatrix& z1, const FeatureMatrix& z2,
                  double temperature = 1.0, PairGrad* grad = nullptr);

// sum_i ||z1_i - z2_i||^2 + lambda sum_{i != j} (z1_i . z2_j)^2
LossValue spectral_contrastive(const FeatureMatrix& z1, const FeatureMatrix& z2,
                               double lambda, PairGrad* grad = nullptr);

// Cross-correlation C = (1/B) Zbar1 Zbar2^T; sum_i (1 - C_ii)^2 +
// lambda sum_{i != j} C_ij^2 with both sums over the d feature dimensions.
// Gradients flow through the batch standardization analytically.
LossValue barlow_twins(const FeatureMatrix& z1, const FeatureMatrix& z2,
                       double lambda, PairGrad* grad = nullptr,
                       CrossCorrelation* cross = nullptr);

// Splits a flat vector into n patches and draws a deterministic mask.
PatchedSample mask_sample(const Eigen::VectorXd& x, int n_patches, double ratio,
                          std::uint64_t seed);

// Masked patches of a sample in ascending patch order, flattened.
Eigen::VectorXd masked_target(const PatchedSample& s);

// sum_i ||g(z_i) - x_i o (1 - m_i)||^2 over masked positions. predicted[i]
// must match the masked-patch layout of samples[i]. Optional gradient w.r.t.
// the predictions.
LossValue mae_loss(const std::vector<Eigen::VectorXd>& predicted,
                   const std::vector<PatchedSample>& samples,
                   std::vector<Eigen::VectorXd>* grad = nullptr);

// recon - lambda * TCR_mu(Z). regularizer_grad receives d(total)/dZ of the
// TCR term only (the reconstruction gradient lives with the decoder).
LossValue mmae_loss(const LossValue& recon, const FeatureMatrix& z,
                    double lambda, double mu,
                    Eigen::MatrixXd* regularizer_grad = nullptr);

// recon + (lambda / (2 mu^2)) sum_{i != j} (z_i . z_j)^2 — exactly the
// second-order, non-constant term of the M-MAE expansion.
LossValue umae_loss(const LossValue& recon, const FeatureMatrix& z,
                    double lambda, double mu,
                    Eigen::MatrixXd* regularizer_grad = nullptr);

// d/dZ [ln det(mu I_d + Z Z^T)] = 2 (mu I_d + Z Z^T)^{-1} Z
Eigen::MatrixXd tcr_gradient(const FeatureMatrix& z, double mu);

// |ln det(I_B + s^2 Z^T Z / mu) - [tr(s^2 Z^T Z)/mu - tr((s^2 Z^T Z)^2)/(2 mu^2)]|
// per scale; the remainder is third order, so it scales as s^6.
std::vector<double> taylor_residual(const FeatureMatrix& z, double mu,
                                    const std::vector<double>& scales);

}  // namespace matinfo
