#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "losses.hpp"
#include "measures.hpp"
#include "rng.hpp"

namespace matinfo {

enum class DatasetKind { LatentLinear, ClusterMixture };
enum class EncoderKind { Affine, Mlp };
enum class AugmentationKind { AdditiveNoise, CoordinateDropout, PatchMask };
enum class LossFamily { BarlowTwins, SpectralContrastive, InfoNce, Mae, UMae, MMae };

const char* dataset_kind_str(DatasetKind k);
const char* encoder_kind_str(EncoderKind k);
const char* augmentation_kind_str(AugmentationKind k);
const char* loss_family_str(LossFamily f);
const char* kernel_kind_str(KernelKind k);

struct SandboxConfig {
  DatasetKind dataset = DatasetKind::LatentLinear;
  int n_samples = 512;
  int patch_count = 16;
  int patch_size = 4;
  int latent_dim = 6;
  int clusters = 4;
  double data_noise = 0.1;
  double cluster_spread = 3.0;

  EncoderKind encoder = EncoderKind::Affine;
  int hidden_dim = 32;
  int feature_dim = 8;

  LossFamily loss = LossFamily::BarlowTwins;
  double lambda = 0.01;
  double mu = 1.0;
  double temperature = 1.0;
  double mask_ratio = 0.75;

  AugmentationKind augmentation = AugmentationKind::AdditiveNoise;
  double aug_noise_sigma = 0.05;
  double aug_dropout_q = 0.2;
  double aug_mask_ratio = 0.25;

  double learning_rate = 0.001;
  long steps = 2000;
  int batch_size = 256;
  long record_every = 50;
  KernelKind kernel = KernelKind::Covariance;
  std::uint64_t seed = 1;
  bool store_features = true;

  int input_dim() const { return patch_count * patch_size; }
};

// Desk-scale bounds plus internal consistency; raises ConfigError.
void validate_config(const SandboxConfig& cfg);

struct SyntheticDataset {
  Eigen::MatrixXd samples;  // input_dim x n_samples, one column per sample
  std::vector<int> labels;
  DatasetKind kind = DatasetKind::LatentLinear;
  std::uint64_t seed = 0;
};

SyntheticDataset make_dataset(const SandboxConfig& cfg);

// Two-layer perceptron (or plain affine map) with optional output column
// normalization. Small enough that forward/backward are written out by hand.
class Network {
 public:
  static Network init(EncoderKind kind, int in_dim, int hidden_dim, int out_dim,
                      bool normalize_output, Rng& rng);

  struct Cache {
    Eigen::MatrixXd x;    // input
    Eigen::MatrixXd h;    // post-activation hidden (Mlp only)
    Eigen::MatrixXd a;    // pre-normalization output
    Eigen::MatrixXd out;  // final output
  };

  struct Grads {
    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  // Accumulates parameter gradients for dL/d(out); returns dL/d(in).
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                           Grads& grads) const;

  Grads zero_grads() const;
  void sgd_step(const Grads& grads, double lr);

  EncoderKind kind() const { return kind_; }
  int out_dim() const { return static_cast<int>(w_out().rows()); }
  long parameter_count() const;

  // flat parameter access for finite-difference checks
  std::vector<double*> parameters();

 private:
  const Eigen::MatrixXd& w_out() const { return kind_ == EncoderKind::Mlp ? w2_ : w1_; }

  EncoderKind kind_ = EncoderKind::Affine;
  bool normalize_output_ = false;
  Eigen::MatrixXd w1_, w2_;
  Eigen::VectorXd b1_, b2_;
};

using Encoder = Network;

struct TrainRecord {
  long step = 0;
  LossValue loss;
  std::vector<MeasureValue> measures;
  std::optional<Eigen::MatrixXd> z1;  // branch 1 features (or the only branch)
  std::optional<Eigen::MatrixXd> z2;  // branch 2 features (Siamese runs)
};

struct Trajectory {
  std::vector<TrainRecord> records;
  bool diverged = false;
  Eigen::MatrixXd final_features;  // encoder output on the full dataset
  std::vector<int> labels;
};

// Siamese training (Barlow Twins / spectral contrastive / InfoNCE), shared
// weights between branches, plain SGD with fixed step size.
Trajectory train_siamese(const SandboxConfig& cfg);

// Masked training (MAE / U-MAE / M-MAE): encoder on visible content, affine
// decoder, reconstruction on masked positions.
Trajectory train_masked(const SandboxConfig& cfg);

struct MuSweepRow {
  double mu = 0.0;
  double final_recon = 0.0;
  double final_tcr = 0.0;
  double final_erank = 0.0;
  double probe_accuracy = 0.0;
};

std::vector<MuSweepRow> mu_sweep(const SandboxConfig& cfg,
                                 const std::vector<double>& mus);

// Multinomial logistic regression on frozen features, gradient descent to
// convergence (grad norm < 1e-6 or 5000 iterations); returns test accuracy.
double linear_probe(const Eigen::MatrixXd& z_train,
                    const std::vector<int>& labels_train,
                    const Eigen::MatrixXd& z_test,
                    const std::vector<int>& labels_test);

// Deterministic per-step views; exposed for the optimisation probes in tests.
Eigen::MatrixXd augment_batch(const Eigen::MatrixXd& batch,
                              const SandboxConfig& cfg, std::uint64_t seed);
LossValue siamese_loss(const FeatureMatrix& z1, const FeatureMatrix& z2,
                       const SandboxConfig& cfg, PairGrad* grad = nullptr);

// 80/20 train/test split of encoder features, then linear_probe.
double probe_split_accuracy(const Eigen::MatrixXd& features,
                            const std::vector<int>& labels);

}  // namespace matinfo
