#include "sandbox.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace matinfo {

namespace {

// Seed stream tags; every stochastic component hangs off (seed, tag, ...).
constexpr std::uint64_t kStreamDataset = 1;
constexpr std::uint64_t kStreamEncoder = 2;
constexpr std::uint64_t kStreamDecoder = 3;
constexpr std::uint64_t kStreamAug = 4;
constexpr std::uint64_t kStreamMask = 5;
constexpr std::uint64_t kStreamEval = 6;
constexpr std::uint64_t kStreamEvalMask = 7;

constexpr double kLatentScaleDecay = 0.6;

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
  raise(Errc::BadConfig, field + ": " + why);
}

bool is_masked_family(LossFamily f) {
  return f == LossFamily::Mae || f == LossFamily::UMae || f == LossFamily::MMae;
}

}  // namespace

const char* dataset_kind_str(DatasetKind k) {
  return k == DatasetKind::LatentLinear ? "latent_linear" : "cluster_mixture";
}
const char* encoder_kind_str(EncoderKind k) {
  return k == EncoderKind::Affine ? "affine" : "mlp";
}
const char* augmentation_kind_str(AugmentationKind k) {
  switch (k) {
    case AugmentationKind::AdditiveNoise: return "noise";
    case AugmentationKind::CoordinateDropout: return "dropout";
    case AugmentationKind::PatchMask: return "patch_mask";
  }
  return "unknown";
}
const char* loss_family_str(LossFamily f) {
  switch (f) {
    case LossFamily::BarlowTwins: return "barlow";
    case LossFamily::SpectralContrastive: return "spectral";
    case LossFamily::InfoNce: return "infonce";
    case LossFamily::Mae: return "mae";
    case LossFamily::UMae: return "umae";
    case LossFamily::MMae: return "mmae";
  }
  return "unknown";
}
const char* kernel_kind_str(KernelKind k) {
  return k == KernelKind::Covariance ? "covariance" : "gram";
}

void validate_config(const SandboxConfig& cfg) {
  if (cfg.n_samples < 2) config_error("n_samples", "need at least 2");
  if (cfg.patch_count < 2) config_error("patch_count", "need at least 2");
  if (cfg.patch_size < 1) config_error("patch_size", "need at least 1");
  if (cfg.latent_dim < 1) config_error("latent_dim", "need at least 1");
  if (cfg.dataset == DatasetKind::ClusterMixture && cfg.clusters < 2)
    config_error("clusters", "need at least 2");
  if (cfg.feature_dim < 1 || cfg.feature_dim > 32)
    config_error("feature_dim", "desk scale is 1..32");
  if (cfg.batch_size < 2 || cfg.batch_size > 512)
    config_error("batch_size", "desk scale is 2..512");
  if (cfg.steps < 0 || cfg.steps > 20000)
    config_error("steps", "desk scale is 0..20000");
  if (cfg.record_every < 1) config_error("record_every", "must be >= 1");
  if (!(cfg.learning_rate > 0.0)) config_error("learning_rate", "must be > 0");
  if (!(cfg.mask_ratio > 0.0 && cfg.mask_ratio < 1.0))
    config_error("mask_ratio", "must lie in (0, 1)");
  if (cfg.lambda < 0.0) config_error("lambda", "must be >= 0");
  if (!(cfg.mu > 0.0)) config_error("mu", "must be > 0");
  if (!(cfg.temperature > 0.0)) config_error("temperature", "must be > 0");
  if (cfg.encoder == EncoderKind::Mlp && cfg.hidden_dim < 1)
    config_error("hidden_dim", "must be >= 1");
  if (cfg.aug_noise_sigma < 0.0) config_error("aug_noise_sigma", "must be >= 0");
  if (cfg.aug_dropout_q < 0.0 || cfg.aug_dropout_q >= 1.0)
    config_error("aug_dropout_q", "must lie in [0, 1)");
  if (!(cfg.aug_mask_ratio > 0.0 && cfg.aug_mask_ratio < 1.0))
    config_error("aug_mask_ratio", "must lie in (0, 1)");
}

SyntheticDataset make_dataset(const SandboxConfig& cfg) {
  validate_config(cfg);
  const int dim = cfg.input_dim();
  Rng rng(derive_seed(cfg.seed, kStreamDataset));

  SyntheticDataset out;
  out.kind = cfg.dataset;
  out.seed = cfg.seed;
  out.samples.resize(dim, cfg.n_samples);
  out.labels.resize(static_cast<std::size_t>(cfg.n_samples));

  if (cfg.dataset == DatasetKind::LatentLinear) {
    // Latent directions carry geometrically decaying energy; the label sits
    // on the weakest one, so collapsing representations lose it first.
    Eigen::MatrixXd w(dim, cfg.latent_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double energy = scale * std::pow(kLatentScaleDecay, j);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        w(i, j) = energy * rng.normal();
    }
    Eigen::VectorXd h(cfg.latent_dim);
    for (int s = 0; s < cfg.n_samples; ++s) {
      for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = rng.normal();
      Eigen::VectorXd x = w * h;
      for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] += cfg.data_noise * rng.normal();
      out.samples.col(s) = x;
      out.labels[static_cast<std::size_t>(s)] =
          h[cfg.latent_dim - 1] > 0.0 ? 1 : 0;
    }
  } else {
    Eigen::MatrixXd centers(dim, cfg.clusters);
    for (Eigen::Index j = 0; j < centers.cols(); ++j)
      for (Eigen::Index i = 0; i < centers.rows(); ++i)
        centers(i, j) = cfg.cluster_spread * rng.normal();
    for (int s = 0; s < cfg.n_samples; ++s) {
      const int c = s % cfg.clusters;
      Eigen::VectorXd x = centers.col(c);
      for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] += cfg.data_noise * rng.normal();
      out.samples.col(s) = x;
      out.labels[static_cast<std::size_t>(s)] = c;
    }
  }
  return out;
}

Network Network::init(EncoderKind kind, int in_dim, int hidden_dim, int out_dim,
                      bool normalize_output, Rng& rng) {
  Network net;
  net.kind_ = kind;
  net.normalize_output_ = normalize_output;
  auto fill = [&rng](Eigen::MatrixXd& m, int fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * rng.normal();
  };
  if (kind == EncoderKind::Mlp) {
    net.w1_.resize(hidden_dim, in_dim);
    net.b1_ = Eigen::VectorXd::Zero(hidden_dim);
    net.w2_.resize(out_dim, hidden_dim);
    net.b2_ = Eigen::VectorXd::Zero(out_dim);
    fill(net.w1_, in_dim);
    fill(net.w2_, hidden_dim);
  } else {
    net.w1_.resize(out_dim, in_dim);
    net.b1_ = Eigen::VectorXd::Zero(out_dim);
    fill(net.w1_, in_dim);
  }
  return net;
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  Eigen::MatrixXd a;
  Eigen::MatrixXd h;
  if (kind_ == EncoderKind::Mlp) {
    h = ((w1_ * x).colwise() + b1_).array().tanh().matrix();
    a = (w2_ * h).colwise() + b2_;
  } else {
    a = (w1_ * x).colwise() + b1_;
  }
  Eigen::MatrixXd out = a;
  if (normalize_output_) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const double norm = out.col(j).norm();
      if (!std::isfinite(norm))
        raise(Errc::DivergedLoss, "network output overflow");
      if (norm < 1e-30)
        raise(Errc::ZeroColumn, "network output column has zero norm");
      out.col(j) /= norm;
    }
  }
  if (cache) {
    cache->x = x;
    cache->h = std::move(h);
    cache->a = std::move(a);
    cache->out = out;
  }
  return out;
}

Eigen::MatrixXd Network::backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                                  Grads& grads) const {
  Eigen::MatrixXd da = d_out;
  if (normalize_output_) {
    // z = a / ||a||: da = (g - z (z.g)) / ||a|| per column
    for (Eigen::Index j = 0; j < da.cols(); ++j) {
      const double norm = cache.a.col(j).norm();
      const Eigen::VectorXd z = cache.out.col(j);
      da.col(j) = (d_out.col(j) - z * z.dot(d_out.col(j))) / norm;
    }
  }
  if (kind_ == EncoderKind::Mlp) {
    grads.w2 += da * cache.h.transpose();
    grads.b2 += da.rowwise().sum();
    Eigen::MatrixXd dh = w2_.transpose() * da;
    Eigen::MatrixXd da1 =
        dh.array() * (1.0 - cache.h.array() * cache.h.array());
    grads.w1 += da1.matrix() * cache.x.transpose();
    grads.b1 += da1.matrix().rowwise().sum();
    return w1_.transpose() * da1.matrix();
  }
  grads.w1 += da * cache.x.transpose();
  grads.b1 += da.rowwise().sum();
  return w1_.transpose() * da;
}

Network::Grads Network::zero_grads() const {
  Grads g;
  g.w1 = Eigen::MatrixXd::Zero(w1_.rows(), w1_.cols());
  g.b1 = Eigen::VectorXd::Zero(b1_.size());
  if (kind_ == EncoderKind::Mlp) {
    g.w2 = Eigen::MatrixXd::Zero(w2_.rows(), w2_.cols());
    g.b2 = Eigen::VectorXd::Zero(b2_.size());
  }
  return g;
}

void Network::sgd_step(const Grads& grads, double lr) {
  w1_ -= lr * grads.w1;
  b1_ -= lr * grads.b1;
  if (kind_ == EncoderKind::Mlp) {
    w2_ -= lr * grads.w2;
    b2_ -= lr * grads.b2;
  }
}

long Network::parameter_count() const {
  long n = static_cast<long>(w1_.size() + b1_.size());
  if (kind_ == EncoderKind::Mlp) n += static_cast<long>(w2_.size() + b2_.size());
  return n;
}

std::vector<double*> Network::parameters() {
  std::vector<double*> ps;
  ps.reserve(static_cast<std::size_t>(parameter_count()));
  auto add = [&ps](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) ps.push_back(m.data() + i);
  };
  auto addv = [&ps](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) ps.push_back(v.data() + i);
  };
  add(w1_);
  addv(b1_);
  if (kind_ == EncoderKind::Mlp) {
    add(w2_);
    addv(b2_);
  }
  return ps;
}

Eigen::MatrixXd augment_batch(const Eigen::MatrixXd& batch,
                              const SandboxConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd out = batch;
  switch (cfg.augmentation) {
    case AugmentationKind::AdditiveNoise:
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
          out(i, j) += cfg.aug_noise_sigma * rng.normal();
      break;
    case AugmentationKind::CoordinateDropout:
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
          if (rng.bernoulli(cfg.aug_dropout_q)) out(i, j) = 0.0;
      break;
    case AugmentationKind::PatchMask: {
      const int p = cfg.patch_size;
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const MaskVector m = mask_sample_bits(
            cfg.patch_count, cfg.aug_mask_ratio,
            derive_seed(seed, static_cast<std::uint64_t>(j)));
        for (int patch = 0; patch < cfg.patch_count; ++patch)
          if (!m.bits[static_cast<std::size_t>(patch)])
            out.col(j).segment(static_cast<Eigen::Index>(patch) * p, p).setZero();
      }
      break;
    }
  }
  return out;
}

LossValue siamese_loss(const FeatureMatrix& z1, const FeatureMatrix& z2,
                       const SandboxConfig& cfg, PairGrad* grad) {
  switch (cfg.loss) {
    case LossFamily::BarlowTwins:
      return barlow_twins(z1, z2, cfg.lambda, grad);
    case LossFamily::SpectralContrastive:
      return spectral_contrastive(z1, z2, cfg.lambda, grad);
    case LossFamily::InfoNce:
      return infonce(z1, z2, cfg.temperature, grad);
    default:
      config_error("loss", "masked families need train_masked");
  }
}

namespace {

Eigen::MatrixXd gather_batch(const Eigen::MatrixXd& samples, long start, int b) {
  const Eigen::Index n = samples.cols();
  Eigen::MatrixXd out(samples.rows(), b);
  for (int j = 0; j < b; ++j)
    out.col(j) = samples.col((start + j) % n);
  return out;
}

KernelMatrix build_kernel(const Eigen::MatrixXd& z, KernelKind kind) {
  FeatureMatrix f(z, true);
  return kind == KernelKind::Covariance ? covariance_kernel(f) : gram_kernel(f);
}

std::vector<MeasureValue> siamese_measures(const Eigen::MatrixXd& z1,
                                           const Eigen::MatrixXd& z2,
                                           const SandboxConfig& cfg) {
  const KernelMatrix k1 = build_kernel(z1, cfg.kernel);
  const KernelMatrix k2 = build_kernel(z2, cfg.kernel);
  return {mutual_information(k1, k2, 1.0), joint_entropy(k1, k2, 1.0),
          matrix_js(k1, k2),               eigen_js(k1, k2),
          effective_rank(k1.data()),       tcr(k1, cfg.mu)};
}

}  // namespace

Trajectory train_siamese(const SandboxConfig& cfg) {
  validate_config(cfg);
  if (is_masked_family(cfg.loss))
    config_error("loss", "Siamese trainer expects barlow/spectral/infonce");

  const SyntheticDataset data = make_dataset(cfg);
  Rng enc_rng(derive_seed(cfg.seed, kStreamEncoder));
  Network enc = Network::init(cfg.encoder, cfg.input_dim(), cfg.hidden_dim,
                              cfg.feature_dim, true, enc_rng);

  Trajectory traj;
  traj.labels = data.labels;
  const int b = std::min<int>(cfg.batch_size, cfg.n_samples);

  auto record = [&](long step) {
    const Eigen::MatrixXd base = data.samples.leftCols(b);
    const Eigen::MatrixXd x1 = augment_batch(
        base, cfg, derive_seed(cfg.seed, kStreamEval, 2 * static_cast<std::uint64_t>(step)));
    const Eigen::MatrixXd x2 = augment_batch(
        base, cfg, derive_seed(cfg.seed, kStreamEval, 2 * static_cast<std::uint64_t>(step) + 1));
    const Eigen::MatrixXd z1 = enc.forward(x1);
    const Eigen::MatrixXd z2 = enc.forward(x2);
    TrainRecord rec;
    rec.step = step;
    rec.loss = siamese_loss(FeatureMatrix(z1, true), FeatureMatrix(z2, true), cfg);
    rec.measures = siamese_measures(z1, z2, cfg);
    if (cfg.store_features) {
      rec.z1 = z1;
      rec.z2 = z2;
    }
    traj.records.push_back(std::move(rec));
  };

  record(0);
  for (long step = 1; step <= cfg.steps && !traj.diverged; ++step) {
    try {
      const long start = ((step - 1) * static_cast<long>(b)) % cfg.n_samples;
      const Eigen::MatrixXd base = gather_batch(data.samples, start, b);
      const Eigen::MatrixXd x1 = augment_batch(
          base, cfg, derive_seed(cfg.seed, kStreamAug, 2 * static_cast<std::uint64_t>(step)));
      const Eigen::MatrixXd x2 = augment_batch(
          base, cfg, derive_seed(cfg.seed, kStreamAug, 2 * static_cast<std::uint64_t>(step) + 1));

      Network::Cache c1, c2;
      const Eigen::MatrixXd z1 = enc.forward(x1, &c1);
      const Eigen::MatrixXd z2 = enc.forward(x2, &c2);
      if (!z1.allFinite() || !z2.allFinite()) {
        traj.diverged = true;
        break;
      }
      PairGrad pg;
      const LossValue loss = siamese_loss(FeatureMatrix(z1, true),
                                          FeatureMatrix(z2, true), cfg, &pg);
      if (!std::isfinite(loss.total)) {
        traj.diverged = true;
        break;
      }
      Network::Grads grads = enc.zero_grads();
      enc.backward(c1, pg.d_z1, grads);
      enc.backward(c2, pg.d_z2, grads);
      enc.sgd_step(grads, cfg.learning_rate);

      if (step % cfg.record_every == 0 || step == cfg.steps) record(step);
    } catch (const Error& e) {
      if (e.code() != Errc::DivergedLoss) throw;
      traj.diverged = true;
    }
  }

  try {
    traj.final_features = enc.forward(data.samples);
  } catch (const Error& e) {
    if (e.code() != Errc::DivergedLoss) throw;
    traj.diverged = true;
  }
  return traj;
}

namespace {

struct MaskedBatch {
  std::vector<PatchedSample> samples;
  Eigen::MatrixXd visible;  // x o m, zeros at masked positions
};

MaskedBatch build_masked_batch(const Eigen::MatrixXd& base,
                               const SandboxConfig& cfg, std::uint64_t stream,
                               long step) {
  MaskedBatch mb;
  const int b = static_cast<int>(base.cols());
  mb.samples.reserve(static_cast<std::size_t>(b));
  mb.visible = base;
  const int p = cfg.patch_size;
  for (int j = 0; j < b; ++j) {
    PatchedSample s = mask_sample(
        base.col(j), cfg.patch_count, cfg.mask_ratio,
        derive_seed(cfg.seed, stream,
                    static_cast<std::uint64_t>(step) * 100000ULL +
                        static_cast<std::uint64_t>(j)));
    for (int patch = 0; patch < cfg.patch_count; ++patch)
      if (!s.mask.bits[static_cast<std::size_t>(patch)])
        mb.visible.col(j).segment(static_cast<Eigen::Index>(patch) * p, p).setZero();
    mb.samples.push_back(std::move(s));
  }
  return mb;
}

std::vector<Eigen::VectorXd> gather_masked_predictions(
    const Eigen::MatrixXd& decoded, const std::vector<PatchedSample>& samples) {
  std::vector<Eigen::VectorXd> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PatchedSample& s = samples[i];
    const int p = s.patch_size();
    Eigen::VectorXd v(static_cast<Eigen::Index>(s.masked_count()) * p);
    Eigen::Index at = 0;
    for (int patch = 0; patch < s.patch_count(); ++patch) {
      if (!s.mask.bits[static_cast<std::size_t>(patch)]) {
        v.segment(at, p) =
            decoded.col(static_cast<Eigen::Index>(i))
                .segment(static_cast<Eigen::Index>(patch) * p, p);
        at += p;
      }
    }
    out[i] = std::move(v);
  }
  return out;
}

Eigen::MatrixXd scatter_masked_gradients(
    const std::vector<Eigen::VectorXd>& grads,
    const std::vector<PatchedSample>& samples, Eigen::Index rows) {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PatchedSample& s = samples[i];
    const int p = s.patch_size();
    Eigen::Index at = 0;
    for (int patch = 0; patch < s.patch_count(); ++patch) {
      if (!s.mask.bits[static_cast<std::size_t>(patch)]) {
        out.col(static_cast<Eigen::Index>(i))
            .segment(static_cast<Eigen::Index>(patch) * p, p) =
            grads[i].segment(at, p);
        at += p;
      }
    }
  }
  return out;
}

LossValue masked_objective(const LossValue& recon, const FeatureMatrix& z,
                           const SandboxConfig& cfg,
                           Eigen::MatrixXd* reg_grad) {
  switch (cfg.loss) {
    case LossFamily::Mae:
      return mmae_loss(recon, z, 0.0, cfg.mu, reg_grad);
    case LossFamily::UMae:
      return umae_loss(recon, z, cfg.lambda, cfg.mu, reg_grad);
    case LossFamily::MMae:
      return mmae_loss(recon, z, cfg.lambda, cfg.mu, reg_grad);
    default:
      config_error("loss", "masked trainer expects mae/umae/mmae");
  }
}

// The trainer optimizes the per-element mean of the reconstruction error, so
// the lambda-weighted regularizers keep the same relative weight at any batch
// size or mask ratio.
double masked_element_count(const std::vector<PatchedSample>& samples) {
  double m = 0.0;
  for (const PatchedSample& s : samples)
    m += static_cast<double>(s.masked_count()) * s.patch_size();
  return m;
}

LossValue scale_recon(LossValue recon, double inv_count) {
  recon.total *= inv_count;
  recon.terms["reconstruction"] *= inv_count;
  return recon;
}

std::vector<MeasureValue> masked_measures(const Eigen::MatrixXd& z,
                                          const SandboxConfig& cfg) {
  const FeatureMatrix f(z, true);
  return {tcr(f, cfg.mu), effective_rank(gram_kernel(f).data())};
}

}  // namespace

Trajectory train_masked(const SandboxConfig& cfg) {
  validate_config(cfg);
  if (!is_masked_family(cfg.loss))
    config_error("loss", "masked trainer expects mae/umae/mmae");

  const SyntheticDataset data = make_dataset(cfg);
  Rng enc_rng(derive_seed(cfg.seed, kStreamEncoder));
  Network enc = Network::init(cfg.encoder, cfg.input_dim(), cfg.hidden_dim,
                              cfg.feature_dim, true, enc_rng);
  Rng dec_rng(derive_seed(cfg.seed, kStreamDecoder));
  Network dec = Network::init(EncoderKind::Affine, cfg.feature_dim, 0,
                              cfg.input_dim(), false, dec_rng);

  Trajectory traj;
  traj.labels = data.labels;
  const int b = std::min<int>(cfg.batch_size, cfg.n_samples);

  auto record = [&](long step) {
    const Eigen::MatrixXd base = data.samples.leftCols(b);
    const MaskedBatch mb = build_masked_batch(base, cfg, kStreamEvalMask, step);
    const Eigen::MatrixXd z = enc.forward(mb.visible);
    const Eigen::MatrixXd decoded = dec.forward(z);
    const LossValue recon = scale_recon(
        mae_loss(gather_masked_predictions(decoded, mb.samples), mb.samples),
        1.0 / masked_element_count(mb.samples));
    TrainRecord rec;
    rec.step = step;
    rec.loss = masked_objective(recon, FeatureMatrix(z, true), cfg, nullptr);
    rec.measures = masked_measures(z, cfg);
    if (cfg.store_features) rec.z1 = z;
    traj.records.push_back(std::move(rec));
  };

  record(0);
  for (long step = 1; step <= cfg.steps && !traj.diverged; ++step) {
    try {
      const long start = ((step - 1) * static_cast<long>(b)) % cfg.n_samples;
      const Eigen::MatrixXd base = gather_batch(data.samples, start, b);
      const MaskedBatch mb = build_masked_batch(base, cfg, kStreamMask, step);

      Network::Cache enc_cache, dec_cache;
      const Eigen::MatrixXd z = enc.forward(mb.visible, &enc_cache);
      if (!z.allFinite()) {
        traj.diverged = true;
        break;
      }
      const Eigen::MatrixXd decoded = dec.forward(z, &dec_cache);
      std::vector<Eigen::VectorXd> pred_grads;
      const double inv_count = 1.0 / masked_element_count(mb.samples);
      const LossValue recon = scale_recon(
          mae_loss(gather_masked_predictions(decoded, mb.samples), mb.samples,
                   &pred_grads),
          inv_count);
      for (Eigen::VectorXd& g : pred_grads) g *= inv_count;
      Eigen::MatrixXd reg_grad;
      const LossValue loss =
          masked_objective(recon, FeatureMatrix(z, true), cfg, &reg_grad);
      if (!std::isfinite(loss.total)) {
        traj.diverged = true;
        break;
      }

      const Eigen::MatrixXd d_decoded =
          scatter_masked_gradients(pred_grads, mb.samples, decoded.rows());
      Network::Grads dec_grads = dec.zero_grads();
      Eigen::MatrixXd dz = dec.backward(dec_cache, d_decoded, dec_grads);
      dz += reg_grad;
      Network::Grads enc_grads = enc.zero_grads();
      enc.backward(enc_cache, dz, enc_grads);

      dec.sgd_step(dec_grads, cfg.learning_rate);
      enc.sgd_step(enc_grads, cfg.learning_rate);

      if (step % cfg.record_every == 0 || step == cfg.steps) record(step);
    } catch (const Error& e) {
      if (e.code() != Errc::DivergedLoss) throw;
      traj.diverged = true;
    }
  }

  try {
    traj.final_features = enc.forward(data.samples);
  } catch (const Error& e) {
    if (e.code() != Errc::DivergedLoss) throw;
    traj.diverged = true;
  }
  return traj;
}

std::vector<MuSweepRow> mu_sweep(const SandboxConfig& cfg,
                                 const std::vector<double>& mus) {
  std::vector<MuSweepRow> rows;
  rows.reserve(mus.size());
  for (double mu : mus) {
    if (!(mu > 0.0)) raise(Errc::BadMu, "sweep values must be positive");
    SandboxConfig run_cfg = cfg;
    run_cfg.mu = mu;
    if (!is_masked_family(run_cfg.loss)) run_cfg.loss = LossFamily::MMae;
    const Trajectory traj = train_masked(run_cfg);

    MuSweepRow row;
    row.mu = mu;
    const TrainRecord& last = traj.records.back();
    row.final_recon = last.loss.terms.at("reconstruction");
    const FeatureMatrix final_f(traj.final_features, true);
    row.final_tcr = tcr(final_f, mu).value;
    row.final_erank = effective_rank(gram_kernel(final_f).data()).value;
    row.probe_accuracy = probe_split_accuracy(traj.final_features, traj.labels);
    rows.push_back(row);
  }
  return rows;
}

double linear_probe(const Eigen::MatrixXd& z_train,
                    const std::vector<int>& labels_train,
                    const Eigen::MatrixXd& z_test,
                    const std::vector<int>& labels_test) {
  if (z_train.cols() != static_cast<Eigen::Index>(labels_train.size()) ||
      z_test.cols() != static_cast<Eigen::Index>(labels_test.size()))
    raise(Errc::ShapeMismatch, "feature/label count mismatch");
  if (z_train.rows() != z_test.rows())
    raise(Errc::ShapeMismatch, "train/test feature dimensions differ");

  int num_classes = 0;
  for (int l : labels_train) num_classes = std::max(num_classes, l + 1);
  for (int l : labels_test) num_classes = std::max(num_classes, l + 1);
  if (num_classes < 2) raise(Errc::DegenerateLabels, "need at least 2 classes");
  std::set<int> seen(labels_train.begin(), labels_train.end());
  for (int c = 0; c < num_classes; ++c)
    if (!seen.count(c)) {
      std::ostringstream os;
      os << "class " << c << " absent from training data";
      raise(Errc::DegenerateLabels, os.str());
    }

  const Eigen::Index d = z_train.rows();
  const Eigen::Index n = z_train.cols();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(num_classes, d);
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(num_classes);
  const double lr = 1.0;

  Eigen::MatrixXd probs(num_classes, n);
  for (int iter = 0; iter < 5000; ++iter) {
    Eigen::MatrixXd logits = (w * z_train).colwise() + bias;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double m = logits.col(j).maxCoeff();
      const Eigen::ArrayXd e = (logits.col(j).array() - m).exp();
      probs.col(j) = (e / e.sum()).matrix();
    }
    Eigen::MatrixXd g = probs;
    for (Eigen::Index j = 0; j < n; ++j)
      g(labels_train[static_cast<std::size_t>(j)], j) -= 1.0;
    const Eigen::MatrixXd gw = (g * z_train.transpose()) / static_cast<double>(n);
    const Eigen::VectorXd gb = g.rowwise().sum() / static_cast<double>(n);
    const double gnorm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
    if (gnorm < 1e-6) break;
    w -= lr * gw;
    bias -= lr * gb;
  }

  long correct = 0;
  for (Eigen::Index j = 0; j < z_test.cols(); ++j) {
    Eigen::VectorXd logits = w * z_test.col(j) + bias;
    Eigen::Index argmax = 0;
    logits.maxCoeff(&argmax);
    if (static_cast<int>(argmax) == labels_test[static_cast<std::size_t>(j)])
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z_test.cols());
}

double probe_split_accuracy(const Eigen::MatrixXd& features,
                            const std::vector<int>& labels) {
  const Eigen::Index n = features.cols();
  if (n < 5) raise(Errc::ShapeMismatch, "need at least 5 samples to split");
  const Eigen::Index n_test = std::max<Eigen::Index>(1, n / 5);
  const Eigen::Index n_train = n - n_test;
  const std::vector<int> train_labels(labels.begin(), labels.begin() + n_train);
  const std::vector<int> test_labels(labels.begin() + n_train, labels.end());
  return linear_probe(features.leftCols(n_train), train_labels,
                      features.rightCols(n_test), test_labels);
}

}  // namespace matinfo
