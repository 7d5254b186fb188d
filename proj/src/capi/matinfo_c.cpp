#include "matinfo.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "core/io.hpp"
#include "core/measures.hpp"
#include "core/sandbox.hpp"
#include "core/spectral.hpp"
#include "core/verify.hpp"

using namespace matinfo;

struct mit_matrix {
  Eigen::MatrixXd data;
};

struct mit_kernel {
  KernelMatrix kernel;
};

struct mit_config {
  std::map<std::string, std::string> kv;
};

namespace {

thread_local std::string t_last_error;

mit_status status_from(const Error& e) {
  t_last_error = e.what();
  switch (e.error_class()) {
    case ErrorClass::Usage: return MIT_ERR_USAGE;
    case ErrorClass::Data: return MIT_ERR_DATA;
    case ErrorClass::Numeric: return MIT_ERR_NUMERIC;
    case ErrorClass::Verify: return MIT_ERR_VERIFY;
  }
  return MIT_ERR_DATA;
}

// Funnels every entry point through one exception boundary.
template <typename Fn>
mit_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    return status_from(e);
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return MIT_ERR_NUMERIC;
  } catch (...) {
    t_last_error = "unknown error";
    return MIT_ERR_NUMERIC;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mit_status need(bool ok, const char* what) {
  if (!ok) {
    t_last_error = std::string("null argument: ") + what;
    return MIT_ERR_USAGE;
  }
  return MIT_OK;
}

KernelKind to_kind(mit_kernel_kind k) {
  return k == MIT_KERNEL_GRAM ? KernelKind::Gram : KernelKind::Covariance;
}

SandboxConfig resolve_config(const mit_config* cfg) {
  return config_from_kv(cfg->kv);
}

bool is_masked(LossFamily f) {
  return f == LossFamily::Mae || f == LossFamily::UMae || f == LossFamily::MMae;
}

mit_status run_training(const SandboxConfig& cfg, const std::string& run_dir,
                        char** summary_json_out) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const Trajectory traj =
      is_masked(cfg.loss) ? train_masked(cfg) : train_siamese(cfg);

  fs::create_directories(run_dir);
  const std::string traj_path = (fs::path(run_dir) / "trajectory.jsonl").string();
  const std::string summary_path = (fs::path(run_dir) / "summary.json").string();
  write_trajectory_jsonl(traj_path, traj);
  const std::string summary = train_summary_json(traj, cfg);
  {
    std::ofstream out(summary_path);
    if (!out) raise(Errc::ParseError, summary_path + ": cannot write");
    out << summary << '\n';
  }
  std::vector<std::string> outputs{traj_path, summary_path};
  if (cfg.store_features) {
    dump_trajectory_features(run_dir, traj);
    outputs.push_back((fs::path(run_dir) / "branch1").string());
    if (!traj.records.empty() && traj.records.front().z2)
      outputs.push_back((fs::path(run_dir) / "branch2").string());
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_manifest(run_dir, "train", cfg, outputs, seconds);
  if (summary_json_out) *summary_json_out = copy_string(summary);
  if (traj.diverged) {
    t_last_error = "DivergedLoss: training aborted on non-finite loss";
    return MIT_ERR_NUMERIC;
  }
  return MIT_OK;
}

}  // namespace

extern "C" {

const char* mit_version(void) { return kToolVersion; }

const char* mit_last_error(void) { return t_last_error.c_str(); }

void mit_string_free(char* s) { std::free(s); }

mit_status mit_matrix_create(const double* data, int rows, int cols,
                             mit_matrix** out) {
  if (auto s = need(data && out, "mit_matrix_create")) return s;
  return guarded([&] {
    if (rows < 1 || cols < 1)
      raise(Errc::ShapeMismatch, "matrix must be at least 1x1");
    Eigen::MatrixXd m =
        Eigen::Map<const Eigen::MatrixXd>(data, rows, cols);
    if (!m.allFinite()) raise(Errc::ParseError, "non-finite entries");
    *out = new mit_matrix{std::move(m)};
    return MIT_OK;
  });
}

mit_status mit_matrix_from_csv(const char* path, mit_matrix** out) {
  if (auto s = need(path && out, "mit_matrix_from_csv")) return s;
  return guarded([&] {
    *out = new mit_matrix{load_csv_matrix(path)};
    return MIT_OK;
  });
}

int mit_matrix_rows(const mit_matrix* m) {
  return m ? static_cast<int>(m->data.rows()) : 0;
}

int mit_matrix_cols(const mit_matrix* m) {
  return m ? static_cast<int>(m->data.cols()) : 0;
}

mit_status mit_matrix_get(const mit_matrix* m, int row, int col, double* out) {
  if (auto s = need(m && out, "mit_matrix_get")) return s;
  if (row < 0 || col < 0 || row >= m->data.rows() || col >= m->data.cols()) {
    t_last_error = "index out of range";
    return MIT_ERR_USAGE;
  }
  *out = m->data(row, col);
  return MIT_OK;
}

void mit_matrix_free(mit_matrix* m) { delete m; }

mit_status mit_kernel_covariance(const mit_matrix* z, mit_kernel** out) {
  if (auto s = need(z && out, "mit_kernel_covariance")) return s;
  return guarded([&] {
    *out = new mit_kernel{covariance_kernel(FeatureMatrix(z->data))};
    return MIT_OK;
  });
}

mit_status mit_kernel_gram(const mit_matrix* z, mit_kernel** out) {
  if (auto s = need(z && out, "mit_kernel_gram")) return s;
  return guarded([&] {
    *out = new mit_kernel{gram_kernel(FeatureMatrix(z->data))};
    return MIT_OK;
  });
}

mit_status mit_kernel_from_matrix(const mit_matrix* k, mit_kernel** out) {
  if (auto s = need(k && out, "mit_kernel_from_matrix")) return s;
  return guarded([&] {
    *out = new mit_kernel{psd_sanitize(k->data)};
    return MIT_OK;
  });
}

mit_status mit_kernel_hadamard(const mit_kernel* k1, const mit_kernel* k2,
                               mit_kernel** out) {
  if (auto s = need(k1 && k2 && out, "mit_kernel_hadamard")) return s;
  return guarded([&] {
    *out = new mit_kernel{hadamard(k1->kernel, k2->kernel)};
    return MIT_OK;
  });
}

int mit_kernel_size(const mit_kernel* k) {
  return k ? static_cast<int>(k->kernel.size()) : 0;
}

mit_status mit_kernel_get(const mit_kernel* k, int row, int col, double* out) {
  if (auto s = need(k && out, "mit_kernel_get")) return s;
  if (row < 0 || col < 0 || row >= k->kernel.size() || col >= k->kernel.size()) {
    t_last_error = "index out of range";
    return MIT_ERR_USAGE;
  }
  *out = k->kernel.data()(row, col);
  return MIT_OK;
}

mit_status mit_kernel_eigenvalues(const mit_kernel* k, double* out) {
  if (auto s = need(k && out, "mit_kernel_eigenvalues")) return s;
  const Eigen::VectorXd& ev = k->kernel.spectrum().eigenvalues;
  for (Eigen::Index i = 0; i < ev.size(); ++i) out[i] = ev[i];
  return MIT_OK;
}

void mit_kernel_free(mit_kernel* k) { delete k; }

mit_status mit_entropy(const mit_kernel* k, double alpha, double* out) {
  if (auto s = need(k && out, "mit_entropy")) return s;
  return guarded([&] {
    *out = renyi_entropy(k->kernel, alpha).value;
    return MIT_OK;
  });
}

mit_status mit_mutual_information(const mit_kernel* k1, const mit_kernel* k2,
                                  double alpha, double* out) {
  if (auto s = need(k1 && k2 && out, "mit_mutual_information")) return s;
  return guarded([&] {
    *out = mutual_information(k1->kernel, k2->kernel, alpha).value;
    return MIT_OK;
  });
}

mit_status mit_joint_entropy(const mit_kernel* k1, const mit_kernel* k2,
                             double alpha, double* out) {
  if (auto s = need(k1 && k2 && out, "mit_joint_entropy")) return s;
  return guarded([&] {
    *out = joint_entropy(k1->kernel, k2->kernel, alpha).value;
    return MIT_OK;
  });
}

mit_status mit_matrix_kl(const mit_kernel* k1, const mit_matrix* k2,
                         double* out) {
  if (auto s = need(k1 && k2 && out, "mit_matrix_kl")) return s;
  return guarded([&] {
    *out = matrix_kl(k1->kernel, k2->data).value;
    return MIT_OK;
  });
}

mit_status mit_matrix_js(const mit_kernel* k1, const mit_kernel* k2,
                         double* out) {
  if (auto s = need(k1 && k2 && out, "mit_matrix_js")) return s;
  return guarded([&] {
    *out = matrix_js(k1->kernel, k2->kernel).value;
    return MIT_OK;
  });
}

mit_status mit_eigen_js(const mit_kernel* k1, const mit_kernel* k2,
                        double* out) {
  if (auto s = need(k1 && k2 && out, "mit_eigen_js")) return s;
  return guarded([&] {
    *out = eigen_js(k1->kernel, k2->kernel).value;
    return MIT_OK;
  });
}

mit_status mit_tcr_kernel(const mit_kernel* k, double mu, double* out) {
  if (auto s = need(k && out, "mit_tcr_kernel")) return s;
  return guarded([&] {
    *out = tcr(k->kernel, mu).value;
    return MIT_OK;
  });
}

mit_status mit_tcr_features(const mit_matrix* z, double mu, double* out) {
  if (auto s = need(z && out, "mit_tcr_features")) return s;
  return guarded([&] {
    *out = tcr(FeatureMatrix(z->data), mu).value;
    return MIT_OK;
  });
}

mit_status mit_effective_rank(const mit_matrix* a, double* out) {
  if (auto s = need(a && out, "mit_effective_rank")) return s;
  return guarded([&] {
    *out = effective_rank(a->data).value;
    return MIT_OK;
  });
}

mit_status mit_measure_report(const mit_matrix* a, const char* a_name,
                              const mit_matrix* b, const char* b_name,
                              mit_kernel_kind kind, const double* alphas,
                              int n_alphas, const double* mus, int n_mus,
                              char** json_out) {
  if (auto s = need(a && json_out, "mit_measure_report")) return s;
  return guarded([&] {
    std::vector<std::string> names{std::string(a_name ? a_name : "input1")};
    std::vector<FeatureMatrix> inputs;
    inputs.emplace_back(a->data);
    if (b) {
      names.emplace_back(b_name ? b_name : "input2");
      inputs.emplace_back(b->data);
    }
    std::vector<double> av(alphas, alphas + (alphas ? n_alphas : 0));
    std::vector<double> mv(mus, mus + (mus ? n_mus : 0));
    if (av.empty()) av.push_back(1.0);
    if (mv.empty()) mv.push_back(1.0);
    *json_out = copy_string(
        measure_report_json(names, inputs, to_kind(kind), av, mv));
    return MIT_OK;
  });
}

mit_status mit_config_create(mit_config** out) {
  if (auto s = need(out != nullptr, "mit_config_create")) return s;
  *out = new mit_config;
  return MIT_OK;
}

mit_status mit_config_load(const char* path, mit_config** out) {
  if (auto s = need(path && out, "mit_config_load")) return s;
  return guarded([&] {
    auto kv = load_kv_file(path);
    config_from_kv(kv);  // validate now so errors carry the field path
    *out = new mit_config{std::move(kv)};
    return MIT_OK;
  });
}

mit_status mit_config_set(mit_config* cfg, const char* key, const char* value) {
  if (auto s = need(cfg && key && value, "mit_config_set")) return s;
  return guarded([&] {
    auto probe = cfg->kv;
    probe[key] = value;
    config_from_kv(probe);  // reject unknown keys/bad values immediately
    cfg->kv = std::move(probe);
    return MIT_OK;
  });
}

mit_status mit_config_json(const mit_config* cfg, char** json_out) {
  if (auto s = need(cfg && json_out, "mit_config_json")) return s;
  return guarded([&] {
    *json_out = copy_string(config_json(resolve_config(cfg)));
    return MIT_OK;
  });
}

void mit_config_free(mit_config* cfg) { delete cfg; }

mit_status mit_train(const mit_config* cfg, const char* run_dir,
                     char** summary_json_out) {
  if (auto s = need(cfg && run_dir, "mit_train")) return s;
  return guarded([&] {
    return run_training(resolve_config(cfg), run_dir, summary_json_out);
  });
}

mit_status mit_mu_sweep(const mit_config* cfg, const double* mus, int n_mus,
                        const char* run_dir, char** table_tsv_out) {
  if (auto s = need(cfg && mus && run_dir, "mit_mu_sweep")) return s;
  return guarded([&] {
    namespace fs = std::filesystem;
    if (n_mus < 1) raise(Errc::BadMu, "sweep needs at least one value");
    const auto t0 = std::chrono::steady_clock::now();
    const SandboxConfig base = resolve_config(cfg);
    const std::vector<double> mu_list(mus, mus + n_mus);
    const auto rows = mu_sweep(base, mu_list);
    const std::string table = mu_sweep_tsv(rows);

    fs::create_directories(run_dir);
    const std::string table_path = (fs::path(run_dir) / "mu_sweep.tsv").string();
    {
      std::ofstream out(table_path);
      if (!out) raise(Errc::ParseError, table_path + ": cannot write");
      out << table;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_manifest(run_dir, "sweep", base, {table_path}, seconds);
    if (table_tsv_out) *table_tsv_out = copy_string(table);
    return MIT_OK;
  });
}

mit_status mit_verify(const int* sizes, int n_sizes, int trials, uint64_t seed,
                      int as_json, char** report_out, int* all_pass_out) {
  return guarded([&] {
    VerifyOptions opts;
    if (sizes && n_sizes > 0) opts.sizes.assign(sizes, sizes + n_sizes);
    for (int n : opts.sizes)
      if (n < 1) raise(Errc::BadConfig, "sizes: must be positive");
    if (trials > 0) opts.trials = trials;
    opts.seed = seed;
    const auto results = run_property_suite(opts);
    if (report_out)
      *report_out = copy_string(as_json ? verify_report_json(results)
                                        : verify_report_text(results));
    const bool ok = all_pass(results);
    if (all_pass_out) *all_pass_out = ok ? 1 : 0;
    if (!ok) {
      t_last_error = "property violations detected";
      return MIT_ERR_VERIFY;
    }
    return MIT_OK;
  });
}

mit_status mit_trajectory_scan(const char* run_dir, mit_kernel_kind kind,
                               double alpha, double mu, char** tsv_out) {
  if (auto s = need(run_dir && tsv_out, "mit_trajectory_scan")) return s;
  return guarded([&] {
    *tsv_out = copy_string(trajectory_tsv(run_dir, to_kind(kind), alpha, mu));
    return MIT_OK;
  });
}

}  // extern "C"
