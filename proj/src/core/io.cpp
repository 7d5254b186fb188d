#include "io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace matinfo {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

namespace {

[[noreturn]] void parse_error(const std::string& path, long line,
                              const std::string& why) {
  std::ostringstream os;
  os << path << ":" << line << ": " << why;
  raise(Errc::ParseError, os.str());
}

}  // namespace

Eigen::MatrixXd load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, path + ": cannot open");

  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // skip blank lines (trailing newline etc.)
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() &&
               (cell[used] == ' ' || cell[used] == '\t'))
          ++used;
        if (used != cell.size()) parse_error(path, lineno, "trailing junk in '" + cell + "'");
        row.push_back(v);
      } catch (const std::invalid_argument&) {
        parse_error(path, lineno, "not a number: '" + cell + "'");
      } catch (const std::out_of_range&) {
        parse_error(path, lineno, "out of range: '" + cell + "'");
      }
    }
    if (row.empty()) parse_error(path, lineno, "empty row");
    if (!rows.empty() && row.size() != rows.front().size())
      parse_error(path, lineno, "ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) raise(Errc::ParseError, path + ": empty file");

  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  if (!m.allFinite()) raise(Errc::ParseError, path + ": non-finite entries");
  return m;
}

FeatureMatrix load_feature_csv(const std::string& path) {
  return FeatureMatrix(load_csv_matrix(path));
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) raise(Errc::ParseError, path + ": cannot write");
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
      if (j + 1 < m.cols()) out << ',';
    }
    out << '\n';
  }
}

std::map<std::string, std::string> load_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::BadConfig, path + ": cannot open");
  std::map<std::string, std::string> kv;
  std::string line;
  long lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << path << ":" << lineno << ": expected key = value";
      raise(Errc::BadConfig, os.str());
    }
    kv[trim(trimmed.substr(0, eq))] = trim(trimmed.substr(eq + 1));
  }
  return kv;
}

namespace {

[[noreturn]] void bad_field(const std::string& key, const std::string& value) {
  raise(Errc::BadConfig, key + ": bad value '" + value + "'");
}

double parse_double_field(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_field(key, value);
    return v;
  } catch (const Error&) {
    throw;
  } catch (...) {
    bad_field(key, value);
  }
}

long parse_long_field(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) bad_field(key, value);
    return v;
  } catch (const Error&) {
    throw;
  } catch (...) {
    bad_field(key, value);
  }
}

bool parse_bool_field(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_field(key, value);
}

}  // namespace

SandboxConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  SandboxConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "dataset") {
      if (value == "latent_linear") cfg.dataset = DatasetKind::LatentLinear;
      else if (value == "cluster_mixture") cfg.dataset = DatasetKind::ClusterMixture;
      else bad_field(key, value);
    } else if (key == "n_samples") {
      cfg.n_samples = static_cast<int>(parse_long_field(key, value));
    } else if (key == "patch_count") {
      cfg.patch_count = static_cast<int>(parse_long_field(key, value));
    } else if (key == "patch_size") {
      cfg.patch_size = static_cast<int>(parse_long_field(key, value));
    } else if (key == "latent_dim") {
      cfg.latent_dim = static_cast<int>(parse_long_field(key, value));
    } else if (key == "clusters") {
      cfg.clusters = static_cast<int>(parse_long_field(key, value));
    } else if (key == "data_noise") {
      cfg.data_noise = parse_double_field(key, value);
    } else if (key == "cluster_spread") {
      cfg.cluster_spread = parse_double_field(key, value);
    } else if (key == "encoder") {
      if (value == "affine") cfg.encoder = EncoderKind::Affine;
      else if (value == "mlp") cfg.encoder = EncoderKind::Mlp;
      else bad_field(key, value);
    } else if (key == "hidden_dim") {
      cfg.hidden_dim = static_cast<int>(parse_long_field(key, value));
    } else if (key == "feature_dim") {
      cfg.feature_dim = static_cast<int>(parse_long_field(key, value));
    } else if (key == "loss") {
      if (value == "barlow") cfg.loss = LossFamily::BarlowTwins;
      else if (value == "spectral") cfg.loss = LossFamily::SpectralContrastive;
      else if (value == "infonce") cfg.loss = LossFamily::InfoNce;
      else if (value == "mae") cfg.loss = LossFamily::Mae;
      else if (value == "umae") cfg.loss = LossFamily::UMae;
      else if (value == "mmae") cfg.loss = LossFamily::MMae;
      else bad_field(key, value);
    } else if (key == "lambda") {
      cfg.lambda = parse_double_field(key, value);
    } else if (key == "mu") {
      cfg.mu = parse_double_field(key, value);
    } else if (key == "temperature") {
      cfg.temperature = parse_double_field(key, value);
    } else if (key == "mask_ratio") {
      cfg.mask_ratio = parse_double_field(key, value);
    } else if (key == "augmentation") {
      if (value == "noise") cfg.augmentation = AugmentationKind::AdditiveNoise;
      else if (value == "dropout") cfg.augmentation = AugmentationKind::CoordinateDropout;
      else if (value == "patch_mask") cfg.augmentation = AugmentationKind::PatchMask;
      else bad_field(key, value);
    } else if (key == "aug_noise_sigma") {
      cfg.aug_noise_sigma = parse_double_field(key, value);
    } else if (key == "aug_dropout_q") {
      cfg.aug_dropout_q = parse_double_field(key, value);
    } else if (key == "aug_mask_ratio") {
      cfg.aug_mask_ratio = parse_double_field(key, value);
    } else if (key == "learning_rate") {
      cfg.learning_rate = parse_double_field(key, value);
    } else if (key == "steps") {
      cfg.steps = parse_long_field(key, value);
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(parse_long_field(key, value));
    } else if (key == "record_every") {
      cfg.record_every = parse_long_field(key, value);
    } else if (key == "kernel") {
      if (value == "covariance") cfg.kernel = KernelKind::Covariance;
      else if (value == "gram") cfg.kernel = KernelKind::Gram;
      else bad_field(key, value);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_long_field(key, value));
    } else if (key == "store_features") {
      cfg.store_features = parse_bool_field(key, value);
    } else {
      raise(Errc::BadConfig, key + ": unknown key");
    }
  }
  validate_config(cfg);
  return cfg;
}

std::string config_json(const SandboxConfig& cfg) {
  std::ostringstream os;
  os << "{"
     << "\"dataset\":\"" << dataset_kind_str(cfg.dataset) << "\","
     << "\"n_samples\":" << cfg.n_samples << ","
     << "\"patch_count\":" << cfg.patch_count << ","
     << "\"patch_size\":" << cfg.patch_size << ","
     << "\"latent_dim\":" << cfg.latent_dim << ","
     << "\"clusters\":" << cfg.clusters << ","
     << "\"data_noise\":" << format_double(cfg.data_noise) << ","
     << "\"cluster_spread\":" << format_double(cfg.cluster_spread) << ","
     << "\"encoder\":\"" << encoder_kind_str(cfg.encoder) << "\","
     << "\"hidden_dim\":" << cfg.hidden_dim << ","
     << "\"feature_dim\":" << cfg.feature_dim << ","
     << "\"loss\":\"" << loss_family_str(cfg.loss) << "\","
     << "\"lambda\":" << format_double(cfg.lambda) << ","
     << "\"mu\":" << format_double(cfg.mu) << ","
     << "\"temperature\":" << format_double(cfg.temperature) << ","
     << "\"mask_ratio\":" << format_double(cfg.mask_ratio) << ","
     << "\"augmentation\":\"" << augmentation_kind_str(cfg.augmentation) << "\","
     << "\"aug_noise_sigma\":" << format_double(cfg.aug_noise_sigma) << ","
     << "\"aug_dropout_q\":" << format_double(cfg.aug_dropout_q) << ","
     << "\"aug_mask_ratio\":" << format_double(cfg.aug_mask_ratio) << ","
     << "\"learning_rate\":" << format_double(cfg.learning_rate) << ","
     << "\"steps\":" << cfg.steps << ","
     << "\"batch_size\":" << cfg.batch_size << ","
     << "\"record_every\":" << cfg.record_every << ","
     << "\"kernel\":\"" << kernel_kind_str(cfg.kernel) << "\","
     << "\"seed\":" << cfg.seed << ","
     << "\"store_features\":" << (cfg.store_features ? "true" : "false")
     << "}";
  return os.str();
}

std::string measure_value_json(const MeasureValue& m) {
  std::ostringstream os;
  os << "{\"name\":\"" << measure_name_str(m.name) << "\"";
  if (m.alpha) os << ",\"alpha\":" << format_double(*m.alpha);
  if (m.mu) os << ",\"mu\":" << format_double(*m.mu);
  os << ",\"value\":" << format_double(m.value) << "}";
  return os.str();
}

namespace {

KernelMatrix build_kernel_for_report(const FeatureMatrix& f, KernelKind kind) {
  return kind == KernelKind::Covariance ? covariance_kernel(f) : gram_kernel(f);
}

std::string measure_list_json(const std::vector<MeasureValue>& ms) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (i) os << ",";
    os << measure_value_json(ms[i]);
  }
  os << "]";
  return os.str();
}

std::vector<MeasureValue> single_input_measures(const KernelMatrix& k,
                                                const std::vector<double>& alphas,
                                                const std::vector<double>& mus) {
  std::vector<MeasureValue> ms;
  for (double a : alphas) ms.push_back(renyi_entropy(k, a));
  for (double mu : mus) ms.push_back(tcr(k, mu));
  ms.push_back(effective_rank(k.data()));
  return ms;
}

}  // namespace

std::string measure_report_json(const std::vector<std::string>& names,
                                const std::vector<FeatureMatrix>& inputs,
                                KernelKind kind,
                                const std::vector<double>& alphas,
                                const std::vector<double>& mus) {
  if (inputs.empty() || inputs.size() > 2)
    raise(Errc::ShapeMismatch, "measure report expects one or two inputs");

  std::vector<KernelMatrix> kernels;
  kernels.reserve(inputs.size());
  for (const auto& f : inputs) kernels.push_back(build_kernel_for_report(f, kind));

  std::ostringstream os;
  os << "{\"inputs\":[";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) os << ",";
    os << "\"" << json_escape(names[i]) << "\"";
  }
  os << "],\"kernel\":\"" << kernel_kind_str(kind) << "\",\"n\":"
     << kernels.front().size() << ",";

  if (kernels.size() == 1) {
    os << "\"measures\":"
       << measure_list_json(single_input_measures(kernels[0], alphas, mus));
  } else {
    if (kernels[0].size() != kernels[1].size())
      raise(Errc::SizeMismatch, "inputs yield kernels of different sizes");
    std::vector<MeasureValue> pair;
    for (double a : alphas) {
      pair.push_back(mutual_information(kernels[0], kernels[1], a));
      pair.push_back(joint_entropy(kernels[0], kernels[1], a));
    }
    pair.push_back(matrix_js(kernels[0], kernels[1]));
    pair.push_back(eigen_js(kernels[0], kernels[1]));
    os << "\"input1\":"
       << measure_list_json(single_input_measures(kernels[0], alphas, mus)) << ","
       << "\"input2\":"
       << measure_list_json(single_input_measures(kernels[1], alphas, mus)) << ","
       << "\"pair\":" << measure_list_json(pair);
  }
  os << "}";
  return os.str();
}

std::string train_record_json(const TrainRecord& rec) {
  std::ostringstream os;
  os << "{\"step\":" << rec.step << ",\"loss\":{\"total\":"
     << format_double(rec.loss.total) << ",\"terms\":{";
  bool first = true;
  for (const auto& [name, value] : rec.loss.terms) {
    if (!first) os << ",";
    first = false;
    os << "\"" << json_escape(name) << "\":" << format_double(value);
  }
  os << "}},\"measures\":[";
  for (std::size_t i = 0; i < rec.measures.size(); ++i) {
    if (i) os << ",";
    os << measure_value_json(rec.measures[i]);
  }
  os << "]}";
  return os.str();
}

void write_trajectory_jsonl(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) raise(Errc::ParseError, path + ": cannot write");
  for (const auto& rec : traj.records) out << train_record_json(rec) << '\n';
}

void dump_trajectory_features(const std::string& run_dir, const Trajectory& traj) {
  const bool two_branch =
      !traj.records.empty() && traj.records.front().z2.has_value();
  const fs::path b1 = fs::path(run_dir) / "branch1";
  fs::create_directories(b1);
  fs::path b2;
  if (two_branch) {
    b2 = fs::path(run_dir) / "branch2";
    fs::create_directories(b2);
  }
  for (const auto& rec : traj.records) {
    if (!rec.z1) continue;
    const std::string name = "step_" + std::to_string(rec.step) + ".csv";
    write_csv_matrix((b1 / name).string(), *rec.z1);
    if (two_branch && rec.z2) write_csv_matrix((b2 / name).string(), *rec.z2);
  }
}

std::string train_summary_json(const Trajectory& traj, const SandboxConfig& cfg) {
  const TrainRecord& last = traj.records.back();
  std::ostringstream os;
  os << "{\"loss\":\"" << loss_family_str(cfg.loss) << "\",\"steps\":"
     << cfg.steps << ",\"records\":" << traj.records.size()
     << ",\"diverged\":" << (traj.diverged ? "true" : "false")
     << ",\"final_step\":" << last.step
     << ",\"final\":" << train_record_json(last);
  if (!traj.diverged && traj.final_features.size() > 0) {
    const FeatureMatrix f(traj.final_features, true);
    os << ",\"final_erank_gram\":"
       << format_double(effective_rank(gram_kernel(f).data()).value)
       << ",\"probe_accuracy\":"
       << format_double(probe_split_accuracy(traj.final_features, traj.labels));
  }
  os << "}";
  return os.str();
}

namespace {

// step_<k>.csv -> k, or -1 when the name does not match.
long checkpoint_step(const std::string& filename) {
  constexpr const char* prefix = "step_";
  constexpr const char* suffix = ".csv";
  if (filename.size() < 10) return -1;
  if (filename.rfind(prefix, 0) != 0) return -1;
  if (filename.substr(filename.size() - 4) != suffix) return -1;
  const std::string digits = filename.substr(5, filename.size() - 9);
  if (digits.empty()) return -1;
  for (char c : digits)
    if (!std::isdigit(static_cast<unsigned char>(c))) return -1;
  return std::stol(digits);
}

std::map<long, std::string> scan_checkpoints(const fs::path& dir) {
  std::map<long, std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const long step = checkpoint_step(entry.path().filename().string());
    if (step >= 0) out[step] = entry.path().string();
  }
  return out;
}

void tsv_row(std::ostringstream& os, long step, const std::string& measure,
             double value) {
  os << step << '\t' << measure << '\t' << format_double(value) << '\n';
}

}  // namespace

std::string trajectory_tsv(const std::string& run_dir, KernelKind kind,
                           double alpha, double mu) {
  const fs::path root(run_dir);
  if (!fs::is_directory(root))
    raise(Errc::EmptyDirectory, run_dir + ": not a directory");

  const auto b1 = scan_checkpoints(root / "branch1");
  const auto b2 = scan_checkpoints(root / "branch2");
  const bool paired = !b1.empty() && !b2.empty();

  std::ostringstream os;
  os << "step\tmeasure\tvalue\n";
  Eigen::Index expect_rows = -1, expect_cols = -1;
  auto load_checked = [&](const std::string& path) {
    FeatureMatrix f = load_feature_csv(path);
    if (expect_rows < 0) {
      expect_rows = f.dim();
      expect_cols = f.batch();
    } else if (f.dim() != expect_rows || f.batch() != expect_cols) {
      raise(Errc::MixedShapes, path + ": checkpoint shape differs");
    }
    return f;
  };

  if (paired) {
    if (b1.size() != b2.size())
      raise(Errc::MixedShapes, "branch1/branch2 checkpoint sets differ");
    for (const auto& [step, path1] : b1) {
      const auto it = b2.find(step);
      if (it == b2.end())
        raise(Errc::MixedShapes, "branch2 missing step " + std::to_string(step));
      const FeatureMatrix f1 = load_checked(path1);
      const FeatureMatrix f2 = load_checked(it->second);
      const KernelMatrix k1 = build_kernel_for_report(f1, kind);
      const KernelMatrix k2 = build_kernel_for_report(f2, kind);
      const std::string ent = measure_name_str(renyi_entropy(k1, alpha).name);
      tsv_row(os, step, ent + "_branch1", renyi_entropy(k1, alpha).value);
      tsv_row(os, step, ent + "_branch2", renyi_entropy(k2, alpha).value);
      tsv_row(os, step, "mutual_information",
              mutual_information(k1, k2, alpha).value);
      tsv_row(os, step, "joint_entropy", joint_entropy(k1, k2, alpha).value);
      tsv_row(os, step, "matrix_js", matrix_js(k1, k2).value);
      tsv_row(os, step, "eigen_js", eigen_js(k1, k2).value);
      tsv_row(os, step, "effective_rank_branch1",
              effective_rank(k1.data()).value);
      tsv_row(os, step, "effective_rank_branch2",
              effective_rank(k2.data()).value);
      tsv_row(os, step, "tcr_branch1", tcr(k1, mu).value);
      tsv_row(os, step, "tcr_branch2", tcr(k2, mu).value);
    }
  } else {
    // single-branch: a lone branch subdirectory or flat step_<k>.csv dumps
    const auto flat =
        !b1.empty() ? b1 : (!b2.empty() ? b2 : scan_checkpoints(root));
    if (flat.empty())
      raise(Errc::EmptyDirectory, run_dir + ": no step_<k>.csv checkpoints");
    for (const auto& [step, path] : flat) {
      const FeatureMatrix f = load_checked(path);
      const KernelMatrix k = build_kernel_for_report(f, kind);
      const MeasureValue h = renyi_entropy(k, alpha);
      tsv_row(os, step, measure_name_str(h.name), h.value);
      tsv_row(os, step, "effective_rank", effective_rank(k.data()).value);
      tsv_row(os, step, "tcr", tcr(k, mu).value);
    }
  }
  return os.str();
}

std::string mu_sweep_tsv(const std::vector<MuSweepRow>& rows) {
  std::ostringstream os;
  os << "mu\tfinal_recon\tfinal_tcr\tfinal_erank\tprobe_accuracy\n";
  for (const auto& r : rows) {
    os << format_double(r.mu) << '\t' << format_double(r.final_recon) << '\t'
       << format_double(r.final_tcr) << '\t' << format_double(r.final_erank)
       << '\t' << format_double(r.probe_accuracy) << '\n';
  }
  return os.str();
}

std::string verify_report_json(const std::vector<PropertyResult>& results) {
  std::ostringstream os;
  os << "{\"pass\":" << (all_pass(results) ? "true" : "false")
     << ",\"properties\":[";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const PropertyResult& r = results[i];
    if (i) os << ",";
    os << "{\"name\":\"" << json_escape(r.name) << "\",\"trials\":" << r.trials
       << ",\"max_violation\":" << format_double(r.max_violation)
       << ",\"tolerance\":" << format_double(r.tolerance)
       << ",\"pass\":" << (r.pass ? "true" : "false") << ",\"note\":\""
       << json_escape(r.note) << "\"}";
  }
  os << "]}";
  return os.str();
}

std::string verify_report_text(const std::vector<PropertyResult>& results) {
  std::ostringstream os;
  for (const PropertyResult& r : results) {
    os << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  trials="
       << r.trials << "  max_violation=" << format_double(r.max_violation)
       << "  tolerance=" << format_double(r.tolerance) << '\n';
  }
  os << (all_pass(results) ? "all properties passed" : "PROPERTY FAILURES")
     << '\n';
  return os.str();
}

void write_manifest(const std::string& run_dir, const std::string& command,
                    const SandboxConfig& cfg,
                    const std::vector<std::string>& outputs,
                    double duration_seconds) {
  std::ostringstream os;
  os << "{\"command\":\"" << json_escape(command) << "\",\"tool_version\":\""
     << kToolVersion << "\",\"seed\":" << cfg.seed
     << ",\"config\":" << config_json(cfg) << ",\"outputs\":[";
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (i) os << ",";
    os << "\"" << json_escape(outputs[i]) << "\"";
  }
  os << "],\"duration_seconds\":" << format_double(duration_seconds) << "}";

  const fs::path dir(run_dir);
  fs::create_directories(dir);
  const fs::path tmp = dir / ".manifest.json.tmp";
  const fs::path final_path = dir / "manifest.json";
  {
    std::ofstream out(tmp);
    if (!out) raise(Errc::ParseError, tmp.string() + ": cannot write");
    out << os.str() << '\n';
  }
  fs::rename(tmp, final_path);
}

}  // namespace matinfo
