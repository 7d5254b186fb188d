#pragma once

#include <map>
#include <string>
#include <vector>

#include "sandbox.hpp"
#include "verify.hpp"

namespace matinfo {

inline constexpr const char* kToolVersion = "0.1.0";

// Doubles in reports round to 12 significant digits so cross-command
// consistency checks compare equal strings.
std::string format_double(double v);
std::string json_escape(const std::string& s);

// CSV feature files: rows = feature dimensions, columns = samples, no header.
Eigen::MatrixXd load_csv_matrix(const std::string& path);
FeatureMatrix load_feature_csv(const std::string& path);
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m);

// key = value lines, '#' comments.
std::map<std::string, std::string> load_kv_file(const std::string& path);
SandboxConfig config_from_kv(const std::map<std::string, std::string>& kv);
std::string config_json(const SandboxConfig& cfg);

std::string measure_value_json(const MeasureValue& m);

// Measures on one or two feature files; the pair section adds mutual
// information, joint entropy and both JS divergences.
std::string measure_report_json(const std::vector<std::string>& names,
                                const std::vector<FeatureMatrix>& inputs,
                                KernelKind kind,
                                const std::vector<double>& alphas,
                                const std::vector<double>& mus);

std::string train_record_json(const TrainRecord& rec);
void write_trajectory_jsonl(const std::string& path, const Trajectory& traj);

// branch1/step_<k>.csv (+ branch2/ for Siamese runs) feature checkpoints.
void dump_trajectory_features(const std::string& run_dir, const Trajectory& traj);

std::string train_summary_json(const Trajectory& traj, const SandboxConfig& cfg);

// Scans step_<k>.csv checkpoints (paired branch subdirectories or flat
// single-branch dumps) and recomputes measures per step, ascending.
std::string trajectory_tsv(const std::string& run_dir, KernelKind kind,
                           double alpha, double mu);

std::string mu_sweep_tsv(const std::vector<MuSweepRow>& rows);

std::string verify_report_json(const std::vector<PropertyResult>& results);
std::string verify_report_text(const std::vector<PropertyResult>& results);

// Written atomically (temp file + rename) at run end.
void write_manifest(const std::string& run_dir, const std::string& command,
                    const SandboxConfig& cfg,
                    const std::vector<std::string>& outputs,
                    double duration_seconds);

}  // namespace matinfo
