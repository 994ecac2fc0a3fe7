#pragma once

#include "radego/simulation.hpp"
#include "radego/types.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace radego {

struct PoseError {
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
  double rotation = 0.0;  // radians, wrapped
};

PoseError pose_error(const MotionState& estimate, const MotionState& truth);

struct Rmse {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
};

Rmse rmse(const std::vector<PoseError>& errors);

/// (x_hat - x)^T Sigma^{-1} (x_hat - x) / d. Throws NumericalError when the
/// covariance is not positive definite.
double nees(const MotionState& estimate, const MotionState& truth);

struct AneesResult {
  double anees = 0.0;
  /// z-scores of the mean and the variance of d * NEES against chi^2_d.
  double z_mean = 0.0;
  double z_variance = 0.0;
  /// Bonferroni-combined two-sided p-value of both moment tests.
  double p_value = 1.0;
  bool chi2_pass = false;
  std::size_t samples = 0;
};

/// Needs at least 30 samples; `alpha` is the overall significance level.
AneesResult anees(const std::vector<double>& nees_samples, int dim, double alpha = 0.01);

double bhattacharyya(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                     const Eigen::MatrixXd& cov2);

struct CorrespondenceClassification {
  /// For each current target: matched previous index, or -1.
  std::vector<int> match;
  int correspondences = 0;
  int cur_outliers = 0;
  int prev_outliers = 0;
};

/// Nearest previous target by Bhattacharyya distance after moving `cur` with
/// `truth`; accepted when the distance is below `threshold`.
CorrespondenceClassification classify_correspondences(const Scan& prev, const Scan& cur, const MotionState& truth,
                                                      double threshold = 1.0);

struct EvaluationReport {
  std::string method;
  std::string dataset;
  double rmse_translation = 0.0;
  double rmse_rotation = 0.0;
  double anees = 0.0;
  std::vector<double> nees_samples;
  bool chi2_pass = false;
  double chi2_p_value = 0.0;
  double avg_iterations = 0.0;
  /// NaN when timing was not recorded.
  double avg_runtime_ms = 0.0;
  std::vector<CorrespondenceCounts> correspondence_stats;
  int n_runs = 0;
  int n_failures = 0;
};

/// Aggregates every result of `method`. Runs that threw, did not converge or
/// lack a usable covariance count as failures and are left out of ANEES;
/// RMSE covers every run that produced an estimate.
EvaluationReport build_report(const std::vector<RunResult>& results, Method method, const std::string& dataset,
                              bool with_timing = true);

/// One report per scene (configuration index), dataset named "<dataset>/<scene>".
std::vector<EvaluationReport> build_scene_reports(const std::vector<RunResult>& results, Method method,
                                                  const std::string& dataset, bool with_timing = true);

struct ReportRow {
  std::string method;
  std::string dataset;
  double rmse_m = 0.0;
  double rmse_deg = 0.0;
  double anees = 0.0;
  bool chi2_pass = false;
  double avg_iters = 0.0;
  double avg_runtime_ms = 0.0;
  int n_runs = 0;
  int n_failures = 0;

  bool operator==(const ReportRow&) const;
};

ReportRow to_row(const EvaluationReport& r);

/// Summary CSV: a "# config_hash=" line, then the header
/// method,dataset,rmse_m,rmse_deg,anees,chi2_pass,avg_iters,avg_runtime_ms,n_runs,n_failures
void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows, const std::string& config_hash);
std::vector<ReportRow> read_report_csv(std::istream& is, std::string* config_hash = nullptr);

/// Per-run CSV for external plotting.
void write_runs_csv(std::ostream& os, const std::vector<RunResult>& results, const std::string& dataset,
                    const std::string& config_hash, bool with_timing = true);

/// Shortest decimal text that parses back to the same double; "NA" for NaN.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace radego
