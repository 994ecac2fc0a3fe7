#include "radego/evaluation.hpp"

#include "radego/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace radego {

PoseError pose_error(const MotionState& estimate, const MotionState& truth) {
  PoseError e;
  e.translation = estimate.translation - truth.translation;
  if (estimate.dof == Dof::TwoDoF && truth.dof == Dof::TwoDoF) e.translation.y() = 0.0;
  e.rotation = angle_diff(estimate.rotation, truth.rotation);
  return e;
}

Rmse rmse(const std::vector<PoseError>& errors) {
  if (errors.empty()) throw InvalidInput("rmse of an empty error set");
  double t = 0.0, r = 0.0;
  for (const auto& e : errors) {
    t += e.translation.squaredNorm();
    const double rot = wrap_angle(e.rotation);
    r += rot * rot;
  }
  const double n = static_cast<double>(errors.size());
  return {std::sqrt(t / n), std::sqrt(r / n) * 180.0 / std::numbers::pi};
}

double nees(const MotionState& estimate, const MotionState& truth) {
  if (estimate.dof != truth.dof) throw InvalidInput("nees: dof mismatch");
  const int d = estimate.dim();
  if (estimate.covariance.rows() != d || estimate.covariance.cols() != d || !estimate.covariance.allFinite())
    throw NumericalError("nees: covariance missing or non-finite");
  const PoseError pe = pose_error(estimate, truth);
  Eigen::VectorXd e(d);
  if (d == 2)
    e << pe.translation.x(), pe.rotation;
  else
    e << pe.translation.x(), pe.translation.y(), pe.rotation;
  Eigen::LLT<Eigen::MatrixXd> llt(estimate.covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("nees: covariance is not positive definite");
  return llt.matrixL().solve(e).squaredNorm() / static_cast<double>(d);
}

AneesResult anees(const std::vector<double>& nees_samples, int dim, double alpha) {
  if (nees_samples.size() < 30) throw InvalidInput("anees needs at least 30 samples");
  if (dim <= 0) throw InvalidInput("anees: dimension must be positive");
  AneesResult out;
  out.samples = nees_samples.size();
  const double n = static_cast<double>(nees_samples.size());
  const double d = dim;
  double mean = 0.0;
  for (double v : nees_samples) mean += v;
  mean /= n;
  out.anees = mean;

  // moments of d * NEES against chi^2_d: mean d, variance 2d, central fourth
  // moment 12 d^2 + 48 d
  double var = 0.0;
  for (double v : nees_samples) var += (d * v - d * mean) * (d * v - d * mean);
  var /= n - 1.0;
  out.z_mean = (d * mean - d) / std::sqrt(2.0 * d / n);
  out.z_variance = (var - 2.0 * d) / std::sqrt((8.0 * d * d + 48.0 * d) / n);
  auto two_sided = [](double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); };
  out.p_value = std::min(1.0, 2.0 * std::min(two_sided(out.z_mean), two_sided(out.z_variance)));
  out.chi2_pass = out.p_value >= alpha;
  return out;
}

double bhattacharyya(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                     const Eigen::MatrixXd& cov2) {
  const auto n = mu1.size();
  if (mu2.size() != n || cov1.rows() != n || cov2.rows() != n || cov1.cols() != n || cov2.cols() != n)
    throw InvalidInput("bhattacharyya: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> l1(cov1), l2(cov2);
  const Eigen::MatrixXd avg = 0.5 * (cov1 + cov2);
  Eigen::LLT<Eigen::MatrixXd> la(avg);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success || la.info() != Eigen::Success)
    throw NumericalError("bhattacharyya: covariance is not positive definite");
  auto log_det = [](const Eigen::LLT<Eigen::MatrixXd>& l) {
    return 2.0 * l.matrixLLT().diagonal().array().log().sum();
  };
  const double maha = la.matrixL().solve(mu1 - mu2).squaredNorm();
  return maha / 8.0 + 0.5 * (log_det(la) - 0.5 * (log_det(l1) + log_det(l2)));
}

CorrespondenceClassification classify_correspondences(const Scan& prev, const Scan& cur, const MotionState& truth,
                                                      double threshold) {
  CorrespondenceClassification out;
  out.match.assign(cur.size(), -1);
  std::vector<CartesianTarget> p;
  p.reserve(prev.size());
  for (const auto& t : prev.targets) p.push_back(to_vehicle_frame(t, prev.mount));
  const Eigen::Matrix2d rot = rotation(truth.rotation);
  const Pose2<double> pose = to_pose(truth);
  std::vector<bool> used(prev.size(), false);
  for (std::size_t i = 0; i < cur.size(); ++i) {
    CartesianTarget c = to_vehicle_frame(cur.targets[i], cur.mount);
    c.mean = pose * c.mean;
    c.covariance = rotate_covariance(rot, c.covariance);
    double best = std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d = bhattacharyya(c.mean, c.covariance, p[j].mean, p[j].covariance);
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0 && best < threshold) {
      out.match[i] = best_j;
      used[static_cast<std::size_t>(best_j)] = true;
      ++out.correspondences;
    }
  }
  out.cur_outliers = static_cast<int>(cur.size()) - out.correspondences;
  out.prev_outliers = static_cast<int>(std::count(used.begin(), used.end(), false));
  return out;
}

namespace {

EvaluationReport aggregate(const std::vector<const RunResult*>& runs, Method method, const std::string& dataset,
                           bool with_timing) {
  EvaluationReport rep;
  rep.method = to_string(method);
  rep.dataset = dataset;
  rep.n_runs = static_cast<int>(runs.size());
  std::vector<PoseError> errors;
  double iters = 0.0, runtime = 0.0;
  int dim = 0;
  for (const RunResult* r : runs) {
    rep.correspondence_stats.push_back(r->counts);
    if (r->failed) {
      ++rep.n_failures;
      continue;
    }
    errors.push_back(pose_error(r->estimate, r->truth));
    iters += r->estimate.iterations;
    runtime += r->runtime_ms;
    dim = r->estimate.dim();
    if (!r->estimate.converged || !r->estimate.covariance_valid) {
      ++rep.n_failures;
      continue;
    }
    try {
      rep.nees_samples.push_back(nees(r->estimate, r->truth));
    } catch (const NumericalError&) {
      ++rep.n_failures;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!errors.empty()) {
    const Rmse e = rmse(errors);
    rep.rmse_translation = e.translation_m;
    rep.rmse_rotation = e.rotation_deg;
    rep.avg_iterations = iters / static_cast<double>(errors.size());
    rep.avg_runtime_ms = with_timing ? runtime / static_cast<double>(errors.size()) : nan;
  } else {
    rep.rmse_translation = rep.rmse_rotation = rep.avg_iterations = nan;
    rep.avg_runtime_ms = nan;
  }
  if (rep.nees_samples.size() >= 30) {
    const AneesResult a = anees(rep.nees_samples, dim);
    rep.anees = a.anees;
    rep.chi2_pass = a.chi2_pass;
    rep.chi2_p_value = a.p_value;
  } else {
    rep.anees = nan;
    rep.chi2_pass = false;
    rep.chi2_p_value = nan;
  }
  return rep;
}

}  // namespace

EvaluationReport build_report(const std::vector<RunResult>& results, Method method, const std::string& dataset,
                              bool with_timing) {
  std::vector<const RunResult*> runs;
  for (const auto& r : results)
    if (r.method == method) runs.push_back(&r);
  if (runs.empty()) throw InvalidInput("no results for method " + to_string(method));
  return aggregate(runs, method, dataset, with_timing);
}

std::vector<EvaluationReport> build_scene_reports(const std::vector<RunResult>& results, Method method,
                                                  const std::string& dataset, bool with_timing) {
  std::map<int, std::vector<const RunResult*>> scenes;
  for (const auto& r : results)
    if (r.method == method) scenes[r.scene].push_back(&r);
  std::vector<EvaluationReport> out;
  for (const auto& [scene, runs] : scenes)
    out.push_back(aggregate(runs, method, dataset + "/" + std::to_string(scene), with_timing));
  return out;
}

bool ReportRow::operator==(const ReportRow& o) const {
  auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  return method == o.method && dataset == o.dataset && same(rmse_m, o.rmse_m) && same(rmse_deg, o.rmse_deg) &&
         same(anees, o.anees) && chi2_pass == o.chi2_pass && same(avg_iters, o.avg_iters) &&
         same(avg_runtime_ms, o.avg_runtime_ms) && n_runs == o.n_runs && n_failures == o.n_failures;
}

ReportRow to_row(const EvaluationReport& r) {
  return {r.method,     r.dataset,        r.rmse_translation, r.rmse_rotation, r.anees,
          r.chi2_pass,  r.avg_iterations, r.avg_runtime_ms,   r.n_runs,        r.n_failures};
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "NA" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InvalidInput("cannot parse number '" + s + "'");
  return v;
}

namespace {

constexpr const char* kReportHeader =
    "method,dataset,rmse_m,rmse_deg,anees,chi2_pass,avg_iters,avg_runtime_ms,n_runs,n_failures";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows, const std::string& config_hash) {
  os << "# config_hash=" << config_hash << '\n' << kReportHeader << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << r.dataset << ',' << format_double(r.rmse_m) << ',' << format_double(r.rmse_deg) << ','
       << format_double(r.anees) << ',' << (r.chi2_pass ? "true" : "false") << ',' << format_double(r.avg_iters)
       << ',' << format_double(r.avg_runtime_ms) << ',' << r.n_runs << ',' << r.n_failures << '\n';
  }
}

std::vector<ReportRow> read_report_csv(std::istream& is, std::string* config_hash) {
  std::vector<ReportRow> rows;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# config_hash=";
      if (config_hash && line.rfind(key, 0) == 0) *config_hash = line.substr(key.size());
      continue;
    }
    if (!header) {
      if (line != kReportHeader) throw InvalidInput("report csv: unexpected header on line " + std::to_string(lineno));
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 10) throw InvalidInput("report csv: expected 10 fields on line " + std::to_string(lineno));
    ReportRow r;
    r.method = f[0];
    r.dataset = f[1];
    r.rmse_m = parse_double(f[2]);
    r.rmse_deg = parse_double(f[3]);
    r.anees = parse_double(f[4]);
    if (f[5] != "true" && f[5] != "false") throw InvalidInput("report csv: chi2_pass must be true/false");
    r.chi2_pass = f[5] == "true";
    r.avg_iters = parse_double(f[6]);
    r.avg_runtime_ms = parse_double(f[7]);
    r.n_runs = std::stoi(f[8]);
    r.n_failures = std::stoi(f[9]);
    rows.push_back(r);
  }
  if (!header) throw InvalidInput("report csv: missing header");
  return rows;
}

void write_runs_csv(std::ostream& os, const std::vector<RunResult>& results, const std::string& dataset,
                    const std::string& config_hash, bool with_timing) {
  os << "# config_hash=" << config_hash << '\n'
     << "method,dataset,scene,run,truth_x,truth_y,truth_rot,est_x,est_y,est_rot,covariance,nees,iterations,"
        "converged,failed,runtime_ms,correspondences,cur_outliers,prev_outliers\n";
  for (const auto& r : results) {
    std::string cov;
    for (Eigen::Index i = 0; i < r.estimate.covariance.size(); ++i) {
      if (i) cov += ';';
      cov += format_double(r.estimate.covariance(i));
    }
    double n = std::numeric_limits<double>::quiet_NaN();
    if (!r.failed && r.estimate.covariance_valid) {
      try {
        n = nees(r.estimate, r.truth);
      } catch (const NumericalError&) {
      }
    }
    os << to_string(r.method) << ',' << dataset << ',' << r.scene << ',' << r.run << ','
       << format_double(r.truth.translation.x()) << ',' << format_double(r.truth.translation.y()) << ','
       << format_double(r.truth.rotation) << ',' << format_double(r.estimate.translation.x()) << ','
       << format_double(r.estimate.translation.y()) << ',' << format_double(r.estimate.rotation) << ',' << cov << ','
       << format_double(n) << ',' << r.estimate.iterations << ',' << (r.estimate.converged ? "true" : "false") << ','
       << (r.failed ? "true" : "false") << ','
       << format_double(with_timing ? r.runtime_ms : std::numeric_limits<double>::quiet_NaN()) << ','
       << r.counts.correspondences << ',' << r.counts.cur_outliers << ',' << r.counts.prev_outliers << '\n';
  }
}

}  // namespace radego
