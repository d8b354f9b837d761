#include "hdeid/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include "json.hpp"

#include "hdeid/errors.hpp"

namespace hdeid {

double sid(std::span<const double> e_src, std::span<const double> e_gen) {
  if (e_src.size() != e_gen.size()) throw ShapeError("sid: embedding dimensions differ");
  const double a = norm(e_src);
  const double b = norm(e_gen);
  if (a == 0.0 || b == 0.0) throw DegenerateInputError("sid: zero-norm embedding");
  const double c = std::clamp(dot(e_src, e_gen) / (a * b), -1.0, 1.0);
  return 1.0 - c;
}

double rms_deviation(std::span<const double> deltas) {
  if (deltas.empty()) throw DegenerateInputError("rms_deviation: empty list");
  double acc = 0.0;
  for (double d : deltas) acc += d * d;
  return std::sqrt(acc / static_cast<double>(deltas.size()));
}

double threshold_score(double rms, double tau) {
  if (!(tau > 0.0)) throw ConfigError("threshold_score: tau must be positive");
  if (rms < 0.0) throw ConfigError("threshold_score: rms must be non-negative");
  return std::max(0.0, 1.0 - rms / tau);
}

double hm(std::span<const double> values) {
  if (values.empty()) throw DegenerateInputError("hm: empty list");
  double acc = 0.0;
  for (double v : values) {
    if (v < 0.0) throw ConfigError("hm: negative value");
    acc += 1.0 / std::max(v, kHarmonicFloor);
  }
  return static_cast<double>(values.size()) / acc;
}

double pose_score(const PoseAngles& a, const PoseAngles& b) {
  const double d[3] = {a.pitch - b.pitch, a.yaw - b.yaw, a.roll - b.roll};
  return threshold_score(rms_deviation(d), kPoseTau);
}

double gaze_score(const GazeAngles& a, const GazeAngles& b) {
  const double d[2] = {a.pitch - b.pitch, a.yaw - b.yaw};
  return threshold_score(rms_deviation(d), kGazeTau);
}

namespace {

template <class F>
void scored(PairScores& s, std::optional<double>& field, const char* metric, F&& f) {
  try {
    field = f();
  } catch (const std::exception& e) {
    s.failures.push_back(std::string(metric) + ": " + e.what());
  }
}

}  // namespace

PairScores evaluate_pair(const ImageTensor& x, const ImageTensor& x_hat, const EvalProviders& p, std::string id) {
  PairScores s;
  s.id = std::move(id);
  scored(s, s.sid, "sid", [&] { return sid(p.recog_embed(x), p.recog_embed(x_hat)); });
  scored(s, s.detect, "detect", [&] {
    const auto d = p.detect(x_hat);
    return (static_cast<double>(d[0]) + static_cast<double>(d[1])) / 2.0;
  });
  scored(s, s.emotion, "emotion", [&] { return p.emotion(x) == p.emotion(x_hat) ? 1.0 : 0.0; });
  scored(s, s.gender, "gender", [&] { return p.gender(x) == p.gender(x_hat) ? 1.0 : 0.0; });
  scored(s, s.pose, "pose", [&] { return pose_score(p.pose(x), p.pose(x_hat)); });
  scored(s, s.gaze, "gaze", [&] { return gaze_score(p.gaze(x), p.gaze(x_hat)); });
  return s;
}

double hm_attributes(const ColumnMeans& m) {
  const double v[4] = {m.emotion, m.gender, m.pose, m.gaze};
  return hm(v);
}

double overall_score(const ColumnMeans& m) {
  const double v[3] = {m.sid, m.detect, hm_attributes(m)};
  return hm(v);
}

MetricsReport report_from_means(const ColumnMeans& means) {
  MetricsReport r;
  r.means = means;
  r.hm_attr = hm_attributes(means);
  r.hm_overall = overall_score(means);
  return r;
}

MetricsReport aggregate(std::vector<PairScores> rows) {
  if (rows.empty()) throw DegenerateInputError("aggregate: no scored pairs");
  std::array<double, 6> sums{};
  std::array<std::size_t, 6> counts{};
  for (const auto& s : rows) {
    const std::optional<double>* f[6] = {&s.sid, &s.detect, &s.emotion, &s.gender, &s.pose, &s.gaze};
    for (int i = 0; i < 6; ++i) {
      if (f[i]->has_value()) {
        sums[i] += **f[i];
        ++counts[i];
      }
    }
  }
  for (int i = 0; i < 6; ++i) {
    if (counts[i] == 0) {
      throw DegenerateInputError(std::string("aggregate: no image has a ") + kTableColumns[i] + " score");
    }
  }
  ColumnMeans m;
  double* out[6] = {&m.sid, &m.detect, &m.emotion, &m.gender, &m.pose, &m.gaze};
  for (int i = 0; i < 6; ++i) *out[i] = sums[i] / static_cast<double>(counts[i]);
  MetricsReport r = report_from_means(m);
  r.rows = std::move(rows);
  r.counts = counts;
  return r;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

std::string report_json(const MetricsReport& report, int indent) {
  nlohmann::ordered_json j;
  auto& rows = j["images"] = nlohmann::ordered_json::array();
  for (const auto& s : report.rows) {
    nlohmann::ordered_json row;
    row["id"] = s.id;
    row["sid"] = opt(s.sid);
    row["detect"] = opt(s.detect);
    row["emotion"] = opt(s.emotion);
    row["gender"] = opt(s.gender);
    row["pose"] = opt(s.pose);
    row["gaze"] = opt(s.gaze);
    row["failures"] = s.failures;
    rows.push_back(std::move(row));
  }
  const auto& m = report.means;
  auto& agg = j["aggregate"];
  agg["sid"] = m.sid;
  agg["detect"] = m.detect;
  agg["emotion"] = m.emotion;
  agg["gender"] = m.gender;
  agg["pose"] = m.pose;
  agg["gaze"] = m.gaze;
  agg["hm_attr"] = report.hm_attr;
  agg["overall"] = report.hm_overall;
  auto& counts = agg["counts"];
  const char* names[6] = {"sid", "detect", "emotion", "gender", "pose", "gaze"};
  for (int i = 0; i < 6; ++i) counts[names[i]] = report.counts[i];
  return j.dump(indent) + "\n";
}

std::string table_header_csv() {
  std::string s;
  for (const char* c : kTableColumns) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s;
}

std::string table_row_csv(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.means.sid, r.means.detect, r.means.emotion,
                r.means.gender, r.means.pose, r.means.gaze, r.hm_overall);
  return buf;
}

std::string report_csv(const MetricsReport& report) {
  return table_header_csv() + "\n" + table_row_csv(report) + "\n";
}

// --- PCA -------------------------------------------------------------------

double PcaModel::explained_ratio() const {
  double s = 0.0;
  for (double v : variances) s += v;
  return total_variance > 0.0 ? s / total_variance : 0.0;
}

std::vector<double> PcaModel::project(std::span<const double> v) const {
  if (v.size() != mean.size()) throw ShapeError("pca: vector dimension does not match the pool");
  std::vector<double> out(axes.size());
  for (std::size_t a = 0; a < axes.size(); ++a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += (v[i] - mean[i]) * axes[a][i];
    out[a] = acc;
  }
  return out;
}

std::vector<double> PcaModel::reconstruct(std::span<const double> coords) const {
  if (coords.size() != axes.size()) throw ShapeError("pca: coordinate count does not match k");
  std::vector<double> out = mean;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coords[a] * axes[a][i];
  }
  return out;
}

PcaModel pca_fit(const std::vector<std::vector<double>>& pool, std::size_t k) {
  if (k == 0) throw ConfigError("pca: k must be at least 1");
  if (pool.size() <= k) {
    throw DegenerateInputError("pca: pool of " + std::to_string(pool.size()) + " vectors is too small for k=" +
                               std::to_string(k));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(pool.size());
  const Eigen::Index d = static_cast<Eigen::Index>(pool.front().size());
  if (static_cast<Eigen::Index>(k) > d) throw DegenerateInputError("pca: k exceeds the vector dimension");

  Eigen::MatrixXd X(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(pool[r].size()) != d) throw ShapeError("pca: pool vectors differ in dimension");
    for (Eigen::Index c = 0; c < d; ++c) X(r, c) = pool[r][c];
  }
  const Eigen::RowVectorXd mu = X.colwise().mean();
  X.rowwise() -= mu;

  // Eigen-decompose whichever of X^T X and X X^T is smaller.
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X);
    values = es.eigenvalues().reverse();
    vectors = es.eigenvectors().rowwise().reverse();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * X.transpose());
    values = es.eigenvalues().reverse();
    vectors = X.transpose() * es.eigenvectors().rowwise().reverse();
  }
  const double top = std::max(values(0), 0.0);
  const double tol = top * 1e-12 * static_cast<double>(std::max(n, d));
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) > tol) ++rank;
  }
  if (top == 0.0 || rank < k) {
    throw DegenerateInputError("pca: pool has rank " + std::to_string(rank) + " < k=" + std::to_string(k));
  }

  PcaModel m;
  m.mean.assign(mu.data(), mu.data() + d);
  const double denom = static_cast<double>(n - 1);
  m.total_variance = std::max(0.0, values.sum()) / denom;
  for (std::size_t a = 0; a < k; ++a) {
    Eigen::VectorXd axis = vectors.col(static_cast<Eigen::Index>(a));
    axis.normalize();
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    m.axes.emplace_back(axis.data(), axis.data() + d);
    m.variances.push_back(values(static_cast<Eigen::Index>(a)) / denom);
  }
  return m;
}

std::vector<std::vector<double>> pca_project(const std::vector<std::vector<double>>& pool,
                                             const std::vector<std::vector<double>>& trajectories, std::size_t k) {
  const PcaModel m = pca_fit(pool, k);
  std::vector<std::vector<double>> out;
  out.reserve(trajectories.size());
  for (const auto& v : trajectories) out.push_back(m.project(v));
  return out;
}

}  // namespace hdeid
