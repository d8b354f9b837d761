#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdeid/providers.hpp"
#include "hdeid/tensor.hpp"

namespace hdeid {

// 1 - cos(e_src, e_gen), in [0, 2].
double sid(std::span<const double> e_src, std::span<const double> e_gen);
inline double sid(const Tensor& a, const Tensor& b) { return sid(a.flat(), b.flat()); }

double rms_deviation(std::span<const double> deltas);
// max(0, 1 - rms / tau)
double threshold_score(double rms, double tau);

inline constexpr double kHarmonicFloor = 1e-8;
// Harmonic mean with entries floored at kHarmonicFloor.
double hm(std::span<const double> values);

inline constexpr double kPoseTau = 5.0;
inline constexpr double kGazeTau = 15.0;

/// Per-image scores; a metric whose provider failed is left empty.
struct PairScores {
  std::string id;
  std::optional<double> sid, detect, emotion, gender, pose, gaze;
  std::vector<std::string> failures;  // "metric: message"
};

double pose_score(const PoseAngles& a, const PoseAngles& b);
double gaze_score(const GazeAngles& a, const GazeAngles& b);

PairScores evaluate_pair(const ImageTensor& x, const ImageTensor& x_hat, const EvalProviders& providers,
                         std::string id = {});

// Column order of the results table.
inline constexpr std::array<const char*, 7> kTableColumns = {"SID", "Detect", "Emotion", "Gender",
                                                             "Pose",  "Gaze",   "Overall"};

struct ColumnMeans {
  double sid = 0, detect = 0, emotion = 0, gender = 0, pose = 0, gaze = 0;
};

struct MetricsReport {
  std::vector<PairScores> rows;
  ColumnMeans means;
  std::array<std::size_t, 6> counts{};  // scored images per column
  double hm_attr = 0.0;
  double hm_overall = 0.0;
};

// hm over the four attribute means, then over (sid, detect, hm_attr).
double hm_attributes(const ColumnMeans& m);
double overall_score(const ColumnMeans& m);

MetricsReport aggregate(std::vector<PairScores> rows);
// Aggregate row only, from already-averaged columns.
MetricsReport report_from_means(const ColumnMeans& means);

std::string report_json(const MetricsReport& report, int indent = 2);
// Header line plus one line of the seven table columns.
std::string report_csv(const MetricsReport& report);
std::string table_header_csv();
std::string table_row_csv(const MetricsReport& report);

struct PcaModel {
  std::vector<double> mean;
  std::vector<std::vector<double>> axes;  // k unit vectors
  std::vector<double> variances;          // eigenvalue per axis
  double total_variance = 0.0;

  double explained_ratio() const;
  std::vector<double> project(std::span<const double> v) const;
  std::vector<double> reconstruct(std::span<const double> coords) const;
};

/// Principal axes of a pool of vectors. Each axis is signed so its
/// largest-magnitude loading is positive. Throws if the pool has fewer than
/// k + 1 vectors or rank below k.
PcaModel pca_fit(const std::vector<std::vector<double>>& pool, std::size_t k = 3);
std::vector<std::vector<double>> pca_project(const std::vector<std::vector<double>>& pool,
                                             const std::vector<std::vector<double>>& trajectories,
                                             std::size_t k = 3);

}  // namespace hdeid
