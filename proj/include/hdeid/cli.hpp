#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hdeid/config.hpp"
#include "hdeid/evaluation.hpp"

namespace hdeid {

// PNG files named on the command line; directories contribute their *.png
// entries in name order.
std::vector<std::string> collect_images(const std::vector<std::string>& paths);

/// Runs optimize on every input, writing <stem>.png, <stem>.trajectory.csv
/// (plus snapshots and events when present) and config.resolved into
/// config.output. Returns 0 only if every image succeeded.
int cmd_deidentify(const RunConfig& config, const std::vector<std::string>& inputs, std::ostream& out,
                   std::ostream& err);

struct EvaluateRequest {
  std::string originals;  // directory
  std::string edited;     // directory, paired by filename
  std::string report;     // JSON path; empty -> <output>/report.json
  std::string csv;        // table path; empty -> <output>/report.csv
};

int cmd_evaluate(const RunConfig& config, const EvaluateRequest& request, std::ostream& out, std::ostream& err);

// Aggregate row from six already-averaged column values, in table order.
int cmd_report_only(const std::vector<double>& columns, std::ostream& out, std::ostream& err);

// Sweepable parameter names and the config keys they set.
const std::vector<std::pair<std::string, std::string>>& ablation_parameters();

int cmd_ablate(const RunConfig& config, const std::string& parameter, const std::vector<std::string>& values,
               const std::vector<std::string>& inputs, std::ostream& out, std::ostream& err);

/// Fits a PCA pool over every snapshot in `files` and writes the projected
/// coordinates (trajectory, step, pc1..pck) to `destination`.
int cmd_trajectory(const RunConfig& config, const std::vector<std::string>& files, const std::string& destination,
                   std::ostream& out, std::ostream& err);

// Entry point used by the hdeid binary.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hdeid
