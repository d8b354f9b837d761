#include "hdeid/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "hdeid/attributes.hpp"
#include "hdeid/errors.hpp"

namespace hdeid {

void OptimizationConfig::validate(const NoiseSchedule& schedule) const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (n_opt < 1) throw ConfigError("n_opt must be at least 1");
  if (!(init_norm > 0.0)) throw ConfigError("init_norm must be positive");
  if (mode == EditMode::kLinear && !std::isfinite(lambda)) throw ConfigError("lambda must be finite");
  weights.validate();
  window.validate(schedule.total_steps());
}

EditDirection initialize_direction(const Shape& shape, double m, std::uint64_t seed) {
  if (!(m > 0.0)) throw ConfigError("init_norm must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor d(shape);
  for (double& v : d.flat()) v = normal(rng);
  d *= m / norm(d);
  return EditDirection(std::move(d));
}

namespace {

constexpr double kRerandomizeNorm = 1e-4;
constexpr int kMaxRerandomize = 8;

std::string breakdown(const LossBreakdown& l) {
  std::ostringstream os;
  os.precision(10);
  os << "total=" << l.total << " id=" << l.id << " attr=" << l.attr << " mask=" << l.mask;
  return os.str();
}

}  // namespace

OptimizationResult optimize(const ImageTensor& x, const OptimizationConfig& config, const NoiseSchedule& schedule,
                            const DenoiserBackend& backend, const OptimizationProviders& providers) {
  config.validate(schedule);
  const EditSpec spec = config.edit_spec();

  // Initialization: everything that depends only on the source image.
  const LatentState state = ddim_invert(x, schedule, config.window, backend, config.inversion);
  SourceFeatures source = extract_source_features(x, providers);
  source.attributes = set_attribute_targets(source.attributes, config.attribute_targets);

  OptimizationResult result;
  EditDirection dh = config.initial_direction ? *config.initial_direction
                                              : initialize_direction(backend.h_shape(), config.init_norm, config.seed);
  if (dh.shape() != backend.h_shape()) {
    throw ShapeError("initial direction shape " + shape_string(dh.shape()) + " does not match backend h shape " +
                     shape_string(backend.h_shape()));
  }
  std::mt19937_64 perturb_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  LossBreakdown last{};
  auto loss_fn = [&](const ImageTensor& x_hat) {
    TotalLoss tl = total_loss(source, x_hat, providers, config.weights, config.attribute_variant);
    last = tl.terms;
    return ImageLoss{tl.terms.total, std::move(tl.grad)};
  };

  for (int step = 0; step < config.n_opt; ++step) {
    DirectionGradient g;
    for (int attempt = 0;; ++attempt) {
      try {
        g = compute_gradient(state, dh, spec, config.window, schedule, backend, loss_fn, config.gradient);
        break;
      } catch (const DegenerateDirectionError& e) {
        if (attempt == kMaxRerandomize) throw;
        const EditDirection r = initialize_direction(dh.shape(), kRerandomizeNorm, perturb_rng());
        dh += r;
        result.log.events.push_back("step " + std::to_string(step) + ": direction parallel to latent (" + e.what() +
                                    "), added random component of norm 1e-4");
      } catch (const NumericalError& e) {
        throw NumericalError("optimization step " + std::to_string(step) + ": " + e.what() +
                                 " (last losses: " + breakdown(last) + ")",
                             step);
      }
    }
    if (!std::isfinite(last.total) || !g.grad.all_finite()) {
      throw NumericalError("optimization step " + std::to_string(step) + ": non-finite loss or gradient (" +
                               breakdown(last) + ")",
                           step);
    }

    TrajectoryRecord rec;
    rec.step = step;
    rec.loss = last;
    rec.norm = norm(dh);
    if (config.record_snapshots) rec.z_hat = apply_edit(state.anchor(), dh, spec).values();
    result.log.records.push_back(std::move(rec));

    result.x_hat = std::move(g.x_hat);
    axpy(-config.lr, g.grad, dh);
  }
  result.dh_final = std::move(dh);
  return result;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log) {
  out << "step,total,id,attr,mask,norm\n";
  char buf[256];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.loss.total, r.loss.id,
                  r.loss.attr, r.loss.mask, r.norm);
    out << buf;
  }
}

TrajectoryLog read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "step,total,id,attr,mask,norm") {
    throw ConfigError("trajectory log: missing or unexpected header");
  }
  TrajectoryLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TrajectoryRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &r.step, &r.loss.total, &r.loss.id, &r.loss.attr,
                    &r.loss.mask, &r.norm) != 6) {
      throw ConfigError("trajectory log: malformed record '" + line + "'");
    }
    log.records.push_back(std::move(r));
  }
  return log;
}

namespace {

constexpr char kSnapshotMagic[8] = {'H', 'D', 'S', 'N', 'A', 'P', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("snapshot file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_snapshots(const std::string& path, const std::vector<std::vector<double>>& snapshots) {
  const std::size_t dim = snapshots.empty() ? 0 : snapshots.front().size();
  for (const auto& s : snapshots) {
    if (s.size() != dim) throw ShapeError("snapshots have differing dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write snapshot file " + path);
  out.write(kSnapshotMagic, sizeof kSnapshotMagic);
  put_u64(out, snapshots.size());
  put_u64(out, dim);
  for (const auto& s : snapshots) {
    for (double v : s) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_u64(out, bits);
    }
  }
  if (!out) throw ConfigError("error writing snapshot file " + path);
}

std::vector<std::vector<double>> read_snapshots(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open snapshot file " + path);
  char magic[sizeof kSnapshotMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kSnapshotMagic, sizeof magic) != 0) {
    throw ConfigError(path + " is not a snapshot file");
  }
  const std::uint64_t count = get_u64(in);
  const std::uint64_t dim = get_u64(in);
  std::vector<std::vector<double>> out(count, std::vector<double>(dim));
  for (auto& s : out) {
    for (double& v : s) {
      const std::uint64_t bits = get_u64(in);
      std::memcpy(&v, &bits, sizeof v);
    }
  }
  return out;
}

std::vector<std::vector<double>> snapshots_of(const TrajectoryLog& log) {
  std::vector<std::vector<double>> out;
  for (const auto& r : log.records) {
    if (!r.z_hat.empty()) out.push_back(r.z_hat);
  }
  return out;
}

}  // namespace hdeid
