#include "hdeid/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "hdeid/attributes.hpp"
#include "hdeid/errors.hpp"
#include "hdeid/image_io.hpp"

namespace fs = std::filesystem;

namespace hdeid {

namespace {

bool is_png(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

std::vector<std::string> list_pngs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_png(e.path())) out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("error writing " + path.string());
}

// Instances owned by one worker.
struct Pipeline {
  NoiseSchedule schedule = NoiseSchedule::linear();
  std::unique_ptr<DenoiserBackend> backend;
  std::unique_ptr<IdentityEmbedder> embedder;
  std::unique_ptr<AttributePredictor> attributes;
  std::unique_ptr<FaceParser> parser;

  explicit Pipeline(const ProviderSelection& p) {
    backend = backend_registry().create(p.backend, p.options_for("backend"), schedule);
    embedder = embedder_registry().create(p.embedder, p.options_for("embedder"));
    attributes = attribute_registry().create(p.attributes, p.options_for("attributes"));
    parser = parser_registry().create(p.parser, p.options_for("parser"));
  }

  OptimizationProviders providers() const { return {embedder.get(), attributes.get(), parser.get()}; }
  bool exclusive() const { return embedder->exclusive() || attributes->exclusive() || parser->exclusive(); }
};

struct ImageOutcome {
  std::string input;
  std::string output;  // written PNG, empty on failure
  std::string error;
};

std::mutex g_exclusive_mutex;

ImageOutcome process_image(const Pipeline& pipe, const RunConfig& config, const std::string& input) {
  ImageOutcome r{input, {}, {}};
  const fs::path dir(config.output);
  const std::string stem = fs::path(input).stem().string();
  const ImageTensor x = read_png(input);
  OptimizationResult res;
  if (pipe.exclusive()) {
    std::lock_guard lock(g_exclusive_mutex);
    res = optimize(x, config.opt, pipe.schedule, *pipe.backend, pipe.providers());
  } else {
    res = optimize(x, config.opt, pipe.schedule, *pipe.backend, pipe.providers());
  }
  const fs::path png = dir / (stem + ".png");
  write_png(png.string(), res.x_hat);
  std::ostringstream log;
  write_trajectory_csv(log, res.log);
  write_text(dir / (stem + ".trajectory.csv"), log.str());
  if (config.opt.record_snapshots) write_snapshots((dir / (stem + ".snapshots.bin")).string(), snapshots_of(res.log));
  if (!res.log.events.empty()) {
    std::string events;
    for (const auto& e : res.log.events) events += e + "\n";
    write_text(dir / (stem + ".events.log"), events);
  }
  r.output = png.string();
  return r;
}

// Runs the batch with a bounded worker pool; outcomes keep input order.
std::vector<ImageOutcome> run_batch(const RunConfig& config, const std::vector<std::string>& images,
                                    std::ostream& out) {
  std::vector<ImageOutcome> outcomes(images.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  auto worker = [&] {
    std::unique_ptr<Pipeline> pipe;
    std::string setup_error;
    try {
      pipe = std::make_unique<Pipeline>(config.providers);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t i = next++; i < images.size(); i = next++) {
      ImageOutcome r{images[i], {}, setup_error};
      if (pipe) {
        try {
          r = process_image(*pipe, config, images[i]);
        } catch (const std::exception& e) {
          r.error = e.what();
        }
      }
      std::lock_guard lock(report_mutex);
      if (r.error.empty()) {
        out << "wrote " << r.output << "\n";
      } else {
        out << "failed " << r.input << ": " << r.error << "\n";
      }
      outcomes[i] = std::move(r);
    }
  };
  const std::size_t n = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(config.workers, 1)), 1,
                                                 std::max<std::size_t>(images.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return outcomes;
}

int report_failures(const std::vector<ImageOutcome>& outcomes, std::ostream& err) {
  std::size_t failed = 0;
  for (const auto& o : outcomes) failed += o.error.empty() ? 0 : 1;
  if (failed == 0) return 0;
  err << failed << " of " << outcomes.size() << " image(s) failed:\n";
  for (const auto& o : outcomes) {
    if (!o.error.empty()) err << "  " << o.input << ": " << o.error << "\n";
  }
  return 1;
}

MetricsReport evaluate_pairs(const ProviderSelection& sel,
                             const std::vector<std::pair<std::string, std::string>>& pairs) {
  auto providers = eval_registry().create(sel.eval, sel.options_for("eval"));
  std::vector<PairScores> rows;
  for (const auto& [orig, edited] : pairs) {
    const ImageTensor x = read_png(orig);
    const ImageTensor x_hat = read_png(edited);
    rows.push_back(evaluate_pair(x, x_hat, *providers, fs::path(orig).filename().string()));
  }
  return aggregate(std::move(rows));
}

void print_table(const MetricsReport& r, std::ostream& out) {
  out << table_header_csv() << "\n" << table_row_csv(r) << "\n";
}

}  // namespace

std::vector<std::string> collect_images(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      auto d = list_pngs(p);
      out.insert(out.end(), d.begin(), d.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw ConfigError("input not found: " + p);
    }
  }
  if (out.empty()) throw ConfigError("no input images");
  return out;
}

int cmd_deidentify(const RunConfig& config, const std::vector<std::string>& inputs, std::ostream& out,
                   std::ostream& err) {
  const std::vector<std::string> images = collect_images(inputs);
  config.opt.validate(NoiseSchedule::linear());
  set_attribute_targets(AttributeDistribution(std::vector<double>(AttributeDistribution::kCelebACount, 0.5)),
                        config.opt.attribute_targets);
  fs::create_directories(config.output);
  write_text(fs::path(config.output) / "config.resolved", format_config(to_config_map(config)));
  return report_failures(run_batch(config, images, out), err);
}

int cmd_evaluate(const RunConfig& config, const EvaluateRequest& req, std::ostream& out, std::ostream& err) {
  const auto originals = list_pngs(req.originals);
  std::map<std::string, std::string> edited;
  for (const auto& p : list_pngs(req.edited)) edited[fs::path(p).filename().string()] = p;

  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> unmatched;
  for (const auto& o : originals) {
    const std::string name = fs::path(o).filename().string();
    auto it = edited.find(name);
    if (it == edited.end()) {
      unmatched.push_back(o);
    } else {
      pairs.emplace_back(o, it->second);
      edited.erase(it);
    }
  }
  for (const auto& [_, p] : edited) unmatched.push_back(p);
  if (!unmatched.empty()) {
    err << "skipped " << unmatched.size() << " unmatched file(s):\n";
    for (const auto& u : unmatched) err << "  " << u << "\n";
  }
  if (pairs.empty()) {
    err << "no filenames in common between " << req.originals << " and " << req.edited << "\n";
    return 2;
  }

  const MetricsReport report = evaluate_pairs(config.providers, pairs);
  const fs::path dir(config.output);
  const fs::path json = req.report.empty() ? dir / "report.json" : fs::path(req.report);
  const fs::path csv = req.csv.empty() ? dir / "report.csv" : fs::path(req.csv);
  if (json.has_parent_path()) fs::create_directories(json.parent_path());
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  write_text(json, report_json(report));
  write_text(csv, report_csv(report));
  std::size_t failures = 0;
  for (const auto& r : report.rows) failures += r.failures.size();
  if (failures > 0) err << failures << " metric evaluation(s) failed and were excluded (see report)\n";
  print_table(report, out);
  return 0;
}

int cmd_report_only(const std::vector<double>& c, std::ostream& out, std::ostream& err) {
  if (c.size() != 6) {
    err << "report-only mode needs six values (SID, Detect, Emotion, Gender, Pose, Gaze), got " << c.size() << "\n";
    return 2;
  }
  print_table(report_from_means({c[0], c[1], c[2], c[3], c[4], c[5]}), out);
  return 0;
}

const std::vector<std::pair<std::string, std::string>>& ablation_parameters() {
  static const std::vector<std::pair<std::string, std::string>> kParams = {
      {"lr", "lr"},         {"lambda", "lambda"}, {"n_opt", "n_opt"},       {"denoise_steps", "window.denoise_steps"},
      {"w_id", "weights.id"}, {"w_attr", "weights.attr"}, {"w_mask", "weights.mask"}};
  return kParams;
}

int cmd_ablate(const RunConfig& config, const std::string& parameter, const std::vector<std::string>& values,
               const std::vector<std::string>& inputs, std::ostream& out, std::ostream& err) {
  std::string key;
  std::string valid;
  for (const auto& [name, k] : ablation_parameters()) {
    if (name == parameter) key = k;
    valid += (valid.empty() ? "" : ", ") + name;
  }
  if (key.empty()) throw ConfigError("unknown sweep parameter '" + parameter + "'; valid: " + valid);
  if (values.empty()) throw ConfigError("sweep over '" + parameter + "' has no values");

  std::vector<RunConfig> cells;
  for (const auto& v : values) {
    RunConfig cell = config;
    apply_config({{key, v}}, cell);
    cell.output = (fs::path(config.output) / (parameter + "_" + v)).string();
    cell.opt.validate(NoiseSchedule::linear());
    cells.push_back(std::move(cell));
  }
  const std::vector<std::string> images = collect_images(inputs);
  fs::create_directories(config.output);

  std::string table = "parameter,value," + table_header_csv() + "\n";
  int status = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const RunConfig& cell = cells[i];
    out << "== " << parameter << " = " << values[i] << "\n";
    fs::create_directories(cell.output);
    write_text(fs::path(cell.output) / "config.resolved", format_config(to_config_map(cell)));
    const auto outcomes = run_batch(cell, images, out);
    if (report_failures(outcomes, err) != 0) status = 1;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& o : outcomes) {
      if (o.error.empty()) pairs.emplace_back(o.input, o.output);
    }
    if (pairs.empty()) {
      err << "no successful outputs for " << parameter << " = " << values[i] << "\n";
      status = 1;
      continue;
    }
    const MetricsReport report = evaluate_pairs(cell.providers, pairs);
    write_text(fs::path(config.output) / ("report_" + parameter + "_" + values[i] + ".json"), report_json(report));
    table += parameter + "," + values[i] + "," + table_row_csv(report) + "\n";
  }
  write_text(fs::path(config.output) / "ablation.csv", table);
  out << table;
  return status;
}

int cmd_trajectory(const RunConfig& config, const std::vector<std::string>& files, const std::string& destination,
                   std::ostream& out, std::ostream& err) {
  if (files.empty()) {
    err << "no snapshot files given\n";
    return 2;
  }
  std::vector<std::vector<std::vector<double>>> trajectories;
  std::vector<std::vector<double>> pool;
  for (const auto& f : files) {
    if (!fs::is_regular_file(f)) throw ConfigError("snapshot file not found: " + f);
    trajectories.push_back(read_snapshots(f));
    pool.insert(pool.end(), trajectories.back().begin(), trajectories.back().end());
  }
  if (config.pca_k < 1) throw ConfigError("pca.k must be at least 1");
  const PcaModel model = pca_fit(pool, static_cast<std::size_t>(config.pca_k));

  std::string csv = "trajectory,step";
  for (int a = 0; a < config.pca_k; ++a) csv += ",pc" + std::to_string(a + 1);
  csv += "\n";
  char buf[64];
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const std::string name = fs::path(files[t]).filename().string();
    for (std::size_t s = 0; s < trajectories[t].size(); ++s) {
      csv += name + "," + std::to_string(s);
      for (double v : model.project(trajectories[t][s])) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        csv += buf;
      }
      csv += "\n";
    }
  }
  const fs::path dest = destination.empty() ? fs::path(config.output) / "trajectory_pca.csv" : fs::path(destination);
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  write_text(dest, csv);
  out << "pool of " << pool.size() << " vectors, explained variance " << model.explained_ratio() << "\n"
      << "wrote " << dest.string() << "\n";
  return 0;
}

namespace {

// Long flags that map one-to-one onto config keys.
const std::vector<std::pair<std::string, std::string>>& flag_keys() {
  static const std::vector<std::pair<std::string, std::string>> kFlags = {
      {"mode", "mode"},
      {"lr", "lr"},
      {"lambda", "lambda"},
      {"n-opt", "n_opt"},
      {"init-norm", "init_norm"},
      {"seed", "seed"},
      {"renormalize", "renormalize"},
      {"attribute-loss", "attribute_loss"},
      {"w-id", "weights.id"},
      {"w-attr", "weights.attr"},
      {"w-mask", "weights.mask"},
      {"t0", "window.t0"},
      {"t-edit", "window.t_edit"},
      {"t-boost", "window.t_boost"},
      {"denoise-steps", "window.denoise_steps"},
      {"boost-eta", "window.boost_eta"},
      {"checkpointed", "gradient.checkpointed"},
      {"backend", "providers.backend"},
      {"embedder", "providers.embedder"},
      {"attributes", "providers.attributes"},
      {"parser", "providers.parser"},
      {"eval-providers", "providers.eval"},
      {"workers", "workers"},
      {"output", "output"},
      {"pca-k", "pca.k"},
  };
  return kFlags;
}

struct SharedFlags {
  std::string config_file;
  std::map<std::string, std::string> values;  // flag -> raw value
  std::vector<std::string> fix_attr;
  std::vector<std::string> sets;
  bool snapshots = false;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, std::string("config file (default: $") + kConfigEnvVar + ")");
    for (const auto& [flag, key] : flag_keys()) {
      std::string name = "--" + flag;
      if (flag == "output") name = "-o,--output";
      options[flag] = app->add_option(name, values[flag], "sets " + key);
    }
    app->add_option("--fix-attr", fix_attr, "fix an attribute target, \"Name=probability\" (repeatable)");
    app->add_option("--set", sets, "override any config key, \"key=value\" (repeatable)");
    app->add_flag("--snapshots", snapshots, "record edited-latent snapshots for trajectory analysis");
  }

  RunConfig resolve() const {
    ConfigMap overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& [flag, key] : flag_keys()) {
      if (options.at(flag)->count() > 0) overrides[key] = values.at(flag);
    }
    for (const auto& f : fix_attr) {
      const auto eq = f.rfind('=');
      if (eq == std::string::npos) throw ConfigError("--fix-attr expects \"Name=probability\", got '" + f + "'");
      overrides["fix." + f.substr(0, eq)] = f.substr(eq + 1);
    }
    if (snapshots) overrides["snapshots"] = "true";
    return resolve_config(config_file, overrides);
  }
};

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Face de-identification by latent direction optimization in a diffusion model"};
  app.require_subcommand(1);

  SharedFlags deid_flags, eval_flags, ablate_flags, traj_flags;

  std::vector<std::string> deid_inputs;
  auto* deid = app.add_subcommand("deidentify", "optimize an identity edit for each input image");
  deid->add_option("inputs", deid_inputs, "PNG files or directories")->required();
  deid_flags.attach(deid);

  EvaluateRequest req;
  std::string report_only;
  auto* eval = app.add_subcommand("evaluate", "score edited images against their originals");
  eval->add_option("--original", req.originals, "directory of source images");
  eval->add_option("--edited", req.edited, "directory of edited images (paired by filename)");
  eval->add_option("--report", req.report, "JSON report path");
  eval->add_option("--csv", req.csv, "table path");
  eval->add_option("--report-only", report_only, "six comma-separated column means; prints the aggregate row");
  eval_flags.attach(eval);

  std::string param;
  std::string sweep_values;
  std::vector<std::string> ablate_inputs;
  auto* ablate = app.add_subcommand("ablate", "sweep one parameter and compare metrics");
  ablate->add_option("--param", param, "lr, lambda, n_opt, denoise_steps, w_id, w_attr or w_mask")->required();
  ablate->add_option("--values", sweep_values, "comma-separated values")->required();
  ablate->add_option("inputs", ablate_inputs, "PNG files or directories")->required();
  ablate_flags.attach(ablate);

  std::vector<std::string> snapshot_files;
  std::string traj_dest;
  auto* traj = app.add_subcommand("trajectory", "project latent snapshots onto their principal axes");
  traj->add_option("files", snapshot_files, "snapshot files written by deidentify --snapshots");
  traj->add_option("--out", traj_dest, "output table (default <output>/trajectory_pca.csv)");
  traj_flags.attach(traj);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (deid->parsed()) return cmd_deidentify(deid_flags.resolve(), deid_inputs, out, err);
    if (eval->parsed()) {
      if (!report_only.empty()) {
        std::vector<double> cols;
        std::stringstream ss(report_only);
        std::string item;
        while (std::getline(ss, item, ',')) {
          try {
            cols.push_back(std::stod(item));
          } catch (const std::exception&) {
            throw ConfigError("--report-only: '" + item + "' is not a number");
          }
        }
        return cmd_report_only(cols, out, err);
      }
      if (req.originals.empty() || req.edited.empty()) {
        throw ConfigError("evaluate needs --original and --edited directories (or --report-only)");
      }
      return cmd_evaluate(eval_flags.resolve(), req, out, err);
    }
    if (ablate->parsed()) {
      std::vector<std::string> values;
      std::stringstream ss(sweep_values);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) values.push_back(item);
      }
      return cmd_ablate(ablate_flags.resolve(), param, values, ablate_inputs, out, err);
    }
    if (traj->parsed()) return cmd_trajectory(traj_flags.resolve(), snapshot_files, traj_dest, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace hdeid
