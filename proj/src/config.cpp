#include "hdeid/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "hdeid/errors.hpp"

namespace hdeid {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + v + "'");
}

const char* variant_name(AttributeLossVariant v) {
  return v == AttributeLossVariant::kLiteral ? "literal" : "bernoulli";
}

const char* kRoles[] = {"backend", "embedder", "attributes", "parser", "eval"};

std::string* role_name(ProviderSelection& p, const std::string& role) {
  if (role == "backend") return &p.backend;
  if (role == "embedder") return &p.embedder;
  if (role == "attributes") return &p.attributes;
  if (role == "parser") return &p.parser;
  if (role == "eval") return &p.eval;
  return nullptr;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"mode", [](RunConfig& c, auto&, auto& v) { c.opt.mode = parse_edit_mode(v); }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.opt.lr = to_double(k, v); }},
      {"lambda", [](RunConfig& c, auto& k, auto& v) { c.opt.lambda = to_double(k, v); }},
      {"n_opt", [](RunConfig& c, auto& k, auto& v) { c.opt.n_opt = static_cast<int>(to_int(k, v)); }},
      {"init_norm", [](RunConfig& c, auto& k, auto& v) { c.opt.init_norm = to_double(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.opt.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"renormalize", [](RunConfig& c, auto& k, auto& v) { c.opt.renormalize = to_bool(k, v); }},
      {"snapshots", [](RunConfig& c, auto& k, auto& v) { c.opt.record_snapshots = to_bool(k, v); }},
      {"attribute_loss",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "literal") {
           c.opt.attribute_variant = AttributeLossVariant::kLiteral;
         } else if (v == "bernoulli") {
           c.opt.attribute_variant = AttributeLossVariant::kBernoulli;
         } else {
           throw ConfigError("config key '" + k + "' expects literal or bernoulli, got '" + v + "'");
         }
       }},
      {"weights.id", [](RunConfig& c, auto& k, auto& v) { c.opt.weights.id = to_double(k, v); }},
      {"weights.attr", [](RunConfig& c, auto& k, auto& v) { c.opt.weights.attr = to_double(k, v); }},
      {"weights.mask", [](RunConfig& c, auto& k, auto& v) { c.opt.weights.mask = to_double(k, v); }},
      {"window.t0", [](RunConfig& c, auto& k, auto& v) { c.opt.window.t0 = static_cast<int>(to_int(k, v)); }},
      {"window.t_edit", [](RunConfig& c, auto& k, auto& v) { c.opt.window.t_edit = static_cast<int>(to_int(k, v)); }},
      {"window.t_boost",
       [](RunConfig& c, auto& k, auto& v) { c.opt.window.t_boost = static_cast<int>(to_int(k, v)); }},
      {"window.denoise_steps",
       [](RunConfig& c, auto& k, auto& v) { c.opt.window.n_denoise = static_cast<int>(to_int(k, v)); }},
      {"window.boost_eta", [](RunConfig& c, auto& k, auto& v) { c.opt.window.boost_eta = to_double(k, v); }},
      {"gradient.checkpointed", [](RunConfig& c, auto& k, auto& v) { c.opt.gradient.checkpointed = to_bool(k, v); }},
      {"gradient.segment",
       [](RunConfig& c, auto& k, auto& v) { c.opt.gradient.segment = static_cast<std::size_t>(to_int(k, v)); }},
      {"inversion.noise_seed",
       [](RunConfig& c, auto& k, auto& v) { c.opt.inversion.noise_seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"inversion.refine_iterations",
       [](RunConfig& c, auto& k, auto& v) { c.opt.inversion.refine_iterations = static_cast<int>(to_int(k, v)); }},
      {"inversion.refine_tolerance",
       [](RunConfig& c, auto& k, auto& v) { c.opt.inversion.refine_tolerance = to_double(k, v); }},
      {"output", [](RunConfig& c, auto&, auto& v) { c.output = v; }},
      {"workers", [](RunConfig& c, auto& k, auto& v) { c.workers = static_cast<int>(to_int(k, v)); }},
      {"pca.k", [](RunConfig& c, auto& k, auto& v) { c.pca_k = static_cast<int>(to_int(k, v)); }},
  };
  return table;
}

}  // namespace

const ProviderOptions& ProviderSelection::options_for(const std::string& role) const {
  static const ProviderOptions kEmpty;
  auto it = options.find(role);
  return it == options.end() ? kEmpty : it->second;
}

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string format_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) out += k + " = " + v + "\n";
  return out;
}

void apply_config(const ConfigMap& values, RunConfig& config) {
  for (const auto& [key, value] : values) {
    if (auto it = setters().find(key); it != setters().end()) {
      it->second(config, key, value);
      continue;
    }
    const auto dot = key.find('.');
    const std::string head = key.substr(0, dot);
    if (head == "providers" && dot != std::string::npos) {
      std::string* slot = role_name(config.providers, key.substr(dot + 1));
      if (slot) {
        *slot = value;
        continue;
      }
    } else if (head == "fix" && dot != std::string::npos && dot + 1 < key.size()) {
      config.opt.attribute_targets[key.substr(dot + 1)] = to_double(key, value);
      continue;
    } else if (dot != std::string::npos && dot + 1 < key.size() && role_name(config.providers, head)) {
      config.providers.options[head][key.substr(dot + 1)] = value;
      continue;
    }
    std::string known;
    for (const auto& [k, _] : setters()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config key '" + key + "'; valid keys: " + known +
                      ", providers.<role>, <role>.<option>, fix.<attribute>");
  }
}

ConfigMap to_config_map(const RunConfig& c) {
  ConfigMap m;
  const auto& o = c.opt;
  m["mode"] = edit_mode_name(o.mode);
  m["lr"] = fmt_double(o.lr);
  m["lambda"] = fmt_double(o.lambda);
  m["n_opt"] = std::to_string(o.n_opt);
  m["init_norm"] = fmt_double(o.init_norm);
  m["seed"] = std::to_string(o.seed);
  m["renormalize"] = o.renormalize ? "true" : "false";
  m["snapshots"] = o.record_snapshots ? "true" : "false";
  m["attribute_loss"] = variant_name(o.attribute_variant);
  m["weights.id"] = fmt_double(o.weights.id);
  m["weights.attr"] = fmt_double(o.weights.attr);
  m["weights.mask"] = fmt_double(o.weights.mask);
  m["window.t0"] = std::to_string(o.window.t0);
  m["window.t_edit"] = std::to_string(o.window.t_edit);
  m["window.t_boost"] = std::to_string(o.window.t_boost);
  m["window.denoise_steps"] = std::to_string(o.window.n_denoise);
  m["window.boost_eta"] = fmt_double(o.window.boost_eta);
  m["gradient.checkpointed"] = o.gradient.checkpointed ? "true" : "false";
  m["gradient.segment"] = std::to_string(o.gradient.segment);
  m["inversion.noise_seed"] = std::to_string(o.inversion.noise_seed);
  m["inversion.refine_iterations"] = std::to_string(o.inversion.refine_iterations);
  m["inversion.refine_tolerance"] = fmt_double(o.inversion.refine_tolerance);
  for (const auto& [name, v] : o.attribute_targets) m["fix." + name] = fmt_double(v);
  m["output"] = c.output;
  m["workers"] = std::to_string(c.workers);
  m["pca.k"] = std::to_string(c.pca_k);
  ProviderSelection p = c.providers;
  for (const char* role : kRoles) {
    m[std::string("providers.") + role] = *role_name(p, role);
  }
  for (const auto& [role, opts] : c.providers.options) {
    for (const auto& [k, v] : opts) m[role + "." + k] = v;
  }
  return m;
}

RunConfig resolve_config(const std::string& file, const ConfigMap& overrides) {
  RunConfig c;
  std::string path = file;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) path = env;
  }
  if (!path.empty()) apply_config(load_config_file(path), c);
  apply_config(overrides, c);
  return c;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_config_map(a) == to_config_map(b); }

}  // namespace hdeid
