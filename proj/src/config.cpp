#include "unfold/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>

#include "unfold/errors.hpp"

namespace unfold {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& ctx,
                    const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError(ctx + ": unknown field \"" + it.key() + "\"");
  }
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

json require(const json& obj, const std::string& ctx, const std::string& key) {
  const json* v = find(obj, key);
  if (!v) throw ConfigError(ctx + ": missing required field \"" + key + "\"");
  return *v;
}

long long get_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError(ctx + ": expected an integer");
  return v.get<long long>();
}

double get_num(const json& v, const std::string& ctx) {
  if (!v.is_number()) throw ConfigError(ctx + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(ctx + ": must be finite");
  return x;
}

std::string get_str(const json& v, const std::string& ctx) {
  if (!v.is_string()) throw ConfigError(ctx + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> get_num_array(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty())
    throw ConfigError(ctx + ": expected a non-empty array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) out.push_back(get_num(e, ctx + " element"));
  return out;
}

KernelSpec parse_kernel(const json& obj) {
  const std::string ctx = "config.kernel";
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  const std::string kind = get_str(require(obj, ctx, "kind"), ctx + ".kind");
  KernelSpec spec = KernelSpec::from_name(kind);
  std::set<std::string> allowed = {"kind"};
  if (spec.kind == KernelKind::constant) allowed.insert("value");
  if (spec.kind == KernelKind::tabulated) allowed.insert("profile");
  reject_unknown(obj, ctx, allowed);
  if (const json* v = find(obj, "value")) {
    spec.value = get_num(*v, ctx + ".value");
    if (!(spec.value > 0.0)) throw ConfigError(ctx + ".value: must be > 0");
  }
  if (spec.kind == KernelKind::tabulated) {
    spec.profile = get_num_array(require(obj, ctx, "profile"), ctx + ".profile");
  }
  return spec;
}

FredPeak parse_peak(const json& obj, const std::string& ctx) {
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  reject_unknown(obj, ctx, {"a", "m", "sigma_r", "sigma_d", "nu"});
  FredPeak p;
  p.a = get_num(require(obj, ctx, "a"), ctx + ".a");
  p.m = get_num(require(obj, ctx, "m"), ctx + ".m");
  p.sigma_r = get_num(require(obj, ctx, "sigma_r"), ctx + ".sigma_r");
  p.sigma_d = get_num(require(obj, ctx, "sigma_d"), ctx + ".sigma_d");
  p.nu = get_num(require(obj, ctx, "nu"), ctx + ".nu");
  if (p.a < 0.0) throw ConfigError(ctx + ".a: must be >= 0");
  if (p.m < 0.0 || p.m >= 1.0) throw ConfigError(ctx + ".m: must lie in [0,1)");
  if (!(p.sigma_r > 0.0)) throw ConfigError(ctx + ".sigma_r: must be > 0");
  if (!(p.sigma_d > 0.0)) throw ConfigError(ctx + ".sigma_d: must be > 0");
  if (!(p.nu > 0.0)) throw ConfigError(ctx + ".nu: must be > 0");
  return p;
}

IntensitySpec parse_intensity(const json& obj) {
  const std::string ctx = "config.intensity";
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  const std::string kind = get_str(require(obj, ctx, "kind"), ctx + ".kind");
  IntensitySpec spec = IntensitySpec::from_name(kind);
  std::set<std::string> allowed = {"kind"};
  if (spec.kind == IntensityKind::constant) allowed.insert("value");
  if (spec.kind == IntensityKind::tabulated) allowed.insert("values");
  if (spec.kind == IntensityKind::fred) {
    allowed.insert("f0");
    allowed.insert("peaks");
  }
  reject_unknown(obj, ctx, allowed);
  if (const json* v = find(obj, "value")) {
    spec.value = get_num(*v, ctx + ".value");
    if (!(spec.value > 0.0)) throw ConfigError(ctx + ".value: must be > 0");
  }
  if (spec.kind == IntensityKind::tabulated) {
    spec.values = get_num_array(require(obj, ctx, "values"), ctx + ".values");
    for (double x : spec.values)
      if (!(x > 0.0)) throw ConfigError(ctx + ".values: must be strictly positive");
  }
  if (spec.kind == IntensityKind::fred) {
    if (const json* v = find(obj, "f0")) {
      spec.f0 = get_num(*v, ctx + ".f0");
      if (!(spec.f0 > 0.0)) throw ConfigError(ctx + ".f0: must be > 0");
    }
    if (const json* v = find(obj, "peaks")) {
      if (!v->is_array() || v->empty())
        throw ConfigError(ctx + ".peaks: expected a non-empty array");
      spec.peaks.clear();
      for (std::size_t i = 0; i < v->size(); ++i)
        spec.peaks.push_back(
            parse_peak((*v)[i], ctx + ".peaks[" + std::to_string(i) + "]"));
    }
  }
  return spec;
}

EstimatorConfig parse_estimator(const json& obj, int J) {
  const std::string ctx = "config.estimator";
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  reject_unknown(obj, ctx,
                 {"mode", "nu", "s", "j_max", "newton_tol", "newton_max_iter",
                  "exp_clip"});
  EstimatorConfig cfg;
  cfg.j_max = J;
  if (const json* v = find(obj, "mode")) {
    const std::string mode = get_str(*v, ctx + ".mode");
    if (mode == "nonlinear")
      cfg.mode = EstimatorMode::nonlinear;
    else if (mode == "linear")
      cfg.mode = EstimatorMode::linear;
    else
      throw ConfigError(ctx + ".mode: expected \"nonlinear\" or \"linear\"");
  }
  if (const json* v = find(obj, "nu")) {
    cfg.nu = get_num(*v, ctx + ".nu");
    if (!(cfg.nu > 0.0)) throw ConfigError(ctx + ".nu: must be > 0");
  }
  if (const json* v = find(obj, "s")) {
    cfg.s = get_num(*v, ctx + ".s");
    if (!(cfg.s > 0.0)) throw ConfigError(ctx + ".s: must be > 0");
  }
  if (const json* v = find(obj, "j_max")) {
    const long long jm = get_int(*v, ctx + ".j_max");
    if (jm < 1 || jm > 30) throw ConfigError(ctx + ".j_max: must lie in [1,30]");
    cfg.j_max = int(jm);
  }
  if (const json* v = find(obj, "newton_tol")) {
    cfg.newton_tol = get_num(*v, ctx + ".newton_tol");
    if (!(cfg.newton_tol > 0.0)) throw ConfigError(ctx + ".newton_tol: must be > 0");
  }
  if (const json* v = find(obj, "newton_max_iter")) {
    const long long it = get_int(*v, ctx + ".newton_max_iter");
    if (it < 1 || it > 100000)
      throw ConfigError(ctx + ".newton_max_iter: must lie in [1,100000]");
    cfg.newton_max_iter = int(it);
  }
  if (const json* v = find(obj, "exp_clip")) {
    cfg.exp_clip = get_num(*v, ctx + ".exp_clip");
    if (!(cfg.exp_clip > 0.0)) throw ConfigError(ctx + ".exp_clip: must be > 0");
  }
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& root) {
  const std::string ctx = "config";
  if (!root.is_object()) throw ConfigError(ctx + ": expected a JSON object");
  reject_unknown(root, ctx,
                 {"version", "J", "quad_resolution", "filter", "kernel", "intensity",
                  "estimator", "t_values", "replicates", "seed", "out_dir",
                  "cache_dir", "threads"});

  ExperimentConfig cfg;
  const long long version = get_int(require(root, ctx, "version"), ctx + ".version");
  if (version != 1)
    throw ConfigError(ctx + ".version: expected 1, got " + std::to_string(version));
  cfg.version = 1;

  const long long J = get_int(require(root, ctx, "J"), ctx + ".J");
  if (J < 3 || J > 20) throw ConfigError(ctx + ".J: must lie in [3,20]");
  cfg.J = int(J);

  cfg.quad_resolution = 16;
  if (const json* v = find(root, "quad_resolution")) {
    const long long q = get_int(*v, ctx + ".quad_resolution");
    if (q < J + 2 || q > 26)
      throw ConfigError(ctx + ".quad_resolution: must lie in [J+2,26]");
    cfg.quad_resolution = int(q);
  }

  if (const json* v = find(root, "filter")) {
    const std::string name = get_str(*v, ctx + ".filter");
    try {
      cfg.filter = WaveletFilter::from_name(name);
    } catch (const Error& e) {
      throw ConfigError(ctx + ".filter: " + e.what());
    }
  }

  try {
    cfg.kernel = parse_kernel(require(root, ctx, "kernel"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config.kernel: ") + e.what());
  }
  try {
    cfg.intensity = parse_intensity(require(root, ctx, "intensity"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config.intensity: ") + e.what());
  }

  cfg.estimator = EstimatorConfig{};
  cfg.estimator.j_max = cfg.J;
  if (const json* v = find(root, "estimator")) cfg.estimator = parse_estimator(*v, cfg.J);

  cfg.t_values = get_num_array(require(root, ctx, "t_values"), ctx + ".t_values");
  for (double t : cfg.t_values)
    if (!(t > 1.0)) throw ConfigError(ctx + ".t_values: every t must be > 1");

  cfg.replicates = 1;
  if (const json* v = find(root, "replicates")) {
    const long long r = get_int(*v, ctx + ".replicates");
    if (r < 1 || r > 1000000) throw ConfigError(ctx + ".replicates: must be >= 1");
    cfg.replicates = int(r);
  }

  if (const json* v = find(root, "seed")) {
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
      throw ConfigError(ctx + ".seed: expected a nonnegative integer");
    cfg.seed = v->get<std::uint64_t>();
  }

  if (const json* v = find(root, "out_dir")) cfg.out_dir = get_str(*v, ctx + ".out_dir");
  if (cfg.out_dir.empty()) throw ConfigError(ctx + ".out_dir: must be non-empty");
  if (const json* v = find(root, "cache_dir"))
    cfg.cache_dir = get_str(*v, ctx + ".cache_dir");

  if (const json* v = find(root, "threads")) {
    const long long th = get_int(*v, ctx + ".threads");
    if (th < 1 || th > 256) throw ConfigError(ctx + ".threads: must lie in [1,256]");
    cfg.threads = int(th);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(root);
}

nlohmann::json kernel_spec_json(const KernelSpec& spec) {
  json kernel{{"kind", spec.kind_name()}};
  if (spec.kind == KernelKind::constant) kernel["value"] = spec.value;
  if (spec.kind == KernelKind::tabulated) kernel["profile"] = spec.profile;
  return kernel;
}

nlohmann::json intensity_spec_json(const IntensitySpec& spec) {
  json intensity{{"kind", spec.kind_name()}};
  if (spec.kind == IntensityKind::constant) intensity["value"] = spec.value;
  if (spec.kind == IntensityKind::tabulated) intensity["values"] = spec.values;
  if (spec.kind == IntensityKind::fred) {
    intensity["f0"] = spec.f0;
    json peaks = json::array();
    for (const FredPeak& p : spec.peaks)
      peaks.push_back({{"a", p.a},
                       {"m", p.m},
                       {"sigma_r", p.sigma_r},
                       {"sigma_d", p.sigma_d},
                       {"nu", p.nu}});
    intensity["peaks"] = peaks;
  }
  return intensity;
}

nlohmann::json config_json(const ExperimentConfig& cfg) {
  json estimator{
      {"mode", cfg.estimator.mode == EstimatorMode::linear ? "linear" : "nonlinear"},
      {"nu", cfg.estimator.nu},
      {"s", cfg.estimator.s},
      {"j_max", cfg.estimator.j_max},
      {"newton_tol", cfg.estimator.newton_tol},
      {"newton_max_iter", cfg.estimator.newton_max_iter},
      {"exp_clip", cfg.estimator.exp_clip}};

  return json{{"version", cfg.version},
              {"J", cfg.J},
              {"quad_resolution", cfg.quad_resolution},
              {"filter", cfg.filter.name},
              {"kernel", kernel_spec_json(cfg.kernel)},
              {"intensity", intensity_spec_json(cfg.intensity)},
              {"estimator", estimator},
              {"t_values", cfg.t_values},
              {"replicates", cfg.replicates},
              {"seed", cfg.seed},
              {"out_dir", cfg.out_dir},
              {"cache_dir", cfg.cache_dir},
              {"threads", cfg.threads}};
}

}  // namespace unfold
