#include "fieldbench/bench/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace fieldbench::bench {

using nlohmann::json;

const char* perceptual_model_name(PerceptualModel m) {
  switch (m) {
    case PerceptualModel::Pointwise: return "pointwise";
    case PerceptualModel::Conic: return "conic";
    case PerceptualModel::Nadir: return "nadir";
  }
  return "?";
}

std::optional<PerceptualModel> perceptual_model_from_name(const std::string& name) {
  if (name == "pointwise") return PerceptualModel::Pointwise;
  if (name == "conic") return PerceptualModel::Conic;
  if (name == "nadir") return PerceptualModel::Nadir;
  return std::nullopt;
}

const char* eval_method_name(EvalMethod m) {
  switch (m) {
    case EvalMethod::Edl: return "edl";
    case EvalMethod::Ensemble: return "ensemble";
    case EvalMethod::Mcd: return "mcd";
    case EvalMethod::Gp: return "gp";
  }
  return "?";
}

std::optional<EvalMethod> eval_method_from_name(const std::string& name) {
  if (name == "edl") return EvalMethod::Edl;
  if (name == "ensemble") return EvalMethod::Ensemble;
  if (name == "mcd") return EvalMethod::Mcd;
  if (name == "gp") return EvalMethod::Gp;
  return std::nullopt;
}

std::optional<Profile> profile_from_name(const std::string& name) {
  if (name == "desk") return Profile::Desk;
  if (name == "full") return Profile::Full;
  return std::nullopt;
}

namespace {

/// Object view that records key accesses; done() rejects leftovers so typos
/// in hyperparameter names fail loudly instead of silently using defaults.
class StrictView {
 public:
  StrictView(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  T get(const char* key) {
    require(key);
    return convert<T>(key);
  }

  template <typename T>
  T get_or(const char* key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return fallback;
    return convert<T>(key);
  }

  std::optional<double> get_optional_double(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    return convert<double>(key);
  }

  StrictView child(const char* key) {
    require(key);
    return StrictView(j_.at(key), path_ + "." + key);
  }

  std::optional<StrictView> child_if_present(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return StrictView(j_.at(key), path_ + "." + key);
  }

  void done() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError(path_ + ": unknown key `" + item.key() + "`");
  }

  const std::string& path() const { return path_; }

 private:
  void require(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(path_ + ": missing key `" + key + "`");
  }

  template <typename T>
  T convert(const char* key) {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void check_schema(StrictView& root) {
  const int v = root.get<int>("schema_version");
  if (v != kSchemaVersion)
    throw ConfigError(root.path() + ": unsupported schema_version " + std::to_string(v));
}

sim::SimParams parse_sim(StrictView sim, bool* randomize_wind) {
  sim::SimParams p;
  p.grid_height = sim.get_or<int>("grid_height", p.grid_height);
  p.grid_width = sim.get_or<int>("grid_width", p.grid_width);
  p.n_particles = sim.get_or<int>("n_particles", p.n_particles);
  p.spill_radius = sim.get_or<double>("spill_radius", p.spill_radius);
  const double wind_speed = sim.get_or<double>("wind_speed", p.wind_velocity[0]);
  p.wind_velocity = {wind_speed, 0.0};
  p.tidal_speed = sim.get_or<double>("tidal_speed", p.tidal_speed);
  p.diffusion_sigma = sim.get_or<double>("diffusion_sigma", p.diffusion_sigma);
  p.n_steps = sim.get_or<int>("n_steps", p.n_steps);
  p.deposition_bandwidth = sim.get_or<double>("deposition_bandwidth", p.deposition_bandwidth);
  *randomize_wind = sim.get_or<bool>("randomize_wind_direction", true);
  sim.done();
  return p;
}

sim::TrajectoryParams parse_trajectory(StrictView t) {
  sim::TrajectoryParams p;
  p.min_steps = t.get_or<int>("min_steps", p.min_steps);
  p.max_steps = t.get_or<int>("max_steps", p.max_steps);
  p.max_turn_rate = t.get_or<double>("max_turn_rate", p.max_turn_rate);
  p.step_length = t.get_or<double>("step_length", p.step_length);
  t.done();
  return p;
}

perception::NoiseModel parse_noise(StrictView n) {
  const std::string kind = n.get<std::string>("kind");
  perception::NoiseModel m;
  if (kind == "fixed") {
    m = perception::NoiseModel::fixed(n.get_or<double>("sigma", 0.1));
  } else if (kind == "distance_linear") {
    m = perception::NoiseModel::distance_linear(n.get_or<double>("sigma_min", 0.01),
                                                n.get_or<double>("sigma_max", 0.08));
  } else {
    throw ConfigError(n.path() + ".kind: expected `fixed` or `distance_linear`");
  }
  n.done();
  return m;
}

uq::TrainConfig parse_train_block(StrictView t) {
  uq::TrainConfig c;
  c.epochs = t.get_or<int>("epochs", c.epochs);
  c.batch_size = t.get_or<int>("batch_size", c.batch_size);
  c.learning_rate = t.get_or<double>("learning_rate", c.learning_rate);
  c.grad_clip_max_norm = t.get_optional_double("grad_clip_max_norm");
  c.lambda = t.get_or<double>("lambda", c.lambda);
  c.t_passes = t.get_or<int>("t_passes", c.t_passes);
  c.m_members = t.get_or<int>("m_members", c.m_members);
  c.seed = t.get_or<std::uint64_t>("seed", c.seed);
  t.done();
  return c;
}

nn::BackboneConfig parse_backbone_block(StrictView b, nn::HeadKind required) {
  nn::BackboneConfig c;
  c.encoder_channels = b.get_or<std::vector<int>>("encoder_channels", c.encoder_channels);
  c.bottleneck_channels = b.get_or<int>("bottleneck_channels", c.bottleneck_channels);
  c.dropout_rate = b.get_or<double>("dropout_rate", 0.0);
  c.pad_inputs = b.get_or<bool>("pad_inputs", true);
  const std::string head = b.get_or<std::string>("head_kind", nn::head_kind_name(required));
  const auto kind = nn::head_kind_from_name(head);
  if (!kind) throw ConfigError(b.path() + ".head_kind: unknown value `" + head + "`");
  if (*kind != required)
    throw ConfigError(b.path() + ".head_kind: `" + head +
                      "` is inconsistent with the training method");
  c.head_kind = *kind;
  b.done();
  return c;
}

}  // namespace

void DatasetConfig::validate() const {
  if (n_samples < 1) throw ConfigError("dataset config: n_samples must be >= 1");
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw ConfigError("dataset config: train_fraction must be in (0, 1)");
  try {
    sim.validate();
    trajectory.validate();
    noise.validate();
    if (model == PerceptualModel::Conic) cone.validate();
    if (model == PerceptualModel::Nadir) nadir.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dataset config: ") + e.what());
  }
  if (model == PerceptualModel::Conic && noise.kind != perception::NoiseModel::Kind::DistanceLinear)
    throw ConfigError("dataset config: the conic model needs distance_linear noise");
  if (model != PerceptualModel::Conic && noise.kind != perception::NoiseModel::Kind::Fixed)
    throw ConfigError("dataset config: pointwise/nadir models need fixed noise");
}

void TrainRunConfig::validate() const {
  try {
    train.validate();
    backbone.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  if (backbone.head_kind != uq::required_head(method))
    throw ConfigError("train config: backbone head does not match the method");
  if (method == uq::TrainMethod::Mcd && !(backbone.dropout_rate > 0.0))
    throw ConfigError("train config: mcd requires dropout_rate > 0");
  if (dataset_path.empty()) throw ConfigError("train config: dataset_path is required");
}

void EvalRunConfig::validate() const {
  if (eval_bins < 1) throw ConfigError("eval config: eval_bins must be >= 1");
  if (t_passes < 1) throw ConfigError("eval config: t_passes must be >= 1");
  if (dataset_path.empty()) throw ConfigError("eval config: dataset_path is required");
  if (method != EvalMethod::Gp && checkpoint_dir.empty())
    throw ConfigError("eval config: checkpoint_dir is required for deep methods");
  if (gp.cap < 2 || gp.n_restarts < 1 || gp.max_iters < 1)
    throw ConfigError("eval config: invalid gp options");
}

DatasetConfig parse_dataset_config(const std::filesystem::path& path) {
  const json j = load_json(path);
  StrictView root(j, "dataset config");
  check_schema(root);

  DatasetConfig c;
  const std::string model = root.get<std::string>("perceptual_model");
  const auto pm = perceptual_model_from_name(model);
  if (!pm) throw ConfigError("dataset config: unknown perceptual_model `" + model + "`");
  c.model = *pm;
  c.n_samples = root.get<int>("n_samples");
  c.train_fraction = root.get_or<double>("train_fraction", 0.8);
  c.root_seed = root.get_or<std::uint64_t>("root_seed", 0);
  c.output_dir = root.get_or<std::string>("output_dir", "");
  if (auto sim = root.child_if_present("sim"))
    c.sim = parse_sim(std::move(*sim), &c.randomize_wind_direction);
  if (auto t = root.child_if_present("trajectory")) c.trajectory = parse_trajectory(std::move(*t));
  if (auto n = root.child_if_present("noise")) {
    c.noise = parse_noise(std::move(*n));
  } else {
    c.noise = c.model == PerceptualModel::Conic
                  ? perception::NoiseModel::distance_linear(0.01, 0.08)
                  : perception::NoiseModel::fixed(0.1);
  }
  if (auto cone = root.child_if_present("cone")) {
    c.cone.half_angle = cone->get_or<double>("half_angle_deg", 30.0) * M_PI / 180.0;
    c.cone.max_range = cone->get_or<double>("max_range", 20.0);
    cone->done();
  }
  if (auto nadir = root.child_if_present("nadir")) {
    c.nadir.patch_side = nadir->get_or<int>("patch_side", 5);
    c.nadir.altitude = nadir->get_or<double>("altitude_m", 10.0);
    nadir->done();
  }
  root.done();
  c.validate();
  return c;
}

TrainRunConfig parse_train_config(const std::filesystem::path& path) {
  const json j = load_json(path);
  StrictView root(j, "train config");
  check_schema(root);

  TrainRunConfig c;
  const std::string method = root.get<std::string>("method");
  const auto m = uq::train_method_from_name(method);
  if (!m) {
    if (eval_method_from_name(method))
      throw ConfigError("train config: method `" + method +
                        "` requires no training (use the evaluate subcommand)");
    throw ConfigError("train config: unknown method `" + method + "`");
  }
  c.method = *m;
  c.dataset_path = root.get<std::string>("dataset_path");
  c.output_dir = root.get_or<std::string>("output_dir", "");
  if (auto t = root.child_if_present("train")) c.train = parse_train_block(std::move(*t));
  if (auto b = root.child_if_present("backbone")) {
    c.backbone = parse_backbone_block(std::move(*b), uq::required_head(c.method));
  } else {
    c.backbone.head_kind = uq::required_head(c.method);
  }
  root.done();
  c.validate();
  return c;
}

EvalRunConfig parse_eval_config(const std::filesystem::path& path) {
  const json j = load_json(path);
  StrictView root(j, "eval config");
  check_schema(root);

  EvalRunConfig c;
  const std::string method = root.get<std::string>("method");
  const auto m = eval_method_from_name(method);
  if (!m) throw ConfigError("eval config: unknown method `" + method + "`");
  c.method = *m;
  c.dataset_path = root.get<std::string>("dataset_path");
  c.checkpoint_dir = root.get_or<std::string>("checkpoint_dir", "");
  c.output_dir = root.get_or<std::string>("output_dir", "");
  c.eval_bins = root.get_or<int>("eval_bins", 10);
  const std::string norm = root.get_or<std::string>("uce_normalize", "variance");
  if (norm == "variance") {
    c.uce_normalize = metrics::UceNormalization::Variance;
  } else if (norm == "stddev") {
    c.uce_normalize = metrics::UceNormalization::StdDev;
  } else {
    throw ConfigError("eval config: uce_normalize must be `variance` or `stddev`");
  }
  c.t_passes = root.get_or<int>("t_passes", 30);
  c.seed = root.get_or<std::uint64_t>("seed", 0);
  c.emit_plots = root.get_or<bool>("emit_plots", true);
  if (auto g = root.child_if_present("gp")) {
    c.gp.cap = g->get_or<int>("cap", c.gp.cap);
    c.gp.n_restarts = g->get_or<int>("n_restarts", c.gp.n_restarts);
    c.gp.max_iters = g->get_or<int>("max_iters", c.gp.max_iters);
    g->done();
  }
  c.gp.seed = c.seed;
  root.done();
  c.validate();
  return c;
}

DatasetConfig profile_dataset_config(Profile profile, PerceptualModel model,
                                     std::uint64_t root_seed) {
  DatasetConfig c;
  c.model = model;
  c.root_seed = root_seed;
  c.noise = model == PerceptualModel::Conic
                ? perception::NoiseModel::distance_linear(0.01, 0.08)
                : perception::NoiseModel::fixed(0.1);
  if (profile == Profile::Desk) {
    c.n_samples = 360;  // 300 train / 60 test
    c.train_fraction = 300.0 / 360.0;
    c.sim.grid_height = 64;
    c.sim.grid_width = 64;
  } else {
    c.n_samples = 2000;
    c.train_fraction = 0.8;
    c.sim.grid_height = 100;
    c.sim.grid_width = 100;
  }
  return c;
}

TrainRunConfig profile_train_config(Profile profile, uq::TrainMethod method,
                                    std::uint64_t seed) {
  TrainRunConfig c;
  c.method = method;
  c.train.seed = seed;
  c.backbone.head_kind = uq::required_head(method);
  switch (method) {
    case uq::TrainMethod::Mcd:
      c.train.learning_rate = 3e-4;
      c.backbone.dropout_rate = 0.2;
      break;
    case uq::TrainMethod::Ensemble:
      c.train.learning_rate = 3e-4;
      c.train.m_members = 5;
      break;
    case uq::TrainMethod::Edl:
      c.train.learning_rate = 5e-4;
      c.train.grad_clip_max_norm = 1.0;
      c.train.lambda = 1e-3;
      break;
  }
  if (profile == Profile::Desk) {
    c.train.epochs = 15;
    c.backbone.encoder_channels = {16, 32, 64, 128};
    c.backbone.bottleneck_channels = 256;
  } else {
    c.train.epochs = 50;
    c.backbone.encoder_channels = {32, 64, 128, 256, 512};
    c.backbone.bottleneck_channels = 1024;
  }
  return c;
}

EvalRunConfig profile_eval_config(Profile profile, EvalMethod method, std::uint64_t seed) {
  EvalRunConfig c;
  c.method = method;
  c.seed = seed;
  c.gp.seed = seed;
  c.eval_bins = 10;
  c.t_passes = 30;
  if (profile == Profile::Desk) {
    c.gp.cap = 800;
    c.gp.n_restarts = 2;
    c.gp.max_iters = 50;
  } else {
    c.gp.cap = 1500;
    c.gp.n_restarts = 3;
    c.gp.max_iters = 60;
  }
  return c;
}

}  // namespace fieldbench::bench
