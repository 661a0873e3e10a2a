#include "fieldbench/bench/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "fieldbench/core/parallel.hpp"
#include "fieldbench/core/rng.hpp"

namespace fieldbench::bench {

using nlohmann::json;

namespace {

// Stream tags for per-sample seed derivation.
enum : std::uint64_t { kTagWind = 1, kTagField = 2, kTagTraj = 3, kTagObs = 4, kTagSplit = 5 };

json noise_to_json(const perception::NoiseModel& n) {
  if (n.kind == perception::NoiseModel::Kind::Fixed)
    return {{"kind", "fixed"}, {"sigma", n.sigma}};
  return {{"kind", "distance_linear"}, {"sigma_min", n.sigma_min}, {"sigma_max", n.sigma_max}};
}

perception::NoiseModel noise_from_json(const json& j) {
  if (j.at("kind") == "fixed") return perception::NoiseModel::fixed(j.at("sigma"));
  return perception::NoiseModel::distance_linear(j.at("sigma_min"), j.at("sigma_max"));
}

}  // namespace

std::filesystem::path sample_dir(const std::filesystem::path& dataset_dir, int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%05d", id);
  return dataset_dir / buf;
}

void write_manifest(const std::filesystem::path& dataset_dir, const DatasetManifest& m) {
  const auto& c = m.config;
  json j;
  j["schema_version"] = m.schema_version;
  j["perceptual_model"] = perceptual_model_name(c.model);
  j["n_samples"] = c.n_samples;
  j["train_fraction"] = c.train_fraction;
  j["root_seed"] = c.root_seed;
  j["sim_params"] = {{"grid_height", c.sim.grid_height},
                     {"grid_width", c.sim.grid_width},
                     {"n_particles", c.sim.n_particles},
                     {"spill_radius", c.sim.spill_radius},
                     {"wind_speed", std::hypot(c.sim.wind_velocity[0], c.sim.wind_velocity[1])},
                     {"tidal_speed", c.sim.tidal_speed},
                     {"diffusion_sigma", c.sim.diffusion_sigma},
                     {"n_steps", c.sim.n_steps},
                     {"deposition_bandwidth", c.sim.deposition_bandwidth},
                     {"randomize_wind_direction", c.randomize_wind_direction}};
  j["trajectory_params"] = {{"min_steps", c.trajectory.min_steps},
                            {"max_steps", c.trajectory.max_steps},
                            {"max_turn_rate", c.trajectory.max_turn_rate},
                            {"step_length", c.trajectory.step_length}};
  j["noise_model"] = noise_to_json(c.noise);
  if (c.model == PerceptualModel::Conic)
    j["cone_params"] = {{"half_angle", c.cone.half_angle}, {"max_range", c.cone.max_range}};
  if (c.model == PerceptualModel::Nadir)
    j["nadir_params"] = {{"patch_side", c.nadir.patch_side}, {"altitude", c.nadir.altitude}};
  j["split"] = {{"train", m.train_ids}, {"test", m.test_ids}};

  std::ofstream out(dataset_dir / "manifest.json");
  if (!out) throw DatasetError("cannot write manifest in " + dataset_dir.string());
  out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir) {
  const auto path = dataset_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DatasetError("missing manifest: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DatasetError("invalid manifest " + path.string() + ": " + e.what());
  }
  try {
    DatasetManifest m;
    m.schema_version = j.at("schema_version");
    if (m.schema_version != kSchemaVersion)
      throw DatasetError("unsupported manifest schema_version in " + path.string());
    auto& c = m.config;
    const auto pm = perceptual_model_from_name(j.at("perceptual_model"));
    if (!pm) throw DatasetError("unknown perceptual_model in " + path.string());
    c.model = *pm;
    c.n_samples = j.at("n_samples");
    c.train_fraction = j.at("train_fraction");
    c.root_seed = j.at("root_seed");
    const auto& s = j.at("sim_params");
    c.sim.grid_height = s.at("grid_height");
    c.sim.grid_width = s.at("grid_width");
    c.sim.n_particles = s.at("n_particles");
    c.sim.spill_radius = s.at("spill_radius");
    c.sim.wind_velocity = {s.at("wind_speed").get<double>(), 0.0};
    c.sim.tidal_speed = s.at("tidal_speed");
    c.sim.diffusion_sigma = s.at("diffusion_sigma");
    c.sim.n_steps = s.at("n_steps");
    c.sim.deposition_bandwidth = s.at("deposition_bandwidth");
    c.randomize_wind_direction = s.at("randomize_wind_direction");
    const auto& t = j.at("trajectory_params");
    c.trajectory.min_steps = t.at("min_steps");
    c.trajectory.max_steps = t.at("max_steps");
    c.trajectory.max_turn_rate = t.at("max_turn_rate");
    c.trajectory.step_length = t.at("step_length");
    c.noise = noise_from_json(j.at("noise_model"));
    if (j.contains("cone_params")) {
      c.cone.half_angle = j.at("cone_params").at("half_angle");
      c.cone.max_range = j.at("cone_params").at("max_range");
    }
    if (j.contains("nadir_params")) {
      c.nadir.patch_side = j.at("nadir_params").at("patch_side");
      c.nadir.altitude = j.at("nadir_params").at("altitude");
    }
    m.train_ids = j.at("split").at("train").get<std::vector<int>>();
    m.test_ids = j.at("split").at("test").get<std::vector<int>>();
    return m;
  } catch (const json::exception& e) {
    throw DatasetError("malformed manifest " + path.string() + ": " + e.what());
  }
}

namespace {

void generate_one_sample(const DatasetConfig& c, const std::filesystem::path& out_dir,
                         int id) {
  sim::SimParams params = c.sim;
  if (c.randomize_wind_direction) {
    Rng wind_rng(mix_seed(c.root_seed, kTagWind, std::uint64_t(id)));
    const double angle = wind_rng.uniform(0.0, 2.0 * M_PI);
    const double speed = std::hypot(c.sim.wind_velocity[0], c.sim.wind_velocity[1]);
    params.wind_velocity = {speed * std::cos(angle), speed * std::sin(angle)};
  }

  sim::Field field;
  bool generated = false;
  for (std::uint64_t attempt = 0; attempt < 16 && !generated; ++attempt) {
    try {
      field = sim::generate_field(params, mix_seed(c.root_seed, kTagField,
                                                   std::uint64_t(id), attempt));
      generated = true;
    } catch (const sim::DegenerateField&) {
    }
  }
  if (!generated)
    throw DatasetError("sample " + std::to_string(id) +
                       ": field degenerate after 16 attempts; check sim parameters");

  const GridDims dims{params.grid_height, params.grid_width};
  const auto traj = sim::generate_trajectory(c.trajectory, dims,
                                             mix_seed(c.root_seed, kTagTraj, std::uint64_t(id)));
  const std::uint64_t obs_seed = mix_seed(c.root_seed, kTagObs, std::uint64_t(id));
  perception::ObservationSet obs;
  switch (c.model) {
    case PerceptualModel::Pointwise:
      obs = perception::observe_pointwise(field, traj, c.noise, obs_seed);
      break;
    case PerceptualModel::Conic:
      obs = perception::observe_conical(field, traj, c.cone, c.noise, obs_seed);
      break;
    case PerceptualModel::Nadir:
      obs = perception::observe_nadir(field, traj, c.nadir, c.noise, obs_seed);
      break;
  }
  const auto input = perception::rasterize(obs, dims);

  const auto dir = sample_dir(out_dir, id);
  std::filesystem::create_directories(dir);
  write_raw2d(dir / "field.uf2d", field.values.cast<float>());
  write_raw2d(dir / "mask.uf2d", input.mask);
  write_raw2d(dir / "value.uf2d", input.value);
}

}  // namespace

DatasetManifest generate_dataset(const DatasetConfig& config,
                                 const std::filesystem::path& out_dir, int jobs) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DatasetError("cannot create dataset directory " + out_dir.string());

  DatasetManifest manifest;
  manifest.config = config;

  std::vector<int> ids(std::size_t(config.n_samples));
  std::iota(ids.begin(), ids.end(), 0);
  Rng split_rng(mix_seed(config.root_seed, kTagSplit));
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = std::size_t(split_rng.uniform_int(0, std::int64_t(i) - 1));
    std::swap(ids[i - 1], ids[j]);
  }
  const auto n_train = std::size_t(std::llround(config.train_fraction * config.n_samples));
  if (n_train == 0 || n_train >= ids.size())
    throw DatasetError("train_fraction leaves an empty split");
  manifest.train_ids.assign(ids.begin(), ids.begin() + std::ptrdiff_t(n_train));
  manifest.test_ids.assign(ids.begin() + std::ptrdiff_t(n_train), ids.end());
  std::sort(manifest.train_ids.begin(), manifest.train_ids.end());
  std::sort(manifest.test_ids.begin(), manifest.test_ids.end());

  parallel_for(config.n_samples, jobs,
               [&](int id) { generate_one_sample(config, out_dir, id); });

  write_manifest(out_dir, manifest);
  return manifest;
}

LoadedSample load_sample(const std::filesystem::path& dataset_dir, int id) {
  const auto dir = sample_dir(dataset_dir, id);
  LoadedSample s;
  s.id = id;
  try {
    s.field = read_raw2d(dir / "field.uf2d");
    s.mask = read_raw2d(dir / "mask.uf2d");
    s.value = read_raw2d(dir / "value.uf2d");
  } catch (const Raw2dError& e) {
    throw DatasetError(std::string("broken dataset sample: ") + e.what());
  }
  return s;
}

}  // namespace fieldbench::bench
