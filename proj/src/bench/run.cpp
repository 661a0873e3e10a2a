#include "fieldbench/bench/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "fieldbench/bench/plot.hpp"
#include "fieldbench/core/parallel.hpp"
#include "fieldbench/core/rng.hpp"
#include "fieldbench/gp/gp.hpp"
#include "fieldbench/nn/checkpoint.hpp"
#include "fieldbench/uq/predictors.hpp"

namespace fieldbench::bench {

using nlohmann::json;

namespace {

std::vector<uq::TrainSample> load_split(const std::filesystem::path& dataset_dir,
                                        const std::vector<int>& ids) {
  std::vector<uq::TrainSample> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto s = load_sample(dataset_dir, ids[i]);
    out[i].input.mask = std::move(s.mask);
    out[i].input.value = std::move(s.value);
    out[i].field = std::move(s.field);
  }
  return out;
}

void write_log_csv(const std::filesystem::path& path,
                   const std::vector<std::vector<uq::EpochLogEntry>>& logs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RunError("cannot write training log: " + path.string());
  out << "model_index,epoch,split,loss\n";
  char buf[64];
  for (std::size_t m = 0; m < logs.size(); ++m) {
    for (const auto& e : logs[m]) {
      std::snprintf(buf, sizeof(buf), "%.17g", e.loss);
      out << m << "," << e.epoch << "," << e.split << "," << buf << "\n";
    }
  }
}

}  // namespace

void write_sidecar(const std::filesystem::path& path, const Sidecar& s) {
  json j;
  j["schema_version"] = s.schema_version;
  j["format"] = "UQCK-v1";
  j["method"] = s.method;
  j["member_index"] = s.member_index;
  j["backbone"] = {{"encoder_channels", s.backbone.encoder_channels},
                   {"bottleneck_channels", s.backbone.bottleneck_channels},
                   {"head_kind", nn::head_kind_name(s.backbone.head_kind)},
                   {"dropout_rate", s.backbone.dropout_rate},
                   {"pad_inputs", s.backbone.pad_inputs}};
  j["train"] = {{"epochs", s.train.epochs},
                {"batch_size", s.train.batch_size},
                {"learning_rate", s.train.learning_rate},
                {"grad_clip_max_norm",
                 s.train.grad_clip_max_norm ? json(*s.train.grad_clip_max_norm) : json()},
                {"lambda", s.train.lambda},
                {"t_passes", s.train.t_passes},
                {"m_members", s.train.m_members},
                {"seed", s.train.seed}};
  std::ofstream out(path);
  if (!out) throw RunError("cannot write sidecar: " + path.string());
  out << j.dump(2) << "\n";
}

Sidecar read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RunError("missing checkpoint sidecar: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw RunError("invalid sidecar " + path.string() + ": " + e.what());
  }
  try {
    Sidecar s;
    s.schema_version = j.at("schema_version");
    if (s.schema_version != kSchemaVersion)
      throw RunError("unsupported sidecar schema_version in " + path.string());
    s.method = j.at("method");
    s.member_index = j.value("member_index", 0);
    const auto& b = j.at("backbone");
    s.backbone.encoder_channels = b.at("encoder_channels").get<std::vector<int>>();
    s.backbone.bottleneck_channels = b.at("bottleneck_channels");
    const auto kind = nn::head_kind_from_name(b.at("head_kind"));
    if (!kind) throw RunError("unknown head_kind in " + path.string());
    s.backbone.head_kind = *kind;
    s.backbone.dropout_rate = b.at("dropout_rate");
    s.backbone.pad_inputs = b.at("pad_inputs");
    const auto& t = j.at("train");
    s.train.epochs = t.at("epochs");
    s.train.batch_size = t.at("batch_size");
    s.train.learning_rate = t.at("learning_rate");
    if (!t.at("grad_clip_max_norm").is_null())
      s.train.grad_clip_max_norm = t.at("grad_clip_max_norm").get<double>();
    s.train.lambda = t.at("lambda");
    s.train.t_passes = t.at("t_passes");
    s.train.m_members = t.at("m_members");
    s.train.seed = t.at("seed");
    return s;
  } catch (const json::exception& e) {
    throw RunError("malformed sidecar " + path.string() + ": " + e.what());
  }
}

TrainRunResult run_training(const TrainRunConfig& cfg, int jobs) {
  cfg.validate();
  if (cfg.output_dir.empty()) throw ConfigError("train: output_dir is required");
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw RunError("cannot create output directory " + cfg.output_dir.string());

  const DatasetManifest manifest = read_manifest(cfg.dataset_path);
  const auto train_set = load_split(cfg.dataset_path, manifest.train_ids);

  const int n_models =
      cfg.method == uq::TrainMethod::Ensemble ? cfg.train.m_members : 1;
  std::vector<std::vector<uq::EpochLogEntry>> logs;
  logs.resize(std::size_t(n_models));
  TrainRunResult result;
  result.checkpoints.resize(std::size_t(n_models));

  // Each member is an independent run differing only by seed; training them
  // in parallel tasks is byte-identical to the sequential loop.
  parallel_for(n_models, jobs, [&](int m) {
    uq::TrainConfig member_cfg = cfg.train;
    member_cfg.seed = cfg.train.seed + std::uint64_t(m);
    member_cfg.m_members = 1;
    auto trained = uq::train(cfg.method, train_set, member_cfg, cfg.backbone);
    logs[std::size_t(m)] = std::move(trained.logs[0]);

    char name[32];
    if (cfg.method == uq::TrainMethod::Ensemble) {
      std::snprintf(name, sizeof(name), "member_%02d.uqck", m);
    } else {
      std::snprintf(name, sizeof(name), "model.uqck");
    }
    const auto ckpt = cfg.output_dir / name;
    nn::save_checkpoint(ckpt, *trained.models[0]);
    Sidecar side{kSchemaVersion, uq::train_method_name(cfg.method), m, cfg.backbone,
                 cfg.train};
    write_sidecar(ckpt.string() + ".json", side);
    result.checkpoints[std::size_t(m)] = ckpt;
  });

  result.log_csv = cfg.output_dir / "training_log.csv";
  write_log_csv(result.log_csv, logs);
  return result;
}

namespace {

struct TestSample {
  int id = 0;
  perception::InputPair input;
  GridD field;
  std::int64_t n_obs = 0;
};

std::vector<TestSample> load_test(const std::filesystem::path& dataset_dir,
                                  const std::vector<int>& ids) {
  std::vector<TestSample> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto s = load_sample(dataset_dir, ids[i]);
    out[i].id = ids[i];
    out[i].field = s.field.cast<double>();
    std::int64_t n_obs = 0;
    for (float m : s.mask.v) n_obs += m > 0.5f ? 1 : 0;
    out[i].n_obs = n_obs;
    out[i].input.mask = std::move(s.mask);
    out[i].input.value = std::move(s.value);
  }
  return out;
}

perception::ObservationSet observations_from_raster(const perception::InputPair& input) {
  perception::ObservationSet obs;
  for (int r = 0; r < input.mask.rows; ++r)
    for (int c = 0; c < input.mask.cols; ++c)
      if (input.mask.at(r, c) > 0.5f)
        obs.records.push_back({r, c, double(input.value.at(r, c)), 0.0, 0});
  return obs;
}

struct DeepModels {
  std::vector<std::unique_ptr<nn::UNetBackbone>> models;
  Sidecar sidecar;
};

DeepModels load_models(const EvalRunConfig& cfg) {
  DeepModels out;
  std::vector<std::filesystem::path> files;
  if (cfg.method == EvalMethod::Ensemble) {
    for (const auto& entry : std::filesystem::directory_iterator(cfg.checkpoint_dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("member_", 0) == 0 && entry.path().extension() == ".uqck")
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw RunError("no member_*.uqck checkpoints in " + cfg.checkpoint_dir.string());
  } else {
    files.push_back(cfg.checkpoint_dir / "model.uqck");
  }
  for (const auto& f : files) {
    const Sidecar side = read_sidecar(f.string() + ".json");
    auto model = std::make_unique<nn::UNetBackbone>(side.backbone);
    nn::load_checkpoint(f, *model);
    out.models.push_back(std::move(model));
    out.sidecar = side;
  }
  const char* want = eval_method_name(cfg.method);
  if (out.sidecar.method != want)
    throw RunError(std::string("checkpoint was trained for method `") + out.sidecar.method +
                   "`, not `" + want + "`");
  return out;
}

metrics::CalibrationCurve aggregate_curves(const std::vector<metrics::EvalRecord>& records) {
  metrics::CalibrationCurve agg;
  if (records.empty()) return agg;
  const auto& first = records.front().curve;
  agg.bin_edges = first.bin_edges;
  const std::size_t b = first.bin_counts.size();
  agg.mean_pred_unc.assign(b, 0.0);
  agg.mean_emp_err.assign(b, 0.0);
  agg.bin_counts.assign(b, 0);
  for (const auto& rec : records) {
    for (std::size_t i = 0; i < b; ++i) {
      agg.mean_pred_unc[i] += rec.curve.mean_pred_unc[i] * double(rec.curve.bin_counts[i]);
      agg.mean_emp_err[i] += rec.curve.mean_emp_err[i] * double(rec.curve.bin_counts[i]);
      agg.bin_counts[i] += rec.curve.bin_counts[i];
    }
  }
  for (std::size_t i = 0; i < b; ++i) {
    if (agg.bin_counts[i] == 0) continue;
    agg.mean_pred_unc[i] /= double(agg.bin_counts[i]);
    agg.mean_emp_err[i] /= double(agg.bin_counts[i]);
  }
  return agg;
}

json curve_to_json(const metrics::CalibrationCurve& c) {
  return {{"bin_edges", c.bin_edges},
          {"mean_pred_unc", c.mean_pred_unc},
          {"mean_emp_err", c.mean_emp_err},
          {"bin_counts", c.bin_counts}};
}

struct MeanStd {
  double mean = 0.0, std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= double(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - out.mean) * (x - out.mean);
  out.std = v.size() > 1 ? std::sqrt(acc / double(v.size() - 1)) : 0.0;
  return out;
}

}  // namespace

EvalOutputs run_evaluation(const EvalRunConfig& cfg, int jobs) {
  cfg.validate();
  if (cfg.output_dir.empty()) throw ConfigError("evaluate: output_dir is required");
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw RunError("cannot create output directory " + cfg.output_dir.string());

  const DatasetManifest manifest = read_manifest(cfg.dataset_path);
  const auto test_set = load_test(cfg.dataset_path, manifest.test_ids);
  if (test_set.empty()) throw RunError("dataset has an empty test split");

  const char* method = eval_method_name(cfg.method);
  std::vector<metrics::EvalRecord> records(test_set.size());

  // Worker chunks own their model instances: forward passes keep per-layer
  // scratch, so instances must not be shared across threads.
  const int n = int(test_set.size());
  const int chunks = std::max(1, std::min(jobs, n));
  const int per_chunk = (n + chunks - 1) / chunks;
  parallel_for(chunks, chunks, [&](int chunk) {
    const int begin = chunk * per_chunk;
    const int end = std::min(n, begin + per_chunk);
    if (begin >= end) return;

    DeepModels deep;
    if (cfg.method != EvalMethod::Gp) deep = load_models(cfg);
    std::vector<nn::UNetBackbone*> member_ptrs;
    for (auto& m : deep.models) member_ptrs.push_back(m.get());

    for (int i = begin; i < end; ++i) {
      const auto& sample = test_set[std::size_t(i)];
      uq::UncertainFieldEstimate est;
      const auto t0 = std::chrono::steady_clock::now();
      switch (cfg.method) {
        case EvalMethod::Edl:
          est = uq::edl_predict(*deep.models[0], sample.input);
          break;
        case EvalMethod::Mcd:
          est = uq::mcd_predict(*deep.models[0], sample.input, cfg.t_passes,
                                mix_seed(cfg.seed, std::uint64_t(sample.id)));
          break;
        case EvalMethod::Ensemble:
          est = uq::ensemble_predict(member_ptrs, sample.input);
          break;
        case EvalMethod::Gp: {
          const auto obs = observations_from_raster(sample.input);
          gp::GPFitOptions opts = cfg.gp;
          opts.seed = mix_seed(cfg.seed, std::uint64_t(sample.id));
          const auto init = gp::default_init(obs, sample.field.dims());
          const auto fit = gp::gp_fit(obs, init, opts);
          est = gp::gp_predict(obs, fit.hyper, sample.field.dims());
          break;
        }
      }
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();

      auto& rec = records[std::size_t(i)];
      rec.sample_id = sample.id;
      rec.method_tag = method;
      rec.rmse = metrics::rmse(est.mean, sample.field);
      const auto u = metrics::uce(est.total, est.mean, sample.field, cfg.eval_bins,
                                  cfg.uce_normalize);
      rec.uce = u.uce;
      rec.curve = u.curve;
      rec.degenerate_uncertainty = u.degenerate_uncertainty;
      rec.inference_ms = ms;
      rec.n_obs = sample.n_obs;
    }
  });

  EvalOutputs out;
  out.records = records;

  // results.csv: metric columns first, wall-clock last so determinism
  // comparisons can strip it.
  out.results_csv = cfg.output_dir / "results.csv";
  {
    std::ofstream csv(out.results_csv, std::ios::trunc);
    if (!csv) throw RunError("cannot write " + out.results_csv.string());
    csv << "sample_id,method,rmse,uce,n_obs,degenerate_uncertainty,inference_ms\n";
    char buf[96];
    for (const auto& r : records) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g", r.rmse, r.uce);
      csv << r.sample_id << "," << r.method_tag << "," << buf << "," << r.n_obs << ","
          << (r.degenerate_uncertainty ? 1 : 0) << ",";
      std::snprintf(buf, sizeof(buf), "%.6f", r.inference_ms);
      csv << buf << "\n";
    }
  }

  std::vector<double> rmses, uces, times;
  for (const auto& r : records) {
    rmses.push_back(r.rmse);
    uces.push_back(r.uce);
    times.push_back(r.inference_ms);
  }
  const MeanStd rm = mean_std(rmses), um = mean_std(uces), tm = mean_std(times);

  out.summary_json = cfg.output_dir / "summary.json";
  {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["method"] = method;
    j["dataset_model"] = perceptual_model_name(manifest.config.model);
    j["dataset_path"] = cfg.dataset_path.string();
    j["n_test"] = int(test_set.size());
    j["metrics"] = {{"rmse_mean", rm.mean}, {"rmse_std", rm.std},
                    {"uce_mean", um.mean},  {"uce_std", um.std},
                    {"time_ms_mean", tm.mean}, {"time_ms_std", tm.std}};
    std::ofstream js(out.summary_json, std::ios::trunc);
    if (!js) throw RunError("cannot write " + out.summary_json.string());
    js << j.dump(2) << "\n";
  }

  const auto agg = aggregate_curves(records);
  out.curves_json = cfg.output_dir / "curves.json";
  {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["method"] = method;
    j["aggregate"] = curve_to_json(agg);
    json per;
    for (const auto& r : records) {
      json e = curve_to_json(r.curve);
      e["sample_id"] = r.sample_id;
      per.push_back(std::move(e));
    }
    j["per_sample"] = std::move(per);
    std::ofstream js(out.curves_json, std::ios::trunc);
    if (!js) throw RunError("cannot write " + out.curves_json.string());
    js << j.dump(2) << "\n";
  }

  if (cfg.emit_plots) {
    const auto plot_path =
        cfg.output_dir / ("calibration_" + std::string(method) + ".png");
    write_calibration_png(plot_path, agg);
    out.plots.push_back(plot_path);
  }
  return out;
}

}  // namespace fieldbench::bench
