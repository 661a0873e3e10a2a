#include "fieldbench/bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace fieldbench::bench {

using nlohmann::json;

namespace {

struct Cell {
  std::vector<double> rmse, uce, time_ms;
  bool empty() const { return rmse.empty(); }
};

struct MeanStd {
  double mean = 0.0, std = 0.0;
  bool present = false;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  out.present = true;
  for (double x : v) out.mean += x;
  out.mean /= double(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - out.mean) * (x - out.mean);
  out.std = v.size() > 1 ? std::sqrt(acc / double(v.size() - 1)) : 0.0;
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

int order_rank(const std::vector<std::string>& canon, const std::string& name) {
  for (std::size_t i = 0; i < canon.size(); ++i)
    if (canon[i] == name) return int(i);
  return int(canon.size());
}

}  // namespace

ReportOutputs run_report(const std::vector<std::filesystem::path>& results_dirs,
                         const std::filesystem::path& out_dir) {
  if (results_dirs.empty()) throw ReportError("report: need at least one results directory");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ReportError("cannot create output directory " + out_dir.string());

  std::map<std::pair<std::string, std::string>, Cell> cells;  // (method, dataset) -> samples
  for (const auto& dir : results_dirs) {
    const auto summary_path = dir / "summary.json";
    std::ifstream in(summary_path);
    if (!in) throw ReportError("missing summary.json in " + dir.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ReportError("invalid " + summary_path.string() + ": " + e.what());
    }
    if (!j.contains("schema_version") || j.at("schema_version") != kSchemaVersion)
      throw ReportError("schema_version mismatch in " + summary_path.string());
    const std::string method = j.at("method");
    const std::string dataset = j.at("dataset_model");

    std::ifstream csv(dir / "results.csv");
    if (!csv) throw ReportError("missing results.csv in " + dir.string());
    std::string line;
    std::getline(csv, line);  // header
    auto& cell = cells[{method, dataset}];
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      const auto cols = split_csv_line(line);
      if (cols.size() != 7) throw ReportError("malformed results.csv row in " + dir.string());
      cell.rmse.push_back(std::stod(cols[2]));
      cell.uce.push_back(std::stod(cols[3]));
      cell.time_ms.push_back(std::stod(cols[6]));
    }
  }

  std::vector<std::string> methods, datasets;
  for (const auto& [key, cell] : cells) {
    if (std::find(methods.begin(), methods.end(), key.first) == methods.end())
      methods.push_back(key.first);
    if (std::find(datasets.begin(), datasets.end(), key.second) == datasets.end())
      datasets.push_back(key.second);
  }
  const std::vector<std::string> method_order = {"edl", "ensemble", "mcd", "gp"};
  const std::vector<std::string> dataset_order = {"pointwise", "conic", "nadir"};
  std::sort(methods.begin(), methods.end(), [&](const auto& a, const auto& b) {
    const int ra = order_rank(method_order, a), rb = order_rank(method_order, b);
    return ra != rb ? ra < rb : a < b;
  });
  std::sort(datasets.begin(), datasets.end(), [&](const auto& a, const auto& b) {
    const int ra = order_rank(dataset_order, a), rb = order_rank(dataset_order, b);
    return ra != rb ? ra < rb : a < b;
  });

  struct Metric {
    const char* name;
    std::vector<double> Cell::* field;
  };
  const Metric metrics[] = {{"rmse", &Cell::rmse},
                            {"uce", &Cell::uce},
                            {"time_ms", &Cell::time_ms}};

  ReportOutputs out;
  out.text = out_dir / "report.txt";
  std::ofstream txt(out.text, std::ios::trunc);
  if (!txt) throw ReportError("cannot write " + out.text.string());

  for (const auto& metric : metrics) {
    // stats per (method, dataset)
    std::map<std::pair<std::string, std::string>, MeanStd> stats;
    for (const auto& [key, cell] : cells) stats[key] = mean_std(cell.*(metric.field));

    // best (lowest mean) per dataset column
    std::map<std::string, std::string> best;
    for (const auto& ds : datasets) {
      double best_mean = std::numeric_limits<double>::infinity();
      for (const auto& m : methods) {
        const auto it = stats.find({m, ds});
        if (it != stats.end() && it->second.present && it->second.mean < best_mean) {
          best_mean = it->second.mean;
          best[ds] = m;
        }
      }
    }

    const auto csv_path = out_dir / ("report_" + std::string(metric.name) + ".csv");
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw ReportError("cannot write " + csv_path.string());
    csv << "method";
    for (const auto& ds : datasets) csv << "," << ds << "_mean," << ds << "_std";
    csv << "\n";

    txt << metric.name << " (mean +- std across test samples; * marks the best per column)\n";
    txt << "  " << std::string(10, ' ');
    for (const auto& ds : datasets) {
      char head[40];
      std::snprintf(head, sizeof(head), "%-24s", ds.c_str());
      txt << head;
    }
    txt << "\n";

    char buf[64];
    for (const auto& m : methods) {
      csv << m;
      std::snprintf(buf, sizeof(buf), "  %-10s", m.c_str());
      txt << buf;
      for (const auto& ds : datasets) {
        const auto it = stats.find({m, ds});
        if (it == stats.end() || !it->second.present) {
          csv << ",,";
          txt << std::string(24, ' ').replace(0, 1, "-");
        } else {
          std::snprintf(buf, sizeof(buf), ",%.6g,%.6g", it->second.mean, it->second.std);
          csv << buf;
          const bool starred = best.count(ds) && best[ds] == m;
          std::snprintf(buf, sizeof(buf), "%.4g +- %.4g%s", it->second.mean, it->second.std,
                        starred ? " *" : "");
          char padded[40];
          std::snprintf(padded, sizeof(padded), "%-24s", buf);
          txt << padded;
        }
      }
      csv << "\n";
      txt << "\n";
    }
    txt << "\n";
    out.csvs.push_back(csv_path);
  }
  return out;
}

}  // namespace fieldbench::bench
