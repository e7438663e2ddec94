#include "survfuse/reports.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace survfuse {

namespace {

using json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void check_schema(const json& j, const char* kind,
                  const std::filesystem::path& path) {
  if (j.value("kind", "") != kind) {
    throw std::invalid_argument(path.string() + ": expected kind '" +
                                kind + "'");
  }
  const int version = j.value("schema_version", -1);
  if (version != kReportSchemaVersion) {
    throw std::invalid_argument(
        path.string() + ": schema_version " + std::to_string(version) +
        " is not supported (expected " +
        std::to_string(kReportSchemaVersion) + "); no migration available");
  }
}

}  // namespace

std::vector<std::filesystem::path> write_crossval_report(
    const std::filesystem::path& dir, const CrossvalReport& report) {
  std::filesystem::create_directories(dir);
  json j;
  j["kind"] = "crossval_report";
  j["schema_version"] = report.schema_version;
  j["label"] = report.label;
  j["seed"] = report.seed;
  j["dc_eval"] = report.dc_eval;
  j["config"] = report.config;
  json folds = json::array();
  for (const auto& f : report.folds) {
    json fj;
    fj["fold"] = f.fold_index;
    fj["n_train"] = f.n_train;
    fj["n_test"] = f.n_test;
    fj["c_index"] = f.c_index;
    fj["clinical_c_index"] = f.clinical_c_index;
    fj["d1"] = f.dc.d1;
    fj["d2"] = f.dc.d2;
    fj["dc_total"] = f.dc.total;
    fj["checkpoint"] = f.checkpoint_path;
    fj["epoch_loss_total"] = f.epoch_total;
    fj["epoch_loss_surv"] = f.epoch_surv;
    fj["epoch_loss_dis"] = f.epoch_dis;
    folds.push_back(std::move(fj));
  }
  j["folds"] = std::move(folds);
  j["summary"] = {
      {"c_index_mean", report.mean(&FoldResult::c_index)},
      {"c_index_std", report.stddev(&FoldResult::c_index)},
      {"clinical_c_index_mean", report.mean(&FoldResult::clinical_c_index)},
      {"clinical_c_index_std", report.stddev(&FoldResult::clinical_c_index)},
      {"d1_mean", report.mean_dc(&DcReport::d1)},
      {"d1_std", report.stddev_dc(&DcReport::d1)},
      {"d2_mean", report.mean_dc(&DcReport::d2)},
      {"d2_std", report.stddev_dc(&DcReport::d2)},
      {"dc_total_mean", report.mean_dc(&DcReport::total)},
      {"dc_total_std", report.stddev_dc(&DcReport::total)},
  };

  const auto json_path = dir / "crossval_report.json";
  {
    std::ofstream f(json_path);
    if (!f) throw std::runtime_error("cannot write " + json_path.string());
    f << j.dump(1) << '\n';
  }

  const auto csv_path = dir / "crossval_report.csv";
  {
    std::ofstream f(csv_path);
    if (!f) throw std::runtime_error("cannot write " + csv_path.string());
    f << "label,fold,c_index,clinical_c_index,d1,d2,dc_total\n";
    for (const auto& fr : report.folds) {
      f << report.label << ',' << fr.fold_index << ',' << fmt(fr.c_index)
        << ',' << fmt(fr.clinical_c_index) << ',' << fmt(fr.dc.d1) << ','
        << fmt(fr.dc.d2) << ',' << fmt(fr.dc.total) << '\n';
    }
    f << report.label << ",mean," << fmt(report.mean(&FoldResult::c_index))
      << ',' << fmt(report.mean(&FoldResult::clinical_c_index)) << ','
      << fmt(report.mean_dc(&DcReport::d1)) << ','
      << fmt(report.mean_dc(&DcReport::d2)) << ','
      << fmt(report.mean_dc(&DcReport::total)) << '\n';
    f << report.label << ",std," << fmt(report.stddev(&FoldResult::c_index))
      << ',' << fmt(report.stddev(&FoldResult::clinical_c_index)) << ','
      << fmt(report.stddev_dc(&DcReport::d1)) << ','
      << fmt(report.stddev_dc(&DcReport::d2)) << ','
      << fmt(report.stddev_dc(&DcReport::total)) << '\n';
  }
  return {json_path, csv_path};
}

CrossvalReport read_crossval_report(const std::filesystem::path& json_path) {
  std::ifstream f(json_path);
  if (!f) throw std::invalid_argument("cannot open " + json_path.string());
  json j;
  f >> j;
  check_schema(j, "crossval_report", json_path);

  CrossvalReport report;
  report.schema_version = j.at("schema_version").get<int>();
  report.label = j.at("label").get<std::string>();
  report.seed = j.at("seed").get<std::uint64_t>();
  report.dc_eval = j.at("dc_eval").get<std::string>();
  report.config =
      j.at("config").get<std::map<std::string, std::string>>();
  for (const auto& fj : j.at("folds")) {
    FoldResult fr;
    fr.fold_index = fj.at("fold").get<int>();
    fr.n_train = fj.at("n_train").get<int>();
    fr.n_test = fj.at("n_test").get<int>();
    fr.c_index = fj.at("c_index").get<double>();
    fr.clinical_c_index = fj.at("clinical_c_index").get<double>();
    fr.dc.d1 = fj.at("d1").get<double>();
    fr.dc.d2 = fj.at("d2").get<double>();
    fr.dc.total = fj.at("dc_total").get<double>();
    fr.checkpoint_path = fj.at("checkpoint").get<std::string>();
    fr.epoch_total = fj.at("epoch_loss_total").get<std::vector<double>>();
    fr.epoch_surv = fj.at("epoch_loss_surv").get<std::vector<double>>();
    fr.epoch_dis = fj.at("epoch_loss_dis").get<std::vector<double>>();
    report.folds.push_back(std::move(fr));
  }
  return report;
}

std::vector<std::filesystem::path> write_explain_report(
    const std::filesystem::path& dir, const ExplainReportFile& file) {
  std::filesystem::create_directories(dir);
  const ExplainReport& r = file.report;
  json j;
  j["kind"] = "explain_report";
  j["schema_version"] = file.schema_version;
  j["label"] = file.label;
  j["baseline_mode"] = file.baseline_mode;
  j["recipe"] = file.recipe;
  j["patients_excluded"] = r.total_excluded;
  json blocks = json::object();
  for (int k = 0; k < 4; ++k) {
    blocks[kBranchNames[static_cast<std::size_t>(k)]] = {
        {"mean", r.block_mean[static_cast<std::size_t>(k)]},
        {"std", r.block_std[static_cast<std::size_t>(k)]}};
  }
  j["blocks"] = std::move(blocks);
  j["specific"] = {{"mean", r.specific_mean}, {"std", r.specific_std}};
  j["shared"] = {{"mean", r.shared_mean}, {"std", r.shared_std}};
  json folds = json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"gg", f.block_share[kGG]},
                     {"hh", f.block_share[kHH]},
                     {"hg", f.block_share[kHG]},
                     {"gh", f.block_share[kGH]},
                     {"specific", f.specific},
                     {"shared", f.shared},
                     {"patients_used", f.patients_used},
                     {"patients_excluded", f.patients_excluded}});
  }
  j["folds"] = std::move(folds);

  const auto json_path = dir / "explain_report.json";
  {
    std::ofstream f(json_path);
    if (!f) throw std::runtime_error("cannot write " + json_path.string());
    f << j.dump(1) << '\n';
  }
  const auto csv_path = dir / "explain_report.csv";
  {
    std::ofstream f(csv_path);
    if (!f) throw std::runtime_error("cannot write " + csv_path.string());
    f << "label,repr,share_mean,share_std\n";
    f << file.label << ",specific," << fmt(r.specific_mean) << ','
      << fmt(r.specific_std) << '\n';
    f << file.label << ",shared," << fmt(r.shared_mean) << ','
      << fmt(r.shared_std) << '\n';
    for (int k = 0; k < 4; ++k) {
      f << file.label << ',' << kBranchNames[static_cast<std::size_t>(k)]
        << ',' << fmt(r.block_mean[static_cast<std::size_t>(k)]) << ','
        << fmt(r.block_std[static_cast<std::size_t>(k)]) << '\n';
    }
  }
  return {json_path, csv_path};
}

ExplainReportFile read_explain_report(
    const std::filesystem::path& json_path) {
  std::ifstream f(json_path);
  if (!f) throw std::invalid_argument("cannot open " + json_path.string());
  json j;
  f >> j;
  check_schema(j, "explain_report", json_path);

  ExplainReportFile file;
  file.schema_version = j.at("schema_version").get<int>();
  file.label = j.at("label").get<std::string>();
  file.baseline_mode = j.at("baseline_mode").get<std::string>();
  file.recipe = j.at("recipe").get<std::string>();
  ExplainReport& r = file.report;
  r.total_excluded = j.at("patients_excluded").get<int>();
  for (int k = 0; k < 4; ++k) {
    const json& b = j.at("blocks").at(kBranchNames[static_cast<std::size_t>(k)]);
    r.block_mean[static_cast<std::size_t>(k)] = b.at("mean").get<double>();
    r.block_std[static_cast<std::size_t>(k)] = b.at("std").get<double>();
  }
  r.specific_mean = j.at("specific").at("mean").get<double>();
  r.specific_std = j.at("specific").at("std").get<double>();
  r.shared_mean = j.at("shared").at("mean").get<double>();
  r.shared_std = j.at("shared").at("std").get<double>();
  for (const auto& fj : j.at("folds")) {
    ExplainFoldShares s;
    s.block_share[kGG] = fj.at("gg").get<double>();
    s.block_share[kHH] = fj.at("hh").get<double>();
    s.block_share[kHG] = fj.at("hg").get<double>();
    s.block_share[kGH] = fj.at("gh").get<double>();
    s.specific = fj.at("specific").get<double>();
    s.shared = fj.at("shared").get<double>();
    s.patients_used = fj.at("patients_used").get<int>();
    s.patients_excluded = fj.at("patients_excluded").get<int>();
    r.folds.push_back(s);
  }
  return file;
}

std::string render_report_tables(
    const std::vector<CrossvalReport>& crossval_reports,
    const std::vector<ExplainReportFile>& explain_reports) {
  std::ostringstream os;
  auto cell = [&](const std::string& s, int width) {
    os << s;
    for (int i = static_cast<int>(s.size()); i < width; ++i) os << ' ';
  };
  auto ms = [](double m, double s) { return fmt3(m) + " +/- " + fmt3(s); };

  if (!crossval_reports.empty()) {
    os << "== Survival (test c-index, mean +/- std over folds) ==\n";
    cell("model", 24);
    os << "c-index\n";
    for (const auto& r : crossval_reports) {
      cell("clinical[" + r.label + "]", 24);
      os << ms(r.mean(&FoldResult::clinical_c_index),
               r.stddev(&FoldResult::clinical_c_index))
         << '\n';
    }
    for (const auto& r : crossval_reports) {
      cell(r.label, 24);
      os << ms(r.mean(&FoldResult::c_index), r.stddev(&FoldResult::c_index))
         << '\n';
    }
    os << '\n';
    os << "== Disentanglement (test DC, mean +/- std over folds) ==\n";
    cell("model", 24);
    cell("type", 8);
    os << "DC\n";
    for (const auto& r : crossval_reports) {
      cell(r.label, 24);
      cell("D1", 8);
      os << ms(r.mean_dc(&DcReport::d1), r.stddev_dc(&DcReport::d1)) << '\n';
      cell("", 24);
      cell("D2", 8);
      os << ms(r.mean_dc(&DcReport::d2), r.stddev_dc(&DcReport::d2)) << '\n';
      cell("", 24);
      cell("total", 8);
      os << ms(r.mean_dc(&DcReport::total), r.stddev_dc(&DcReport::total))
         << '\n';
    }
    os << '\n';
  }
  if (!explain_reports.empty()) {
    os << "== Attribution shares (normalized |phi|, mean +/- std over folds) "
          "==\n";
    cell("model", 24);
    cell("repr", 10);
    os << "share\n";
    for (const auto& e : explain_reports) {
      cell(e.label, 24);
      cell("specific", 10);
      os << ms(e.report.specific_mean, e.report.specific_std) << '\n';
      cell("", 24);
      cell("shared", 10);
      os << ms(e.report.shared_mean, e.report.shared_std) << '\n';
      for (int k = 0; k < 4; ++k) {
        cell("", 24);
        cell(kBranchNames[static_cast<std::size_t>(k)], 10);
        os << ms(e.report.block_mean[static_cast<std::size_t>(k)],
                 e.report.block_std[static_cast<std::size_t>(k)])
           << '\n';
      }
    }
  }
  return os.str();
}

namespace {

void write_curves_svg(const std::filesystem::path& path,
                      const CrossvalReport& report,
                      const std::vector<double> FoldResult::*series,
                      const char* title) {
  const int width = 640, height = 400, margin = 48;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  std::size_t max_len = 1;
  for (const auto& f : report.folds) {
    for (double v : f.*series) {
      if (first) {
        lo = hi = v;
        first = false;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    max_len = std::max(max_len, (f.*series).size());
  }
  if (hi <= lo) hi = lo + 1.0;

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
    << "\" height=\"" << height << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << margin << "\" y=\"24\" font-family=\"monospace\">"
    << title << " [" << report.label << "]</text>\n";
  f << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
    << width - margin << "\" y2=\"" << height - margin
    << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
    << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#8c564b"};
  int ci = 0;
  for (const auto& fold : report.folds) {
    const auto& ys = fold.*series;
    if (ys.empty()) continue;
    f << "<polyline fill=\"none\" stroke=\"" << colors[ci % 5]
      << "\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double x =
          margin + (width - 2.0 * margin) * (max_len == 1
                                                 ? 0.0
                                                 : static_cast<double>(i) /
                                                       (max_len - 1.0));
      const double y = height - margin -
                       (height - 2.0 * margin) * (ys[i] - lo) / (hi - lo);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
      f << buf;
    }
    f << "\"/>\n";
    ++ci;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf),
                "<text x=\"8\" y=\"%d\" font-family=\"monospace\" "
                "font-size=\"11\">%.4g</text>\n",
                margin + 4, hi);
  f << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"8\" y=\"%d\" font-family=\"monospace\" "
                "font-size=\"11\">%.4g</text>\n",
                height - margin, lo);
  f << buf;
  f << "</svg>\n";
}

}  // namespace

void write_loss_curves_svg(const std::filesystem::path& path,
                           const CrossvalReport& report) {
  write_curves_svg(path, report, &FoldResult::epoch_total,
                   "training loss per epoch");
}

void write_dc_curves_svg(const std::filesystem::path& path,
                         const CrossvalReport& report) {
  write_curves_svg(path, report, &FoldResult::epoch_dis,
                   "disentanglement loss per epoch");
}

}  // namespace survfuse
