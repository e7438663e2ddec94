#include "survfuse/cohort.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace survfuse {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw std::invalid_argument(where + ": cannot parse number '" + s + "'");
  }
  return v;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Csv read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::invalid_argument("cannot open " + path.string());
  }
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      csv.header = std::move(fields);
      first = false;
    } else {
      csv.rows.push_back(std::move(fields));
    }
  }
  if (first) {
    throw std::invalid_argument(path.string() + ": missing header row");
  }
  return csv;
}

void write_patient_matrix(const std::filesystem::path& path,
                          const std::string& col_prefix,
                          const Eigen::MatrixXd& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (j) f << ',';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04d", col_prefix.c_str(),
                  static_cast<int>(j));
    f << buf;
  }
  f << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) f << ',';
      f << fmt(m(i, j));
    }
    f << '\n';
  }
}

Eigen::MatrixXd read_plain_matrix(const std::filesystem::path& path) {
  const Csv csv = read_csv(path);
  const Eigen::Index cols = static_cast<Eigen::Index>(csv.header.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(csv.rows.size()), cols);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    if (static_cast<Eigen::Index>(csv.rows[i].size()) != cols) {
      throw std::invalid_argument(path.string() + ": row " +
                                  std::to_string(i + 2) +
                                  " has wrong field count");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), j) =
          parse_double(csv.rows[i][static_cast<std::size_t>(j)],
                       path.string());
    }
  }
  return m;
}

}  // namespace

std::vector<SurvivalRecord> Cohort::survival_records() const {
  std::vector<SurvivalRecord> out;
  out.reserve(patient_ids.size());
  for (int i = 0; i < n(); ++i) {
    out.push_back({patient_ids[i], times(i), events(i)});
  }
  return out;
}

void save_cohort(const std::filesystem::path& dir, const Cohort& cohort,
                 const PathwayMembership& membership) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "patches");

  {
    std::ofstream f(dir / "expressions.csv");
    if (!f) throw std::runtime_error("cannot open expressions.csv");
    f << "patient_id";
    for (const auto& s : cohort.gene_symbols) f << ',' << s;
    f << '\n';
    for (int i = 0; i < cohort.n(); ++i) {
      f << cohort.patient_ids[i];
      for (Eigen::Index j = 0; j < cohort.expressions.cols(); ++j) {
        f << ',' << fmt(cohort.expressions(i, j));
      }
      f << '\n';
    }
  }
  {
    std::ofstream f(dir / "survival.csv");
    if (!f) throw std::runtime_error("cannot open survival.csv");
    f << "patient_id,time,event,site\n";
    for (int i = 0; i < cohort.n(); ++i) {
      f << cohort.patient_ids[i] << ',' << fmt(cohort.times(i)) << ','
        << cohort.events(i) << ',' << cohort.sites[i] << '\n';
    }
  }
  {
    std::ofstream f(dir / "clinical.csv");
    if (!f) throw std::runtime_error("cannot open clinical.csv");
    f << "patient_id,age,grade,sex\n";
    for (int i = 0; i < cohort.n(); ++i) {
      f << cohort.patient_ids[i];
      for (Eigen::Index j = 0; j < cohort.clinical.cols(); ++j) {
        f << ',' << fmt(cohort.clinical(i, j));
      }
      f << '\n';
    }
  }
  for (int i = 0; i < cohort.n(); ++i) {
    write_patient_matrix(dir / "patches" / (cohort.patient_ids[i] + ".csv"),
                         "f", cohort.patch_bags[i]);
  }
  if (!cohort.planted.empty()) {
    std::ofstream f(dir / "planted.csv");
    if (!f) throw std::runtime_error("cannot open planted.csv");
    const auto& p = cohort.planted;
    f << "patient_id,true_risk";
    for (Eigen::Index j = 0; j < p.shared.cols(); ++j) f << ",shared_" << j;
    for (Eigen::Index j = 0; j < p.gene_specific.cols(); ++j)
      f << ",gene_" << j;
    for (Eigen::Index j = 0; j < p.image_specific.cols(); ++j)
      f << ",image_" << j;
    f << '\n';
    for (int i = 0; i < cohort.n(); ++i) {
      f << cohort.patient_ids[i] << ',' << fmt(p.true_risk(i));
      for (Eigen::Index j = 0; j < p.shared.cols(); ++j)
        f << ',' << fmt(p.shared(i, j));
      for (Eigen::Index j = 0; j < p.gene_specific.cols(); ++j)
        f << ',' << fmt(p.gene_specific(i, j));
      for (Eigen::Index j = 0; j < p.image_specific.cols(); ++j)
        f << ',' << fmt(p.image_specific(i, j));
      f << '\n';
    }
  }
  save_gene_sets(dir / "pathways.gmt", membership, cohort.gene_symbols);
}

LoadedCohort load_cohort(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  LoadedCohort out;
  Cohort& c = out.cohort;

  {
    const Csv csv = read_csv(dir / "expressions.csv");
    if (csv.header.empty() || csv.header[0] != "patient_id") {
      throw std::invalid_argument("expressions.csv: first column must be "
                                  "patient_id");
    }
    c.gene_symbols.assign(csv.header.begin() + 1, csv.header.end());
    const Eigen::Index g = static_cast<Eigen::Index>(c.gene_symbols.size());
    c.expressions.resize(static_cast<Eigen::Index>(csv.rows.size()), g);
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      const auto& row = csv.rows[i];
      if (static_cast<Eigen::Index>(row.size()) != g + 1) {
        throw std::invalid_argument("expressions.csv: row " +
                                    std::to_string(i + 2) +
                                    " has wrong field count");
      }
      c.patient_ids.push_back(row[0]);
      for (Eigen::Index j = 0; j < g; ++j) {
        c.expressions(static_cast<Eigen::Index>(i), j) =
            parse_double(row[static_cast<std::size_t>(j + 1)],
                         "expressions.csv");
      }
    }
  }
  const int n = c.n();
  {
    const Csv csv = read_csv(dir / "survival.csv");
    if (csv.header != std::vector<std::string>{"patient_id", "time", "event",
                                               "site"}) {
      throw std::invalid_argument("survival.csv: unexpected header");
    }
    if (static_cast<int>(csv.rows.size()) != n) {
      throw std::invalid_argument("survival.csv: row count differs from "
                                  "expressions.csv");
    }
    c.times.resize(n);
    c.events.resize(n);
    c.sites.resize(n);
    for (int i = 0; i < n; ++i) {
      const auto& row = csv.rows[i];
      if (row[0] != c.patient_ids[i]) {
        throw std::invalid_argument("survival.csv: patient order differs "
                                    "from expressions.csv at row " +
                                    std::to_string(i + 2));
      }
      c.times(i) = parse_double(row[1], "survival.csv");
      c.events(i) = static_cast<int>(parse_double(row[2], "survival.csv"));
      c.sites[i] = static_cast<int>(parse_double(row[3], "survival.csv"));
    }
  }
  {
    const Csv csv = read_csv(dir / "clinical.csv");
    c.clinical.resize(n, static_cast<Eigen::Index>(csv.header.size()) - 1);
    for (int i = 0; i < n; ++i) {
      const auto& row = csv.rows[i];
      for (Eigen::Index j = 0; j + 1 < static_cast<Eigen::Index>(row.size());
           ++j) {
        c.clinical(i, j) = parse_double(row[static_cast<std::size_t>(j + 1)],
                                        "clinical.csv");
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    c.patch_bags.push_back(
        read_plain_matrix(dir / "patches" / (c.patient_ids[i] + ".csv")));
  }
  if (fs::exists(dir / "planted.csv")) {
    const Csv csv = read_csv(dir / "planted.csv");
    int n_shared = 0, n_gene = 0, n_image = 0;
    for (const auto& h : csv.header) {
      if (h.rfind("shared_", 0) == 0) ++n_shared;
      if (h.rfind("gene_", 0) == 0) ++n_gene;
      if (h.rfind("image_", 0) == 0) ++n_image;
    }
    auto& p = c.planted;
    p.true_risk.resize(n);
    p.shared.resize(n, n_shared);
    p.gene_specific.resize(n, n_gene);
    p.image_specific.resize(n, n_image);
    for (int i = 0; i < n; ++i) {
      const auto& row = csv.rows[i];
      std::size_t at = 1;
      p.true_risk(i) = parse_double(row[at++], "planted.csv");
      for (int j = 0; j < n_shared; ++j)
        p.shared(i, j) = parse_double(row[at++], "planted.csv");
      for (int j = 0; j < n_gene; ++j)
        p.gene_specific(i, j) = parse_double(row[at++], "planted.csv");
      for (int j = 0; j < n_image; ++j)
        p.image_specific(i, j) = parse_double(row[at++], "planted.csv");
    }
  }
  out.membership = load_gene_sets(dir / "pathways.gmt", c.gene_symbols)
                       .membership;
  return out;
}

std::vector<std::string> validate_cohort_dir(
    const std::filesystem::path& dir) {
  std::vector<std::string> problems;
  LoadedCohort loaded;
  try {
    loaded = load_cohort(dir);
  } catch (const std::exception& e) {
    problems.emplace_back(e.what());
    return problems;
  }
  const Cohort& c = loaded.cohort;
  if (c.n() == 0) problems.emplace_back("cohort has no patients");
  if (!c.expressions.allFinite()) {
    problems.emplace_back("expressions contain non-finite values");
  }
  for (int i = 0; i < c.n(); ++i) {
    if (!(c.times(i) > 0.0)) {
      problems.push_back("patient " + c.patient_ids[i] +
                         ": time must be > 0");
    }
    if (c.events(i) != 0 && c.events(i) != 1) {
      problems.push_back("patient " + c.patient_ids[i] +
                         ": event must be 0 or 1");
    }
    if (c.patch_bags[i].rows() == 0) {
      problems.push_back("patient " + c.patient_ids[i] + ": empty patch bag");
    }
    if (!c.patch_bags[i].allFinite()) {
      problems.push_back("patient " + c.patient_ids[i] +
                         ": non-finite patch features");
    }
    if (c.patch_bags[i].cols() != c.patch_bags[0].cols()) {
      problems.push_back("patient " + c.patient_ids[i] +
                         ": patch feature dim differs");
    }
  }
  try {
    loaded.membership.validate();
  } catch (const std::exception& e) {
    problems.emplace_back(e.what());
  }
  return problems;
}

}  // namespace survfuse
