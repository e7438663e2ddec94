#include "survfuse/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace survfuse {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key +
                                "' expects an integer, got '" + v + "'");
  }
}

double parse_dbl(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw std::invalid_argument("config: key '" + key +
                                "' expects a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: key '" + key +
                              "' expects true/false, got '" + v + "'");
}

#define INT_FIELD(key, expr)                                               \
  Field {                                                                  \
    key,                                                                   \
        [](RunConfig& c, const std::string& v) {                           \
          c.expr = parse_int(key, v);                                      \
        },                                                                 \
        [](const RunConfig& c) { return std::to_string(c.expr); }          \
  }
#define DBL_FIELD(key, expr)                                               \
  Field {                                                                  \
    key,                                                                   \
        [](RunConfig& c, const std::string& v) {                           \
          c.expr = parse_dbl(key, v);                                      \
        },                                                                 \
        [](const RunConfig& c) { return fmt_double(c.expr); }              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      INT_FIELD("gen.n_patients", gen.n_patients),
      INT_FIELD("gen.n_genes", gen.n_genes),
      INT_FIELD("gen.n_pathways", gen.n_pathways),
      INT_FIELD("gen.d_patch", gen.d_patch),
      INT_FIELD("gen.patches_min", gen.patches_min),
      INT_FIELD("gen.patches_max", gen.patches_max),
      INT_FIELD("gen.latent_shared", gen.latent_shared),
      INT_FIELD("gen.latent_gene", gen.latent_gene),
      INT_FIELD("gen.latent_image", gen.latent_image),
      DBL_FIELD("gen.noise_sigma", gen.noise_sigma),
      DBL_FIELD("gen.censoring_rate", gen.censoring_rate),
      INT_FIELD("gen.n_sites", gen.n_sites),
      INT_FIELD("gen.n_clusters", gen.n_clusters),
      DBL_FIELD("gen.risk_weight_shared", gen.risk_weight_shared),
      DBL_FIELD("gen.risk_weight_gene", gen.risk_weight_gene),
      DBL_FIELD("gen.risk_weight_image", gen.risk_weight_image),
      INT_FIELD("model.d_embed", d_embed),
      INT_FIELD("model.d_encoding", d_encoding),
      INT_FIELD("model.d_attn", d_attn),
      INT_FIELD("model.n_prototypes", n_prototypes),
      INT_FIELD("em.max_iter", em.max_iter),
      DBL_FIELD("em.tol", em.tol),
      DBL_FIELD("em.var_floor", em.var_floor),
      INT_FIELD("train.epochs", epochs),
      DBL_FIELD("train.lr", lr),
      DBL_FIELD("train.weight_decay", weight_decay),
      INT_FIELD("train.batch_size", batch_size),
      DBL_FIELD("train.lambda_surv", lambda_surv),
      DBL_FIELD("train.lambda_dis", lambda_dis),
      Field{"train.folds",
            [](RunConfig& c, const std::string& v) {
              c.folds = static_cast<unsigned>(parse_int("train.folds", v));
            },
            [](const RunConfig& c) { return std::to_string(c.folds); }},
      Field{"train.seed",
            [](RunConfig& c, const std::string& v) {
              c.seed = std::strtoull(v.c_str(), nullptr, 10);
            },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      Field{"train.dc_squared",
            [](RunConfig& c, const std::string& v) {
              c.dc_squared = parse_bool("train.dc_squared", v);
            },
            [](const RunConfig& c) {
              return c.dc_squared ? "true" : "false";
            }},
      Field{"explain.baseline",
            [](RunConfig& c, const std::string& v) {
              if (v != "mean" && v != "zero") {
                throw std::invalid_argument(
                    "config: explain.baseline must be 'mean' or 'zero'");
              }
              c.explain_baseline = v;
            },
            [](const RunConfig& c) { return c.explain_baseline; }},
      Field{"run.label",
            [](RunConfig& c, const std::string& v) { c.label = v; },
            [](const RunConfig& c) { return c.label; }},
  };
  return kFields;
}

#undef INT_FIELD
#undef DBL_FIELD

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> kKeys = [] {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
  }();
  return kKeys;
}

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  std::ostringstream os;
  os << "config: unknown key '" << key << "'. Valid keys:";
  for (const auto& k : config_keys()) os << ' ' << k;
  throw std::invalid_argument(os.str());
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::invalid_argument("config: cannot open " + path.string());
  }
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    apply_config_entry(cfg, trim(body.substr(0, eq)),
                       trim(body.substr(eq + 1)));
  }
  return cfg;
}

std::map<std::string, std::string> config_echo(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(cfg);
  return out;
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("config: cannot open " + path.string() +
                             " for writing");
  }
  for (const auto& fld : fields()) {
    f << fld.key << " = " << fld.get(cfg) << '\n';
  }
}

}  // namespace survfuse
