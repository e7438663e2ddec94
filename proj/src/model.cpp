#include "survfuse/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "survfuse/rng.hpp"

namespace survfuse {

namespace {

using json = nlohmann::ordered_json;

Eigen::MatrixXd normal_matrix(RngStream& rng, Eigen::Index rows,
                              Eigen::Index cols, double stddev) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

double fan_in_std(Eigen::Index fan_in) {
  return 1.0 / std::sqrt(static_cast<double>(fan_in));
}

}  // namespace

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.pathway_sizes.empty()) {
    throw std::invalid_argument("model config: pathway_sizes is empty");
  }
  for (int s : cfg.pathway_sizes) {
    if (s < 1) throw std::invalid_argument("model config: empty pathway");
  }
  if (cfg.n_prototypes < 1 || cfg.d_patch < 1 || cfg.d_embed < 1 ||
      cfg.d_encoding < 1 || cfg.d_attn < 1) {
    throw std::invalid_argument("model config: dimensions must be >= 1");
  }

  Model m;
  m.cfg_ = cfg;
  RngStream rng(seed);
  auto push = [&m](const std::string& name, Eigen::MatrixXd v) {
    m.names_.push_back(name);
    m.values_.push_back(std::move(v));
  };

  // Per-pathway two-layer SNNs.
  for (int n = 0; n < cfg.n_pathways(); ++n) {
    const int in = cfg.pathway_sizes[static_cast<std::size_t>(n)];
    const std::string base = "pathway" + std::to_string(n);
    push(base + ".w1", normal_matrix(rng, in, cfg.d_embed, fan_in_std(in)));
    push(base + ".b1", Eigen::MatrixXd::Zero(1, cfg.d_embed));
    push(base + ".w2", normal_matrix(rng, cfg.d_embed, cfg.d_embed,
                                     fan_in_std(cfg.d_embed)));
    push(base + ".b2", Eigen::MatrixXd::Zero(1, cfg.d_embed));
  }
  push("pathway_encodings",
       normal_matrix(rng, cfg.n_pathways(), cfg.d_encoding, 0.02));

  // Shared slide MLP over [pi || mu] rows.
  const int slide_in = 1 + cfg.d_patch;
  push("slide.w1",
       normal_matrix(rng, slide_in, cfg.d_embed, fan_in_std(slide_in)));
  push("slide.b1", Eigen::MatrixXd::Zero(1, cfg.d_embed));
  push("slide.w2", normal_matrix(rng, cfg.d_embed, cfg.d_embed,
                                 fan_in_std(cfg.d_embed)));
  push("slide.b2", Eigen::MatrixXd::Zero(1, cfg.d_embed));
  push("prototype_encodings",
       normal_matrix(rng, cfg.n_prototypes, cfg.d_encoding, 0.02));

  // One Q/K/V triple per branch, plus per-branch LN.
  const int dj = cfg.d_joint();
  for (const char* b : kBranchNames) {
    const std::string base = std::string("attn.") + b;
    push(base + ".wq", normal_matrix(rng, dj, cfg.d_attn, fan_in_std(dj)));
    push(base + ".wk", normal_matrix(rng, dj, cfg.d_attn, fan_in_std(dj)));
    push(base + ".wv", normal_matrix(rng, dj, cfg.d_attn, fan_in_std(dj)));
    push(std::string("ln.") + b + ".gain",
         Eigen::MatrixXd::Ones(1, cfg.d_attn));
    push(std::string("ln.") + b + ".bias",
         Eigen::MatrixXd::Zero(1, cfg.d_attn));
  }

  push("head.w", normal_matrix(rng, cfg.d_fused(), 1,
                               fan_in_std(cfg.d_fused())));
  push("head.b", Eigen::MatrixXd::Zero(1, 1));
  return m;
}

long Model::parameter_count() const {
  long total = 0;
  for (const auto& v : values_) total += static_cast<long>(v.size());
  return total;
}

int Model::index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  throw std::invalid_argument("model: unknown parameter '" + name + "'");
}

Eigen::MatrixXd& Model::value(const std::string& name) {
  return values_[static_cast<std::size_t>(index(name))];
}

const Eigen::MatrixXd& Model::value(const std::string& name) const {
  return values_[static_cast<std::size_t>(index(name))];
}

// ---- graph construction ----

ModelGraph::ModelGraph(ad::Tape& tape, const Model& model, bool trainable)
    : tape_(tape), model_(model) {
  leaves_.reserve(model.values().size());
  for (const auto& v : model.values()) {
    leaves_.push_back(trainable ? tape_.leaf(v) : tape_.constant(v));
  }
}

ModelGraph::ModelGraph(ad::Tape& tape, const Model& model,
                       std::vector<ad::Var> vars)
    : tape_(tape), model_(model), leaves_(std::move(vars)) {
  if (leaves_.size() != model.values().size()) {
    throw std::invalid_argument("ModelGraph: expected " +
                                std::to_string(model.values().size()) +
                                " parameter vars, got " +
                                std::to_string(leaves_.size()));
  }
}

ad::Var ModelGraph::leaf(const std::string& name) const {
  return leaves_[static_cast<std::size_t>(model_.index(name))];
}

ad::Var ModelGraph::encode_pathways(const PathwayTokens& tokens) {
  const ModelConfig& cfg = model_.config();
  if (static_cast<int>(tokens.size()) != cfg.n_pathways()) {
    throw std::invalid_argument(
        "encode_pathways: got " + std::to_string(tokens.size()) +
        " tokens for " + std::to_string(cfg.n_pathways()) + " pathways");
  }
  std::vector<ad::Var> rows;
  rows.reserve(tokens.size());
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    if (tokens[n].size() != cfg.pathway_sizes[n]) {
      throw std::invalid_argument(
          "encode_pathways: token " + std::to_string(n) + " has length " +
          std::to_string(tokens[n].size()) + ", expected " +
          std::to_string(cfg.pathway_sizes[n]));
    }
    const std::string base = "pathway" + std::to_string(n);
    ad::Var x = tape_.constant(tokens[n]);
    ad::Var h = ad::selu(
        tape_, ad::add_rowvec(tape_, ad::matmul(tape_, x, leaf(base + ".w1")),
                              leaf(base + ".b1")));
    ad::Var e = ad::selu(
        tape_, ad::add_rowvec(tape_, ad::matmul(tape_, h, leaf(base + ".w2")),
                              leaf(base + ".b2")));
    rows.push_back(e);
  }
  ad::Var embeddings = ad::vstack(tape_, rows);
  const std::array<ad::Var, 2> parts{embeddings, leaf("pathway_encodings")};
  return ad::hstack(tape_, parts);
}

ad::Var ModelGraph::encode_slide(const GmmSummary& summary) {
  const ModelConfig& cfg = model_.config();
  if (summary.n_components() != cfg.n_prototypes) {
    throw std::invalid_argument(
        "encode_slide: summary has " + std::to_string(summary.n_components()) +
        " components, model expects " + std::to_string(cfg.n_prototypes));
  }
  if (summary.dim() != cfg.d_patch) {
    throw std::invalid_argument("encode_slide: feature dim mismatch");
  }
  Eigen::MatrixXd x(cfg.n_prototypes, 1 + cfg.d_patch);
  x.col(0) = summary.weights;
  x.rightCols(cfg.d_patch) = summary.means;
  ad::Var h = ad::selu(
      tape_, ad::add_rowvec(tape_,
                            ad::matmul(tape_, tape_.constant(x),
                                       leaf("slide.w1")),
                            leaf("slide.b1")));
  ad::Var e = ad::selu(
      tape_, ad::add_rowvec(tape_, ad::matmul(tape_, h, leaf("slide.w2")),
                            leaf("slide.b2")));
  const std::array<ad::Var, 2> parts{e, leaf("prototype_encodings")};
  return ad::hstack(tape_, parts);
}

FusedVars ModelGraph::fuse(ad::Var z_g, ad::Var z_h) {
  const ModelConfig& cfg = model_.config();
  const double inv_scale = 1.0 / std::sqrt(cfg.score_scale());

  auto attention = [&](const char* branch, ad::Var q_in, ad::Var kv_in) {
    const std::string base = std::string("attn.") + branch;
    ad::Var q = ad::matmul(tape_, q_in, leaf(base + ".wq"));
    ad::Var k = ad::matmul(tape_, kv_in, leaf(base + ".wk"));
    ad::Var v = ad::matmul(tape_, kv_in, leaf(base + ".wv"));
    ad::Var scores = ad::scale(tape_, ad::matmul_nt(tape_, q, k), inv_scale);
    return ad::matmul(tape_, ad::softmax_rows(tape_, scores), v);
  };

  FusedVars out;
  out.attn[kGG] = attention("gg", z_g, z_g);
  out.attn[kHH] = attention("hh", z_h, z_h);
  out.attn[kHG] = attention("hg", z_g, z_h);  // queries g over slide kv
  out.attn[kGH] = attention("gh", z_h, z_g);  // queries h over pathway kv
  for (int b = 0; b < 4; ++b) {
    ad::Var normed = ad::layer_norm(
        tape_, out.attn[static_cast<std::size_t>(b)],
        leaf(std::string("ln.") + kBranchNames[static_cast<std::size_t>(b)] +
             ".gain"),
        leaf(std::string("ln.") + kBranchNames[static_cast<std::size_t>(b)] +
             ".bias"),
        cfg.ln_eps);
    out.pooled[static_cast<std::size_t>(b)] = ad::mean_rows(tape_, normed);
  }
  out.concat = ad::hstack(tape_, out.pooled);
  return out;
}

ad::Var ModelGraph::risk_score(const FusedVars& fused) {
  return ad::add(tape_, ad::matmul(tape_, fused.concat, leaf("head.w")),
                 leaf("head.b"));
}

PatientVars ModelGraph::forward(const PathwayTokens& tokens,
                                const GmmSummary& summary) {
  PatientVars out;
  out.z_g = encode_pathways(tokens);
  out.z_h = encode_slide(summary);
  out.fused = fuse(out.z_g, out.z_h);
  out.risk = risk_score(out.fused);
  return out;
}

Eigen::RowVectorXd DisentangledRepr::concat() const {
  Eigen::Index total = 0;
  for (const auto& p : pooled) total += p.size();
  Eigen::RowVectorXd out(total);
  Eigen::Index at = 0;
  for (const auto& p : pooled) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

DisentangledRepr eval_patient(const Model& model, const PathwayTokens& tokens,
                              const GmmSummary& summary) {
  ad::Tape tape;
  ModelGraph graph(tape, model, /*trainable=*/false);
  const PatientVars vars = graph.forward(tokens, summary);
  DisentangledRepr out;
  for (int b = 0; b < 4; ++b) {
    out.prepool[static_cast<std::size_t>(b)] =
        tape.value(vars.fused.attn[static_cast<std::size_t>(b)]);
    out.pooled[static_cast<std::size_t>(b)] =
        tape.value(vars.fused.pooled[static_cast<std::size_t>(b)]).row(0);
  }
  out.risk = tape.value(vars.risk)(0, 0);
  return out;
}

// ---- checkpointing ----

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(i, c));
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::invalid_argument("checkpoint: matrix payload size mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[at++];
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ck) {
  json j;
  j["format"] = "survfuse-checkpoint";
  j["format_version"] = ck.format_version;
  const ModelConfig& cfg = ck.config;
  j["config"] = {{"pathway_sizes", cfg.pathway_sizes},
                 {"n_prototypes", cfg.n_prototypes},
                 {"d_patch", cfg.d_patch},
                 {"d_embed", cfg.d_embed},
                 {"d_encoding", cfg.d_encoding},
                 {"d_attn", cfg.d_attn},
                 {"attn_scale", cfg.attn_scale},
                 {"ln_eps", cfg.ln_eps}};
  j["em"] = {{"max_iter", ck.em.max_iter},
             {"tol", ck.em.tol},
             {"var_floor", ck.em.var_floor}};
  json params = json::object();
  for (int i = 0; i < ck.model.n_params(); ++i) {
    params[ck.model.name(i)] = matrix_to_json(ck.model.value(i));
  }
  j["params"] = std::move(params);
  j["prototypes"] = {{"means", matrix_to_json(ck.prototypes.means)},
                     {"variance", matrix_to_json(ck.prototypes.variance)}};
  json baseline = json::array();
  for (const auto& b : ck.baseline) baseline.push_back(matrix_to_json(b));
  j["baseline"] = std::move(baseline);
  j["fold_index"] = ck.fold_index;
  j["train_ids"] = ck.train_ids;
  j["test_ids"] = ck.test_ids;
  j["cohort_hash"] = ck.cohort_hash;
  j["config_echo"] = ck.config_echo;

  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  f << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open " + path.string());
  json j;
  f >> j;
  if (j.value("format", "") != "survfuse-checkpoint") {
    throw std::invalid_argument(path.string() +
                                ": not a survfuse checkpoint");
  }
  Checkpoint ck;
  ck.format_version = j.at("format_version").get<int>();
  if (ck.format_version != 1) {
    throw std::invalid_argument("checkpoint format version " +
                                std::to_string(ck.format_version) +
                                " is not supported");
  }
  const json& cj = j.at("config");
  ck.config.pathway_sizes = cj.at("pathway_sizes").get<std::vector<int>>();
  ck.config.n_prototypes = cj.at("n_prototypes").get<int>();
  ck.config.d_patch = cj.at("d_patch").get<int>();
  ck.config.d_embed = cj.at("d_embed").get<int>();
  ck.config.d_encoding = cj.at("d_encoding").get<int>();
  ck.config.d_attn = cj.at("d_attn").get<int>();
  ck.config.attn_scale = cj.at("attn_scale").get<double>();
  ck.config.ln_eps = cj.at("ln_eps").get<double>();
  ck.em.max_iter = j.at("em").at("max_iter").get<int>();
  ck.em.tol = j.at("em").at("tol").get<double>();
  ck.em.var_floor = j.at("em").at("var_floor").get<double>();

  ck.model = Model::init(ck.config, 0);
  for (int i = 0; i < ck.model.n_params(); ++i) {
    const Eigen::MatrixXd loaded =
        matrix_from_json(j.at("params").at(ck.model.name(i)));
    Eigen::MatrixXd& dst = ck.model.value(i);
    if (loaded.rows() != dst.rows() || loaded.cols() != dst.cols()) {
      throw std::invalid_argument("checkpoint: parameter '" +
                                  ck.model.name(i) + "' has wrong shape");
    }
    dst = loaded;
  }
  ck.prototypes.means = matrix_from_json(j.at("prototypes").at("means"));
  ck.prototypes.variance =
      matrix_from_json(j.at("prototypes").at("variance")).row(0);
  const json& bj = j.at("baseline");
  for (std::size_t b = 0; b < 4; ++b) {
    ck.baseline[b] = matrix_from_json(bj.at(b)).row(0);
  }
  ck.fold_index = j.at("fold_index").get<int>();
  ck.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  ck.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  ck.cohort_hash = j.at("cohort_hash").get<std::string>();
  ck.config_echo =
      j.at("config_echo").get<std::map<std::string, std::string>>();
  return ck;
}

}  // namespace survfuse
