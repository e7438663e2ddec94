#include "survfuse/train.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "survfuse/cox_baseline.hpp"
#include "survfuse/metrics.hpp"
#include "survfuse/optimizer.hpp"
#include "survfuse/rng.hpp"

namespace survfuse {

namespace {

ModelConfig model_config(const RunConfig& cfg,
                         const PathwayMembership& membership, int d_patch) {
  ModelConfig mc;
  mc.pathway_sizes = membership.sizes();
  mc.n_prototypes = cfg.n_prototypes;
  mc.d_patch = d_patch;
  mc.d_embed = cfg.d_embed;
  mc.d_encoding = cfg.d_encoding;
  mc.d_attn = cfg.d_attn;
  return mc;
}

std::vector<PathwayTokens> tokenize_all(const Cohort& cohort,
                                        const PathwayMembership& membership) {
  std::vector<PathwayTokens> out;
  out.reserve(cohort.n());
  for (int i = 0; i < cohort.n(); ++i) {
    out.push_back(tokenize_pathways(cohort.expressions.row(i), membership));
  }
  return out;
}

}  // namespace

DcReport dc_report(const Model& model,
                   const std::vector<PathwayTokens>& tokens,
                   const std::vector<GmmSummary>& summaries) {
  const int n = static_cast<int>(tokens.size());
  if (n < 2) {
    throw std::invalid_argument("dc_report: need at least 2 patients");
  }
  const int dz = model.config().d_attn;
  ReprBatch batch;
  for (auto* m : {&batch.z_gg, &batch.z_hh, &batch.z_hg, &batch.z_gh}) {
    m->resize(n, dz);
  }
  for (int i = 0; i < n; ++i) {
    const DisentangledRepr repr = eval_patient(
        model, tokens[static_cast<std::size_t>(i)],
        summaries[static_cast<std::size_t>(i)]);
    batch.z_gg.row(i) = repr.pooled[kGG];
    batch.z_hh.row(i) = repr.pooled[kHH];
    batch.z_hg.row(i) = repr.pooled[kHG];
    batch.z_gh.row(i) = repr.pooled[kGH];
  }
  return disentanglement_report(batch);
}

TrainOutcome train_fold(const RunConfig& cfg, const Cohort& cohort,
                        const PathwayMembership& membership, const Fold& fold,
                        int fold_index, const std::string& cohort_hash_hex) {
  if (fold.train_ids.empty() || fold.test_ids.empty()) {
    throw std::invalid_argument("train_fold: empty train or test set");
  }
  const RngStream fold_stream =
      RngStream(cfg.seed).child(0xF01D).child(
          static_cast<std::uint64_t>(fold_index));

  // Slide summarization: anchors from training bags only.
  std::vector<Eigen::MatrixXd> train_bags;
  train_bags.reserve(fold.train_ids.size());
  for (int id : fold.train_ids) {
    train_bags.push_back(cohort.patch_bags[static_cast<std::size_t>(id)]);
  }
  const GlobalPrototypes anchors = fit_global_prototypes(
      train_bags, cfg.n_prototypes, fold_stream.child(1).seed());
  std::vector<GmmSummary> summaries(static_cast<std::size_t>(cohort.n()));
  auto summarize = [&](int id) {
    summaries[static_cast<std::size_t>(id)] = fit_gmm(
        cohort.patch_bags[static_cast<std::size_t>(id)], anchors, cfg.em);
  };
  for (int id : fold.train_ids) summarize(id);
  for (int id : fold.test_ids) summarize(id);

  const std::vector<PathwayTokens> tokens = tokenize_all(cohort, membership);

  Model model = Model::init(model_config(cfg, membership, cohort.d_patch()),
                            fold_stream.child(2).seed());

  const int n_train = static_cast<int>(fold.train_ids.size());
  const int steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const int total_steps = cfg.epochs * steps_per_epoch;

  AdamConfig opt_cfg;
  opt_cfg.weight_decay = cfg.weight_decay;
  opt_cfg.decoupled = true;
  AdamW optimizer(opt_cfg);

  FoldResult res;
  res.fold_index = fold_index;
  res.n_train = n_train;
  res.n_test = static_cast<int>(fold.test_ids.size());

  std::vector<int> order = fold.train_ids;
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle =
        fold_stream.child(3).child(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(
                    shuffle.uniform_int(0, static_cast<int>(i) - 1))]);
    }

    double ep_total = 0.0, ep_surv = 0.0, ep_dis = 0.0;
    int n_batches = 0;
    for (int at = 0; at < n_train; at += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n_train - at);
      ad::Tape tape;
      ModelGraph graph(tape, model, /*trainable=*/true);
      std::vector<ad::Var> risk_vars;
      std::array<std::vector<ad::Var>, 4> pooled_vars;
      Eigen::VectorXd times(bsz);
      Eigen::VectorXi events(bsz);
      for (int b = 0; b < bsz; ++b) {
        const int id = order[static_cast<std::size_t>(at + b)];
        const PatientVars pv =
            graph.forward(tokens[static_cast<std::size_t>(id)],
                          summaries[static_cast<std::size_t>(id)]);
        risk_vars.push_back(pv.risk);
        for (int k = 0; k < 4; ++k) {
          pooled_vars[static_cast<std::size_t>(k)].push_back(
              pv.fused.pooled[static_cast<std::size_t>(k)]);
        }
        times(b) = cohort.times(id);
        events(b) = cohort.events(id);
      }
      ad::Var risks = ad::vstack(tape, risk_vars);
      ad::Var surv = cox_loss(tape, risks, times, events);
      ad::Var dis = tape.constant(0.0);
      if (cfg.lambda_dis > 0.0 && bsz >= 2) {
        ReprBatchVars batch{
            ad::vstack(tape, pooled_vars[kGG]),
            ad::vstack(tape, pooled_vars[kHH]),
            ad::vstack(tape, pooled_vars[kHG]),
            ad::vstack(tape, pooled_vars[kGH]),
        };
        dis = disentanglement_loss(tape, batch, cfg.dc_squared);
      }
      ad::Var total = total_loss(tape, surv, dis, cfg.lambda_surv,
                                 cfg.lambda_dis);
      const double total_v = tape.value(total)(0, 0);
      if (!std::isfinite(total_v)) {
        throw std::runtime_error(
            "train_fold: non-finite loss at fold " +
            std::to_string(fold_index) + ", epoch " + std::to_string(epoch) +
            ", step " + std::to_string(step));
      }
      ep_total += total_v;
      ep_surv += tape.value(surv)(0, 0);
      ep_dis += tape.value(dis)(0, 0);
      ++n_batches;

      tape.backward(total);
      std::vector<Eigen::MatrixXd> grads;
      grads.reserve(graph.leaves().size());
      for (ad::Var leaf : graph.leaves()) grads.push_back(tape.grad(leaf));
      optimizer.step(model.values(), grads,
                     cosine_lr(cfg.lr, step, total_steps));
      ++step;
    }
    res.epoch_total.push_back(ep_total / n_batches);
    res.epoch_surv.push_back(ep_surv / n_batches);
    res.epoch_dis.push_back(ep_dis / n_batches);
  }

  // Test evaluation.
  const int n_test = res.n_test;
  Eigen::VectorXd test_risks(n_test), test_times(n_test);
  Eigen::VectorXi test_events(n_test);
  std::vector<PathwayTokens> test_tokens;
  std::vector<GmmSummary> test_summaries;
  for (int b = 0; b < n_test; ++b) {
    const int id = fold.test_ids[static_cast<std::size_t>(b)];
    const DisentangledRepr repr =
        eval_patient(model, tokens[static_cast<std::size_t>(id)],
                     summaries[static_cast<std::size_t>(id)]);
    test_risks(b) = repr.risk;
    test_times(b) = cohort.times(id);
    test_events(b) = cohort.events(id);
    test_tokens.push_back(tokens[static_cast<std::size_t>(id)]);
    test_summaries.push_back(summaries[static_cast<std::size_t>(id)]);
  }
  res.c_index = concordance_index(test_risks, test_times, test_events);
  res.dc = dc_report(model, test_tokens, test_summaries);

  {
    Eigen::MatrixXd x_train(n_train, cohort.clinical.cols());
    Eigen::VectorXd t_train(n_train);
    Eigen::VectorXi e_train(n_train);
    for (int b = 0; b < n_train; ++b) {
      const int id = fold.train_ids[static_cast<std::size_t>(b)];
      x_train.row(b) = cohort.clinical.row(id);
      t_train(b) = cohort.times(id);
      e_train(b) = cohort.events(id);
    }
    Eigen::MatrixXd x_test(n_test, cohort.clinical.cols());
    for (int b = 0; b < n_test; ++b) {
      x_test.row(b) =
          cohort.clinical.row(fold.test_ids[static_cast<std::size_t>(b)]);
    }
    res.clinical_c_index = clinical_cox_baseline(x_train, t_train, e_train,
                                                 x_test, test_times,
                                                 test_events);
  }

  // Checkpoint with the training-mean pooled representation as the
  // attribution baseline.
  TrainOutcome out;
  Checkpoint& ck = out.checkpoint;
  ck.config = model.config();
  ck.prototypes = anchors;
  ck.em = cfg.em;
  ck.fold_index = fold_index;
  ck.cohort_hash = cohort_hash_hex;
  ck.config_echo = config_echo(cfg);
  const int dz = model.config().d_attn;
  for (auto& b : ck.baseline) b = Eigen::RowVectorXd::Zero(dz);
  for (int id : fold.train_ids) {
    const DisentangledRepr repr =
        eval_patient(model, tokens[static_cast<std::size_t>(id)],
                     summaries[static_cast<std::size_t>(id)]);
    for (int k = 0; k < 4; ++k) {
      ck.baseline[static_cast<std::size_t>(k)] +=
          repr.pooled[static_cast<std::size_t>(k)] / n_train;
    }
  }
  for (int id : fold.train_ids) {
    ck.train_ids.push_back(cohort.patient_ids[static_cast<std::size_t>(id)]);
  }
  for (int id : fold.test_ids) {
    ck.test_ids.push_back(cohort.patient_ids[static_cast<std::size_t>(id)]);
  }
  ck.model = std::move(model);
  out.result = std::move(res);
  return out;
}

double CrossvalReport::mean(double FoldResult::*field) const {
  double acc = 0.0;
  for (const auto& f : folds) acc += f.*field;
  return folds.empty() ? 0.0 : acc / static_cast<double>(folds.size());
}

double CrossvalReport::stddev(double FoldResult::*field) const {
  if (folds.size() < 2) return 0.0;
  const double m = mean(field);
  double acc = 0.0;
  for (const auto& f : folds) acc += (f.*field - m) * (f.*field - m);
  return std::sqrt(acc / static_cast<double>(folds.size() - 1));
}

double CrossvalReport::mean_dc(double DcReport::*field) const {
  double acc = 0.0;
  for (const auto& f : folds) acc += f.dc.*field;
  return folds.empty() ? 0.0 : acc / static_cast<double>(folds.size());
}

double CrossvalReport::stddev_dc(double DcReport::*field) const {
  if (folds.size() < 2) return 0.0;
  const double m = mean_dc(field);
  double acc = 0.0;
  for (const auto& f : folds) acc += (f.dc.*field - m) * (f.dc.*field - m);
  return std::sqrt(acc / static_cast<double>(folds.size() - 1));
}

CrossvalReport crossval(const RunConfig& cfg, const Cohort& cohort,
                        const PathwayMembership& membership,
                        const std::filesystem::path& out_dir,
                        const std::string& cohort_hash_hex, int threads) {
  const std::vector<Fold> folds = split_folds(cohort, cfg.folds, cfg.seed);
  const int k = static_cast<int>(folds.size());

  CrossvalReport report;
  report.label = cfg.label;
  report.seed = cfg.seed;
  report.config = config_echo(cfg);
  report.folds.resize(static_cast<std::size_t>(k));

  std::vector<TrainOutcome> outcomes(static_cast<std::size_t>(k));
  std::vector<std::string> errors(static_cast<std::size_t>(k));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int f = next.fetch_add(1);
      if (f >= k) return;
      try {
        outcomes[static_cast<std::size_t>(f)] = train_fold(
            cfg, cohort, membership, folds[static_cast<std::size_t>(f)], f,
            cohort_hash_hex);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(f)] = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min(threads, k));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (int f = 0; f < k; ++f) {
    if (!errors[static_cast<std::size_t>(f)].empty()) {
      throw std::runtime_error("fold " + std::to_string(f) + ": " +
                               errors[static_cast<std::size_t>(f)]);
    }
  }

  for (int f = 0; f < k; ++f) {
    TrainOutcome& o = outcomes[static_cast<std::size_t>(f)];
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      const auto path =
          out_dir / ("fold" + std::to_string(f) + "_checkpoint.json");
      save_checkpoint(path, o.checkpoint);
      o.result.checkpoint_path = path.string();
    }
    report.folds[static_cast<std::size_t>(f)] = std::move(o.result);
  }
  return report;
}

ExplainFoldShares explain_fold(const Checkpoint& ck, const Cohort& cohort,
                               const PathwayMembership& membership,
                               bool zero_baseline) {
  std::vector<int> test_idx;
  for (const auto& pid : ck.test_ids) {
    bool found = false;
    for (int i = 0; i < cohort.n(); ++i) {
      if (cohort.patient_ids[static_cast<std::size_t>(i)] == pid) {
        test_idx.push_back(i);
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument("explain_fold: patient '" + pid +
                                  "' not present in cohort");
    }
  }
  PooledBlocks baseline = ck.baseline;
  if (zero_baseline) {
    for (auto& b : baseline) b.setZero();
  }
  std::vector<BlockAttribution> attributions;
  attributions.reserve(test_idx.size());
  for (int id : test_idx) {
    const PathwayTokens tokens =
        tokenize_pathways(cohort.expressions.row(id), membership);
    const GmmSummary summary = fit_gmm(
        cohort.patch_bags[static_cast<std::size_t>(id)], ck.prototypes,
        ck.em);
    const DisentangledRepr repr = eval_patient(ck.model, tokens, summary);
    attributions.push_back(shapley_blocks(ck.model, repr.pooled, baseline));
  }
  return normalized_shares(attributions);
}

}  // namespace survfuse
