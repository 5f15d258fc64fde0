#include "sdfa/experiment.hpp"

#include <cmath>
#include <set>
#include <type_traits>
#include <sstream>

#include "sdfa/errors.hpp"
#include "sdfa/io.hpp"
#include "sdfa/report.hpp"

namespace sdfa {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  bool ok = true;
  if constexpr (std::is_same_v<T, bool>)
    ok = v.is_boolean();
  else if constexpr (std::is_unsigned_v<T>)
    ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  else if constexpr (std::is_integral_v<T>)
    ok = v.is_number_integer();
  else if constexpr (std::is_floating_point_v<T>)
    ok = v.is_number();
  if (!ok) throw ArgumentError(std::string("config key '") + key + "' has the wrong type");
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ArgumentError(std::string("config key '") + key + "' has the wrong type");
  }
}

// Rethrows any library error with the failing stage named.
template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage '") + name + "' failed: " + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  ExperimentConfig c;
  std::set<std::string> seen;
  std::string dataset, output_dir;
  read_key(j, "dataset", dataset, seen);
  read_key(j, "output_dir", output_dir, seen);
  c.dataset = dataset;
  c.output_dir = output_dir;
  read_key(j, "m", c.m, seen);
  read_key(j, "lambda_gp", c.weights.lambda_gp, seen);
  read_key(j, "lambda_div", c.weights.lambda_div, seen);
  read_key(j, "lambda_self", c.weights.lambda_self, seen);
  read_key(j, "beta_cls", c.weights.beta_cls, seen);
  read_key(j, "critic_steps", c.weights.critic_steps, seen);
  read_key(j, "epochs", c.epochs, seen);
  read_key(j, "batch_size", c.batch_size, seen);
  read_key(j, "hidden", c.hidden, seen);
  read_key(j, "d_z", c.d_z, seen);
  read_key(j, "lr_generator", c.lr_generator, seen);
  read_key(j, "lr_critic", c.lr_critic, seen);
  read_key(j, "lr_self_sup", c.lr_self_sup, seen);
  read_key(j, "generator_weight_decay", c.generator_weight_decay, seen);
  read_key(j, "n_complete_per_class", c.n_complete_per_class, seen);
  read_key(j, "ratio", c.ratio, seen);
  read_key(j, "master_seed", c.master_seed, seen);
  read_key(j, "self_sup_includes_complete", c.self_sup_includes_complete, seen);
  read_key(j, "detach_self_sup", c.detach_self_sup, seen);
  read_key(j, "drop_noop_masks", c.drop_noop_masks, seen);
  read_key(j, "sampled_masks", c.sampled_masks, seen);
  read_key(j, "synthesize_seen", c.synthesize_seen, seen);
  read_key(j, "checkpoint_every", c.checkpoint_every, seen);
  read_key(j, "cluster_max_iters", c.cluster_max_iters, seen);
  read_key(j, "classifier_epochs", c.classifier_epochs, seen);
  read_key(j, "classifier_lr", c.classifier_lr, seen);
  read_key(j, "final_classifier_epochs", c.final_classifier_epochs, seen);
  read_key(j, "final_classifier_lr", c.final_classifier_lr, seen);
  for (const auto& [key, value] : j.items())
    if (!seen.count(key)) throw ArgumentError("unknown config key '" + key + "'");
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = c.dataset.string();
  j["output_dir"] = c.output_dir.string();
  j["m"] = c.m;
  j["lambda_gp"] = c.weights.lambda_gp;
  j["lambda_div"] = c.weights.lambda_div;
  j["lambda_self"] = c.weights.lambda_self;
  j["beta_cls"] = c.weights.beta_cls;
  j["critic_steps"] = c.weights.critic_steps;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["hidden"] = c.hidden;
  j["d_z"] = c.d_z;
  j["lr_generator"] = c.lr_generator;
  j["lr_critic"] = c.lr_critic;
  j["lr_self_sup"] = c.lr_self_sup;
  j["generator_weight_decay"] = c.generator_weight_decay;
  j["n_complete_per_class"] = c.n_complete_per_class;
  j["ratio"] = c.ratio;
  j["master_seed"] = c.master_seed;
  j["self_sup_includes_complete"] = c.self_sup_includes_complete;
  j["detach_self_sup"] = c.detach_self_sup;
  j["drop_noop_masks"] = c.drop_noop_masks;
  j["sampled_masks"] = c.sampled_masks;
  j["synthesize_seen"] = c.synthesize_seen;
  j["checkpoint_every"] = c.checkpoint_every;
  j["cluster_max_iters"] = c.cluster_max_iters;
  j["classifier_epochs"] = c.classifier_epochs;
  j["classifier_lr"] = c.classifier_lr;
  j["final_classifier_epochs"] = c.final_classifier_epochs;
  j["final_classifier_lr"] = c.final_classifier_lr;
  return j;
}

void validate(const ExperimentConfig& c) {
  if (c.dataset.empty()) throw ArgumentError("config lacks a dataset manifest path");
  if (!fs::exists(c.dataset)) throw LoadError("dataset manifest not found: " + c.dataset.string());
  if (c.output_dir.empty()) throw ArgumentError("config lacks an output directory");
  validate(c.weights);
  if (c.epochs < 0 || c.batch_size < 1 || c.hidden < 1 || c.d_z < 0) throw ArgumentError("invalid training schedule");
  if (c.classifier_epochs < 0 || c.final_classifier_epochs < 0) throw ArgumentError("invalid classifier schedule");
  if (c.checkpoint_every < 0 || c.cluster_max_iters < 1) throw ArgumentError("invalid checkpoint/cluster settings");
}

ResolvedSeeds resolve_seeds(std::uint64_t master) {
  return ResolvedSeeds{rng::derive(master, "stage/cluster"), rng::derive(master, "stage/gan"),
                       rng::derive(master, "stage/seen_classifier"), rng::derive(master, "stage/synthesis"),
                       rng::derive(master, "stage/final_classifier")};
}

fs::path cmd_make_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  const auto bench = generate_synthetic_benchmark(spec);
  const fs::path manifest = save_dataset(bench.bundle, out_dir);
  io::CsvTable gt{{"attribute_name", "group_index"}, {}};
  for (std::size_t j = 0; j < bench.ground_truth_groups.size(); ++j)
    gt.rows.push_back({bench.embeddings.names[j], std::to_string(bench.ground_truth_groups[j])});
  io::write_csv(out_dir / "ground_truth_groups.csv", gt);
  json s{{"d_a", spec.d_a},
         {"d_x", spec.d_x},
         {"m_true", spec.m_true},
         {"n_seen_classes", spec.n_seen_classes},
         {"n_unseen_classes", spec.n_unseen_classes},
         {"instances_per_class", spec.instances_per_class},
         {"p_miss", spec.p_miss},
         {"noise_sigma", spec.noise_sigma},
         {"seed", spec.seed},
         {"d_w", spec.d_w},
         {"embedding_jitter", spec.embedding_jitter}};
  io::write_text(out_dir / "synthetic_spec.json", s.dump(2) + "\n");
  return manifest;
}

namespace {

EmbeddingTable embeddings_for(const DatasetBundle& bundle) {
  return bundle.embeddings ? *bundle.embeddings : profile_embeddings(bundle);
}

AttributeGroups cluster_into(const ExperimentConfig& cfg, const DatasetBundle& bundle, const fs::path& dir) {
  const EmbeddingTable table = embeddings_for(bundle);
  const auto groups = cluster_attribute_dimensions(table, cfg.m, resolve_seeds(cfg.master_seed).cluster,
                                                   cfg.cluster_max_iters);
  save_groups(groups, table, dir / "groups.csv", dir / "groups.json");
  return groups;
}

}  // namespace

AttributeGroups cmd_cluster(const ExperimentConfig& cfg) {
  validate(cfg);
  const DatasetBundle bundle = stage("load", [&] { return load_dataset(cfg.dataset); });
  io::ensure_directory(cfg.output_dir);
  return stage("cluster", [&] { return cluster_into(cfg, bundle, cfg.output_dir); });
}

RunResult cmd_run(const ExperimentConfig& cfg) {
  validate(cfg);
  const ResolvedSeeds seeds = resolve_seeds(cfg.master_seed);
  const fs::path out = cfg.output_dir;
  io::ensure_directory(out);
  io::write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

  RunResult result;
  const DatasetBundle bundle = stage("load", [&] { return load_dataset(cfg.dataset); });
  result.groups = stage("cluster", [&] { return cluster_into(cfg, bundle, out); });

  const SoftmaxClassifier seen_clf = stage("pretrain", [&] {
    return pretrain_seen_classifier(
        bundle, ClassifierTraining{cfg.classifier_epochs, cfg.batch_size, cfg.classifier_lr, seeds.seen_classifier},
        &result.seen_classifier_accuracy);
  });

  GanConfig gan;
  gan.epochs = cfg.epochs;
  gan.batch_size = cfg.batch_size;
  gan.hidden = cfg.hidden;
  gan.d_z = cfg.d_z;
  gan.lr_generator = cfg.lr_generator;
  gan.lr_critic = cfg.lr_critic;
  gan.lr_self_sup = cfg.lr_self_sup;
  gan.generator_weight_decay = cfg.generator_weight_decay;
  gan.self_sup_includes_complete = cfg.self_sup_includes_complete;
  gan.detach_self_sup = cfg.detach_self_sup;
  gan.sampled_masks = cfg.sampled_masks;
  gan.checkpoint_every = cfg.checkpoint_every;
  gan.checkpoint_dir = out / "checkpoints";
  gan.seed = seeds.gan;

  SdfaModel model = stage("train", [&] {
    SdfaModel mdl = make_model(static_cast<int>(bundle.d_a()), static_cast<int>(bundle.d_x()), result.groups,
                               cfg.weights, seen_clf, gan);
    result.log = train(mdl, bundle, gan);
    result.log.write_csv(out / "training_log.csv");
    save_checkpoint(mdl, out / "checkpoints" / "final", cfg.epochs);
    return mdl;
  });

  const SynthesizedSet synth = stage("synthesize", [&] {
    SynthesisPlan plan{cfg.n_complete_per_class, cfg.ratio, bundle.unseen_classes, seeds.synthesis,
                       cfg.drop_noop_masks};
    SynthesizedSet set = synthesize_features(model, bundle.attributes, plan);
    save_synthesized(set, out / "synthesized_unseen.csv");
    if (cfg.synthesize_seen) {
      plan.target_classes = bundle.seen_classes;
      const SynthesizedSet seen = synthesize_features(model, bundle.attributes, plan);
      Matrix both(set.features.rows() + seen.features.rows(), set.features.cols());
      both << set.features, seen.features;
      set.features = std::move(both);
      set.labels.insert(set.labels.end(), seen.labels.begin(), seen.labels.end());
      set.provenance.insert(set.provenance.end(), seen.provenance.begin(), seen.provenance.end());
    }
    return set;
  });

  const SoftmaxClassifier final_clf = stage("classify", [&] {
    return train_final_classifier(
        bundle, synth,
        ClassifierTraining{cfg.final_classifier_epochs, cfg.batch_size, cfg.final_classifier_lr, seeds.final_classifier});
  });

  result.metrics = stage("evaluate", [&] {
    const GzslMetrics m = evaluate_gzsl(final_clf, bundle);
    write_metrics(m, out / "metrics.json", out / "metrics.csv");
    return m;
  });

  Matrix unseen_attrs(static_cast<Eigen::Index>(bundle.unseen_classes.size()), bundle.d_a());
  for (std::size_t k = 0; k < bundle.unseen_classes.size(); ++k)
    unseen_attrs.row(static_cast<Eigen::Index>(k)) = bundle.attributes.row(bundle.unseen_classes[k]);
  result.self_sup_accuracy =
      self_supervision_accuracy(model, unseen_attrs, 20, rng::derive(cfg.master_seed, "stage/self_sup_eval"));

  json manifest;
  manifest["config"] = to_json(cfg);
  manifest["seeds"] = {{"master", cfg.master_seed},
                       {"cluster", seeds.cluster},
                       {"gan", seeds.gan},
                       {"seen_classifier", seeds.seen_classifier},
                       {"synthesis", seeds.synthesis},
                       {"final_classifier", seeds.final_classifier}};
  manifest["seen_classifier_train_accuracy"] = result.seen_classifier_accuracy;
  manifest["self_sup_accuracy_unseen"] = result.self_sup_accuracy;
  for (const char* f : {"config.json", "groups.csv", "groups.json", "training_log.csv", "synthesized_unseen.csv",
                        "metrics.json", "metrics.csv"})
    manifest["artifacts"][f] = io::file_hash(out / f);
  manifest["artifacts"]["dataset_manifest"] = io::file_hash(cfg.dataset);
  io::write_text(out / "run_manifest.json", manifest.dump(2) + "\n");
  return result;
}

namespace {

void write_summary_csv(const fs::path& path, const char* first_col, const std::vector<LegSummary>& rows) {
  io::CsvTable csv{{first_col, "seed", "U", "S", "H"}, {}};
  for (const auto& r : rows)
    csv.rows.push_back({r.leg, r.seed, io::format_double(r.U), io::format_double(r.S), io::format_double(r.H)});
  io::write_csv(path, csv);
}

LegSummary mean_row(const std::string& leg, const std::vector<LegSummary>& rows) {
  LegSummary m{leg, "mean"};
  int n = 0;
  for (const auto& r : rows)
    if (r.leg == leg && r.seed != "mean") {
      m.U += r.U;
      m.S += r.S;
      m.H += r.H;
      ++n;
    }
  if (n) {
    m.U /= n;
    m.S /= n;
    m.H /= n;
  }
  return m;
}

}  // namespace

std::vector<LegSummary> cmd_ablate(const ExperimentConfig& cfg, int n_seeds) {
  if (n_seeds < 1) throw ArgumentError("--seeds must be >= 1");
  validate(cfg);
  io::ensure_directory(cfg.output_dir);
  struct Leg {
    std::string name;
    ExperimentConfig cfg;
  };
  std::vector<Leg> legs{{"baseline", cfg}, {"div", cfg}, {"div_self", cfg}};
  legs[0].cfg.weights.lambda_div = 0.0;
  legs[0].cfg.weights.lambda_self = 0.0;
  legs[0].cfg.ratio = 0.0;
  legs[1].cfg.weights.lambda_self = 0.0;

  std::vector<LegSummary> rows;
  for (const auto& leg : legs) {
    for (int k = 0; k < n_seeds; ++k) {
      ExperimentConfig run = leg.cfg;
      run.master_seed = cfg.master_seed + static_cast<std::uint64_t>(k);
      run.output_dir = cfg.output_dir / leg.name / ("seed_" + std::to_string(run.master_seed));
      const RunResult r = cmd_run(run);
      rows.push_back({leg.name, std::to_string(run.master_seed), r.metrics.U, r.metrics.S, r.metrics.H});
    }
  }
  for (const auto& leg : legs) rows.push_back(mean_row(leg.name, rows));
  write_summary_csv(cfg.output_dir / "ablation.csv", "leg", rows);
  return rows;
}

std::vector<LegSummary> cmd_sweep(const ExperimentConfig& cfg, const std::string& param,
                                  const std::vector<double>& values, int n_seeds) {
  if (param != "m" && param != "ratio") throw ArgumentError("sweep parameter must be 'm' or 'ratio'");
  if (values.empty()) throw ArgumentError("sweep needs at least one value");
  if (n_seeds < 1) throw ArgumentError("--seeds must be >= 1");
  validate(cfg);
  io::ensure_directory(cfg.output_dir);
  std::vector<LegSummary> rows;
  for (double v : values) {
    ExperimentConfig base = cfg;
    if (param == "m") {
      if (v != std::floor(v)) throw ArgumentError("m values must be integers");
      base.m = static_cast<int>(v);
    } else {
      base.ratio = v;
    }
    const std::string label = io::format_double(v);
    for (int k = 0; k < n_seeds; ++k) {
      ExperimentConfig run = base;
      run.master_seed = cfg.master_seed + static_cast<std::uint64_t>(k);
      run.output_dir = cfg.output_dir / (param + "_" + label) / ("seed_" + std::to_string(run.master_seed));
      const RunResult r = cmd_run(run);
      rows.push_back({label, std::to_string(run.master_seed), r.metrics.U, r.metrics.S, r.metrics.H});
    }
  }
  write_summary_csv(cfg.output_dir / "sweep.csv", "value", rows);
  return rows;
}

void cmd_report(const fs::path& run_dir) {
  for (const char* f : {"config.json", "metrics.json", "training_log.csv", "synthesized_unseen.csv"})
    if (!fs::exists(run_dir / f)) throw LoadError("missing run artifact " + (run_dir / f).string());
  ExperimentConfig cfg;
  try {
    cfg = config_from_json(json::parse(io::read_text(run_dir / "config.json")));
  } catch (const json::exception& e) {
    throw LoadError("malformed " + (run_dir / "config.json").string() + ": " + e.what());
  }
  const DatasetBundle bundle = load_dataset(cfg.dataset);
  const SynthesizedSet synth = load_synthesized(run_dir / "synthesized_unseen.csv");
  const TrainingLog log = TrainingLog::read_csv(run_dir / "training_log.csv");
  json metrics;
  try {
    metrics = json::parse(io::read_text(run_dir / "metrics.json"));
  } catch (const json::exception& e) {
    throw LoadError("malformed " + (run_dir / "metrics.json").string() + ": " + e.what());
  }

  const fs::path rep = run_dir / "report";
  io::ensure_directory(rep);

  json summary{{"U", metrics.at("U")}, {"S", metrics.at("S")}, {"H", metrics.at("H")}};
  const auto terms = log.terms();
  for (const auto& t : terms) summary["final_" + t] = log.series(t).back();
  io::write_text(rep / "metrics_summary.json", summary.dump(2) + "\n");
  io::CsvTable sum_csv{{"metric", "value"}, {}};
  for (const auto& [k, v] : summary.items()) sum_csv.rows.push_back({k, io::format_double(v.get<double>())});
  io::write_csv(rep / "metrics_summary.csv", sum_csv);

  const auto unseen_idx = bundle.indices(Split::kTestUnseen);
  const Matrix real = bundle.rows(unseen_idx);
  Matrix all(real.rows() + synth.features.rows(), real.cols());
  all << real, synth.features;
  std::vector<ClassId> labels = bundle.labels_at(unseen_idx);
  labels.insert(labels.end(), synth.labels.begin(), synth.labels.end());
  std::vector<bool> is_synth(static_cast<std::size_t>(real.rows()), false);
  is_synth.insert(is_synth.end(), static_cast<std::size_t>(synth.features.rows()), true);

  const report::Pca pca = report::fit_pca(all, 2);
  const Matrix proj = report::project(pca, all);
  io::CsvTable proj_csv{{"label", "synthesized", "pc1", "pc2"}, {}};
  for (Eigen::Index r = 0; r < proj.rows(); ++r)
    proj_csv.rows.push_back({std::to_string(labels[static_cast<std::size_t>(r)]),
                             is_synth[static_cast<std::size_t>(r)] ? "1" : "0", io::format_double(proj(r, 0)),
                             io::format_double(proj(r, 1))});
  io::write_csv(rep / "projection.csv", proj_csv);
  io::write_text(rep / "projection.svg",
                 report::scatter_svg(proj, labels, is_synth, "unseen classes: real (o) vs synthesized (x), PCA"));
  io::write_text(rep / "losses.svg", report::loss_curves_svg(log));
}

}  // namespace sdfa
