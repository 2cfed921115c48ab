#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gesturelab/checkpoint.hpp"
#include "gesturelab/embed_store.hpp"
#include "gesturelab/error.hpp"
#include "gesturelab/experiments.hpp"
#include "gesturelab/io.hpp"
#include "gesturelab/pretrain.hpp"
#include "gesturelab/synth.hpp"

#include "plots.hpp"
#include "run_io.hpp"

namespace gl = gesturelab;
namespace tools = gesturelab::tools;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out;
  std::optional<uint64_t> seed;
  std::string embeddings;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool out_required = true) {
  cmd->add_option("--config", flags.config_path, "JSON run config");
  auto* out = cmd->add_option("--out", flags.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", flags.seed, "seed override");
}

void add_embeddings(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--embeddings", flags.embeddings, "embedding store directory");
}

tools::RunConfig load_config(const CommonFlags& flags) {
  tools::RunConfig cfg =
      tools::load_run_config(std::filesystem::path(flags.config_path));
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out.empty()) cfg.out = flags.out;
  if (!flags.embeddings.empty())
    cfg.embeddings = std::filesystem::absolute(flags.embeddings).string();
  return cfg;
}

uint64_t seed_of(const tools::RunConfig& cfg) { return cfg.seed.value_or(0); }

std::filesystem::path out_dir(const tools::RunConfig& cfg) {
  gl::check_config(cfg.out && !cfg.out->empty(), "--out directory is required");
  return *cfg.out;
}

gl::DatasetManifest manifest_of(const tools::RunConfig& cfg) {
  gl::check_config(cfg.data.has_value(), "config: \"data\" (manifest path) is required");
  return gl::load_manifest(cfg.resolve(*cfg.data));
}

json synth_to_json(const gl::SynthConfig& s) {
  return json{{"referents", s.referents},
              {"samples_per_referent", s.samples_per_referent},
              {"dialogues", s.dialogues},
              {"rounds", s.rounds},
              {"fps", s.fps},
              {"frames", s.frames},
              {"moving_joints", s.moving_joints},
              {"motion_noise_px", s.motion_noise_px},
              {"semantic_informativeness", s.semantic_informativeness},
              {"drift_px", s.drift_px},
              {"nuisance_phase", s.nuisance_phase},
              {"nuisance_amp", s.nuisance_amp},
              {"nuisance_speed", s.nuisance_speed},
              {"semantic_dim", s.semantic_dim},
              {"pairs_per_referent", s.pairs_per_referent},
              {"seed", s.seed}};
}

struct PipelineFlags {
  std::string arch;
  std::string modality;
  std::optional<int> max_epochs;
};

gl::PipelineConfig pipeline_from(const tools::RunConfig& cfg, const PipelineFlags& flags) {
  json pj = cfg.pipeline.is_null() ? json::object() : cfg.pipeline;
  gl::check_config(pj.is_object(), "config: pipeline must be an object");
  if (!flags.arch.empty()) pj["arch"] = flags.arch;
  if (!flags.modality.empty()) pj["modality"] = flags.modality;
  if (!pj.contains("train") || pj["train"].is_null()) pj["train"] = json::object();
  if (flags.max_epochs) pj["train"]["max_epochs"] = *flags.max_epochs;
  if (cfg.seed) pj["train"]["seed"] = *cfg.seed;
  // The cross-attentive architecture trains with a larger default batch.
  if (pj.value("arch", "unimodal") == "multimodal_x" && !pj["train"].contains("batch_size"))
    pj["train"]["batch_size"] = 96;
  return gl::pipeline_config_from_json(pj.dump());
}

std::map<std::string, gl::Tensor> gesture_table(const tools::RunConfig& cfg,
                                                const std::string& checkpoint_flag,
                                                const gl::DatasetManifest& manifest) {
  if (cfg.embeddings) {
    return gl::load_embedding_store(cfg.resolve(*cfg.embeddings)).table();
  }
  std::string ckpt = checkpoint_flag;
  if (ckpt.empty() && cfg.checkpoint) ckpt = cfg.resolve(*cfg.checkpoint).string();
  gl::check_config(!ckpt.empty(),
                   "need \"embeddings\" (store dir) or a checkpoint to embed with");
  const gl::LoadedCheckpoint loaded = gl::load_checkpoint(ckpt);
  return gl::embed_corpus(manifest, *loaded.pipeline);
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string row;
  for (const auto& c : cells) {
    if (!row.empty()) row += ",";
    row += c;
  }
  return row + "\n";
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

json report_header(const tools::RunConfig& cfg, const std::string& fingerprint) {
  return json{{"seed", seed_of(cfg)}, {"config_fingerprint", fingerprint}};
}

json fold_json(const gl::ExperimentReport& report) {
  json folds = json::array();
  for (const auto& f : report.folds)
    folds.push_back(json{{"name", f.name},
                         {"train_count", f.train_count},
                         {"test_count", f.test_count},
                         {"accuracy", f.accuracy}});
  json j;
  j["folds"] = std::move(folds);
  j["mean_accuracy"] = report.mean_accuracy;
  j["sd_accuracy"] = report.sd_accuracy;
  j["warnings"] = report.warnings;
  return j;
}

// ---- commands -------------------------------------------------------------

int cmd_synth(const CommonFlags& flags) {
  tools::RunConfig cfg = load_config(flags);
  gl::SynthConfig synth = cfg.synth;
  if (cfg.seed) synth.seed = *cfg.seed;
  const auto dir = out_dir(cfg);
  const gl::DatasetManifest manifest = gl::generate_corpus(synth, dir);
  tools::RunOutput output(dir, json{{"synth", synth_to_json(synth)}}, synth.seed);
  output.finalize();
  std::cout << "wrote " << manifest.samples.size() << " samples, "
            << manifest.form_pairs.size() << " form pairs to " << dir.string() << "\n";
  return 0;
}

int cmd_pretrain(const CommonFlags& flags, const PipelineFlags& pf,
                 const std::string& resume_from) {
  tools::RunConfig cfg = load_config(flags);
  const auto dir = out_dir(cfg);
  const gl::DatasetManifest manifest = manifest_of(cfg);

  std::unique_ptr<gl::TrainablePipeline> pipeline;
  std::unique_ptr<gl::Adam> optimizer;
  gl::PretrainOptions options;
  options.out_dir = dir;
  options.monitor_pairs = manifest.form_pairs;
  if (cfg.clock == "zero") options.clock = [] { return 0.0; };

  if (!resume_from.empty()) {
    gl::LoadedCheckpoint loaded = gl::load_checkpoint(resume_from);
    gl::PipelineConfig config = loaded.config;
    if (pf.max_epochs) config.train.max_epochs = *pf.max_epochs;
    pipeline = std::make_unique<gl::TrainablePipeline>(config);
    for (gl::Parameter* p : pipeline->params().all()) {
      const gl::Parameter* src = loaded.pipeline->params().find(p->name);
      gl::check(src != nullptr, gl::ErrorKind::Integrity,
                "checkpoint misses parameter " + p->name);
      p->value = src->value;
    }
    optimizer = std::make_unique<gl::Adam>(
        pipeline->params(),
        loaded.has_optimizer ? loaded.optimizer_config
                             : gl::Adam::Config{config.train.learning_rate, 0.9, 0.999, 1e-8});
    if (loaded.has_optimizer) loaded.restore_optimizer(*optimizer);
    options.start_epoch = loaded.meta.epoch;
  } else {
    const gl::PipelineConfig config = pipeline_from(cfg, pf);
    pipeline = std::make_unique<gl::TrainablePipeline>(config);
    optimizer = std::make_unique<gl::Adam>(
        pipeline->params(), gl::Adam::Config{config.train.learning_rate, 0.9, 0.999, 1e-8});
  }

  const gl::PipelineConfig& config = pipeline->config();
  const gl::PreparedCorpus corpus =
      gl::prepare_corpus(manifest, config.kind.uses_verbal(),
                         config.train.validation_fraction, config.train.seed);

  std::string components;
  for (const auto& name : pipeline->loss_component_names())
    components += (components.empty() ? "" : ", ") + name;
  std::cout << "architecture " << config.kind.name() << " | losses {" << components << "} | "
            << pipeline->params().total_parameters() << " parameters\n";

  const gl::PretrainResult result = gl::pretrain(*pipeline, *optimizer, corpus, options);

  tools::RunOutput output(
      dir,
      json{{"pipeline", json::parse(gl::pipeline_config_to_json(config))},
           {"data", cfg.data.value_or("")},
           {"clock", cfg.clock}},
      config.train.seed);
  output.finalize();
  std::cout << "best epoch " << result.best_epoch << " (monitor rho "
            << num(result.best_rho) << "), " << result.epochs.size()
            << " epochs run\n";
  return 0;
}

int cmd_embed(const CommonFlags& flags, const std::string& checkpoint) {
  tools::RunConfig cfg = load_config(flags);
  const auto dir = out_dir(cfg);
  std::string ckpt = checkpoint;
  if (ckpt.empty() && cfg.checkpoint) ckpt = cfg.resolve(*cfg.checkpoint).string();
  gl::check_config(!ckpt.empty(), "--checkpoint is required");

  const gl::DatasetManifest manifest = manifest_of(cfg);
  const gl::LoadedCheckpoint loaded = gl::load_checkpoint(ckpt);
  const auto table = gl::embed_corpus(manifest, *loaded.pipeline);
  gl::save_embedding_store(dir, table, gl::fnv1a_hex(gl::read_text_file(ckpt)));

  tools::RunOutput output(
      dir, json{{"checkpoint", ckpt}, {"data", cfg.data.value_or("")}}, seed_of(cfg));
  output.finalize();
  std::cout << "wrote " << table.size() << " embeddings (width "
            << table.begin()->second.numel() << ") to " << dir.string() << "\n";
  return 0;
}

int cmd_eval_similarity(const CommonFlags& flags, const std::string& checkpoint) {
  tools::RunConfig cfg = load_config(flags);
  const auto dir = out_dir(cfg);
  const gl::DatasetManifest manifest = manifest_of(cfg);
  gl::check_config(!manifest.form_pairs.empty(), "manifest has no form pairs");
  const auto table = gesture_table(cfg, checkpoint, manifest);
  const gl::EmbedFn embed = gl::embed_from_table(table);

  gl::ExperimentConfig exp{cfg.resolver, seed_of(cfg)};
  const auto corr = gl::form_similarity_correlation(manifest.form_pairs, embed);

  json report = report_header(cfg, exp.fingerprint("similarity"));
  report["pairs"] = manifest.form_pairs.size();
  report["rho"] = corr ? json(corr->rho) : json(nullptr);
  report["p"] = corr ? json(corr->p) : json(nullptr);
  tools::RunOutput output(dir, report, seed_of(cfg));
  output.write_text("report.json", report.dump(2) + "\n");

  std::string csv = csv_row({"id_a", "id_b", "shared", "cosine"});
  for (const auto& p : manifest.form_pairs)
    csv += csv_row({p.id_a, p.id_b, std::to_string(p.shared_count()),
                    num(gl::cosine_similarity(embed(p.id_a), embed(p.id_b)))});
  output.write_text("similarity.csv", csv);
  output.write_text("similarity.svg",
                    tools::bar_chart_svg("Form similarity correlation", {"rho"},
                                         {corr ? corr->rho : 0.0}, "Spearman rho"));
  output.finalize();
  if (corr)
    std::cout << "rho " << num(corr->rho) << ", p " << num(corr->p) << " over "
              << manifest.form_pairs.size() << " pairs\n";
  else
    std::cout << "rho undefined (constant input) over " << manifest.form_pairs.size()
              << " pairs\n";
  return 0;
}

int cmd_eval_resolve(const CommonFlags& flags, const std::string& checkpoint) {
  tools::RunConfig cfg = load_config(flags);
  const auto dir = out_dir(cfg);
  const gl::DatasetManifest manifest = manifest_of(cfg);
  const auto table = gesture_table(cfg, checkpoint, manifest);

  gl::ExperimentConfig exp{cfg.resolver, seed_of(cfg)};
  const gl::ExperimentReport report =
      gl::leave_one_round_out(manifest, gl::embed_from_table(table), exp);

  std::map<std::pair<int, std::string>, int> class_counts;
  int labeled = 0;
  for (const auto& s : manifest.samples)
    if (s.referent) {
      ++class_counts[{s.referent->object_id, s.referent->part}];
      ++labeled;
    }
  int majority = 0;
  for (const auto& [cls, n] : class_counts) majority = std::max(majority, n);

  json j = report_header(cfg, report.config_fingerprint);
  j.update(fold_json(report));
  j["classes"] = class_counts.size();
  j["chance_rate"] = 1.0 / static_cast<double>(class_counts.size());
  j["majority_rate"] = static_cast<double>(majority) / static_cast<double>(labeled);
  tools::RunOutput output(dir, j, seed_of(cfg));
  output.write_text("report.json", j.dump(2) + "\n");

  std::string csv = csv_row({"fold", "train_count", "test_count", "accuracy"});
  std::vector<std::string> labels;
  std::vector<double> values;
  for (const auto& f : report.folds) {
    csv += csv_row({f.name, std::to_string(f.train_count), std::to_string(f.test_count),
                    num(f.accuracy)});
    labels.push_back(f.name);
    values.push_back(f.accuracy);
  }
  output.write_text("resolve.csv", csv);
  output.write_text("resolve.svg",
                    tools::bar_chart_svg("Resolution accuracy by held-out round", labels,
                                         values, "accuracy"));
  output.finalize();
  std::cout << "mean accuracy " << num(report.mean_accuracy) << " (sd "
            << num(report.sd_accuracy) << ") over " << report.folds.size() << " folds\n";
  for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

int cmd_eval_history(const CommonFlags& flags, const std::string& checkpoint) {
  tools::RunConfig cfg = load_config(flags);
  const auto dir = out_dir(cfg);
  const gl::DatasetManifest manifest = manifest_of(cfg);
  const auto table = gesture_table(cfg, checkpoint, manifest);

  gl::ExperimentConfig exp{cfg.resolver, seed_of(cfg)};
  const gl::DialogueHistoryReport report =
      gl::dialogue_history_experiment(manifest, gl::embed_from_table(table), exp);

  for (size_t i = 0; i < report.rounds.size(); ++i)
    std::cout << "parity round " << report.rounds[i] << ": pass ("
              << report.samples_per_round[i] << " training samples)\n";

  json j = report_header(cfg, report.config_fingerprint);
  j["rounds"] = report.rounds;
  j["baseline_accuracy"] = report.baseline_accuracy;
  j["specific_accuracy"] = report.specific_accuracy;
  j["samples_per_round"] = report.samples_per_round;
  if (report.series_ttest) {
    j["t"] = report.series_ttest->t;
    j["t_p"] = report.series_ttest->p;
  }
  if (report.baseline_trend) {
    j["baseline_trend_rho"] = report.baseline_trend->rho;
    j["baseline_trend_p"] = report.baseline_trend->p;
  }
  if (report.specific_trend) {
    j["specific_trend_rho"] = report.specific_trend->rho;
    j["specific_trend_p"] = report.specific_trend->p;
  }
  tools::RunOutput output(dir, j, seed_of(cfg));
  output.write_text("report.json", j.dump(2) + "\n");

  std::string csv = csv_row({"round", "baseline_accuracy", "specific_accuracy", "samples"});
  std::vector<double> xs;
  for (size_t i = 0; i < report.rounds.size(); ++i) {
    csv += csv_row({std::to_string(report.rounds[i]), num(report.baseline_accuracy[i]),
                    num(report.specific_accuracy[i]),
                    std::to_string(report.samples_per_round[i])});
    xs.push_back(report.rounds[i]);
  }
  output.write_text("history.csv", csv);
  output.write_text(
      "history.svg",
      tools::line_chart_svg("Accuracy across dialogue rounds", xs,
                            {{"baseline", report.baseline_accuracy},
                             {"dialogue-specific", report.specific_accuracy}},
                            "round", "accuracy"));
  output.finalize();
  if (report.series_ttest)
    std::cout << "series t " << num(report.series_ttest->t) << ", p "
              << num(report.series_ttest->p) << "\n";
  return 0;
}

int cmd_eval_noise(const CommonFlags& flags, const std::string& checkpoint,
                   const std::vector<double>& sigma_flag) {
  tools::RunConfig cfg = load_config(flags);
  const auto dir = out_dir(cfg);
  const gl::DatasetManifest manifest = manifest_of(cfg);
  std::string ckpt = checkpoint;
  if (ckpt.empty() && cfg.checkpoint) ckpt = cfg.resolve(*cfg.checkpoint).string();
  gl::check_config(!ckpt.empty(), "eval noise re-embeds and needs --checkpoint");
  const gl::LoadedCheckpoint loaded = gl::load_checkpoint(ckpt);

  const std::vector<double> sigmas = sigma_flag.empty() ? cfg.sigmas : sigma_flag;
  gl::ExperimentConfig exp{cfg.resolver, seed_of(cfg)};
  const auto rows = gl::noise_robustness(manifest, *loaded.pipeline, sigmas, exp);

  json j = report_header(cfg, exp.fingerprint("noise"));
  json jrows = json::array();
  std::string csv = csv_row({"sigma", "mean_accuracy", "sd_accuracy"});
  std::vector<double> xs, ys;
  for (const auto& row : rows) {
    jrows.push_back(json{{"sigma", row.sigma},
                         {"mean_accuracy", row.report.mean_accuracy},
                         {"sd_accuracy", row.report.sd_accuracy}});
    csv += csv_row({num(row.sigma), num(row.report.mean_accuracy),
                    num(row.report.sd_accuracy)});
    xs.push_back(row.sigma);
    ys.push_back(row.report.mean_accuracy);
  }
  j["rows"] = std::move(jrows);
  tools::RunOutput output(dir, j, seed_of(cfg));
  output.write_text("report.json", j.dump(2) + "\n");
  output.write_text("noise.csv", csv);
  output.write_text("noise.svg",
                    tools::line_chart_svg("Accuracy under coordinate jitter", xs,
                                          {{"accuracy", ys}}, "sigma (px)", "accuracy"));
  output.finalize();
  for (const auto& row : rows)
    std::cout << "sigma " << num(row.sigma) << ": accuracy " << num(row.report.mean_accuracy)
              << " (sd " << num(row.report.sd_accuracy) << ")\n";
  return 0;
}

int cmd_eval_concat(const CommonFlags& flags, const std::string& checkpoint) {
  tools::RunConfig cfg = load_config(flags);
  const auto dir = out_dir(cfg);
  const gl::DatasetManifest manifest = manifest_of(cfg);
  const auto gesture = gesture_table(cfg, checkpoint, manifest);
  const auto verbal = gl::pooled_verbal_table(manifest);
  gl::check_config(!verbal.empty(), "manifest has no usable verbal features");
  const int64_t semantic_dim = verbal.begin()->second.numel();

  std::map<std::string, gl::Tensor> semantic_only, concat;
  for (const auto& [id, g] : gesture) {
    auto it = verbal.find(id);
    const gl::Tensor* s = it == verbal.end() ? nullptr : &it->second;
    semantic_only[id] = s ? *s : gl::Tensor({1, semantic_dim});
    concat[id] = gl::concat_embeddings(g, s, semantic_dim);
  }

  gl::ExperimentConfig exp{cfg.resolver, seed_of(cfg)};
  const auto run = [&](const std::map<std::string, gl::Tensor>& table) {
    return gl::leave_one_round_out(manifest, gl::embed_from_table(table), exp);
  };
  const gl::ExperimentReport gesture_report = run(gesture);
  const gl::ExperimentReport semantic_report = run(semantic_only);
  const gl::ExperimentReport concat_report = run(concat);

  json j = report_header(cfg, exp.fingerprint("concat"));
  j["gesture"] = fold_json(gesture_report);
  j["semantic"] = fold_json(semantic_report);
  j["concatenated"] = fold_json(concat_report);
  tools::RunOutput output(dir, j, seed_of(cfg));
  output.write_text("report.json", j.dump(2) + "\n");

  std::string csv = csv_row({"embedding", "mean_accuracy", "sd_accuracy"});
  csv += csv_row({"gesture", num(gesture_report.mean_accuracy), num(gesture_report.sd_accuracy)});
  csv += csv_row(
      {"semantic", num(semantic_report.mean_accuracy), num(semantic_report.sd_accuracy)});
  csv += csv_row(
      {"concatenated", num(concat_report.mean_accuracy), num(concat_report.sd_accuracy)});
  output.write_text("concat.csv", csv);
  output.write_text("concat.svg",
                    tools::bar_chart_svg("Resolution accuracy by embedding",
                                         {"gesture", "semantic", "concat"},
                                         {gesture_report.mean_accuracy,
                                          semantic_report.mean_accuracy,
                                          concat_report.mean_accuracy},
                                         "accuracy"));
  output.finalize();
  std::cout << "gesture " << num(gesture_report.mean_accuracy) << " | semantic "
            << num(semantic_report.mean_accuracy) << " | concatenated "
            << num(concat_report.mean_accuracy) << "\n";
  return 0;
}

int cmd_params(const CommonFlags& flags, const PipelineFlags& pf) {
  tools::RunConfig cfg = load_config(flags);
  const gl::PipelineConfig config = pipeline_from(cfg, pf);
  gl::TrainablePipeline pipeline(config);

  std::map<std::string, int64_t> by_prefix;
  for (const gl::Parameter* p : pipeline.params().all()) {
    const auto dot = p->name.find('.');
    by_prefix[dot == std::string::npos ? p->name : p->name.substr(0, dot)] +=
        p->value.numel();
  }
  std::cout << "architecture " << config.kind.name() << "\n";
  for (const auto& [prefix, count] : by_prefix)
    std::cout << "  " << prefix << ": " << count << "\n";
  std::cout << "total " << pipeline.params().total_parameters() << " parameters\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gesture representation learning and evaluation"};
  app.require_subcommand(1);

  CommonFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth, synth_flags);

  CommonFlags pretrain_flags;
  PipelineFlags pretrain_pf;
  std::string pretrain_resume;
  auto* pretrain = app.add_subcommand("pretrain", "self-supervised pre-training");
  add_common(pretrain, pretrain_flags);
  pretrain->add_option("--arch", pretrain_pf.arch, "unimodal|multimodal|multimodal_x")
      ->check(CLI::IsMember({"unimodal", "multimodal", "multimodal_x"}));
  pretrain->add_option("--modality", pretrain_pf.modality, "none|semantic|speech")
      ->check(CLI::IsMember({"none", "semantic", "speech"}));
  pretrain->add_option("--max-epochs", pretrain_pf.max_epochs, "epoch budget");
  pretrain->add_option("--checkpoint", pretrain_resume, "resume from this checkpoint");

  CommonFlags embed_flags;
  std::string embed_checkpoint;
  auto* embed = app.add_subcommand("embed", "write an embedding store");
  add_common(embed, embed_flags);
  embed->add_option("--checkpoint", embed_checkpoint, "model checkpoint");

  auto* eval = app.add_subcommand("eval", "downstream evaluation");
  eval->require_subcommand(1);
  CommonFlags sim_flags, res_flags, hist_flags, noise_flags, concat_flags;
  std::string sim_ckpt, res_ckpt, hist_ckpt, noise_ckpt, concat_ckpt;
  std::vector<double> noise_sigmas;
  auto* sim = eval->add_subcommand("similarity", "form-similarity correlation");
  add_common(sim, sim_flags);
  add_embeddings(sim, sim_flags);
  sim->add_option("--checkpoint", sim_ckpt, "embed with this checkpoint");
  auto* res = eval->add_subcommand("resolve", "leave-one-round-out resolution");
  add_common(res, res_flags);
  add_embeddings(res, res_flags);
  res->add_option("--checkpoint", res_ckpt, "embed with this checkpoint");
  auto* hist = eval->add_subcommand("history", "dialogue-history comparison");
  add_common(hist, hist_flags);
  add_embeddings(hist, hist_flags);
  hist->add_option("--checkpoint", hist_ckpt, "embed with this checkpoint");
  auto* noise = eval->add_subcommand("noise", "jitter robustness grid");
  add_common(noise, noise_flags);
  noise->add_option("--checkpoint", noise_ckpt, "embed with this checkpoint");
  noise->add_option("--sigmas", noise_sigmas, "jitter grid (px)")->delimiter(',');
  auto* concat = eval->add_subcommand("concat", "gesture+semantic concatenation");
  add_common(concat, concat_flags);
  add_embeddings(concat, concat_flags);
  concat->add_option("--checkpoint", concat_ckpt, "embed with this checkpoint");

  CommonFlags params_flags;
  PipelineFlags params_pf;
  auto* params = app.add_subcommand("params", "print parameter counts");
  add_common(params, params_flags, false);
  params->add_option("--arch", params_pf.arch, "unimodal|multimodal|multimodal_x")
      ->check(CLI::IsMember({"unimodal", "multimodal", "multimodal_x"}));
  params->add_option("--modality", params_pf.modality, "none|semantic|speech")
      ->check(CLI::IsMember({"none", "semantic", "speech"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_flags);
    if (pretrain->parsed()) return cmd_pretrain(pretrain_flags, pretrain_pf, pretrain_resume);
    if (embed->parsed()) return cmd_embed(embed_flags, embed_checkpoint);
    if (sim->parsed()) return cmd_eval_similarity(sim_flags, sim_ckpt);
    if (res->parsed()) return cmd_eval_resolve(res_flags, res_ckpt);
    if (hist->parsed()) return cmd_eval_history(hist_flags, hist_ckpt);
    if (noise->parsed()) return cmd_eval_noise(noise_flags, noise_ckpt, noise_sigmas);
    if (concat->parsed()) return cmd_eval_concat(concat_flags, concat_ckpt);
    if (params->parsed()) return cmd_params(params_flags, params_pf);
  } catch (const gl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == gl::ErrorKind::Numeric ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
