// Copyright 2026 The wavft Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// The wavft command line: feature extraction, corpus synthesis, training,
// evaluation, comparison, and hyperparameter sweeps, as one binary with
// subcommands. Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "wavft/checkpoint.hpp"
#include "wavft/config.hpp"
#include "wavft/eval.hpp"
#include "wavft/features.hpp"
#include "wavft/synth.hpp"
#include "wavft/trainer.hpp"
#include "wavft/wav.hpp"

namespace wavft {
namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  WAVFT_CHECK(in.good(), IoError, "cannot open: ", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  WAVFT_CHECK(out.good(), IoError, "cannot open for write: ", path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  WAVFT_CHECK(out.good(), IoError, "short write: ", path);
}

// Options shared by every subcommand: preset -> config file -> --set
// overrides, applied in that order.
struct ConfigLayers {
  std::string preset = "desk";
  std::string config_path;
  std::vector<std::string> sets;  // "section.key=value"

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "configuration preset (paper|desk)")
        ->default_str("desk");
    cmd->add_option("--config", config_path, "configuration file applied over the preset");
    cmd->add_option("--set", sets, "override as section.key=value (repeatable)");
  }

  RunConfig resolve() const {
    RunConfig cfg = preset_config(preset);
    if (!config_path.empty()) apply_ini(cfg, slurp(config_path), config_path);
    for (const std::string& kv : sets) {
      const size_t eq = kv.find('=');
      WAVFT_CHECK(eq != std::string::npos, ConfigError, "--set needs section.key=value, got '",
                  kv, "'");
      apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

// --out, defaulting to $WAVFT_OUT/<command> (or ./<command>).
std::string resolve_out(const std::string& flag_value, const std::string& command) {
  if (!flag_value.empty()) return flag_value;
  const char* root = std::getenv("WAVFT_OUT");
  return (root != nullptr ? std::string(root) : std::string(".")) + "/" + command;
}

std::vector<Utterance> load_corpus(const std::string& manifest_path) {
  std::vector<Utterance> utts;
  for (const ManifestEntry& entry : read_manifest(manifest_path))
    utts.push_back(load_utterance(entry));
  return utts;
}

// ---- extract ----------------------------------------------------------------

int cmd_extract(const RunConfig& cfg, const std::string& manifest_path,
                const std::string& out_dir, bool vad) {
  const auto entries = read_manifest(manifest_path);
  fs::create_directories(out_dir + "/features");

  std::vector<ManifestEntry> ok;
  int failed = 0;
  for (const ManifestEntry& entry : entries) {
    try {
      AudioBuffer audio = read_wav(entry.path);
      if (vad) {
        const auto segments =
            energy_vad(audio, cfg.vad_threshold_db, cfg.vad_min_segment_ms);
        std::vector<float> kept;
        for (const auto& [begin, end] : segments)
          kept.insert(kept.end(), audio.samples.begin() + begin, audio.samples.begin() + end);
        audio.samples = std::move(kept);
      }
      const FeatureMatrix features = extract_features(audio, cfg.features);
      const std::string path = out_dir + "/features/" + entry.id + ".wft1";
      write_feature_file(path, features.frames);
      ok.push_back({entry.id, path, entry.label_path});
    } catch (const Error& e) {
      std::cerr << "extract: " << entry.id << ": " << e.what() << "\n";
      ++failed;
    }
  }
  write_manifest(out_dir + "/manifest.tsv", ok);

  nlohmann::json meta;
  meta["config"] = hex64(config_digest(cfg));
  meta["extracted"] = ok.size();
  meta["failed"] = failed;
  meta["vad"] = vad;
  spill(out_dir + "/extract.meta.json", meta.dump(2) + "\n");

  std::cout << "extracted " << ok.size() << " of " << entries.size() << " utterances to "
            << out_dir << "\n";
  return failed == 0 ? 0 : 2;
}

// ---- synth ------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  const SyntheticCorpus corpus = generate_synthetic_corpus(cfg.synth, cfg.features);
  fs::create_directories(out_dir + "/labelled");
  fs::create_directories(out_dir + "/unlabelled");

  std::vector<ManifestEntry> labelled, unlabelled;
  for (const Utterance& u : corpus.labelled) {
    const std::string feat = out_dir + "/labelled/" + u.id + ".wft1";
    const std::string labels = out_dir + "/labelled/" + u.id + ".labels";
    write_feature_file(feat, u.features.frames);
    write_label_file(labels, *u.labels);
    labelled.push_back({u.id, feat, labels});
  }
  for (const Utterance& u : corpus.unlabelled) {
    const std::string feat = out_dir + "/unlabelled/" + u.id + ".wft1";
    write_feature_file(feat, u.features.frames);
    unlabelled.push_back({u.id, feat, ""});
  }
  write_manifest(out_dir + "/labelled.tsv", labelled);
  write_manifest(out_dir + "/unlabelled.tsv", unlabelled);

  nlohmann::json meta;
  meta["config"] = hex64(config_digest(cfg));
  meta["seed"] = cfg.synth.seed;
  meta["labelled_utterances"] = corpus.labelled.size();
  meta["unlabelled_utterances"] = corpus.unlabelled.size();
  meta["labelled_frames"] = corpus.labelled_frames;
  meta["unlabelled_frames"] = corpus.unlabelled_frames;
  meta["beta"] = corpus.beta();
  spill(out_dir + "/meta.json", meta.dump(2) + "\n");

  std::cout << "synthesized " << corpus.labelled.size() << " labelled + "
            << corpus.unlabelled.size() << " unlabelled utterances, beta " << corpus.beta()
            << ", to " << out_dir << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const std::string& labelled_manifest,
              const std::string& unlabelled_manifest, const std::string& out_dir) {
  std::vector<Utterance> labelled, unlabelled;
  if (!labelled_manifest.empty()) labelled = load_corpus(labelled_manifest);
  if (!unlabelled_manifest.empty()) unlabelled = load_corpus(unlabelled_manifest);

  fs::create_directories(out_dir);
  spill(out_dir + "/config.ini", serialize_config(cfg));

  std::ofstream metrics(out_dir + "/metrics.tsv", std::ios::binary);
  WAVFT_CHECK(metrics.good(), IoError, "cannot open for write: ", out_dir + "/metrics.tsv");
  const TrainCheckpoint last = train(cfg.model, cfg.train, labelled, unlabelled,
                                     config_digest(cfg), model_digest(cfg), &metrics, out_dir);
  std::cout << "trained " << last.step << " steps; checkpoint " << out_dir
            << "/final.wftc, config " << hex64(last.config_digest) << "\n";
  return 0;
}

// ---- eval / compare ------------------------------------------------------------

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
             const std::string& manifest_path, const std::string& report_path) {
  const TrainCheckpoint ckpt = read_checkpoint(checkpoint_path);
  WAVFT_CHECK(ckpt.model_digest == model_digest(cfg), ConfigError, "checkpoint ",
              checkpoint_path, " was trained with a different [model] section (",
              hex64(ckpt.model_digest), " vs ", hex64(model_digest(cfg)), ")");
  validate_params_shape(ckpt.params, cfg.model);

  const std::vector<Utterance> eval_set = load_corpus(manifest_path);
  const EvalReport report = evaluate_frame_accuracy(ckpt.params, cfg.model, eval_set,
                                                    ckpt.config_digest, checkpoint_path);
  const std::string text = serialize_report(report);
  if (!report_path.empty()) spill(report_path, text);
  std::cout << text;
  return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b) {
  const EvalReport a = parse_report(slurp(path_a));
  const EvalReport b = parse_report(slurp(path_b));
  std::cout << format_compare(compare_runs(a, b));
  return 0;
}

// ---- sweep ------------------------------------------------------------------

struct SweepRow {
  std::string name;
  double alpha, p, beta_limit, accuracy;
};

int cmd_sweep(const RunConfig& base, const std::string& out_dir) {
  // Train corpus from the configured spec; a held-out labelled eval corpus
  // from an independent seed.
  const SyntheticCorpus corpus = generate_synthetic_corpus(base.synth, base.features);
  SyntheticCorpusSpec eval_spec = base.synth;
  eval_spec.seed = base.synth.seed + 1;
  eval_spec.utterances_unlabelled = 0;
  const SyntheticCorpus eval_corpus = generate_synthetic_corpus(eval_spec, base.features);

  fs::create_directories(out_dir);

  auto run_one = [&](const std::string& name, RunConfig cfg) {
    const std::string dir = out_dir + "/" + name;
    fs::create_directories(dir);
    spill(dir + "/config.ini", serialize_config(cfg));
    std::ofstream metrics(dir + "/metrics.tsv", std::ios::binary);
    const TrainCheckpoint ckpt =
        train(cfg.model, cfg.train, corpus.labelled, corpus.unlabelled, config_digest(cfg),
              model_digest(cfg), &metrics, dir);
    const EvalReport report = evaluate_frame_accuracy(
        ckpt.params, cfg.model, eval_corpus.labelled, config_digest(cfg), dir + "/final.wftc");
    spill(dir + "/report.txt", serialize_report(report));
    return SweepRow{name, cfg.train.alpha, cfg.train.p, cfg.train.beta_limit,
                    report.frame_accuracy()};
  };

  std::vector<SweepRow> rows;
  {
    RunConfig cfg = base;
    cfg.train.p = 1.0;
    cfg.train.alpha = 1.0;
    rows.push_back(run_one("baseline", cfg));
  }
  for (double alpha : {0.05, 0.25, 0.5, 0.75, 1.0}) {
    RunConfig cfg = base;
    cfg.train.alpha = alpha;
    rows.push_back(run_one(str_cat("alpha-", alpha), cfg));
  }
  for (double beta : {1.0, 2.0, 5.0}) {
    RunConfig cfg = base;
    cfg.train.beta_limit = beta;
    rows.push_back(run_one(str_cat("beta-", beta), cfg));
  }

  const double baseline_acc = rows.front().accuracy;
  std::string table = "name\talpha\tp\tbeta_limit\taccuracy\trel_delta\n";
  for (const SweepRow& row : rows) {
    const double rel =
        baseline_acc > 0.0 ? (row.accuracy - baseline_acc) / baseline_acc : 0.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s\t%g\t%g\t%g\t%.6f\t%+.2f%%\n", row.name.c_str(),
                  row.alpha, row.p, row.beta_limit, row.accuracy, 100.0 * rel);
    table += buf;
  }
  spill(out_dir + "/sweep.tsv", table);
  std::cout << table;
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"semi-supervised acoustic-model finetuning toolkit"};
  app.require_subcommand(1);

  // extract
  auto* extract = app.add_subcommand("extract", "WAVs to feature files via a manifest");
  ConfigLayers extract_cfg;
  extract_cfg.attach(extract);
  std::string extract_manifest, extract_out;
  bool extract_vad = false;
  extract->add_option("manifest", extract_manifest, "input manifest (id\\twav[\\tlabels])")
      ->required();
  extract->add_option("--out", extract_out, "output directory");
  extract->add_flag("--vad", extract_vad, "drop low-energy regions first");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled+unlabelled corpus");
  ConfigLayers synth_cfg;
  synth_cfg.attach(synth);
  std::string synth_out;
  uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory");
  auto* opt_seed =
      synth->add_option("--seed", synth_seed, "corpus seed (shorthand for data.synth_seed)");

  // train
  auto* train_cmd = app.add_subcommand("train", "run the finetuning loop");
  ConfigLayers train_cfg;
  train_cfg.attach(train_cmd);
  std::string train_labelled, train_unlabelled, train_out;
  bool baseline = false;
  double flag_alpha = 0, flag_p = 0, flag_beta = 0;
  uint64_t seed_data = 0, seed_mask = 0, seed_distractor = 0, seed_init = 0;
  train_cmd->add_option("--labelled", train_labelled, "labelled manifest");
  train_cmd->add_option("--unlabelled", train_unlabelled, "unlabelled manifest");
  train_cmd->add_option("--out", train_out, "output directory");
  auto* opt_alpha =
      train_cmd->add_option("--alpha", flag_alpha, "CE weight on labelled batches");
  auto* opt_p = train_cmd->add_option("--p", flag_p, "labelled-batch probability");
  auto* opt_beta = train_cmd->add_option("--beta-limit", flag_beta,
                                         "cap on unlabelled/labelled frame ratio");
  auto* opt_sd = train_cmd->add_option("--seed-data", seed_data, "batch order seed");
  auto* opt_sm = train_cmd->add_option("--seed-mask", seed_mask, "mask planning seed");
  auto* opt_sk =
      train_cmd->add_option("--seed-distractor", seed_distractor, "distractor draw seed");
  auto* opt_si = train_cmd->add_option("--seed-init", seed_init, "weight init seed");
  train_cmd->add_flag("--baseline", baseline,
                      "conventional finetuning: labelled batches only, pure CE (p=1, alpha=1)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "frame accuracy of a checkpoint on a manifest");
  ConfigLayers eval_cfg;
  eval_cfg.attach(eval_cmd);
  std::string eval_ckpt, eval_manifest, eval_out;
  eval_cmd->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("manifest", eval_manifest, "labelled eval manifest")->required();
  eval_cmd->add_option("--out", eval_out, "also write the report here");

  // compare
  auto* compare = app.add_subcommand("compare", "delta between two eval reports");
  std::string cmp_a, cmp_b;
  compare->add_option("baseline", cmp_a, "baseline report file")->required();
  compare->add_option("candidate", cmp_b, "candidate report file")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "alpha and beta grids over the synthetic corpus");
  ConfigLayers sweep_cfg;
  sweep_cfg.attach(sweep);
  std::string sweep_out;
  sweep->add_option("--out", sweep_out, "output directory");

  // CLI11's own exit codes spread over a wide range; the scripting contract
  // pins usage/validation problems to 1 (and --help to 0).
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (extract->parsed()) {
    RunConfig cfg = extract_cfg.resolve();
    cfg.validate();
    return cmd_extract(cfg, extract_manifest, resolve_out(extract_out, "extract"),
                       extract_vad);
  }
  if (synth->parsed()) {
    RunConfig cfg = synth_cfg.resolve();
    if (*opt_seed) cfg.synth.seed = synth_seed;
    cfg.validate();
    return cmd_synth(cfg, resolve_out(synth_out, "synth"));
  }
  if (train_cmd->parsed()) {
    RunConfig cfg = train_cfg.resolve();
    if (baseline) {
      cfg.train.p = 1.0;
      cfg.train.alpha = 1.0;
    }
    if (*opt_alpha) cfg.train.alpha = flag_alpha;
    if (*opt_p) cfg.train.p = flag_p;
    if (*opt_beta) cfg.train.beta_limit = flag_beta;
    if (*opt_sd) cfg.train.seed_data = seed_data;
    if (*opt_sm) cfg.train.seed_mask = seed_mask;
    if (*opt_sk) cfg.train.seed_distractor = seed_distractor;
    if (*opt_si) cfg.train.seed_init = seed_init;
    cfg.validate();
    return cmd_train(cfg, train_labelled, train_unlabelled, resolve_out(train_out, "train"));
  }
  if (eval_cmd->parsed()) {
    RunConfig cfg = eval_cfg.resolve();
    cfg.validate();
    return cmd_eval(cfg, eval_ckpt, eval_manifest, eval_out);
  }
  if (compare->parsed()) return cmd_compare(cmp_a, cmp_b);
  if (sweep->parsed()) {
    RunConfig cfg = sweep_cfg.resolve();
    cfg.validate();
    return cmd_sweep(cfg, resolve_out(sweep_out, "sweep"));
  }
  return 0;
}

}  // namespace
}  // namespace wavft

int main(int argc, char** argv) {
  try {
    return wavft::run(argc, argv);
  } catch (const wavft::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const wavft::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
