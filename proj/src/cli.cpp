#include "ualab/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ualab/config.hpp"
#include "ualab/report.hpp"

namespace ualab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string default_out_root() {
  if (const char* env = std::getenv("UALAB_OUT_ROOT")) return env;
  return ".";
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) {
    throw IoError(std::string(what) + " directory does not exist: " + path);
  }
}

void apply_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

std::string fmt_acc(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double loc_at(const EvalMetrics& m, double threshold) {
  for (const auto& [t, acc] : m.loc_accuracy_at) {
    if (std::abs(t - threshold) < 1e-12) return acc;
  }
  return std::nan("");
}

// ---------------------------------------------------------------------------
// generate-data
// ---------------------------------------------------------------------------

int cmd_generate_data(RunConfig cfg) {
  require_dir(cfg.out_dir, "output");
  apply_threads(cfg.threads);
  cfg.gen.seed = cfg.seed;
  validate(cfg.gen);

  const auto videos = generate_dataset(cfg.gen, cfg.counts);
  const fs::path out(cfg.out_dir);
  write_videos((out / "dataset.jsonl").string(), videos);

  json manifest;
  manifest["config_digest"] = config_digest(cfg);
  manifest["seed"] = cfg.seed;
  manifest["counts"] = {{"pretrain", cfg.counts.pretrain},
                        {"labeled_train", cfg.counts.labeled_train},
                        {"labeled_test", cfg.counts.labeled_test}};
  manifest["no_signal"] = cfg.gen.regime_shift == 0.0;
  manifest["config"] = json::parse(to_canonical_json(cfg));
  std::ofstream mf(out / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw IoError("cannot write manifest.json");

  std::cout << "wrote " << videos.size() << " videos to "
            << (out / "dataset.jsonl").string() << " (digest "
            << config_digest(cfg) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

int cmd_pretrain(RunConfig cfg, const std::string& data_dir) {
  require_dir(cfg.out_dir, "output");
  apply_threads(cfg.threads);
  const fs::path data(data_dir);
  const auto pool = load_pretrain_pool((data / "dataset.jsonl").string());

  PretrainOptions opts = cfg.pretrain;
  opts.seed = cfg.seed;
  const PretrainResult result =
      pretrain(pool, cfg.dims, cfg.temperature, opts);
  if (result.skipped_videos > 0) {
    std::cerr << "warning: skipped " << result.skipped_videos
              << " videos too short for triplet sampling\n";
  }

  const std::string digest = config_digest(cfg);
  const fs::path out(cfg.out_dir);
  save_checkpoint((out / "checkpoint.bin").string(), result.params, cfg.seed,
                  digest);

  std::ofstream log(out / "pretrain_log.jsonl");
  json header;
  header["config_digest"] = digest;
  header["seed"] = cfg.seed;
  header["scope"] = to_string(opts.scope);
  header["mode"] = to_string(opts.mode);
  header["steps"] = opts.steps;
  header["skipped_videos"] = result.skipped_videos;
  log << header.dump() << "\n";
  for (const auto& rec : result.log) {
    json row;
    row["step"] = rec.step;
    row["l_temp"] = rec.report.l_temp;
    row["l_ord"] = rec.report.l_ord;
    row["l_total"] = rec.report.l_total;
    row["pair_count"] = rec.report.pair_count;
    row["negative_count"] = rec.report.negative_count;
    log << row.dump() << "\n";
  }
  if (!log) throw IoError("cannot write pretrain_log.jsonl");

  const double final_loss =
      result.log.empty() ? 0.0 : result.log.back().report.l_total;
  std::cout << "pretrained " << opts.steps << " steps (" << to_string(opts.mode)
            << ", " << to_string(opts.scope) << "), final l_total "
            << fmt_acc(final_loss) << ", checkpoint "
            << (out / "checkpoint.bin").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvalSetting {
  Regime regime;
  double fraction;
};

int cmd_evaluate(RunConfig cfg, const std::string& data_dir,
                 const std::string& checkpoint_path,
                 bool with_scratch_baseline) {
  require_dir(cfg.out_dir, "output");
  apply_threads(cfg.threads);
  const fs::path data(data_dir);
  const auto train =
      load_split((data / "dataset.jsonl").string(), Split::LabeledTrain);
  const auto test =
      load_split((data / "dataset.jsonl").string(), Split::LabeledTest);
  if (train.empty() || test.empty()) {
    throw DatasetNotFound("dataset has empty labeled splits: " +
                          (data / "dataset.jsonl").string());
  }
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const std::string digest = config_digest(cfg);

  std::vector<std::pair<std::string, ModelParams>> representations;
  representations.emplace_back("pretrained", ck.params);
  if (with_scratch_baseline) {
    representations.emplace_back(
        "scratch",
        scratch_params(ck.params.dims, ck.params.temperature,
                       cfg.seed ^ 0x5c7a7c8ULL));
  }
  const std::vector<EvalSetting> settings = {{Regime::Frozen, 0.1},
                                             {Regime::Frozen, 1.0},
                                             {Regime::Finetuned, 1.0}};

  const fs::path out(cfg.out_dir);
  std::ofstream metrics_log(out / "metrics.jsonl");
  std::vector<EvalMetrics> rows;
  for (std::size_t r = 0; r < representations.size(); ++r) {
    for (std::size_t s = 0; s < settings.size(); ++s) {
      Rng rng = Rng(cfg.seed).stream(0xe7a10000ULL + r * 100 + s);
      EvalMetrics m = evaluate_representation(
          representations[r].second, train, test, settings[s].regime,
          settings[s].fraction, cfg.eval, rng);
      m.representation = representations[r].first;
      m.seed = cfg.seed;
      m.config_digest = digest;
      metrics_log << to_json_line(m) << "\n";
      rows.push_back(std::move(m));
    }
  }
  if (!metrics_log) throw IoError("cannot write metrics.jsonl");

  std::ofstream summary(out / "summary.txt");
  summary << "evaluation summary (seed " << cfg.seed << ", digest " << digest
          << ")\n\n";
  summary << "classification accuracy\n";
  summary << "  representation    linear-10%  linear-100%  finetune-100%\n";
  for (const auto& [name, params] : representations) {
    (void)params;
    char line[160];
    const auto cell = [&](Regime regime, double fraction) -> std::string {
      for (const auto& m : rows) {
        if (m.representation == name && m.regime == regime &&
            std::abs(m.labeled_fraction - fraction) < 1e-12) {
          return fmt_acc(m.cls_accuracy);
        }
      }
      return "-";
    };
    std::snprintf(line, sizeof(line), "  %-16s  %10s  %11s  %13s\n",
                  name.c_str(), cell(Regime::Frozen, 0.1).c_str(),
                  cell(Regime::Frozen, 1.0).c_str(),
                  cell(Regime::Finetuned, 1.0).c_str());
    summary << line;
  }
  summary << "\nlocalization accuracy (frozen probe, all labels)\n";
  for (const auto& m : rows) {
    if (m.regime != Regime::Frozen || m.labeled_fraction != 1.0) continue;
    summary << "  " << m.representation << ":";
    for (const auto& [threshold, acc] : m.loc_accuracy_at) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " within %.2fs %s;", threshold,
                    fmt_acc(acc).c_str());
      summary << buf;
    }
    summary << "\n";
  }
  summary << "\nanticipation accuracy (horizon "
          << fmt_acc(cfg.eval.horizon) << "s)\n";
  for (const auto& m : rows) {
    if (m.labeled_fraction != 1.0) continue;
    summary << "  " << m.representation << " (" << to_string(m.regime)
            << "): " << fmt_acc(m.ant_accuracy) << "\n";
  }
  if (!summary) throw IoError("cannot write summary.txt");

  std::cout << "evaluated " << rows.size() << " settings, metrics at "
            << (out / "metrics.jsonl").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

int cmd_ablate(RunConfig cfg, const std::string& data_dir,
               const std::vector<std::string>& scope_names,
               const std::vector<std::string>& mode_names,
               std::vector<std::uint64_t> seeds) {
  require_dir(cfg.out_dir, "output");
  apply_threads(cfg.threads);
  const fs::path data(data_dir);
  const auto dataset = read_videos((data / "dataset.jsonl").string());
  if (seeds.empty()) seeds = {1, 2, 3};

  std::vector<AblationCell> grid;
  for (const auto& s : scope_names) {
    for (const auto& m : mode_names) {
      grid.push_back({scope_from_string(s), loss_mode_from_string(m)});
    }
  }

  const std::string digest = config_digest(cfg);
  const auto rows =
      run_ablation_matrix(dataset, grid, seeds, cfg.dims, cfg.temperature,
                          cfg.pretrain, cfg.eval, digest);

  const fs::path out(cfg.out_dir);
  std::ofstream csv(out / "ablation.csv");
  csv << "scope,loss_mode,seed,cls_acc,loc_acc_1.0,loc_acc_0.25,ant_acc,"
         "regime\n";
  for (const auto& row : rows) {
    const double cls = row.failed ? std::nan("") : row.metrics.cls_accuracy;
    const double l1 = row.failed ? std::nan("") : loc_at(row.metrics, 1.0);
    const double l025 = row.failed ? std::nan("") : loc_at(row.metrics, 0.25);
    const double ant = row.failed ? std::nan("") : row.metrics.ant_accuracy;
    csv << to_string(row.scope) << ',' << to_string(row.mode) << ','
        << row.seed << ',' << fmt_acc(cls) << ',' << fmt_acc(l1) << ','
        << fmt_acc(l025) << ',' << fmt_acc(ant) << ','
        << to_string(Regime::Frozen) << "\n";
  }
  if (!csv) throw IoError("cannot write ablation.csv");

  // Per-cell mean and spread, plus the soft loss-combination direction check.
  std::map<std::string, std::vector<double>> cell_cls;
  std::map<std::string, int> cell_failures;
  for (const auto& row : rows) {
    const std::string key =
        std::string(to_string(row.scope)) + "/" + to_string(row.mode);
    if (row.failed) {
      cell_failures[key] += 1;
    } else {
      cell_cls[key].push_back(row.metrics.cls_accuracy);
    }
  }
  const auto mean_of = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? std::nan("") : acc / static_cast<double>(v.size());
  };
  const auto spread_of = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
  };

  std::ofstream summary(out / "ablation_summary.txt");
  summary << "ablation summary (digest " << digest << ", seeds";
  for (auto s : seeds) summary << " " << s;
  summary << ")\n\n";
  summary << "cell                         mean_cls    spread    runs\n";
  for (const auto& [key, values] : cell_cls) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-28s %9s %9s %7zu\n", key.c_str(),
                  fmt_acc(mean_of(values)).c_str(),
                  fmt_acc(spread_of(values)).c_str(), values.size());
    summary << line;
  }
  for (const auto& [key, count] : cell_failures) {
    summary << key << ": " << count << " failed runs\n";
  }

  // Soft direction check: combining both loss terms should roughly match or
  // beat the best single term. A miss is flagged, not fatal.
  for (const char* scope : {"global", "local"}) {
    const auto find_mean = [&](const std::string& mode) {
      const auto it = cell_cls.find(std::string(scope) + "/" + mode);
      return it == cell_cls.end() ? std::nan("") : mean_of(it->second);
    };
    const double combined = find_mean("combined");
    const double temp_only = find_mean("temp_only");
    const double ord_only = find_mean("ord_only");
    if (std::isnan(combined) || std::isnan(temp_only) || std::isnan(ord_only)) {
      continue;
    }
    const double best_single = std::max(temp_only, ord_only);
    summary << "\ndirection check (" << scope << "): combined "
            << fmt_acc(combined) << " vs best single term "
            << fmt_acc(best_single) << " -> "
            << (combined >= best_single - 0.01 ? "ok" : "FLAG: combined "
                                                        "below best single "
                                                        "term")
            << "\n";
  }
  if (!summary) throw IoError("cannot write ablation_summary.txt");

  std::cout << "ablation matrix: " << rows.size() << " runs, table at "
            << (out / "ablation.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// argument wiring
// ---------------------------------------------------------------------------

std::string find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  RunConfig cfg;
  const std::string config_path = find_config_arg(args);
  if (!config_path.empty()) cfg = load_config_file(config_path);
  if (cfg.out_dir.empty()) cfg.out_dir = default_out_root();

  CLI::App app{"synthetic lab for self-supervised temporal representation "
               "learning: temporal-contrastive + clip-order pretraining with "
               "classification / localization / anticipation probes"};
  app.require_subcommand(1);
  std::string config_dummy;
  app.add_option("--config", config_dummy,
                 "JSON config file; flags override its values");

  std::string data_dir;
  std::string checkpoint_path;
  bool with_scratch = false;
  int total_videos = 0;
  std::vector<std::string> scope_names = {"global", "local"};
  std::vector<std::string> mode_names = {"temp_only", "ord_only", "combined",
                                         "combined_permutation"};
  std::vector<std::uint64_t> seeds;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", cfg.out_dir,
                    "output directory (must exist; default $UALAB_OUT_ROOT "
                    "or .)");
    cmd->add_option("--seed", cfg.seed, "master seed");
    cmd->add_option("--threads", cfg.threads,
                    "cap worker threads; does not change results");
    cmd->add_option("--config", config_dummy, "JSON config file");
  };

  auto* gen = app.add_subcommand("generate-data",
                                 "write a synthetic dataset with annotated "
                                 "transitions");
  add_common(gen);
  gen->add_option("--videos", total_videos,
                  "total videos, split 60/20/20 (overrides counts)");
  gen->add_option("--pretrain-videos", cfg.counts.pretrain);
  gen->add_option("--train-videos", cfg.counts.labeled_train);
  gen->add_option("--test-videos", cfg.counts.labeled_test);
  gen->add_option("--d-in", cfg.gen.d_in, "feature dimension");
  gen->add_option("--n-min", cfg.gen.n_range.first, "min clips per video");
  gen->add_option("--n-max", cfg.gen.n_range.second, "max clips per video");
  gen->add_option("--quantile-lo", cfg.gen.transition_quantile_range.first);
  gen->add_option("--quantile-hi", cfg.gen.transition_quantile_range.second);
  gen->add_option("--noise-sigma", cfg.gen.noise_sigma);
  gen->add_option("--regime-shift", cfg.gen.regime_shift);
  gen->add_option("--clip-stride", cfg.gen.clip_stride);

  auto* pre = app.add_subcommand("pretrain",
                                 "self-supervised pretraining on the "
                                 "unlabeled split");
  add_common(pre);
  pre->add_option("--data", data_dir, "directory containing dataset.jsonl");
  pre->add_option("--steps", cfg.pretrain.steps);
  pre->add_option("--batch-videos", cfg.pretrain.batch_videos,
                  "videos (triplets) per step");
  pre->add_option("--lr", cfg.pretrain.lr);
  pre->add_option_function<std::string>(
      "--scope",
      [&](const std::string& s) { cfg.pretrain.scope = scope_from_string(s); },
      "negative scope: global|local");
  pre->add_option_function<std::string>(
      "--mode",
      [&](const std::string& s) {
        cfg.pretrain.mode = loss_mode_from_string(s);
      },
      "loss mode: temp_only|ord_only|combined|combined_permutation");
  pre->add_option_function<std::string>(
      "--optimizer",
      [&](const std::string& s) {
        if (s != "adam" && s != "sgd") throw CLI::ValidationError("--optimizer", "adam|sgd");
        cfg.pretrain.optimizer = s == "adam" ? OptKind::Adam : OptKind::Sgd;
      },
      "adam|sgd");
  pre->add_option("--temperature", cfg.temperature);
  pre->add_option("--enc-hidden", cfg.dims.enc_hidden);
  pre->add_option("--d-f", cfg.dims.d_f);
  pre->add_option("--d-z", cfg.dims.d_z);

  auto* eval = app.add_subcommand("evaluate",
                                  "downstream protocols on labeled splits");
  add_common(eval);
  eval->add_option("--data", data_dir, "directory containing dataset.jsonl");
  eval->add_option("--checkpoint", checkpoint_path,
                   "encoder checkpoint (default <out>/checkpoint.bin)");
  eval->add_flag("--with-scratch-baseline", with_scratch,
                 "also evaluate an untrained encoder");
  eval->add_option("--probe-steps", cfg.eval.probe.steps);
  eval->add_option("--probe-lr", cfg.eval.probe.lr);
  eval->add_option("--finetune-lr", cfg.eval.probe.finetune_lr);
  eval->add_option("--horizon", cfg.eval.horizon, "anticipation horizon (s)");

  auto* abl = app.add_subcommand("ablate",
                                 "pretrain + evaluate over a scope x loss "
                                 "grid");
  add_common(abl);
  abl->add_option("--data", data_dir, "directory containing dataset.jsonl");
  abl->add_option("--scopes", scope_names, "subset of: global local");
  abl->add_option("--modes", mode_names,
                  "subset of: temp_only ord_only combined "
                  "combined_permutation");
  abl->add_option("--seeds", seeds, "pretraining seeds (default 1 2 3)");
  abl->add_option("--steps", cfg.pretrain.steps);
  abl->add_option("--batch-videos", cfg.pretrain.batch_videos);
  abl->add_option("--lr", cfg.pretrain.lr);
  abl->add_option("--probe-steps", cfg.eval.probe.steps);

  auto* rep = app.add_subcommand("report",
                                 "tables and charts from run logs");
  add_common(rep);
  std::string run_dir;
  rep->add_option("--run", run_dir,
                  "run directory with logs (default --out)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (data_dir.empty()) data_dir = cfg.out_dir;
    if (gen->parsed()) {
      if (total_videos > 0) {
        cfg.counts.pretrain = total_videos * 6 / 10;
        cfg.counts.labeled_train = total_videos * 2 / 10;
        cfg.counts.labeled_test =
            total_videos - cfg.counts.pretrain - cfg.counts.labeled_train;
      }
      return cmd_generate_data(cfg);
    }
    if (pre->parsed()) return cmd_pretrain(cfg, data_dir);
    if (eval->parsed()) {
      if (checkpoint_path.empty()) {
        checkpoint_path =
            (fs::path(cfg.out_dir) / "checkpoint.bin").string();
      }
      return cmd_evaluate(cfg, data_dir, checkpoint_path, with_scratch);
    }
    if (abl->parsed()) {
      return cmd_ablate(cfg, data_dir, scope_names, mode_names, seeds);
    }
    if (rep->parsed()) {
      if (run_dir.empty()) run_dir = cfg.out_dir;
      write_report(run_dir, cfg.out_dir);
      std::cout << "report written to " << cfg.out_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ualab
