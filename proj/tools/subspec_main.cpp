// subspec: data generation, training, sweeps, activation analysis, fusion
// verification and gradient checking for sub-band normalization experiments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "subspec/checkpoint.hpp"
#include "subspec/experiment.hpp"
#include "subspec/fusion.hpp"
#include "subspec/gradcheck.hpp"

using nlohmann::json;
using namespace subspec;

namespace {

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Io("cannot write " + path);
  out << text;
}

json report_json(const RunReport& report) {
  json rows = json::array();
  for (const EpochRow& row : report.epochs)
    rows.push_back(json{{"epoch", row.epoch},
                        {"train_loss", row.train_loss},
                        {"test_acc", row.test_acc}});
  return json{{"epochs", rows},
              {"final_test_acc", report.final_test_acc},
              {"param_count", report.param_count},
              {"wall_seconds", report.wall_seconds},
              {"seed", report.seed}};
}

std::string report_csv(const RunReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,train_loss,test_acc\n";
  for (const EpochRow& row : report.epochs)
    out << row.epoch << "," << row.train_loss << "," << row.test_acc << "\n";
  return out.str();
}

json sweep_json(const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const SweepRow& r : rows)
    arr.push_back(json{{"norm", r.norm},
                       {"s", r.s},
                       {"affine", r.affine},
                       {"seeds", r.n_seeds},
                       {"mean_acc", r.mean_acc},
                       {"std_acc", r.std_acc},
                       {"params", r.param_count},
                       {"mean_wall_seconds", r.mean_wall_seconds},
                       {"per_seed_acc", r.per_seed_acc}});
  return arr;
}

int sweep_workers() {
  if (const char* env = std::getenv("SUBSPEC_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

struct CommonOpts {
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "both";
};

void add_format_flag(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--format", opts.format, "Structured output format")
      ->check(CLI::IsMember({"csv", "json", "both"}))
      ->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"Sub-band normalization experiment harness"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for all subcommands");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic band-imbalanced dataset");
  std::string gen_spec_path;
  CommonOpts gen_opts;
  bool gen_seed_set = false;
  gen->add_option("--spec", gen_spec_path, "Experiment spec JSON (defaults when omitted)");
  gen->add_option("--out", gen_opts.out, "Output dataset directory")->required();
  gen->add_option("--seed", gen_opts.seed, "Override the spec's seed")
      ->each([&](const std::string&) { gen_seed_set = true; });

  // train
  auto* train = app.add_subcommand("train", "Train the stand-in CNN on a dataset");
  std::string train_data, train_norm = "ssn", train_affine = "sub";
  std::size_t train_s = 2, train_epochs = 30, train_batch = 32;
  double train_lr = 0.05;
  CommonOpts train_opts;
  train->add_option("--data", train_data, "Dataset directory from gen-data")->required();
  train->add_option("--norm", train_norm, "Normalization layer kind")
      ->check(CLI::IsMember({"bn", "ssn", "bnsub"}))
      ->capture_default_str();
  train->add_option("--s", train_s, "Number of sub-bands")->capture_default_str();
  train->add_option("--affine", train_affine, "Affine type for SSN")
      ->check(CLI::IsMember({"all", "sub"}))
      ->capture_default_str();
  train->add_option("--epochs", train_epochs, "Training epochs")->capture_default_str();
  train->add_option("--lr", train_lr, "SGD learning rate")->capture_default_str();
  train->add_option("--batch", train_batch, "Mini-batch size")->capture_default_str();
  train->add_option("--seed", train_opts.seed, "Training seed")->capture_default_str();
  train->add_option("--out", train_opts.out, "Checkpoint/report directory")->required();
  add_format_flag(train, train_opts);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Ablation sweep over normalization variants");
  std::string sweep_data, sweep_grid;
  std::size_t sweep_seeds = 5, sweep_epochs = 30, sweep_batch = 32;
  double sweep_lr = 0.05;
  CommonOpts sweep_opts;
  sweep->add_option("--data", sweep_data, "Dataset directory")->required();
  sweep->add_option("--grid", sweep_grid, "Grid JSON: {\"s_values\":[...],\"affine_types\":[...]}");
  sweep->add_option("--seeds", sweep_seeds, "Number of paired seeds")->capture_default_str();
  sweep->add_option("--seed", sweep_opts.seed, "Base seed")->capture_default_str();
  sweep->add_option("--epochs", sweep_epochs, "Training epochs per run")->capture_default_str();
  sweep->add_option("--lr", sweep_lr, "SGD learning rate")->capture_default_str();
  sweep->add_option("--batch", sweep_batch, "Mini-batch size")->capture_default_str();
  sweep->add_option("--out", sweep_opts.out, "Output directory")->required();
  add_format_flag(sweep, sweep_opts);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Per-frequency activation-scale profile");
  std::string an_ckpt, an_data;
  std::size_t an_layer = 1, an_bands = 4;
  CommonOpts an_opts;
  analyze->add_option("--checkpoint", an_ckpt, "Checkpoint directory")->required();
  analyze->add_option("--data", an_data, "Dataset directory")->required();
  analyze->add_option("--layer", an_layer, "Block whose conv output is measured")
      ->capture_default_str();
  analyze->add_option("--bands", an_bands, "Band count for averaging")->capture_default_str();
  analyze->add_option("--out", an_opts.out, "Output directory")->required();
  add_format_flag(analyze, an_opts);

  // fuse-check
  auto* fusecheck = app.add_subcommand("fuse-check", "Fused vs unfused conv equivalence report");
  std::string fc_ckpt;
  bool fc_fold_stats = false;
  std::size_t fc_trials = 8;
  CommonOpts fc_opts;
  fusecheck->add_option("--checkpoint", fc_ckpt, "Checkpoint directory")->required();
  fusecheck->add_flag("--fold-stats", fc_fold_stats,
                      "Also fold running statistics into the merge");
  fusecheck->add_option("--trials", fc_trials, "Random probes per layer pair")
      ->capture_default_str();
  fusecheck->add_option("--seed", fc_opts.seed, "Probe seed")->capture_default_str();
  fusecheck->add_option("--out", fc_opts.out, "Write the JSON report here instead of stdout");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the backward");
  std::string gc_norm = "ssn", gc_affine = "all";
  std::size_t gc_s = 1, gc_trials = 20;
  CommonOpts gc_opts;
  gradcheck->add_option("--norm", gc_norm, "Layer kind to check")
      ->check(CLI::IsMember({"bn", "ssn", "bnsub"}))
      ->capture_default_str();
  gradcheck->add_option("--s", gc_s, "Number of sub-bands")->capture_default_str();
  gradcheck->add_option("--affine", gc_affine, "Affine type")
      ->check(CLI::IsMember({"all", "sub"}))
      ->capture_default_str();
  gradcheck->add_option("--trials", gc_trials, "Random instances")->capture_default_str();
  gradcheck->add_option("--seed", gc_opts.seed, "Instance seed")->capture_default_str();

  // featurize
  auto* feat = app.add_subcommand("featurize", "Extract features from a WAV file into TNS4");
  std::string ft_wav, ft_profile = "kws";
  CommonOpts ft_opts;
  feat->add_option("--wav", ft_wav, "Mono 16-bit PCM WAV input")->required();
  feat->add_option("--profile", ft_profile, "Feature profile")
      ->check(CLI::IsMember({"asc", "kws"}))
      ->capture_default_str();
  feat->add_option("--out", ft_opts.out, "Output TNS4 path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --help-all
    std::cerr << json{{"error", {{"type", "CliParse"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }

  if (gen->parsed()) {
    ExperimentSpec spec =
        gen_spec_path.empty() ? ExperimentSpec::defaults() : spec_from_json_file(gen_spec_path);
    if (gen_seed_set) spec.seed = gen_opts.seed;
    const DatasetPair data = generate_dataset(spec);
    write_dataset(gen_opts.out, data, spec);
    std::cout << json{{"out", gen_opts.out},
                      {"n_train", data.train.size()},
                      {"n_test", data.test.size()},
                      {"f", data.train.x[0].f},
                      {"t", data.train.x[0].t}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (train->parsed()) {
    const DatasetPair data = load_dataset(train_data);
    ModelSpec spec;
    spec.norm_kind = norm_kind_from_string(train_norm);
    spec.s = train_s;
    spec.affine = affine_from_string(train_affine);
    TrainHyper hyper;
    hyper.epochs = train_epochs;
    hyper.lr = train_lr;
    hyper.batch_size = train_batch;
    hyper.seed = train_opts.seed;
    const TrainResult result = train_model(spec, data, hyper);
    fs::create_directories(train_opts.out);
    save_checkpoint(train_opts.out, result.model);
    if (train_opts.format != "csv")
      write_text(train_opts.out + "/report.json", report_json(result.report).dump(2) + "\n");
    if (train_opts.format != "json")
      write_text(train_opts.out + "/report.csv", report_csv(result.report));
    std::cout << report_json(result.report).dump(2) << "\n";
    return 0;
  }

  if (sweep->parsed()) {
    const DatasetPair data = load_dataset(sweep_data);
    std::vector<std::size_t> s_values{1, 2, 4};
    std::vector<AffineType> affines{AffineType::All, AffineType::Sub};
    if (!sweep_grid.empty()) {
      std::ifstream in(sweep_grid);
      if (!in) throw Io("cannot open grid file: " + sweep_grid);
      json grid;
      try {
        grid = json::parse(in);
        if (grid.contains("s_values"))
          s_values = grid.at("s_values").get<std::vector<std::size_t>>();
        if (grid.contains("affine_types")) {
          affines.clear();
          for (const auto& name : grid.at("affine_types"))
            affines.push_back(affine_from_string(name.get<std::string>()));
        }
      } catch (const json::exception& e) {
        throw ManifestParse(std::string("grid file: ") + e.what());
      }
    }
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < sweep_seeds; ++i) seeds.push_back(sweep_opts.seed + i);
    ModelSpec base;
    TrainHyper hyper;
    hyper.epochs = sweep_epochs;
    hyper.lr = sweep_lr;
    hyper.batch_size = sweep_batch;
    const std::vector<SweepRow> rows =
        ablation_sweep(base, data, s_values, affines, seeds, hyper, sweep_workers());
    fs::create_directories(sweep_opts.out);
    if (sweep_opts.format != "csv")
      write_text(sweep_opts.out + "/sweep.json", sweep_json(rows).dump(2) + "\n");
    if (sweep_opts.format != "json") write_text(sweep_opts.out + "/sweep.csv", sweep_to_csv(rows));
    std::cout << sweep_json(rows).dump(2) << "\n";
    return 0;
  }

  if (analyze->parsed()) {
    const Model model = load_checkpoint(an_ckpt);
    const DatasetPair data = load_dataset(an_data);
    const ActivationProfile profile = activation_profile(model, data.test, an_layer, an_bands);
    fs::create_directories(an_opts.out);
    if (an_opts.format != "json")
      write_text(an_opts.out + "/profile.csv", profile_to_csv(profile));
    const json summary{{"layer", an_layer},
                       {"bands", an_bands},
                       {"inter_band_std", profile.inter_band_std}};
    if (an_opts.format != "csv")
      write_text(an_opts.out + "/profile.json",
                 json{{"summary", summary},
                      {"raw", profile.raw},
                      {"band_mean", profile.band_mean},
                      {"standardized", profile.standardized}}
                         .dump(2) +
                     "\n");
    std::cout << summary.dump(2) << "\n";
    return 0;
  }

  if (fusecheck->parsed()) {
    FusionReportOptions opts;
    opts.fold_stats = fc_fold_stats;
    opts.seed = fc_opts.seed;
    opts.trials = fc_trials;
    const std::vector<FusionPairReport> reports = fusion_report(fc_ckpt, opts);
    json arr = json::array();
    double worst_interior = 0.0;
    for (const FusionPairReport& r : reports) {
      worst_interior = std::max(worst_interior, r.interior_max_abs_diff);
      arr.push_back(json{{"norm_layer", r.norm_layer},
                         {"conv_layer", r.conv_layer},
                         {"s", r.s},
                         {"k_f", r.k_f},
                         {"trials", r.trials},
                         {"interior_max_abs_diff", r.interior_max_abs_diff},
                         {"boundary_max_abs_diff", r.boundary_max_abs_diff}});
    }
    const json out{{"fold_stats", fc_fold_stats},
                   {"pairs", arr},
                   {"worst_interior_max_abs_diff", worst_interior}};
    if (!fc_opts.out.empty())
      write_text(fc_opts.out, out.dump(2) + "\n");
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  if (gradcheck->parsed()) {
    const GradCheckResult result =
        gradcheck_norm(norm_kind_from_string(gc_norm), gc_s, affine_from_string(gc_affine),
                       gc_trials, gc_opts.seed);
    std::cout << json{{"norm", gc_norm},
                      {"s", gc_s},
                      {"affine", gc_affine},
                      {"trials", result.trials},
                      {"max_rel_err", result.max_rel_err},
                      {"pass", result.pass}}
                     .dump(2)
              << "\n";
    if (!result.pass) {
      std::cerr << json{{"error",
                         {{"type", "GradCheckFailed"},
                          {"message", "max relative error exceeds 1e-6"}}}}
                       .dump()
                << "\n";
      return 1;
    }
    return 0;
  }

  if (feat->parsed()) {
    const FeatureConfig cfg = FeatureConfig::by_name(ft_profile);
    const AudioClip clip = load_wav(ft_wav);
    const Tensor4 out = cfg.n_mfcc > 0 ? mfcc(clip, cfg) : log_mel(clip, cfg);
    save_tensor(ft_opts.out, out);
    std::cout << json{{"out", ft_opts.out}, {"f", out.f}, {"t", out.t}}.dump(2) << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"type", e.kind()}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"type", "Internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
}
