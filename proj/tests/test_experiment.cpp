#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "subspec/experiment.hpp"
#include "test_util.hpp"

using namespace subspec;

namespace {

// Cut-down spec for fast unit runs.
ExperimentSpec small_spec() {
  ExperimentSpec spec = ExperimentSpec::defaults();
  spec.n_train = 48;
  spec.n_test = 32;
  spec.features.n_mels = 16;
  return spec;
}

double band_energy(const Dataset& d, std::size_t band, std::size_t n_bands) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const Tensor4& x : d.x) {
    const std::size_t fb = x.f / n_bands;
    for (std::size_t jf = band * fb; jf < (band + 1) * fb; ++jf)
      for (std::size_t jt = 0; jt < x.t; ++jt) {
        sum += x.at(0, 0, jf, jt);
        ++count;
      }
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TEST_CASE("spec validation") {
  ExperimentSpec spec = ExperimentSpec::defaults();
  CHECK_NOTHROW(spec.validate());
  spec.gains = {1.0, -1.0};
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
  spec = ExperimentSpec::defaults();
  spec.templates.pop_back();
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
  spec = ExperimentSpec::defaults();
  spec.clip_seconds = 0.001;  // shorter than the analysis window
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
}

TEST_CASE("spec JSON round trip and defaults") {
  const ExperimentSpec spec = ExperimentSpec::defaults();
  const ExperimentSpec again = spec_from_json_text(spec_to_json_text(spec));
  CHECK(again.n_classes == spec.n_classes);
  CHECK(again.templates == spec.templates);
  CHECK(again.gains == spec.gains);
  CHECK(again.seed == spec.seed);
  CHECK(again.features.n_mels == spec.features.n_mels);

  // partial JSON falls back to defaults
  const ExperimentSpec partial = spec_from_json_text("{\"n_train\": 12}");
  CHECK(partial.n_train == 12);
  CHECK(partial.n_classes == spec.n_classes);
  CHECK_THROWS_AS(spec_from_json_text("{oops"), InvalidSpec);
}

TEST_CASE("dataset generation is deterministic and splits are sized") {
  const ExperimentSpec spec = small_spec();
  const DatasetPair a = generate_dataset(spec);
  const DatasetPair b = generate_dataset(spec);
  CHECK(a.train.size() == spec.n_train);
  CHECK(a.test.size() == spec.n_test);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(testutil::bit_equal(a.train.x[i], b.train.x[i]));
    CHECK(a.train.y[i] == b.train.y[i]);
  }
  // feature geometry: 0.256 s at 16 kHz with 30/10 ms framing
  CHECK(a.train.x[0].f == spec.features.n_mels);
  CHECK(a.train.x[0].t == (4096 - 480) / 160 + 1);
}

TEST_CASE("unit gains: per-band dataset energies follow the templates") {
  ExperimentSpec spec = small_spec();
  spec.gains = {1.0, 1.0, 1.0, 1.0};
  // one flat class so band energies mirror the template exactly
  spec.n_classes = 2;
  spec.templates = {{2.0, 2.0, 2.0, 2.0}, {2.0, 2.0, 2.0, 2.0}};
  const DatasetPair flat = generate_dataset(spec);

  spec.templates = {{8.0, 2.0, 2.0, 2.0}, {8.0, 2.0, 2.0, 2.0}};
  const DatasetPair peaked = generate_dataset(spec);

  // band 0 energy rises by ~4x relative to the flat reference; others stay
  const double r0 = band_energy(peaked.train, 0, 4) / band_energy(flat.train, 0, 4);
  const double r2 = band_energy(peaked.train, 2, 4) / band_energy(flat.train, 2, 4);
  // the global grand-mean rescale shifts both ratios by the same factor
  CHECK(r0 / r2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("squared-gain energy ratio between paired datasets") {
  ExperimentSpec spec = small_spec();
  spec.n_classes = 2;
  spec.templates = {{1.0, 1.0}, {1.0, 1.0}};
  spec.gains = {4.0, 1.0};
  const DatasetPair gained = generate_dataset(spec);
  spec.gains = {1.0, 1.0};
  const DatasetPair unit = generate_dataset(spec);

  const double low = band_energy(gained.train, 0, 2) / band_energy(unit.train, 0, 2);
  const double high = band_energy(gained.train, 1, 2) / band_energy(unit.train, 1, 2);
  CHECK(low / high == doctest::Approx(16.0).epsilon(1e-6));
}

TEST_CASE("dataset write/load round trip") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "subspec_dataset").string();
  fs::remove_all(dir);
  ExperimentSpec spec = small_spec();
  spec.n_train = 8;
  spec.n_test = 4;
  const DatasetPair data = generate_dataset(spec);
  write_dataset(dir, data, spec);
  const DatasetPair loaded = load_dataset(dir);
  REQUIRE(loaded.train.size() == 8);
  REQUIRE(loaded.test.size() == 4);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(testutil::bit_equal(loaded.train.x[i], data.train.x[i]));
    CHECK(loaded.train.y[i] == data.train.y[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("train_model: zero epochs reports untrained accuracy and no rows") {
  const ExperimentSpec spec = small_spec();
  const DatasetPair data = generate_dataset(spec);
  ModelSpec model;
  model.norm_kind = NormKind::SSN;
  model.s = 2;
  model.affine = AffineType::Sub;
  model.widths = {4, 8};
  TrainHyper hyper;
  hyper.epochs = 0;
  hyper.seed = 5;
  const TrainResult r = train_model(model, data, hyper);
  CHECK(r.report.epochs.empty());
  CHECK(r.report.final_test_acc == evaluate_accuracy(r.model, data.test));
  CHECK(r.report.param_count == r.model.param_total());
}

TEST_CASE("identical templates give chance-level accuracy") {
  ExperimentSpec spec = small_spec();
  spec.templates = {{2.0, 1.0, 1.0, 2.0},
                    {2.0, 1.0, 1.0, 2.0},
                    {2.0, 1.0, 1.0, 2.0},
                    {2.0, 1.0, 1.0, 2.0}};
  spec.n_train = 64;
  spec.n_test = 64;
  const DatasetPair data = generate_dataset(spec);
  ModelSpec model;
  model.norm_kind = NormKind::SSN;
  model.s = 4;
  model.affine = AffineType::Sub;
  model.widths = {4, 8};
  TrainHyper hyper;
  hyper.epochs = 3;
  hyper.seed = 9;
  const TrainResult r = train_model(model, data, hyper);
  CHECK(r.report.final_test_acc < 0.45);  // chance is 0.25
}

TEST_CASE("overfit sanity: tiny training set reaches accuracy 1.0") {
  ExperimentSpec spec = small_spec();
  spec.n_train = 16;
  spec.n_test = 16;
  const DatasetPair data = generate_dataset(spec);
  DatasetPair overfit;
  overfit.train = data.train;
  overfit.test = data.train;  // evaluate on the training clips
  ModelSpec model;
  model.norm_kind = NormKind::SSN;
  model.s = 4;
  model.affine = AffineType::Sub;
  model.widths = {4, 8};
  TrainHyper hyper;
  hyper.epochs = 200;
  hyper.batch_size = 16;
  hyper.lr = 0.05;
  hyper.seed = 11;
  const TrainResult r = train_model(model, overfit, hyper);
  double train_acc = evaluate_accuracy(r.model, overfit.train);
  CHECK(train_acc == 1.0);
}

TEST_CASE("BN and SSN(S=1, All) trajectories coincide for identical seeds") {
  const ExperimentSpec spec = small_spec();
  const DatasetPair data = generate_dataset(spec);
  ModelSpec bn;
  bn.norm_kind = NormKind::BN;
  bn.widths = {4, 8};
  ModelSpec ssn1;
  ssn1.norm_kind = NormKind::SSN;
  ssn1.s = 1;
  ssn1.affine = AffineType::All;
  ssn1.widths = {4, 8};
  TrainHyper hyper;
  hyper.epochs = 3;
  hyper.seed = 13;
  const TrainResult a = train_model(bn, data, hyper);
  const TrainResult b = train_model(ssn1, data, hyper);
  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
    CHECK(std::fabs(a.report.epochs[e].train_loss - b.report.epochs[e].train_loss) < 1e-9);
    CHECK(a.report.epochs[e].test_acc == b.report.epochs[e].test_acc);
  }
}

TEST_CASE("training loss decreases over the first epochs for every variant") {
  const ExperimentSpec spec = small_spec();
  const DatasetPair data = generate_dataset(spec);
  for (NormKind kind : {NormKind::BN, NormKind::SSN, NormKind::BNSub}) {
    ModelSpec model;
    model.norm_kind = kind;
    model.s = 4;
    model.affine = AffineType::Sub;
    model.widths = {4, 8};
    TrainHyper hyper;
    hyper.epochs = 5;
    hyper.seed = 17;
    const TrainResult r = train_model(model, data, hyper);
    CHECK(r.report.epochs.back().train_loss < r.report.epochs.front().train_loss);
  }
}

TEST_CASE("diverged loss raises") {
  const ExperimentSpec spec = small_spec();
  const DatasetPair data = generate_dataset(spec);
  ModelSpec model;
  model.norm_kind = NormKind::SSN;
  model.s = 2;
  model.widths = {4};
  TrainHyper hyper;
  hyper.epochs = 40;
  hyper.lr = 1e6;  // guaranteed blow-up
  hyper.seed = 19;
  CHECK_THROWS_AS(train_model(model, data, hyper), DivergedLoss);
}

TEST_CASE("sweep rows cover the grid and s=1 rows agree") {
  const ExperimentSpec spec = small_spec();
  const DatasetPair data = generate_dataset(spec);
  ModelSpec base;
  base.widths = {4, 8};
  TrainHyper hyper;
  hyper.epochs = 2;
  const std::vector<std::size_t> s_values{1, 2};
  const std::vector<AffineType> affines{AffineType::All, AffineType::Sub};
  const std::vector<std::uint64_t> seeds{21, 22};
  const std::vector<SweepRow> rows =
      ablation_sweep(base, data, s_values, affines, seeds, hyper, 2);

  // 1 BN row + 4 SSN rows + 2 BN-Sub rows
  REQUIRE(rows.size() == 7);
  CHECK(rows[0].norm == "bn");
  for (const SweepRow& row : rows) CHECK(row.n_seeds == 2);

  // BN, SSN(1,All), SSN(1,Sub) run the same algorithm with the same seeds
  double bn_mean = rows[0].mean_acc;
  for (const SweepRow& row : rows)
    if (row.norm == "ssn" && row.s == 1) CHECK(row.mean_acc == bn_mean);

  const std::string csv = sweep_to_csv(rows);
  CHECK(csv.find("norm,s,affine,seeds,mean_acc") == 0);
  CHECK(csv.find("bnsub") != std::string::npos);
}

TEST_CASE("activation profile: uniform data gives a near-flat profile") {
  ExperimentSpec spec = small_spec();
  spec.gains = {1.0, 1.0, 1.0, 1.0};
  spec.templates = {{2.0, 2.0, 2.0, 2.0},
                    {2.0, 2.0, 2.0, 2.0},
                    {2.0, 2.0, 2.0, 2.0},
                    {2.0, 2.0, 2.0, 2.0}};
  const DatasetPair data = generate_dataset(spec);
  ModelSpec model_spec;
  model_spec.norm_kind = NormKind::BN;
  model_spec.widths = {4, 8};
  Rng rng(23);
  const Model model =
      init_model(model_spec, 1, data.train.x[0].f, data.train.x[0].t, rng);
  const ActivationProfile profile = activation_profile(model, data.test, 1, 4);
  CHECK(profile.raw.size() == data.train.x[0].f);
  CHECK(profile.inter_band_std < 0.7);  // no band structure to expose

  // standardized curve has zero mean and unit variance across bins
  double mu = 0.0, var = 0.0;
  for (double v : profile.standardized) mu += v;
  mu /= static_cast<double>(profile.standardized.size());
  for (double v : profile.standardized) var += (v - mu) * (v - mu);
  var /= static_cast<double>(profile.standardized.size());
  CHECK(std::fabs(mu) < 1e-9);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(activation_profile(model, data.test, 9, 4), IndexOutOfRange);
  const std::string csv = profile_to_csv(profile);
  CHECK(csv.find("bin,raw_l1,band_mean,standardized") == 0);
}

TEST_CASE("activation profile: BN keeps the band imbalance, SSN removes it") {
  const ExperimentSpec spec = small_spec();
  const DatasetPair data = generate_dataset(spec);
  TrainHyper hyper;
  hyper.epochs = 2;
  hyper.seed = 29;

  ModelSpec bn;
  bn.norm_kind = NormKind::BN;
  bn.widths = {4, 8};
  ModelSpec ssn;
  ssn.norm_kind = NormKind::SSN;
  ssn.s = 4;
  ssn.affine = AffineType::All;
  ssn.widths = {4, 8};

  const TrainResult bn_run = train_model(bn, data, hyper);
  const TrainResult ssn_run = train_model(ssn, data, hyper);
  const ActivationProfile bn_profile = activation_profile(bn_run.model, data.test, 1, 4);
  const ActivationProfile ssn_profile = activation_profile(ssn_run.model, data.test, 1, 4);
  CHECK(ssn_profile.inter_band_std < bn_profile.inter_band_std);
}
