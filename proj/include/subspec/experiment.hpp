#ifndef SUBSPEC_EXPERIMENT_HPP_
#define SUBSPEC_EXPERIMENT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "subspec/features.hpp"
#include "subspec/model.hpp"

namespace subspec {

// Synthetic band-imbalanced classification task. Each clip is noise whose
// spectrum is shaped by its class template over equal-mel-width bands, then
// multiplied by static per-band amplitude gains; the gains are the scale
// imbalance the normalization comparison probes.
struct ExperimentSpec {
  std::size_t n_classes = 4;
  std::vector<std::vector<double>> templates;  // (n_classes, n_bands) relative energy
  std::vector<double> gains;                   // (n_bands) amplitude gains
  double clip_seconds = 0.256;
  double noise_level = 0.02;
  std::size_t n_train = 256;
  std::size_t n_test = 128;
  std::uint64_t seed = 42;
  FeatureConfig features;
  bool log_features = false;  // linear mel power keeps the imbalance multiplicative

  std::size_t n_bands() const { return gains.size(); }
  void validate() const;
  static ExperimentSpec defaults();
};

ExperimentSpec spec_from_json_file(const std::string& path);
ExperimentSpec spec_from_json_text(const std::string& text);
std::string spec_to_json_text(const ExperimentSpec& spec);

struct Dataset {
  std::vector<Tensor4> x;  // each (1, 1, F, T)
  std::vector<int> y;

  std::size_t size() const { return x.size(); }
};

struct DatasetPair {
  Dataset train, test;
};

// Deterministic in spec.seed; train/test disjoint by construction.
DatasetPair generate_dataset(const ExperimentSpec& spec);

void write_dataset(const std::string& dir, const DatasetPair& data, const ExperimentSpec& spec);
DatasetPair load_dataset(const std::string& dir);

struct TrainHyper {
  std::size_t epochs = 30;
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct EpochRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_acc = 0.0;
};

struct RunReport {
  std::vector<EpochRow> epochs;
  double final_test_acc = 0.0;
  std::size_t param_count = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Model model;
  RunReport report;
};

TrainResult train_model(const ModelSpec& spec, const DatasetPair& data, const TrainHyper& hyper);

double evaluate_accuracy(const Model& model, const Dataset& data);

struct SweepRow {
  std::string norm;
  std::size_t s = 1;
  std::string affine;
  std::size_t n_seeds = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  std::size_t param_count = 0;
  double mean_wall_seconds = 0.0;
  std::vector<double> per_seed_acc;
};

// One row per norm variant: BN, SSN over (s, affine) and BN-Sub over s,
// each averaged over the same seed list. max_workers > 1 runs independent
// trainings in parallel.
std::vector<SweepRow> ablation_sweep(const ModelSpec& base, const DatasetPair& data,
                                     const std::vector<std::size_t>& s_values,
                                     const std::vector<AffineType>& affine_types,
                                     const std::vector<std::uint64_t>& seeds,
                                     const TrainHyper& hyper, int max_workers = 1);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

// Per-frequency-bin L1 scale of the conv output of one block, measured in
// inference mode over a dataset. `band_mean` averages `raw` within each of
// s bands; `standardized` is the band-mean curve shifted/scaled to zero
// mean and unit variance across bins. `inter_band_std` is the between-band
// share of the raw profile's dispersion: the standard deviation across
// bands of the band means after the per-bin profile is standardized, so 0
// means all structure is within bands and 1 means all of it is between
// bands.
struct ActivationProfile {
  std::size_t s = 1;
  std::vector<double> raw;
  std::vector<double> band_mean;
  std::vector<double> standardized;
  double inter_band_std = 0.0;
};

ActivationProfile activation_profile(const Model& model, const Dataset& data,
                                     std::size_t layer_index, std::size_t s_for_averaging);

std::string profile_to_csv(const ActivationProfile& profile);

}  // namespace subspec

#endif  // SUBSPEC_EXPERIMENT_HPP_
