#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "epy/ebayes.hpp"
#include "epy/urn.hpp"

namespace epy {

struct SpeciesDataset {
  std::vector<CountRecord> records;  // unique (family, species) pairs, in first-appearance order
  std::vector<std::string> warnings;

  std::int64_t n() const;
  std::size_t k_x() const;
  std::size_t k_y() const { return records.size(); }
  NestedPartitionState state() const;
};

// Header `family,species,count`; LF or CRLF; fields may be double-quoted.
// Repeated (family, species) rows are summed with a warning.
SpeciesDataset parse_csv(std::istream& in);
SpeciesDataset load_csv(const std::string& path);

SpeciesDataset dataset_from_sequence(std::span<const Observation> sequence);

struct TrainTestSplit {
  NestedPartitionState train;
  std::vector<Observation> test;
};

// Expands the records to individual observations, applies a seeded shuffle and
// splits it into the first n_train (aggregated) and the remaining sequence.
TrainTestSplit split_train_test(const SpeciesDataset& data, std::int64_t n_train, std::uint64_t seed);

// `points` log-spaced integers in [1, m_max], deduplicated, always ending at m_max.
std::vector<std::int64_t> default_grid(std::int64_t m_max, int points = 20);

// Parameters used for prediction. alpha == 0 marks the pooled DP model, whose
// families are merged into one before simulating.
struct FittedModel {
  ModelVariant variant = ModelVariant::EPY;
  double alpha = 1.0;
  std::map<Label, PyParams> families;
  PyParams default_params;
};

FittedModel fitted_model(const FitResult& fit);

// The state the prediction runs on: pooled for DP, otherwise the input state
// with each family's fitted parameters (default_params for unknown labels).
NestedPartitionState prediction_state(const NestedPartitionState& state, const FittedModel& model);

struct RunConfig {
  ModelVariant variant = ModelVariant::EPY;
  PriorDensities prior;
  std::vector<std::int64_t> grid;  // empty: default_grid over the prediction horizon
  int reps = 1000;
  std::vector<double> quantiles{0.05, 0.95};
  std::uint64_t seed = 1;
  std::int64_t n_train = 0;  // split-eval only; 0 means half the data
  int threads = 0;           // 0: OpenMP default

  void validate() const;
};

struct PredictionCurve {
  std::vector<std::int64_t> grid;
  std::vector<double> mean_ky;
  std::vector<double> mean_kx;
  std::map<double, std::vector<double>> quantiles_ky;
  int reps = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const PredictionCurve&, const PredictionCurve&) = default;
};

// Monte Carlo curve of new species (and families) in m further draws, one
// replicate per stream (seed, replicate index). Replicates run in parallel and
// are reduced in index order, so the output does not depend on thread count.
PredictionCurve predict_curve(const NestedPartitionState& state, const FittedModel& model, const RunConfig& config);
// Same computation on one thread, without OpenMP.
PredictionCurve predict_curve_serial(const NestedPartitionState& state, const FittedModel& model,
                                     const RunConfig& config);

// Type-7 (linear interpolation) empirical quantile of sorted values.
double quantile_sorted(std::span<const double> sorted, double level);

struct DiscoveryCurve {
  std::vector<std::int64_t> new_species;   // after each prefix length 1..m
  std::vector<std::int64_t> new_families;
};

// For each prefix of the test sequence, species and families absent from training.
// Species are identified by their (family, species) pair.
DiscoveryCurve count_new_in_test(const NestedPartitionState& train, std::span<const Observation> test);

struct ModelComparison {
  ModelVariant variant = ModelVariant::EPY;
  FitResult fit;
  PredictionCurve curve;
  double mae = 0.0;
};

struct ComparisonReport {
  std::vector<std::int64_t> grid;
  std::vector<std::int64_t> actual_ky;
  std::vector<ModelComparison> models;  // DP, EDP, EPY
};

// Fits DP, EDP and EPY on a seeded training split and scores each predicted
// mean curve against the held-out discoveries (mean absolute error over the grid).
ComparisonReport compare_models(const SpeciesDataset& data, const RunConfig& config);

void write_curve_csv(std::ostream& out, const PredictionCurve& curve);
void write_comparison_csv(std::ostream& out, const ComparisonReport& report);

// Shortest round-trip decimal representation.
std::string format_number(double v);

// Synthetic data.
std::vector<Observation> simulate_sequence(const EpyModel& model, std::int64_t n, Stream& stream);
SpeciesDataset simulate_dataset(const EpyModel& model, std::int64_t n, std::uint64_t seed);
// Dish counts of one family after n draws from its Pitman-Yor urn.
std::vector<std::int64_t> simulate_py_counts(const PyParams& params, std::int64_t n, Stream& stream);

}  // namespace epy
