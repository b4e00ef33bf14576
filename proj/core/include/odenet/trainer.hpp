#pragma once

// Synthetic and CSV datasets, SGD with momentum and weight decay, and the
// seeded training loop that produces TrainRun records.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "odenet/archblocks.hpp"
#include "odenet/autodiff.hpp"
#include "odenet/dyncore.hpp"

namespace odenet::train {

enum class Split { train, test };

struct Dataset {
  Matrix features;  // n x p
  std::vector<int> labels;
  std::size_t classes = 0;
  Split split = Split::train;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  /// Throws ContractError on NaN features or labels outside [0, classes).
  void validate() const;
  /// Rows at the given indices, same split tag.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

enum class SyntheticKind { two_moons, circles, spirals, blobs };
SyntheticKind parse_synthetic_kind(std::string_view name);
std::string_view to_string(SyntheticKind kind);

/// Two-dimensional benchmark with additive N(0, noise^2) jitter, shuffled and
/// split 80/20 by `seed`. Requires n >= 32.
std::pair<Dataset, Dataset> make_synthetic(SyntheticKind kind, std::size_t n, double noise, std::uint64_t seed);

/// Per-feature affine map to zero mean and unit variance.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // standard deviation; 1 where a feature is constant

  static Standardizer fit(const Matrix& features);
  Matrix apply(const Matrix& features) const;
};

struct CsvTable {
  Matrix features;  // raw values as parsed
  std::vector<int> labels;
  std::vector<std::string> feature_names;  // empty when the file has no header
  bool had_header = false;
};

/// Parses a rectangular numeric CSV. A first row with any non-numeric cell is
/// treated as a header. `label_column` is a header name, or a 0-based column
/// index when the file has no header (or the name is all digits).
/// Throws ParseError with the offending line number.
CsvTable read_csv_table(const std::string& path, const std::string& label_column);

/// Parsed dataset standardized with its own (training) statistics.
struct LoadedCsv {
  Dataset data;
  Matrix raw_features;
  Standardizer stats;
  std::vector<std::string> feature_names;
};
LoadedCsv load_csv(const std::string& path, const std::string& label_column);

/// Seeded 80/20 split of a CSV file. Both halves are standardized with the
/// train half's statistics.
std::pair<Dataset, Dataset> split_csv(const std::string& path, const std::string& label_column, double test_fraction,
                                      std::uint64_t seed);

// ---- optimization --------------------------------------------------------------

/// v <- momentum v + grad + weight_decay * param (weight decay skipped for
/// parameters registered with decay = false, e.g. k_n); param <- param - lr v.
void sgd_update(ad::ParamStore& params, double lr, double momentum, double weight_decay);

/// Explicit-gradient variant: `grads` keys must be a subset of the store's.
void sgd_update(ad::ParamStore& params, const std::vector<std::pair<std::string, Matrix>>& grads, double lr,
                double momentum, double weight_decay);

struct DropSchedule {
  std::size_t depth = 0;
  double p_l = 1.0;
  std::vector<double> drop;  // drop[l-1] = (l / L)(1 - p_L)

  static DropSchedule linear(std::size_t depth, double p_l);
};

struct LrSchedule {
  double initial = 0.02;
  std::vector<std::size_t> decay_epochs;  // empty: 50% and 75% of the run
  double factor = 0.1;

  double at(std::size_t epoch, std::size_t total_epochs) const;
};

struct TrainConfig {
  arch::NetworkSpec spec;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  LrSchedule lr;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct Metrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct KAudit {
  std::vector<std::size_t> outside;   // 1-based layers with |k| > 1
  std::vector<std::size_t> boundary;  // |k| == 1
  bool all_inside = true;
};

struct TrainRun {
  TrainConfig config;
  std::vector<EpochMetrics> curves;
  Metrics final_train;
  Metrics final_test;
  std::vector<double> k_values;  // lm_resnet only
  KAudit k_audit;
  bool failed = false;
  std::optional<std::size_t> failure_epoch;
  std::string failure_message;
  double wall_clock_seconds = 0.0;  // not part of serialized output
  ad::ParamStore params;
};

/// Deterministic eval-mode loss and accuracy.
Metrics evaluate(const arch::NetworkSpec& spec, ad::ParamStore& params, const Dataset& data);

/// Fraction of rows whose argmax matches the label.
double accuracy_from_logits(const Matrix& logits, const std::vector<int>& labels);

/// Full training loop. Streams: "init" (parameters), "shuffle" (per-epoch
/// order), "policy" (stochastic-depth / shake-shake draws). Throws
/// TrainingError when the loss becomes non-finite.
TrainRun train(const TrainConfig& config, const Dataset& train_data, const Dataset& test_data);

/// Same as train() but records divergence in the run instead of throwing.
TrainRun train_recording_failure(const TrainConfig& config, const Dataset& train_data, const Dataset& test_data);

KAudit audit_k(const std::vector<double>& k_values);

/// Structured text record (JSON) of a run; excludes wall-clock time so that
/// reruns are byte-identical.
std::string serialize_run(const TrainRun& run);

}  // namespace odenet::train
