#include "odenet/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "odenet/errors.hpp"

namespace odenet::train {

// ---- datasets -------------------------------------------------------------------

void Dataset::validate() const {
  if (features.rows() != labels.size()) throw ContractError("Dataset: feature rows != label count");
  if (!all_finite(features.values())) throw ContractError("Dataset: non-finite features");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw ContractError("Dataset: label out of range");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.classes = classes;
  out.split = split;
  out.features = Matrix(indices.size(), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = features.row_view(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row_view(r).begin());
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "two_moons") return SyntheticKind::two_moons;
  if (name == "circles") return SyntheticKind::circles;
  if (name == "spirals") return SyntheticKind::spirals;
  if (name == "blobs") return SyntheticKind::blobs;
  throw ConfigError("unknown synthetic dataset '" + std::string(name) +
                    "' (valid: two_moons, circles, spirals, blobs)");
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::two_moons: return "two_moons";
    case SyntheticKind::circles: return "circles";
    case SyntheticKind::spirals: return "spirals";
    case SyntheticKind::blobs: return "blobs";
  }
  return "unknown";
}

std::pair<Dataset, Dataset> make_synthetic(SyntheticKind kind, std::size_t n, double noise, std::uint64_t seed) {
  if (n < 32) throw ContractError("make_synthetic: n must be >= 32");
  if (!(noise >= 0.0)) throw ContractError("make_synthetic: noise must be >= 0");
  const double pi = std::numbers::pi;
  Rng rng = Rng(seed).stream(std::string("data:") + std::string(to_string(kind)));
  const std::size_t classes = kind == SyntheticKind::blobs ? 3 : 2;

  Dataset all;
  all.classes = classes;
  all.features = Matrix(n, 2);
  all.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    double x = 0.0, y = 0.0;
    switch (kind) {
      case SyntheticKind::two_moons: {
        const double theta = rng.uniform(0.0, pi);
        if (c == 0) {
          x = std::cos(theta);
          y = std::sin(theta);
        } else {
          x = 1.0 - std::cos(theta);
          y = 0.5 - std::sin(theta);
        }
        break;
      }
      case SyntheticKind::circles: {
        const double theta = rng.uniform(0.0, 2.0 * pi);
        const double r = c == 0 ? 1.0 : 0.5;
        x = r * std::cos(theta);
        y = r * std::sin(theta);
        break;
      }
      case SyntheticKind::spirals: {
        // 1.5 turns per arm, radius growing to 2; arms offset by half a turn.
        const double t = rng.uniform(0.05, 1.0);
        const double theta = 3.0 * pi * t + (c == 0 ? 0.0 : pi);
        x = 2.0 * t * std::cos(theta);
        y = 2.0 * t * std::sin(theta);
        break;
      }
      case SyntheticKind::blobs: {
        const double angle = pi / 2.0 + 2.0 * pi * static_cast<double>(c) / 3.0;
        x = 2.0 * std::cos(angle);
        y = 2.0 * std::sin(angle);
        break;
      }
    }
    all.features(i, 0) = x + (noise > 0.0 ? rng.normal(0.0, noise) : 0.0);
    all.features(i, 1) = y + (noise > 0.0 ? rng.normal(0.0, noise) : 0.0);
    all.labels[i] = c;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = Rng(seed).stream("split");
  split_rng.shuffle(order);
  const std::size_t n_train = (n * 4) / 5;
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  Dataset train = all.subset(train_idx);
  Dataset test = all.subset(test_idx);
  train.split = Split::train;
  test.split = Split::test;
  return {std::move(train), std::move(test)};
}

Standardizer Standardizer::fit(const Matrix& features) {
  Standardizer s;
  const std::size_t n = features.rows(), p = features.cols();
  s.mean.assign(p, 0.0);
  s.scale.assign(p, 1.0);
  if (n == 0) return s;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) s.mean[c] += features(r, c);
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t c = 0; c < p; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) acc += (features(r, c) - s.mean[c]) * (features(r, c) - s.mean[c]);
    const double sd = std::sqrt(acc / static_cast<double>(n));
    s.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) throw DimensionError("Standardizer: feature count mismatch");
  Matrix out = features;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean[c]) / scale[c];
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_number(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

CsvTable read_csv_table(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open CSV file: " + path, 0);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> row_lines;
  std::vector<std::string> header;
  std::size_t width = 0;
  std::size_t label_idx = 0;
  bool label_resolved = false;
  std::string line;
  std::size_t line_no = 0;
  CsvTable table;

  auto resolve_label = [&](std::size_t cols) {
    if (table.had_header && !all_digits(label_column)) {
      const auto it = std::find(header.begin(), header.end(), label_column);
      if (it == header.end()) throw ParseError("label column '" + label_column + "' not found in header", 1);
      label_idx = static_cast<std::size_t>(it - header.begin());
    } else {
      if (!all_digits(label_column)) {
        throw ParseError("label column '" + label_column + "' not found (file has no header)", 1);
      }
      label_idx = std::stoul(label_column);
      if (label_idx >= cols) {
        throw ParseError("label column '" + label_column + "' out of range for " + std::to_string(cols) + " columns", 1);
      }
    }
    label_resolved = true;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (width == 0) {
      width = cells.size();
      const bool numeric = std::all_of(cells.begin(), cells.end(), [](std::string_view c) { return parse_number(c).has_value(); });
      if (!numeric) {
        table.had_header = true;
        for (auto c : cells) header.emplace_back(c);
        resolve_label(width);
        continue;
      }
      resolve_label(width);
    }
    if (cells.size() != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    std::vector<double> values;
    values.reserve(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_number(cells[c]);
      if (!v) throw ParseError("non-numeric cell '" + std::string(cells[c]) + "' in column " + std::to_string(c), line_no);
      values.push_back(*v);
    }
    rows.push_back(std::move(values));
    row_lines.push_back(line_no);
  }
  if (!label_resolved) throw ParseError("CSV file has no data: " + path, 0);
  if (width < 2) throw ParseError("CSV needs at least one feature column and one label column", 1);

  table.features = Matrix(rows.size(), width - 1);
  table.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_idx) continue;
      table.features(r, out_c++) = rows[r][c];
    }
    const double label = rows[r][label_idx];
    if (label < 0.0 || label != std::floor(label) || label > 1e6) {
      throw ParseError("label " + std::to_string(label) + " is not a non-negative integer", row_lines[r]);
    }
    table.labels.push_back(static_cast<int>(label));
  }
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_idx) table.feature_names.push_back(header[c]);
  return table;
}

LoadedCsv load_csv(const std::string& path, const std::string& label_column) {
  CsvTable table = read_csv_table(path, label_column);
  LoadedCsv out;
  out.raw_features = table.features;
  out.stats = Standardizer::fit(table.features);
  out.data.features = out.stats.apply(table.features);
  out.data.labels = std::move(table.labels);
  out.data.classes = out.data.labels.empty()
                         ? 0
                         : static_cast<std::size_t>(*std::max_element(out.data.labels.begin(), out.data.labels.end())) + 1;
  out.data.split = Split::train;
  out.feature_names = std::move(table.feature_names);
  return out;
}

std::pair<Dataset, Dataset> split_csv(const std::string& path, const std::string& label_column, double test_fraction,
                                      std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  CsvTable table = read_csv_table(path, label_column);
  const std::size_t n = table.labels.size();
  if (n < 2) throw ConfigError("CSV dataset needs at least 2 rows to split");
  Dataset all;
  all.features = std::move(table.features);
  all.labels = std::move(table.labels);
  all.classes = static_cast<std::size_t>(*std::max_element(all.labels.begin(), all.labels.end())) + 1;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng(seed).stream("split").shuffle(order);
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  const std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  const std::vector<std::size_t> test_idx(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  Dataset train = all.subset(train_idx);
  Dataset test = all.subset(test_idx);
  const Standardizer stats = Standardizer::fit(train.features);
  train.features = stats.apply(train.features);
  test.features = stats.apply(test.features);
  train.split = Split::train;
  test.split = Split::test;
  return {std::move(train), std::move(test)};
}

// ---- optimization -----------------------------------------------------------------

void sgd_update(ad::ParamStore& params, double lr, double momentum, double weight_decay) {
  for (const std::string& name : params.names()) {
    Matrix& p = params.value(name);
    const Matrix& g = params.grad(name);
    Matrix& v = params.velocity(name);
    const double wd = params.decays(name) ? weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + g[i] + wd * p[i];
      p[i] -= lr * v[i];
    }
  }
}

void sgd_update(ad::ParamStore& params, const std::vector<std::pair<std::string, Matrix>>& grads, double lr,
                double momentum, double weight_decay) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw ContractError("sgd_update: gradient for unknown parameter '" + name + "'");
    if (!g.same_shape(params.value(name))) throw DimensionError("sgd_update: gradient shape mismatch for " + name);
  }
  params.zero_grad();
  for (const auto& [name, g] : grads) params.grad(name) = g;
  sgd_update(params, lr, momentum, weight_decay);
}

DropSchedule DropSchedule::linear(std::size_t depth, double p_l) {
  return {depth, p_l, arch::drop_probabilities(depth, p_l)};
}

double LrSchedule::at(std::size_t epoch, std::size_t total_epochs) const {
  std::vector<std::size_t> marks = decay_epochs;
  if (marks.empty()) marks = {total_epochs / 2, (total_epochs * 3) / 4};
  double lr = initial;
  for (std::size_t m : marks)
    if (m > 0 && epoch >= m) lr *= factor;
  return lr;
}

void TrainConfig::validate() const {
  spec.validate();
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr.initial > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(lr.factor > 0.0)) throw ConfigError("train: lr_decay_factor must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
}

// ---- evaluation -------------------------------------------------------------------

double accuracy_from_logits(const Matrix& logits, const std::vector<int>& labels) {
  if (logits.rows() != labels.size()) throw DimensionError("accuracy_from_logits: row count mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row_view(r);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Metrics evaluate(const arch::NetworkSpec& spec, ad::ParamStore& params, const Dataset& data) {
  if (data.size() == 0) return {};
  ad::Tape tape;
  const auto fwd = arch::network_forward(tape, spec, params, data.features, arch::Mode::eval);
  const ad::Var loss = ad::softmax_cross_entropy(fwd.logits, data.labels);
  return {loss.scalar(), accuracy_from_logits(fwd.logits.value(), data.labels)};
}

KAudit audit_k(const std::vector<double>& k_values) {
  KAudit audit;
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    const double mag = std::abs(k_values[i]);
    if (!(mag <= 1.0)) {
      audit.outside.push_back(i + 1);
      audit.all_inside = false;
    } else if (mag == 1.0) {
      audit.boundary.push_back(i + 1);
    }
  }
  return audit;
}

namespace {

TrainRun run_loop(const TrainConfig& config, const Dataset& train_data, const Dataset& test_data) {
  config.validate();
  train_data.validate();
  test_data.validate();
  if (train_data.feature_dim() != config.spec.input_dim) throw ConfigError("train: input_dim does not match data");
  if (train_data.classes > config.spec.classes) throw ConfigError("train: data has more classes than the network");
  if (train_data.size() == 0) throw ConfigError("train: empty training set");

  const auto started = std::chrono::steady_clock::now();
  TrainRun run;
  run.config = config;
  const Rng root(config.seed);
  Rng init_rng = root.stream("init");
  Rng shuffle_rng = root.stream("shuffle");
  Rng policy_rng = root.stream("policy");
  const bool stochastic = config.spec.policy.kind != arch::PolicyKind::none;
  run.params = arch::init_params(config.spec, init_rng);

  const std::size_t n = train_data.size();
  const std::size_t p = train_data.feature_dim();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr.at(epoch - 1, config.epochs);
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      Matrix x(end - start, p);
      std::vector<int> y(end - start);
      for (std::size_t r = start; r < end; ++r) {
        const auto src = train_data.features.row_view(order[r]);
        std::copy(src.begin(), src.end(), x.row_view(r - start).begin());
        y[r - start] = train_data.labels[order[r]];
      }
      ad::Tape tape;
      const auto fwd = arch::network_forward(tape, config.spec, run.params, x, arch::Mode::train,
                                             stochastic ? &policy_rng : nullptr);
      const ad::Var loss = ad::softmax_cross_entropy(fwd.logits, y);
      if (!std::isfinite(loss.scalar())) throw TrainingError("train: non-finite loss", epoch);
      run.params.zero_grad();
      tape.backward(loss);
      sgd_update(run.params, lr, config.momentum, config.weight_decay);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    const Metrics tr = evaluate(config.spec, run.params, train_data);
    const Metrics te = evaluate(config.spec, run.params, test_data);
    if (!std::isfinite(tr.loss) || !std::isfinite(te.loss)) throw TrainingError("train: non-finite loss", epoch);
    m.train_loss = tr.loss;
    m.train_accuracy = tr.accuracy;
    m.test_loss = te.loss;
    m.test_accuracy = te.accuracy;
    run.curves.push_back(m);
  }

  run.final_train = evaluate(config.spec, run.params, train_data);
  run.final_test = evaluate(config.spec, run.params, test_data);
  run.k_values = arch::lm_coefficients(config.spec, run.params);
  run.k_audit = audit_k(run.k_values);
  run.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return run;
}

}  // namespace

TrainRun train(const TrainConfig& config, const Dataset& train_data, const Dataset& test_data) {
  return run_loop(config, train_data, test_data);
}

TrainRun train_recording_failure(const TrainConfig& config, const Dataset& train_data, const Dataset& test_data) {
  try {
    return run_loop(config, train_data, test_data);
  } catch (const TrainingError& e) {
    TrainRun run;
    run.config = config;
    run.failed = true;
    run.failure_epoch = e.epoch();
    run.failure_message = e.what();
    return run;
  }
}

}  // namespace odenet::train
