#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "odenet/errors.hpp"
#include "odenet/trainer.hpp"

using namespace odenet;
using namespace odenet::train;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path, std::ios::binary) << text;
  return path.string();
}

TrainConfig small_config(arch::ArchKind kind, std::size_t epochs) {
  TrainConfig c;
  c.spec.kind = kind;
  c.spec.depth = 2;
  c.spec.width = 8;
  c.epochs = epochs;
  c.batch_size = 16;
  c.lr.initial = 0.05;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Synthetic, SplitSizesAndLabels) {
  const auto [tr, te] = make_synthetic(SyntheticKind::two_moons, 200, 0.1, 1);
  EXPECT_EQ(tr.size(), 160u);
  EXPECT_EQ(te.size(), 40u);
  EXPECT_EQ(tr.feature_dim(), 2u);
  EXPECT_EQ(tr.split, Split::train);
  EXPECT_EQ(te.split, Split::test);
  tr.validate();
  te.validate();
}

TEST(Synthetic, SameSeedSameData) {
  for (auto kind : {SyntheticKind::two_moons, SyntheticKind::circles, SyntheticKind::spirals, SyntheticKind::blobs}) {
    const auto a = make_synthetic(kind, 100, 0.2, 9);
    const auto b = make_synthetic(kind, 100, 0.2, 9);
    EXPECT_EQ(a.first.features, b.first.features) << to_string(kind);
    EXPECT_EQ(a.second.labels, b.second.labels) << to_string(kind);
  }
  EXPECT_NE(make_synthetic(SyntheticKind::blobs, 100, 0.2, 9).first.features,
            make_synthetic(SyntheticKind::blobs, 100, 0.2, 10).first.features);
}

TEST(Synthetic, TooFewPointsRejected) {
  EXPECT_THROW(make_synthetic(SyntheticKind::blobs, 10, 0.1, 1), ContractError);
  EXPECT_THROW(parse_synthetic_kind("moons"), ConfigError);
}

TEST(Synthetic, BlobsAreLearnable) {
  const auto [tr, te] = make_synthetic(SyntheticKind::blobs, 300, 0.2, 2);
  TrainConfig c = small_config(arch::ArchKind::resnet, 15);
  c.spec.classes = 3;
  const TrainRun run = train::train(c, tr, te);
  EXPECT_GE(run.final_test.accuracy, 0.95);
}

TEST(Csv, ParsesHeaderAndLabelByName) {
  const auto path = write_temp("odenet_three_rows.csv", "x,y,label\n1.0,2.0,0\n-1.5,0.25,1\n3,4,1\n");
  const CsvTable t = read_csv_table(path, "label");
  EXPECT_TRUE(t.had_header);
  EXPECT_EQ(t.features.rows(), 3u);
  EXPECT_EQ(t.features.cols(), 2u);
  EXPECT_EQ(t.labels, (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(t.feature_names, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(t.features(1, 0), -1.5);
}

TEST(Csv, HeaderlessUsesColumnIndex) {
  const auto path = write_temp("odenet_noheader.csv", "0,1.0,2.0\n1,3.0,4.0\n");
  const CsvTable t = read_csv_table(path, "0");
  EXPECT_FALSE(t.had_header);
  EXPECT_EQ(t.labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(t.features(1, 1), 4.0);
}

TEST(Csv, Errors) {
  const auto missing = write_temp("odenet_missing_col.csv", "x,y\n1,0\n");
  EXPECT_THROW(read_csv_table(missing, "label"), ParseError);

  const auto ragged = write_temp("odenet_ragged.csv", "x,y,label\n1,2,0\n3,1\n");
  try {
    read_csv_table(ragged, "label");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }

  const auto bad = write_temp("odenet_bad_cell.csv", "x,y,label\n1,2,0\n3,abc,1\n");
  try {
    read_csv_table(bad, "label");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Csv, SplitStandardizesWithTrainStatistics) {
  std::string text = "a,b,label\n";
  for (int i = 0; i < 50; ++i) text += std::to_string(i) + "," + std::to_string(100 + 2 * i) + "," + std::to_string(i % 2) + "\n";
  const auto path = write_temp("odenet_split.csv", text);
  const auto [tr, te] = split_csv(path, "label", 0.2, 4);
  EXPECT_EQ(tr.size() + te.size(), 50u);
  EXPECT_EQ(te.size(), 10u);
  double mean = 0.0;
  for (std::size_t r = 0; r < tr.size(); ++r) mean += tr.features(r, 0);
  EXPECT_NEAR(mean / tr.size(), 0.0, 1e-12);
}

TEST(Sgd, MomentumAndDecay) {
  ad::ParamStore p;
  p.add("w", Matrix(1, 1, 1.0));
  p.add("k", Matrix(1, 1, 1.0), false);
  p.velocity("w")[0] = 0.5;
  p.velocity("k")[0] = 0.5;
  sgd_update(p, {{"w", Matrix(1, 1, 0.2)}, {"k", Matrix(1, 1, 0.2)}}, 0.1, 0.9, 0.01);
  // v = 0.9 * 0.5 + 0.2 + 0.01 * 1 = 0.66 for w; 0.65 for k (no decay).
  EXPECT_NEAR(p.velocity("w")[0], 0.66, 1e-15);
  EXPECT_NEAR(p.value("w")[0], 1.0 - 0.066, 1e-15);
  EXPECT_NEAR(p.velocity("k")[0], 0.65, 1e-15);
  EXPECT_NEAR(p.value("k")[0], 1.0 - 0.065, 1e-15);
}

TEST(Sgd, PlainStepFromZeroVelocity) {
  ad::ParamStore p;
  p.add("w", Matrix(1, 1, 0.5));
  sgd_update(p, {{"w", Matrix(1, 1, 2.9)}}, 0.1, 0.9, 0.0);
  EXPECT_NEAR(p.value("w")[0], 0.5 - 0.29, 1e-15);
}

TEST(Sgd, UnknownGradientRejected) {
  ad::ParamStore p;
  p.add("w", Matrix(1, 1, 0.5));
  EXPECT_THROW(sgd_update(p, {{"v", Matrix(1, 1, 1.0)}}, 0.1, 0.0, 0.0), ContractError);
}

TEST(Schedules, DropAndLearningRate) {
  const auto d = DropSchedule::linear(10, 0.5);
  EXPECT_DOUBLE_EQ(d.drop[0], 0.05);
  EXPECT_DOUBLE_EQ(d.drop[9], 0.5);
  LrSchedule lr;
  lr.initial = 0.1;
  EXPECT_DOUBLE_EQ(lr.at(1, 200), 0.1);
  EXPECT_NEAR(lr.at(100, 200), 0.01, 1e-15);
  EXPECT_NEAR(lr.at(150, 200), 0.001, 1e-15);
}

TEST(Training, ZeroEpochsGivesInitialMetricsOnly) {
  const auto [tr, te] = make_synthetic(SyntheticKind::two_moons, 100, 0.1, 1);
  const TrainRun run = train::train(small_config(arch::ArchKind::lm_resnet, 0), tr, te);
  EXPECT_TRUE(run.curves.empty());
  EXPECT_FALSE(run.failed);
  EXPECT_EQ(run.k_values.size(), 2u);
  EXPECT_TRUE(std::isfinite(run.final_test.loss));
}

TEST(Training, SeedDeterminesRun) {
  const auto [tr, te] = make_synthetic(SyntheticKind::two_moons, 100, 0.1, 1);
  const TrainConfig c = small_config(arch::ArchKind::lm_resnet, 3);
  EXPECT_EQ(serialize_run(train::train(c, tr, te)), serialize_run(train::train(c, tr, te)));
}

TEST(Training, SurvivalOneMatchesNoPolicyBitwise) {
  const auto [tr, te] = make_synthetic(SyntheticKind::two_moons, 100, 0.1, 1);
  TrainConfig plain = small_config(arch::ArchKind::resnet, 2);
  TrainConfig sd = plain;
  sd.spec.policy = {arch::PolicyKind::stochastic_depth, 1.0};
  const TrainRun a = train::train(plain, tr, te);
  const TrainRun b = train::train(sd, tr, te);
  EXPECT_TRUE(a.params.same_values(b.params));
}

TEST(Training, DivergenceIsRecorded) {
  const auto [tr, te] = make_synthetic(SyntheticKind::two_moons, 100, 0.1, 1);
  TrainConfig c = small_config(arch::ArchKind::resnet, 3);
  c.lr.initial = 1e6;
  EXPECT_THROW(train::train(c, tr, te), TrainingError);
  const TrainRun run = train_recording_failure(c, tr, te);
  EXPECT_TRUE(run.failed);
  ASSERT_TRUE(run.failure_epoch.has_value());
  EXPECT_EQ(*run.failure_epoch, 1u);
}

TEST(Evaluation, DeterministicAndNearChanceUntrained) {
  const auto [tr, te] = make_synthetic(SyntheticKind::blobs, 600, 0.1, 5);
  TrainConfig c = small_config(arch::ArchKind::resnet, 0);
  c.spec.classes = 3;
  Rng rng(1);
  ad::ParamStore params = arch::init_params(c.spec, rng);
  for (double& v : params.value("head.W").values()) v = 0.0;
  const Metrics a = evaluate(c.spec, params, te);
  const Metrics b = evaluate(c.spec, params, te);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_NEAR(a.loss, std::log(3.0), 1e-12);
  EXPECT_EQ(a.accuracy, b.accuracy);
}

TEST(Evaluation, AccuracyFromLogits) {
  const Matrix logits = Matrix::from_rows({{2, 1}, {0, 3}, {5, 4}, {1, 2}});
  EXPECT_DOUBLE_EQ(accuracy_from_logits(logits, {0, 1, 1, 1}), 0.75);
}

TEST(Audit, OneBasedLayers) {
  const KAudit a = audit_k({0.5, -1.0, 1.5, 0.0});
  EXPECT_EQ(a.outside, (std::vector<std::size_t>{3}));
  EXPECT_EQ(a.boundary, (std::vector<std::size_t>{2}));
  EXPECT_FALSE(a.all_inside);
}

TEST(Serialize, NoWallClockAndOrderedKeys) {
  const auto [tr, te] = make_synthetic(SyntheticKind::two_moons, 100, 0.1, 1);
  TrainRun run = train::train(small_config(arch::ArchKind::lm_resnet, 1), tr, te);
  const std::string a = serialize_run(run);
  run.wall_clock_seconds = 123.0;
  EXPECT_EQ(a, serialize_run(run));
  EXPECT_NE(a.find("\"k_values\""), std::string::npos);
  EXPECT_EQ(a.find("wall"), std::string::npos);
}
