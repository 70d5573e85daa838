// Copyright 2026 The accent-toolkit Authors.
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

#include <gtest/gtest.h>

#include "accent/models.hpp"
#include "oracles.hpp"

using namespace accent;

namespace {

BinaryDataset random_dataset(Eigen::Index n, Eigen::Index d, Rng& rng) {
  BinaryDataset data;
  data.x.resize(n, d);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.x(i, j) = rng.normal();
    data.y[i] = static_cast<double>(rng.below(2));
  }
  return data;
}

// Two Gaussian blobs separated along the first axis.
BinaryDataset blobs(Eigen::Index n, Eigen::Index d, double gap, Rng& rng) {
  BinaryDataset data;
  data.x.resize(n, d);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.y[i] = static_cast<double>(i % 2);
    for (Eigen::Index j = 0; j < d; ++j) data.x(i, j) = rng.normal();
    data.x(i, 0) += data.y[i] > 0.5 ? gap : -gap;
  }
  return data;
}

double accuracy(const AnyModel& m, const BinaryDataset& data) {
  const Eigen::VectorXd p = predict(m, data.x);
  int ok = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) ok += (p[i] > 0.5) == (data.y[i] > 0.5);
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

BinaryDataset from_rows(std::vector<std::vector<double>> x, std::vector<double> y) {
  BinaryDataset data;
  data.x.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x[0].size()));
  data.y.resize(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x[i].size(); ++j) data.x(i, j) = x[i][j];
    data.y[i] = y[i];
  }
  return data;
}

}  // namespace

TEST(LogReg, GradientMatchesCentralDifferences) {
  Rng rng(10);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto data = random_dataset(15 + inst, 1 + inst % 7, rng);
    LogRegModel m;
    m.weights = Eigen::VectorXd(data.dim());
    for (Eigen::Index j = 0; j < data.dim(); ++j) m.weights[j] = rng.normal(0.0, 0.5);
    m.bias = rng.normal(0.0, 0.5);
    m.l2 = inst % 2 ? 1e-2 : 0.0;
    const auto g = logreg_gradient(m, data.x, data.y);
    auto loss = [&] { return logreg_loss(m, data.x, data.y); };
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      worst = std::max(worst, oracle::rel_err(g.weights[j], oracle::central_difference(loss, &m.weights[j])));
    }
    worst = std::max(worst, oracle::rel_err(g.bias, oracle::central_difference(loss, &m.bias)));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(LogReg, MinibatchGradientUsesOnlyItsRows) {
  Rng rng(3);
  const auto data = random_dataset(30, 4, rng);
  LogRegModel m;
  m.weights = Eigen::VectorXd::Constant(4, 0.3);
  const std::vector<std::size_t> idx = {2, 7, 11};
  const auto g = logreg_gradient(m, data.x, data.y, idx);
  BinaryDataset sub;
  sub.x.resize(3, 4);
  sub.y.resize(3);
  for (int r = 0; r < 3; ++r) {
    sub.x.row(r) = data.x.row(static_cast<Eigen::Index>(idx[r]));
    sub.y[r] = data.y[static_cast<Eigen::Index>(idx[r])];
  }
  const auto want = logreg_gradient(m, sub.x, sub.y);
  EXPECT_LT((g.weights - want.weights).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(g.bias, want.bias, 1e-15);
}

TEST(LogReg, BalancedDataAtOriginHasZeroBiasGradient) {
  Rng rng(4);
  auto data = random_dataset(40, 3, rng);
  for (Eigen::Index i = 0; i < 40; ++i) data.y[i] = static_cast<double>(i % 2);
  LogRegModel m;
  m.weights = Eigen::VectorXd::Zero(3);
  EXPECT_NEAR(logreg_gradient(m, data.x, data.y).bias, 0.0, 1e-15);
}

TEST(LogReg, SeparatesOneDimensionalPoints) {
  const auto data = from_rows({{-1.0}, {1.0}}, {0.0, 1.0});
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.epochs = 500;
  cfg.l2 = 0.0;
  const auto m = train_logreg(data, cfg);
  EXPECT_GT(m.predict(std::vector<double>{1.0}), 0.9);
  EXPECT_LT(m.predict(std::vector<double>{-1.0}), 0.1);
}

TEST(LogReg, HeavyPenaltyShrinksWeights) {
  Rng rng(5);
  const auto data = blobs(200, 3, 2.0, rng);
  TrainConfig cfg;
  cfg.l2 = 1e6;
  cfg.learning_rate = 1e-7;
  cfg.epochs = 300;
  const auto m = train_logreg(data, cfg);
  EXPECT_LT(m.weights.cwiseAbs().maxCoeff(), 1e-3);
  const Eigen::VectorXd p = m.predict(data.x);
  EXPECT_NEAR(p.mean(), 0.5, 1e-3);  // class prior
}

TEST(LogReg, PredictBasics) {
  LogRegModel m;
  m.weights = Eigen::VectorXd::Zero(3);
  EXPECT_DOUBLE_EQ(m.predict(std::vector<double>{5, -2, 7}), 0.5);
  m.weights = Eigen::VectorXd::Ones(1);
  EXPECT_DOUBLE_EQ(m.predict(std::vector<double>{0.0}), 0.5);
  double prev = 0.5;
  for (double x = 1.0; x < 60.0; x += 1.0) {
    const double p = m.predict(std::vector<double>{x});
    EXPECT_GE(p, prev);
    EXPECT_LT(p, 1.0);
    prev = p;
  }
  EXPECT_GT(prev, 1.0 - 1e-12);
  EXPECT_THROW(m.predict(std::vector<double>{1.0, 2.0}), Error);
}

TEST(LogReg, SameSeedSameModel) {
  Rng rng(6);
  const auto data = blobs(300, 5, 0.5, rng);
  TrainConfig cfg;
  cfg.seed = 99;
  cfg.epochs = 20;
  const auto a = train_logreg(data, cfg), b = train_logreg(data, cfg);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
  cfg.seed = 100;
  EXPECT_NE(serialize_model(train_logreg(data, cfg)), serialize_model(a));
}

TEST(LogReg, DivergenceIsReported) {
  Rng rng(7);
  auto data = blobs(64, 2, 1.0, rng);
  data.x *= 1e200;
  TrainConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.epochs = 5;
  try {
    train_logreg(data, cfg);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(LogReg, PatienceStopsEarly) {
  const auto data = from_rows({{-1.0}, {1.0}, {-1.0}, {1.0}}, {1.0, 0.0, 0.0, 1.0});  // pure noise
  TrainConfig cfg;
  cfg.epochs = 1000;
  cfg.l2 = 0.1;
  cfg.patience = 3;
  const auto m = train_logreg(data, cfg);
  EXPECT_LT(m.meta.epochs, 1000u);
}

TEST(Mlp, GradientMatchesCentralDifferences) {
  Rng rng(20);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto data = random_dataset(12 + inst, 1 + inst % 5, rng);
    MlpModel m = init_mlp(data.dim(), 1 + inst % 6, rng);
    for (Eigen::Index i = 0; i < m.b1.size(); ++i) m.b1[i] = rng.normal(0.0, 0.3);
    m.b2 = rng.normal(0.0, 0.3);
    m.l2 = inst % 2 ? 1e-2 : 0.0;
    const auto g = mlp_gradient(m, data.x, data.y);
    auto loss = [&] { return mlp_loss(m, data.x, data.y); };
    for (Eigen::Index i = 0; i < m.w1.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.w1.cols(); ++j) {
        worst = std::max(worst, oracle::rel_err(g.w1(i, j), oracle::central_difference(loss, &m.w1(i, j))));
      }
      worst = std::max(worst, oracle::rel_err(g.b1[i], oracle::central_difference(loss, &m.b1[i])));
      worst = std::max(worst, oracle::rel_err(g.w2[i], oracle::central_difference(loss, &m.w2[i])));
    }
    worst = std::max(worst, oracle::rel_err(g.b2, oracle::central_difference(loss, &m.b2)));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, LearnsXor) {
  const auto data = from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0});
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig cfg = TrainConfig::mlp_defaults();
    cfg.hidden_size = 8;
    cfg.learning_rate = 0.5;
    cfg.epochs = 5000;
    cfg.l2 = 0.0;
    cfg.seed = seed;
    solved += accuracy(train_mlp(data, cfg), data) == 1.0;
  }
  EXPECT_GE(solved, 8);
}

TEST(Mlp, OneHiddenUnitMatchesLogRegOnSeparableData) {
  Rng rng(21);
  const auto data = blobs(200, 4, 3.0, rng);
  TrainConfig cfg = TrainConfig::mlp_defaults();
  cfg.hidden_size = 1;
  cfg.learning_rate = 0.1;
  cfg.epochs = 1000;
  const double lr = accuracy(train_logreg(data, TrainConfig::logreg_defaults()), data);
  EXPECT_EQ(lr, 1.0);
  // A single ReLU unit can start dead; most initializations must still match.
  int matched = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    matched += accuracy(train_mlp(data, cfg), data) == lr;
  }
  EXPECT_GE(matched, 8);
}

TEST(Mlp, ZeroEpochsKeepsInitialization) {
  Rng rng(22);
  const auto data = random_dataset(10, 3, rng);
  TrainConfig cfg = TrainConfig::mlp_defaults();
  cfg.epochs = 0;
  cfg.hidden_size = 5;
  cfg.seed = 17;
  const auto m = train_mlp(data, cfg);
  Rng init_rng(17);
  const auto want = init_mlp(3, 5, init_rng);
  EXPECT_EQ(m.w1, want.w1);
  EXPECT_EQ(m.b1, want.b1);
  EXPECT_EQ(m.w2, want.w2);
  EXPECT_EQ(m.b2, want.b2);
  EXPECT_EQ(m.meta.epochs, 0u);
}

TEST(Mlp, ForwardPassMatchesIndependentImplementation) {
  Rng rng(23);
  const auto data = blobs(120, 6, 1.0, rng);
  TrainConfig cfg = TrainConfig::mlp_defaults();
  cfg.hidden_size = 16;
  cfg.epochs = 30;
  const auto m = train_mlp(data, cfg);
  const Eigen::VectorXd batch = m.predict(data.x);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    std::vector<double> x(data.x.row(i).data(), data.x.row(i).data() + data.dim());
    const double want = oracle::mlp_forward(m.w1, m.b1, m.w2, m.b2, x);
    EXPECT_NEAR(m.predict(x), want, 1e-9);
    EXPECT_NEAR(batch[i], want, 1e-9);
  }
}

TEST(TrainConfig, DefaultsAndValidation) {
  const auto lr = TrainConfig::defaults_for(ClassifierKind::LogReg);
  EXPECT_EQ(lr.learning_rate, 0.1);
  EXPECT_EQ(lr.epochs, 300u);
  EXPECT_EQ(lr.batch_size, 64u);
  EXPECT_EQ(lr.l2, 1e-4);
  const auto mlp = TrainConfig::defaults_for(ClassifierKind::Mlp);
  EXPECT_EQ(mlp.hidden_size, 128u);
  EXPECT_EQ(mlp.learning_rate, 0.01);
  EXPECT_EQ(mlp.epochs, 200u);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = {};
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), UsageError);
  EXPECT_EQ(parse_classifier_kind("lr"), ClassifierKind::LogReg);
  EXPECT_EQ(parse_classifier_kind("mlp"), ClassifierKind::Mlp);
  EXPECT_THROW(parse_classifier_kind("svm"), UsageError);
}

TEST(Rank, ByMagnitudeWithIndexTieBreak) {
  LogRegModel m;
  m.weights = Eigen::Vector3d(0.1, -5.0, 2.0);
  const auto r = rank_coefficients(m, {"f0", "f1", "f2"}, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].name, "f1");
  EXPECT_DOUBLE_EQ(r[0].magnitude, 5.0);
  EXPECT_EQ(r[1].name, "f2");
  EXPECT_DOUBLE_EQ(r[1].magnitude, 2.0);
  m.weights = Eigen::VectorXd::Zero(5);
  const auto z = rank_coefficients(m, {"a", "b", "c", "d", "e"}, 3);
  EXPECT_EQ(z[0].index, 0u);
  EXPECT_EQ(z[1].index, 1u);
  EXPECT_EQ(z[2].index, 2u);
  EXPECT_EQ(z[2].magnitude, 0.0);
  EXPECT_THROW(rank_coefficients(m, {"a"}, 1), UsageError);
  EXPECT_THROW(rank_coefficients(m, {"a", "b", "c", "d", "e"}, 6), UsageError);
}

TEST(Serialization, RoundTripIsExact) {
  Rng rng(30);
  const auto data = blobs(100, 4, 1.0, rng);
  TrainConfig cfg;
  cfg.epochs = 10;
  LogRegModel lr = train_logreg(data, cfg);
  lr.feature_names = {"a", "b", "c", "d"};
  const auto lr2 = std::get<LogRegModel>(deserialize_model(serialize_model(lr)));
  EXPECT_EQ(lr2.weights, lr.weights);
  EXPECT_EQ(lr2.bias, lr.bias);
  EXPECT_EQ(lr2.feature_names, lr.feature_names);
  EXPECT_EQ(lr2.meta.epochs, 10u);

  TrainConfig mc = TrainConfig::mlp_defaults();
  mc.hidden_size = 7;
  mc.epochs = 5;
  const MlpModel mlp = train_mlp(data, mc);
  const auto mlp2 = std::get<MlpModel>(deserialize_model(serialize_model(mlp)));
  EXPECT_EQ(mlp2.w1, mlp.w1);
  EXPECT_EQ(mlp2.b1, mlp.b1);
  EXPECT_EQ(mlp2.w2, mlp.w2);
  EXPECT_EQ(mlp2.b2, mlp.b2);
  EXPECT_EQ(serialize_model(mlp2), serialize_model(mlp));
}

TEST(Serialization, RejectsMalformedInput) {
  EXPECT_THROW(deserialize_model("{"), Error);
  EXPECT_THROW(deserialize_model(R"({"kind":"svm"})"), Error);
  LogRegModel m;
  m.weights = Eigen::VectorXd::Ones(3);
  auto j = nlohmann::ordered_json::parse(serialize_model(m));
  j["shape"] = {4};
  EXPECT_THROW(deserialize_model(j.dump()), Error);
}
