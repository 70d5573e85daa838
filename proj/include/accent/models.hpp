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

// Binary classifiers trained by seeded mini-batch gradient descent: logistic
// regression and a one-hidden-layer ReLU perceptron with a sigmoid output.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "accent/error.hpp"
#include "accent/util.hpp"
#include "json.hpp"

namespace accent {

enum class ClassifierKind { LogReg, Mlp };

inline std::string_view to_string(ClassifierKind k) {
  return k == ClassifierKind::LogReg ? "logreg" : "mlp";
}

inline ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "logreg" || s == "lr") return ClassifierKind::LogReg;
  if (s == "mlp") return ClassifierKind::Mlp;
  fail<UsageError>("unknown classifier '", s, "' (expected logreg|mlp)");
}

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 300;
  std::size_t batch_size = 64;
  double l2 = 1e-4;
  std::size_t hidden_size = 128;
  std::uint64_t seed = 0;
  std::optional<std::size_t> patience;  // early stop on full-batch loss

  static TrainConfig logreg_defaults() { return {}; }
  static TrainConfig mlp_defaults() {
    TrainConfig c;
    c.learning_rate = 0.01;
    c.epochs = 200;
    return c;
  }
  static TrainConfig defaults_for(ClassifierKind k) {
    return k == ClassifierKind::LogReg ? logreg_defaults() : mlp_defaults();
  }

  void validate() const {
    if (!(learning_rate > 0.0)) fail<UsageError>("train config: learning_rate must be > 0");
    if (batch_size < 1) fail<UsageError>("train config: batch_size must be >= 1");
    if (hidden_size < 1) fail<UsageError>("train config: hidden_size must be >= 1");
    if (!(l2 >= 0.0)) fail<UsageError>("train config: l2 must be >= 0");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = {{"learning_rate", learning_rate}, {"epochs", epochs},
                                {"batch_size", batch_size},       {"l2", l2},
                                {"hidden_size", hidden_size},     {"seed", seed}};
    j["patience"] = patience ? nlohmann::ordered_json(*patience) : nlohmann::ordered_json(nullptr);
    return j;
  }
};

struct TrainMeta {
  std::size_t epochs = 0;  // epochs actually run
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
};

/// Rows of x are samples; y holds 0/1 labels.
/// Design matrices are row-major so mini-batch gathers copy contiguous rows.
using DataMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BinaryDataset {
  DataMatrix x;
  Eigen::VectorXd y;

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }
};

namespace detail {

inline double sigmoid(double z) {
  double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  // Keep strictly inside (0, 1).
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

inline double bce(const Eigen::VectorXd& p, const Eigen::VectorXd& y) {
  constexpr double kClamp = 1e-12;
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    s -= y[i] * std::log(std::max(p[i], kClamp)) +
         (1.0 - y[i]) * std::log(std::max(1.0 - p[i], kClamp));
  }
  return s / static_cast<double>(p.size());
}

inline void check_dataset(const BinaryDataset& d) {
  if (d.size() == 0 || d.dim() == 0) fail("training data is empty");
  if (d.y.size() != d.size()) fail("training data: label count mismatch");
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    if (d.y[i] == 1.0) {
      pos = true;
    } else if (d.y[i] == 0.0) {
      neg = true;
    } else {
      fail("training data: label ", d.y[i], " at row ", i, " is not 0/1");
    }
  }
  if (!pos || !neg) fail("training data contains a single class");
  if (!d.x.allFinite()) fail("training data contains non-finite values");
}

inline DataMatrix gather_rows(const DataMatrix& x, std::span<const std::size_t> idx) {
  DataMatrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& y, std::span<const std::size_t> idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
  return out;
}

inline std::string doubles_to_b64(const double* p, std::size_t n) {
  std::string raw(n * 8, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, p + i, 8);
    for (int b = 0; b < 8; ++b) raw[8 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return base64_encode(raw);
}

inline std::vector<double> b64_to_doubles(const std::string& text, std::size_t expect) {
  const std::string raw = base64_decode(text);
  if (raw.size() != expect * 8) fail("model: parameter blob has ", raw.size() / 8, " values, expected ", expect);
  std::vector<double> out(expect);
  for (std::size_t i = 0; i < expect; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(static_cast<unsigned char>(raw[8 * i + b])) << (8 * b);
    std::memcpy(&out[i], &bits, 8);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Logistic regression

struct LogRegModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double l2 = 0.0;
  TrainMeta meta;
  std::vector<std::string> feature_names;  // optional

  Eigen::Index dim() const { return weights.size(); }

  double predict(std::span<const double> x) const {
    if (static_cast<Eigen::Index>(x.size()) != dim()) {
      fail("logreg predict: dimension mismatch (model ", dim(), ", input ", x.size(), ")");
    }
    Eigen::Map<const Eigen::VectorXd> v(x.data(), dim());
    return detail::sigmoid(weights.dot(v) + bias);
  }

  Eigen::VectorXd predict(const DataMatrix& x) const {
    if (x.cols() != dim()) fail("logreg predict: dimension mismatch");
    return detail::sigmoid((x * weights).array() + bias);
  }
};

struct LogRegGradient {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

/// Mean binary cross-entropy plus (l2/2)|w|^2.
inline double logreg_loss(const LogRegModel& m, const DataMatrix& x, const Eigen::VectorXd& y) {
  return detail::bce(m.predict(x), y) + 0.5 * m.l2 * m.weights.squaredNorm();
}

/// Gradient of the loss over the rows `idx` of (x, y), read in place.
inline LogRegGradient logreg_gradient(const LogRegModel& m, const DataMatrix& x, const Eigen::VectorXd& y,
                                      std::span<const std::size_t> idx) {
  LogRegGradient g{Eigen::VectorXd::Zero(x.cols()), 0.0};
  for (std::size_t i : idx) {
    const auto row = x.row(static_cast<Eigen::Index>(i));
    const double r = detail::sigmoid(row.dot(m.weights) + m.bias) - y[static_cast<Eigen::Index>(i)];
    g.weights += r * row.transpose();
    g.bias += r;
  }
  const double n = static_cast<double>(idx.size());
  g.weights = g.weights / n + m.l2 * m.weights;
  g.bias /= n;
  return g;
}

inline LogRegGradient logreg_gradient(const LogRegModel& m, const DataMatrix& x, const Eigen::VectorXd& y) {
  std::vector<std::size_t> all(static_cast<std::size_t>(x.rows()));
  std::iota(all.begin(), all.end(), 0);
  return logreg_gradient(m, x, y, all);
}

namespace detail {

/// Shared epoch loop: shuffles indices with the seeded generator and applies
/// `step` to each mini-batch of row indices. The full-batch loss is evaluated after every epoch
/// only when early stopping needs it; otherwise parameters are checked for
/// finiteness each epoch and the loss is evaluated once at the end.
template <typename Step, typename Loss, typename Finite>
TrainMeta run_epochs(const BinaryDataset& data, const TrainConfig& cfg, Rng& rng, Step&& step,
                     Loss&& full_loss, Finite&& params_finite) {
  TrainMeta meta;
  meta.learning_rate = cfg.learning_rate;
  meta.seed = cfg.seed;
  std::vector<std::size_t> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  meta.final_loss = full_loss();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + b, e - b);
      step(idx);
    }
    meta.epochs = epoch + 1;
    const bool last = epoch + 1 == cfg.epochs;
    if (cfg.patience || last) {
      meta.final_loss = full_loss();
    } else if (!params_finite()) {
      meta.final_loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(meta.final_loss)) {
      fail("training diverged: non-finite loss at epoch ", epoch + 1, " (learning rate ",
           cfg.learning_rate, ")");
    }
    if (cfg.patience) {
      if (meta.final_loss < best - 1e-12) {
        best = meta.final_loss;
        since_best = 0;
      } else if (++since_best >= *cfg.patience) {
        break;
      }
    }
  }
  return meta;
}

}  // namespace detail

inline LogRegModel train_logreg(const BinaryDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  detail::check_dataset(data);
  LogRegModel m;
  m.weights = Eigen::VectorXd::Zero(data.dim());
  m.l2 = cfg.l2;
  Rng rng(cfg.seed);
  m.meta = detail::run_epochs(
      data, cfg, rng,
      [&](std::span<const std::size_t> idx) {
        const auto g = logreg_gradient(m, data.x, data.y, idx);
        m.weights -= cfg.learning_rate * g.weights;
        m.bias -= cfg.learning_rate * g.bias;
      },
      [&] { return logreg_loss(m, data.x, data.y); },
      [&] { return m.weights.allFinite() && std::isfinite(m.bias); });
  return m;
}

// ---------------------------------------------------------------------------
// Multilayer perceptron: D -> H (ReLU) -> 1 (sigmoid)

struct MlpModel {
  Eigen::MatrixXd w1;  // H x D
  Eigen::VectorXd b1;  // H
  Eigen::VectorXd w2;  // H
  double b2 = 0.0;
  double l2 = 0.0;
  TrainMeta meta;
  std::vector<std::string> feature_names;

  Eigen::Index dim() const { return w1.cols(); }
  Eigen::Index hidden() const { return w1.rows(); }

  double predict(std::span<const double> x) const {
    if (static_cast<Eigen::Index>(x.size()) != dim()) {
      fail("mlp predict: dimension mismatch (model ", dim(), ", input ", x.size(), ")");
    }
    Eigen::Map<const Eigen::VectorXd> v(x.data(), dim());
    const Eigen::VectorXd h = (w1 * v + b1).cwiseMax(0.0);
    return detail::sigmoid(w2.dot(h) + b2);
  }

  Eigen::VectorXd predict(const DataMatrix& x) const {
    if (x.cols() != dim()) fail("mlp predict: dimension mismatch");
    const Eigen::MatrixXd h = ((x * w1.transpose()).rowwise() + b1.transpose()).cwiseMax(0.0);
    return detail::sigmoid((h * w2).array() + b2);
  }

  void validate() const {
    if (w1.rows() != b1.size() || w1.rows() != w2.size()) fail("mlp: inconsistent layer shapes");
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !std::isfinite(b2)) {
      fail("mlp: non-finite parameter");
    }
  }
};

/// Glorot-uniform weights, zero biases.
inline MlpModel init_mlp(Eigen::Index dim, Eigen::Index hidden, Rng& rng) {
  MlpModel m;
  const double a1 = std::sqrt(6.0 / static_cast<double>(dim + hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  m.w1.resize(hidden, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < hidden; ++i) m.w1(i, j) = rng.uniform(-a1, a1);
  }
  m.b1 = Eigen::VectorXd::Zero(hidden);
  m.w2.resize(hidden);
  for (Eigen::Index i = 0; i < hidden; ++i) m.w2[i] = rng.uniform(-a2, a2);
  return m;
}

struct MlpGradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
};

inline double mlp_loss(const MlpModel& m, const DataMatrix& x, const Eigen::VectorXd& y) {
  return detail::bce(m.predict(x), y) +
         0.5 * m.l2 * (m.w1.squaredNorm() + m.w2.squaredNorm());
}

/// Backpropagation through the sigmoid output and the ReLU hidden layer.
inline MlpGradient mlp_gradient(const MlpModel& m, const DataMatrix& x, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(x.rows());
  const Eigen::MatrixXd pre = (x * m.w1.transpose()).rowwise() + m.b1.transpose();  // N x H
  const Eigen::MatrixXd h = pre.cwiseMax(0.0);
  const Eigen::VectorXd p = detail::sigmoid((h * m.w2).array() + m.b2);
  const Eigen::VectorXd dz = (p - y) / n;  // dL/dz per sample
  MlpGradient g;
  g.w2 = h.transpose() * dz + m.l2 * m.w2;
  g.b2 = dz.sum();
  Eigen::MatrixXd dh = dz * m.w2.transpose();  // N x H
  dh = dh.array() * (pre.array() > 0.0).cast<double>();
  g.w1 = dh.transpose() * x + m.l2 * m.w1;
  g.b1 = dh.colwise().sum().transpose();
  return g;
}

inline MlpModel train_mlp(const BinaryDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  detail::check_dataset(data);
  Rng rng(cfg.seed);
  MlpModel m = init_mlp(data.dim(), static_cast<Eigen::Index>(cfg.hidden_size), rng);
  m.l2 = cfg.l2;
  m.meta = detail::run_epochs(
      data, cfg, rng,
      [&](std::span<const std::size_t> idx) {
        const auto g = mlp_gradient(m, detail::gather_rows(data.x, idx), detail::gather(data.y, idx));
        m.w1 -= cfg.learning_rate * g.w1;
        m.b1 -= cfg.learning_rate * g.b1;
        m.w2 -= cfg.learning_rate * g.w2;
        m.b2 -= cfg.learning_rate * g.b2;
      },
      [&] { return mlp_loss(m, data.x, data.y); },
      [&] { return m.w1.allFinite() && m.w2.allFinite() && m.b1.allFinite() && std::isfinite(m.b2); });
  return m;
}

// ---------------------------------------------------------------------------
// Common surface

using AnyModel = std::variant<LogRegModel, MlpModel>;

inline double predict(const AnyModel& m, std::span<const double> x) {
  return std::visit([&](const auto& model) { return model.predict(x); }, m);
}

inline Eigen::VectorXd predict(const AnyModel& m, const DataMatrix& x) {
  return std::visit([&](const auto& model) { return model.predict(x); }, m);
}

/// Thresholds at `threshold`; p exactly equal to it goes to the negative class.
inline int predict_label(const AnyModel& m, std::span<const double> x, double threshold = 0.5) {
  return predict(m, x) > threshold ? 1 : 0;
}

inline AnyModel train(ClassifierKind kind, const BinaryDataset& data, const TrainConfig& cfg) {
  if (kind == ClassifierKind::LogReg) return train_logreg(data, cfg);
  return train_mlp(data, cfg);
}

struct RankedCoefficient {
  std::size_t index;
  std::string name;
  double magnitude;
};

/// Top-k features by |weight|, descending; ties go to the lower index.
inline std::vector<RankedCoefficient> rank_coefficients(const LogRegModel& m,
                                                        const std::vector<std::string>& names,
                                                        std::size_t k) {
  const auto d = static_cast<std::size_t>(m.dim());
  if (names.size() != d) fail<UsageError>("rank: ", names.size(), " names for ", d, " weights");
  if (k > d) fail<UsageError>("rank: k = ", k, " exceeds the ", d, " available features");
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(m.weights[static_cast<Eigen::Index>(a)]) > std::abs(m.weights[static_cast<Eigen::Index>(b)]);
  });
  std::vector<RankedCoefficient> out;
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({idx[i], names[idx[i]], std::abs(m.weights[static_cast<Eigen::Index>(idx[i])])});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: JSON with base64 little-endian float64 parameter blobs.

inline nlohmann::ordered_json meta_to_json(const TrainMeta& m) {
  return {{"epochs", m.epochs}, {"learning_rate", m.learning_rate}, {"seed", m.seed}, {"final_loss", m.final_loss}};
}

inline TrainMeta meta_from_json(const nlohmann::ordered_json& j) {
  TrainMeta m;
  m.epochs = j.at("epochs").get<std::size_t>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.final_loss = j.at("final_loss").get<double>();
  return m;
}

inline std::string serialize_model(const AnyModel& model) {
  nlohmann::ordered_json j;
  if (const auto* lr = std::get_if<LogRegModel>(&model)) {
    j["kind"] = "logreg";
    j["shape"] = {lr->dim()};
    j["train_meta"] = meta_to_json(lr->meta);
    j["l2"] = lr->l2;
    j["bias"] = detail::doubles_to_b64(&lr->bias, 1);
    j["weights"] = detail::doubles_to_b64(lr->weights.data(), static_cast<std::size_t>(lr->dim()));
    j["feature_names"] = lr->feature_names;
  } else {
    const auto& m = std::get<MlpModel>(model);
    j["kind"] = "mlp";
    j["shape"] = {m.dim(), m.hidden(), 1};
    j["train_meta"] = meta_to_json(m.meta);
    j["l2"] = m.l2;
    // w1 is stored row-major (hidden unit by hidden unit).
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w1 = m.w1;
    j["w1"] = detail::doubles_to_b64(w1.data(), static_cast<std::size_t>(w1.size()));
    j["b1"] = detail::doubles_to_b64(m.b1.data(), static_cast<std::size_t>(m.b1.size()));
    j["w2"] = detail::doubles_to_b64(m.w2.data(), static_cast<std::size_t>(m.w2.size()));
    j["b2"] = detail::doubles_to_b64(&m.b2, 1);
    j["feature_names"] = m.feature_names;
  }
  return j.dump(2) + "\n";
}

inline AnyModel deserialize_model(std::string_view text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    auto names = j.value("feature_names", std::vector<std::string>{});
    if (kind == "logreg") {
      LogRegModel m;
      const auto d = j.at("shape").at(0).get<std::size_t>();
      const auto w = detail::b64_to_doubles(j.at("weights").get<std::string>(), d);
      m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(d));
      m.bias = detail::b64_to_doubles(j.at("bias").get<std::string>(), 1)[0];
      m.l2 = j.at("l2").get<double>();
      m.meta = meta_from_json(j.at("train_meta"));
      m.feature_names = std::move(names);
      return m;
    }
    if (kind == "mlp") {
      MlpModel m;
      const auto d = j.at("shape").at(0).get<std::size_t>();
      const auto h = j.at("shape").at(1).get<std::size_t>();
      const auto w1 = detail::b64_to_doubles(j.at("w1").get<std::string>(), h * d);
      m.w1 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w1.data(), static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(d));
      const auto b1 = detail::b64_to_doubles(j.at("b1").get<std::string>(), h);
      m.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<Eigen::Index>(h));
      const auto w2 = detail::b64_to_doubles(j.at("w2").get<std::string>(), h);
      m.w2 = Eigen::Map<const Eigen::VectorXd>(w2.data(), static_cast<Eigen::Index>(h));
      m.b2 = detail::b64_to_doubles(j.at("b2").get<std::string>(), 1)[0];
      m.l2 = j.at("l2").get<double>();
      m.meta = meta_from_json(j.at("train_meta"));
      m.feature_names = std::move(names);
      m.validate();
      return m;
    }
    fail("model: unknown kind '", kind, "'");
  } catch (const nlohmann::json::exception& e) {
    fail("model: malformed JSON (", e.what(), ")");
  }
}

inline void save_model(const AnyModel& m, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(m));
}

inline AnyModel load_model(const std::filesystem::path& path) {
  try {
    return deserialize_model(read_file(path));
  } catch (const Error& e) {
    fail(path.string(), ": ", e.what());
  }
}

}  // namespace accent
