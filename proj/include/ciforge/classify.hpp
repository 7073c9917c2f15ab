#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ciforge/core.hpp"
#include "ciforge/gbt.hpp"
#include "ciforge/nn.hpp"

namespace ciforge {

/// Categorical columns up to this cardinality are one-hot encoded; wider
/// ones are passed through as ordinal codes.
inline constexpr int kOneHotCap = 32;

class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  explicit FeatureEncoder(std::vector<Column> cols) : cols_(std::move(cols)) {
    for (const auto& c : cols_) width_ += one_hot(c) ? static_cast<std::size_t>(c.cardinality) : 1;
  }

  std::size_t width() const { return width_; }
  const std::vector<Column>& columns() const { return cols_; }

  void encode_row(std::span<const double> row, double* out) const {
    std::size_t k = 0;
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      if (one_hot(cols_[j])) {
        const auto card = static_cast<std::size_t>(cols_[j].cardinality);
        for (std::size_t c = 0; c < card; ++c) out[k + c] = 0.0;
        out[k + static_cast<std::size_t>(row[j])] = 1.0;
        k += card;
      } else {
        out[k++] = row[j];
      }
    }
  }

  Matrix encode(const Dataset& d) const {
    Matrix m;
    m.cols = width_;
    m.values.resize(d.n_rows() * width_);
    for (std::size_t i = 0; i < d.n_rows(); ++i) encode_row(d.row(i), m.values.data() + i * width_);
    return m;
  }

 private:
  static bool one_hot(const Column& c) { return c.is_categorical() && c.cardinality <= kOneHotCap; }

  std::vector<Column> cols_;
  std::size_t width_ = 0;
};

enum class ClassifierKind { gbt, mlp, logreg };

inline const char* to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::gbt: return "gbt";
    case ClassifierKind::mlp: return "mlp";
    case ClassifierKind::logreg: return "logreg";
  }
  return "?";
}

inline ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "gbt") return ClassifierKind::gbt;
  if (s == "mlp") return ClassifierKind::mlp;
  if (s == "logreg") return ClassifierKind::logreg;
  throw Error(ErrorCode::invalid_argument, "unknown classifier '" + s + "' (expected gbt, mlp or logreg)");
}

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::gbt;
  gbt::GbtConfig gbt{};
  nn::MlpConfig mlp{{32}, 60, 32, 0.05, 0, nn::Loss::logistic};
  nn::MlpConfig logreg{{}, 200, 0, 0.5, 0, nn::Loss::logistic};  // batch 0 means full batch
};

/// A trained binary classifier together with the schema it was fitted on.
/// Scoring a dataset that still carries x columns against a model trained
/// without them drops the x columns first.
struct TrainedClassifier {
  ClassifierKind kind = ClassifierKind::gbt;
  Dataset schema;  // zero-row dataset with the training columns
  FeatureEncoder encoder;
  gbt::GbtModel gbt;
  nn::Mlp mlp;

  bool uses_x() const { return schema.n_x() > 0; }

  /// P(label = 1) per row.
  std::vector<double> scores(const Dataset& d) const {
    const Dataset& in = d;
    Dataset stripped;
    const Dataset* use = &in;
    if (!uses_x() && d.n_x() > 0) {
      stripped = d.without_x();
      use = &stripped;
    }
    if (!use->same_schema(schema))
      throw Error(ErrorCode::schema_mismatch, "scoring data does not match the classifier's training columns");
    std::vector<double> feat(encoder.width());
    std::vector<double> out(use->n_rows());
    for (std::size_t i = 0; i < use->n_rows(); ++i) {
      encoder.encode_row(use->row(i), feat.data());
      out[i] = kind == ClassifierKind::gbt ? gbt.predict(feat) : mlp.predict(feat)[0];
    }
    return out;
  }
};

namespace detail {

inline void require_both_classes(const LabeledDataset& train) {
  if (train.count(0) == 0 || train.count(1) == 0)
    throw Error(ErrorCode::single_class, "training data must contain both labels");
}

inline std::vector<double> label_vector(const LabeledDataset& l) {
  return {l.labels.begin(), l.labels.end()};
}

inline Matrix label_matrix(const LabeledDataset& l) { return {label_vector(l), 1}; }

inline TrainedClassifier prepare(ClassifierKind kind, const LabeledDataset& train, const LabeledDataset& val) {
  require_both_classes(train);
  if (!train.base.same_schema(val.base))
    throw Error(ErrorCode::schema_mismatch, "training and validation data differ in schema");
  TrainedClassifier c;
  c.kind = kind;
  c.schema = train.base.select_rows({});
  c.encoder = FeatureEncoder(train.base.all_cols());
  if (c.encoder.width() == 0) throw Error(ErrorCode::empty_data, "no feature columns to train on");
  return c;
}

inline TrainedClassifier mlp_like_train(ClassifierKind kind, const LabeledDataset& train, const LabeledDataset& val,
                                        nn::MlpConfig cfg) {
  auto c = prepare(kind, train, val);
  const Matrix x = c.encoder.encode(train.base);
  const Matrix t = label_matrix(train);
  if (cfg.batch == 0) cfg.batch = x.rows();
  cfg.loss = nn::Loss::logistic;
  if (val.n_rows() > 0) {
    const Matrix vx = c.encoder.encode(val.base);
    const Matrix vt = label_matrix(val);
    c.mlp = nn::mlp_fit(x, t, cfg, std::pair{&vx, &vt}).model;
  } else {
    c.mlp = nn::mlp_fit(x, t, cfg).model;
  }
  return c;
}

}  // namespace detail

/// Logistic-loss boosting; the number of trees kept is the round with the
/// lowest validation loss.
inline TrainedClassifier gbt_train(const LabeledDataset& train, const LabeledDataset& val, gbt::GbtConfig cfg) {
  auto c = detail::prepare(ClassifierKind::gbt, train, val);
  cfg.objective = gbt::Objective::logistic;
  const Matrix x = c.encoder.encode(train.base);
  const auto y = detail::label_vector(train);
  if (val.n_rows() > 0) {
    const Matrix vx = c.encoder.encode(val.base);
    const auto vy = detail::label_vector(val);
    c.gbt = gbt::gbt_fit(x, y, cfg, std::pair{&vx, std::span<const double>(vy)});
  } else {
    c.gbt = gbt::gbt_fit(x, y, cfg);
  }
  return c;
}

inline TrainedClassifier logreg_train(const LabeledDataset& train, const LabeledDataset& val, nn::MlpConfig cfg) {
  cfg.hidden.clear();
  return detail::mlp_like_train(ClassifierKind::logreg, train, val, std::move(cfg));
}

inline TrainedClassifier mlp_classifier_train(const LabeledDataset& train, const LabeledDataset& val,
                                              nn::MlpConfig cfg) {
  return detail::mlp_like_train(ClassifierKind::mlp, train, val, std::move(cfg));
}

inline TrainedClassifier train_classifier(const LabeledDataset& train, const LabeledDataset& val,
                                          const ClassifierConfig& cfg, std::uint64_t seed) {
  switch (cfg.kind) {
    case ClassifierKind::gbt: {
      auto g = cfg.gbt;
      g.seed = seed;
      return gbt_train(train, val, g);
    }
    case ClassifierKind::mlp: {
      auto m = cfg.mlp;
      m.seed = seed;
      return mlp_classifier_train(train, val, m);
    }
    case ClassifierKind::logreg: {
      auto m = cfg.logreg;
      m.seed = seed;
      return logreg_train(train, val, m);
    }
  }
  throw Error(ErrorCode::invalid_argument, "unknown classifier kind");
}

struct ClassifierError {
  double error_rate = 0;
  std::size_t n_test = 0;
  std::vector<int> losses;  // zero-one loss per test row
};

/// Zero-one loss of the 0.5-thresholded score.
inline ClassifierError classifier_error(const TrainedClassifier& f, const LabeledDataset& test) {
  if (test.n_rows() == 0) throw Error(ErrorCode::empty_test, "test split is empty");
  const auto s = f.scores(test.base);
  ClassifierError e;
  e.n_test = test.n_rows();
  e.losses.resize(e.n_test);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < e.n_test; ++i) {
    const int pred = s[i] > 0.5 ? 1 : 0;
    e.losses[i] = pred != test.labels[i] ? 1 : 0;
    wrong += static_cast<std::size_t>(e.losses[i]);
  }
  e.error_rate = static_cast<double>(wrong) / static_cast<double>(e.n_test);
  return e;
}

}  // namespace ciforge
