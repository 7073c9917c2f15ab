#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ciforge {

enum class ErrorCode {
  invalid_argument,
  invalid_dataset,
  too_few_rows,
  size_out_of_range,
  support_mismatch,
  zero_marginal,
  invalid_conditional,
  non_finite_loss,
  empty_data,
  schema_mismatch,
  degenerate_range,
  single_class,
  empty_test,
  unknown_column,
  mimic_support,
  io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::invalid_dataset: return "InvalidDataset";
    case ErrorCode::too_few_rows: return "TooFewRows";
    case ErrorCode::size_out_of_range: return "SizeOutOfRange";
    case ErrorCode::support_mismatch: return "SupportMismatch";
    case ErrorCode::zero_marginal: return "ZeroMarginal";
    case ErrorCode::invalid_conditional: return "InvalidConditional";
    case ErrorCode::non_finite_loss: return "NonFiniteLoss";
    case ErrorCode::empty_data: return "EmptyData";
    case ErrorCode::schema_mismatch: return "SchemaMismatch";
    case ErrorCode::degenerate_range: return "DegenerateRange";
    case ErrorCode::single_class: return "SingleClass";
    case ErrorCode::empty_test: return "EmptyTest";
    case ErrorCode::unknown_column: return "UnknownColumn";
    case ErrorCode::mimic_support: return "MimicSupportWarning";
    case ErrorCode::io: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Randomness. A single 64-bit seed is expanded into independent streams by
// hashing (seed, stream, index) with splitmix64; each stream feeds its own
// mt19937_64.

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  split = 1,
  mimic_fit,
  mimic_noise,
  tvs,
  classifier_f1,
  classifier_f2,
  datagen,
  benchmark,
  relations,
  oracle,
  nn,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

// Fisher-Yates driven by raw 64-bit draws so the permutation does not depend
// on the standard library's distribution implementation.
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

/// Row-major dense matrix of features or targets.
struct Matrix {
  std::vector<double> values;
  std::size_t cols = 0;

  std::size_t rows() const { return cols == 0 ? 0 : values.size() / cols; }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(values).subspan(i * cols, cols); }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

// ---------------------------------------------------------------------------
// Columns and datasets.

enum class ColumnKind { continuous, categorical };
enum class Role { x, y, z };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  int cardinality = 0;  // categorical only

  static Column continuous(std::string name) { return {std::move(name), ColumnKind::continuous, 0}; }
  static Column categorical(std::string name, int cardinality) {
    return {std::move(name), ColumnKind::categorical, cardinality};
  }

  bool is_categorical() const { return kind == ColumnKind::categorical; }
  friend bool operator==(const Column&, const Column&) = default;
};

/// n rows of (x, y, z) blocks. Storage is row-major with the columns ordered
/// x block, then y block, then z block. Immutable once built.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<Column> x_cols, std::vector<Column> y_cols, std::vector<Column> z_cols,
          std::vector<double> data)
      : x_(std::move(x_cols)), y_(std::move(y_cols)), z_(std::move(z_cols)), data_(std::move(data)) {
    validate();
  }

  std::size_t n_rows() const { return n_cols() == 0 ? 0 : data_.size() / n_cols(); }
  std::size_t n_x() const { return x_.size(); }
  std::size_t n_y() const { return y_.size(); }
  std::size_t n_z() const { return z_.size(); }
  std::size_t n_cols() const { return x_.size() + y_.size() + z_.size(); }

  const std::vector<Column>& x_cols() const { return x_; }
  const std::vector<Column>& y_cols() const { return y_; }
  const std::vector<Column>& z_cols() const { return z_; }
  const std::vector<Column>& cols(Role r) const {
    return r == Role::x ? x_ : (r == Role::y ? y_ : z_);
  }

  std::vector<Column> all_cols() const {
    std::vector<Column> out = x_;
    out.insert(out.end(), y_.begin(), y_.end());
    out.insert(out.end(), z_.begin(), z_.end());
    return out;
  }

  /// Offset of a role's first column within a row.
  std::size_t offset(Role r) const {
    switch (r) {
      case Role::x: return 0;
      case Role::y: return x_.size();
      case Role::z: return x_.size() + y_.size();
    }
    return 0;
  }

  std::span<const double> data() const { return data_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * n_cols(), n_cols());
  }
  double at(std::size_t i, std::size_t col) const { return data_[i * n_cols() + col]; }
  double at(std::size_t i, Role r, std::size_t j) const { return at(i, offset(r) + j); }

  /// Row-major block of one role: n_rows x cols(r).size().
  std::vector<double> block(Role r) const {
    const std::size_t w = cols(r).size();
    const std::size_t off = offset(r);
    std::vector<double> out;
    out.reserve(n_rows() * w);
    for (std::size_t i = 0; i < n_rows(); ++i)
      for (std::size_t j = 0; j < w; ++j) out.push_back(at(i, off + j));
    return out;
  }

  Dataset select_rows(std::span<const std::size_t> rows) const {
    std::vector<double> out;
    out.reserve(rows.size() * n_cols());
    for (std::size_t r : rows) {
      if (r >= n_rows()) throw Error(ErrorCode::invalid_argument, "row index out of range");
      auto src = row(r);
      out.insert(out.end(), src.begin(), src.end());
    }
    return Dataset(x_, y_, z_, std::move(out));
  }

  /// Same rows with the x block removed.
  Dataset without_x() const {
    if (x_.empty()) return *this;
    std::vector<double> out;
    out.reserve(n_rows() * (n_cols() - n_x()));
    for (std::size_t i = 0; i < n_rows(); ++i) {
      auto src = row(i);
      out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(n_x()), src.end());
    }
    return Dataset({}, y_, z_, std::move(out));
  }

  /// Same rows with the y block replaced (row-major n_rows x n_y); column
  /// descriptors may change kind but not count.
  Dataset with_y(std::vector<Column> y_cols, std::span<const double> y_block) const {
    if (y_cols.size() != n_y() || y_block.size() != n_rows() * n_y())
      throw Error(ErrorCode::schema_mismatch, "replacement y block has the wrong shape");
    std::vector<double> out(data_);
    const std::size_t off = offset(Role::y);
    for (std::size_t i = 0; i < n_rows(); ++i)
      for (std::size_t j = 0; j < n_y(); ++j) out[i * n_cols() + off + j] = y_block[i * n_y() + j];
    return Dataset(x_, std::move(y_cols), z_, std::move(out));
  }

  bool same_schema(const Dataset& other) const {
    return x_ == other.x_ && y_ == other.y_ && z_ == other.z_;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  void validate() const {
    if (y_.empty()) throw Error(ErrorCode::invalid_dataset, "dataset needs at least one y column");
    if (n_cols() == 0 || data_.size() % n_cols() != 0)
      throw Error(ErrorCode::invalid_dataset, "data size is not a multiple of the column count");
    const auto cs = all_cols();
    for (std::size_t c = 0; c < cs.size(); ++c) {
      for (std::size_t d = c + 1; d < cs.size(); ++d)
        if (cs[c].name == cs[d].name)
          throw Error(ErrorCode::invalid_dataset, "duplicate column name '" + cs[c].name + "'");
      if (cs[c].is_categorical() && cs[c].cardinality < 1)
        throw Error(ErrorCode::invalid_dataset, "categorical column '" + cs[c].name + "' needs cardinality >= 1");
    }
    const std::size_t w = n_cols();
    for (std::size_t k = 0; k < data_.size(); ++k) {
      const double v = data_[k];
      const Column& c = cs[k % w];
      if (!std::isfinite(v))
        throw Error(ErrorCode::invalid_dataset, "non-finite value in column '" + c.name + "'");
      if (c.is_categorical() && (v != std::floor(v) || v < 0 || v >= c.cardinality))
        throw Error(ErrorCode::invalid_dataset, "categorical column '" + c.name + "' holds an invalid code");
    }
  }

  std::vector<Column> x_, y_, z_;
  std::vector<double> data_;
};

/// Rows labeled 1 came from the untouched joint sample, rows labeled 0 from
/// the mimicked sample.
struct LabeledDataset {
  enum class Origin : std::uint8_t { mimic = 0, joint = 1 };

  Dataset base;
  std::vector<int> labels;
  std::vector<Origin> origin;      // provenance per row
  std::vector<std::size_t> source; // row index in the origin dataset

  std::size_t n_rows() const { return base.n_rows(); }

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }

  LabeledDataset select_rows(std::span<const std::size_t> rows) const {
    LabeledDataset out;
    out.base = base.select_rows(rows);
    for (std::size_t r : rows) {
      out.labels.push_back(labels[r]);
      out.origin.push_back(origin[r]);
      out.source.push_back(source[r]);
    }
    return out;
  }

  void validate() const {
    if (labels.size() != base.n_rows() || origin.size() != labels.size() || source.size() != labels.size())
      throw Error(ErrorCode::invalid_dataset, "label vectors do not match the row count");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::invalid_dataset, "labels must be 0 or 1");
      if (labels[i] != static_cast<int>(origin[i]))
        throw Error(ErrorCode::invalid_dataset, "label disagrees with row provenance");
    }
  }
};

/// Joint rows labeled 1 followed by mimicked rows labeled 0.
inline LabeledDataset label_union(const Dataset& joint, const Dataset& mimicked) {
  if (!joint.same_schema(mimicked))
    throw Error(ErrorCode::schema_mismatch, "joint and mimicked samples differ in schema");
  std::vector<double> data(joint.data().begin(), joint.data().end());
  data.insert(data.end(), mimicked.data().begin(), mimicked.data().end());
  LabeledDataset out;
  out.base = Dataset(joint.x_cols(), joint.y_cols(), joint.z_cols(), std::move(data));
  for (std::size_t i = 0; i < joint.n_rows(); ++i) {
    out.labels.push_back(1);
    out.origin.push_back(LabeledDataset::Origin::joint);
    out.source.push_back(i);
  }
  for (std::size_t i = 0; i < mimicked.n_rows(); ++i) {
    out.labels.push_back(0);
    out.origin.push_back(LabeledDataset::Origin::mimic);
    out.source.push_back(i);
  }
  return out;
}

inline LabeledDataset strip_x(const LabeledDataset& l) {
  LabeledDataset out = l;
  out.base = l.base.without_x();
  return out;
}

// ---------------------------------------------------------------------------
// Splits.

struct TvsFractions {
  double train = 0.5;
  double validation = 0.25;
  double test = 0.25;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::size_t> d1, d2, d3;
  TvsFractions tvs;
};

inline constexpr std::size_t kMinSplitRows = 9;

/// Random partition into thirds; remainder rows go to d1 first, then d2.
inline SplitPlan split_three_way(std::size_t n_rows, std::uint64_t seed, TvsFractions tvs = {}) {
  if (n_rows < kMinSplitRows)
    throw Error(ErrorCode::too_few_rows, "three-way split needs at least 9 rows, got " + std::to_string(n_rows));
  std::vector<std::size_t> perm(n_rows);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, Stream::split);
  shuffle_in_place(perm, rng);

  const std::size_t base = n_rows / 3;
  const std::size_t rem = n_rows % 3;
  const std::size_t s1 = base + (rem >= 1 ? 1 : 0);
  const std::size_t s2 = base + (rem >= 2 ? 1 : 0);

  SplitPlan plan;
  plan.seed = seed;
  plan.tvs = tvs;
  plan.d1.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(s1));
  plan.d2.assign(perm.begin() + static_cast<std::ptrdiff_t>(s1), perm.begin() + static_cast<std::ptrdiff_t>(s1 + s2));
  plan.d3.assign(perm.begin() + static_cast<std::ptrdiff_t>(s1 + s2), perm.end());
  return plan;
}

inline SplitPlan split_three_way(const Dataset& d, std::uint64_t seed, TvsFractions tvs = {}) {
  return split_three_way(d.n_rows(), seed, tvs);
}

struct TvsSplit {
  std::vector<std::size_t> train, validation, test;
};

/// Label-stratified train/validation/test split. Every part receives at
/// least one row of each class; indices in each part are ascending.
inline TvsSplit stratified_split(std::span<const int> labels, TvsFractions f, std::uint64_t seed) {
  if (f.train <= 0 || f.validation <= 0 || f.test <= 0 ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9)
    throw Error(ErrorCode::invalid_argument, "train/validation/test fractions must be positive and sum to 1");
  TvsSplit out;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    if (idx.size() < 3)
      throw Error(ErrorCode::single_class, "each class needs at least 3 rows for a stratified split");
    Rng rng = make_rng(seed, Stream::tvs, static_cast<std::uint64_t>(cls));
    shuffle_in_place(idx, rng);
    const std::size_t n = idx.size();
    std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n))));
    std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(f.validation * static_cast<double>(n))));
    while (n_train + n_val > n - 1) {
      if (n_train > 1) --n_train; else --n_val;
    }
    auto b = idx.begin();
    out.train.insert(out.train.end(), b, b + static_cast<std::ptrdiff_t>(n_train));
    out.validation.insert(out.validation.end(), b + static_cast<std::ptrdiff_t>(n_train),
                          b + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.insert(out.test.end(), b + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace ciforge
