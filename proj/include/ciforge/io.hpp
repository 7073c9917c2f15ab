#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "ciforge/core.hpp"

namespace ciforge {

/// A named-column numeric table, the untyped form of a CSV file before the
/// columns are assigned x/y/z roles.
struct Table {
  std::vector<Column> columns;
  std::vector<double> data;  // row-major

  std::size_t n_cols() const { return columns.size(); }
  std::size_t n_rows() const { return columns.empty() ? 0 : data.size() / columns.size(); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    return std::nullopt;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw Error(ErrorCode::io, "line " + std::to_string(line_no) + ": cannot parse '" + s + "' as a number");
  return v;
}

}  // namespace detail

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Column sidecar: {"columns": {"z_1": {"kind": "categorical", "cardinality": 3}}}

using ColumnOverrides = std::map<std::string, Column>;

inline ColumnOverrides parse_sidecar(const nlohmann::json& j) {
  ColumnOverrides out;
  if (!j.contains("columns")) return out;
  for (const auto& [name, spec] : j.at("columns").items()) {
    const std::string kind = spec.value("kind", "continuous");
    if (kind == "categorical") {
      const int card = spec.at("cardinality").get<int>();
      out[name] = Column::categorical(name, card);
    } else if (kind == "continuous") {
      out[name] = Column::continuous(name);
    } else {
      throw Error(ErrorCode::io, "column '" + name + "' has unknown kind '" + kind + "'");
    }
  }
  return out;
}

inline nlohmann::json sidecar_json(const std::vector<Column>& cols) {
  nlohmann::json columns = nlohmann::json::object();
  for (const auto& c : cols) {
    if (c.is_categorical())
      columns[c.name] = {{"kind", "categorical"}, {"cardinality", c.cardinality}};
  }
  return {{"columns", columns}};
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io, path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
}

/// Default sidecar location for a CSV path: data.csv -> data.schema.json.
inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".schema.json");
  return p;
}

// ---------------------------------------------------------------------------
// Tables.

inline Table read_table(std::istream& in, const ColumnOverrides& overrides = {}) {
  std::string line;
  std::size_t line_no = 0;
  Table t;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (line_no == 0 || detail::trim(line).empty()) throw Error(ErrorCode::io, "empty CSV input");
  for (auto& name : detail::split_csv_line(line)) {
    auto it = overrides.find(name);
    t.columns.push_back(it != overrides.end() ? it->second : Column::continuous(name));
  }
  for (const auto& [name, col] : overrides)
    if (!t.find(name)) throw Error(ErrorCode::unknown_column, "sidecar names missing column '" + name + "'");

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != t.n_cols())
      throw Error(ErrorCode::io, "line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(t.n_cols()) + " fields, got " + std::to_string(fields.size()));
    for (const auto& f : fields) t.data.push_back(detail::parse_double(f, line_no));
  }
  return t;
}

inline void write_table(std::ostream& out, const std::vector<Column>& cols, std::span<const double> data) {
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c].name;
  out << '\n';
  const std::size_t w = cols.size();
  for (std::size_t k = 0; k < data.size(); ++k) {
    out << format_double(data[k]) << ((k + 1) % w == 0 ? '\n' : ',');
  }
}

/// Reads a CSV plus its optional sidecar (absent sidecar: all continuous).
inline Table read_table_file(const std::filesystem::path& csv, std::optional<std::filesystem::path> sidecar = {}) {
  ColumnOverrides overrides;
  const auto side = sidecar.value_or(sidecar_path(csv));
  if (sidecar && !std::filesystem::exists(*sidecar))
    throw Error(ErrorCode::io, "sidecar not found: " + sidecar->string());
  if (std::filesystem::exists(side)) overrides = parse_sidecar(read_json_file(side));
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::io, "cannot open " + csv.string());
  return read_table(in, overrides);
}

// ---------------------------------------------------------------------------
// Dataset CSV: header names carry an x_/y_/z_ role prefix.

inline Dataset dataset_from_table(const Table& t) {
  std::vector<std::size_t> xs, ys, zs;
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    const auto& name = t.columns[c].name;
    if (name.rfind("x_", 0) == 0) xs.push_back(c);
    else if (name.rfind("y_", 0) == 0) ys.push_back(c);
    else if (name.rfind("z_", 0) == 0) zs.push_back(c);
    else throw Error(ErrorCode::io, "column '" + name + "' lacks an x_/y_/z_ prefix");
  }
  if (xs.empty()) throw Error(ErrorCode::invalid_dataset, "dataset CSV needs at least one x_ column");
  std::vector<std::size_t> order = xs;
  order.insert(order.end(), ys.begin(), ys.end());
  order.insert(order.end(), zs.begin(), zs.end());
  std::vector<double> data;
  data.reserve(t.data.size());
  for (std::size_t i = 0; i < t.n_rows(); ++i)
    for (std::size_t c : order) data.push_back(t.data[i * t.n_cols() + c]);
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<Column> out;
    for (std::size_t c : idx) out.push_back(t.columns[c]);
    return out;
  };
  return Dataset(pick(xs), pick(ys), pick(zs), std::move(data));
}

inline Dataset read_dataset(std::istream& in, const ColumnOverrides& overrides = {}) {
  return dataset_from_table(read_table(in, overrides));
}

inline Dataset read_dataset_file(const std::filesystem::path& csv, std::optional<std::filesystem::path> sidecar = {}) {
  return dataset_from_table(read_table_file(csv, sidecar));
}

inline void write_dataset(std::ostream& out, const Dataset& d) { write_table(out, d.all_cols(), d.data()); }

/// Writes data.csv and, when any column is categorical, data.schema.json.
inline void write_dataset_file(const std::filesystem::path& csv, const Dataset& d) {
  std::ostringstream body;
  write_dataset(body, d);
  write_text_file(csv, body.str());
  const auto cols = d.all_cols();
  const bool any_cat = std::any_of(cols.begin(), cols.end(), [](const Column& c) { return c.is_categorical(); });
  if (any_cat) write_text_file(sidecar_path(csv), sidecar_json(cols).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Relation CSV: X,Y,Z,label with Z a ';'-separated list and label CI|NOTCI.

struct Relation {
  std::string x;
  std::string y;
  std::vector<std::string> z;
  bool ci = false;
};

inline std::vector<Relation> read_relations(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::io, "empty relation file");
  auto header = detail::split_csv_line(line);
  auto col = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(ErrorCode::io, "relation file lacks column '" + std::string(name) + "'");
  };
  const std::size_t cx = col("X"), cy = col("Y"), cz = col("Z"), cl = col("label");
  std::vector<Relation> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw Error(ErrorCode::io, "relation line " + std::to_string(line_no) + " has the wrong field count");
    Relation r;
    r.x = f[cx];
    r.y = f[cy];
    std::stringstream zs(f[cz]);
    std::string item;
    while (std::getline(zs, item, ';')) {
      auto name = detail::trim(item);
      if (!name.empty()) r.z.push_back(name);
    }
    if (f[cl] == "CI") r.ci = true;
    else if (f[cl] == "NOTCI") r.ci = false;
    else throw Error(ErrorCode::io, "relation line " + std::to_string(line_no) + ": label must be CI or NOTCI");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<Relation> read_relations_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return read_relations(in);
}

inline void write_relations(std::ostream& out, const std::vector<Relation>& rels) {
  out << "X,Y,Z,label\n";
  for (const auto& r : rels) {
    out << r.x << ',' << r.y << ',';
    for (std::size_t i = 0; i < r.z.size(); ++i) out << (i ? ";" : "") << r.z[i];
    out << ',' << (r.ci ? "CI" : "NOTCI") << '\n';
  }
}

/// Projects a table onto one relation: x = X, y = Y, z = the Z list.
inline Dataset project_relation(const Table& t, const Relation& r) {
  auto idx = [&](const std::string& name) {
    auto i = t.find(name);
    if (!i) throw Error(ErrorCode::unknown_column, "relation references unknown column '" + name + "'");
    return *i;
  };
  std::vector<std::size_t> order{idx(r.x), idx(r.y)};
  for (const auto& z : r.z) order.push_back(idx(z));
  std::vector<double> data;
  data.reserve(t.n_rows() * order.size());
  for (std::size_t i = 0; i < t.n_rows(); ++i)
    for (std::size_t c : order) data.push_back(t.data[i * t.n_cols() + c]);
  std::vector<Column> zc;
  for (std::size_t k = 2; k < order.size(); ++k) zc.push_back(t.columns[order[k]]);
  return Dataset({t.columns[order[0]]}, {t.columns[order[1]]}, std::move(zc), std::move(data));
}

}  // namespace ciforge
