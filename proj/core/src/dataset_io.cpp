#include "gte/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "gte/error.hpp"
#include "json.hpp"

namespace gte {
namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, std::size_t line, const std::string& column) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last) {
    fail(ErrorCode::Parse, "line " + std::to_string(line) + ": column '" + column +
                               "' is not a number: '" + text + "'");
  }
  return v;
}

// Columns named <prefix><k> for k = 1, 2, ..., sorted by k.
std::vector<std::pair<int, std::size_t>> numbered_columns(const std::vector<std::string>& header,
                                                          const std::string& prefix) {
  std::vector<std::pair<int, std::size_t>> out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) continue;
    const std::string rest = h.substr(prefix.size());
    if (!std::all_of(rest.begin(), rest.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      continue;
    }
    out.emplace_back(std::stoi(rest), c);
  }
  std::sort(out.begin(), out.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].first != static_cast<int>(k + 1)) {
      fail(ErrorCode::MissingColumn, "column " + prefix + std::to_string(k + 1) + " missing");
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

SchemaConfig schema_from_json(const std::string& json_text) {
  SchemaConfig s;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("schema JSON: ") + e.what());
  }
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "scalar") s.kind = SchemaConfig::Kind::Scalar;
    else if (k == "ranked") s.kind = SchemaConfig::Kind::Ranked;
    else if (k == "auto") s.kind = SchemaConfig::Kind::Auto;
    else fail(ErrorCode::InvalidConfig, "schema kind must be scalar|ranked|auto");
  }
  if (j.contains("treatment")) s.treatment = j.at("treatment").get<std::string>();
  if (j.contains("bid")) s.bid = j.at("bid").get<std::string>();
  if (j.contains("id")) s.id = j.at("id").get<std::string>();
  if (j.contains("tag")) s.tag = j.at("tag").get<std::string>();
  if (j.contains("outcome")) s.outcome = j.at("outcome").get<std::string>();
  if (j.contains("covariates")) s.covariates = j.at("covariates").get<std::vector<std::string>>();
  if (j.contains("covariate_prefix")) s.covariate_prefix = j.at("covariate_prefix").get<std::string>();
  if (j.contains("rank_prefix")) s.rank_prefix = j.at("rank_prefix").get<std::string>();
  if (j.contains("score_prefix")) s.score_prefix = j.at("score_prefix").get<std::string>();
  return s;
}

SchemaConfig load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open schema file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return schema_from_json(ss.str());
}

MarketDataset read_dataset(std::istream& in, const SchemaConfig& schema) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::EmptyDataset, "missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col.emplace(header[c], c);
  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = col.find(name);
    if (it == col.end()) return std::nullopt;
    return it->second;
  };
  auto require = [&](const std::string& name) -> std::size_t {
    auto c = find(name);
    if (!c) fail(ErrorCode::MissingColumn, "required column '" + name + "' not in header");
    return *c;
  };

  const std::size_t w_col = require(schema.treatment);
  const auto id_col = find(schema.id.value_or("id"));
  const auto tag_col = find(schema.tag.value_or("tag"));
  const auto y_col = find(schema.outcome.value_or("y"));
  if (schema.id && !id_col) require(*schema.id);
  if (schema.tag && !tag_col) require(*schema.tag);
  if (schema.outcome && !y_col) require(*schema.outcome);

  SchemaConfig::Kind kind = schema.kind;
  if (kind == SchemaConfig::Kind::Auto) {
    if (find(schema.bid)) kind = SchemaConfig::Kind::Scalar;
    else if (!numbered_columns(header, schema.score_prefix).empty()) kind = SchemaConfig::Kind::Ranked;
    else fail(ErrorCode::MissingColumn, "neither a '" + schema.bid + "' column nor " +
                                            schema.score_prefix + "* columns found");
  }

  std::vector<std::size_t> x_cols;
  std::vector<std::string> x_names;
  if (!schema.covariates.empty()) {
    for (const auto& name : schema.covariates) {
      x_cols.push_back(require(name));
      x_names.push_back(name);
    }
  } else {
    for (auto [k, c] : numbered_columns(header, schema.covariate_prefix)) {
      x_cols.push_back(c);
      x_names.push_back(header[c]);
    }
  }

  std::size_t bid_col = 0;
  std::vector<std::size_t> rank_cols, score_cols;
  std::size_t items = 1;
  if (kind == SchemaConfig::Kind::Scalar) {
    bid_col = require(schema.bid);
  } else {
    for (auto [k, c] : numbered_columns(header, schema.score_prefix)) score_cols.push_back(c);
    for (auto [k, c] : numbered_columns(header, schema.rank_prefix)) rank_cols.push_back(c);
    if (score_cols.empty()) fail(ErrorCode::MissingColumn, "no " + schema.score_prefix + "* columns");
    if (rank_cols.empty()) fail(ErrorCode::MissingColumn, "no " + schema.rank_prefix + "* columns");
    items = score_cols.size();
  }

  std::vector<MarketObservation> obs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line) == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(header.size()) + " fields, got " +
                                 std::to_string(f.size()));
    }
    MarketObservation o;
    o.id = id_col ? trim(f[*id_col]) : std::to_string(obs.size() + 1);
    const double w = parse_double(f[w_col], line_no, schema.treatment);
    if (w != 0.0 && w != 1.0) {
      fail(ErrorCode::NonBinaryTreatment, "line " + std::to_string(line_no) + ": treatment '" +
                                              trim(f[w_col]) + "' is not 0 or 1");
    }
    o.treatment = static_cast<int>(w);
    if (tag_col) o.tag = static_cast<int>(parse_double(f[*tag_col], line_no, header[*tag_col]));
    if (y_col && !trim(f[*y_col]).empty()) o.outcome_cached = parse_double(f[*y_col], line_no, header[*y_col]);
    for (std::size_t c = 0; c < x_cols.size(); ++c) {
      o.covariates.push_back(parse_double(f[x_cols[c]], line_no, x_names[c]));
    }
    try {
      if (kind == SchemaConfig::Kind::Scalar) {
        o.bid = ScalarBid{parse_double(f[bid_col], line_no, schema.bid)};
      } else {
        RankedBid r;
        for (std::size_t c : rank_cols) {
          const std::string cell = trim(f[c]);
          if (cell.empty()) continue;
          const double item = parse_double(cell, line_no, header[c]);
          if (item != static_cast<int>(item)) {
            fail(ErrorCode::Parse, "rank entry '" + cell + "' is not an integer");
          }
          r.ranking.push_back(static_cast<int>(item) - 1);
        }
        for (std::size_t c : score_cols) r.scores.push_back(parse_double(f[c], line_no, header[c]));
        o.bid = std::move(r);
      }
      validate_bid(o.bid, items);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Parse && std::string(e.what()).find("line ") != std::string::npos) throw;
      fail(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
    obs.push_back(std::move(o));
  }
  if (obs.empty()) fail(ErrorCode::EmptyDataset, "no data rows");
  return MarketDataset(std::move(obs), items);
}

MarketDataset load_dataset(const std::string& path, const SchemaConfig& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open dataset " + path);
  return read_dataset(in, schema);
}

void write_dataset(std::ostream& out, const MarketDataset& data) {
  const bool tags = std::any_of(data.observations().begin(), data.observations().end(),
                                [](const auto& o) { return o.tag != 0; });
  const bool outcomes = std::any_of(data.observations().begin(), data.observations().end(),
                                    [](const auto& o) { return o.outcome_cached.has_value(); });
  const std::size_t J = data.items();
  out << "id,w";
  if (tags) out << ",tag";
  if (outcomes) out << ",y";
  if (data.bid_kind() == BidKind::Scalar) {
    out << ",bid";
  } else {
    for (std::size_t j = 1; j <= J; ++j) out << ",rank_" << j;
    for (std::size_t j = 1; j <= J; ++j) out << ",score_" << j;
  }
  for (std::size_t k = 1; k <= data.covariate_dim(); ++k) out << ",x" << k;
  out << '\n';

  for (const auto& o : data.observations()) {
    out << o.id << ',' << o.treatment;
    if (tags) out << ',' << o.tag;
    if (outcomes) out << ',' << (o.outcome_cached ? format_double(*o.outcome_cached) : "");
    if (const auto* s = std::get_if<ScalarBid>(&o.bid)) {
      out << ',' << format_double(s->value);
    } else {
      const auto& r = std::get<RankedBid>(o.bid);
      for (std::size_t j = 0; j < J; ++j) {
        out << ',';
        if (j < r.ranking.size()) out << r.ranking[j] + 1;
      }
      for (double s : r.scores) out << ',' << format_double(s);
    }
    for (double x : o.covariates) out << ',' << format_double(x);
    out << '\n';
  }
}

void save_dataset(const std::string& path, const MarketDataset& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write dataset " + path);
  write_dataset(out, data);
}

}  // namespace gte
