#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gte/market_data.hpp"

namespace gte {

// Maps logical fields to CSV columns. Unset optional columns are picked up by
// their default names (`id`, `tag`, `y`) when present in the header.
struct SchemaConfig {
  enum class Kind { Auto, Scalar, Ranked };

  Kind kind = Kind::Auto;
  std::string treatment = "w";
  std::string bid = "bid";
  std::optional<std::string> id;
  std::optional<std::string> tag;
  std::optional<std::string> outcome;
  // Empty means every `<covariate_prefix><k>` column, ordered by k.
  std::vector<std::string> covariates;
  std::string covariate_prefix = "x";
  std::string rank_prefix = "rank_";
  std::string score_prefix = "score_";
};

SchemaConfig schema_from_json(const std::string& json_text);
SchemaConfig load_schema(const std::string& path);

MarketDataset read_dataset(std::istream& in, const SchemaConfig& schema = {});
MarketDataset load_dataset(const std::string& path, const SchemaConfig& schema = {});

// Writes the canonical column layout accepted by the default schema. Values
// are printed with 17 significant digits so a reload is exact.
void write_dataset(std::ostream& out, const MarketDataset& data);
void save_dataset(const std::string& path, const MarketDataset& data);

// Minimal RFC-4180 style field splitter (quotes, doubled quotes, CR stripping).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace gte
