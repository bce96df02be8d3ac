// Copyright 2026 The hetgain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Experiment CSV interchange.
//
// Header: unit_id,arm,outcome,propensity,<covariate columns...>. Arms are
// written by name and resolved through the schema's arm list. Fields holding
// a comma, quote or newline are double-quoted. Numbers use the shortest
// round-trip form, so write_csv followed by load_csv is bit-exact.

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hetgain/dataset.hpp"
#include "hetgain/errors.hpp"
#include "hetgain/format.hpp"

namespace hetgain {

namespace csv {

inline constexpr std::string_view kFixedColumns[] = {"unit_id", "arm", "outcome", "propensity"};

/// Splits \p text into records of fields (RFC 4180 quoting). Records that
/// are completely empty are skipped.
inline std::vector<std::vector<std::string>> parse_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  std::size_t line = 1;
  auto end_record = [&] {
    if (any || !field.empty() || !fields.empty()) {
      fields.push_back(std::move(field));
      records.push_back(std::move(fields));
    }
    fields.clear();
    field.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", line);
  end_record();
  return records;
}

inline std::string quote(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv

inline std::string to_csv(const ExperimentDataset& data) {
  std::string out = "unit_id,arm,outcome,propensity";
  for (const auto& c : data.schema().covariates) {
    out += ',';
    out += csv::quote(c.name);
  }
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += csv::quote(data.unit_id(i));
    out += ',';
    out += csv::quote(data.arm_names()[static_cast<std::size_t>(data.arm(i))]);
    out += ',';
    out += format_double(data.outcome(i));
    out += ',';
    out += format_double(data.propensity(i));
    for (double x : data.covariates(i)) {
      out += ',';
      out += format_double(x);
    }
    out += '\n';
  }
  return out;
}

/// Parses CSV text against a known schema. Covariate columns may appear in
/// any order after the fixed four; every schema column must be present.
inline ExperimentDataset parse_csv(std::string_view text, const DatasetSchema& schema) {
  const auto records = csv::parse_records(text);
  if (records.empty()) throw ParseError("missing header row", 1);
  const auto& header = records.front();

  auto find = [&](std::string_view name) -> std::size_t {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return k;
    }
    throw ParseError("missing column '" + std::string(name) + "'", 1);
  };
  std::size_t fixed[4];
  for (std::size_t k = 0; k < 4; ++k) fixed[k] = find(csv::kFixedColumns[k]);
  std::vector<std::size_t> cov_cols;
  for (const auto& c : schema.covariates) cov_cols.push_back(find(c.name));

  ExperimentDataset data(schema);
  data.reserve(records.size() - 1);
  std::vector<double> x(schema.covariate_count());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t row = r + 1;
    if (rec.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(rec.size()), row);
    }
    auto number = [&](std::size_t col) {
      double v = 0.0;
      if (!parse_double(rec[col], v) || !std::isfinite(v)) {
        throw ParseError("column '" + header[col] + "': non-numeric or non-finite value '" + rec[col] + "'", row);
      }
      return v;
    };
    const int arm = schema.arm_index(rec[fixed[1]]);
    if (arm < 0) throw ParseError("unknown arm '" + rec[fixed[1]] + "'", row);
    const double outcome = number(fixed[2]);
    const double propensity = number(fixed[3]);
    if (!(propensity > 0.0 && propensity <= 1.0)) {
      throw ParseError("propensity must lie in (0, 1], got " + rec[fixed[3]], row);
    }
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      x[j] = number(cov_cols[j]);
      if (schema.covariates[j].kind == CovariateKind::kBinary && x[j] != 0.0 && x[j] != 1.0) {
        throw ParseError("binary covariate '" + schema.covariates[j].name + "' must be 0 or 1", row);
      }
    }
    data.add_row(rec[fixed[0]], x, arm, outcome, propensity);
  }
  return data;
}

/// Derives a schema from CSV text when none is declared: every non-fixed
/// column is a covariate (binary if all its values are 0 or 1), and arms are
/// listed in order of first appearance.
inline DatasetSchema infer_schema(std::string_view text) {
  const auto records = csv::parse_records(text);
  if (records.empty()) throw ParseError("missing header row", 1);
  const auto& header = records.front();
  std::size_t arm_col = header.size();
  std::vector<std::size_t> cov_cols;
  for (std::size_t k = 0; k < header.size(); ++k) {
    bool is_fixed = false;
    for (auto f : csv::kFixedColumns) is_fixed = is_fixed || header[k] == f;
    if (header[k] == "arm") arm_col = k;
    if (!is_fixed) cov_cols.push_back(k);
  }
  if (arm_col == header.size()) throw ParseError("missing column 'arm'", 1);

  DatasetSchema schema;
  std::set<std::string> seen;
  std::vector<bool> binary(cov_cols.size(), true);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) continue;  // reported by parse_csv
    if (seen.insert(rec[arm_col]).second) schema.arm_names.push_back(rec[arm_col]);
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      if (rec[cov_cols[j]] != "0" && rec[cov_cols[j]] != "1") binary[j] = false;
    }
  }
  if (schema.arm_names.empty()) throw ParseError("no data rows", 2);
  for (std::size_t j = 0; j < cov_cols.size(); ++j) {
    schema.covariates.push_back(
        {header[cov_cols[j]], binary[j] && records.size() > 1 ? CovariateKind::kBinary : CovariateKind::kContinuous});
  }
  return schema;
}

inline ExperimentDataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema) {
  return parse_csv(read_file(path), schema);
}

inline void write_csv(const ExperimentDataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, to_csv(data));
}

}  // namespace hetgain
