#pragma once

// ValidationReport: the merged result of every analytic, its JSON form, the
// per-analytic CSV tables and the SVG figures rendered from those tables.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "btvalid/embed.hpp"
#include "btvalid/sentiment.hpp"
#include "btvalid/topics.hpp"

namespace btvalid::report {

inline constexpr std::string_view kToolkitVersion = "0.1.0";
inline constexpr double kUsdPerMillionCharacters = 20.0;

double estimate_cost_usd(std::size_t characters);

struct Metadata {
  std::string toolkit_version{kToolkitVersion};
  std::string prng;
  std::string provider;
  std::string pivot = "en";
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> languages;
  /// lang -> drop reason -> count, from each corpus's provenance.
  std::map<std::string, std::map<std::string, std::size_t>> exclusions;
  std::size_t characters_translated = 0;
  double estimated_cost_usd = 0.0;

  bool operator==(const Metadata&) const = default;
};

struct ValidationReport {
  Metadata metadata;
  std::optional<sentiment::SentimentReport> sentiment;
  std::optional<topics::TopicsReport> topics;
  std::optional<embed::EmbeddingReport> embedding;
  /// section -> "ok" | "skipped" | "failed: <reason>"
  std::map<std::string, std::string> status;

  /// Every requested section finished.
  bool complete() const;
  bool operator==(const ValidationReport&) const = default;
};

nlohmann::json to_json(const ValidationReport& r);
ValidationReport report_from_json(const nlohmann::json& j);

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

// ---------------------------------------------------------------- tables

/// Cells are final strings; plots render these exact strings.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Cell by row key (first column) and column name; nullopt if absent.
  std::optional<std::string> cell(std::string_view row_key, std::string_view column) const;
};

inline constexpr std::string_view kNull = "null";

std::string format_rate(double v);      // 4 decimals
std::string format_distance(double v);  // 3 decimals

/// lang, then n / median / hci99_low / hci99_high for original, pivot, back.
/// One row per language plus a "pooled" row.
Table sentiment_table(const ValidationReport& r);
/// lang, K, match_rate, null_mean, null_se, evaluated, stopwords_missing.
/// Rows keyed "<lang>@<K>"; "all@<K>" rows average the languages.
Table topics_table(const ValidationReport& r);
/// lang, mean_back_distance, min_baseline, mean_baseline, passes_min,
/// passes_mean, compared, excluded.
Table embedding_table(const ValidationReport& r);

std::string to_csv(const Table& t);
Table parse_csv(std::string_view csv);

/// sentiment.csv, topics.csv, embedding.csv and report.json in out_dir.
std::vector<std::filesystem::path> emit_tables(const ValidationReport& r, const std::filesystem::path& out_dir);

/// Five SVG figures built from the tables above. A figure whose section is
/// missing is skipped with a notice. Every plotted mark carries
/// data-table / data-row / data-col / data-value attributes naming its cell.
std::vector<std::filesystem::path> emit_plots(const ValidationReport& r, const std::filesystem::path& out_dir);

}  // namespace btvalid::report
