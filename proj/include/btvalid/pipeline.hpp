#pragma once

// End-to-end orchestration: ingest, clean, sample, round-trip translate,
// analytics, merged report. Every stage checkpoints under out_dir and is
// skipped on rerun when its content-hashed marker still matches.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "btvalid/corpus.hpp"
#include "btvalid/report.hpp"

namespace btvalid::pipeline {

struct DatasetSpec {
  std::filesystem::path path;
  std::string adapter = "jsonl";
  std::vector<std::string> languages;  // empty = every non-pivot language
};

struct ProviderConfig {
  std::string name = "identity";  // google | identity | noise
  double noise_rate = 0.0;
  std::string endpoint;
  std::string api_key;
  std::size_t batch_size = 100;
  std::size_t max_in_flight = 4;
  std::optional<std::filesystem::path> cache_dir;  // default <out_dir>/cache
};

struct Seeds {
  std::optional<std::uint64_t> sample, noise, bootstrap, topics, peers;
};

/// Config file layout (JSON; relative paths resolve against the file):
///   datasets: [{path, adapter, languages}], adapters_file, pivot,
///   provider: {name, noise_rate, endpoint, api_key, batch_size, max_in_flight, cache_dir},
///   sample_sizes: {lang | "*": n}, analytics: {sentiment, topics, embedding},
///   lexicons_dir, stopwords_dir, embeddings_dir,
///   ks, alpha, beta, iterations, replicates, permutations, peers,
///   neutral_exclusion, cycles,
///   seeds: {sample, noise, bootstrap, topics, peers}, out_dir
struct PipelineConfig {
  std::vector<DatasetSpec> datasets;
  std::optional<std::filesystem::path> adapters_file;
  std::string pivot = "en";
  ProviderConfig provider;
  std::map<std::string, std::size_t> sample_sizes;
  bool run_sentiment = true;
  bool run_topics = true;
  bool run_embedding = true;
  std::optional<std::filesystem::path> lexicons_dir;
  std::optional<std::filesystem::path> stopwords_dir;
  std::optional<std::filesystem::path> embeddings_dir;
  std::vector<int> ks{2, 5, 10, 15, 20, 50, 100, 150, 200};
  double alpha = 0.1;
  double beta = 0.1;
  int iterations = 5;
  int replicates = 1000;
  int permutations = 1000;
  std::size_t peers = 5000;
  std::string neutral_exclusion = "both";
  int cycles = 1;
  Seeds seeds;
  std::filesystem::path out_dir = "btvalid-out";

  /// Throws ConfigError on missing paths, missing seeds, bad values or the
  /// pivot listed among analyzed languages.
  void validate() const;
  std::optional<std::size_t> sample_size(const std::string& lang) const;
};

/// `base` resolves relative paths.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
PipelineConfig load_config(const std::filesystem::path& path);
/// Applies "a.b=value" overrides to raw config JSON. Values parse as JSON when
/// they can, else as strings.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides);

enum ExitCode : int { kOk = 0, kConfigError = 1, kProviderFailure = 2, kPartialFailure = 3 };

struct RunResult {
  report::ValidationReport report;
  int exit_code = kOk;
};

/// Layout under out_dir:
///   corpora/{lang}.{original|pivot|back|cycleN}.jsonl (+ provenance sidecars)
///   state/{lang}.translate.done, state/{analytic}.done
///   reports/{sentiment,topics,embedding}.json, report.json, *.csv, *.svg
RunResult run_pipeline(const PipelineConfig& config);

// ---------------------------------------------------------------- stage helpers shared with the CLI

/// Reads every "<lang>.original.jsonl" in dir with its pivot file and either
/// the back file or, given `cycle`, "<lang>.cycle<N>.jsonl" as the back text.
std::vector<corpus::Corpus> read_corpora_dir(const std::filesystem::path& dir, std::optional<int> cycle = {});

std::filesystem::path variant_path(const std::filesystem::path& corpora_dir, const std::string& lang,
                                   std::string_view variant);

/// Writes original, pivot and back checkpoints for one translated corpus.
void write_translated(const corpus::Corpus& c, const std::filesystem::path& corpora_dir, const std::string& pivot);

/// Code points sent to the provider for one round trip: originals plus pivots.
std::size_t round_trip_characters(const corpus::Corpus& translated);

}  // namespace btvalid::pipeline
