#pragma once

// Tweet corpora: ingestion through dataset adapters, cleaning, sampling, and
// the JSONL checkpoint files shared by every pipeline stage.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace btvalid::corpus {

inline constexpr std::string_view kCleaningRulesVersion = "clean/v1";

enum class Polarity : int { negative = -1, neutral = 0, positive = 1 };

inline int to_int(Polarity p) { return static_cast<int>(p); }
std::optional<Polarity> polarity_from_int(long long v);

/// True for a registered ISO 639-1 two-letter code.
bool is_language_code(std::string_view code);

struct TextRecord {
  std::string id;
  std::string lang;
  std::string text_original;
  std::optional<std::string> text_pivot;
  std::optional<std::string> text_back;
  std::optional<Polarity> label;

  bool operator==(const TextRecord&) const = default;
};

/// Audit trail. Invariant: raw_count == kept + sum(dropped).
struct Provenance {
  std::string source;
  std::string rules_version{kCleaningRulesVersion};
  std::size_t raw_count = 0;
  std::map<std::string, std::size_t> dropped;
  std::optional<std::uint64_t> sample_seed;
  std::optional<std::size_t> sample_n;
  std::vector<std::string> steps;

  std::size_t dropped_total() const;
  bool operator==(const Provenance&) const = default;
};

struct Corpus {
  std::string lang;
  std::vector<TextRecord> records;
  Provenance provenance;

  std::size_t size() const { return records.size(); }
  /// raw_count == size() + dropped_total()
  bool reconciles() const { return provenance.raw_count == size() + provenance.dropped_total(); }
};

enum class Variant { original, pivot, back };
std::string_view to_string(Variant v);

/// Text of the given variant, if present.
std::optional<std::string> variant_text(const TextRecord& r, Variant v);

/// Normalizes a raw tweet. Rules, applied in this order:
///   1. Unicode default lowercase
///   2. every decimal digit (Nd) removed, including inside words
///   3. whitespace tokens starting with '@' removed (mentions, "@user:" included)
///   4. each token truncated at the first "http" or "www." (URLs)
///   5. leading "rt" retweet-marker tokens removed
///   6. whitespace collapsed to single spaces, trimmed
/// Total and idempotent; may return "".
std::string clean_text(std::string_view raw);

// ---------------------------------------------------------------- adapters

enum class SourceFormat { jsonl, csv, tsv };

/// Maps a source file's columns onto TextRecord fields. Loaded from config,
/// since the public datasets use differing layouts.
struct AdapterConfig {
  std::string name;
  SourceFormat format = SourceFormat::jsonl;
  std::string id_field = "id";
  std::string lang_field = "lang";
  std::string text_field = "text";
  std::string label_field = "label";
  /// Language for files that carry none per row (one file per language).
  std::optional<std::string> fixed_lang;
  bool header = true;
  /// String labels ("positive", ...) to polarity; integers -1/0/1 always accepted.
  std::map<std::string, int> label_map;
};

AdapterConfig adapter_from_json(const nlohmann::json& j);

class AdapterRegistry {
 public:
  /// Registry with the built-in "jsonl" interchange adapter.
  AdapterRegistry();

  void add(AdapterConfig cfg);
  /// Adds every adapter in a JSON config file: {"adapters": [{...}, ...]}.
  void load_file(const std::filesystem::path& path);
  const AdapterConfig& get(const std::string& name) const;  // throws ConfigError
  bool contains(const std::string& name) const { return adapters_.count(name) != 0; }

 private:
  std::map<std::string, AdapterConfig> adapters_;
};

struct LoadOptions {
  std::optional<std::string> lang_filter;
  std::string pivot = "en";
};

/// Loads one language. Without a lang filter the file must hold exactly one
/// non-pivot language. Malformed rows are logged with their line number,
/// counted under "malformed" and skipped; an unreadable file throws DataError.
Corpus load_corpus(const std::filesystem::path& path, const std::string& adapter,
                   const AdapterRegistry& registry, const LoadOptions& opts = {});

/// Loads every non-pivot language in the file, one Corpus each. Rows of other
/// languages count as dropped "lang" in each corpus so each one reconciles.
std::map<std::string, Corpus> load_corpora(const std::filesystem::path& path, const std::string& adapter,
                                           const AdapterRegistry& registry, const std::string& pivot = "en");

/// Uniform sample of n records without replacement, original order kept.
Corpus sample_corpus(const Corpus& corpus, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------- checkpoints

/// Writes the records' `variant` text as interchange JSONL (id, lang, text,
/// label) plus a "<stem>.provenance.json" sidecar. Pivot files carry the pivot
/// language in "lang". Records lacking the variant are skipped.
void write_variant(const Corpus& corpus, Variant variant, const std::filesystem::path& path,
                   const std::string& pivot = "en");

std::filesystem::path provenance_path(const std::filesystem::path& jsonl_path);

nlohmann::json provenance_to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& j);

/// Reads an original-variant checkpoint plus optional pivot/back files and
/// merges them by id. Strict: any malformed line throws DataError.
Corpus read_checkpoint(const std::filesystem::path& original,
                       const std::optional<std::filesystem::path>& pivot = std::nullopt,
                       const std::optional<std::filesystem::path>& back = std::nullopt);

}  // namespace btvalid::corpus
