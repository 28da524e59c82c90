#pragma once

// Round-tripping corpora through a pivot language.
//
// Providers translate index-aligned batches. translate_batch layers the
// on-disk cache, request deduplication, batching, bounded concurrency and
// retry-with-backoff on top of any provider.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btvalid/corpus.hpp"
#include "btvalid/error.hpp"

namespace btvalid::translate {

/// Credentials rejected. Fatal.
class AuthError : public Error {
 public:
  using Error::Error;
};

/// Retryable whole-batch failure (HTTP 429/5xx, timeout). Thrown by providers.
class TransientError : public Error {
 public:
  using Error::Error;
};

/// Retries exhausted. Everything translated so far is already in the cache,
/// so rerunning the same command resumes where this one stopped.
class RateLimitExhausted : public Error {
 public:
  RateLimitExhausted(const std::string& what, std::size_t completed)
      : Error(what), completed_(completed) {}
  std::size_t completed() const { return completed_; }

 private:
  std::size_t completed_;
};

struct TranslationRequest {
  std::string text;
  std::string source;
  std::string target;
  std::string provider;

  /// Throws ConfigError unless source != target and text is non-empty.
  void validate() const;
};

struct CacheKey {
  std::string provider;
  std::string source;
  std::string target;
  std::string text_sha256;

  /// Content address: sha256(provider \x1f source \x1f target \x1f text_sha256).
  std::string digest() const;
};

CacheKey make_cache_key(const TranslationRequest& req);

/// One content-addressed file per key: <dir>/<digest[0:2]>/<digest>.txt
/// holding the UTF-8 translation. Writes go through a temp file and rename,
/// so a crashed run never leaves a truncated entry. Thread-safe.
class TranslationCache {
 public:
  explicit TranslationCache(std::filesystem::path dir);

  std::optional<std::string> get(const CacheKey& key) const;
  void put(const CacheKey& key, const std::string& value);
  std::filesystem::path entry_path(const CacheKey& key) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

struct ItemResult {
  std::optional<std::string> text;
  std::string error;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  /// Exactly one result per input, same order. Must be safe to call from
  /// several threads at once.
  virtual std::vector<ItemResult> translate(std::span<const std::string> texts, const std::string& source,
                                            const std::string& target) = 0;
};

class IdentityProvider final : public Provider {
 public:
  std::string name() const override { return "identity"; }
  std::vector<ItemResult> translate(std::span<const std::string> texts, const std::string& source,
                                    const std::string& target) override;
};

/// Replaces each whitespace token, independently with probability `rate`, by a
/// different token drawn uniformly from `vocabulary`. The random stream of an
/// item is keyed on (seed, source, target, sha256(text)), so output does not
/// depend on batching or thread scheduling.
class NoiseProvider final : public Provider {
 public:
  NoiseProvider(double rate, std::uint64_t seed, std::vector<std::string> vocabulary);
  std::string name() const override;
  std::vector<ItemResult> translate(std::span<const std::string> texts, const std::string& source,
                                    const std::string& target) override;
  std::string perturb(const std::string& text, const std::string& source, const std::string& target) const;

 private:
  double rate_;
  std::uint64_t seed_;
  std::vector<std::string> vocab_;
};

/// Distinct tokens across the corpus's original texts, sorted.
std::vector<std::string> corpus_vocabulary(const corpus::Corpus& c);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  double jitter = 0.25;  // +/- fraction of each delay
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

struct TranslateOptions {
  TranslationCache* cache = nullptr;
  std::size_t batch_size = 100;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
};

struct BatchOutcome {
  std::vector<std::optional<std::string>> texts;  // index-aligned; nullopt = failed
  std::size_t failed = 0;
  std::size_t cache_hits = 0;
  std::size_t provider_requests = 0;
};

BatchOutcome translate_batch(std::span<const std::string> texts, const std::string& source,
                             const std::string& target, Provider& provider, const TranslateOptions& opts = {});

/// Adds text_pivot and text_back to every record. Translations are normalized
/// with clean_text; records whose round trip failed (or came back empty) are
/// removed and counted as "translation_failed".
corpus::Corpus backtranslate_corpus(const corpus::Corpus& c, const std::string& pivot, Provider& provider,
                                    const TranslateOptions& opts = {});

/// Cycle 1 backtranslates the originals; cycle i+1 backtranslates cycle i's
/// text_back. text_original always stays the source text. When checkpoint_dir
/// is set, cycle N is written to <dir>/<lang>.cycle<N>.jsonl as it completes.
std::vector<corpus::Corpus> iterated_backtranslate(const corpus::Corpus& c, const std::string& pivot, int cycles,
                                                   Provider& provider, const TranslateOptions& opts = {},
                                                   const std::optional<std::filesystem::path>& checkpoint_dir = {});

struct ProviderSpec {
  std::string name = "identity";  // google | identity | noise
  double noise_rate = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<std::string> noise_vocabulary;
  std::string api_key;  // falls back to $TRANSLATE_API_KEY
  std::string endpoint; // remote base URL override
};

std::unique_ptr<Provider> make_provider(const ProviderSpec& spec);

}  // namespace btvalid::translate
