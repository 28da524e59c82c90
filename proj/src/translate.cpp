#include "btvalid/translate.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "btvalid/google_provider.hpp"
#include "btvalid/hash.hpp"
#include "btvalid/stats.hpp"
#include "btvalid/text.hpp"

namespace btvalid::translate {

namespace fs = std::filesystem;

void TranslationRequest::validate() const {
  if (source == target) throw ConfigError("translation source and target are both '" + source + "'");
  if (text.empty()) throw ConfigError("empty text in translation request");
}

std::string CacheKey::digest() const {
  std::string material = provider;
  for (const auto* part : {&source, &target, &text_sha256}) {
    material += '\x1f';
    material += *part;
  }
  return sha256_hex(material);
}

CacheKey make_cache_key(const TranslationRequest& req) {
  return CacheKey{req.provider, req.source, req.target, sha256_hex(req.text)};
}

// ---------------------------------------------------------------- cache

TranslationCache::TranslationCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path TranslationCache::entry_path(const CacheKey& key) const {
  const std::string d = key.digest();
  return dir_ / d.substr(0, 2) / (d + ".txt");
}

std::optional<std::string> TranslationCache::get(const CacheKey& key) const {
  std::ifstream in(entry_path(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void TranslationCache::put(const CacheKey& key, const std::string& value) {
  std::lock_guard lock(mu_);
  const fs::path final_path = entry_path(key);
  fs::create_directories(final_path.parent_path());
  fs::path tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write cache entry " + tmp.string());
    out << value;
    if (!out) throw DataError("cache write failed: " + tmp.string());
  }
  fs::rename(tmp, final_path);
}

// ---------------------------------------------------------------- providers

std::vector<ItemResult> IdentityProvider::translate(std::span<const std::string> texts, const std::string&,
                                                    const std::string&) {
  std::vector<ItemResult> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back({t, {}});
  return out;
}

NoiseProvider::NoiseProvider(double rate, std::uint64_t seed, std::vector<std::string> vocabulary)
    : rate_(rate), seed_(seed), vocab_(std::move(vocabulary)) {
  if (!(rate_ >= 0.0 && rate_ <= 1.0)) throw ConfigError("noise rate must be in [0,1]");
  if (rate_ > 0.0 && vocab_.empty()) throw ConfigError("noise provider needs a non-empty vocabulary");
}

std::string NoiseProvider::name() const {
  std::ostringstream ss;
  ss << "noise(rate=" << rate_ << ",seed=" << seed_ << ",vocab=" << vocab_.size() << ")";
  return ss.str();
}

std::string NoiseProvider::perturb(const std::string& text, const std::string& source,
                                   const std::string& target) const {
  if (rate_ == 0.0) return text;
  stats::RngStream rng(seed_, "noise/" + source + ">" + target + "/" + sha256_hex(text));
  auto tokens = text::split_whitespace(text);
  const bool can_differ = vocab_.size() > 1;
  for (auto& tok : tokens) {
    if (rng.uniform01() >= rate_) continue;
    std::string repl = vocab_[rng.uniform_below(vocab_.size())];
    while (can_differ && repl == tok) repl = vocab_[rng.uniform_below(vocab_.size())];
    tok = std::move(repl);
  }
  return text::join(tokens);
}

std::vector<ItemResult> NoiseProvider::translate(std::span<const std::string> texts, const std::string& source,
                                                 const std::string& target) {
  std::vector<ItemResult> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back({perturb(t, source, target), {}});
  return out;
}

std::vector<std::string> corpus_vocabulary(const corpus::Corpus& c) {
  std::set<std::string> vocab;
  for (const auto& r : c.records)
    for (auto& t : text::split_whitespace(r.text_original)) vocab.insert(std::move(t));
  return {vocab.begin(), vocab.end()};
}

std::unique_ptr<Provider> make_provider(const ProviderSpec& spec) {
  if (spec.name == "identity") return std::make_unique<IdentityProvider>();
  if (spec.name == "noise")
    return std::make_unique<NoiseProvider>(spec.noise_rate, spec.noise_seed, spec.noise_vocabulary);
  if (spec.name == "google") {
    RemoteConfig cfg;
    cfg.api_key = spec.api_key;
    if (cfg.api_key.empty())
      if (const char* env = std::getenv("TRANSLATE_API_KEY")) cfg.api_key = env;
    if (cfg.api_key.empty())
      throw AuthError("no API key: set TRANSLATE_API_KEY or the api_key config key");
    if (!spec.endpoint.empty()) cfg.endpoint = spec.endpoint;
    return std::make_unique<RemoteProvider>(std::move(cfg));
  }
  throw ConfigError("unknown translation provider '" + spec.name + "'");
}

// ---------------------------------------------------------------- batching

namespace {

std::vector<ItemResult> call_with_retry(Provider& provider, std::span<const std::string> batch,
                                        const std::string& source, const std::string& target,
                                        const RetryPolicy& policy, std::uint64_t batch_index,
                                        std::atomic<std::size_t>& requests) {
  stats::RngStream jitter(batch_index, "retry-jitter");
  auto delay = policy.initial_backoff;
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      ++requests;
      return provider.translate(batch, source, target);
    } catch (const TransientError& e) {
      if (attempt >= attempts)
        throw RateLimitExhausted("translation failed after " + std::to_string(attempts) +
                                     " attempts: " + e.what(),
                                 0);
      const double j = 1.0 + policy.jitter * (2.0 * jitter.uniform01() - 1.0);
      auto wait = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * j));
      spdlog::warn("{} {}>{}: transient failure ({}); retry {}/{} in {} ms", provider.name(), source, target,
                   e.what(), attempt, attempts - 1, wait.count());
      if (policy.sleep) policy.sleep(wait);
      else std::this_thread::sleep_for(wait);
      delay = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
    }
  }
}

}  // namespace

BatchOutcome translate_batch(std::span<const std::string> texts, const std::string& source,
                             const std::string& target, Provider& provider, const TranslateOptions& opts) {
  const std::string pname = provider.name();
  for (const auto& t : texts) TranslationRequest{t, source, target, pname}.validate();
  if (opts.batch_size == 0) throw ConfigError("batch size must be positive");

  BatchOutcome out;
  out.texts.resize(texts.size());

  // Unique uncached texts, each mapped to every index that needs it.
  std::vector<std::string> pending;
  std::unordered_map<std::string, std::vector<std::size_t>> where;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (opts.cache) {
      if (auto hit = opts.cache->get(make_cache_key({texts[i], source, target, pname}))) {
        out.texts[i] = std::move(hit);
        ++out.cache_hits;
        continue;
      }
    }
    auto [it, fresh] = where.try_emplace(texts[i]);
    if (fresh) pending.push_back(texts[i]);
    it->second.push_back(i);
  }

  const std::size_t n_batches = (pending.size() + opts.batch_size - 1) / opts.batch_size;
  std::vector<std::vector<ItemResult>> results(n_batches);
  std::atomic<std::size_t> next{0}, requests{0}, completed{0};
  std::atomic<bool> stop{false};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      if (stop) return;
      const std::size_t b = next++;
      if (b >= n_batches) return;
      const std::size_t lo = b * opts.batch_size;
      const std::size_t hi = std::min(pending.size(), lo + opts.batch_size);
      std::span<const std::string> batch(pending.data() + lo, hi - lo);
      try {
        auto res = call_with_retry(provider, batch, source, target, opts.retry, b, requests);
        if (res.size() != batch.size()) {
          spdlog::warn("{}: provider returned {} results for {} texts; batch marked failed", pname, res.size(),
                       batch.size());
          res.assign(batch.size(), ItemResult{std::nullopt, "result count mismatch"});
        }
        for (std::size_t k = 0; k < batch.size(); ++k)
          if (res[k].text && opts.cache) opts.cache->put(make_cache_key({batch[k], source, target, pname}), *res[k].text);
        completed += batch.size();
        results[b] = std::move(res);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  const std::size_t n_threads = std::min<std::size_t>(std::max<std::size_t>(1, opts.max_in_flight), n_batches);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  out.provider_requests = requests;
  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const RateLimitExhausted& e) {
      throw RateLimitExhausted(e.what(), out.cache_hits + completed);
    }
  }

  for (std::size_t b = 0; b < n_batches; ++b) {
    for (std::size_t k = 0; k < results[b].size(); ++k) {
      const std::string& src = pending[b * opts.batch_size + k];
      auto& item = results[b][k];
      if (!item.text) spdlog::warn("{} {}>{}: item failed: {}", pname, source, target, item.error);
      for (auto idx : where[src]) out.texts[idx] = item.text;
    }
  }
  out.failed = static_cast<std::size_t>(std::count(out.texts.begin(), out.texts.end(), std::nullopt));
  return out;
}

// ---------------------------------------------------------------- corpora

namespace {

// Round-trips `inputs` (index-aligned with c.records) and returns the records
// that survived both legs.
corpus::Corpus round_trip(const corpus::Corpus& c, const std::vector<std::string>& inputs, const std::string& pivot,
                          Provider& provider, const TranslateOptions& opts, const std::string& step) {
  if (c.lang == pivot) throw ConfigError("corpus language equals the pivot '" + pivot + "'");

  auto normalize = [](std::optional<std::string>& t) {
    if (!t) return;
    *t = corpus::clean_text(*t);
    if (t->empty()) t.reset();
  };

  auto to_pivot = translate_batch(inputs, c.lang, pivot, provider, opts);
  for (auto& t : to_pivot.texts) normalize(t);

  std::vector<std::string> pivots;
  std::vector<std::size_t> pivot_idx;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (to_pivot.texts[i]) {
      pivots.push_back(*to_pivot.texts[i]);
      pivot_idx.push_back(i);
    }
  }
  auto back = translate_batch(pivots, pivot, c.lang, provider, opts);
  for (auto& t : back.texts) normalize(t);

  corpus::Corpus out;
  out.lang = c.lang;
  out.provenance = c.provenance;
  std::size_t failed = inputs.size() - pivots.size();
  for (std::size_t k = 0; k < pivot_idx.size(); ++k) {
    if (!back.texts[k]) {
      ++failed;
      continue;
    }
    corpus::TextRecord r = c.records[pivot_idx[k]];
    r.text_pivot = std::move(to_pivot.texts[pivot_idx[k]]);
    r.text_back = std::move(back.texts[k]);
    out.records.push_back(std::move(r));
  }
  if (failed) out.provenance.dropped["translation_failed"] += failed;
  out.provenance.steps.push_back(step + " pivot=" + pivot + " provider=" + provider.name() +
                                 " failed=" + std::to_string(failed));
  return out;
}

}  // namespace

corpus::Corpus backtranslate_corpus(const corpus::Corpus& c, const std::string& pivot, Provider& provider,
                                    const TranslateOptions& opts) {
  std::vector<std::string> inputs;
  inputs.reserve(c.size());
  for (const auto& r : c.records) inputs.push_back(r.text_original);
  return round_trip(c, inputs, pivot, provider, opts, "backtranslate");
}

std::vector<corpus::Corpus> iterated_backtranslate(const corpus::Corpus& c, const std::string& pivot, int cycles,
                                                   Provider& provider, const TranslateOptions& opts,
                                                   const std::optional<fs::path>& checkpoint_dir) {
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  std::vector<corpus::Corpus> out;
  out.reserve(static_cast<std::size_t>(cycles));
  for (int cycle = 1; cycle <= cycles; ++cycle) {
    corpus::Corpus next;
    if (cycle == 1) {
      next = backtranslate_corpus(c, pivot, provider, opts);
    } else {
      const auto& prev = out.back();
      std::vector<std::string> inputs;
      inputs.reserve(prev.size());
      for (const auto& r : prev.records) inputs.push_back(*r.text_back);
      next = round_trip(prev, inputs, pivot, provider, opts, "cycle " + std::to_string(cycle));
    }
    if (checkpoint_dir)
      corpus::write_variant(next, corpus::Variant::back,
                            *checkpoint_dir / (c.lang + ".cycle" + std::to_string(cycle) + ".jsonl"), pivot);
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace btvalid::translate
