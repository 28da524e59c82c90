#include "btvalid/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "btvalid/embed.hpp"
#include "btvalid/error.hpp"
#include "btvalid/hash.hpp"
#include "btvalid/sentiment.hpp"
#include "btvalid/stats.hpp"
#include "btvalid/text.hpp"
#include "btvalid/topics.hpp"
#include "btvalid/translate.hpp"

namespace btvalid::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return resolve(base, j.at(key).get<std::string>());
}

std::optional<std::uint64_t> optional_seed(const json& seeds, const char* key) {
  if (!seeds.contains(key) || seeds.at(key).is_null()) return std::nullopt;
  const auto& v = seeds.at(key);
  if (!v.is_number_integer()) throw ConfigError(std::string("seed '") + key + "' must be an integer");
  return v.get<std::uint64_t>();
}

void require_dir(const std::optional<fs::path>& dir, const char* what) {
  if (!dir) throw ConfigError(std::string(what) + " is required by an enabled analytic");
  if (!fs::is_directory(*dir)) throw ConfigError(std::string(what) + " does not exist: " + dir->string());
}

void require_seed(const std::optional<std::uint64_t>& seed, const char* name) {
  if (!seed) throw ConfigError(std::string("seeds.") + name + " is required");
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base) {
  static const std::set<std::string> known = {
      "datasets",     "adapters_file", "pivot",     "provider",  "sample_sizes",   "analytics",
      "lexicons_dir", "stopwords_dir", "embeddings_dir", "ks",    "alpha",          "beta",
      "iterations",   "replicates",    "permutations",   "peers", "neutral_exclusion", "cycles",
      "seeds",        "out_dir"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  PipelineConfig c;
  try {
    for (const auto& d : j.at("datasets")) {
      DatasetSpec ds;
      ds.path = resolve(base, d.at("path").get<std::string>());
      ds.adapter = d.value("adapter", "jsonl");
      ds.languages = d.value("languages", std::vector<std::string>{});
      c.datasets.push_back(std::move(ds));
    }
    c.adapters_file = optional_path(j, "adapters_file", base);
    c.pivot = j.value("pivot", "en");
    if (j.contains("provider")) {
      const auto& p = j.at("provider");
      c.provider.name = p.value("name", "identity");
      c.provider.noise_rate = p.value("noise_rate", 0.0);
      c.provider.endpoint = p.value("endpoint", "");
      c.provider.api_key = p.value("api_key", "");
      c.provider.batch_size = p.value("batch_size", std::size_t{100});
      c.provider.max_in_flight = p.value("max_in_flight", std::size_t{4});
      c.provider.cache_dir = optional_path(p, "cache_dir", base);
    }
    c.sample_sizes = j.value("sample_sizes", std::map<std::string, std::size_t>{});
    if (j.contains("analytics")) {
      const auto& a = j.at("analytics");
      c.run_sentiment = a.value("sentiment", true);
      c.run_topics = a.value("topics", true);
      c.run_embedding = a.value("embedding", true);
    }
    c.lexicons_dir = optional_path(j, "lexicons_dir", base);
    c.stopwords_dir = optional_path(j, "stopwords_dir", base);
    c.embeddings_dir = optional_path(j, "embeddings_dir", base);
    c.ks = j.value("ks", c.ks);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.iterations = j.value("iterations", c.iterations);
    c.replicates = j.value("replicates", c.replicates);
    c.permutations = j.value("permutations", c.permutations);
    c.peers = j.value("peers", c.peers);
    c.neutral_exclusion = j.value("neutral_exclusion", c.neutral_exclusion);
    c.cycles = j.value("cycles", c.cycles);
    const json seeds = j.value("seeds", json::object());
    c.seeds.sample = optional_seed(seeds, "sample");
    c.seeds.noise = optional_seed(seeds, "noise");
    c.seeds.bootstrap = optional_seed(seeds, "bootstrap");
    c.seeds.topics = optional_seed(seeds, "topics");
    c.seeds.peers = optional_seed(seeds, "peers");
    if (j.contains("out_dir")) c.out_dir = resolve(base, j.at("out_dir").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

void apply_overrides(json& j, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + o);
    std::string pointer = "/" + o.substr(0, eq);
    for (auto& ch : pointer)
      if (ch == '.') ch = '/';
    const std::string raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    j[json::json_pointer(pointer)] = value;
  }
}

std::optional<std::size_t> PipelineConfig::sample_size(const std::string& lang) const {
  if (auto it = sample_sizes.find(lang); it != sample_sizes.end()) return it->second;
  if (auto it = sample_sizes.find("*"); it != sample_sizes.end()) return it->second;
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (datasets.empty()) throw ConfigError("no datasets configured");
  if (!corpus::is_language_code(pivot)) throw ConfigError("pivot '" + pivot + "' is not a language code");
  for (const auto& d : datasets) {
    if (!fs::is_regular_file(d.path)) throw ConfigError("dataset does not exist: " + d.path.string());
    for (const auto& l : d.languages) {
      if (l == pivot) throw ConfigError("pivot language '" + pivot + "' cannot be an analyzed language");
      if (!corpus::is_language_code(l)) throw ConfigError("'" + l + "' is not a language code");
    }
  }
  if (adapters_file && !fs::is_regular_file(*adapters_file))
    throw ConfigError("adapters file does not exist: " + adapters_file->string());
  if (provider.name != "identity" && provider.name != "noise" && provider.name != "google")
    throw ConfigError("unknown provider '" + provider.name + "'");
  if (provider.name == "noise") {
    if (provider.noise_rate < 0.0 || provider.noise_rate > 1.0) throw ConfigError("noise_rate must be in [0, 1]");
    require_seed(seeds.noise, "noise");
  }
  if (provider.name == "google" && provider.api_key.empty() && !std::getenv("TRANSLATE_API_KEY"))
    throw ConfigError("google provider needs provider.api_key or TRANSLATE_API_KEY");
  if (provider.batch_size == 0 || provider.max_in_flight == 0)
    throw ConfigError("batch_size and max_in_flight must be positive");
  for (const auto& [lang, n] : sample_sizes) {
    if (n == 0) throw ConfigError("sample size for '" + lang + "' must be positive");
    if (lang == pivot) throw ConfigError("pivot language '" + pivot + "' cannot be an analyzed language");
  }
  if (!sample_sizes.empty()) require_seed(seeds.sample, "sample");
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  if (run_sentiment) {
    require_dir(lexicons_dir, "lexicons_dir");
    require_seed(seeds.bootstrap, "bootstrap");
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    sentiment::neutral_exclusion_from_string(neutral_exclusion);
  }
  if (run_topics) {
    require_dir(stopwords_dir, "stopwords_dir");
    require_seed(seeds.topics, "topics");
    if (ks.empty()) throw ConfigError("ks must not be empty");
    for (int k : ks)
      if (k < 1) throw ConfigError("every K must be >= 1");
    if (alpha <= 0.0 || beta <= 0.0) throw ConfigError("alpha and beta must be positive");
    if (iterations < 1 || permutations < 1) throw ConfigError("iterations and permutations must be >= 1");
  }
  if (run_embedding) {
    require_dir(embeddings_dir, "embeddings_dir");
    require_seed(seeds.peers, "peers");
    if (peers < 1) throw ConfigError("peers must be >= 1");
  }
}

// ---------------------------------------------------------------- checkpoints

fs::path variant_path(const fs::path& corpora_dir, const std::string& lang, std::string_view variant) {
  return corpora_dir / (lang + "." + std::string(variant) + ".jsonl");
}

void write_translated(const corpus::Corpus& c, const fs::path& corpora_dir, const std::string& pivot) {
  corpus::write_variant(c, corpus::Variant::pivot, variant_path(corpora_dir, c.lang, "pivot"), pivot);
  corpus::write_variant(c, corpus::Variant::back, variant_path(corpora_dir, c.lang, "back"), pivot);
}

std::vector<corpus::Corpus> read_corpora_dir(const fs::path& dir, std::optional<int> cycle) {
  static constexpr std::string_view suffix = ".original.jsonl";
  std::vector<std::string> langs;
  if (!fs::is_directory(dir)) throw ConfigError("corpus directory does not exist: " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      langs.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(langs.begin(), langs.end());
  if (langs.empty()) throw DataError("no <lang>.original.jsonl checkpoints in " + dir.string());
  std::vector<corpus::Corpus> out;
  for (const auto& lang : langs) {
    const auto pivot = variant_path(dir, lang, "pivot");
    const auto back =
        cycle ? variant_path(dir, lang, "cycle" + std::to_string(*cycle)) : variant_path(dir, lang, "back");
    if (cycle && !fs::exists(back)) throw DataError("missing cycle checkpoint " + back.string());
    out.push_back(corpus::read_checkpoint(variant_path(dir, lang, "original"),
                                          fs::exists(pivot) ? std::optional(pivot) : std::nullopt,
                                          fs::exists(back) ? std::optional(back) : std::nullopt));
  }
  return out;
}

namespace {

std::size_t code_points(std::string_view s) { return text::decode(s).size(); }

}  // namespace

std::size_t round_trip_characters(const corpus::Corpus& translated) {
  std::size_t n = 0;
  for (const auto& r : translated.records) {
    n += code_points(r.text_original);
    if (r.text_pivot) n += code_points(*r.text_pivot);
  }
  return n;
}

namespace {

std::string file_sha256(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "missing";
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

// Completion marker: the stage's input fingerprint and the hash of every
// output it wrote. A stage is current only if both still match.
class Marker {
 public:
  Marker(fs::path path, std::string inputs) : path_(std::move(path)), inputs_(std::move(inputs)) {}

  std::optional<json> current() const {
    std::ifstream in(path_);
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("inputs", "") != inputs_) return std::nullopt;
    for (const auto& [name, digest] : j.at("outputs").items())
      if (file_sha256(path_.parent_path().parent_path() / name) != digest.get<std::string>()) return std::nullopt;
    return j;
  }

  void write(const std::vector<fs::path>& outputs, json extra = json::object()) const {
    const fs::path root = path_.parent_path().parent_path();
    json outs = json::object();
    for (const auto& o : outputs) outs[fs::relative(o, root).generic_string()] = file_sha256(o);
    extra["inputs"] = inputs_;
    extra["outputs"] = outs;
    fs::create_directories(path_.parent_path());
    std::ofstream(path_, std::ios::trunc) << extra.dump(2) << "\n";
  }

 private:
  fs::path path_;
  std::string inputs_;
};

std::string fingerprint(const json& j) { return sha256_hex(j.dump()); }

json files_digest(const std::vector<fs::path>& files) {
  json j = json::object();
  for (const auto& f : files) j[f.filename().string()] = file_sha256(f);
  return j;
}

struct Layout {
  fs::path root, corpora, state, reports;
  explicit Layout(const fs::path& out)
      : root(out), corpora(out / "corpora"), state(out / "state"), reports(out / "reports") {}
};

std::map<std::string, corpus::Corpus> ingest(const PipelineConfig& cfg, const Layout& dirs) {
  corpus::AdapterRegistry registry;
  if (cfg.adapters_file) registry.load_file(*cfg.adapters_file);
  std::map<std::string, corpus::Corpus> out;
  for (const auto& ds : cfg.datasets) {
    auto loaded = corpus::load_corpora(ds.path, ds.adapter, registry, cfg.pivot);
    std::vector<std::string> wanted = ds.languages;
    if (wanted.empty())
      for (const auto& [lang, _] : loaded) wanted.push_back(lang);
    for (const auto& lang : wanted) {
      auto it = loaded.find(lang);
      if (it == loaded.end())
        throw DataError("language '" + lang + "' has no records in " + ds.path.string());
      if (out.count(lang)) throw ConfigError("language '" + lang + "' appears in more than one dataset");
      corpus::Corpus c = std::move(it->second);
      if (auto n = cfg.sample_size(lang)) c = corpus::sample_corpus(c, *n, *cfg.seeds.sample);
      corpus::write_variant(c, corpus::Variant::original, variant_path(dirs.corpora, lang, "original"), cfg.pivot);
      out.emplace(lang, std::move(c));
    }
  }
  return out;
}

struct TranslateStage {
  std::size_t characters = 0;
};

translate::ProviderSpec provider_spec(const PipelineConfig& cfg, const corpus::Corpus& c) {
  translate::ProviderSpec spec;
  spec.name = cfg.provider.name;
  spec.noise_rate = cfg.provider.noise_rate;
  spec.noise_seed = cfg.seeds.noise.value_or(0);
  if (spec.name == "noise") spec.noise_vocabulary = translate::corpus_vocabulary(c);
  spec.api_key = cfg.provider.api_key;
  spec.endpoint = cfg.provider.endpoint;
  return spec;
}

// Translates one language unless its marker is current. Returns characters sent.
std::size_t translate_language(const PipelineConfig& cfg, const Layout& dirs, const corpus::Corpus& c,
                               translate::TranslationCache& cache) {
  const fs::path original = variant_path(dirs.corpora, c.lang, "original");
  const Marker marker(dirs.state / (c.lang + ".translate.done"),
                      fingerprint({{"original", file_sha256(original)},
                                   {"pivot", cfg.pivot},
                                   {"provider", cfg.provider.name},
                                   {"noise_rate", cfg.provider.noise_rate},
                                   {"noise_seed", cfg.seeds.noise.value_or(0)},
                                   {"cycles", cfg.cycles}}));
  if (auto done = marker.current()) {
    spdlog::info("{}: translation checkpoint current, skipped", c.lang);
    return done->value("characters", std::size_t{0});
  }
  auto provider = translate::make_provider(provider_spec(cfg, c));
  translate::TranslateOptions opts;
  opts.cache = &cache;
  opts.batch_size = cfg.provider.batch_size;
  opts.max_in_flight = cfg.provider.max_in_flight;
  spdlog::info("{}: translating {} records via {} ({} cycle(s))", c.lang, c.size(), provider->name(), cfg.cycles);
  const auto cycles = translate::iterated_backtranslate(c, cfg.pivot, cfg.cycles, *provider, opts, dirs.corpora);

  std::size_t characters = 0;
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const corpus::Corpus& input = i == 0 ? c : cycles[i - 1];
    for (const auto& r : input.records) characters += code_points(i == 0 ? r.text_original : *r.text_back);
    for (const auto& r : cycles[i].records) characters += code_points(*r.text_pivot);
  }
  write_translated(cycles.front(), dirs.corpora, cfg.pivot);
  std::vector<fs::path> outputs{variant_path(dirs.corpora, c.lang, "pivot"),
                                variant_path(dirs.corpora, c.lang, "back")};
  for (int k = 1; k <= cfg.cycles; ++k)
    outputs.push_back(variant_path(dirs.corpora, c.lang, "cycle" + std::to_string(k)));
  for (std::size_t i = 0, n = outputs.size(); i < n; ++i) outputs.push_back(corpus::provenance_path(outputs[i]));
  marker.write(outputs, {{"characters", characters}});
  return characters;
}

std::optional<fs::path> resource(const std::optional<fs::path>& dir, const std::string& lang, const char* ext) {
  if (!dir) return std::nullopt;
  fs::path p = *dir / (lang + ext);
  return fs::is_regular_file(p) ? std::optional(p) : std::nullopt;
}

std::vector<fs::path> checkpoint_files(const Layout& dirs, const std::vector<std::string>& langs) {
  std::vector<fs::path> files;
  for (const auto& lang : langs)
    for (const char* v : {"original", "pivot", "back"}) files.push_back(variant_path(dirs.corpora, lang, v));
  return files;
}

// Runs one analytic section unless its marker is current, in which case the
// section JSON is read back. Section JSON is the single source for the report.
template <typename Compute>
json run_section(const std::string& name, const Layout& dirs, const json& inputs, Compute&& compute) {
  const fs::path out = dirs.reports / (name + ".json");
  const Marker marker(dirs.state / (name + ".done"), fingerprint(inputs));
  if (marker.current()) {
    spdlog::info("{}: checkpoint current, skipped", name);
    return report::read_json_file(out);
  }
  json j = compute();
  report::write_json_file(j, out);
  marker.write({out});
  return j;
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const Layout dirs(cfg.out_dir);
  for (const auto& d : {dirs.corpora, dirs.state, dirs.reports}) fs::create_directories(d);

  RunResult result;
  auto& meta = result.report.metadata;
  meta.prng = std::string(stats::kPrngId);
  meta.provider = cfg.provider.name == "noise" ? fmt::format("noise({})", cfg.provider.noise_rate)
                                               : cfg.provider.name;
  meta.pivot = cfg.pivot;
  for (const auto& [name, seed] : {std::pair{"sample", cfg.seeds.sample}, std::pair{"noise", cfg.seeds.noise},
                                   std::pair{"bootstrap", cfg.seeds.bootstrap}, std::pair{"topics", cfg.seeds.topics},
                                   std::pair{"peers", cfg.seeds.peers}})
    if (seed) meta.seeds[name] = *seed;

  const auto ingested = ingest(cfg, dirs);
  std::vector<std::string> langs;
  for (const auto& [lang, _] : ingested) langs.push_back(lang);
  meta.languages = langs;

  translate::TranslationCache cache(cfg.provider.cache_dir.value_or(dirs.root / "cache"));
  try {
    for (const auto& [lang, c] : ingested) meta.characters_translated += translate_language(cfg, dirs, c, cache);
    result.report.status["translate"] = "ok";
  } catch (const translate::AuthError& e) {
    spdlog::error("provider authentication failed: {}", e.what());
    result.report.status["translate"] = std::string("failed: ") + e.what();
    result.exit_code = kProviderFailure;
  } catch (const translate::RateLimitExhausted& e) {
    spdlog::error("provider rate limit exhausted after {} completed items; rerun resumes from the cache",
                  e.completed());
    result.report.status["translate"] = std::string("failed: ") + e.what();
    result.exit_code = kProviderFailure;
  }
  meta.estimated_cost_usd = report::estimate_cost_usd(meta.characters_translated);
  if (result.exit_code == kProviderFailure) {
    report::emit_tables(result.report, dirs.reports);
    return result;
  }

  std::vector<corpus::Corpus> corpora;
  for (const auto& lang : langs)
    corpora.push_back(corpus::read_checkpoint(variant_path(dirs.corpora, lang, "original"),
                                              variant_path(dirs.corpora, lang, "pivot"),
                                              variant_path(dirs.corpora, lang, "back")));
  for (const auto& c : corpora) meta.exclusions[c.lang] = c.provenance.dropped;
  const json corpora_digest = files_digest(checkpoint_files(dirs, langs));

  auto section = [&](const std::string& name, bool enabled, auto&& body) {
    if (!enabled) {
      result.report.status[name] = "skipped";
      return;
    }
    try {
      body();
      result.report.status[name] = "ok";
    } catch (const std::exception& e) {
      spdlog::error("{} analytic failed: {}", name, e.what());
      result.report.status[name] = std::string("failed: ") + e.what();
    }
  };

  section("sentiment", cfg.run_sentiment, [&] {
    std::vector<fs::path> files;
    std::set<std::string> lex_langs(langs.begin(), langs.end());
    lex_langs.insert(cfg.pivot);
    for (const auto& l : lex_langs)
      if (auto p = resource(cfg.lexicons_dir, l, ".tsv")) files.push_back(*p);
    const json inputs = {{"corpora", corpora_digest},
                         {"lexicons", files_digest(files)},
                         {"replicates", cfg.replicates},
                         {"seed", *cfg.seeds.bootstrap},
                         {"exclusion", cfg.neutral_exclusion},
                         {"pivot", cfg.pivot}};
    const json j = run_section("sentiment", dirs, inputs, [&] {
      std::map<std::string, sentiment::ValenceLexicon> lexicons;
      for (const auto& l : lex_langs)
        if (auto p = resource(cfg.lexicons_dir, l, ".tsv")) lexicons.emplace(l, sentiment::ValenceLexicon::load_tsv(*p, l));
      sentiment::SentimentOptions opts;
      opts.replicates = cfg.replicates;
      opts.seed = *cfg.seeds.bootstrap;
      opts.exclusion = sentiment::neutral_exclusion_from_string(cfg.neutral_exclusion);
      return sentiment::to_json(sentiment::sentiment_report(corpora, lexicons, cfg.pivot, opts));
    });
    result.report.sentiment = sentiment::sentiment_report_from_json(j);
  });

  section("topics", cfg.run_topics, [&] {
    std::vector<fs::path> files;
    for (const auto& l : langs)
      if (auto p = resource(cfg.stopwords_dir, l, ".txt")) files.push_back(*p);
    const json inputs = {{"corpora", corpora_digest}, {"stopwords", files_digest(files)},
                         {"ks", cfg.ks},              {"alpha", cfg.alpha},
                         {"beta", cfg.beta},          {"iterations", cfg.iterations},
                         {"permutations", cfg.permutations}, {"seed", *cfg.seeds.topics}};
    const json j = run_section("topics", dirs, inputs, [&] {
      std::map<std::string, topics::StopwordList> stopwords;
      for (const auto& l : langs)
        if (auto p = resource(cfg.stopwords_dir, l, ".txt")) stopwords.emplace(l, topics::load_stopwords(*p));
      topics::SweepOptions opts;
      opts.ks = cfg.ks;
      opts.alpha = cfg.alpha;
      opts.beta = cfg.beta;
      opts.iterations = cfg.iterations;
      opts.permutations = cfg.permutations;
      opts.seed = *cfg.seeds.topics;
      return topics::to_json(topics::topics_report(corpora, stopwords, opts));
    });
    result.report.topics = topics::topics_report_from_json(j);
  });

  section("embedding", cfg.run_embedding, [&] {
    std::vector<fs::path> files;
    for (const auto& l : langs)
      if (auto p = resource(cfg.embeddings_dir, l, ".txt")) files.push_back(*p);
    const json inputs = {{"corpora", corpora_digest},
                         {"embeddings", files_digest(files)},
                         {"peers", cfg.peers},
                         {"seed", *cfg.seeds.peers}};
    const json j = run_section("embedding", dirs, inputs, [&] {
      std::map<std::string, embed::EmbeddingTable> tables;
      for (const auto& l : langs)
        if (auto p = resource(cfg.embeddings_dir, l, ".txt")) tables.emplace(l, embed::EmbeddingTable::load(*p, l));
      return embed::to_json(embed::embedding_report(corpora, tables, cfg.peers, *cfg.seeds.peers));
    });
    result.report.embedding = embed::embedding_report_from_json(j);
  });

  report::emit_tables(result.report, dirs.reports);
  report::emit_plots(result.report, dirs.reports);
  if (!result.report.complete()) result.exit_code = kPartialFailure;
  return result;
}

}  // namespace btvalid::pipeline
