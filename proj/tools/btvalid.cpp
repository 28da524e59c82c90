// btvalid: command-line front end. `run` drives the whole pipeline from a
// config file; the other subcommands run single stages over the same
// checkpoint layout.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "btvalid/corpus.hpp"
#include "btvalid/embed.hpp"
#include "btvalid/error.hpp"
#include "btvalid/pipeline.hpp"
#include "btvalid/report.hpp"
#include "btvalid/sentiment.hpp"
#include "btvalid/stats.hpp"
#include "btvalid/topics.hpp"
#include "btvalid/translate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace btvalid;
using pipeline::ExitCode;

namespace {

std::vector<std::string> corpus_langs(const std::vector<corpus::Corpus>& corpora) {
  std::vector<std::string> out;
  for (const auto& c : corpora) out.push_back(c.lang);
  return out;
}

std::optional<fs::path> file_in(const fs::path& dir, const std::string& lang, const char* ext) {
  fs::path p = dir / (lang + ext);
  return fs::is_regular_file(p) ? std::optional(p) : std::nullopt;
}

int run_analytic(const std::function<json()>& body, const fs::path& out) {
  json j;
  try {
    j = body();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    spdlog::error("analytic failed: {}", e.what());
    return pipeline::kPartialFailure;
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  report::write_json_file(j, out);
  spdlog::info("wrote {}", out.string());
  return pipeline::kOk;
}

corpus::Corpus read_input(const fs::path& in, const std::string& pivot) {
  if (fs::exists(corpus::provenance_path(in))) return corpus::read_checkpoint(in);
  corpus::AdapterRegistry registry;
  corpus::LoadOptions opts;
  opts.pivot = pivot;
  return corpus::load_corpus(in, "jsonl", registry, opts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backtranslation validation toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // run
  auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
  fs::path config_path;
  std::vector<std::string> overrides;
  run->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  run->add_option("--set", overrides, "Override a config key: a.b=value (repeatable)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load, clean and sample a dataset into original checkpoints");
  fs::path ingest_in, ingest_out, adapters_file;
  std::string adapter = "jsonl", ingest_pivot = "en";
  std::vector<std::string> ingest_langs;
  std::optional<std::size_t> sample_n;
  std::uint64_t sample_seed = 0;
  ingest->add_option("--in", ingest_in, "Dataset file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--adapter", adapter, "Adapter name");
  ingest->add_option("--adapters", adapters_file, "Adapter config file")->check(CLI::ExistingFile);
  ingest->add_option("--lang", ingest_langs, "Languages to keep (default: all)");
  ingest->add_option("--pivot", ingest_pivot, "Pivot language, dropped from input");
  auto* sample_opt = ingest->add_option("--sample", sample_n, "Records to sample per language");
  ingest->add_option("--seed", sample_seed, "Sample seed")->needs(sample_opt);
  ingest->add_option("--out-dir", ingest_out, "Corpus checkpoint directory")->required();

  // translate
  auto* tr = app.add_subcommand("translate", "Round-trip a corpus through the pivot language");
  fs::path tr_in, tr_out;
  std::optional<fs::path> cache_dir;
  std::string tr_pivot = "en", provider = "identity", endpoint;
  double noise_rate = 0.0;
  std::uint64_t noise_seed = 0;
  int cycles = 1;
  std::size_t batch_size = 100, max_in_flight = 4;
  tr->add_option("--in", tr_in, "Original corpus JSONL")->required()->check(CLI::ExistingFile);
  tr->add_option("--pivot", tr_pivot, "Pivot language");
  tr->add_option("--provider", provider, "Translation provider")
      ->check(CLI::IsMember({"google", "identity", "noise"}));
  tr->add_option("--noise-rate", noise_rate, "Token replacement rate of the noise provider")
      ->check(CLI::Range(0.0, 1.0));
  tr->add_option("--noise-seed", noise_seed, "Noise provider seed");
  tr->add_option("--cycles", cycles, "Backtranslation cycles")->check(CLI::PositiveNumber);
  tr->add_option("--out-dir", tr_out, "Corpus checkpoint directory")->required();
  tr->add_option("--cache-dir", cache_dir, "Translation cache (default <out-dir>/cache)");
  tr->add_option("--batch-size", batch_size, "Texts per provider request")->check(CLI::PositiveNumber);
  tr->add_option("--max-in-flight", max_in_flight, "Concurrent provider requests")->check(CLI::PositiveNumber);
  tr->add_option("--endpoint", endpoint, "Remote provider base URL");

  // shared analytic flags
  fs::path corpus_dir, out_path;
  std::optional<int> cycle;
  std::uint64_t seed = 0;
  auto analytic_flags = [&](CLI::App* sub) {
    sub->add_option("--corpus", corpus_dir, "Corpus checkpoint directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--cycle", cycle, "Use cycle N as the backtranslated variant")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Random seed")->required();
    sub->add_option("--out", out_path, "Output JSON")->required();
  };

  auto* sent = app.add_subcommand("sentiment", "Lexicon sentiment accuracy with bootstrap intervals");
  fs::path lexicons;
  std::string pivot_lang = "en", exclusion = "both";
  int replicates = 1000;
  analytic_flags(sent);
  sent->add_option("--lexicons", lexicons, "Directory of <lang>.tsv lexicons")->required()->check(CLI::ExistingDirectory);
  sent->add_option("--replicates", replicates, "Bootstrap replicates")->check(CLI::PositiveNumber);
  sent->add_option("--pivot", pivot_lang, "Pivot language");
  sent->add_option("--neutral-exclusion", exclusion, "none | gold | predicted | both")
      ->check(CLI::IsMember({"none", "gold", "predicted", "both"}));

  auto* top = app.add_subcommand("topics", "GSDMM cluster match rates over a K sweep");
  fs::path stopwords;
  topics::SweepOptions sweep;
  analytic_flags(top);
  top->add_option("--stopwords", stopwords, "Directory of <lang>.txt stopword lists")
      ->required()
      ->check(CLI::ExistingDirectory);
  top->add_option("--ks", sweep.ks, "Cluster counts")->delimiter(',');
  top->add_option("--alpha", sweep.alpha, "Cluster prior");
  top->add_option("--beta", sweep.beta, "Word prior");
  top->add_option("--iters", sweep.iterations, "Gibbs sweeps")->check(CLI::PositiveNumber);
  top->add_option("--perms", sweep.permutations, "Permutations for the null")->check(CLI::PositiveNumber);

  auto* emb = app.add_subcommand("embed", "Embedding distances against peer baselines");
  fs::path embeddings;
  std::size_t peers = 5000;
  analytic_flags(emb);
  emb->add_option("--embeddings", embeddings, "Directory of <lang>.txt embedding tables")
      ->required()
      ->check(CLI::ExistingDirectory);
  emb->add_option("--peers", peers, "Peers sampled per record")->check(CLI::PositiveNumber);

  auto* render = app.add_subcommand("render", "Emit CSV tables and SVG plots from report JSON");
  std::optional<fs::path> report_in, sent_in, topics_in, embed_in;
  fs::path render_out;
  render->add_option("--report", report_in, "Merged report.json")->check(CLI::ExistingFile);
  render->add_option("--sentiment", sent_in, "Sentiment section JSON")->check(CLI::ExistingFile);
  render->add_option("--topics", topics_in, "Topics section JSON")->check(CLI::ExistingFile);
  render->add_option("--embed", embed_in, "Embedding section JSON")->check(CLI::ExistingFile);
  render->add_option("--out-dir", render_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pipeline::kConfigError;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*run) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config " + config_path.string());
      json raw = json::parse(in, nullptr, false);
      if (raw.is_discarded()) throw ConfigError("config " + config_path.string() + " is not valid JSON");
      pipeline::apply_overrides(raw, overrides);
      const auto cfg = pipeline::config_from_json(raw, config_path.parent_path());
      const auto result = pipeline::run_pipeline(cfg);
      for (const auto& [section, status] : result.report.status) spdlog::info("{}: {}", section, status);
      spdlog::info("estimated translation cost: ${:.2f} for {} characters", result.report.metadata.estimated_cost_usd,
                   result.report.metadata.characters_translated);
      return result.exit_code;
    }

    if (*ingest) {
      corpus::AdapterRegistry registry;
      if (!adapters_file.empty()) registry.load_file(adapters_file);
      auto loaded = corpus::load_corpora(ingest_in, adapter, registry, ingest_pivot);
      std::set<std::string> keep(ingest_langs.begin(), ingest_langs.end());
      if (keep.count(ingest_pivot)) throw ConfigError("pivot language cannot be ingested for analysis");
      for (const auto& l : keep)
        if (!loaded.count(l)) throw DataError("language '" + l + "' has no records in " + ingest_in.string());
      for (auto& [lang, c] : loaded) {
        if (!keep.empty() && !keep.count(lang)) continue;
        if (sample_n) c = corpus::sample_corpus(c, *sample_n, sample_seed);
        const fs::path out = pipeline::variant_path(ingest_out, lang, "original");
        corpus::write_variant(c, corpus::Variant::original, out, ingest_pivot);
        spdlog::info("{}: kept {} of {} rows -> {}", lang, c.size(), c.provenance.raw_count, out.string());
      }
      return pipeline::kOk;
    }

    if (*tr) {
      const corpus::Corpus c = read_input(tr_in, tr_pivot);
      fs::create_directories(tr_out);
      const fs::path original = pipeline::variant_path(tr_out, c.lang, "original");
      if (fs::weakly_canonical(original) != fs::weakly_canonical(tr_in))
        corpus::write_variant(c, corpus::Variant::original, original, tr_pivot);
      translate::ProviderSpec spec;
      spec.name = provider;
      spec.noise_rate = noise_rate;
      spec.noise_seed = noise_seed;
      if (provider == "noise") spec.noise_vocabulary = translate::corpus_vocabulary(c);
      spec.endpoint = endpoint;
      auto p = translate::make_provider(spec);
      translate::TranslationCache cache(cache_dir.value_or(tr_out / "cache"));
      translate::TranslateOptions opts;
      opts.cache = &cache;
      opts.batch_size = batch_size;
      opts.max_in_flight = max_in_flight;
      try {
        const auto all = translate::iterated_backtranslate(c, tr_pivot, cycles, *p, opts, tr_out);
        pipeline::write_translated(all.front(), tr_out, tr_pivot);
        spdlog::info("{}: {} records round-tripped, {} characters sent for cycle 1", c.lang, all.front().size(),
                     pipeline::round_trip_characters(all.front()));
      } catch (const translate::AuthError& e) {
        spdlog::error("provider authentication failed: {}", e.what());
        return pipeline::kProviderFailure;
      } catch (const translate::RateLimitExhausted& e) {
        spdlog::error("{}; {} items are cached, rerun to resume", e.what(), e.completed());
        return pipeline::kProviderFailure;
      }
      return pipeline::kOk;
    }

    if (*sent) {
      const auto corpora = pipeline::read_corpora_dir(corpus_dir, cycle);
      return run_analytic(
          [&] {
            std::map<std::string, sentiment::ValenceLexicon> lex;
            auto langs = corpus_langs(corpora);
            langs.push_back(pivot_lang);
            for (const auto& l : langs)
              if (auto p = file_in(lexicons, l, ".tsv"); p && !lex.count(l))
                lex.emplace(l, sentiment::ValenceLexicon::load_tsv(*p, l));
            sentiment::SentimentOptions opts;
            opts.replicates = replicates;
            opts.seed = seed;
            opts.exclusion = sentiment::neutral_exclusion_from_string(exclusion);
            return sentiment::to_json(sentiment::sentiment_report(corpora, lex, pivot_lang, opts));
          },
          out_path);
    }

    if (*top) {
      const auto corpora = pipeline::read_corpora_dir(corpus_dir, cycle);
      sweep.seed = seed;
      return run_analytic(
          [&] {
            std::map<std::string, topics::StopwordList> sw;
            for (const auto& l : corpus_langs(corpora))
              if (auto p = file_in(stopwords, l, ".txt")) sw.emplace(l, topics::load_stopwords(*p));
            return topics::to_json(topics::topics_report(corpora, sw, sweep));
          },
          out_path);
    }

    if (*emb) {
      const auto corpora = pipeline::read_corpora_dir(corpus_dir, cycle);
      return run_analytic(
          [&] {
            std::map<std::string, embed::EmbeddingTable> tables;
            for (const auto& l : corpus_langs(corpora))
              if (auto p = file_in(embeddings, l, ".txt")) tables.emplace(l, embed::EmbeddingTable::load(*p, l));
            return embed::to_json(embed::embedding_report(corpora, tables, peers, seed));
          },
          out_path);
    }

    if (*render) {
      report::ValidationReport r;
      if (report_in) {
        r = report::report_from_json(report::read_json_file(*report_in));
      } else {
        if (!sent_in && !topics_in && !embed_in) throw ConfigError("render needs --report or a section file");
        r.metadata.prng = std::string(stats::kPrngId);
        if (sent_in) r.sentiment = sentiment::sentiment_report_from_json(report::read_json_file(*sent_in));
        if (topics_in) r.topics = topics::topics_report_from_json(report::read_json_file(*topics_in));
        if (embed_in) r.embedding = embed::embedding_report_from_json(report::read_json_file(*embed_in));
      }
      for (const auto& p : report::emit_tables(r, render_out)) spdlog::info("wrote {}", p.string());
      for (const auto& p : report::emit_plots(r, render_out)) spdlog::info("wrote {}", p.string());
      return pipeline::kOk;
    }
  } catch (const translate::AuthError& e) {
    spdlog::error("{}", e.what());
    return pipeline::kProviderFailure;
  } catch (const translate::RateLimitExhausted& e) {
    spdlog::error("{}", e.what());
    return pipeline::kProviderFailure;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return pipeline::kConfigError;
  }
  return pipeline::kOk;
}
