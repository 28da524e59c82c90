#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "btvalid/error.hpp"
#include "btvalid/pipeline.hpp"
#include "btvalid/stats.hpp"
#include "btvalid/text.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace btvalid;
using namespace btvalid::pipeline;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

synth::Spec small_spec() {
  synth::Spec s;
  s.docs_per_cluster = 60;
  return s;
}

// Resources for one German corpus under a fresh directory, plus a config
// pointing at them with relative paths.
struct Workspace {
  fs::path dir;
  json config;

  explicit Workspace(const std::string& name) : dir(synth::temp_dir(name)) {
    synth::write_resources(small_spec(), dir);
    config = {{"datasets", {{{"path", "dataset.jsonl"}}}},
              {"lexicons_dir", "lexicons"},
              {"stopwords_dir", "stopwords"},
              {"embeddings_dir", "embeddings"},
              {"ks", {2}},
              {"replicates", 200},
              {"permutations", 100},
              {"peers", 100},
              {"seeds", {{"noise", 7}, {"bootstrap", 1}, {"topics", 2}, {"peers", 3}, {"sample", 4}}},
              {"out_dir", "out"}};
  }
  PipelineConfig cfg() const { return config_from_json(config, dir); }
  fs::path out() const { return dir / config.value("out_dir", "out"); }
  RunResult run() const { return run_pipeline(cfg()); }
};

std::map<std::string, std::string> report_files(const fs::path& reports) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(reports)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, ParsesAndResolvesRelativePaths) {
  Workspace w("pipe_cfg");
  const auto c = w.cfg();
  EXPECT_EQ(c.datasets.at(0).path, w.dir / "dataset.jsonl");
  EXPECT_EQ(c.datasets.at(0).adapter, "jsonl");
  EXPECT_EQ(*c.lexicons_dir, w.dir / "lexicons");
  EXPECT_EQ(c.out_dir, w.dir / "out");
  EXPECT_EQ(c.ks, std::vector<int>{2});
  EXPECT_EQ(*c.seeds.topics, 2u);
  EXPECT_EQ(c.pivot, "en");
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, Defaults) {
  PipelineConfig c;
  EXPECT_EQ(c.ks, (std::vector<int>{2, 5, 10, 15, 20, 50, 100, 150, 200}));
  EXPECT_DOUBLE_EQ(c.alpha, 0.1);
  EXPECT_DOUBLE_EQ(c.beta, 0.1);
  EXPECT_EQ(c.iterations, 5);
  EXPECT_EQ(c.replicates, 1000);
  EXPECT_EQ(c.permutations, 1000);
  EXPECT_EQ(c.peers, 5000u);
  EXPECT_EQ(c.cycles, 1);
}

TEST(Config, UnknownKeyRejected) {
  Workspace w("pipe_cfg_unknown");
  w.config["replicatez"] = 5;
  EXPECT_THROW(w.cfg(), ConfigError);
}

TEST(Config, ValidationFailures) {
  Workspace w("pipe_cfg_bad");
  auto expect_bad = [&](const std::function<void(json&)>& edit, const char* what) {
    json j = w.config;
    edit(j);
    EXPECT_THROW(config_from_json(j, w.dir).validate(), ConfigError) << what;
  };
  expect_bad([](json& j) { j["seeds"].erase("bootstrap"); }, "bootstrap seed");
  expect_bad([](json& j) { j["seeds"].erase("topics"); }, "topics seed");
  expect_bad([](json& j) { j["seeds"].erase("peers"); }, "peers seed");
  expect_bad(
      [](json& j) {
        j["seeds"].erase("noise");
        j["provider"] = {{"name", "noise"}, {"noise_rate", 0.2}};
      },
      "noise seed");
  expect_bad(
      [](json& j) {
        j["seeds"].erase("sample");
        j["sample_sizes"] = {{"*", 10}};
      },
      "sample seed");
  expect_bad([](json& j) { j["datasets"][0]["languages"] = {"de", "en"}; }, "pivot analyzed");
  expect_bad([](json& j) { j["sample_sizes"] = {{"en", 10}}; }, "pivot sampled");
  expect_bad([](json& j) { j["datasets"][0]["path"] = "nope.jsonl"; }, "missing dataset");
  expect_bad([](json& j) { j["lexicons_dir"] = "nope"; }, "missing lexicons");
  expect_bad([](json& j) { j.erase("embeddings_dir"); }, "no embeddings dir");
  expect_bad([](json& j) { j["provider"] = {{"name", "babel"}}; }, "provider");
  expect_bad([](json& j) { j["provider"] = {{"name", "noise"}, {"noise_rate", 1.5}}; }, "rate");
  expect_bad([](json& j) { j["cycles"] = 0; }, "cycles");
  expect_bad([](json& j) { j["ks"] = {2, 0}; }, "K");
  expect_bad([](json& j) { j["alpha"] = 0.0; }, "alpha");
  expect_bad([](json& j) { j["neutral_exclusion"] = "sometimes"; }, "exclusion");
  expect_bad([](json& j) { j["pivot"] = "English"; }, "pivot code");
  expect_bad([](json& j) { j["ks"] = "two"; }, "type");
}

TEST(Config, GoogleNeedsKey) {
  Workspace w("pipe_cfg_google");
  ::unsetenv("TRANSLATE_API_KEY");
  w.config["provider"] = {{"name", "google"}};
  EXPECT_THROW(w.cfg().validate(), ConfigError);
  ::setenv("TRANSLATE_API_KEY", "from-env", 1);
  EXPECT_NO_THROW(w.cfg().validate());
  ::unsetenv("TRANSLATE_API_KEY");
  w.config["provider"]["api_key"] = "k";
  EXPECT_NO_THROW(w.cfg().validate());
}

TEST(Config, DisabledAnalyticNeedsNoSeed) {
  Workspace w("pipe_cfg_disabled");
  w.config["seeds"].erase("topics");
  w.config.erase("stopwords_dir");
  w.config["analytics"] = {{"topics", false}};
  EXPECT_NO_THROW(w.cfg().validate());
}

TEST(Config, SampleSizeWildcard) {
  PipelineConfig c;
  c.sample_sizes = {{"*", 10}, {"de", 5}};
  EXPECT_EQ(c.sample_size("de"), 5u);
  EXPECT_EQ(c.sample_size("fr"), 10u);
  c.sample_sizes.erase("*");
  EXPECT_FALSE(c.sample_size("fr"));
}

TEST(Config, LoadConfigFile) {
  Workspace w("pipe_cfg_file");
  std::ofstream(w.dir / "config.json") << w.config.dump(2);
  const auto c = load_config(w.dir / "config.json");
  EXPECT_EQ(c.datasets.at(0).path, w.dir / "dataset.jsonl");
  std::ofstream(w.dir / "broken.json") << "{ not json";
  EXPECT_THROW(load_config(w.dir / "broken.json"), ConfigError);
  EXPECT_THROW(load_config(w.dir / "absent.json"), ConfigError);
}

TEST(Overrides, DottedKeysAndValueParsing) {
  json j = {{"provider", {{"name", "identity"}}}, {"ks", {2}}};
  apply_overrides(j, {"provider.name=noise", "provider.noise_rate=0.3", "ks=[2,3]", "pivot=fr", "seeds.topics=9",
                      "analytics.topics=false"});
  EXPECT_EQ(j["provider"]["name"], "noise");
  EXPECT_DOUBLE_EQ(j["provider"]["noise_rate"].get<double>(), 0.3);
  EXPECT_EQ(j["ks"], json({2, 3}));
  EXPECT_EQ(j["pivot"], "fr");
  EXPECT_EQ(j["seeds"]["topics"], 9);
  EXPECT_EQ(j["analytics"]["topics"], false);
  EXPECT_THROW(apply_overrides(j, {"novalue"}), ConfigError);
  EXPECT_THROW(apply_overrides(j, {"=3"}), ConfigError);
}

// ---------------------------------------------------------------- end to end

TEST(Pipeline, IdentityRunIsExact) {
  Workspace w("pipe_identity");
  const auto result = w.run();
  ASSERT_EQ(result.exit_code, kOk);
  const auto& r = result.report;
  EXPECT_TRUE(r.complete());
  EXPECT_EQ(r.metadata.prng, stats::kPrngId);
  EXPECT_EQ(r.metadata.provider, "identity");
  EXPECT_EQ(r.metadata.languages, std::vector<std::string>{"de"});
  EXPECT_EQ(r.metadata.seeds.at("bootstrap"), 1u);

  const auto& s = r.sentiment->languages.at("de");
  using corpus::Variant;
  ASSERT_TRUE(s.at(Variant::original));
  EXPECT_EQ(s.at(Variant::original), s.at(Variant::back));
  EXPECT_EQ(s.at(Variant::original), s.at(Variant::pivot));
  for (const auto& row : r.topics->languages.at("de").rows) EXPECT_DOUBLE_EQ(row.match_rate, 1.0);
  EXPECT_DOUBLE_EQ(r.embedding->languages.at("de").mean_back_distance, 0.0);
  EXPECT_TRUE(r.embedding->languages.at("de").passes_min);

  // identity sends every original then the identical pivot
  const auto corpora = read_corpora_dir(w.out() / "corpora");
  ASSERT_EQ(corpora.size(), 1u);
  std::size_t chars = 0;
  for (const auto& rec : corpora[0].records) chars += text::decode(rec.text_original).size();
  EXPECT_EQ(r.metadata.characters_translated, 2 * chars);
  EXPECT_EQ(round_trip_characters(corpora[0]), 2 * chars);
  EXPECT_DOUBLE_EQ(r.metadata.estimated_cost_usd, report::estimate_cost_usd(2 * chars));

  for (const char* f : {"report.json", "sentiment.csv", "topics.csv", "embedding.csv", "sentiment.json",
                        "topics.json", "embedding.json", "sentiment_pooled.svg", "sentiment_by_language.svg",
                        "topics_heatmap.svg", "topics_by_k.svg", "embedding_distances.svg"})
    EXPECT_TRUE(fs::exists(w.out() / "reports" / f)) << f;
  EXPECT_TRUE(synth::plot_table_mismatches(w.out() / "reports").empty());
  EXPECT_EQ(report::report_from_json(report::read_json_file(w.out() / "reports" / "report.json")), r);
}

TEST(Pipeline, RerunIsByteIdenticalAndReusesCheckpoints) {
  Workspace w("pipe_rerun");
  w.config["provider"] = {{"name", "noise"}, {"noise_rate", 0.3}};
  ASSERT_EQ(w.run().exit_code, kOk);
  const auto first = report_files(w.out() / "reports");
  const auto topics_time = fs::last_write_time(w.out() / "reports" / "topics.json");
  const auto back_time = fs::last_write_time(w.out() / "corpora" / "de.back.jsonl");

  const auto again = w.run();
  ASSERT_EQ(again.exit_code, kOk);
  EXPECT_EQ(report_files(w.out() / "reports"), first);
  EXPECT_EQ(fs::last_write_time(w.out() / "reports" / "topics.json"), topics_time);
  EXPECT_EQ(fs::last_write_time(w.out() / "corpora" / "de.back.jsonl"), back_time);
  EXPECT_GT(again.report.metadata.characters_translated, 0u);
}

TEST(Pipeline, FreshOutputDirsAgree) {
  Workspace w("pipe_fresh");
  ASSERT_EQ(w.run().exit_code, kOk);
  const auto first = report_files(w.out() / "reports");
  w.config["out_dir"] = "out2";
  ASSERT_EQ(w.run().exit_code, kOk);
  EXPECT_EQ(report_files(w.dir / "out2" / "reports"), first);
}

TEST(Pipeline, StaleMarkersAreDetected) {
  Workspace w("pipe_stale");
  ASSERT_EQ(w.run().exit_code, kOk);
  const fs::path sentiment = w.out() / "reports" / "sentiment.json";
  const std::string good = slurp(sentiment);

  // tampered output: recomputed
  std::ofstream(sentiment, std::ios::trunc) << "{\"tampered\": true}";
  ASSERT_EQ(w.run().exit_code, kOk);
  EXPECT_EQ(slurp(sentiment), good);

  // changed input: recomputed; untouched sections reused
  const auto topics_time = fs::last_write_time(w.out() / "reports" / "topics.json");
  w.config["replicates"] = 300;
  const auto r = w.run();
  ASSERT_EQ(r.exit_code, kOk);
  EXPECT_NE(slurp(sentiment), good);
  EXPECT_EQ(fs::last_write_time(w.out() / "reports" / "topics.json"), topics_time);

  // changed resource file: recomputed
  const auto sentiment_time = fs::last_write_time(sentiment);
  const std::string before = slurp(sentiment);
  std::ofstream(w.dir / "lexicons" / "de.tsv", std::ios::app) << "zzzextra\t1\n";
  ASSERT_EQ(w.run().exit_code, kOk);
  EXPECT_NE(fs::last_write_time(sentiment), sentiment_time);
  EXPECT_EQ(slurp(sentiment), before);  // the added word never occurs

  // tampered translation checkpoint: retranslated
  const fs::path back = w.out() / "corpora" / "de.back.jsonl";
  const std::string back_good = slurp(back);
  std::ofstream(back, std::ios::trunc) << "";
  ASSERT_EQ(w.run().exit_code, kOk);
  EXPECT_EQ(slurp(back), back_good);
}

TEST(Pipeline, NoiseOrdersTheMetrics) {
  Workspace w("pipe_noise");
  w.config["provider"] = {{"name", "noise"}, {"noise_rate", 0.1}};
  const auto low = w.run();
  w.config["provider"]["noise_rate"] = 0.6;
  w.config["out_dir"] = "out_high";
  const auto high = w.run();
  ASSERT_EQ(low.exit_code, kOk);
  ASSERT_EQ(high.exit_code, kOk);
  EXPECT_EQ(low.report.metadata.provider, "noise(0.1)");
  const auto& tl = low.report.topics->languages.at("de").rows.at(0);
  const auto& th = high.report.topics->languages.at("de").rows.at(0);
  EXPECT_GT(tl.match_rate, th.match_rate);
  const auto& el = low.report.embedding->languages.at("de");
  const auto& eh = high.report.embedding->languages.at("de");
  EXPECT_GT(el.mean_back_distance, 0.0);
  EXPECT_LT(el.mean_back_distance, eh.mean_back_distance);
  const auto& sl = low.report.sentiment->languages.at("de");
  const auto& sh = high.report.sentiment->languages.at("de");
  using corpus::Variant;
  EXPECT_GT(sl.at(Variant::back)->median, sh.at(Variant::back)->median);
  EXPECT_GE(sl.at(Variant::original)->median, sl.at(Variant::back)->median);
}

TEST(Pipeline, SamplingAndExclusions) {
  Workspace w("pipe_sample");
  w.config["sample_sizes"] = {{"*", 50}};
  std::ofstream(w.dir / "dataset.jsonl", std::ios::app)
      << R"({"id": "blank", "lang": "de", "text": "1234 @user http://x.y", "label": 1})" << "\n";
  const auto r = w.run();
  ASSERT_EQ(r.exit_code, kOk);
  EXPECT_EQ(read_corpora_dir(w.out() / "corpora").at(0).size(), 50u);
  const auto& ex = r.report.metadata.exclusions.at("de");
  EXPECT_EQ(ex.at("empty"), 1u);
  EXPECT_EQ(ex.at("sampled_out"), 120u - 50u);
}

TEST(Pipeline, FailedAnalyticIsPartial) {
  Workspace w("pipe_partial");
  std::ofstream(w.dir / "embeddings" / "de.txt", std::ios::trunc) << "3 16\nbroken 1 2\n";
  const auto r = w.run();
  EXPECT_EQ(r.exit_code, kPartialFailure);
  EXPECT_EQ(r.report.status.at("sentiment"), "ok");
  EXPECT_EQ(r.report.status.at("topics"), "ok");
  EXPECT_EQ(r.report.status.at("embedding").rfind("failed: ", 0), 0u);
  EXPECT_FALSE(r.report.embedding);
  const auto j = report::read_json_file(w.out() / "reports" / "report.json");
  EXPECT_TRUE(j["embedding"].is_null());
  EXPECT_FALSE(fs::exists(w.out() / "reports" / "embedding_distances.svg"));
  EXPECT_TRUE(fs::exists(w.out() / "reports" / "topics_heatmap.svg"));
}

TEST(Pipeline, MissingLanguageIsDataError) {
  Workspace w("pipe_lang");
  w.config["datasets"][0]["languages"] = {"de", "fr"};
  EXPECT_THROW(w.run(), DataError);
}

TEST(Pipeline, IteratedCyclesReadable) {
  Workspace w("pipe_cycles");
  w.config["provider"] = {{"name", "noise"}, {"noise_rate", 0.3}};
  w.config["cycles"] = 2;
  w.config["analytics"] = {{"sentiment", false}, {"topics", false}, {"embedding", false}};
  const auto r = w.run();
  ASSERT_EQ(r.exit_code, kOk);
  EXPECT_EQ(r.report.status.at("topics"), "skipped");
  const auto dir = w.out() / "corpora";
  const auto first = read_corpora_dir(dir);
  const auto one = read_corpora_dir(dir, 1);
  const auto two = read_corpora_dir(dir, 2);
  ASSERT_EQ(first.at(0).size(), two.at(0).size());
  std::size_t differ = 0;
  for (std::size_t i = 0; i < first[0].size(); ++i) {
    EXPECT_EQ(first[0].records[i].text_back, one[0].records[i].text_back);
    EXPECT_EQ(first[0].records[i].text_original, two[0].records[i].text_original);
    differ += first[0].records[i].text_back != two[0].records[i].text_back;
  }
  EXPECT_GT(differ, 0u);
  EXPECT_THROW(read_corpora_dir(dir, 3), Error);
  EXPECT_THROW(read_corpora_dir(w.dir / "nowhere"), ConfigError);
}

// ---------------------------------------------------------------- provider failure

TEST(Pipeline, RejectedCredentialsStopWithProviderFailure) {
  httplib::Server server;
  int requests = 0;
  server.Post("/language/translate/v2", [&](const httplib::Request&, httplib::Response& res) {
    ++requests;
    res.status = 403;
    res.set_content("{}", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  Workspace w("pipe_auth");
  w.config["provider"] = {
      {"name", "google"}, {"api_key", "bad"}, {"endpoint", "http://127.0.0.1:" + std::to_string(port)}};
  const auto r = w.run();
  server.stop();
  thread.join();
  EXPECT_EQ(r.exit_code, kProviderFailure);
  EXPECT_EQ(r.report.status.at("translate").rfind("failed: ", 0), 0u);
  EXPECT_GE(requests, 1);
  EXPECT_LE(requests, 4);  // one per in-flight batch at most; auth errors are not retried
  EXPECT_TRUE(fs::exists(w.out() / "reports" / "report.json"));
  EXPECT_FALSE(fs::exists(w.out() / "state" / "de.translate.done"));
}
