#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "btvalid/report.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace btvalid;
using namespace btvalid::report;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const ValidationReport& two_language_report() {
  static const ValidationReport r = synth::toy_report({"de", "fr"});
  return r;
}

}  // namespace

TEST(Format, FixedDecimals) {
  EXPECT_EQ(format_rate(0.5), "0.5000");
  EXPECT_EQ(format_rate(1.0 / 3.0), "0.3333");
  EXPECT_EQ(format_distance(0.0), "0.000");
  EXPECT_EQ(format_distance(0.26666), "0.267");
}

TEST(Cost, TwentyDollarsPerMillion) {
  EXPECT_DOUBLE_EQ(estimate_cost_usd(0), 0.0);
  EXPECT_DOUBLE_EQ(estimate_cost_usd(1'000'000), 20.0);
  EXPECT_DOUBLE_EQ(estimate_cost_usd(250'000), 5.0);
}

TEST(Tables, SentimentOneRowPerLanguagePlusPooled) {
  const auto t = sentiment_table(two_language_report());
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][0], "de");
  EXPECT_EQ(t.rows[1][0], "fr");
  EXPECT_EQ(t.rows[2][0], "pooled");
  EXPECT_EQ(t.header.front(), "lang");
  for (const char* v : {"original", "pivot", "back"})
    for (const char* s : {"_n", "_median", "_hci99_low", "_hci99_high"})
      EXPECT_NE(std::find(t.header.begin(), t.header.end(), std::string(v) + s), t.header.end()) << v << s;
  // pooled n is the sum of the per-language n
  const auto n = [&](const char* row) { return std::stoul(*t.cell(row, "original_n")); };
  EXPECT_EQ(n("pooled"), n("de") + n("fr"));
}

TEST(Tables, IdentityVariantsAgree) {
  const auto t = sentiment_table(two_language_report());
  for (const char* lang : {"de", "fr", "pooled"}) {
    EXPECT_EQ(*t.cell(lang, "original_median"), *t.cell(lang, "back_median")) << lang;
    EXPECT_EQ(*t.cell(lang, "original_hci99_low"), *t.cell(lang, "back_hci99_low")) << lang;
  }
}

TEST(Tables, TopicsRowsPerLanguageAndK) {
  const auto t = topics_table(two_language_report());
  for (const char* key : {"de@2", "de@5", "fr@2", "fr@5", "all@2", "all@5"}) {
    ASSERT_TRUE(t.cell(key, "match_rate")) << key;
    EXPECT_EQ(*t.cell(key, "match_rate"), "1.0000") << key;
  }
  EXPECT_EQ(*t.cell("all@2", "null_se"), std::string(kNull));
  EXPECT_EQ(*t.cell("de@2", "stopwords_missing"), "true");
}

TEST(Tables, EmbeddingIdentityDistanceZero) {
  const auto t = embedding_table(two_language_report());
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(*t.cell("de", "mean_back_distance"), "0.000");
  EXPECT_EQ(*t.cell("de", "passes_min"), "true");
  EXPECT_EQ(*t.cell("fr", "passes_mean"), "true");
}

TEST(Tables, CellLookupMisses) {
  const auto t = embedding_table(two_language_report());
  EXPECT_FALSE(t.cell("xx", "compared"));
  EXPECT_FALSE(t.cell("de", "nonexistent"));
}

TEST(Csv, RoundTrip) {
  Table t{{"a", "b,c", "d"}, {{"x", "1", "he said \"hi\""}, {"y", "line\nbreak", ""}}};
  const auto back = parse_csv(to_csv(t));
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  for (const auto& made : {sentiment_table(two_language_report()), topics_table(two_language_report())}) {
    const auto again = parse_csv(to_csv(made));
    EXPECT_EQ(again.header, made.header);
    EXPECT_EQ(again.rows, made.rows);
  }
}

TEST(Json, RoundTripIsExact) {
  auto r = two_language_report();
  r.metadata.seeds = {{"bootstrap", 1}, {"topics", 2}};
  r.metadata.exclusions["de"]["empty_after_cleaning"] = 3;
  r.metadata.characters_translated = 12345;
  r.metadata.estimated_cost_usd = estimate_cost_usd(12345);
  const auto j = to_json(r);
  EXPECT_EQ(report_from_json(j), r);
  // through text as well
  EXPECT_EQ(report_from_json(nlohmann::json::parse(j.dump())), r);
}

TEST(Json, PartialReportHasExplicitNulls) {
  auto r = two_language_report();
  r.topics.reset();
  r.status["topics"] = "failed: boom";
  const auto j = to_json(r);
  ASSERT_TRUE(j.contains("topics"));
  EXPECT_TRUE(j["topics"].is_null());
  EXPECT_FALSE(r.complete());
  EXPECT_EQ(report_from_json(j), r);
}

TEST(Json, CompleteAcceptsSkipped) {
  ValidationReport r;
  r.status = {{"sentiment", "ok"}, {"topics", "skipped"}};
  EXPECT_TRUE(r.complete());
  r.status["embedding"] = "failed: x";
  EXPECT_FALSE(r.complete());
}

TEST(Emit, TablesAndJson) {
  const auto dir = synth::temp_dir("report_emit");
  const auto files = emit_tables(two_language_report(), dir);
  for (const char* f : {"sentiment.csv", "topics.csv", "embedding.csv", "report.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_GE(files.size(), 4u);
  EXPECT_EQ(report_from_json(read_json_file(dir / "report.json")), two_language_report());
  const auto t = parse_csv(slurp(dir / "embedding.csv"));
  EXPECT_EQ(t.rows, embedding_table(two_language_report()).rows);
}

TEST(Emit, PartialReportTablesCarryNulls) {
  auto r = two_language_report();
  r.embedding.reset();
  r.status["embedding"] = "failed: bad table";
  const auto dir = synth::temp_dir("report_partial");
  emit_tables(r, dir);
  const auto j = read_json_file(dir / "report.json");
  EXPECT_TRUE(j["embedding"].is_null());
  EXPECT_EQ(j["status"]["embedding"], "failed: bad table");
}

TEST(Plots, FiveFiguresWhoseMarksMatchTables) {
  const auto dir = synth::temp_dir("report_plots");
  emit_tables(two_language_report(), dir);
  const auto svgs = emit_plots(two_language_report(), dir);
  ASSERT_EQ(svgs.size(), 5u);
  for (const char* f : {"sentiment_pooled.svg", "sentiment_by_language.svg", "topics_heatmap.svg", "topics_by_k.svg",
                        "embedding_distances.svg"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::size_t marks = 0;
  const auto problems = synth::plot_table_mismatches(dir, &marks);
  EXPECT_TRUE(problems.empty()) << problems.front();
  EXPECT_GT(marks, 30u);
}

TEST(Plots, EveryTableValueAppearsInSomeFigure) {
  const auto dir = synth::temp_dir("report_plots_cover");
  emit_tables(two_language_report(), dir);
  emit_plots(two_language_report(), dir);
  std::string all;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".svg") all += slurp(e.path());
  const auto t = topics_table(two_language_report());
  for (const auto& row : t.rows)
    EXPECT_NE(all.find("data-row=\"" + row[0] + "\" data-col=\"match_rate\""), std::string::npos) << row[0];
  for (const char* lang : {"de", "fr"})
    for (const char* col : {"mean_back_distance", "min_baseline", "mean_baseline"})
      EXPECT_NE(all.find(std::string("data-table=\"embedding\" data-row=\"") + lang + "\" data-col=\"" + col + "\""),
                std::string::npos)
          << lang << col;
}

TEST(Plots, IdentityDistanceBarsHaveZeroHeight) {
  const auto dir = synth::temp_dir("report_plots_zero");
  emit_plots(two_language_report(), dir);
  const auto svg = slurp(dir / "embedding_distances.svg");
  static const std::regex bar(R"re(<rect [^>]*height="([0-9.]+)"[^>]*data-col="mean_back_distance")re");
  int bars = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), bar); it != std::sregex_iterator(); ++it) {
    ++bars;
    EXPECT_EQ(std::stod((*it)[1].str()), 0.0);
  }
  EXPECT_EQ(bars, 2);
}

TEST(Plots, SingleLanguage) {
  const auto r = synth::toy_report({"de"});
  const auto dir = synth::temp_dir("report_plots_single");
  emit_tables(r, dir);
  EXPECT_EQ(emit_plots(r, dir).size(), 5u);
  EXPECT_TRUE(synth::plot_table_mismatches(dir).empty());
}

TEST(Plots, MissingSectionSkipsItsFigures) {
  auto r = two_language_report();
  r.topics.reset();
  const auto dir = synth::temp_dir("report_plots_skip");
  emit_tables(r, dir);
  const auto svgs = emit_plots(r, dir);
  EXPECT_EQ(svgs.size(), 3u);
  EXPECT_FALSE(fs::exists(dir / "topics_heatmap.svg"));
  EXPECT_FALSE(fs::exists(dir / "topics_by_k.svg"));
  EXPECT_TRUE(synth::plot_table_mismatches(dir).empty());
}
