// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "btvalid/embed.hpp"
#include "btvalid/pipeline.hpp"
#include "btvalid/report.hpp"
#include "btvalid/sentiment.hpp"
#include "btvalid/stats.hpp"
#include "btvalid/text.hpp"
#include "btvalid/topics.hpp"
#include "btvalid/translate.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace btvalid;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kIdentityRuntimeSeconds = 10.0;
constexpr double kDegradationRuntimeSeconds = 120.0;
constexpr double kNullStandardErrors = 3.0;
constexpr double kRecoveryPurity = 0.95;
constexpr int kRecoverySeedsRequired = 9;
constexpr double kCalibrationTolerance = 0.01;
constexpr double kCosineTolerance = 1e-12;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

nlohmann::json pipeline_config(const fs::path& dir) {
  return {{"datasets", {{{"path", "dataset.jsonl"}}}},
          {"lexicons_dir", "lexicons"},
          {"stopwords_dir", "stopwords"},
          {"embeddings_dir", "embeddings"},
          {"ks", {2}},
          {"seeds", {{"noise", 11}, {"bootstrap", 12}, {"topics", 13}, {"peers", 14}}},
          {"out_dir", (dir / "out").string()}};
}

// ---------------------------------------------------------------- 1

Outcome identity_round_trip() {
  Outcome o;
  synth::Spec spec;
  spec.docs_per_cluster = 500;  // 2 topics -> 1,000 records
  const auto dir = synth::temp_dir("accept_identity");
  synth::write_resources(spec, dir);
  const auto cfg = pipeline::config_from_json(pipeline_config(dir), dir);

  const auto t0 = Clock::now();
  const auto result = pipeline::run_pipeline(cfg);
  const double elapsed = seconds_since(t0);

  o.check(result.exit_code == pipeline::kOk, "exit code " + std::to_string(result.exit_code));
  const auto& r = result.report;
  if (!r.sentiment || !r.topics || !r.embedding) {
    o.check(false, "missing report section");
    return o;
  }
  const auto corpora = pipeline::read_corpora_dir(cfg.out_dir / "corpora");
  o.check(corpora.size() == 1 && corpora[0].size() == 1000, "1,000-record corpus");

  // accuracy from the raw scores as well as the bootstrap summaries
  const auto lexicon = synth::make_lexicon(spec, "de");
  std::vector<sentiment::SentimentResult> orig, back;
  std::vector<corpus::Polarity> gold;
  for (const auto& rec : corpora[0].records) {
    orig.push_back(sentiment::score_text(rec.text_original, lexicon, rec.id));
    back.push_back(sentiment::score_text(*rec.text_back, lexicon, rec.id));
    gold.push_back(*rec.label);
  }
  const auto acc_orig = sentiment::accuracy(orig, gold);
  const auto acc_back = sentiment::accuracy(back, gold);
  o.check(acc_orig && acc_back && *acc_orig == *acc_back, "accuracy original == backtranslated");
  const auto& s = r.sentiment->languages.at("de");
  o.check(s.at(corpus::Variant::original) == s.at(corpus::Variant::back), "bootstrap summaries identical");

  const auto& rows = r.topics->languages.at("de").rows;
  o.check(!rows.empty() && rows[0].match_rate == 1.0, "topic match_rate == 1.0");
  const double dist = r.embedding->languages.at("de").mean_back_distance;
  o.check(dist == 0.0, "mean embedding distance == 0");
  o.check(elapsed < kIdentityRuntimeSeconds, fmt::format("runtime {:.2f}s", elapsed));
  o.note(fmt::format("accuracy {:.4f}, match_rate {:.4f}, distance {}, runtime {:.2f}s", acc_orig.value_or(-1),
                     rows.empty() ? -1.0 : rows[0].match_rate, dist, elapsed));
  return o;
}

// ---------------------------------------------------------------- 2

Outcome monotone_degradation() {
  Outcome o;
  synth::Spec spec;
  spec.subtopics = 5;  // 2 topics x 5 subtopics x 200 = 2,000 records
  const auto made = synth::make_corpus(spec);
  const auto& c = made.corpus;
  const auto lexicon = synth::make_lexicon(spec, "de");
  const auto table = synth::make_embeddings(spec);
  const auto vocab = translate::corpus_vocabulary(c);

  std::vector<topics::TokenizedDoc> docs;
  for (const auto& r : c.records) docs.push_back(topics::preprocess_for_topics(r.id, r.text_original, nullptr));

  topics::SweepOptions so;
  so.ks = {2, 10};
  so.permutations = 1000;
  so.seed = 21;

  const std::vector<double> rates{0.0, 0.1, 0.3, 0.6, 1.0};
  std::vector<double> acc, dist;
  std::vector<std::vector<topics::SweepRow>> sweeps;
  std::vector<topics::TokenizedDoc> last_back;
  const auto t0 = Clock::now();
  for (double rate : rates) {
    translate::NoiseProvider provider(rate, 22, vocab);
    const auto t = translate::backtranslate_corpus(c, "en", provider);
    std::vector<sentiment::SentimentResult> preds;
    std::vector<corpus::Polarity> gold;
    std::vector<topics::TokenizedDoc> back;
    for (const auto& r : t.records) {
      preds.push_back(sentiment::score_text(*r.text_back, lexicon, r.id));
      gold.push_back(*r.label);
      back.push_back(topics::preprocess_for_topics(r.id, *r.text_back, nullptr));
    }
    acc.push_back(sentiment::accuracy(preds, gold).value_or(0.0));
    dist.push_back(embed::backtranslation_distances(t, table).mean);
    sweeps.push_back(topics::k_sweep(docs, back, so));
    last_back = std::move(back);
  }
  const double elapsed = seconds_since(t0);

  for (std::size_t i = 1; i < rates.size(); ++i) {
    o.check(acc[i] <= acc[i - 1], fmt::format("accuracy non-increasing at rate {}", rates[i]));
    o.check(dist[i] >= dist[i - 1], fmt::format("distance non-decreasing at rate {}", rates[i]));
    for (std::size_t k = 0; k < so.ks.size(); ++k)
      o.check(sweeps[i][k].match_rate <= sweeps[i - 1][k].match_rate,
              fmt::format("match_rate non-increasing at rate {} K={}", rates[i], so.ks[k]));
  }
  for (const auto& row : sweeps.back()) {
    // Monte-Carlo SE of a match rate under the null share p0 over n docs
    const double p0 = row.null_mean;
    const double se = std::sqrt(p0 * (1.0 - p0) / static_cast<double>(row.evaluated));
    o.check(std::abs(row.match_rate - p0) <= kNullStandardErrors * se,
            fmt::format("rate 1.0, K={}: match {:.4f} vs null {:.4f} (3 SE = {:.4f})", row.K, row.match_rate, p0,
                        kNullStandardErrors * se));
    o.note(fmt::format("K={} at rate 1.0: match {:.4f}, null {:.4f}, SE {:.4f}", row.K, row.match_rate, p0, se));
  }
  // Diagnostics: fitted cluster sizes, and where rate-1.0 back texts land.
  for (int K : so.ks) {
    const auto model = topics::gsdmm_fit(docs, {K, so.alpha, so.beta, so.iterations, so.seed});
    std::string sizes;
    for (auto m : model.m) sizes += fmt::format(" {}", m);
    std::size_t into_empty = 0;
    for (const auto& d : last_back) into_empty += model.m[static_cast<std::size_t>(topics::gsdmm_classify(model, d))] == 0;
    o.note(fmt::format("K={} fitted sizes{}; rate-1.0 back docs folded into empty clusters: {}/{}", K, sizes,
                       into_empty, last_back.size()));
  }
  o.check(elapsed < kDegradationRuntimeSeconds, fmt::format("runtime {:.1f}s", elapsed));
  std::string series = "accuracy";
  for (double a : acc) series += fmt::format(" {:.4f}", a);
  series += "; distance";
  for (double d : dist) series += fmt::format(" {:.4f}", d);
  series += "; K=2 match";
  for (const auto& s : sweeps) series += fmt::format(" {:.4f}", s[0].match_rate);
  series += "; K=10 match";
  for (const auto& s : sweeps) series += fmt::format(" {:.4f}", s[1].match_rate);
  o.note(series + fmt::format("; runtime {:.1f}s", elapsed));
  return o;
}

// ---------------------------------------------------------------- 3

Outcome gsdmm_recovery() {
  Outcome o;
  for (int K : {2, 5}) {
    int recovered = 0;
    bool conserved = true;
    std::string purities;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      synth::Spec spec;
      spec.topics = K;
      spec.docs_per_cluster = 200;
      spec.words_per_vocab = 50;
      spec.tokens_per_doc = 8;
      spec.seed = seed;
      std::vector<int> labels;
      const auto docs = synth::make_docs(spec, &labels);
      topics::GsdmmParams p;
      p.K = K;
      p.alpha = 0.1;
      p.beta = 0.1;
      p.iterations = 5;
      p.seed = seed;
      int sweeps = 0;
      const auto model = topics::gsdmm_fit(docs, p, [&](const topics::TopicModel& m, int) {
        ++sweeps;
        conserved = conserved && topics::counts_consistent(m) && topics::counts_match_assignments(m, docs);
      });
      conserved = conserved && sweeps == 5;
      const double pur = synth::purity(model.assignment, labels, K);
      recovered += pur >= kRecoveryPurity;
      purities += fmt::format(" {:.3f}", pur);
    }
    o.check(recovered >= kRecoverySeedsRequired, fmt::format("K={}: {}/10 seeds reach purity", K, recovered));
    o.check(conserved, fmt::format("K={}: count conservation after every sweep", K));
    o.note(fmt::format("K={} purities{}", K, purities));
  }
  return o;
}

// ---------------------------------------------------------------- 4

Outcome permutation_null_oracle() {
  Outcome o;
  struct Profile {
    std::string name;
    std::vector<int> sizes;
    double expected;
  };
  const std::vector<Profile> profiles{
      {"equal K=2", {500, 500}, 0.5}, {"equal K=10", std::vector<int>(10, 100), 0.1}, {"(90,10)", {90, 10}, 0.82}};
  std::uint64_t seed = 31;
  for (const auto& p : profiles) {
    std::vector<int> assign;
    double D = 0;
    for (std::size_t k = 0; k < p.sizes.size(); ++k) {
      assign.insert(assign.end(), p.sizes[k], static_cast<int>(k));
      D += p.sizes[k];
    }
    double analytic = 0;
    for (int m : p.sizes) analytic += (m / D) * (m / D);
    o.check(std::abs(analytic - p.expected) < 1e-12, p.name + ": oracle formula");
    o.check(std::abs(topics::analytic_null(assign) - analytic) < 1e-12, p.name + ": library analytic null");
    const auto null = topics::permutation_null(assign, 1000, seed++);
    // standard error recomputed from the samples
    double mean = 0, ss = 0;
    for (double s : null.samples) mean += s;
    mean /= static_cast<double>(null.samples.size());
    for (double s : null.samples) ss += (s - mean) * (s - mean);
    const double se = std::sqrt(ss / static_cast<double>(null.samples.size() - 1)) /
                      std::sqrt(static_cast<double>(null.samples.size()));
    o.check(null.samples.size() == 1000, p.name + ": 1,000 permutations");
    o.check(std::abs(null.mean - mean) < 1e-12, p.name + ": reported mean");
    o.check(std::abs(null.mean - analytic) <= kNullStandardErrors * se,
            fmt::format("{}: {:.5f} vs {:.5f} (3 SE = {:.5f})", p.name, null.mean, analytic, 3 * se));
    o.note(fmt::format("{}: empirical {:.5f}, analytic {:.5f}, SE {:.5f}", p.name, null.mean, analytic, se));
  }
  return o;
}

// ---------------------------------------------------------------- 5

Outcome bootstrap_calibration() {
  Outcome o;
  auto matches = [](std::size_t n) {
    std::vector<double> m(n, 0.0);
    std::fill(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n * 8 / 10), 1.0);
    std::shuffle(m.begin(), m.end(), std::mt19937_64(5));
    return m;
  };
  const auto big = matches(10'000);
  const auto small = matches(100);
  const stats::RngStream stream(41, "calibration");
  const auto a = sentiment::bootstrap_matches(big, 1000, stream, 0.99);
  const auto b = sentiment::bootstrap_matches(big, 1000, stats::RngStream(41, "calibration"), 0.99);
  const auto s = sentiment::bootstrap_matches(small, 1000, stream, 0.99);
  if (!a || !b || !s) {
    o.check(false, "bootstrap returned no summary");
    return o;
  }
  const double median = a->interval.median;
  o.check(std::abs(median - 0.80) <= kCalibrationTolerance, fmt::format("median {:.4f}", median));
  const double wide = s->interval.high - s->interval.low, narrow = a->interval.high - a->interval.low;
  o.check(wide > narrow, fmt::format("width n=100 {:.4f} > n=10,000 {:.4f}", wide, narrow));
  o.check(*a == *b && std::memcmp(&a->interval.low, &b->interval.low, sizeof(double)) == 0 &&
              std::memcmp(&a->interval.high, &b->interval.high, sizeof(double)) == 0 &&
              std::memcmp(&a->interval.median, &b->interval.median, sizeof(double)) == 0,
          "identical seeds, bit-identical summaries");
  o.note(fmt::format("median {:.4f}, 99% interval n=10,000 [{:.4f}, {:.4f}], n=100 [{:.4f}, {:.4f}]", median,
                     a->interval.low, a->interval.high, s->interval.low, s->interval.high));
  return o;
}

// ---------------------------------------------------------------- 6

corpus::Corpus random_corpus(std::mt19937_64& rng, std::size_t n, const std::vector<std::string>& words) {
  corpus::Corpus c;
  c.lang = "de";
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1), len(1, 6);
  for (std::size_t i = 0; i < n; ++i) {
    corpus::TextRecord r;
    r.id = "x" + synth::alpha(static_cast<int>(i));
    r.lang = "de";
    std::string t;
    for (std::size_t k = 0, m = len(rng); k < m; ++k) t += (k ? " " : "") + words[pick(rng)];
    r.text_original = t;
    r.text_back = t;
    c.records.push_back(std::move(r));
  }
  return c;
}

Outcome embedding_oracle() {
  Outcome o;
  synth::Spec spec;
  const auto table = synth::make_embeddings(spec);
  std::vector<std::string> words;
  for (int t = 0; t < spec.topics; ++t)
    for (int i = 0; i < spec.words_per_vocab; ++i) words.push_back(synth::topic_word(t, i));
  std::mt19937_64 rng(51);

  // exhaustive enumeration on 10 records with peers = 9
  const auto c = random_corpus(rng, 10, words);
  std::vector<embed::SentenceVector> vecs;
  for (const auto& r : c.records) vecs.push_back(embed::embed_sentence(text::tokenize(r.text_original), table, r.id));
  double min_sum = 0, mean_sum = 0;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    double lo = INFINITY, sum = 0;
    for (std::size_t j = 0; j < vecs.size(); ++j) {
      if (j == i) continue;
      const double d = embed::cosine_distance(vecs[i], vecs[j]);
      lo = std::min(lo, d);
      sum += d;
    }
    min_sum += lo;
    mean_sum += sum / 9.0;
  }
  const double min_expected = min_sum / 10.0, mean_expected = mean_sum / 10.0;
  bool exact = true;
  for (unsigned threads : {1u, 3u}) {
    const auto b = embed::peer_baselines(c, table, 9, 52, threads);
    exact = exact && b.min_baseline == min_expected && b.mean_baseline == mean_expected && b.peers_used == 9;
  }
  o.check(exact, "peer baselines equal exhaustive enumeration exactly");

  // hand-computed cosine distances
  using V = std::vector<double>;
  auto cd = [](const V& u, const V& v) { return embed::cosine_distance(std::span<const double>(u), v); };
  o.check(std::abs(cd({1, 0}, {1, 0}) - 0.0) <= kCosineTolerance, "identical -> 0");
  o.check(std::abs(cd({3, 0, 0}, {0, 2, 0}) - 1.0) <= kCosineTolerance, "orthogonal -> 1");
  o.check(std::abs(cd({1, 0}, {0.6, 0.8}) - 0.4) <= kCosineTolerance, "cos 0.6 -> 0.4");
  o.check(std::abs(cd({2, 2, 1}, {4, 4, 2}) - 0.0) <= kCosineTolerance, "parallel -> 0");

  // min <= mean on random corpora, exhaustive and sampled
  int violations = 0, trials = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_int_distribution<std::size_t> size(2, 60);
    const auto rc = random_corpus(rng, size(rng), words);
    std::uniform_int_distribution<std::size_t> peers(1, rc.size() - 1);
    const auto b = embed::peer_baselines(rc, table, peers(rng), 60 + trial);
    ++trials;
    violations += !(b.min_baseline <= b.mean_baseline);
  }
  o.check(violations == 0, fmt::format("min <= mean on {} random corpora", trials));
  o.note(fmt::format("exhaustive min {:.6f}, mean {:.6f}; {} random corpora", min_expected, mean_expected, trials));
  return o;
}

// ---------------------------------------------------------------- 7

class CountingProvider final : public translate::Provider {
 public:
  explicit CountingProvider(translate::Provider& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  std::vector<translate::ItemResult> translate(std::span<const std::string> texts, const std::string& source,
                                               const std::string& target) override {
    {
      std::lock_guard lock(mu_);
      for (const auto& t : texts) ++calls_[source + "\x1f" + target + "\x1f" + t];
    }
    return inner_.translate(texts, source, target);
  }
  std::map<std::string, int> calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  translate::Provider& inner_;
  mutable std::mutex mu_;
  std::map<std::string, int> calls_;
};

Outcome plumbing() {
  Outcome o;
  const auto dir = synth::temp_dir("accept_plumbing");

  // cache: duplicates inside a run and across runs never reach the provider twice
  synth::Spec spec;
  spec.docs_per_cluster = 100;
  auto c = synth::make_corpus(spec).corpus;
  const std::size_t base = c.records.size();
  for (std::size_t i = 0; i < 50; ++i) {
    auto dup = c.records[i];
    dup.id = "dup" + synth::alpha(static_cast<int>(i));
    c.records.push_back(dup);
  }
  translate::NoiseProvider noise(0.3, 71, translate::corpus_vocabulary(c));
  CountingProvider counting(noise);
  translate::TranslationCache cache(dir / "cache");
  translate::TranslateOptions opts;
  opts.cache = &cache;
  opts.batch_size = 37;
  opts.max_in_flight = 3;
  const auto first = translate::backtranslate_corpus(c, "en", counting, opts);
  const auto after_first = counting.calls();
  const auto second = translate::backtranslate_corpus(c, "en", counting, opts);
  const auto after_second = counting.calls();
  int duplicates = 0, total = 0;
  for (const auto& [key, n] : after_second) {
    duplicates += n > 1;
    total += n;
  }
  o.check(duplicates == 0, fmt::format("{} texts sent more than once", duplicates));
  o.check(after_first == after_second, "second run made provider calls");
  o.check(first.records.size() == base + 50 && second.records.size() == first.records.size(), "records kept");
  bool same = true;
  for (std::size_t i = 0; i < first.records.size() && same; ++i)
    same = first.records[i].text_back == second.records[i].text_back;
  o.check(same, "cached rerun reproduces translations");

  // pipeline rerun over checkpoints, and a fresh output dir, are byte-identical
  synth::Spec small;
  small.docs_per_cluster = 60;
  const auto ws = dir / "ws";
  synth::write_resources(small, ws);
  auto j = pipeline_config(ws);
  j["provider"] = {{"name", "noise"}, {"noise_rate", 0.3}};
  j["replicates"] = 200;
  j["permutations"] = 200;
  const auto r1 = pipeline::run_pipeline(pipeline::config_from_json(j, ws));
  const auto reports = ws / "out" / "reports";
  const auto run1 = dir_contents(reports);
  const auto r2 = pipeline::run_pipeline(pipeline::config_from_json(j, ws));
  const auto run2 = dir_contents(reports);
  j["out_dir"] = (ws / "fresh").string();
  const auto r3 = pipeline::run_pipeline(pipeline::config_from_json(j, ws));
  const auto run3 = dir_contents(ws / "fresh" / "reports");
  o.check(r1.exit_code == 0 && r2.exit_code == 0 && r3.exit_code == 0, "pipeline exit codes");
  o.check(!run1.empty() && run1 == run2, "rerun over checkpoints byte-identical");
  o.check(run1 == run3, "fresh rerun byte-identical");
  for (const char* variant : {"original", "pivot", "back"}) {
    const auto name = std::string("de.") + variant + ".jsonl";
    o.check(slurp(ws / "out" / "corpora" / name) == slurp(ws / "fresh" / "corpora" / name), name + " identical");
  }

  // five figures from a toy report, every plotted value equal to its CSV cell
  const auto toy = synth::toy_report({"de", "fr", "it"});
  const auto figs = dir / "figures";
  report::emit_tables(toy, figs);
  const auto svgs = report::emit_plots(toy, figs);
  std::size_t marks = 0;
  const auto mismatches = synth::plot_table_mismatches(figs, &marks);
  o.check(svgs.size() == 5, fmt::format("{} SVG files", svgs.size()));
  o.check(marks > 0 && mismatches.empty(),
          mismatches.empty() ? fmt::format("{} marks", marks) : mismatches.front());
  const auto pipeline_mismatches = synth::plot_table_mismatches(reports);
  o.check(pipeline_mismatches.empty(), "pipeline figures match pipeline tables");
  o.note(fmt::format("{} provider texts, {} files compared, {} plotted marks checked", total, run1.size(), marks));
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"identity round trip", identity_round_trip},   {"monotone degradation", monotone_degradation},
      {"GSDMM recovery", gsdmm_recovery},             {"permutation null", permutation_null_oracle},
      {"bootstrap calibration", bootstrap_calibration}, {"embedding oracle", embedding_oracle},
      {"plumbing", plumbing}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << "criterion " << (i + 1) << ": " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << "\n";
    for (const auto& n : o.notes) std::cout << "    " << n << "\n";
    std::cout.flush();
  }
  std::cout << (failed ? fmt::format("{} criteria failed\n", failed) : std::string("all criteria passed\n"));
  return failed ? 1 : 0;
}
