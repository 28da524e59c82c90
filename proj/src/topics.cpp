#include "btvalid/topics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "btvalid/error.hpp"
#include "btvalid/stats.hpp"
#include "btvalid/text.hpp"

namespace btvalid::topics {

using nlohmann::json;

StopwordList load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read stopword list " + path.string());
  StopwordList out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    for (auto& w : text::split_whitespace(text::to_lower(line))) out.insert(std::move(w));
  }
  return out;
}

TokenizedDoc preprocess_for_topics(std::string id, std::string_view text, const StopwordList* stopwords) {
  TokenizedDoc doc{std::move(id), {}};
  for (auto& tok : text::tokenize(text)) {
    if (stopwords && stopwords->count(tok)) continue;
    if (text::contains_pictographic(tok)) continue;
    doc.tokens.push_back(std::move(tok));
  }
  return doc;
}

bool TopicModel::operator==(const TopicModel& o) const {
  return K == o.K && alpha == o.alpha && beta == o.beta && iterations == o.iterations && seed == o.seed &&
         vocab == o.vocab && m == o.m && n == o.n && nkw == o.nkw && assignment == o.assignment &&
         doc_ids == o.doc_ids;
}

namespace {

struct EncodedDoc {
  std::vector<std::pair<int, int>> words;  // (word id, multiplicity), first-appearance order
  int length = 0;
};

EncodedDoc encode(const TopicModel& model, const std::vector<std::string>& tokens) {
  EncodedDoc d;
  for (const auto& t : tokens) {
    auto it = model.word_index.find(t);
    if (it == model.word_index.end()) continue;
    auto w = std::find_if(d.words.begin(), d.words.end(), [&](const auto& p) { return p.first == it->second; });
    if (w == d.words.end()) d.words.emplace_back(it->second, 1);
    else ++w->second;
    ++d.length;
  }
  return d;
}

void apply(TopicModel& model, const EncodedDoc& d, int k, int sign) {
  model.m[static_cast<std::size_t>(k)] += sign;
  model.n[static_cast<std::size_t>(k)] += sign * d.length;
  const std::size_t row = static_cast<std::size_t>(k) * model.V();
  for (const auto& [w, c] : d.words) model.nkw[row + static_cast<std::size_t>(w)] += sign * c;
}

// log[(m_k + a) * prod_w prod_{j<c_w} (n_kw + b + j) / prod_{i<N} (n_k + V b + i)]
void log_scores(const TopicModel& model, const EncodedDoc& d, std::vector<double>& out) {
  const double vbeta = static_cast<double>(model.V()) * model.beta;
  out.resize(static_cast<std::size_t>(model.K));
  for (int k = 0; k < model.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    double s = std::log(static_cast<double>(model.m[ku]) + model.alpha);
    for (const auto& [w, c] : d.words) {
      const double base = static_cast<double>(model.count(k, w)) + model.beta;
      for (int j = 0; j < c; ++j) s += std::log(base + j);
    }
    const double denom = static_cast<double>(model.n[ku]) + vbeta;
    for (int i = 0; i < d.length; ++i) s -= std::log(denom + i);
    out[ku] = s;
  }
}

int sample_log(const std::vector<double>& logp, stats::RngStream& rng, std::vector<double>& scratch) {
  const double mx = *std::max_element(logp.begin(), logp.end());
  scratch.resize(logp.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logp.size(); ++k) total += scratch[k] = std::exp(logp[k] - mx);
  double u = rng.uniform01() * total;
  for (std::size_t k = 0; k < logp.size(); ++k) {
    u -= scratch[k];
    if (u < 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(logp.size() - 1);
}

}  // namespace

bool counts_consistent(const TopicModel& model) {
  if (model.m.size() != static_cast<std::size_t>(model.K) || model.n.size() != model.m.size() ||
      model.nkw.size() != model.m.size() * model.V())
    return false;
  std::int64_t docs = 0;
  for (int k = 0; k < model.K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (model.m[ku] < 0 || model.n[ku] < 0) return false;
    docs += model.m[ku];
    std::int64_t tokens = 0;
    for (std::size_t w = 0; w < model.V(); ++w) {
      const auto c = model.nkw[ku * model.V() + w];
      if (c < 0) return false;
      tokens += c;
    }
    if (tokens != model.n[ku]) return false;
  }
  return docs == static_cast<std::int64_t>(model.D());
}

bool counts_match_assignments(const TopicModel& model, std::span<const TokenizedDoc> docs) {
  TopicModel rebuilt = model;
  std::fill(rebuilt.m.begin(), rebuilt.m.end(), 0);
  std::fill(rebuilt.n.begin(), rebuilt.n.end(), 0);
  std::fill(rebuilt.nkw.begin(), rebuilt.nkw.end(), 0);
  std::size_t d = 0;
  for (const auto& doc : docs) {
    if (doc.tokens.empty()) continue;
    if (d >= model.D() || model.doc_ids[d] != doc.id) return false;
    apply(rebuilt, encode(model, doc.tokens), model.assignment[d], +1);
    ++d;
  }
  return d == model.D() && rebuilt.m == model.m && rebuilt.n == model.n && rebuilt.nkw == model.nkw;
}

TopicModel gsdmm_fit(std::span<const TokenizedDoc> docs, const GsdmmParams& params, const SweepObserver& observer) {
  if (params.K < 1) throw ConfigError("GSDMM needs K >= 1");
  if (!(params.alpha > 0.0) || !(params.beta > 0.0)) throw ConfigError("GSDMM needs alpha, beta > 0");
  if (params.iterations < 0) throw ConfigError("GSDMM iterations must be >= 0");

  TopicModel model;
  model.K = params.K;
  model.alpha = params.alpha;
  model.beta = params.beta;
  model.iterations = params.iterations;
  model.seed = params.seed;
  for (const auto& doc : docs) {
    if (doc.tokens.empty()) continue;
    for (const auto& t : doc.tokens) {
      if (model.word_index.emplace(t, static_cast<int>(model.vocab.size())).second) model.vocab.push_back(t);
    }
    model.doc_ids.push_back(doc.id);
  }
  if (model.doc_ids.empty()) throw DataError("GSDMM: no non-empty documents");

  std::vector<EncodedDoc> encoded;
  encoded.reserve(model.doc_ids.size());
  for (const auto& doc : docs)
    if (!doc.tokens.empty()) encoded.push_back(encode(model, doc.tokens));

  const std::size_t K = static_cast<std::size_t>(params.K);
  model.m.assign(K, 0);
  model.n.assign(K, 0);
  model.nkw.assign(K * model.V(), 0);
  model.assignment.resize(encoded.size());

  const std::string label = "gsdmm/K=" + std::to_string(params.K);
  stats::RngStream init(params.seed, label + "/init");
  for (std::size_t d = 0; d < encoded.size(); ++d) {
    model.assignment[d] = static_cast<int>(init.uniform_below(K));
    apply(model, encoded[d], model.assignment[d], +1);
  }

  std::vector<double> logp, scratch;
  for (int sweep = 1; sweep <= params.iterations; ++sweep) {
    stats::RngStream rng(params.seed, label + "/sweep" + std::to_string(sweep));
    for (std::size_t d = 0; d < encoded.size(); ++d) {
      apply(model, encoded[d], model.assignment[d], -1);
      log_scores(model, encoded[d], logp);
      model.assignment[d] = sample_log(logp, rng, scratch);
      apply(model, encoded[d], model.assignment[d], +1);
    }
    assert(counts_consistent(model));
    if (observer) observer(model, sweep);
  }
  return model;
}

std::vector<double> cluster_log_scores(const TopicModel& model, const TokenizedDoc& doc) {
  std::vector<double> out;
  log_scores(model, encode(model, doc.tokens), out);
  return out;
}

int gsdmm_classify(const TopicModel& model, const TokenizedDoc& doc) {
  const EncodedDoc d = encode(model, doc.tokens);
  std::vector<double> scores;
  if (d.length == 0) {
    scores.resize(static_cast<std::size_t>(model.K));
    for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = static_cast<double>(model.m[k]) + model.alpha;
  } else {
    log_scores(model, d, scores);
  }
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

MatchResult match_rate(const TopicModel& model, std::span<const TokenizedDoc> back_docs) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t d = 0; d < model.doc_ids.size(); ++d) pos.emplace(model.doc_ids[d], d);
  MatchResult r;
  for (const auto& doc : back_docs) {
    auto it = pos.find(doc.id);
    if (it == pos.end()) {
      ++r.unaligned;
      continue;
    }
    if (doc.tokens.empty()) {
      ++r.excluded_empty;
      continue;
    }
    const int original = model.assignment[it->second];
    r.original_clusters.push_back(original);
    ++r.evaluated;
    if (gsdmm_classify(model, doc) == original) ++r.matched;
  }
  if (r.evaluated == 0) throw DataError("match rate: no backtranslated document aligns with a training document");
  r.rate = static_cast<double>(r.matched) / static_cast<double>(r.evaluated);
  return r;
}

NullResult permutation_null(std::span<const int> assignments, int permutations, std::uint64_t seed) {
  if (assignments.empty()) throw std::invalid_argument("permutation null: empty assignment list");
  if (permutations < 1) throw std::invalid_argument("permutation null: permutations must be >= 1");
  const std::vector<int> original(assignments.begin(), assignments.end());
  const stats::RngStream root(seed, "permutation-null");
  NullResult r;
  r.samples.reserve(static_cast<std::size_t>(permutations));
  for (int p = 0; p < permutations; ++p) {
    stats::RngStream rng = root.child(std::to_string(p));
    auto shuffled = stats::permute(original, rng);
    std::size_t same = 0;
    for (std::size_t i = 0; i < original.size(); ++i) same += shuffled[i] == original[i];
    r.samples.push_back(static_cast<double>(same) / static_cast<double>(original.size()));
  }
  r.mean = stats::mean(r.samples);
  if (r.samples.size() > 1) {
    double ss = 0.0;
    for (double s : r.samples) ss += (s - r.mean) * (s - r.mean);
    const double sd = std::sqrt(ss / static_cast<double>(r.samples.size() - 1));
    r.std_error = sd / std::sqrt(static_cast<double>(r.samples.size()));
  }
  return r;
}

double analytic_null(std::span<const int> assignments) {
  if (assignments.empty()) throw std::invalid_argument("analytic null: empty assignment list");
  std::map<int, std::size_t> sizes;
  for (int a : assignments) ++sizes[a];
  const double D = static_cast<double>(assignments.size());
  double s = 0.0;
  for (const auto& [_, m] : sizes) s += (static_cast<double>(m) / D) * (static_cast<double>(m) / D);
  return s;
}

std::vector<SweepRow> k_sweep(std::span<const TokenizedDoc> docs, std::span<const TokenizedDoc> back_docs,
                              const SweepOptions& options) {
  std::vector<SweepRow> rows(options.ks.size());
  std::vector<std::exception_ptr> errors(options.ks.size());
  auto run = [&](std::size_t i) {
    try {
      const int K = options.ks[i];
      auto model = gsdmm_fit(docs, {K, options.alpha, options.beta, options.iterations, options.seed});
      auto match = match_rate(model, back_docs);
      // Null seeds are derived from (seed, K) so each K has its own stream.
      auto null = permutation_null(match.original_clusters, options.permutations,
                                   options.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(K)));
      rows[i] = SweepRow{K, match.rate, null.mean, null.std_error, match.evaluated};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < options.ks.size(); ++i) pool.emplace_back(run, i);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

// ---------------------------------------------------------------- report

bool TopicsReport::operator==(const TopicsReport& o) const {
  return languages == o.languages && options.ks == o.options.ks && options.alpha == o.options.alpha &&
         options.beta == o.options.beta && options.iterations == o.options.iterations &&
         options.permutations == o.options.permutations && options.seed == o.options.seed;
}

TopicsReport topics_report(std::span<const corpus::Corpus> corpora, const std::map<std::string, StopwordList>& stopwords,
                           const SweepOptions& options) {
  TopicsReport report;
  report.options = options;
  for (const auto& c : corpora) {
    LanguageTopics lt;
    const StopwordList* sw = nullptr;
    if (auto it = stopwords.find(c.lang); it != stopwords.end()) sw = &it->second;
    else {
      lt.stopwords_missing = true;
      spdlog::warn("no stopword list for '{}': clustering without stopword removal", c.lang);
    }
    std::vector<TokenizedDoc> docs, back;
    for (const auto& r : c.records) {
      auto d = preprocess_for_topics(r.id, r.text_original, sw);
      if (d.tokens.empty()) {
        ++lt.excluded_empty;
        continue;
      }
      if (r.text_back) back.push_back(preprocess_for_topics(r.id, *r.text_back, sw));
      docs.push_back(std::move(d));
    }
    for (const auto& b : back) lt.excluded_empty += b.tokens.empty();
    lt.docs = docs.size();
    if (docs.empty()) throw DataError("topics: no clusterable documents for '" + c.lang + "'");
    lt.rows = k_sweep(docs, back, options);
    report.languages.emplace(c.lang, std::move(lt));
  }
  return report;
}

json to_json(const TopicsReport& r) {
  json langs = json::object();
  for (const auto& [lang, lt] : r.languages) {
    json rows = json::array();
    for (const auto& row : lt.rows)
      rows.push_back({{"K", row.K},
                      {"match_rate", row.match_rate},
                      {"null_mean", row.null_mean},
                      {"null_se", row.null_se},
                      {"evaluated", row.evaluated}});
    langs[lang] = {{"rows", rows},
                   {"docs", lt.docs},
                   {"excluded_empty", lt.excluded_empty},
                   {"stopwords_missing", lt.stopwords_missing}};
  }
  return {{"languages", langs},
          {"ks", r.options.ks},
          {"alpha", r.options.alpha},
          {"beta", r.options.beta},
          {"iterations", r.options.iterations},
          {"permutations", r.options.permutations},
          {"seed", r.options.seed}};
}

TopicsReport topics_report_from_json(const json& j) {
  TopicsReport r;
  for (const auto& [lang, v] : j.at("languages").items()) {
    LanguageTopics lt;
    for (const auto& row : v.at("rows"))
      lt.rows.push_back({row.at("K").get<int>(), row.at("match_rate").get<double>(), row.at("null_mean").get<double>(),
                         row.at("null_se").get<double>(), row.at("evaluated").get<std::size_t>()});
    lt.docs = v.at("docs").get<std::size_t>();
    lt.excluded_empty = v.at("excluded_empty").get<std::size_t>();
    lt.stopwords_missing = v.at("stopwords_missing").get<bool>();
    r.languages.emplace(lang, std::move(lt));
  }
  r.options.ks = j.at("ks").get<std::vector<int>>();
  r.options.alpha = j.at("alpha").get<double>();
  r.options.beta = j.at("beta").get<double>();
  r.options.iterations = j.at("iterations").get<int>();
  r.options.permutations = j.at("permutations").get<int>();
  r.options.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

json to_json(const TopicModel& model) {
  json clusters = json::array();
  for (int k = 0; k < model.K; ++k) {
    json row = json::array();
    for (std::size_t w = 0; w < model.V(); ++w)
      if (auto c = model.count(k, static_cast<int>(w))) row.push_back({w, c});
    clusters.push_back(std::move(row));
  }
  return {{"K", model.K},         {"alpha", model.alpha}, {"beta", model.beta},
          {"iterations", model.iterations}, {"seed", model.seed},   {"V", model.V()},
          {"vocab", model.vocab}, {"m", model.m},         {"n", model.n},
          {"nkw", clusters},      {"assignment", model.assignment}, {"doc_ids", model.doc_ids}};
}

TopicModel topic_model_from_json(const json& j) {
  TopicModel model;
  model.K = j.at("K").get<int>();
  model.alpha = j.at("alpha").get<double>();
  model.beta = j.at("beta").get<double>();
  model.iterations = j.at("iterations").get<int>();
  model.seed = j.at("seed").get<std::uint64_t>();
  model.vocab = j.at("vocab").get<std::vector<std::string>>();
  if (j.at("V").get<std::size_t>() != model.vocab.size()) throw DataError("model: V disagrees with vocab length");
  for (std::size_t w = 0; w < model.vocab.size(); ++w) model.word_index.emplace(model.vocab[w], static_cast<int>(w));
  model.m = j.at("m").get<std::vector<std::int64_t>>();
  model.n = j.at("n").get<std::vector<std::int64_t>>();
  model.nkw.assign(static_cast<std::size_t>(model.K) * model.V(), 0);
  const auto& clusters = j.at("nkw");
  if (clusters.size() != static_cast<std::size_t>(model.K)) throw DataError("model: nkw row count != K");
  for (std::size_t k = 0; k < clusters.size(); ++k)
    for (const auto& cell : clusters[k]) {
      const auto w = cell.at(0).get<std::size_t>();
      if (w >= model.V()) throw DataError("model: word id out of range");
      model.nkw[k * model.V() + w] = cell.at(1).get<std::int64_t>();
    }
  model.assignment = j.at("assignment").get<std::vector<int>>();
  model.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
  if (!counts_consistent(model)) throw DataError("model: inconsistent count tables");
  return model;
}

}  // namespace btvalid::topics
