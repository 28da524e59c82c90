#pragma once

// Short-text topic clustering with the collapsed Gibbs sampler for the
// Dirichlet Multinomial Mixture (GSDMM), fold-in classification of
// backtranslated texts, and the permutation null for match rates.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "btvalid/corpus.hpp"

namespace btvalid::topics {

struct TokenizedDoc {
  std::string id;
  std::vector<std::string> tokens;
};

using StopwordList = std::unordered_set<std::string>;

/// One word per line, lowercased; blank lines and '#' comments skipped.
StopwordList load_stopwords(const std::filesystem::path& path);

/// Shared tokenizer, then stopwords and tokens holding any Extended_Pictographic
/// code point are dropped. May return no tokens.
TokenizedDoc preprocess_for_topics(std::string id, std::string_view text, const StopwordList* stopwords);

/// GSDMM state. nkw is row-major K x V. Invariants: sum(m) == D,
/// sum_w nkw[k][w] == n[k], every count >= 0, all reproducible from
/// `assignment` and the training docs.
struct TopicModel {
  int K = 0;
  double alpha = 0.1;
  double beta = 0.1;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int> word_index;
  std::vector<std::int64_t> m;
  std::vector<std::int64_t> n;
  std::vector<std::int64_t> nkw;
  std::vector<int> assignment;
  std::vector<std::string> doc_ids;

  std::size_t V() const { return vocab.size(); }
  std::size_t D() const { return assignment.size(); }
  std::int64_t count(int k, int w) const { return nkw[static_cast<std::size_t>(k) * V() + static_cast<std::size_t>(w)]; }

  bool operator==(const TopicModel& o) const;
};

/// Sums agree and nothing is negative.
bool counts_consistent(const TopicModel& model);

/// Rebuilding the count tables from `assignment` and the training docs gives
/// exactly the stored tables.
bool counts_match_assignments(const TopicModel& model, std::span<const TokenizedDoc> docs);

struct GsdmmParams {
  int K = 2;
  double alpha = 0.1;
  double beta = 0.1;
  int iterations = 5;  // full Gibbs sweeps
  std::uint64_t seed = 0;
};

using SweepObserver = std::function<void(const TopicModel&, int sweep)>;

/// Uniform random initial assignment, then `iterations` sweeps. Each sweep
/// visits the docs in order, removes one from the counts, draws its cluster
/// from the collapsed conditional (evaluated in log space) and puts it back.
/// Docs with no tokens are skipped. Random streams are labelled
/// "gsdmm/K=<K>/..." so fits for different K are independent.
TopicModel gsdmm_fit(std::span<const TokenizedDoc> docs, const GsdmmParams& params,
                     const SweepObserver& observer = {});

/// Log of the unnormalized conditional for a doc not counted in the model,
/// one value per cluster. Out-of-vocabulary tokens are ignored.
std::vector<double> cluster_log_scores(const TopicModel& model, const TokenizedDoc& doc);

/// Fold-in: argmax of the conditional with the model left untouched; ties go
/// to the lowest index. Docs with no in-vocabulary token get the largest prior
/// cluster (argmax m[k] + alpha).
int gsdmm_classify(const TopicModel& model, const TokenizedDoc& doc);

struct MatchResult {
  double rate = 0.0;
  std::size_t matched = 0;
  std::size_t evaluated = 0;
  std::size_t excluded_empty = 0;  // back docs with no tokens
  std::size_t unaligned = 0;       // back docs whose id is not in the model
  std::vector<int> original_clusters;  // of the evaluated docs, in order
};

/// Share of aligned backtranslated docs classified into their original's cluster.
MatchResult match_rate(const TopicModel& model, std::span<const TokenizedDoc> back_docs);

struct NullResult {
  double mean = 0.0;
  double std_error = 0.0;  // of the mean over permutations
  std::vector<double> samples;
};

/// Each sample shuffles the assignments and records the share of positions
/// left with their own label. Sample i uses stream "permutation-null/<i>".
NullResult permutation_null(std::span<const int> assignments, int permutations, std::uint64_t seed);

/// sum_k (m_k / D)^2, the expectation of permutation_null.
double analytic_null(std::span<const int> assignments);

struct SweepRow {
  int K = 0;
  double match_rate = 0.0;
  double null_mean = 0.0;
  double null_se = 0.0;
  std::size_t evaluated = 0;
  bool operator==(const SweepRow&) const = default;
};

struct SweepOptions {
  std::vector<int> ks{2, 5, 10, 15, 20, 50, 100, 150, 200};
  double alpha = 0.1;
  double beta = 0.1;
  int iterations = 5;
  int permutations = 1000;
  std::uint64_t seed = 0;
};

/// One fit, match rate and permutation null per K; K values run concurrently.
std::vector<SweepRow> k_sweep(std::span<const TokenizedDoc> docs, std::span<const TokenizedDoc> back_docs,
                              const SweepOptions& options);

// ---------------------------------------------------------------- report

struct LanguageTopics {
  std::vector<SweepRow> rows;
  std::size_t docs = 0;
  std::size_t excluded_empty = 0;
  bool stopwords_missing = false;
  bool operator==(const LanguageTopics&) const = default;
};

struct TopicsReport {
  std::map<std::string, LanguageTopics> languages;
  SweepOptions options;
  bool operator==(const TopicsReport& o) const;
};

/// Preprocesses original and back texts, then runs k_sweep for every corpus.
/// A language without a stopword list proceeds without removal and is flagged.
TopicsReport topics_report(std::span<const corpus::Corpus> corpora,
                           const std::map<std::string, StopwordList>& stopwords, const SweepOptions& options);

nlohmann::json to_json(const TopicsReport& r);
TopicsReport topics_report_from_json(const nlohmann::json& j);

/// Model layout: {K, alpha, beta, iterations, seed, V, vocab, m, n,
/// nkw: [[[w, count], ...] per cluster], assignment, doc_ids}.
nlohmann::json to_json(const TopicModel& model);
TopicModel topic_model_from_json(const nlohmann::json& j);

}  // namespace btvalid::topics
