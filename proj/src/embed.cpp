#include "btvalid/embed.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include <spdlog/spdlog.h>

#include "btvalid/error.hpp"
#include "btvalid/stats.hpp"
#include "btvalid/text.hpp"

namespace btvalid::embed {

using nlohmann::json;

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

bool is_count(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

bool EmbeddingTable::add(std::string_view token, std::span<const double> vec) {
  if (vec.empty()) throw DataError("empty embedding vector for '" + std::string(token) + "'");
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_)
    throw DataError("vector for '" + std::string(token) + "' has length " + std::to_string(vec.size()) +
                    ", table dimension is " + std::to_string(dim_));
  auto [it, fresh] = index_.emplace(text::to_lower(token), data_.size() / dim_);
  if (!fresh) return false;
  data_.insert(data_.end(), vec.begin(), vec.end());
  return true;
}

const double* EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? nullptr : data_.data() + it->second * dim_;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::string lang) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read embeddings " + path.string());
  EmbeddingTable table(std::move(lang));
  std::string line;
  std::vector<double> vec;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto f = split_fields(line);
    if (f.empty()) continue;
    if (n == 1 && f.size() == 2 && is_count(f[0]) && is_count(f[1])) continue;
    if (f.size() < 2) {
      spdlog::warn("{}:{}: unparseable embedding line skipped", path.string(), n);
      continue;
    }
    vec.clear();
    bool ok = true;
    for (std::size_t i = 1; i < f.size() && ok; ++i) {
      double x = 0.0;
      ok = parse_double(f[i], x);
      vec.push_back(x);
    }
    if (!ok) {
      spdlog::warn("{}:{}: unparseable embedding line skipped", path.string(), n);
      continue;
    }
    try {
      if (!table.add(f[0], vec)) spdlog::warn("{}:{}: duplicate token '{}' ignored", path.string(), n, f[0]);
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return table;
}

SentenceVector embed_sentence(std::span<const std::string> tokens, const EmbeddingTable& table, std::string id) {
  if (table.empty()) throw DataError("cannot embed with an empty embedding table");
  SentenceVector out;
  out.id = std::move(id);
  std::vector<double> sum(table.dim(), 0.0);
  for (const auto& t : tokens) {
    const double* v = table.find(t);
    if (!v) continue;
    ++out.in_vocab_count;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
  }
  if (out.in_vocab_count == 0) return out;
  const double norm = std::sqrt(dot(sum, sum));
  if (!(norm > 0.0)) return out;
  for (auto& x : sum) x /= norm;
  out.vector = std::move(sum);
  return out;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DataError("cosine distance: dimensions " + std::to_string(u.size()) + " and " +
                                std::to_string(v.size()) + " differ");
  const double nu = std::sqrt(dot(u, u)), nv = std::sqrt(dot(v, v));
  if (!(nu > 0.0) || !(nv > 0.0)) throw DataError("cosine distance: zero vector");
  // Exact zero for identical vectors; the rounded dot product can land a hair off.
  if (std::equal(u.begin(), u.end(), v.begin())) return 0.0;
  return std::clamp(1.0 - dot(u, v) / (nu * nv), 0.0, 2.0);
}

double cosine_distance(const SentenceVector& u, const SentenceVector& v) {
  if (!u.defined() || !v.defined()) throw DataError("cosine distance: undefined sentence vector");
  return cosine_distance(std::span<const double>(u.vector), std::span<const double>(v.vector));
}

BacktranslationDistances backtranslation_distances(const corpus::Corpus& c, const EmbeddingTable& table) {
  BacktranslationDistances out;
  double total = 0.0;
  for (const auto& r : c.records) {
    if (!r.text_back) {
      ++out.excluded;
      continue;
    }
    auto a = embed_sentence(text::tokenize(r.text_original), table, r.id);
    auto b = embed_sentence(text::tokenize(*r.text_back), table, r.id);
    if (!a.defined() || !b.defined()) {
      ++out.excluded;
      continue;
    }
    const double d = cosine_distance(a, b);
    total += d;
    out.per_id.emplace_back(r.id, d);
  }
  if (out.per_id.empty()) throw DataError("embedding: every record of '" + c.lang + "' was excluded");
  out.mean = total / static_cast<double>(out.per_id.size());
  return out;
}

PeerBaselines peer_baselines(const corpus::Corpus& c, const EmbeddingTable& table, std::size_t peers,
                             std::uint64_t seed, unsigned threads) {
  std::vector<SentenceVector> vecs;
  for (const auto& r : c.records) {
    auto v = embed_sentence(text::tokenize(r.text_original), table, r.id);
    if (v.defined()) vecs.push_back(std::move(v));
  }
  const std::size_t n = vecs.size();
  if (n < 2) throw DataError("peer baselines need at least two embeddable records, have " + std::to_string(n));
  if (peers == 0) throw ConfigError("peers must be positive");
  if (peers > n - 1) {
    spdlog::warn("{}: only {} embeddable records; peers clamped from {} to {}", c.lang, n, peers, n - 1);
    peers = n - 1;
  }

  std::vector<double> mins(n), means(n);
  const stats::RngStream root(seed, "peers");
  auto anchor = [&](std::size_t i) {
    double lo = std::numeric_limits<double>::infinity(), sum = 0.0;
    auto visit = [&](std::size_t j) {
      const double d = cosine_distance(std::span<const double>(vecs[i].vector), std::span<const double>(vecs[j].vector));
      lo = std::min(lo, d);
      sum += d;
    };
    if (peers == n - 1) {
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) visit(j);
    } else {
      stats::RngStream rng = root.child(std::to_string(i));
      for (auto j : stats::sample_indices(n - 1, peers, rng)) visit(j >= i ? j + 1 : j);
    }
    mins[i] = lo;
    means[i] = sum / static_cast<double>(peers);
  };

  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) anchor(i);
      });
  }
  PeerBaselines out;
  out.anchors = n;
  out.peers_used = peers;
  out.min_baseline = stats::mean(mins);
  out.mean_baseline = stats::mean(means);
  return out;
}

Verdict embedding_verdict(double mean_back_distance, const PeerBaselines& b) {
  return {mean_back_distance < b.min_baseline, mean_back_distance < b.mean_baseline};
}

// ---------------------------------------------------------------- report

EmbeddingReport embedding_report(std::span<const corpus::Corpus> corpora,
                                 const std::map<std::string, EmbeddingTable>& tables, std::size_t peers,
                                 std::uint64_t seed) {
  EmbeddingReport report;
  report.peers = peers;
  report.seed = seed;
  for (const auto& c : corpora) {
    auto it = tables.find(c.lang);
    if (it == tables.end()) {
      spdlog::warn("no embedding table for '{}': language skipped", c.lang);
      report.skipped.push_back(c.lang);
      continue;
    }
    auto dist = backtranslation_distances(c, it->second);
    auto base = peer_baselines(c, it->second, peers, seed);
    auto verdict = embedding_verdict(dist.mean, base);
    report.languages.emplace(c.lang, LanguageEmbedding{dist.mean, base.min_baseline, base.mean_baseline,
                                                       verdict.passes_min, verdict.passes_mean, dist.per_id.size(),
                                                       dist.excluded, base.peers_used});
  }
  return report;
}

json to_json(const EmbeddingReport& r) {
  json langs = json::object();
  for (const auto& [lang, e] : r.languages)
    langs[lang] = {{"mean_back_distance", e.mean_back_distance},
                   {"min_baseline", e.min_baseline},
                   {"mean_baseline", e.mean_baseline},
                   {"passes_min", e.passes_min},
                   {"passes_mean", e.passes_mean},
                   {"compared", e.compared},
                   {"excluded_counts", e.excluded},
                   {"peers_used", e.peers_used}};
  return {{"languages", langs}, {"skipped", r.skipped}, {"peers", r.peers}, {"seed", r.seed}};
}

EmbeddingReport embedding_report_from_json(const json& j) {
  EmbeddingReport r;
  for (const auto& [lang, e] : j.at("languages").items())
    r.languages.emplace(lang, LanguageEmbedding{e.at("mean_back_distance").get<double>(),
                                                e.at("min_baseline").get<double>(),
                                                e.at("mean_baseline").get<double>(), e.at("passes_min").get<bool>(),
                                                e.at("passes_mean").get<bool>(), e.at("compared").get<std::size_t>(),
                                                e.at("excluded_counts").get<std::size_t>(),
                                                e.at("peers_used").get<std::size_t>()});
  r.skipped = j.value("skipped", std::vector<std::string>{});
  r.peers = j.at("peers").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace btvalid::embed
