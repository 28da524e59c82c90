#include "btvalid/sentiment.hpp"

#include <algorithm>
#include <fstream>

#include <spdlog/spdlog.h>

#include "btvalid/error.hpp"
#include "btvalid/text.hpp"

namespace btvalid::sentiment {

using nlohmann::json;
using corpus::Variant;

bool ValenceLexicon::add(std::string_view token, int valence) {
  if (valence < -1 || valence > 1)
    throw DataError("valence " + std::to_string(valence) + " for '" + std::string(token) + "' outside {-1,0,1}");
  return entries_.emplace(text::to_lower(token), valence).second;
}

int ValenceLexicon::valence(std::string_view token) const {
  auto it = entries_.find(std::string(token));
  return it == entries_.end() ? 0 : it->second;
}

ValenceLexicon ValenceLexicon::negated() const {
  ValenceLexicon out(lang_);
  for (const auto& [tok, v] : entries_) out.entries_.emplace(tok, -v);
  return out;
}

ValenceLexicon ValenceLexicon::load_tsv(const std::filesystem::path& path, std::string lang) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read lexicon " + path.string());
  ValenceLexicon lex(std::move(lang));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(path.string() + ":" + std::to_string(n) + ": expected token<TAB>valence");
    int v = 0;
    try {
      std::size_t used = 0;
      v = std::stoi(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": bad valence '" + line.substr(tab + 1) + "'");
    }
    try {
      if (!lex.add(line.substr(0, tab), v))
        spdlog::warn("{}:{}: duplicate token '{}' ignored", path.string(), n, line.substr(0, tab));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return lex;
}

SentimentResult score_text(std::string_view text, const ValenceLexicon& lexicon, std::string id) {
  std::size_t pos = 0, neg = 0;
  for (const auto& tok : text::tokenize(text)) {
    const int v = lexicon.valence(tok);
    if (v > 0) ++pos;
    else if (v < 0) ++neg;
  }
  SentimentResult r;
  r.id = std::move(id);
  r.scored_word_count = pos + neg;
  r.polarity = (static_cast<double>(pos) - static_cast<double>(neg)) /
               static_cast<double>(std::max<std::size_t>(1, pos + neg));
  r.label = pos > neg ? Polarity::positive : (neg > pos ? Polarity::negative : Polarity::neutral);
  return r;
}

std::string_view to_string(NeutralExclusion e) {
  switch (e) {
    case NeutralExclusion::none: return "none";
    case NeutralExclusion::gold: return "gold";
    case NeutralExclusion::predicted: return "predicted";
    case NeutralExclusion::both: return "both";
  }
  return "?";
}

NeutralExclusion neutral_exclusion_from_string(std::string_view s) {
  for (auto e : {NeutralExclusion::none, NeutralExclusion::gold, NeutralExclusion::predicted, NeutralExclusion::both})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown neutral exclusion rule '" + std::string(s) + "'");
}

std::vector<double> evaluable_matches(std::span<const SentimentResult> predictions, std::span<const Polarity> gold,
                                      NeutralExclusion exclusion) {
  if (predictions.size() != gold.size())
    throw std::invalid_argument("accuracy: predictions and gold labels differ in length");
  const bool drop_gold = exclusion == NeutralExclusion::gold || exclusion == NeutralExclusion::both;
  const bool drop_pred = exclusion == NeutralExclusion::predicted || exclusion == NeutralExclusion::both;
  std::vector<double> out;
  out.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (drop_gold && gold[i] == Polarity::neutral) continue;
    if (drop_pred && predictions[i].label == Polarity::neutral) continue;
    out.push_back(predictions[i].label == gold[i] ? 1.0 : 0.0);
  }
  return out;
}

std::optional<double> accuracy(std::span<const SentimentResult> predictions, std::span<const Polarity> gold,
                               NeutralExclusion exclusion) {
  auto m = evaluable_matches(predictions, gold, exclusion);
  if (m.empty()) return std::nullopt;
  return stats::mean(m);
}

std::optional<AccuracySummary> bootstrap_matches(std::span<const double> matches, int replicates,
                                                 const stats::RngStream& stream, double level) {
  if (matches.empty()) return std::nullopt;
  auto mean_of = [](std::span<const double> xs) { return stats::mean(xs); };
  return AccuracySummary{matches.size(), stats::bootstrap(matches, mean_of, replicates, level, stream)};
}

std::optional<AccuracySummary> bootstrap_accuracy(std::span<const SentimentResult> predictions,
                                                  std::span<const Polarity> gold, int replicates, std::uint64_t seed,
                                                  NeutralExclusion exclusion, double level, const std::string& label) {
  auto m = evaluable_matches(predictions, gold, exclusion);
  return bootstrap_matches(m, replicates, stats::RngStream(seed, label), level);
}

// ---------------------------------------------------------------- report

namespace {

constexpr Variant kVariants[] = {Variant::original, Variant::pivot, Variant::back};

std::optional<VariantSummary> to_summary(const std::optional<AccuracySummary>& a) {
  if (!a) return std::nullopt;
  return VariantSummary{a->n_evaluable, a->interval.median, a->interval.low, a->interval.high};
}

Variant variant_from_string(std::string_view s) {
  for (auto v : kVariants)
    if (corpus::to_string(v) == s) return v;
  throw DataError("unknown variant '" + std::string(s) + "'");
}

json table_json(const VariantTable& t) {
  json j = json::object();
  for (auto v : kVariants) {
    auto it = t.find(v);
    if (it == t.end() || !it->second) {
      j[std::string(corpus::to_string(v))] = nullptr;
      continue;
    }
    const auto& s = *it->second;
    j[std::string(corpus::to_string(v))] = {
        {"n_evaluable", s.n_evaluable}, {"median", s.median}, {"hci99_low", s.hci_low}, {"hci99_high", s.hci_high}};
  }
  return j;
}

VariantTable table_from_json(const json& j) {
  VariantTable t;
  for (const auto& [k, v] : j.items()) {
    if (v.is_null()) {
      t[variant_from_string(k)] = std::nullopt;
      continue;
    }
    t[variant_from_string(k)] = VariantSummary{v.at("n_evaluable").get<std::size_t>(), v.at("median").get<double>(),
                                               v.at("hci99_low").get<double>(), v.at("hci99_high").get<double>()};
  }
  return t;
}

}  // namespace

SentimentReport sentiment_report(std::span<const corpus::Corpus> corpora,
                                 const std::map<std::string, ValenceLexicon>& lexicons, const std::string& pivot,
                                 const SentimentOptions& options) {
  SentimentReport report;
  report.options = options;
  const ValenceLexicon* pivot_lex = nullptr;
  if (auto it = lexicons.find(pivot); it != lexicons.end()) pivot_lex = &it->second;
  else spdlog::warn("no {} lexicon: pivot-variant sentiment skipped", pivot);

  std::map<Variant, std::vector<double>> pooled;
  for (const auto& c : corpora) {
    auto lex_it = lexicons.find(c.lang);
    if (lex_it == lexicons.end()) {
      spdlog::warn("no sentiment lexicon for '{}': language skipped", c.lang);
      report.skipped.push_back(c.lang);
      continue;
    }
    const stats::RngStream stream(options.seed, "sentiment/" + c.lang);
    VariantTable table;
    for (auto v : kVariants) {
      const ValenceLexicon* lex = v == Variant::pivot ? pivot_lex : &lex_it->second;
      if (!lex) {
        table[v] = std::nullopt;
        continue;
      }
      std::vector<SentimentResult> preds;
      std::vector<Polarity> gold;
      for (const auto& r : c.records) {
        auto t = corpus::variant_text(r, v);
        if (!r.label || !t) continue;
        preds.push_back(score_text(*t, *lex, r.id));
        gold.push_back(*r.label);
      }
      auto matches = evaluable_matches(preds, gold, options.exclusion);
      table[v] = to_summary(bootstrap_matches(matches, options.replicates, stream, options.level));
      auto& pool = pooled[v];
      pool.insert(pool.end(), matches.begin(), matches.end());
    }
    report.languages.emplace(c.lang, std::move(table));
  }
  const stats::RngStream pooled_stream(options.seed, "sentiment/pooled");
  for (auto v : kVariants)
    report.pooled[v] = to_summary(bootstrap_matches(pooled[v], options.replicates, pooled_stream, options.level));
  return report;
}

json to_json(const SentimentReport& r) {
  json langs = json::object();
  for (const auto& [lang, t] : r.languages) langs[lang] = table_json(t);
  return {{"languages", langs},
          {"pooled", table_json(r.pooled)},
          {"pooling", "concatenate evaluable items across languages, then bootstrap"},
          {"skipped", r.skipped},
          {"replicates", r.options.replicates},
          {"seed", r.options.seed},
          {"level", r.options.level},
          {"neutral_exclusion", std::string(to_string(r.options.exclusion))}};
}

SentimentReport sentiment_report_from_json(const json& j) {
  SentimentReport r;
  for (const auto& [lang, t] : j.at("languages").items()) r.languages[lang] = table_from_json(t);
  r.pooled = table_from_json(j.at("pooled"));
  r.skipped = j.value("skipped", std::vector<std::string>{});
  r.options.replicates = j.at("replicates").get<int>();
  r.options.seed = j.at("seed").get<std::uint64_t>();
  r.options.level = j.at("level").get<double>();
  r.options.exclusion = neutral_exclusion_from_string(j.at("neutral_exclusion").get<std::string>());
  return r;
}

}  // namespace btvalid::sentiment
