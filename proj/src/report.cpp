#include "btvalid/report.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "btvalid/error.hpp"

namespace btvalid::report {

namespace fs = std::filesystem;
using nlohmann::json;
using corpus::Variant;

double estimate_cost_usd(std::size_t characters) {
  return static_cast<double>(characters) / 1e6 * kUsdPerMillionCharacters;
}

bool ValidationReport::complete() const {
  for (const auto& [_, s] : status)
    if (s != "ok" && s != "skipped") return false;
  return true;
}

json to_json(const ValidationReport& r) {
  const auto& m = r.metadata;
  json meta = {{"toolkit_version", m.toolkit_version},
               {"prng", m.prng},
               {"provider", m.provider},
               {"pivot", m.pivot},
               {"seeds", m.seeds},
               {"languages", m.languages},
               {"exclusions", m.exclusions},
               {"characters_translated", m.characters_translated},
               {"estimated_cost_usd", m.estimated_cost_usd}};
  return {{"metadata", meta},
          {"sentiment", r.sentiment ? to_json(*r.sentiment) : json(nullptr)},
          {"topics", r.topics ? to_json(*r.topics) : json(nullptr)},
          {"embedding", r.embedding ? to_json(*r.embedding) : json(nullptr)},
          {"status", r.status}};
}

ValidationReport report_from_json(const json& j) {
  ValidationReport r;
  const auto& meta = j.at("metadata");
  auto& m = r.metadata;
  m.toolkit_version = meta.at("toolkit_version").get<std::string>();
  m.prng = meta.at("prng").get<std::string>();
  m.provider = meta.at("provider").get<std::string>();
  m.pivot = meta.at("pivot").get<std::string>();
  m.seeds = meta.at("seeds").get<std::map<std::string, std::uint64_t>>();
  m.languages = meta.at("languages").get<std::vector<std::string>>();
  m.exclusions = meta.at("exclusions").get<std::map<std::string, std::map<std::string, std::size_t>>>();
  m.characters_translated = meta.at("characters_translated").get<std::size_t>();
  m.estimated_cost_usd = meta.at("estimated_cost_usd").get<double>();
  if (!j.at("sentiment").is_null()) r.sentiment = sentiment::sentiment_report_from_json(j["sentiment"]);
  if (!j.at("topics").is_null()) r.topics = topics::topics_report_from_json(j["topics"]);
  if (!j.at("embedding").is_null()) r.embedding = embed::embedding_report_from_json(j["embedding"]);
  r.status = j.at("status").get<std::map<std::string, std::string>>();
  return r;
}

void write_json_file(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- tables

std::optional<std::string> Table::cell(std::string_view row_key, std::string_view column) const {
  std::size_t col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == column) col = i;
  if (col == header.size()) return std::nullopt;
  for (const auto& row : rows)
    if (!row.empty() && row[0] == row_key && col < row.size()) return row[col];
  return std::nullopt;
}

std::string format_rate(double v) { return fmt::format("{:.4f}", v); }
std::string format_distance(double v) { return fmt::format("{:.3f}", v); }

namespace {

constexpr Variant kVariants[] = {Variant::original, Variant::pivot, Variant::back};

std::vector<std::string> report_languages(const ValidationReport& r) {
  std::set<std::string> langs(r.metadata.languages.begin(), r.metadata.languages.end());
  if (r.sentiment)
    for (const auto& [l, _] : r.sentiment->languages) langs.insert(l);
  if (r.topics)
    for (const auto& [l, _] : r.topics->languages) langs.insert(l);
  if (r.embedding)
    for (const auto& [l, _] : r.embedding->languages) langs.insert(l);
  return {langs.begin(), langs.end()};
}

void append_variants(std::vector<std::string>& row, const sentiment::VariantTable* table) {
  for (auto v : kVariants) {
    const sentiment::VariantSummary* s = nullptr;
    if (table)
      if (auto it = table->find(v); it != table->end() && it->second) s = &*it->second;
    if (!s) {
      row.insert(row.end(), 4, std::string(kNull));
      continue;
    }
    row.push_back(std::to_string(s->n_evaluable));
    row.push_back(format_rate(s->median));
    row.push_back(format_rate(s->hci_low));
    row.push_back(format_rate(s->hci_high));
  }
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

Table sentiment_table(const ValidationReport& r) {
  Table t;
  t.header.push_back("lang");
  for (auto v : kVariants)
    for (const char* col : {"n", "median", "hci99_low", "hci99_high"})
      t.header.push_back(std::string(corpus::to_string(v)) + "_" + col);
  for (const auto& lang : report_languages(r)) {
    std::vector<std::string> row{lang};
    const sentiment::VariantTable* table = nullptr;
    if (r.sentiment)
      if (auto it = r.sentiment->languages.find(lang); it != r.sentiment->languages.end()) table = &it->second;
    append_variants(row, table);
    t.rows.push_back(std::move(row));
  }
  std::vector<std::string> pooled{"pooled"};
  append_variants(pooled, r.sentiment ? &r.sentiment->pooled : nullptr);
  t.rows.push_back(std::move(pooled));
  return t;
}

Table topics_table(const ValidationReport& r) {
  Table t;
  t.header = {"key", "lang", "K", "match_rate", "null_mean", "null_se", "evaluated", "stopwords_missing"};
  const auto langs = report_languages(r);
  if (!r.topics) {
    for (const auto& lang : langs)
      t.rows.push_back({lang + "@null", lang, "null", "null", "null", "null", "null", "null"});
    return t;
  }
  std::map<int, std::pair<double, double>> sums;
  std::map<int, int> counts;
  for (const auto& lang : langs) {
    auto it = r.topics->languages.find(lang);
    if (it == r.topics->languages.end()) {
      t.rows.push_back({lang + "@null", lang, "null", "null", "null", "null", "null", "null"});
      continue;
    }
    for (const auto& row : it->second.rows) {
      t.rows.push_back({lang + "@" + std::to_string(row.K), lang, std::to_string(row.K), format_rate(row.match_rate),
                        format_rate(row.null_mean), format_rate(row.null_se), std::to_string(row.evaluated),
                        it->second.stopwords_missing ? "true" : "false"});
      sums[row.K].first += row.match_rate;
      sums[row.K].second += row.null_mean;
      ++counts[row.K];
    }
  }
  for (const auto& [K, s] : sums) {
    const double n = counts[K];
    t.rows.push_back({"all@" + std::to_string(K), "all", std::to_string(K), format_rate(s.first / n),
                      format_rate(s.second / n), "null", "null", "null"});
  }
  return t;
}

Table embedding_table(const ValidationReport& r) {
  Table t;
  t.header = {"lang",        "mean_back_distance", "min_baseline", "mean_baseline",
              "passes_min",  "passes_mean",        "compared",     "excluded"};
  for (const auto& lang : report_languages(r)) {
    const embed::LanguageEmbedding* e = nullptr;
    if (r.embedding)
      if (auto it = r.embedding->languages.find(lang); it != r.embedding->languages.end()) e = &it->second;
    if (!e) {
      std::vector<std::string> row{lang};
      row.insert(row.end(), t.header.size() - 1, std::string(kNull));
      t.rows.push_back(std::move(row));
      continue;
    }
    t.rows.push_back({lang, format_distance(e->mean_back_distance), format_distance(e->min_baseline),
                      format_distance(e->mean_baseline), e->passes_min ? "true" : "false",
                      e->passes_mean ? "true" : "false", std::to_string(e->compared), std::to_string(e->excluded)});
  }
  return t;
}

std::string to_csv(const Table& t) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
    out << '\n';
  };
  line(t.header);
  for (const auto& row : t.rows) line(row);
  return out.str();
}

Table parse_csv(std::string_view csv) {
  Table t;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cur;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    char c = csv[i];
    if (quoted) {
      if (c == '"' && i + 1 < csv.size() && csv[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cur));
      cur.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(cur));
      cur.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      cur += c;
      any = true;
    }
  }
  if (any) {
    row.push_back(std::move(cur));
    rows.push_back(std::move(row));
  }
  if (!rows.empty()) {
    t.header = std::move(rows.front());
    t.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
  }
  return t;
}

std::vector<fs::path> emit_tables(const ValidationReport& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  auto write = [&](const std::string& name, const std::string& content) {
    const fs::path p = out_dir / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    out << content;
    if (!out) throw DataError("write failed: " + p.string());
    written.push_back(p);
  };
  write("sentiment.csv", to_csv(sentiment_table(r)));
  write("topics.csv", to_csv(topics_table(r)));
  write("embedding.csv", to_csv(embedding_table(r)));
  write("report.json", to_json(r).dump(2) + "\n");
  return written;
}

}  // namespace btvalid::report
