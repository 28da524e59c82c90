#include "btvalid/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "btvalid/error.hpp"
#include "btvalid/stats.hpp"
#include "btvalid/text.hpp"

namespace btvalid::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 184> kIso639_1 = {
    "aa", "ab", "ae", "af", "ak", "am", "an", "ar", "as", "av", "ay", "az", "ba", "be", "bg", "bi",
    "bm", "bn", "bo", "br", "bs", "ca", "ce", "ch", "co", "cr", "cs", "cu", "cv", "cy", "da", "de",
    "dv", "dz", "ee", "el", "en", "eo", "es", "et", "eu", "fa", "ff", "fi", "fj", "fo", "fr", "fy",
    "ga", "gd", "gl", "gn", "gu", "gv", "ha", "he", "hi", "ho", "hr", "ht", "hu", "hy", "hz", "ia",
    "id", "ie", "ig", "ii", "ik", "io", "is", "it", "iu", "ja", "jv", "ka", "kg", "ki", "kj", "kk",
    "kl", "km", "kn", "ko", "kr", "ks", "ku", "kv", "kw", "ky", "la", "lb", "lg", "li", "ln", "lo",
    "lt", "lu", "lv", "mg", "mh", "mi", "mk", "ml", "mn", "mr", "ms", "mt", "my", "na", "nb", "nd",
    "ne", "ng", "nl", "nn", "no", "nr", "nv", "ny", "oc", "oj", "om", "or", "os", "pa", "pi", "pl",
    "ps", "pt", "qu", "rm", "rn", "ro", "ru", "rw", "sa", "sc", "sd", "se", "sg", "sh", "si", "sk",
    "sl", "sm", "sn", "so", "sq", "sr", "ss", "st", "su", "sv", "sw", "ta", "te", "tg", "th", "ti",
    "tk", "tl", "tn", "to", "tr", "ts", "tt", "tw", "ty", "ug", "uk", "ur", "uz", "ve", "vi", "vo",
    "wa", "wo", "xh", "yi", "yo", "za", "zh", "zu"};

struct RawRow {
  std::size_t line = 0;
  std::string id;
  std::string lang;
  std::string text;
  std::optional<Polarity> label;
};

std::string normalize_lang(std::string code) {
  std::transform(code.begin(), code.end(), code.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto pos = code.find_first_of("-_"); pos != std::string::npos) code.resize(pos);
  return code;
}

std::optional<Polarity> parse_label(const std::string& s, const AdapterConfig& cfg, bool& ok) {
  ok = true;
  if (s.empty()) return std::nullopt;
  if (auto it = cfg.label_map.find(s); it != cfg.label_map.end()) {
    auto p = polarity_from_int(it->second);
    ok = p.has_value();
    return p;
  }
  try {
    size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used == s.size())
      if (auto p = polarity_from_int(v)) return p;
  } catch (const std::exception&) {
  }
  ok = false;
  return std::nullopt;
}

std::string json_scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_null()) return "";
  throw DataError("expected a scalar value");
}

// Splits one delimited record honoring RFC 4180 quoting when `quoted` is set.
// Returns false at end of input. Embedded newlines inside quotes advance line_no.
bool next_delimited(std::istream& in, char delim, bool quoted, std::size_t& line_no,
                    std::vector<std::string>& fields, bool& malformed) {
  fields.clear();
  malformed = false;
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string cur;
  bool in_quotes = false;
  size_t i = 0;
  for (;;) {
    if (i >= line.size()) {
      if (in_quotes) {
        std::string more;
        if (!std::getline(in, more)) {
          malformed = true;
          break;
        }
        ++line_no;
        if (!more.empty() && more.back() == '\r') more.pop_back();
        cur += '\n';
        line = std::move(more);
        i = 0;
        continue;
      }
      break;
    }
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (quoted && c == '"' && cur.empty()) {
      in_quotes = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
    ++i;
  }
  fields.push_back(std::move(cur));
  return true;
}

// Invokes on_row for each row; malformed rows arrive as nullopt.
template <class F>
void read_rows(const fs::path& path, const AdapterConfig& cfg, F&& on_row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file: " + path.string());

  auto bad = [&](std::size_t line, const std::string& why) {
    spdlog::warn("{}:{}: malformed row skipped ({})", path.string(), line, why);
    on_row(std::optional<RawRow>{});
  };

  auto finish = [&](RawRow row, const std::string& label_text) {
    bool ok = true;
    row.label = parse_label(label_text, cfg, ok);
    if (!ok) return bad(row.line, "unrecognized label '" + label_text + "'");
    if (cfg.fixed_lang) row.lang = *cfg.fixed_lang;
    row.lang = normalize_lang(row.lang);
    if (!is_language_code(row.lang)) return bad(row.line, "unknown language code '" + row.lang + "'");
    if (row.id.empty()) return bad(row.line, "empty id");
    on_row(std::optional<RawRow>(std::move(row)));
  };

  std::size_t line_no = 0;
  if (cfg.format == SourceFormat::jsonl) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        json j = json::parse(line);
        if (!j.is_object()) throw DataError("row is not an object");
        RawRow row;
        row.line = line_no;
        row.id = json_scalar_to_string(j.at(cfg.id_field));
        if (!cfg.fixed_lang) row.lang = j.at(cfg.lang_field).get<std::string>();
        row.text = j.at(cfg.text_field).get<std::string>();
        std::string label_text;
        if (auto it = j.find(cfg.label_field); it != j.end()) label_text = json_scalar_to_string(*it);
        finish(std::move(row), label_text);
      } catch (const std::exception& e) {
        bad(line_no, e.what());
      }
    }
    return;
  }

  const char delim = cfg.format == SourceFormat::csv ? ',' : '\t';
  const bool quoted = cfg.format == SourceFormat::csv;
  std::vector<std::string> fields;
  std::unordered_map<std::string, size_t> col;
  bool malformed = false;
  if (cfg.header) {
    if (!next_delimited(in, delim, quoted, line_no, fields, malformed)) return;
    for (size_t i = 0; i < fields.size(); ++i) col[fields[i]] = i;
  }
  auto column = [&](const std::string& name) -> std::optional<size_t> {
    if (cfg.header) {
      if (auto it = col.find(name); it != col.end()) return it->second;
      return std::nullopt;
    }
    try {
      return static_cast<size_t>(std::stoul(name));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
  const auto id_col = column(cfg.id_field);
  const auto text_col = column(cfg.text_field);
  const auto label_col = column(cfg.label_field);
  const auto lang_col = cfg.fixed_lang ? std::nullopt : column(cfg.lang_field);
  if (!id_col || !text_col || (!cfg.fixed_lang && !lang_col))
    throw ConfigError("adapter '" + cfg.name + "': column mapping not resolvable for " + path.string());

  for (;;) {
    const std::size_t start = line_no + 1;
    if (!next_delimited(in, delim, quoted, line_no, fields, malformed)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (malformed) {
      bad(start, "unterminated quote");
      continue;
    }
    auto get = [&](std::optional<size_t> c) -> std::optional<std::string> {
      if (!c || *c >= fields.size()) return std::nullopt;
      return fields[*c];
    };
    auto id = get(id_col), text = get(text_col);
    auto lang = lang_col ? get(lang_col) : std::optional<std::string>("");
    if (!id || !text || !lang) {
      bad(start, "missing column");
      continue;
    }
    RawRow row{start, *id, *lang, *text, std::nullopt};
    finish(std::move(row), get(label_col).value_or(""));
  }
}

struct LangBucket {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::size_t valid_rows = 0;  // rows of this language, kept or not
};

std::map<std::string, LangBucket> ingest(const fs::path& path, const AdapterConfig& cfg,
                                         const std::string& pivot, std::size_t& raw,
                                         std::size_t& malformed, std::size_t& pivot_rows) {
  std::map<std::string, LangBucket> buckets;
  raw = malformed = pivot_rows = 0;
  read_rows(path, cfg, [&](std::optional<RawRow> row) {
    ++raw;
    if (!row) {
      ++malformed;
      return;
    }
    if (row->lang == pivot) {
      ++pivot_rows;
      return;
    }
    auto& b = buckets[row->lang];
    b.corpus.lang = row->lang;
    ++b.valid_rows;
    std::string cleaned = clean_text(row->text);
    if (cleaned.empty()) {
      ++b.corpus.provenance.dropped["empty"];
      return;
    }
    if (!b.ids.insert(row->id).second) {
      ++b.corpus.provenance.dropped["duplicate_id"];
      return;
    }
    b.corpus.records.push_back(
        TextRecord{row->id, row->lang, std::move(cleaned), std::nullopt, std::nullopt, row->label});
  });
  return buckets;
}

json record_json(const TextRecord& r, const std::string& lang, const std::string& text) {
  json j = {{"id", r.id}, {"lang", lang}, {"text", text}};
  if (r.label) j["label"] = to_int(*r.label);
  return j;
}

}  // namespace

std::optional<Polarity> polarity_from_int(long long v) {
  if (v < -1 || v > 1) return std::nullopt;
  return static_cast<Polarity>(v);
}

bool is_language_code(std::string_view code) {
  return std::binary_search(kIso639_1.begin(), kIso639_1.end(), code);
}

std::size_t Provenance::dropped_total() const {
  std::size_t t = 0;
  for (const auto& [_, n] : dropped) t += n;
  return t;
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::original: return "original";
    case Variant::pivot: return "pivot";
    case Variant::back: return "back";
  }
  return "?";
}

std::optional<std::string> variant_text(const TextRecord& r, Variant v) {
  switch (v) {
    case Variant::pivot: return r.text_pivot;
    case Variant::back: return r.text_back;
    case Variant::original: return r.text_original;
  }
  return std::nullopt;
}

std::string clean_text(std::string_view raw) {
  std::u32string lowered = text::decode(text::to_lower(raw));
  std::erase_if(lowered, [](char32_t c) { return text::is_decimal_digit(c); });

  std::vector<std::string> kept;
  for (auto& token : text::split_whitespace(text::encode(lowered))) {
    if (token.front() == '@') continue;
    size_t cut = std::min(token.find("http"), token.find("www."));
    if (cut != std::string::npos) token.resize(cut);
    if (!token.empty()) kept.push_back(std::move(token));
  }
  auto first = std::find_if(kept.begin(), kept.end(), [](const std::string& t) { return t != "rt"; });
  kept.erase(kept.begin(), first);
  return text::join(kept);
}

// ---------------------------------------------------------------- adapters

AdapterConfig adapter_from_json(const json& j) {
  AdapterConfig cfg;
  try {
    cfg.name = j.at("name").get<std::string>();
    const std::string format = j.value("format", "jsonl");
    if (format == "jsonl") cfg.format = SourceFormat::jsonl;
    else if (format == "csv") cfg.format = SourceFormat::csv;
    else if (format == "tsv") cfg.format = SourceFormat::tsv;
    else throw ConfigError("adapter '" + cfg.name + "': unknown format '" + format + "'");
    if (auto c = j.find("columns"); c != j.end()) {
      cfg.id_field = c->value("id", cfg.id_field);
      cfg.lang_field = c->value("lang", cfg.lang_field);
      cfg.text_field = c->value("text", cfg.text_field);
      cfg.label_field = c->value("label", cfg.label_field);
    }
    if (j.contains("lang") && !j["lang"].is_null()) cfg.fixed_lang = j["lang"].get<std::string>();
    cfg.header = j.value("header", true);
    if (auto m = j.find("label_map"); m != j.end())
      cfg.label_map = m->get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("adapter config: ") + e.what());
  }
  return cfg;
}

AdapterRegistry::AdapterRegistry() {
  AdapterConfig jsonl;
  jsonl.name = "jsonl";
  add(std::move(jsonl));
}

void AdapterRegistry::add(AdapterConfig cfg) {
  auto name = cfg.name;
  adapters_[name] = std::move(cfg);
}

void AdapterRegistry::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read adapter config: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("adapter config " + path.string() + ": " + e.what());
  }
  for (const auto& a : j.at("adapters")) add(adapter_from_json(a));
}

const AdapterConfig& AdapterRegistry::get(const std::string& name) const {
  auto it = adapters_.find(name);
  if (it == adapters_.end()) throw ConfigError("unknown dataset adapter '" + name + "'");
  return it->second;
}

namespace {

struct Ingested {
  std::map<std::string, LangBucket> buckets;
  std::size_t raw = 0, malformed = 0, pivot_rows = 0, valid_total = 0;
};

Ingested ingest_file(const fs::path& path, const AdapterConfig& cfg, const std::string& pivot) {
  Ingested in;
  in.buckets = ingest(path, cfg, pivot, in.raw, in.malformed, in.pivot_rows);
  for (const auto& [_, b] : in.buckets) in.valid_total += b.valid_rows;
  return in;
}

// Finalizes the corpus for `lang`; rows outside it are attributed to
// "malformed", "pivot" or "lang" so the counts reconcile.
Corpus finish_corpus(Ingested& in, const std::string& lang, const std::string& source) {
  Corpus c;
  std::size_t own_rows = 0;
  if (auto it = in.buckets.find(lang); it != in.buckets.end()) {
    c = std::move(it->second.corpus);
    own_rows = it->second.valid_rows;
  }
  c.lang = lang;
  auto& p = c.provenance;
  p.source = source;
  p.raw_count = in.raw;
  if (in.malformed) p.dropped["malformed"] = in.malformed;
  if (in.pivot_rows) p.dropped["pivot"] = in.pivot_rows;
  if (in.valid_total > own_rows) p.dropped["lang"] = in.valid_total - own_rows;
  p.steps.push_back("load " + source);
  p.steps.push_back("clean " + std::string(kCleaningRulesVersion));
  return c;
}

}  // namespace

std::map<std::string, Corpus> load_corpora(const fs::path& path, const std::string& adapter,
                                           const AdapterRegistry& registry, const std::string& pivot) {
  auto in = ingest_file(path, registry.get(adapter), pivot);
  const std::string source = path.string() + " [" + adapter + "]";
  std::vector<std::string> langs;
  for (const auto& [lang, _] : in.buckets) langs.push_back(lang);
  std::map<std::string, Corpus> out;
  for (const auto& lang : langs) out.emplace(lang, finish_corpus(in, lang, source));
  return out;
}

Corpus load_corpus(const fs::path& path, const std::string& adapter, const AdapterRegistry& registry,
                   const LoadOptions& opts) {
  if (opts.lang_filter && *opts.lang_filter == opts.pivot)
    throw ConfigError("language filter equals the pivot language '" + opts.pivot + "'");
  auto in = ingest_file(path, registry.get(adapter), opts.pivot);
  const std::string source = path.string() + " [" + adapter + "]";
  if (!opts.lang_filter) {
    if (in.buckets.size() != 1)
      throw DataError(path.string() + ": expected exactly one non-pivot language, found " +
                      std::to_string(in.buckets.size()) + "; pass a language filter");
    return finish_corpus(in, in.buckets.begin()->first, source);
  }
  Corpus c = finish_corpus(in, *opts.lang_filter, source);
  // Under an explicit filter, pivot rows are simply rows of another language.
  if (auto p = c.provenance.dropped.find("pivot"); p != c.provenance.dropped.end()) {
    c.provenance.dropped["lang"] += p->second;
    c.provenance.dropped.erase(p);
  }
  c.provenance.steps.push_back("filter lang=" + *opts.lang_filter);
  return c;
}

Corpus sample_corpus(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample size must be positive");
  if (n > corpus.size())
    throw DataError("cannot sample " + std::to_string(n) + " records from a corpus of " +
                    std::to_string(corpus.size()) + " (" + corpus.lang + ")");
  stats::RngStream stream(seed, "sample/" + corpus.lang);
  auto idx = stats::sample_indices(corpus.size(), n, stream);
  Corpus out;
  out.lang = corpus.lang;
  out.provenance = corpus.provenance;
  out.records.reserve(n);
  for (auto i : idx) out.records.push_back(corpus.records[i]);
  if (corpus.size() > n) out.provenance.dropped["sampled_out"] += corpus.size() - n;
  out.provenance.sample_seed = seed;
  out.provenance.sample_n = n;
  out.provenance.steps.push_back("sample n=" + std::to_string(n) + " seed=" + std::to_string(seed));
  return out;
}

// ---------------------------------------------------------------- checkpoints

fs::path provenance_path(const fs::path& jsonl_path) {
  fs::path p = jsonl_path;
  p.replace_extension(".provenance.json");
  return p;
}

json provenance_to_json(const Provenance& p) {
  json j = {{"source", p.source},
            {"rules_version", p.rules_version},
            {"raw_count", p.raw_count},
            {"dropped", p.dropped},
            {"steps", p.steps}};
  j["sample_seed"] = p.sample_seed ? json(*p.sample_seed) : json(nullptr);
  j["sample_n"] = p.sample_n ? json(*p.sample_n) : json(nullptr);
  return j;
}

Provenance provenance_from_json(const json& j) {
  Provenance p;
  p.source = j.value("source", "");
  p.rules_version = j.value("rules_version", std::string(kCleaningRulesVersion));
  p.raw_count = j.value("raw_count", std::size_t{0});
  if (j.contains("dropped")) p.dropped = j["dropped"].get<std::map<std::string, std::size_t>>();
  if (j.contains("steps")) p.steps = j["steps"].get<std::vector<std::string>>();
  if (j.contains("sample_seed") && !j["sample_seed"].is_null()) p.sample_seed = j["sample_seed"].get<std::uint64_t>();
  if (j.contains("sample_n") && !j["sample_n"].is_null()) p.sample_n = j["sample_n"].get<std::size_t>();
  return p;
}

void write_variant(const Corpus& corpus, Variant variant, const fs::path& path, const std::string& pivot) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    const std::string& lang = variant == Variant::pivot ? pivot : corpus.lang;
    for (const auto& r : corpus.records) {
      auto t = variant_text(r, variant);
      if (!t) continue;
      out << record_json(r, lang, *t).dump() << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
  }
  json side = provenance_to_json(corpus.provenance);
  side["lang"] = corpus.lang;
  side["variant"] = std::string(to_string(variant));
  side["kept"] = corpus.size();
  std::ofstream sidecar(provenance_path(path), std::ios::binary | std::ios::trunc);
  if (!sidecar) throw DataError("cannot write " + provenance_path(path).string());
  sidecar << side.dump(2) << '\n';
}

namespace {

std::vector<TextRecord> read_checkpoint_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::vector<TextRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      TextRecord r;
      r.id = j.at("id").get<std::string>();
      r.lang = j.at("lang").get<std::string>();
      r.text_original = j.at("text").get<std::string>();
      if (j.contains("label") && !j["label"].is_null()) {
        r.label = polarity_from_int(j["label"].get<long long>());
        if (!r.label) throw DataError("label out of range");
      }
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::optional<Provenance> read_sidecar(const fs::path& jsonl) {
  std::ifstream in(provenance_path(jsonl));
  if (!in) return std::nullopt;
  try {
    return provenance_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError("bad provenance sidecar for " + jsonl.string() + ": " + e.what());
  }
}

}  // namespace

Corpus read_checkpoint(const fs::path& original, const std::optional<fs::path>& pivot,
                       const std::optional<fs::path>& back) {
  Corpus c;
  c.records = read_checkpoint_records(original);
  auto prov = read_sidecar(original);

  auto attach = [&](const fs::path& path, std::optional<std::string> TextRecord::*field) {
    std::unordered_map<std::string, std::string> texts;
    for (auto& r : read_checkpoint_records(path)) texts.emplace(r.id, std::move(r.text_original));
    for (auto& r : c.records)
      if (auto it = texts.find(r.id); it != texts.end()) r.*field = it->second;
    if (auto p = read_sidecar(path)) prov = std::move(p);
  };
  if (pivot) attach(*pivot, &TextRecord::text_pivot);
  if (back) attach(*back, &TextRecord::text_back);

  std::erase_if(c.records, [&](const TextRecord& r) {
    return (pivot && !r.text_pivot) || (back && !r.text_back);
  });
  if (!c.records.empty()) c.lang = c.records.front().lang;
  for (const auto& r : c.records)
    if (r.lang != c.lang) throw DataError(original.string() + ": mixed languages in checkpoint");
  if (prov) {
    c.provenance = std::move(*prov);
  } else {
    c.provenance.source = original.string();
    c.provenance.raw_count = c.records.size();
  }
  return c;
}

}  // namespace btvalid::corpus
