#include "btvalid/google_provider.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace btvalid::translate {

namespace {

std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size() * 3);
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xf]);
    }
  }
  return out;
}

}  // namespace

RemoteProvider::RemoteProvider(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

std::string RemoteProvider::encode_form(std::span<const std::string> texts, const std::string& source,
                                        const std::string& target, const std::string& key) {
  std::string body;
  for (const auto& t : texts) {
    body += "q=" + percent_encode(t);
    body += '&';
  }
  body += "source=" + percent_encode(source);
  body += "&target=" + percent_encode(target);
  body += "&format=text";
  body += "&key=" + percent_encode(key);
  return body;
}

std::vector<ItemResult> RemoteProvider::translate(std::span<const std::string> texts, const std::string& source,
                                                  const std::string& target) {
  httplib::Client cli(cfg_.endpoint);
  cli.set_connection_timeout(cfg_.timeout);
  cli.set_read_timeout(cfg_.timeout);
  cli.set_write_timeout(cfg_.timeout);

  auto res = cli.Post(cfg_.path, encode_form(texts, source, target, cfg_.api_key),
                      "application/x-www-form-urlencoded");
  if (!res) throw TransientError("request failed: " + httplib::to_string(res.error()));

  const int status = res->status;
  if (status == 401 || status == 403) throw AuthError("translation API rejected credentials (HTTP " + std::to_string(status) + ")");
  if (status == 429 || status >= 500) throw TransientError("HTTP " + std::to_string(status));

  auto fail_all = [&](const std::string& why) {
    return std::vector<ItemResult>(texts.size(), ItemResult{std::nullopt, why});
  };
  if (status != 200) return fail_all("HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));

  try {
    auto j = nlohmann::json::parse(res->body);
    const auto& arr = j.at("data").at("translations");
    if (arr.size() != texts.size())
      return fail_all("response has " + std::to_string(arr.size()) + " translations for " +
                      std::to_string(texts.size()) + " texts");
    std::vector<ItemResult> out;
    out.reserve(texts.size());
    for (const auto& t : arr) {
      if (auto it = t.find("translatedText"); it != t.end() && it->is_string())
        out.push_back({it->get<std::string>(), {}});
      else
        out.push_back({std::nullopt, "missing translatedText"});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    return fail_all(std::string("unparseable response: ") + e.what());
  }
}

}  // namespace btvalid::translate
