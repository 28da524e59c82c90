#pragma once

#include <chrono>
#include <string>

#include "btvalid/translate.hpp"

namespace btvalid::translate {

struct RemoteConfig {
  std::string api_key;
  std::string endpoint = "https://translation.googleapis.com";
  std::string path = "/language/translate/v2";
  std::chrono::seconds timeout{30};
};

/// Client for the public v2 REST translate endpoint: form-encoded POST with
/// repeated q, source, target, format=text and key; reads
/// data.translations[i].translatedText. 401/403 raise AuthError, 429/5xx and
/// connection failures raise TransientError, any other status fails the items.
class RemoteProvider final : public Provider {
 public:
  explicit RemoteProvider(RemoteConfig cfg);
  std::string name() const override { return "google"; }
  std::vector<ItemResult> translate(std::span<const std::string> texts, const std::string& source,
                                    const std::string& target) override;

  /// The form body sent for one batch.
  static std::string encode_form(std::span<const std::string> texts, const std::string& source,
                                 const std::string& target, const std::string& key);

 private:
  RemoteConfig cfg_;
};

}  // namespace btvalid::translate
