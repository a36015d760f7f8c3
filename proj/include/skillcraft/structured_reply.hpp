#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include "skillcraft/error.hpp"
#include "skillcraft/model_gateway.hpp"

namespace skillcraft {

/// Thrown by reply parsers; triggers the single re-ask.
struct ReplyParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sends `request` and parses the reply text with `parse`. On a parse failure
/// the raw reply and the error are appended to the conversation and the model
/// is asked exactly once more. A second failure raises MalformedModelOutput
/// carrying the raw text.
template <typename Parse>
auto ask_structured(const Gateway& gateway, ChatRequest request, Parse&& parse)
    -> decltype(parse(std::string{})) {
  std::string raw;
  std::string failure;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ChatResponse response = gateway.complete(request);
    raw = response.text.value_or("");
    try {
      if (!response.text) throw ReplyParseError("reply has no text content");
      return parse(raw);
    } catch (const ReplyParseError& e) {
      failure = e.what();
    }
    request.messages.push_back({"assistant", raw, {}, {}});
    request.messages.push_back(
        {"user",
         "Your previous reply could not be parsed: " + failure +
             ". Reply again with only the JSON output in the required format.",
         {},
         {}});
  }
  throw Error(ErrorKind::MalformedModelOutput, "model output could not be parsed after a re-ask: " + failure,
              raw);
}

}  // namespace skillcraft
