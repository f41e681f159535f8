#pragma once

// Markdown agent: prose from the LLM around `{{IMAGE_k}}` placeholders
// (k = 1-based output ordinal), assembled into an ArticleDocument.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chatdit/llm.hpp"
#include "chatdit/model.hpp"

namespace chatdit {

using UrlResolver = std::function<std::optional<std::string>(const std::string& image_id)>;

std::string image_placeholder(int ordinal_one_based);

/// Error text unless {{IMAGE_1}}..{{IMAGE_n}} each appear exactly once in
/// ascending order and the prose carries no images or code fences of its
/// own.
std::optional<std::string> check_article_text(const std::string& text, int num_images);

/// Splits validated article text into title, prose and image blocks.
ArticleDocument parse_article_text(const std::string& text, const std::vector<ImageRecord>& outputs,
                                   int source_turn);

/// Title from the instruction, each target prompt as a paragraph before its
/// image.
ArticleDocument fallback_article(const std::string& user_text, const std::vector<ImageRecord>& outputs,
                                 int source_turn);

class MarkdownAgent {
 public:
  /// `gateway` may be null, in which case the fallback layout is used.
  explicit MarkdownAgent(LlmGateway* gateway);

  /// One call plus one repair; falls back to the deterministic layout (with
  /// a warning) when the text still fails validation.
  ArticleDocument compose_article(const std::string& user_text, const ParsedInstruction& parsed,
                                  const std::vector<ImageRecord>& outputs, int source_turn);

 private:
  LlmGateway* gateway_;
};

/// CommonMark rendering; images become `![alt](url)`. Throws RenderError
/// for an image id the resolver cannot map.
std::string render_markdown(const ArticleDocument& article, const UrlResolver& resolve);

}  // namespace chatdit
