#include "chatdit/article.hpp"

#include <cstdio>
#include <regex>
#include <sstream>

#include "chatdit/errors.hpp"

namespace chatdit {
namespace {

constexpr const char* kMarkdownPrompt =
    "You are the Markdown agent. Write an engaging illustrated article in Markdown for the "
    "user's request. The generated images are given as placeholders with their descriptions. "
    "Place every placeholder exactly once, on its own line, in the given order, with prose "
    "before, between and after them. Start with a '# ' title line. Do not add any other images, "
    "HTML or code blocks.";

const std::regex& placeholder_regex() {
  static const std::regex kPlaceholder(R"(\{\{\s*IMAGE_(\d+)\s*\}\})");
  return kPlaceholder;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  return trim(s);
}

std::string escape_alt(const std::string& alt) {
  std::string out;
  for (char c : one_line(alt)) {
    if (c == '[' || c == ']' || c == '\\' || c == '`' || c == '*' || c == '_' || c == '<') {
      out.push_back('\\');
    }
    out.push_back(c);
  }
  return out;
}

std::string url_escape(const std::string& url) {
  std::string out;
  for (unsigned char c : url) {
    if (c <= 0x20 || c == '(' || c == ')' || c == '<' || c == '>' || c >= 0x7f) {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

ArticleBlock image_block(const ImageRecord& rec) {
  ArticleBlock b;
  b.kind = ArticleBlock::Kind::image;
  b.image_id = rec.id;
  b.alt = one_line(rec.caption);
  return b;
}

ArticleBlock prose_block(std::string text) {
  ArticleBlock b;
  b.kind = ArticleBlock::Kind::prose;
  b.text = std::move(text);
  return b;
}

}  // namespace

std::string image_placeholder(int ordinal_one_based) {
  return "{{IMAGE_" + std::to_string(ordinal_one_based) + "}}";
}

std::optional<std::string> check_article_text(const std::string& text, int num_images) {
  int expected = 1;
  const auto& re = placeholder_regex();
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    const int k = std::stoi((*it)[1].str());
    if (k != expected) {
      return "found " + image_placeholder(k) + " where " + image_placeholder(expected) + " was expected";
    }
    ++expected;
  }
  if (expected != num_images + 1) {
    return "placeholder " + image_placeholder(expected) + " is missing";
  }
  if (text.find("![") != std::string::npos) return "the article must not embed its own images";
  if (text.find("```") != std::string::npos || text.find("~~~") != std::string::npos) {
    return "the article must not contain code fences";
  }
  static const std::regex kHtmlImage(R"(<\s*img\b)", std::regex::icase);
  if (std::regex_search(text, kHtmlImage)) return "the article must not contain HTML images";
  return std::nullopt;
}

ArticleDocument parse_article_text(const std::string& text, const std::vector<ImageRecord>& outputs,
                                   int source_turn) {
  if (auto e = check_article_text(text, static_cast<int>(outputs.size()))) throw InputError(*e);
  ArticleDocument doc;
  doc.source_turn = source_turn;

  std::string body = text;
  const std::string lead = trim(body);
  if (lead.rfind("# ", 0) == 0) {
    const auto eol = lead.find('\n');
    doc.title = trim(lead.substr(2, eol == std::string::npos ? std::string::npos : eol - 2));
    body = eol == std::string::npos ? std::string{} : lead.substr(eol + 1);
  }

  const auto& re = placeholder_regex();
  std::size_t cursor = 0;
  int ordinal = 0;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), re); it != std::sregex_iterator(); ++it) {
    const std::string before = trim(body.substr(cursor, static_cast<std::size_t>(it->position()) - cursor));
    if (!before.empty()) doc.blocks.push_back(prose_block(before));
    doc.blocks.push_back(image_block(outputs[static_cast<std::size_t>(ordinal++)]));
    cursor = static_cast<std::size_t>(it->position() + it->length());
  }
  const std::string tail = trim(body.substr(cursor));
  if (!tail.empty()) doc.blocks.push_back(prose_block(tail));
  return doc;
}

ArticleDocument fallback_article(const std::string& user_text, const std::vector<ImageRecord>& outputs,
                                 int source_turn) {
  ArticleDocument doc;
  doc.source_turn = source_turn;
  doc.title = one_line(user_text);
  for (const auto& rec : outputs) {
    if (!trim(rec.caption).empty()) doc.blocks.push_back(prose_block(one_line(rec.caption)));
    doc.blocks.push_back(image_block(rec));
  }
  return doc;
}

MarkdownAgent::MarkdownAgent(LlmGateway* gateway) : gateway_(gateway) {}

ArticleDocument MarkdownAgent::compose_article(const std::string& user_text,
                                               const ParsedInstruction& parsed,
                                               const std::vector<ImageRecord>& outputs,
                                               int source_turn) {
  const int n = static_cast<int>(outputs.size());
  if (n != parsed.num_outputs) {
    throw InputError("article needs " + std::to_string(parsed.num_outputs) + " images, got " +
                     std::to_string(n));
  }
  if (!gateway_) {
    ArticleDocument doc = fallback_article(user_text, outputs, source_turn);
    doc.warnings.push_back("markdown agent unavailable; used fallback layout");
    return doc;
  }
  Json images = Json::array();
  for (int k = 0; k < n; ++k) {
    images.push_back({{"placeholder", image_placeholder(k + 1)},
                      {"description", parsed.target_prompts[static_cast<std::size_t>(k)]}});
  }
  TextRequest req;
  req.agent_name = agent::kMarkdown;
  req.system_prompt = kMarkdownPrompt;
  req.user_content = {ContentPart::from_text(Json{{"instruction", user_text}, {"images", images}}.dump())};
  req.max_attempts = 2;
  req.temperature = kProseTemperature;
  req.validator = [n](const std::string& text) { return check_article_text(text, n); };
  try {
    return parse_article_text(gateway_->complete_text(req).text, outputs, source_turn);
  } catch (const ContractError& e) {
    ArticleDocument doc = fallback_article(user_text, outputs, source_turn);
    doc.warnings.push_back(std::string("article text rejected, used fallback layout: ") + e.what());
    return doc;
  } catch (const BackendError& e) {
    ArticleDocument doc = fallback_article(user_text, outputs, source_turn);
    doc.warnings.push_back(std::string("markdown agent unavailable, used fallback layout: ") + e.what());
    return doc;
  }
}

std::string render_markdown(const ArticleDocument& article, const UrlResolver& resolve) {
  std::ostringstream out;
  bool first = true;
  auto separate = [&] {
    if (!first) out << "\n\n";
    first = false;
  };
  if (!article.title.empty()) {
    separate();
    out << "# " << one_line(article.title);
  }
  for (const auto& block : article.blocks) {
    separate();
    if (block.kind == ArticleBlock::Kind::prose) {
      out << block.text;
      continue;
    }
    auto url = resolve ? resolve(block.image_id) : std::nullopt;
    if (!url) throw RenderError("cannot resolve a URL for image " + block.image_id);
    out << "![" << escape_alt(block.alt) << "](" << url_escape(*url) << ")";
  }
  out << "\n";
  return out.str();
}

}  // namespace chatdit
