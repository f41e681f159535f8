#pragma once

// Instruction-Parsing agent: turns one user turn into a ParsedInstruction
// through four narrow LLM calls (description, resolution, counting,
// prompting), each under its own JSON contract.

#include <string>
#include <vector>

#include "chatdit/llm.hpp"
#include "chatdit/model.hpp"
#include "chatdit/session.hpp"

namespace chatdit {

struct ParserOptions {
  std::size_t history_limit = 20;
  int max_repair_attempts = 3;
  double temperature = kPlanningTemperature;
};

struct ResolvedReferences {
  std::vector<std::string> ids;
  bool wants_article = false;
};

class InstructionParser {
 public:
  explicit InstructionParser(LlmGateway& gateway, ParserOptions options = {});

  int count_outputs(const std::string& user_text, const std::vector<HistoryEntry>& history);

  /// One description per image, in input order.
  std::vector<InputDescription> describe_inputs(const std::vector<ImageRecord>& images);

  std::vector<std::string> prompt_targets(const std::string& user_text, int num_outputs,
                                          const std::vector<InputDescription>& inputs,
                                          const std::vector<HistoryEntry>& history);

  /// Maps the instruction onto concrete registry ids drawn from
  /// `candidates`.
  ResolvedReferences resolve_references(const std::string& user_text,
                                        const std::vector<std::string>& uploaded_this_turn,
                                        const std::vector<HistoryEntry>& candidates,
                                        TurnMode mode);

  /// Runs all sub-agents for `session.turns[turn_index]`, which must be in
  /// the parsing state. Fresh descriptions are written into the registry
  /// captions of `session`.
  ParsedInstruction parse_turn(Session& session, int turn_index);

  static Json counting_schema();
  static Json description_schema(const std::vector<std::string>& ids);
  static Json prompting_schema(int num_outputs);
  static Json resolution_schema(const std::vector<std::string>& candidate_ids);

 private:
  std::vector<HistoryEntry> recent(const std::vector<HistoryEntry>& history) const;

  LlmGateway& gateway_;
  ParserOptions options_;
};

/// True when the instruction itself asks for an article.
bool asks_for_article(const std::string& user_text);

}  // namespace chatdit
