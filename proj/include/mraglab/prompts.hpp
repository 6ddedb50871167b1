#pragma once

#include <string>
#include <vector>

#include "mraglab/backends.hpp"
#include "mraglab/core.hpp"

// Prompt templates for answer generation, passage rewriting and multilingual
// answering. Passages are rendered one per line as "[i] text", blocks
// separated by a blank line; backslashes and line breaks inside a passage are
// escaped so the rendering is injective.
namespace mraglab::prompts {

std::string escape_passage(const std::string& passage);
std::string format_passages(const std::vector<std::string>& passages);

/// "You are a helpful assistant. Your task is to extract relevant ..." with
/// user turn "Background:{docs}\n\nQuestion:{question}".
std::vector<backends::ChatMessage> answer_with_documents(const std::string& question,
                                                         const std::vector<std::string>& passages,
                                                         const LanguageCode& reply_lang);

/// Closed-book variant: user turn "Question:{question}".
std::vector<backends::ChatMessage> answer_without_documents(const std::string& question,
                                                            const LanguageCode& reply_lang);

/// Rewrite request turning a passage into an independent document in
/// `lang`, enriched with the model's own knowledge.
std::vector<backends::ChatMessage> rewrite_passage(const std::string& passage, const std::string& question,
                                                   const LanguageCode& lang);

/// Comma-separated language codes, e.g. "en, ko, zh".
std::string language_list(const std::vector<LanguageCode>& langs);

std::vector<backends::ChatMessage> multilingual_answers(const std::string& question,
                                                        const std::vector<std::string>& passages,
                                                        const std::vector<LanguageCode>& langs);

backends::ChatMessage json_repair_turn(const std::vector<LanguageCode>& langs);

}  // namespace mraglab::prompts
