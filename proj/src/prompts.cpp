#include "mraglab/prompts.hpp"

#include "mraglab/text.hpp"

namespace mraglab::prompts {

using backends::ChatMessage;

std::string escape_passage(const std::string& passage) {
    std::string out;
    out.reserve(passage.size());
    for (char c : passage) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

std::string format_passages(const std::vector<std::string>& passages) {
    std::string out;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "[" + std::to_string(i + 1) + "] " + escape_passage(passages[i]);
    }
    return out;
}

std::vector<ChatMessage> answer_with_documents(const std::string& question, const std::vector<std::string>& passages,
                                               const LanguageCode& reply_lang) {
    return {
        {ChatMessage::Role::system,
         "You are a helpful assistant. Your task is to extract relevant information from provided documents and "
         "to answer to questions as short as possible. Please reply in " +
             language_name(reply_lang) + "."},
        {ChatMessage::Role::user, "Background:\n" + format_passages(passages) + "\n\nQuestion:" + question},
    };
}

std::vector<ChatMessage> answer_without_documents(const std::string& question, const LanguageCode& reply_lang) {
    return {
        {ChatMessage::Role::system,
         "You are a helpful assistant. Answer the questions as short as possible. Please reply in " +
             language_name(reply_lang) + "."},
        {ChatMessage::Role::user, "Question:" + question},
    };
}

std::vector<ChatMessage> rewrite_passage(const std::string& passage, const std::string& question,
                                         const LanguageCode& lang) {
    std::string body;
    body += "Original Passage: " + passage + "\n";
    body += "Question: " + question + "\n";
    body += "Please create an independent document according to the following requirements:\n";
    body += "1) Utilize known facts (parametric knowledge) related to the question.\n";
    body += "2) Seamlessly combine with the original passage by removing redundant or unnecessary sentences. "
            "No additional explanations are allowed.\n";
    body += "3) All content must be written smoothly and concisely in " + language_name(lang) + ".";
    return {{ChatMessage::Role::user, body}};
}

std::string language_list(const std::vector<LanguageCode>& langs) {
    std::string out;
    for (std::size_t i = 0; i < langs.size(); ++i) {
        if (i > 0) out += ", ";
        out += langs[i].str();
    }
    return out;
}

std::vector<ChatMessage> multilingual_answers(const std::string& question, const std::vector<std::string>& passages,
                                              const std::vector<LanguageCode>& langs) {
    const std::string keys = language_list(langs);
    std::string system;
    system += "You are a highly capable multilingual assistant.\n";
    system += "Here are some reference documents:\n";
    for (const std::string& line : text::split(format_passages(passages), '\n')) {
        system += line.empty() ? "\n" : "    " + line + "\n";
    }
    system += "\nThe user wants answers in multiple languages.\n";
    system += "Please follow these rules strictly:\n";
    system += "1) Return your final answer as a valid JSON object.\n";
    system += "2) The JSON object must contain exactly these keys: " + keys + ".\n";
    system += "3) Each field's value must be the answer written in that respective language.\n";
    system += "4) Do not include any additional text outside the JSON (e.g., no Markdown or explanations).\n";
    system += "5) Ensure it is valid JSON with correct format.";
    return {
        {ChatMessage::Role::system, system},
        {ChatMessage::Role::user, "Question: " + question +
                                      "\nPlease provide the answers in JSON form for each of the following "
                                      "languages: " +
                                      keys + "."},
    };
}

ChatMessage json_repair_turn(const std::vector<LanguageCode>& langs) {
    return {ChatMessage::Role::user,
            "Your previous output was not valid JSON. Return only a valid JSON object with exactly these keys: " +
                language_list(langs) + "."};
}

}  // namespace mraglab::prompts
