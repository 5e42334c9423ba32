#pragma once

#include <map>
#include <string>
#include <vector>

#include "reasonforge/error.hpp"

namespace reasonforge {

enum class TemplateName {
  corpus_filter,
  query_gen,
  annotate_reasoning,
  annotate_direct,
  query_reasoning,
};

struct PromptTemplate {
  TemplateName name;
  std::string body;
};

namespace detail {

inline const char* kCorpusFilterBody =
    R"RF(Given a passage, determine whether it belongs to the domain: {Domain}

The given passage:
[Begin of Passage]
{Doc}
[End of Passage]

Note:
- Your output must always be "Yes" or "No".

Remember do not explain your output or output anything else. Your output:)RF";

inline const char* kQueryGenBody =
    R"RF({Generation Instruction}

The given content:
[Begin of Content]
{Input Content}
[End of Content]

Note:
- Your output must always be a string, only containing {Output Content}.
- Your output should be independent of the given content, which means that it should not containing the pronouns such as "it", "this", "that", "the given", "the provided", etc.
- Your output ({Output Content}) should be about {Length}.
- Your output ({Output Content}) should require {Difficulty} level education to understand.

Remember do not explain your output or output anything else. Your output:)RF";

inline const char* kQueryReasoningBody =
    R"RF(Given a question, your mission is to follow the instructions below:
1. Identify the essential problem.
2. Think step by step to reason and describe what information could be relevant and helpful to address the questions in detail.
3. Draft an answer with as many thoughts as you have.

The given question:
[Begin of Question]
{Original Query}
[End of Question])RF";

inline const char* kAnnotateReasoningBody =
    R"RF(Here is the relevance definition in a retrieval task: {Relevance Definition}

Now given a query ({Query Type}) and a document ({Doc Type}) in this retrieval task, your mission is to perform the following steps to determine the relevance between the query and the document.

1. Query Analysis: Think to reason and describe what information would be most helpful in answering the query.
2. Document Analysis: Discuss how the information provided by the document fulfills or fails to fulfill the requirements implied by the query.
3. Relevance Annotation: Based on the relevance definition and the insights from the previous two steps, clearly justify your final relevance annotation result and annotate an integer score from a scale of 1 to 5. Please use the following guide:
  - 5 (Highly Relevant): The document is directly and fully responsive to the query, providing comprehensive, accurate, and specific information that completely addresses all aspects of the query.
  - 4 (Relevant): The document is largely relevant and provides most of the information needed, but may have minor omissions, slight inaccuracies, or not be perfectly aligned with the query's intent.
  - 3 (Moderately Relevant): The document has some relevance and offers partial information, but it may be incomplete, vague, or include some irrelevant content. It provides a basic connection but lacks depth or precision.
  - 2 (Slightly Relevant): The document has minimal relevance, with only a small portion of content tangentially related to the query. The majority of the document is off-topic or provides little value.
  - 1 (Irrelevant): The document is completely unrelated to the query and provides no useful information. There is no discernible connection or value for answering the query.

After providing your detailed analysis and justification for all the steps above, conclude your entire response with the final relevance score. The score must be placed strictly between the <score> tags. There should be no other text or explanation inside the tags:
<score>
[From a scale of 1 to 5, annotate the degree of relevance between the query and the document.]
</score>

Note: The whole response should be as concise as possible while covering all the necessary details, and not exceeding 512 words in total.

Query ({Query Type}):
[Begin of Query]
{Query}
[End of Query]

Document ({Doc Type}):
[Begin of Document]
{Doc}
[End of Document])RF";

inline const char* kAnnotateDirectBody =
    R"RF(Here is the relevance definition in a retrieval task: {Relevance Definition}

Now given a query ({Query Type}) and a document ({Doc Type}) in this retrieval task, your mission is to perform the following steps to determine the relevance between the query and the document.

1. Query Analysis: Think to reason and describe what information would be most helpful in answering the query.
2. Document Analysis: Discuss how the information provided by the document fulfills or fails to fulfill the requirements implied by the query.
3. Relevance Annotation: Based on the relevance definition and the insights from the previous two steps, clearly justify your final relevance annotation result and annotate an integer score from a scale of 1 to 5. Please use the following guide:
  - 5 (Highly Relevant): The document is directly and fully responsive to the query, providing comprehensive, accurate, and specific information that completely addresses all aspects of the query.
  - 4 (Relevant): The document is largely relevant and provides most of the information needed, but may have minor omissions, slight inaccuracies, or not be perfectly aligned with the query's intent.
  - 3 (Moderately Relevant): The document has some relevance and offers partial information, but it may be incomplete, vague, or include some irrelevant content. It provides a basic connection but lacks depth or precision.
  - 2 (Slightly Relevant): The document has minimal relevance, with only a small portion of content tangentially related to the query. The majority of the document is off-topic or provides little value.
  - 1 (Irrelevant): The document is completely unrelated to the query and provides no useful information. There is no discernible connection or value for answering the query.

Directly output the final relevance score without any explanation or reasoning steps. The score must be placed strictly between the <score> tags. There should be no other text or explanation inside the tags:
<score>
[From a scale of 1 to 5, annotate the degree of relevance between the query and the document.]
</score>

Note: The response should ONLY contain the score enclosed within the <score> tags, with no additional text or commentary. Example of correct format: <score>4</score>.

Query ({Query Type}):
[Begin of Query]
{Query}
[End of Query]

Document ({Doc Type}):
[Begin of Document]
{Doc}
[End of Document])RF";

inline bool is_placeholder_name(const std::string& s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); };
  if (!alpha(s.front()) || !alpha(s.back())) return false;
  for (char c : s) {
    if (!alpha(c) && c != ' ') return false;
  }
  return true;
}

}  // namespace detail

inline const PromptTemplate& get_template(TemplateName name) {
  static const PromptTemplate corpus_filter{TemplateName::corpus_filter, detail::kCorpusFilterBody};
  static const PromptTemplate query_gen{TemplateName::query_gen, detail::kQueryGenBody};
  static const PromptTemplate annotate_reasoning{TemplateName::annotate_reasoning,
                                                 detail::kAnnotateReasoningBody};
  static const PromptTemplate annotate_direct{TemplateName::annotate_direct,
                                              detail::kAnnotateDirectBody};
  static const PromptTemplate query_reasoning{TemplateName::query_reasoning,
                                              detail::kQueryReasoningBody};
  switch (name) {
    case TemplateName::corpus_filter: return corpus_filter;
    case TemplateName::query_gen: return query_gen;
    case TemplateName::annotate_reasoning: return annotate_reasoning;
    case TemplateName::annotate_direct: return annotate_direct;
    case TemplateName::query_reasoning: return query_reasoning;
  }
  throw validation_error("unknown prompt template");
}

/// Byte-exact substitution of {Name} placeholders. Substituted values are
/// never rescanned, so braces inside slot values pass through verbatim.
inline std::string render(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& slots) {
  std::string out;
  const std::string& body = tmpl.body;
  out.reserve(body.size());
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t close = body.find('}', i + 1);
      if (close != std::string::npos) {
        std::string name = body.substr(i + 1, close - i - 1);
        if (detail::is_placeholder_name(name)) {
          auto it = slots.find(name);
          if (it == slots.end()) {
            throw validation_error("unresolved placeholder " + name);
          }
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += body[i];
    ++i;
  }
  return out;
}

/// Per-task vocabulary: filter domain label, generation instruction and output
/// content (language fixed to English), relevance-annotation strings, and the
/// evaluation-time task instruction.
struct TaskInfo {
  std::string name;
  std::string domain;
  std::string generation_instruction;
  std::string output_content;
  std::string query_type;
  std::string doc_type;
  std::string relevance_definition;
  std::string task_instruction;
};

inline const std::vector<TaskInfo>& tasks() {
  static const std::string kStackGen =
      " generate a StackExchange post in English for which the critical concepts or theories "
      "discussed in the passage can serve as references for domain experts to draft an answer.";
  static const std::string kStackOut = "the generated StackExchange post in English";
  static const std::string kStackRelTail =
      " the document is relevant to the query if the critical concepts or theories discussed in "
      "the document can provide references for domain experts to draft an answer to the query.";
  auto stack_rel = [&](const std::string& qt) {
    return "Given a query (" + qt + ") and a document (passage)," + kStackRelTail;
  };
  auto post_instruction = [](const std::string& subject) {
    return "Given " + subject + " post, retrieve relevant passages that help answer the post.";
  };
  static const std::vector<TaskInfo> kTasks = {
      {"Bio.", "Biology", "Given a Biology-related passage in English," + kStackGen, kStackOut,
       "biology post", "passage", stack_rel("biology post"), post_instruction("a Biology")},
      {"Earth.", "Earth Science", "Given a Biology-related passage in English," + kStackGen,
       kStackOut, "earth science post", "passage", stack_rel("earth science post"),
       post_instruction("an Earth Science")},
      {"Econ.", "Economics", "Given an Economics-related passage in English," + kStackGen,
       kStackOut, "economics post", "passage", stack_rel("economics post"),
       post_instruction("an Economics")},
      {"Psy.", "Psychology", "Given a Psychology-related passage in English," + kStackGen,
       kStackOut, "psychology post", "passage", stack_rel("psychology post"),
       post_instruction("a Psychology")},
      {"Rob.", "Robotics", "Given a Robotics-related passage in English," + kStackGen, kStackOut,
       "robotics post", "passage", stack_rel("robotics post"), post_instruction("a Robotics")},
      {"Stack.", "Coding", "Given a Coding-related passage in English," + kStackGen, kStackOut,
       "Stack Overflow post", "passage", stack_rel("Stack Overflow post"),
       post_instruction("a Stack Overflow")},
      {"Sus.", "Sustainable Living",
       "Given a Sustainable Living-related passage in English," + kStackGen, kStackOut,
       "sustainable living post", "passage", stack_rel("sustainable living post"),
       post_instruction("a Sustainable Living")},
      {"Leet.", "Coding",
       "Given a solved LeetCode problem (with solutions) in English, generate a new LeetCode "
       "problem in English that the underlying algorithms or data structures from the original "
       "problem can help solve.",
       "the generated LeetCode problem in English", "LeetCode problem", "coding problem solution",
       "Given a query (LeetCode problem) and a document (coding problem solution), the document "
       "is relevant to the query if the underlying algorithms or data structures used in the "
       "document can provide helpful insights for solving the problem in the query.",
       "Given a Coding problem, retrieve relevant examples that help answer the problem."},
      {"Pony", "Coding",
       "Given a Pony documentation passage in English, generate a Pony coding instruction in "
       "English that the Pony syntax described in the passage can help implement.",
       "the generated Pony coding instruction in English", "Pony coding instruction",
       "Pony documentation passage",
       "Given a query (Pony coding instruction) and a document (Pony documentation passage), the "
       "document is relevant to the query if the Pony syntax described in the document is "
       "necessary for beginners with no prior knowledge of Pony to complete the coding "
       "instruction in the query.",
       "Given a Pony question, retrieve relevant passages that help answer the question."},
      {"AoPS", "Math",
       "Given a Math problem solution in English, generate a new Math problem in English that "
       "the problem-solving skills used in the original problem can help solve.",
       "the generated Math problem in English", "math problem", "math problem solution",
       "Given a query (math problem) and a document (math problem solution), the document is "
       "relevant to the query if the theorems used in the document can provide helpful insights "
       "for solving the problem in the query.",
       "Given a Math problem, retrieve relevant examples that help answer the problem."},
      {"TheoQ.", "Math",
       "Given a Math problem solution in English, generate a new Math problem in English that "
       "the theorems used in the original problem can help solve.",
       "the generated Math problem in English", "math problem", "math problem solution",
       "Given a query (math problem) and a document (math problem solution), the document is "
       "relevant to the query if the theorems used in the document can provide helpful insights "
       "for solving the problem in the query.",
       "Given a Math problem, retrieve relevant examples that help answer the problem."},
      {"TheoT.", "Math",
       "Given a Math theorem in English, generate a Math problem in English that the theorem can "
       "help solve.",
       "the generated Math problem in English", "math problem", "math-related passage",
       "Given a query (math problem) and a document (math-related passage), the document is "
       "relevant to the query if the theorem described in the document can help solve the "
       "problem in the query.",
       "Given a Math problem, retrieve relevant theorems that help answer the problem."},
  };
  return kTasks;
}

inline const TaskInfo& task_info(const std::string& task_name) {
  for (const TaskInfo& t : tasks()) {
    if (t.name == task_name) return t;
  }
  throw validation_error("unknown task \"" + task_name + "\"");
}

inline bool is_known_task(const std::string& task_name) {
  for (const TaskInfo& t : tasks()) {
    if (t.name == task_name) return true;
  }
  return false;
}

}  // namespace reasonforge
