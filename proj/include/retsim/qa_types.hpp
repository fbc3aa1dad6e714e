#pragma once

#include <string>
#include <vector>

namespace retsim {

// Generated answer plus the explicit citation trail feeding CCR. Every cited
// doc_id must come from the exposure set handed to the answerer.
struct Answer {
    std::string query_id;
    std::string text;
    std::vector<std::string> citations;  // rank order, deduplicated
    std::string answerer_name;
};

// Correctness verdict for a document (subject_id = doc_id) or an answer
// (subject_id = query_id).
struct Verdict {
    std::string subject_id;
    bool correct = false;
    std::string judge_name;
};

}  // namespace retsim
