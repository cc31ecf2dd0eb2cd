#pragma once

#include <string>
#include <vector>

namespace listreader {

// Splits plain text into sentences on terminal punctuation and tokenizes
// each; used by the predict command.
std::vector<std::vector<std::string>> split_passage_text(const std::string& text);

// Full command-line surface: gen | train | eval | predict | trace | ablate.
// Exit codes: 0 success, 1 usage, 2 validation, 3 runtime. Failures print a
// single-line JSON object to stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace listreader
