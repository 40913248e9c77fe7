#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace alm {

// ---- text metrics ----------------------------------------------------------
// Tokenization for WER/diversity: whitespace split, punctuation stripped,
// case-folded. BLEU tokenizes by whitespace only.

std::vector<std::string> wer_tokens(const std::string& text);
std::vector<std::string> whitespace_tokens(const std::string& text);

// Minimal sub+ins+del edit distance between token sequences.
std::int64_t edit_distance(const std::vector<std::string>& ref,
                           const std::vector<std::string>& hyp);

// Edit distance / |ref|; may exceed 1.0. Empty reference is rejected.
double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
double wer_text(const std::string& ref, const std::string& hyp);

struct BleuResult {
    double score = 0.0;
    bool empty_hypothesis = false;
};

// Geometric mean of 1..4-gram clipped precisions (add-one smoothing on zero
// counts) times the brevity penalty.
BleuResult bleu4(const std::vector<std::string>& references, const std::string& hypothesis);

// Number of distinct case-folded words, punctuation stripped.
std::int64_t diversity(const std::string& story_text);

// ---- instruction-following rules -------------------------------------------

// qa-style rule: the model "went for transcription" iff WER between the
// embedded question and the output is strictly below 30%.
bool follows_qa(const std::string& embedded_question, const std::string& output);

// story rule: at a 200-token decode budget, outputs shorter than 50 words
// count as disobeying.
bool follows_story(const std::string& output, std::int64_t min_words = 50);

// sac-like rule: non-transcript by the 30% rule and mentions at least one
// registry event term.
bool follows_sac(const std::string& transcript, const std::vector<std::string>& event_terms,
                 const std::string& output);

struct Hypothesis {
    std::string id;
    std::string task;
    std::string output;
    std::int64_t decode_budget = 0;
};

struct FrContext {
    // per-example metadata keyed by hypothesis id
    std::map<std::string, std::string> question;      // qa: the spoken question text
    std::map<std::string, std::string> transcript;    // sac: reference transcript
    std::vector<std::string> event_terms;             // sac: registry event names
};

double following_rate(const std::vector<Hypothesis>& hyps, const std::string& task,
                      const FrContext& ctx);

// Fraction of outputs containing any word 4-gram repeated >= 4 times in a row.
bool has_degenerate_repeat(const std::string& output);
double repeat_rate(const std::vector<Hypothesis>& hyps);

}  // namespace alm
