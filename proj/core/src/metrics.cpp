#include "alm/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "alm/errors.hpp"

namespace alm {

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> wer_tokens(const std::string& text) {
    std::vector<std::string> out;
    for (std::string& tok : whitespace_tokens(text)) {
        std::string clean;
        for (char c : tok) {
            const unsigned char u = static_cast<unsigned char>(c);
            if (std::ispunct(u)) continue;
            clean.push_back(static_cast<char>(std::tolower(u)));
        }
        if (!clean.empty()) out.push_back(std::move(clean));
    }
    return out;
}

std::int64_t edit_distance(const std::vector<std::string>& ref,
                           const std::vector<std::string>& hyp) {
    const std::size_t n = ref.size(), m = hyp.size();
    std::vector<std::int64_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<std::int64_t>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<std::int64_t>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            const std::int64_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    if (ref.empty()) throw DataError("wer: empty reference");
    return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

double wer_text(const std::string& ref, const std::string& hyp) {
    return wer(wer_tokens(ref), wer_tokens(hyp));
}

namespace {
std::map<std::vector<std::string>, std::int64_t> ngram_counts(
    const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::vector<std::string>, std::int64_t> counts;
    if (toks.size() < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return counts;
}
}  // namespace

BleuResult bleu4(const std::vector<std::string>& references, const std::string& hypothesis) {
    BleuResult res;
    const std::vector<std::string> hyp = whitespace_tokens(hypothesis);
    if (hyp.empty()) {
        res.empty_hypothesis = true;
        return res;
    }
    std::vector<std::vector<std::string>> refs;
    for (const std::string& r : references) refs.push_back(whitespace_tokens(r));

    // brevity penalty against the closest reference length (ties: shorter)
    const std::int64_t c = static_cast<std::int64_t>(hyp.size());
    std::int64_t r_best = 0;
    std::int64_t best_gap = -1;
    for (const auto& r : refs) {
        const std::int64_t rl = static_cast<std::int64_t>(r.size());
        const std::int64_t gap = std::llabs(rl - c);
        if (best_gap < 0 || gap < best_gap || (gap == best_gap && rl < r_best)) {
            best_gap = gap;
            r_best = rl;
        }
    }
    const double bp = (c >= r_best) ? 1.0 : std::exp(1.0 - static_cast<double>(r_best) /
                                                              static_cast<double>(c));

    double log_prec = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto hyp_counts = ngram_counts(hyp, n);
        std::int64_t total = 0, match = 0;
        for (const auto& [gram, count] : hyp_counts) {
            total += count;
            std::int64_t clip = 0;
            for (const auto& r : refs) {
                const auto rc = ngram_counts(r, n);
                const auto it = rc.find(gram);
                if (it != rc.end()) clip = std::max(clip, it->second);
            }
            match += std::min(count, clip);
        }
        double p;
        if (match == 0) {
            p = 1.0 / (static_cast<double>(total) + 1.0);
        } else {
            p = static_cast<double>(match) / static_cast<double>(total);
        }
        log_prec += 0.25 * std::log(p);
    }
    res.score = bp * std::exp(log_prec);
    return res;
}

std::int64_t diversity(const std::string& story_text) {
    const auto toks = wer_tokens(story_text);
    std::vector<std::string> uniq(toks.begin(), toks.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    return static_cast<std::int64_t>(uniq.size());
}

bool follows_qa(const std::string& embedded_question, const std::string& output) {
    const auto q = wer_tokens(embedded_question);
    if (q.empty()) throw DataError("follows_qa: empty embedded question");
    const auto o = wer_tokens(output);
    // Strictly-below-30% means "went for transcription". Compare as integers:
    // edits / |q| < 3/10  <=>  10*edits < 3*|q|.
    const std::int64_t edits = edit_distance(q, o);
    return !(10 * edits < 3 * static_cast<std::int64_t>(q.size()));
}

bool follows_story(const std::string& output, std::int64_t min_words) {
    return static_cast<std::int64_t>(whitespace_tokens(output).size()) >= min_words;
}

bool follows_sac(const std::string& transcript, const std::vector<std::string>& event_terms,
                 const std::string& output) {
    if (!follows_qa(transcript, output)) return false;
    const auto toks = wer_tokens(output);
    for (const std::string& term : event_terms)
        for (const std::string& t : toks)
            if (t == term) return true;
    return false;
}

double following_rate(const std::vector<Hypothesis>& hyps, const std::string& task,
                      const FrContext& ctx) {
    if (hyps.empty()) throw DataError("following_rate: no hypotheses");
    std::int64_t follows = 0;
    for (const Hypothesis& h : hyps) {
        if (task == "qa") {
            const auto it = ctx.question.find(h.id);
            if (it == ctx.question.end())
                throw DataError("following_rate: no question metadata for id " + h.id);
            follows += follows_qa(it->second, h.output) ? 1 : 0;
        } else if (task == "story") {
            follows += follows_story(h.output) ? 1 : 0;
        } else if (task == "sac") {
            const auto it = ctx.transcript.find(h.id);
            if (it == ctx.transcript.end())
                throw DataError("following_rate: no transcript metadata for id " + h.id);
            follows += follows_sac(it->second, ctx.event_terms, h.output) ? 1 : 0;
        } else {
            throw DataError("following_rate: unknown task tag '" + task + "'");
        }
    }
    return static_cast<double>(follows) / static_cast<double>(hyps.size());
}

bool has_degenerate_repeat(const std::string& output) {
    const auto toks = whitespace_tokens(output);
    const std::size_t n = 4, times = 4;
    if (toks.size() < n * times) return false;
    for (std::size_t i = 0; i + n * times <= toks.size(); ++i) {
        bool all = true;
        for (std::size_t rep = 1; rep < times && all; ++rep)
            for (std::size_t k = 0; k < n; ++k)
                if (toks[i + k] != toks[i + rep * n + k]) {
                    all = false;
                    break;
                }
        if (all) return true;
    }
    return false;
}

double repeat_rate(const std::vector<Hypothesis>& hyps) {
    if (hyps.empty()) return 0.0;
    std::int64_t flagged = 0;
    for (const Hypothesis& h : hyps) flagged += has_degenerate_repeat(h.output) ? 1 : 0;
    return static_cast<double>(flagged) / static_cast<double>(hyps.size());
}

}  // namespace alm
