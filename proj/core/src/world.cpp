#include "alm/world.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alm/errors.hpp"
#include "alm/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace alm {

namespace {

const std::vector<std::string> kTasks = {"transcribe", "caption", "qa", "story"};

std::string pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[rng.uniform_below(pool.size())];
}

const std::vector<std::string> kSubjects = {"a dog",  "a cat", "a kid",  "an owl", "a fox",
                                            "a bee",  "a bird", "a frog", "the man", "the boy"};
const std::vector<std::string> kVerbs = {"ran",    "sat",    "hid",     "sang",    "came by",
                                         "went off", "got up", "lay low", "set out", "dug in"};
const std::vector<std::string> kPlaces = {"by the sea", "in the sun", "on the hill",
                                          "at the barn", "in the fog", "by the oak",
                                          "near the den", "up the path"};
const std::vector<std::string> kOpeners = {"one day", "at dawn", "at dusk",
                                           "long ago", "that day", "one cold day"};
const std::vector<std::string> kLinks = {"then", "so", "and then", "but soon", "after that"};
const std::vector<std::string> kShorts = {"it ran on.", "the sun set.", "all was calm.",
                                          "the air was soft.", "time went by."};
const std::vector<std::string> kClosers = {"the end.", "all was well.", "so it goes."};

const std::vector<std::string> kNumberWords = {"zero", "one", "two",   "three", "four",
                                               "five", "six", "seven", "eight", "nine",
                                               "ten",  "many"};

std::int64_t word_count(const std::string& s) {
    std::int64_t n = 0;
    bool in = false;
    for (char c : s) {
        if (c == ' ') {
            in = false;
        } else if (!in) {
            in = true;
            ++n;
        }
    }
    return n;
}

}  // namespace

const std::vector<std::string>& instruction_pool(const std::string& task) {
    static const std::map<std::string, std::vector<std::string>> kPools = {
        {"transcribe",
         {"write down the letters you hear", "transcribe the spoken letters",
          "type out the letter sounds", "give the exact letters in the talk",
          "put the spoken letters into text", "note down each letter you hear"}},
        {"caption",
         {"list the sounds you hear", "name the sounds in the clip",
          "which sounds are in the audio", "tell me what sounds occur",
          "give the sound tags you notice", "name what you hear in the background"}},
        {"qa",
         {"answer the spoken question", "reply to the question in the audio",
          "the talk asks a question, answer it", "give an answer to what is asked",
          "respond to the question you hear"}},
        {"story",
         {"tell a story about the sounds", "make up a tale about what you hear",
          "write a short story set in this audio", "spin a yarn about these sounds",
          "tell me a story about this clip", "craft a story from what you hear"}}};
    const auto it = kPools.find(task);
    if (it == kPools.end()) throw DataError("no instruction pool for task '" + task + "'");
    return it->second;
}

std::string render_transcript(const std::vector<int>& symbols) {
    std::string out;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i) out += ' ';
        out += symbol_name(symbols[i]);
    }
    return out;
}

std::string render_caption(const std::set<int>& events) {
    std::string out;
    bool first = true;
    for (int e : events) {  // std::set iterates in registry order
        if (!first) out += ' ';
        out += event_registry()[static_cast<std::size_t>(e)];
        first = false;
    }
    return out;
}

std::string make_story(const std::vector<std::string>& event_terms, Rng& rng) {
    std::string s = pick(kOpeners, rng) + " " + pick(kSubjects, rng) + " " +
                    pick(kVerbs, rng) + " " + pick(kPlaces, rng) + ".";
    if (!event_terms.empty()) {
        s += " it heard the " + event_terms[0];
        if (event_terms.size() > 1) s += " and the " + event_terms[1];
        s += ".";
    } else {
        s += " all was still.";
    }
    while (word_count(s) < 48) {
        if (s.size() >= 140) {
            s += " " + pick(kShorts, rng);
        } else {
            s += " " + pick(kLinks, rng) + " " + pick(kSubjects, rng) + " " +
                 pick(kVerbs, rng) + " " + pick(kPlaces, rng) + ".";
        }
    }
    s += " " + pick(kClosers, rng);
    if (word_count(s) < 50 || s.size() > 192)
        throw DataError("story template out of bounds: " + std::to_string(word_count(s)) +
                        " words, " + std::to_string(s.size()) + " chars");
    return s;
}

std::string make_qa_answer(const std::set<int>& events, const std::vector<int>& symbols,
                           Rng& rng) {
    std::vector<std::string> terms;
    for (int e : events) terms.push_back(event_registry()[static_cast<std::size_t>(e)]);
    std::string sound;
    if (terms.empty()) {
        sound = "there is no sound tag here.";
    } else {
        const int form = static_cast<int>(rng.uniform_below(3));
        const std::string tail = terms.size() > 1 ? " and the " + terms[1] : "";
        if (form == 0) sound = "there is the " + terms[0] + tail + ".";
        else if (form == 1) sound = "i hear the " + terms[0] + tail + ".";
        else sound = "the clip has the " + terms[0] + tail + ".";
    }
    std::string talk;
    if (symbols.empty()) {
        talk = " no one talks in it.";
    } else {
        const int form = static_cast<int>(rng.uniform_below(3));
        const std::string first = symbol_name(symbols.front());
        const std::string last = symbol_name(symbols.back());
        const std::string n = kNumberWords[std::min<std::size_t>(symbols.size(), 11)];
        if (form == 0) talk = " the talk starts with " + first + " and ends with " + last + ".";
        else if (form == 1) talk = " the talk has " + n + " marks in it.";
        else talk = " the first mark of the talk is " + first + ".";
    }
    return sound + talk;
}

std::string expand_qa_answer(const std::string& short_answer, Rng& rng) {
    std::string s = short_answer;
    const bool chant = rng.uniform_below(5) < 2;  // low-diversity filler, sometimes a loop
    while (word_count(s) < 50) {
        if (chant && word_count(s) >= 20 && word_count(s) < 40) {
            s += " it is so and it is so and it is so and it is so and that is that.";
        } else {
            const int form = static_cast<int>(rng.uniform_below(3));
            if (form == 0) s += " that is what i hear in the clip.";
            else if (form == 1) s += " the sound is told as it is.";
            else s += " that is all there is to say.";
        }
    }
    return s;
}

// ---- corpus for backbone pre-training ----------------------------------------

std::vector<TextLine> make_text_corpus(std::uint64_t seed, std::size_t lines) {
    std::vector<TextLine> out;
    out.reserve(lines);
    const auto& events = event_registry();
    for (std::size_t i = 0; i < lines; ++i) {
        Rng rng = Rng::stream(seed, "corpus", i);
        TextLine line;
        line.span_len = rng.uniform_below(2) ? static_cast<int>(2 + rng.uniform_below(11)) : 0;
        const int kind = static_cast<int>(rng.uniform_below(10));
        if (kind < 3) {
            // story style
            std::vector<std::string> terms;
            const std::size_t k = 1 + rng.uniform_below(2);
            for (std::size_t j = 0; j < k; ++j)
                terms.push_back(events[rng.uniform_below(events.size())]);
            line.user_text = pick(instruction_pool("story"), rng);
            line.response = make_story(terms, rng);
        } else if (kind < 5) {
            // qa style
            std::set<int> ev;
            ev.insert(static_cast<int>(rng.uniform_below(events.size())));
            std::vector<int> sym;
            const std::size_t k = 4 + rng.uniform_below(5);
            for (std::size_t j = 0; j < k; ++j)
                sym.push_back(static_cast<int>(rng.uniform_below(kNumSymbols)));
            line.user_text = pick(instruction_pool("qa"), rng);
            line.response = make_qa_answer(ev, sym, rng);
        } else if (kind < 7) {
            // letter echo / transcription style
            std::vector<int> sym;
            const std::size_t k = 3 + rng.uniform_below(7);
            for (std::size_t j = 0; j < k; ++j)
                sym.push_back(static_cast<int>(rng.uniform_below(kNumSymbols)));
            const std::string letters = render_transcript(sym);
            if (rng.uniform_below(2)) {
                line.user_text = "say " + letters;
                line.span_len = 0;  // echo is a pure text skill
            } else {
                line.user_text = pick(instruction_pool("transcribe"), rng);
            }
            line.response = letters;
        } else if (kind < 9) {
            // caption style
            std::set<int> ev;
            const std::size_t k = 1 + rng.uniform_below(3);
            while (ev.size() < k) ev.insert(static_cast<int>(rng.uniform_below(events.size())));
            line.user_text = pick(instruction_pool("caption"), rng);
            line.response = render_caption(ev);
        } else {
            // free prose
            std::vector<std::string> terms = {events[rng.uniform_below(events.size())]};
            line.user_text.clear();
            line.span_len = 0;
            line.response = make_story(terms, rng);
        }
        out.push_back(std::move(line));
    }
    return out;
}

// ---- world construction -------------------------------------------------------

namespace {

struct BuildCtx {
    const WorldConfig* cfg;
    const Codebook* cb;
    std::uint64_t seed;
    int counter = 0;
};

WorldExample build_example(BuildCtx& ctx, const std::string& split, const std::string& task,
                           bool long_symbols, bool long_answer) {
    const int index = ctx.counter++;
    Rng rng = Rng::stream(ctx.seed, "world/" + split + "/" + task,
                          static_cast<std::uint64_t>(index));
    WorldExample we;
    RawAudioSpec& spec = we.spec;
    spec.noise_std = ctx.cfg->noise_std;

    const auto& events = event_registry();
    auto add_events = [&](std::size_t lo, std::size_t hi) {
        const std::size_t k = lo + rng.uniform_below(hi - lo + 1);
        while (spec.event_tags.size() < k)
            spec.event_tags.insert(static_cast<int>(rng.uniform_below(events.size())));
    };
    auto add_symbols = [&](std::size_t lo, std::size_t hi) {
        const std::size_t k = lo + rng.uniform_below(hi - lo + 1);
        for (std::size_t j = 0; j < k; ++j)
            spec.symbol_sequence.push_back(static_cast<int>(rng.uniform_below(kNumSymbols)));
    };

    if (task == "transcribe") {
        if (long_symbols) add_symbols(52, 60); else add_symbols(4, 9);
        add_events(0, 1);
    } else if (task == "caption") {
        add_events(1, 3);
    } else if (task == "qa") {
        add_symbols(4, 8);
        add_events(1, 2);
    } else if (task == "story") {
        add_symbols(3, 6);
        add_events(1, 3);
    } else {
        throw DataError("make_world: unknown task '" + task + "'");
    }

    const std::int64_t windows =
        spec.symbol_sequence.empty() ? static_cast<std::int64_t>(2 + rng.uniform_below(4))
                                     : static_cast<std::int64_t>(spec.symbol_sequence.size());
    const std::int64_t jitter = static_cast<std::int64_t>(rng.uniform_below(3));
    spec.duration_frames = windows * 17 - jitter;

    const std::uint64_t enc_seed = Rng::stream(ctx.seed, "world/enc", index).next_u64();
    we.fused = fuse(synth_speech_encode(spec, *ctx.cb, enc_seed),
                    synth_audio_encode(spec, *ctx.cb, enc_seed + 1));

    PromptedExample& ex = we.ex;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "ex%06d", index);
    ex.id = idbuf;
    ex.task = task;
    ex.instruction = pick(instruction_pool(task), rng);
    ex.transcript = render_transcript(spec.symbol_sequence);
    if (task == "transcribe") {
        ex.reference = ex.transcript;
    } else if (task == "caption") {
        ex.reference = render_caption(spec.event_tags);
    } else if (task == "qa") {
        ex.reference = make_qa_answer(spec.event_tags, spec.symbol_sequence, rng);
        if (long_answer) ex.reference = expand_qa_answer(ex.reference, rng);
    } else {
        std::vector<std::string> terms;
        for (int e : spec.event_tags) terms.push_back(events[static_cast<std::size_t>(e)]);
        ex.reference = make_story(terms, rng);
    }
    ex.feature_path = "features/" + ex.id + ".audf";
    return we;
}

WorldExample caption_sibling(BuildCtx& ctx, const WorldExample& story_ex) {
    const int index = ctx.counter++;
    Rng rng = Rng::stream(ctx.seed, "world/sibling", static_cast<std::uint64_t>(index));
    WorldExample we;
    we.spec = story_ex.spec;
    we.fused = story_ex.fused;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "ex%06d", index);
    we.ex.id = idbuf;
    we.ex.task = "caption";
    we.ex.instruction = pick(instruction_pool("caption"), rng);
    we.ex.transcript = story_ex.ex.transcript;
    we.ex.reference = render_caption(we.spec.event_tags);
    we.ex.feature_path = story_ex.ex.feature_path;  // same clip
    return we;
}

}  // namespace

World make_world(const WorldConfig& config, std::uint64_t seed) {
    if (config.train.total() + config.eval.total() + config.probe.total() +
            config.activation_pool + config.asr_long_pool + config.qa_long_pool ==
        0)
        throw DataError("make_world: zero quota for all tasks");
    const Codebook cb = make_codebook(seed);
    BuildCtx ctx{&config, &cb, seed};
    World world;
    world.seed = seed;

    auto fill = [&](const std::string& split, const TaskQuota& q) {
        auto& vec = world.splits[split];
        for (int i = 0; i < q.transcribe; ++i)
            vec.push_back(build_example(ctx, split, "transcribe", false, false));
        for (int i = 0; i < q.caption; ++i)
            vec.push_back(build_example(ctx, split, "caption", false, false));
        for (int i = 0; i < q.qa; ++i)
            vec.push_back(build_example(ctx, split, "qa", false, false));
        for (int i = 0; i < q.story; ++i) {
            vec.push_back(build_example(ctx, split, "story", false, false));
            if (split != "train") vec.push_back(caption_sibling(ctx, vec.back()));
        }
    };
    fill("train", config.train);
    fill("eval", config.eval);
    fill("probe", config.probe);

    auto& act = world.splits["activation"];
    for (int i = 0; i < config.activation_pool; ++i)
        act.push_back(build_example(ctx, "activation", "caption", false, false));
    auto& asr_long = world.splits["asr_long"];
    for (int i = 0; i < config.asr_long_pool; ++i)
        asr_long.push_back(build_example(ctx, "asr_long", "transcribe", true, false));
    auto& qa_long = world.splits["qa_long"];
    for (int i = 0; i < config.qa_long_pool; ++i)
        qa_long.push_back(build_example(ctx, "qa_long", "qa", false, true));
    return world;
}

// ---- io -----------------------------------------------------------------------

void write_world(const World& world, const std::string& dir, std::uint64_t config_hash) {
    fs::create_directories(fs::path(dir) / "features");
    nlohmann::json counts;
    for (const auto& [split, examples] : world.splits) {
        std::ofstream os(fs::path(dir) / ("world_" + split + ".jsonl"));
        if (!os) throw DataError("cannot write dataset split " + split);
        std::map<std::string, int> per_task;
        for (const WorldExample& we : examples) {
            nlohmann::json j;
            j["id"] = we.ex.id;
            j["task"] = we.ex.task;
            j["instruction"] = we.ex.instruction;
            j["reference"] = we.ex.reference;
            if (!we.ex.transcript.empty()) j["transcript"] = we.ex.transcript;
            j["feature_path"] = we.ex.feature_path;
            os << j.dump() << '\n';
            ++per_task[we.ex.task];
            const fs::path fpath = fs::path(dir) / we.ex.feature_path;
            if (!fs::exists(fpath)) save_features(we.fused, fpath.string());
        }
        counts[split] = per_task;
    }
    nlohmann::json manifest;
    manifest["config_hash"] = config_hash;
    manifest["seed"] = world.seed;
    manifest["tool_version"] = kToolVersion;
    manifest["counts"] = counts;
    std::ofstream os(fs::path(dir) / "world_manifest.json");
    os << manifest.dump(2) << '\n';
}

std::vector<PromptedExample> load_split(const std::string& dir, const std::string& split) {
    const fs::path path = fs::path(dir) / ("world_" + split + ".jsonl");
    std::ifstream is(path);
    if (!is) throw DataError("cannot open dataset split: " + path.string());
    std::vector<PromptedExample> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        PromptedExample ex;
        ex.id = j.at("id").get<std::string>();
        ex.task = j.at("task").get<std::string>();
        ex.instruction = j.at("instruction").get<std::string>();
        ex.reference = j.at("reference").get<std::string>();
        if (j.contains("transcript")) ex.transcript = j["transcript"].get<std::string>();
        ex.feature_path = j.at("feature_path").get<std::string>();
        out.push_back(std::move(ex));
    }
    return out;
}

FeatureSequence load_example_features(const std::string& dir, const PromptedExample& ex) {
    return load_features((fs::path(dir) / ex.feature_path).string());
}

}  // namespace alm
