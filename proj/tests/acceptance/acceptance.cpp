// Acceptance checks. One PASS/FAIL line per criterion on stdout.
//
//   aspectrl_acceptance            run everything
//   aspectrl_acceptance <name>...  run the named criteria
//
// Exit status is 0 only if every selected criterion passed.

#include "aspectrl/commands.hpp"
#include "aspectrl/cot_document.hpp"
#include "aspectrl/curation.hpp"
#include "aspectrl/grpo.hpp"
#include "aspectrl/reward.hpp"
#include "aspectrl/text.hpp"
#include "aspectrl/toy_trainer.hpp"

#include "support/gradient_check.hpp"
#include "support/oracles.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

using namespace aspectrl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool ok = true;
    std::vector<std::string> failures;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (cond) return;
        ok = false;
        if (failures.size() < 5) failures.push_back(what);
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<json> json_lines(const fs::path& p) {
    std::vector<json> out;
    std::ifstream in(p);
    for (std::string l; std::getline(in, l);) out.push_back(json::parse(l));
    return out;
}

std::vector<json> golden_corpus() {
    return json_lines(fs::path(ASPECTRL_TEST_DATA_DIR) / "golden_corpus.jsonl");
}

// ---------------------------------------------------------------------------
// 1. reward exactness

// Code points that stay NFC in any order: no combining marks, no conjoining
// jamo, no whitespace (answers are trimmed before comparison).
const std::u32string kAlphabet =
    U"abcdefxyzABQ019-.?"
    U"éüçñßãığş"  // Latin with diacritics, Turkish
    U"жфыЖ"                                  // Cyrillic
    U"العرب"                            // Arabic letters
    U"กขคง"                                  // Thai consonants
    U"中文東京都出口"                // CJK
    U"あアン"                                        // kana
    U"가한국"                                        // Hangul syllables
    U"ạươ"                                        // Vietnamese precomposed
    U"\U0001F600\U0001F34E";                                     // astral

std::u32string random_string(std::mt19937_64& rng, std::size_t max_len) {
    std::u32string s(rng() % (max_len + 1), U'a');
    for (auto& c : s) c = kAlphabet[rng() % kAlphabet.size()];
    return s;
}

std::u32string mutate(std::u32string s, std::mt19937_64& rng) {
    const int edits = static_cast<int>(rng() % 6);
    for (int e = 0; e < edits; ++e) {
        const char32_t c = kAlphabet[rng() % kAlphabet.size()];
        switch (rng() % 3) {
            case 0: s.insert(s.begin() + static_cast<long>(rng() % (s.size() + 1)), c); break;
            case 1: if (!s.empty()) s.erase(rng() % s.size(), 1); break;
            default: if (!s.empty()) s[rng() % s.size()] = c; break;
        }
    }
    return s;
}

void reward_exactness(Verdict& v) {
    const auto t0 = Clock::now();

    std::size_t lang_cases = 0;
    for (auto a : kAllLanguages) {
        for (auto b : kAllLanguages) {
            ++lang_cases;
            v.expect(reward::language_reward(a, b) == (a == b ? 1.0 : 0.0),
                     "language " + std::string(to_string(a)) + "/" + std::string(to_string(b)));
        }
        v.expect(reward::language_reward(a, std::nullopt) == 0.0, "language vs missing");
    }

    std::size_t count_cases = 0;
    for (int rt = 0; rt <= 10; ++rt)
        for (int ro = 0; ro <= 10; ++ro)
            for (int pt = 0; pt <= 10; ++pt)
                for (int po = 0; po <= 10; ++po) {
                    ++count_cases;
                    const double got = reward::count_reward(
                        {std::uint64_t(rt), std::uint64_t(ro)}, {std::uint64_t(pt), std::uint64_t(po)});
                    const double want = oracle::count_reward(rt, ro, pt, po).value();
                    if (got != want) {
                        v.expect(false, "count " + std::to_string(rt) + "," + std::to_string(ro) + " vs " +
                                            std::to_string(pt) + "," + std::to_string(po));
                    }
                }
    v.expect(reward::count_reward({3, 2}, {2, 3}) == 1.0, "cancellation case (3,2)/(2,3)");
    v.expect(reward::count_reward({1, 1}, {10, 10}) == 0.0, "clamp case");

    std::mt19937_64 rng(20241016);
    std::size_t pairs = 0;
    double worst = 0.0;
    std::size_t longest = 0;
    for (; pairs < 20000; ++pairs) {
        const auto a = random_string(rng, 40);
        const auto b = pairs % 2 ? random_string(rng, 40) : mutate(a, rng);
        const std::string ua = oracle::encode(a), ub = oracle::encode(b);
        if (pairs < 200) v.expect(text::nfc(ua) == ua && text::nfc(ub) == ub, "generator produced non-NFC text");
        const auto d = oracle::levenshtein(a, b);
        if (reward::edit_distance(a, b) != d || reward::edit_distance(std::string_view(ua), std::string_view(ub)) != d) {
            v.expect(false, "edit distance " + ua + " / " + ub);
        }
        const double err = std::abs(reward::answer_reward(ua, ub) - oracle::answer_reward(a, b).value());
        worst = std::max(worst, err);
        longest = std::max({longest, a.size(), b.size()});
    }
    v.expect(worst <= 1e-12, "answer reward error " + std::to_string(worst));

    const double secs = seconds_since(t0);
    v.expect(secs < 10.0, "runtime " + std::to_string(secs) + " s");
    v.detail << lang_cases << " language pairs, " << count_cases << " count cases, " << pairs
             << " string pairs (max len " << longest << ", max reward error " << worst << "), " << secs << " s";
}

// ---------------------------------------------------------------------------
// 2. default-weight composition

std::string strip_think(std::string text) {
    const auto b = text.find("<think>");
    const auto e = text.find("</think>\n");
    return text.erase(b, e + 9 - b);
}

void composition(Verdict& v) {
    const reward::RewardWeights w{0.25, 0.25, 0.25, 0.25};
    const cot::TagSet tags;
    std::mt19937_64 rng(31);
    std::size_t cases = 0;

    for (int n = 0; n < 3000; ++n) {
        reward::ScoringReference ref;
        ref.language = kAllLanguages[rng() % kAllLanguages.size()];
        ref.counts = {rng() % 6, rng() % 6};
        ref.answer = oracle::encode(random_string(rng, 12));
        if (text::trim(ref.answer).empty()) ref.answer = "x";

        cot::CoTDocument doc;
        for (std::uint64_t i = 0; i < ref.counts.text_segments; ++i) doc.segments.push_back({{0, 0, 5, 5}, "s"});
        doc.language = ref.language;
        doc.object_count = ref.counts.objects;
        doc.reasoning = "look";
        doc.final_answer = ref.answer;

        auto total = [&](const cot::CoTDocument& d) {
            return reward::score_record(cot::serialize_document(d), ref, w, tags).total;
        };

        v.expect(total(doc) == 1.0, "perfect prediction");

        auto wrong_lang = doc;
        wrong_lang.language = kAllLanguages[(static_cast<std::size_t>(ref.language) + 1 + rng() % 12) % 13];
        v.expect(total(wrong_lang) == 0.75, "language failure");

        auto wrong_count = doc;
        wrong_count.object_count = 1000;
        v.expect(total(wrong_count) == 0.75, "count failure");

        const std::string bad_format = strip_think(cot::serialize_document(doc));
        v.expect(reward::score_record(bad_format, ref, w, tags).total == 0.75, "format failure");

        auto wrong_answer = doc;
        const auto ref32 = text::code_points(ref.answer);
        auto pred32 = mutate(ref32, rng);
        if (pred32.empty()) pred32 = U"q";
        wrong_answer.final_answer = oracle::encode(pred32);
        if (text::trim(wrong_answer.final_answer) != wrong_answer.final_answer) wrong_answer.final_answer = "q";
        const double ra = oracle::answer_reward(ref32, text::code_points(wrong_answer.final_answer)).value();
        v.expect(total(wrong_answer) == 0.75 + 0.25 * ra, "answer partial credit");
        cases += 5;
    }
    v.detail << cases << " predictions; exact equality with 1.0, 0.75 and 0.75 + 0.25*R_answer";
}

// ---------------------------------------------------------------------------
// 3. advantages

void advantages(Verdict& v) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double eps = 1e-8;
    const std::size_t sizes[] = {2, 4, 8};

    double worst_mean = 0.0;
    std::size_t groups = 0, zero_groups = 0, shift_checks = 0, scale_checks = 0;
    for (; groups < 100000; ++groups) {
        const std::size_t g = sizes[groups % 3];
        std::vector<double> r(g);
        for (double& x : r) x = unit(rng);
        const auto a = grpo::group_advantages(r, eps);
        const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(g);
        worst_mean = std::max(worst_mean, std::abs(mean));

        // Dyadic rewards and shifts: every intermediate is exact, so the
        // shifted group must reproduce the same advantages bit for bit.
        std::vector<double> q(g), shifted(g);
        const double shift = std::ldexp(static_cast<double>(static_cast<int>(rng() % 8193) - 4096), -10);
        for (std::size_t i = 0; i < g; ++i) {
            q[i] = std::ldexp(static_cast<double>(rng() % (1u << 20)), -20);
            shifted[i] = q[i] + shift;
        }
        const auto aq = grpo::group_advantages(q, eps);
        const auto as = grpo::group_advantages(shifted, eps);
        for (std::size_t i = 0; i < g; ++i) {
            if (std::abs(aq[i] - as[i]) > 1e-12) v.expect(false, "shift invariance");
        }
        ++shift_checks;

        const double scale = groups % 2 ? std::ldexp(1.0, static_cast<int>(rng() % 21) - 10) : 0.01 + 100.0 * unit(rng);
        std::vector<double> scaled(g);
        for (std::size_t i = 0; i < g; ++i) scaled[i] = scale * r[i];
        const auto ak = grpo::group_advantages(scaled, eps);
        for (std::size_t i = 0; i < g; ++i) {
            for (std::size_t j = 0; j < g; ++j) {
                if ((a[i] < a[j]) != (ak[i] < ak[j])) v.expect(false, "scaling changed ordering");
            }
        }
        if (std::max_element(a.begin(), a.end()) - a.begin() != std::max_element(ak.begin(), ak.end()) - ak.begin()) {
            v.expect(false, "scaling changed argmax");
        }
        ++scale_checks;

        if (groups % 10 == 0) {
            const double c = groups % 20 ? unit(rng) : 0.0;
            const auto z = grpo::group_advantages(std::vector<double>(g, c), eps);
            v.expect(std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; }), "zero-variance group");
            ++zero_groups;
        }
    }
    v.expect(worst_mean <= 1e-12, "mean " + std::to_string(worst_mean));
    const double secs = seconds_since(t0);
    v.expect(secs < 30.0, "runtime " + std::to_string(secs) + " s");
    v.detail << groups << " groups (G in {2,4,8}), max |mean| " << worst_mean << ", " << zero_groups
             << " zero-variance, " << shift_checks << " shift, " << scale_checks << " scaling checks, " << secs << " s";
}

// ---------------------------------------------------------------------------
// 4. GRPO objective

void grpo_objective(Verdict& v) {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> lp(-6.0, 0.0), unit(0.0, 1.0), gap(1e-6, 2.0);
    const grpo::GrpoConfig cfg;
    const std::size_t sizes[] = {2, 4, 8};

    std::size_t groups = 0;
    for (; groups < 100000; ++groups) {
        grpo::PolicyGroup g{"p", {}};
        const std::size_t n = sizes[groups % 3];
        for (std::size_t i = 0; i < n; ++i) g.outputs.push_back({unit(rng), lp(rng), lp(rng), lp(rng)});
        const auto adv = grpo::group_advantages(g.rewards(), cfg.advantage_epsilon);
        if (!(grpo::clipped_surrogate(g, adv, cfg.clip_epsilon) <= grpo::unclipped_surrogate(g, adv))) {
            v.expect(false, "clipped > unclipped");
        }
        if (!(grpo::kl_penalty(g) >= 0.0)) v.expect(false, "negative KL");

        auto same = g;
        for (auto& o : same.outputs) o.logp_ref = o.logp_new;
        if (grpo::kl_penalty(same) != 0.0) v.expect(false, "KL nonzero for identical policies");
        same.outputs[rng() % n].logp_ref += (rng() % 2 ? 1.0 : -1.0) * gap(rng);
        if (!(grpo::kl_penalty(same) > 0.0)) v.expect(false, "KL zero for different policies");
    }

    // rewards (1, 0); A = +-0.5 / (0.5 + 1e-8). Values from 30-digit arithmetic.
    const grpo::PolicyGroup hand{"hand", {{1.0, -0.5, -1.0, -0.7}, {0.0, -2.0, -1.5, -2.0}}};
    const auto hadv = grpo::group_advantages(hand.rewards(), cfg.advantage_epsilon);
    const double hand_err = std::max({std::abs(hadv[0] - 0.99999998000000039999999),
                                      std::abs(grpo::clipped_surrogate(hand, hadv, 0.2) - 0.19999999600000007999999),
                                      std::abs(grpo::unclipped_surrogate(hand, hadv) - 0.52109529507184146018559),
                                      std::abs(grpo::kl_penalty(hand) - 0.0093653765389909293349677),
                                      std::abs(grpo::grpo_objective(hand, cfg) - 0.19962538093844044282659)});
    v.expect(hand_err <= 1e-12, "hand-worked group off by " + std::to_string(hand_err));

    toy::Rng prng(61);
    std::size_t points = 0, skipped = 0, clipped_samples = 0;
    double worst = 0.0;
    while (points < 150) {
        const auto p = gradcheck::random_point(prng, 1e-5);
        if (!p) {
            ++skipped;
            continue;
        }
        ++points;
        clipped_samples += p->clipped;
        worst = std::max(worst, p->relative_error);
    }
    v.expect(worst < 1e-5, "finite-difference relative error " + std::to_string(worst));
    const std::size_t samples = points * cfg.group_size;
    v.expect(clipped_samples > 0 && clipped_samples < samples, "gradient points should mix clipped and unclipped samples");
    v.detail << groups << " random groups; hand-worked error " << hand_err << "; " << points
             << " gradient points (" << clipped_samples << "/" << samples << " samples clipped, " << skipped
             << " skipped near a clip boundary), max relative error " << worst;
}

// ---------------------------------------------------------------------------
// 5. parser

const char* const kFuzzTokens[] = {
    "<segments>\n", "</segments>\n", "<think>\n", "\n</think>\n", "<think>", "</think>", "<answer>", "</answer>",
    "<caption>", "</caption>", "\\lang{", "\\obj{", "}", "{", "[", "]", ",", "\n", " ", "1", "-3", "4.5",
    "99999999999999999999", "ja", "zh-CN", "xx", "\xC3\xA9", "e\xCC\x81", "\xFF", "\xC3", "\xE2\x80",
    "\xF0\x9F\x98\x80", "\xED\xA0\x80", "\r\n", "\xE2\x80\x8B", "\\", "[1,2,3,4] x\n", "\xEF\xBB\xBF",
};

std::string fuzz_input(const std::vector<std::string>& seeds, std::mt19937_64& rng) {
    if (rng() % 20 == 0) {
        std::string s(rng() % 200, '\0');
        for (auto& c : s) c = static_cast<char>(rng() & 0xFF);
        return s;
    }
    std::string s = seeds[rng() % seeds.size()];
    const int ops = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < ops; ++k) {
        const std::size_t at = s.empty() ? 0 : rng() % (s.size() + 1);
        switch (rng() % 7) {
            case 0:
            case 1: s.insert(at, kFuzzTokens[rng() % std::size(kFuzzTokens)]); break;
            case 2: if (at < s.size()) s.erase(at, 1 + rng() % 16); break;
            case 3: if (at < s.size()) s[at] = static_cast<char>(rng() & 0xFF); break;
            case 4: s.resize(at); break;
            case 5: {
                const auto& other = seeds[rng() % seeds.size()];
                const std::size_t from = rng() % (other.size() + 1);
                s.insert(at, other.substr(from, rng() % 64));
                break;
            }
            default:
                if (at < s.size()) s.insert(at, s.substr(at, 1 + rng() % 24));
                break;
        }
    }
    return s;
}

void parser(Verdict& v) {
    const auto t0 = Clock::now();
    const auto corpus = golden_corpus();
    v.expect(corpus.size() == 200, "golden corpus has " + std::to_string(corpus.size()) + " documents");

    std::vector<std::string> seeds;
    std::size_t round_trips = 0, extractions = 0;
    for (const auto& entry : corpus) {
        const std::string text = entry.at("text");
        const std::string id = entry.at("id");
        seeds.push_back(text);
        auto parsed = cot::parse_document(text);
        if (!std::holds_alternative<cot::CoTDocument>(parsed)) {
            v.expect(false, id + " failed to parse");
            continue;
        }
        const auto& doc = std::get<cot::CoTDocument>(parsed);
        if (cot::serialize_document(doc) == text) ++round_trips;
        else v.expect(false, id + " does not round trip");

        const json& e = entry.at("expected");
        bool ok = doc.segments.size() == e.at("text_segments").get<std::size_t>() &&
                  doc.caption == e.at("caption").get<std::string>() &&
                  doc.reasoning == e.at("reasoning").get<std::string>() &&
                  doc.final_answer == e.at("answer").get<std::string>();
        ok = ok && (e.at("language").is_null() ? !doc.language.has_value()
                                               : doc.language && to_string(*doc.language) == e.at("language"));
        ok = ok && (e.at("object_count").is_null() ? !doc.object_count.has_value()
                                                   : doc.object_count == e.at("object_count").get<std::uint64_t>());
        for (std::size_t i = 0; ok && i < doc.segments.size(); ++i) {
            const auto& s = e.at("segments").at(i);
            const auto& b = doc.segments[i].box;
            ok = s.at("summary") == doc.segments[i].summary &&
                 s.at("box") == json::array({b.x_min, b.y_min, b.x_max, b.y_max});
        }
        if (ok) ++extractions;
        else v.expect(false, id + " extraction mismatch");
    }

    std::mt19937_64 rng(73);
    std::size_t inputs = 0, aborts = 0, accepted = 0, reparsed = 0, unstable = 0;
    for (; inputs < 1000000; ++inputs) {
        const std::string input = fuzz_input(seeds, rng);
        try {
            auto r = cot::parse_document(input);
            if (const auto* doc = std::get_if<cot::CoTDocument>(&r)) {
                ++accepted;
                if (cot::validate_document(*doc).empty()) {
                    ++reparsed;
                    auto again = cot::parse_document(cot::serialize_document(*doc));
                    const auto* d2 = std::get_if<cot::CoTDocument>(&again);
                    if (!d2 || !cot::same_content(*doc, *d2)) {
                        if (unstable++ == 0) v.expect(false, "re-parse changed content: " + json(input).dump());
                    }
                }
            }
        } catch (const std::exception& ex) {
            if (aborts++ == 0) v.expect(false, std::string("parser threw: ") + ex.what());
        }
    }
    v.expect(aborts == 0, std::to_string(aborts) + " aborts");
    v.expect(unstable == 0, std::to_string(unstable) + " unstable re-parses");
    const double secs = seconds_since(t0);
    v.detail << round_trips << "/" << corpus.size() << " round trips, " << extractions << "/" << corpus.size()
             << " extractions; fuzz " << inputs << " inputs, " << aborts << " aborts, " << accepted
             << " parsed, " << reparsed << " re-serialized stably checked, " << secs << " s";
}

// ---------------------------------------------------------------------------
// 6. curation

const char* kCurationScript = R"({
  "default": {
    "steps": ["The sign shows [12,40,220,90] 出口 near the door.",
              "I can count \\obj{3} bottles on the shelf.",
              "So the answer is 3."],
    "scores": [0.95]
  },
  "samples": {
    "c02": {"step_scores": {"2": [0.3, 0.5, 0.8]}, "locate": {"span": [13, 20], "critique": "recount"},
            "corrections": {"2": ["\\obj{2}", "\\obj{4}"]}},
    "c05": {"step_scores": {"1": [0.1]}},
    "c07": {"step_scores": {"3": [0.6, 0.65, 0.69, 0.7]}},
    "c09": {"step_scores": {"1": [0.2, 0.9], "2": [0.0]}},
    "c11": {"transport_failures": 1},
    "c12": {"step_scores": {"1": [0.4, 0.75]}, "locate": {"span": [5, 500]}},
    "c14": {"step_scores": {"3": [0.5, 0.69999]}}
  }
})";

constexpr std::size_t kCurationSamples = 16;

curation::CurationStats curate(const fs::path& in, const fs::path& out, bool resume, std::optional<std::size_t> limit,
                               curation::ScriptedClient& client) {
    curation::CurationConfig cfg;
    cfg.retry_backoff_ms = 0;
    cfg.concurrency = 4;
    return curation::run_curation({in, out, {}, resume, limit}, {client, client}, cfg);
}

void curation_pipeline(Verdict& v) {
    TempDir dir("aspectrl_acceptance_curation");
    const auto in = dir.path / "samples.jsonl";
    {
        std::ofstream f(in);
        for (std::size_t i = 1; i <= kCurationSamples; ++i) {
            char id[8];
            std::snprintf(id, sizeof id, "c%02zu", i);
            f << to_json(curation::RawSample{id, std::string("img/") + id + ".jpg", "How many bottles?", "3",
                                             kAllLanguages[i % 13]})
                     .dump()
              << '\n';
        }
    }
    const json script = json::parse(kCurationScript);
    const curation::CurationConfig defaults;

    // Uninterrupted run.
    const auto full = dir.path / "full.jsonl";
    curation::ScriptedClient c1(script);
    const auto stats = curate(in, full, false, std::nullopt, c1);

    std::size_t steps_checked = 0, replayed = 0;
    for (const auto& line : json_lines(full)) {
        const auto rec = curation::reference_record_from_json(line);
        for (const auto& s : rec.cot.steps) {
            ++steps_checked;
            v.expect(s.score && *s.score >= defaults.threshold, rec.sample.id + " emitted a step below threshold");
        }
        const auto replay = curation::replay_trace(rec.trace);
        const auto final_steps = rec.cot.contents();
        std::string a, b;
        for (const auto& s : replay) a += s + '\x1f';
        for (const auto& s : final_steps) b += s + '\x1f';
        if (a == b) ++replayed;
        else v.expect(false, rec.sample.id + " replay differs");
    }

    std::map<std::string, std::size_t> incorrigible;  // id -> cycles on the failing step
    for (const auto& line : json_lines(fs::path(full.string() + ".rejected.jsonl"))) {
        if (line.at("reason") != "incorrigible") continue;
        const auto trace = curation::trace_from_json(line.at("trace"));
        std::size_t worst = 0;
        for (std::size_t s = 1; s <= trace.initial_steps.size(); ++s) worst = std::max(worst, trace.cycles_for_step(s));
        incorrigible[line.at("id")] = worst;
    }
    const std::map<std::string, std::size_t> expected_rejects{
        {"c05", defaults.max_correction_iters}, {"c09", defaults.max_correction_iters},
        {"c14", defaults.max_correction_iters}};
    v.expect(incorrigible == expected_rejects, "incorrigible samples or cycle counts differ");
    v.expect(stats.accepted == kCurationSamples - 3 && stats.rejected == 3, "unexpected accept/reject split");

    // Interrupted run: stop after 6 samples, tear the last line, resume with a
    // fresh client.
    const auto part = dir.path / "part.jsonl";
    curation::ScriptedClient c2(script);
    curate(in, part, false, 6, c2);
    std::vector<std::string> completed;
    for (const auto& l : json_lines(part)) completed.push_back(l.at("id"));
    for (const auto& l : json_lines(fs::path(part.string() + ".rejected.jsonl"))) completed.push_back(l.at("id"));
    { std::ofstream(part, std::ios::app) << R"({"id":"c07","image_ref":"img/c0)"; }

    curation::ScriptedClient c3(script);
    const auto resumed = curate(in, part, true, std::nullopt, c3);
    std::size_t resent = 0;
    for (const auto& id : completed) resent += c3.calls_for(id);
    v.expect(completed.size() == 6, "interrupted run completed " + std::to_string(completed.size()) + " samples");
    v.expect(resent == 0, std::to_string(resent) + " calls re-sent for completed samples");
    v.expect(resumed.skipped == 6, "resume skipped " + std::to_string(resumed.skipped));
    v.expect(slurp(part) == slurp(full), "resumed output differs from uninterrupted output");
    v.expect(slurp(part.string() + ".rejected.jsonl") == slurp(full.string() + ".rejected.jsonl"),
             "resumed rejects differ from uninterrupted rejects");

    v.detail << stats.accepted << " accepted (" << steps_checked << " steps, all >= " << defaults.threshold << "), "
             << replayed << " replayed byte-for-byte; " << incorrigible.size() << " incorrigible after "
             << defaults.max_correction_iters << " cycles; resume after " << completed.size()
             << " samples re-sent " << resent << " calls, output identical to uninterrupted run";
}

// ---------------------------------------------------------------------------
// 7. toy training

std::optional<std::size_t> first_at_least(const std::vector<double>& xs, double level) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] >= level) return i;
    }
    return std::nullopt;
}

std::vector<std::size_t> preference_order(const std::vector<double>& logits) {
    std::vector<std::size_t> idx(logits.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return logits[a] > logits[b]; });
    return idx;
}

void toy_training(Verdict& v) {
    const auto t0 = Clock::now();
    const toy::TrainingConfig cfg;  // seed 7, 2000 steps, balanced weights
    const auto result = toy::run_training(cfg);
    const std::size_t w = cfg.smoothing_window;
    const auto total = toy::smooth(toy::series(result.rows, toy::Series::total), w);
    const auto format = toy::smooth(toy::series(result.rows, toy::Series::format), w);
    const auto answer = toy::smooth(toy::series(result.rows, toy::Series::answer), w);

    // First full window, so the baseline is a 10-step average like every other point.
    const double initial = total.at(w - 1);
    const double final_total = total.back();
    v.expect(final_total - initial >= 0.4, "gain " + std::to_string(final_total - initial));
    v.expect(total.back() - total.front() >= 0.4, "gain from the first step");

    const auto format_at = first_at_least(format, 0.9 * cfg.weights.format);
    const auto answer_at = first_at_least(answer, 0.9 * cfg.weights.answer);
    v.expect(format_at.has_value(), "format never reached 0.9 of its weight");
    v.expect(format_at && (!answer_at || *format_at < *answer_at), "answer reached 0.9 before format");

    auto zero = cfg;
    zero.weights = {0, 0, 0, 0};
    const auto flat = toy::run_training(zero);
    v.expect(std::all_of(flat.rows.begin(), flat.rows.end(), [](const auto& r) { return r.total == 0.0; }),
             "zero weights gave a nonzero total");
    bool same_order = true;
    double drift = 0.0;
    for (std::size_t s = 0; s < flat.initial.logits.size(); ++s) {
        same_order = same_order && preference_order(flat.initial.logits[s]) == preference_order(flat.final.logits[s]);
        for (std::size_t t = 0; t < flat.initial.logits[s].size(); ++t) {
            drift = std::max(drift, std::abs(flat.initial.logits[s][t] - flat.final.logits[s][t]));
        }
    }
    v.expect(same_order, "zero weights changed the preference ordering");

    const double secs = seconds_since(t0);
    v.expect(secs < 120.0, "runtime " + std::to_string(secs) + " s");
    v.detail << cfg.steps << " steps, seed " << cfg.seed << ": smoothed total " << initial << " -> " << final_total
             << "; format >= 0.9w at step " << (format_at ? std::to_string(*format_at) : "never")
             << ", answer at step " << (answer_at ? std::to_string(*answer_at) : "never")
             << "; zero weights: totals 0, max logit drift " << drift << "; " << secs << " s";
}

// ---------------------------------------------------------------------------
// 8. weight grid

std::map<std::string, double> last_csv_row(const fs::path& p) {
    std::ifstream in(p);
    std::string header, line, last;
    std::getline(in, header);
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    std::map<std::string, double> row;
    std::stringstream hs(header), ls(last);
    for (std::string h, cell; std::getline(hs, h, ',') && std::getline(ls, cell, ',');) row[h] = std::stod(cell);
    return row;
}

void weight_grid(Verdict& v) {
    TempDir dir("aspectrl_acceptance_grid");
    const auto cfg = dir.path / "config.json";
    std::ofstream(cfg) << R"({"toy": {}})";
    const std::string out_dir = dir.path.string();
    const char* argv[] = {"aspectrl", "train-toy", "--config", cfg.c_str(), "--grid", "--out-dir", out_dir.c_str()};
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(std::size(argv)), argv, out, err);
    v.expect(code == cli::kOk, "train-toy --grid exited " + std::to_string(code) + ": " + err.str());

    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir.path)) files += e.path().extension() == ".csv";
    v.expect(files == 5, std::to_string(files) + " metrics files");

    std::string best;
    double best_value = -1.0;
    for (const auto& entry : toy::weight_grid()) {
        const auto path = dir.path / (entry.name + ".csv");
        if (!fs::exists(path)) {
            v.expect(false, "missing " + path.filename().string());
            continue;
        }
        const auto row = last_csv_row(path);
        const double eval = row.count("smoothed_eval_total") ? row.at("smoothed_eval_total") : -1.0;
        const double raw = row.count("smoothed_total") ? row.at("smoothed_total") : -1.0;
        v.detail << entry.name << "=" << eval << " (own weights " << raw << ") ";
        if (eval > best_value) {
            best_value = eval;
            best = entry.name;
        } else if (eval == best_value) {
            best += "+" + entry.name;
        }
    }
    v.expect(best == toy::weight_grid().back().name, "highest final smoothed total: " + best);
    v.detail << "; best " << best;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
        {"reward_exactness", reward_exactness}, {"composition", composition},
        {"advantages", advantages},             {"grpo_objective", grpo_objective},
        {"parser", parser},                     {"curation", curation_pipeline},
        {"toy_training", toy_training},         {"weight_grid", weight_grid},
    };

    std::vector<std::string> wanted(argv + 1, argv + argc);
    for (const auto& name : wanted) {
        if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == name; })) {
            std::cerr << "unknown criterion '" << name << "'\n";
            return 64;
        }
    }

    bool all = true;
    for (const auto& [name, run] : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
        Verdict v;
        try {
            run(v);
        } catch (const std::exception& e) {
            v.expect(false, std::string("exception: ") + e.what());
        }
        all = all && v.ok;
        std::cout << (v.ok ? "PASS " : "FAIL ") << name << ": " << v.detail.str();
        for (const auto& f : v.failures) std::cout << "\n    " << f;
        std::cout << std::endl;
    }
    return all ? 0 : 1;
}
