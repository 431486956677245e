#include "aspectrl/records.hpp"

#include "aspectrl/cot_document.hpp"
#include "aspectrl/text.hpp"

#include <algorithm>

namespace aspectrl::curation {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* name) {
    if (!j.is_object()) throw RecordError("expected a JSON object");
    const auto it = j.find(name);
    if (it == j.end()) throw RecordError(std::string("missing field '") + name + "'");
    return *it;
}

std::string string_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_string()) throw RecordError(std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

std::uint64_t count_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw RecordError(std::string("field '") + name + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

double number_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number()) throw RecordError(std::string("field '") + name + "' must be a number");
    return v.get<double>();
}

LanguageCode language_field(const json& j, const char* name) {
    const std::string code = string_field(j, name);
    const auto lang = language_from_code(code);
    if (!lang) {
        throw RecordError(std::string("field '") + name + "': unknown language code '" + code + "'");
    }
    return *lang;
}

json span_to_json(TextSpan s) { return json::array({s.begin, s.end}); }

TextSpan span_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
        throw RecordError("span must be a pair of non-negative integers");
    }
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

void RawSample::validate() const {
    auto check = [](const std::string& value, const char* name, bool allow_empty) {
        if (!allow_empty && value.empty()) throw RecordError(std::string(name) + " must not be empty");
        if (!text::is_valid_utf8(value)) {
            throw RecordError(std::string(name) + " is not well-formed UTF-8");
        }
    };
    check(id, "id", false);
    check(image_ref, "image_ref", true);
    check(question, "question", false);
    check(answer, "answer", false);
}

std::vector<std::string> VerifiedCoT::contents() const {
    std::vector<std::string> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.content);
    return out;
}

std::size_t CurationTrace::cycles_for_step(std::size_t step) const {
    return static_cast<std::size_t>(std::count_if(
        cycles.begin(), cycles.end(), [&](const CorrectionCycle& c) { return c.step == step; }));
}

reward::ScoringReference ReferenceRecord::scoring_reference() const {
    return {sample.language, reference_counts, sample.answer};
}

std::string_view to_string(RejectReason reason) noexcept {
    switch (reason) {
        case RejectReason::transport: return "transport";
        case RejectReason::protocol: return "protocol";
        case RejectReason::incorrigible: return "incorrigible";
        case RejectReason::internal: return "internal";
    }
    return "internal";
}

std::string splice(std::string_view content, TextSpan span, std::string_view replacement) {
    const std::u32string cps = text::code_points(content);
    const std::size_t end = std::min(span.end, cps.size());
    const std::size_t begin = std::min(span.begin, end);
    std::string out = text::to_utf8(std::u32string_view(cps).substr(0, begin));
    out += replacement;
    out += text::to_utf8(std::u32string_view(cps).substr(end));
    return out;
}

std::vector<std::string> replay_trace(const CurationTrace& trace) {
    std::vector<std::string> steps = trace.initial_steps;
    for (const auto& c : trace.cycles) {
        if (c.step == 0 || c.step > steps.size()) {
            throw RecordError("trace cycle refers to step " + std::to_string(c.step) +
                              " outside the initial CoT");
        }
        std::string& s = steps[c.step - 1];
        s = splice(s, c.span, c.replacement);
        if (s != c.content_after) {
            throw RecordError("replay of step " + std::to_string(c.step) + " cycle " +
                              std::to_string(c.cycle) + " diverges from the recorded content");
        }
    }
    return steps;
}

reward::CountPair extract_reference_counts(const VerifiedCoT& cot) {
    reward::CountPair counts;
    std::optional<std::uint64_t> objects;
    for (const auto& step : cot.steps) {
        std::string_view rest = step.content;
        while (!rest.empty()) {
            const auto nl = rest.find('\n');
            if (cot::parse_segment_line(rest.substr(0, nl))) ++counts.text_segments;
            rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        }
        if (!objects) objects = cot::find_object_count(step.content);
    }
    counts.objects = objects.value_or(0);
    return counts;
}

json to_json(const RawSample& s) {
    return json{{"id", s.id},
                {"image_ref", s.image_ref},
                {"question", s.question},
                {"answer", s.answer},
                {"language", std::string(to_string(s.language))}};
}

json to_json(const CurationTrace& t) {
    json cycles = json::array();
    for (const auto& c : t.cycles) {
        cycles.push_back({{"step", c.step},
                          {"cycle", c.cycle},
                          {"score_before", c.score_before},
                          {"span", span_to_json(c.span)},
                          {"critique", c.critique},
                          {"replacement", c.replacement},
                          {"content_after", c.content_after},
                          {"score_after", c.score_after}});
    }
    return json{{"initial_steps", t.initial_steps},
                {"initial_scores", t.initial_scores},
                {"cycles", std::move(cycles)},
                {"client_calls", t.client_calls},
                {"notes", t.notes}};
}

json to_json(const ReferenceRecord& r) {
    json j = to_json(r.sample);
    json steps = json::array();
    for (const auto& s : r.cot.steps) {
        json step{{"index", s.index}, {"content", s.content}};
        step["score"] = s.score ? json(*s.score) : json(nullptr);
        steps.push_back(std::move(step));
    }
    j["cot"] = std::move(steps);
    j["reference_counts"] = {{"text_segments", r.reference_counts.text_segments},
                             {"objects", r.reference_counts.objects}};
    j["trace"] = to_json(r.trace);
    return j;
}

json to_json(const RejectedSample& r) {
    json j = to_json(r.sample);
    j["status"] = "rejected";
    j["reason"] = std::string(to_string(r.reason));
    j["message"] = r.message;
    j["raw_payload"] = r.raw_payload;
    j["trace"] = to_json(r.trace);
    return j;
}

RawSample raw_sample_from_json(const json& j) {
    RawSample s;
    s.id = string_field(j, "id");
    s.image_ref = j.contains("image_ref") ? string_field(j, "image_ref") : std::string{};
    s.question = string_field(j, "question");
    s.answer = string_field(j, "answer");
    s.language = language_field(j, "language");
    s.validate();
    return s;
}

CurationTrace trace_from_json(const json& j) {
    CurationTrace t;
    for (const auto& s : field(j, "initial_steps")) t.initial_steps.push_back(s.get<std::string>());
    for (const auto& s : field(j, "initial_scores")) t.initial_scores.push_back(s.get<double>());
    for (const auto& c : field(j, "cycles")) {
        CorrectionCycle cycle;
        cycle.step = count_field(c, "step");
        cycle.cycle = count_field(c, "cycle");
        cycle.score_before = number_field(c, "score_before");
        cycle.span = span_from_json(field(c, "span"));
        cycle.critique = string_field(c, "critique");
        cycle.replacement = string_field(c, "replacement");
        cycle.content_after = string_field(c, "content_after");
        cycle.score_after = number_field(c, "score_after");
        t.cycles.push_back(std::move(cycle));
    }
    t.client_calls = count_field(j, "client_calls");
    if (j.contains("notes")) {
        for (const auto& n : j.at("notes")) t.notes.push_back(n.get<std::string>());
    }
    return t;
}

ReferenceRecord reference_record_from_json(const json& j) {
    ReferenceRecord r;
    r.sample = raw_sample_from_json(j);
    for (const auto& s : field(j, "cot")) {
        CoTStep step;
        step.index = count_field(s, "index");
        step.content = string_field(s, "content");
        if (s.contains("score") && !s.at("score").is_null()) step.score = number_field(s, "score");
        r.cot.steps.push_back(std::move(step));
    }
    const json& counts = field(j, "reference_counts");
    r.reference_counts = {count_field(counts, "text_segments"), count_field(counts, "objects")};
    r.trace = trace_from_json(field(j, "trace"));
    return r;
}

ScoringRecord scoring_record_from_json(const json& j) {
    ScoringRecord r;
    r.id = string_field(j, "id");
    r.reference.language = language_field(j, "language");
    r.reference.answer = string_field(j, "answer");
    if (!text::is_valid_utf8(r.reference.answer)) throw RecordError("answer is not well-formed UTF-8");
    const json& counts = field(j, "reference_counts");
    r.reference.counts = {count_field(counts, "text_segments"), count_field(counts, "objects")};
    return r;
}

}  // namespace aspectrl::curation
