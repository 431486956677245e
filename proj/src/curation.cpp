#include "aspectrl/curation.hpp"

#include "aspectrl/text.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <regex>
#include <set>
#include <thread>

namespace aspectrl::curation {

using nlohmann::json;

void CurationConfig::validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("threshold: must lie in (0, 1]");
    }
    if (max_correction_iters < 1) {
        throw std::invalid_argument("max_correction_iters: must be at least 1");
    }
    if (concurrency < 1) throw std::invalid_argument("concurrency: must be at least 1");
}

// ---------------------------------------------------------------------------
// Response parsing

std::optional<std::vector<std::string>> parse_step_list(std::string_view response) {
    static const std::regex marker(R"(^\s*step\s+\d+\s*[:.)]\s?(.*)$)", std::regex::icase);
    std::vector<std::string> steps;
    bool in_step = false;
    std::string_view rest = response;
    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        std::string line(rest.substr(0, nl));
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (std::regex_match(line, m, marker)) {
            steps.push_back(m[1].str());
            in_step = true;
        } else if (in_step) {
            steps.back() += "\n" + line;
        }
    }
    std::vector<std::string> out;
    for (auto& s : steps) {
        if (!text::is_valid_utf8(s)) return std::nullopt;
        std::string trimmed(text::trim(s));
        if (!trimmed.empty()) out.push_back(std::move(trimmed));
    }
    if (out.empty()) return std::nullopt;
    return out;
}

std::optional<double> parse_score(std::string_view response) {
    double value = NAN;
    const json j = json::parse(response, nullptr, false);
    if (j.is_object() && j.contains("score") && j.at("score").is_number()) {
        value = j.at("score").get<double>();
    } else if (j.is_number()) {
        value = j.get<double>();
    } else {
        return std::nullopt;
    }
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) return std::nullopt;
    return value;
}

Located parse_locate(std::string_view response, std::size_t step_length) {
    Located out;
    out.span = {0, step_length};
    const json j = json::parse(response, nullptr, false);
    if (!j.is_object()) {
        out.fell_back = true;
        out.critique = std::string(text::is_valid_utf8(response) ? text::trim(response) : "");
        return out;
    }
    if (j.contains("critique") && j.at("critique").is_string()) {
        out.critique = j.at("critique").get<std::string>();
    }
    const json span = j.value("span", json(nullptr));
    if (span.is_array() && span.size() == 2 && span[0].is_number_unsigned() &&
        span[1].is_number_unsigned()) {
        const auto b = span[0].get<std::size_t>();
        const auto e = span[1].get<std::size_t>();
        if (b <= e && e <= step_length) {
            out.span = {b, e};
            return out;
        }
    }
    out.fell_back = true;
    return out;
}

// ---------------------------------------------------------------------------
// Algorithm

namespace {

ChatResult call_with_retry(ChatClient& client, const ChatRequest& request,
                           const CurationConfig& config, CurationTrace& trace) {
    ChatResult result;
    for (std::size_t attempt = 0; attempt <= config.retries; ++attempt) {
        if (attempt > 0 && config.retry_backoff_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(config.retry_backoff_ms * attempt));
        }
        ++trace.client_calls;
        result = client.complete(request);
        const auto* err = std::get_if<ClientError>(&result);
        if (!err || err->kind != ClientError::Kind::transport) return result;
    }
    return result;
}

ChatRequest make_request(RequestKind kind, const RawSample& sample, std::size_t step,
                         std::string subject, std::vector<ChatMessage> messages) {
    return ChatRequest{kind, sample.id, step, sample.image_ref, std::move(subject), std::move(messages)};
}

std::variant<double, ClientError> score_step(ChatClient& evaluator, const RawSample& sample,
                                             const std::vector<std::string>& chain,
                                             std::size_t step, const CurationConfig& config,
                                             CurationTrace& trace) {
    auto request = make_request(RequestKind::score_step, sample, step, chain[step - 1],
                                scoring_prompt(sample.question, sample.answer, chain, step));
    auto reply = call_with_retry(evaluator, request, config, trace);
    if (auto* err = std::get_if<ClientError>(&reply)) return std::move(*err);
    const auto& body = std::get<std::string>(reply);
    if (auto score = parse_score(body)) return *score;
    return ClientError{ClientError::Kind::protocol,
                       "evaluator reply for step " + std::to_string(step) +
                           " is not a score in [0, 1]",
                       body};
}

RejectedSample reject(const RawSample& sample, RejectReason reason, std::string message,
                      std::string payload, CurationTrace trace) {
    return RejectedSample{sample, reason, std::move(message), std::move(payload), std::move(trace)};
}

RejectedSample reject(const RawSample& sample, const ClientError& err, CurationTrace trace) {
    return reject(sample,
                  err.kind == ClientError::Kind::transport ? RejectReason::transport
                                                            : RejectReason::protocol,
                  err.message, err.payload, std::move(trace));
}

}  // namespace

StepsOrError generate_initial_cot(ChatClient& generator, const RawSample& sample,
                                  const CurationConfig& config, CurationTrace& trace) {
    auto request = make_request(RequestKind::generate_cot, sample, 0, {},
                                generation_prompt(sample.image_ref, sample.question, sample.answer));
    auto reply = call_with_retry(generator, request, config, trace);
    if (auto* err = std::get_if<ClientError>(&reply)) return std::move(*err);
    const auto& body = std::get<std::string>(reply);
    if (text::trim(text::is_valid_utf8(body) ? std::string_view(body) : std::string_view{}).empty()) {
        return ClientError{ClientError::Kind::protocol, "generator returned an empty response", body};
    }
    auto parsed = parse_step_list(body);
    if (!parsed) {
        return ClientError{ClientError::Kind::protocol,
                           "generator response has no \"Step k:\" lines", body};
    }
    std::vector<CoTStep> steps;
    for (std::size_t i = 0; i < parsed->size(); ++i) {
        steps.push_back(CoTStep{i + 1, std::move((*parsed)[i]), std::nullopt});
    }
    return steps;
}

RefineResult refine_step(CoTStep step, const RawSample& sample, std::vector<std::string>& chain,
                         Clients clients, const CurationConfig& config, CurationTrace& trace) {
    double score = step.score.value_or(0.0);
    std::size_t cycles = 0;
    while (score < config.threshold) {
        if (cycles == config.max_correction_iters) return Rejected{cycles, std::nullopt};
        ++cycles;

        auto locate_req = make_request(RequestKind::locate_error, sample, step.index, step.content,
                                       locate_prompt(sample.question, sample.answer, chain, step.index));
        auto located_reply = call_with_retry(clients.evaluator, locate_req, config, trace);
        if (auto* err = std::get_if<ClientError>(&located_reply)) return Rejected{cycles, *err};
        Located located = parse_locate(std::get<std::string>(located_reply), text::length(step.content));
        if (located.fell_back) {
            trace.notes.push_back("step " + std::to_string(step.index) + " cycle " +
                                  std::to_string(cycles) + ": unusable span, correcting whole step");
        }

        auto correct_req = make_request(
            RequestKind::correct_step, sample, step.index, step.content,
            correction_prompt(sample.question, sample.answer, step.content, located.span.begin,
                              located.span.end, located.critique));
        auto fix_reply = call_with_retry(clients.generator, correct_req, config, trace);
        if (auto* err = std::get_if<ClientError>(&fix_reply)) return Rejected{cycles, *err};
        const auto& fix_body = std::get<std::string>(fix_reply);
        if (!text::is_valid_utf8(fix_body) || text::trim(fix_body).empty()) {
            return Rejected{cycles, ClientError{ClientError::Kind::protocol,
                                                "empty or ill-formed correction", fix_body}};
        }
        const std::string replacement(text::trim(fix_body));

        CorrectionCycle record;
        record.step = step.index;
        record.cycle = cycles;
        record.score_before = score;
        record.span = located.span;
        record.critique = located.critique;
        record.replacement = replacement;
        step.content = splice(step.content, located.span, replacement);
        record.content_after = step.content;
        chain[step.index - 1] = step.content;

        auto rescored = score_step(clients.evaluator, sample, chain, step.index, config, trace);
        if (auto* err = std::get_if<ClientError>(&rescored)) {
            record.score_after = 0.0;
            trace.cycles.push_back(std::move(record));
            return Rejected{cycles, *err};
        }
        score = std::get<double>(rescored);
        record.score_after = score;
        trace.cycles.push_back(std::move(record));
    }
    step.score = score;
    return step;
}

SampleOutcome curate_sample(const RawSample& sample, Clients clients, const CurationConfig& config) {
    CurationTrace trace;
    auto generated = generate_initial_cot(clients.generator, sample, config, trace);
    if (auto* err = std::get_if<ClientError>(&generated)) return reject(sample, *err, std::move(trace));
    auto steps = std::move(std::get<std::vector<CoTStep>>(generated));

    std::vector<std::string> chain;
    for (const auto& s : steps) chain.push_back(s.content);
    trace.initial_steps = chain;

    for (auto& step : steps) {
        auto scored = score_step(clients.evaluator, sample, chain, step.index, config, trace);
        if (auto* err = std::get_if<ClientError>(&scored)) return reject(sample, *err, std::move(trace));
        step.score = std::get<double>(scored);
        trace.initial_scores.push_back(*step.score);
        if (*step.score >= config.threshold) continue;

        auto refined = refine_step(step, sample, chain, clients, config, trace);
        if (auto* rejected = std::get_if<Rejected>(&refined)) {
            if (rejected->error) return reject(sample, *rejected->error, std::move(trace));
            return reject(sample, RejectReason::incorrigible,
                          "step " + std::to_string(step.index) + " still below threshold after " +
                              std::to_string(rejected->cycles) + " correction cycles",
                          {}, std::move(trace));
        }
        step = std::get<CoTStep>(std::move(refined));
    }

    ReferenceRecord record;
    record.sample = sample;
    record.cot.steps = std::move(steps);
    record.reference_counts = extract_reference_counts(record.cot);
    record.trace = std::move(trace);
    return record;
}

// ---------------------------------------------------------------------------
// Runner

json CurationStats::to_json() const {
    auto histogram = [](const std::map<std::size_t, std::size_t>& h) {
        json j = json::object();
        for (const auto& [k, v] : h) j[std::to_string(k)] = v;
        return j;
    };
    return json{{"accepted", accepted},
                {"rejected", rejected},
                {"skipped", skipped},
                {"rejected_by_reason", rejected_by_reason},
                {"cycles_per_sample", histogram(cycles_per_sample)},
                {"cycles_per_step", histogram(cycles_per_step)}};
}

namespace {

// Ids already written; truncates a torn trailing line.
std::set<std::string> completed_ids(const std::filesystem::path& path) {
    std::set<std::string> ids;
    if (!std::filesystem::exists(path)) return ids;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CurationIoError("cannot read " + path.string());
    std::string line;
    std::uintmax_t good_bytes = 0;
    bool torn = false;
    while (std::getline(in, line)) {
        const bool terminated = !in.eof();
        const json j = json::parse(line, nullptr, false);
        if (!terminated || j.is_discarded() || !j.is_object() || !j.contains("id") ||
            !j.at("id").is_string()) {
            torn = true;
            break;
        }
        ids.insert(j.at("id").get<std::string>());
        good_bytes += line.size() + 1;
    }
    in.close();
    if (torn) {
        std::error_code ec;
        std::filesystem::resize_file(path, good_bytes, ec);
        if (ec) throw CurationIoError("cannot truncate torn line in " + path.string());
    }
    return ids;
}

std::vector<RawSample> read_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CurationIoError("cannot read input " + path.string());
    std::vector<RawSample> samples;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(text::is_valid_utf8(line) ? std::string_view(line) : "x").empty()) continue;
        try {
            RawSample s = raw_sample_from_json(json::parse(line));
            if (!seen.insert(s.id).second) throw RecordError("duplicate id '" + s.id + "'");
            samples.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw RecordError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return samples;
}

void write_line(std::ofstream& out, const json& j, const std::filesystem::path& path) {
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw CurationIoError("write to " + path.string() + " failed");
}

}  // namespace

CurationStats run_curation(const RunOptions& options, Clients clients, const CurationConfig& config) {
    config.validate();
    const auto rejected_path = options.rejected_output.empty()
                                   ? std::filesystem::path(options.output.string() + ".rejected.jsonl")
                                   : options.rejected_output;

    const std::vector<RawSample> samples = read_samples(options.input);

    std::set<std::string> done;
    if (options.resume) {
        done = completed_ids(options.output);
        done.merge(completed_ids(rejected_path));
    }

    std::ofstream accepted_out(options.output, options.resume ? std::ios::app : std::ios::trunc);
    std::ofstream rejected_out(rejected_path, options.resume ? std::ios::app : std::ios::trunc);
    if (!accepted_out) throw CurationIoError("cannot open output " + options.output.string());
    if (!rejected_out) throw CurationIoError("cannot open output " + rejected_path.string());

    CurationStats stats;
    std::vector<const RawSample*> pending;
    for (const auto& s : samples) {
        if (done.count(s.id)) {
            ++stats.skipped;
        } else {
            pending.push_back(&s);
        }
    }
    if (options.max_new_samples && pending.size() > *options.max_new_samples) {
        pending.resize(*options.max_new_samples);
    }

    // Workers fill slots; this thread drains them in input order.
    std::vector<std::optional<SampleOutcome>> slots(pending.size());
    std::mutex mutex;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};

    auto worker = [&] {
        while (!abort) {
            const std::size_t i = next++;
            if (i >= pending.size()) return;
            SampleOutcome outcome = [&]() -> SampleOutcome {
                try {
                    return curate_sample(*pending[i], clients, config);
                } catch (const std::exception& e) {
                    return RejectedSample{*pending[i], RejectReason::internal, e.what(), {}, {}};
                }
            }();
            {
                std::lock_guard lock(mutex);
                slots[i] = std::move(outcome);
            }
            ready.notify_all();
        }
    };

    const std::size_t n_workers = std::min(config.concurrency, std::max<std::size_t>(pending.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);

    try {
        for (std::size_t i = 0; i < pending.size(); ++i) {
            SampleOutcome outcome;
            {
                std::unique_lock lock(mutex);
                ready.wait(lock, [&] { return slots[i].has_value(); });
                outcome = std::move(*slots[i]);
                slots[i].reset();
            }
            if (auto* record = std::get_if<ReferenceRecord>(&outcome)) {
                write_line(accepted_out, to_json(*record), options.output);
                ++stats.accepted;
                ++stats.cycles_per_sample[record->trace.cycles.size()];
                for (const auto& step : record->cot.steps) {
                    ++stats.cycles_per_step[record->trace.cycles_for_step(step.index)];
                }
            } else {
                const auto& rejected = std::get<RejectedSample>(outcome);
                write_line(rejected_out, to_json(rejected), rejected_path);
                ++stats.rejected;
                ++stats.rejected_by_reason[std::string(to_string(rejected.reason))];
                ++stats.cycles_per_sample[rejected.trace.cycles.size()];
            }
        }
    } catch (...) {
        abort = true;
        for (auto& t : pool) t.join();
        throw;
    }
    for (auto& t : pool) t.join();
    return stats;
}

}  // namespace aspectrl::curation
