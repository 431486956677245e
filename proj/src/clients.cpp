#include "aspectrl/clients.hpp"

#include "aspectrl/text.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace aspectrl::curation {

using nlohmann::json;

std::string_view to_string(RequestKind kind) noexcept {
    switch (kind) {
        case RequestKind::generate_cot: return "generate_cot";
        case RequestKind::score_step: return "score_step";
        case RequestKind::locate_error: return "locate_error";
        case RequestKind::correct_step: return "correct_step";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// HTTP

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.base_url, m, url_re)) {
        throw std::invalid_argument("base_url '" + config_.base_url + "' is not an http(s) URL");
    }
    origin_ = m[1].str();
    path_prefix_ = m[2].matched ? m[2].str() : std::string{};
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin_.rfind("https://", 0) == 0) {
        throw std::invalid_argument("https endpoints need a build with OpenSSL support");
    }
#endif
}

ChatResult HttpChatClient::complete(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"model", config_.model}, {"messages", std::move(messages)}, {"temperature", 0}};

    httplib::Client client(origin_);
    const auto seconds = static_cast<time_t>(config_.timeout_seconds);
    const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    httplib::Headers headers;
    if (!config_.token_env.empty()) {
        if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    const auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                                 "application/json");
    if (!res) {
        return ClientError{ClientError::Kind::transport, "HTTP request failed: " + httplib::to_string(res.error()), {}};
    }
    if (res->status == 429 || res->status >= 500) {
        return ClientError{ClientError::Kind::transport, "HTTP status " + std::to_string(res->status), res->body};
    }
    if (res->status != 200) {
        return ClientError{ClientError::Kind::protocol, "HTTP status " + std::to_string(res->status), res->body};
    }
    try {
        const json reply = json::parse(res->body);
        const json& content = reply.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw std::runtime_error("content is not a string");
        return content.get<std::string>();
    } catch (const std::exception& e) {
        return ClientError{ClientError::Kind::protocol,
                           std::string("malformed chat-completion reply: ") + e.what(), res->body};
    }
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedClient::ScriptedClient(json script) : script_(std::move(script)) {
    if (!script_.is_object()) throw std::invalid_argument("mock script must be a JSON object");
}

std::unique_ptr<ScriptedClient> ScriptedClient::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open mock script " + path.string());
    try {
        return std::make_unique<ScriptedClient>(json::parse(in));
    } catch (const json::exception& e) {
        throw std::invalid_argument("mock script " + path.string() + ": " + e.what());
    }
}

json ScriptedClient::setting(const std::string& sample_id, const char* key) const {
    if (const auto samples = script_.find("samples"); samples != script_.end()) {
        if (const auto s = samples->find(sample_id); s != samples->end() && s->contains(key)) {
            return s->at(key);
        }
    }
    if (const auto d = script_.find("default"); d != script_.end() && d->contains(key)) {
        return d->at(key);
    }
    return nullptr;
}

namespace {

// k-th element of a list, repeating the last one; scalars repeat as-is.
json nth(const json& seq, std::size_t k) {
    if (!seq.is_array()) return seq;
    if (seq.empty()) return nullptr;
    return seq[std::min(k, seq.size() - 1)];
}

json per_step(const json& table, std::size_t step) {
    if (!table.is_object()) return nullptr;
    const auto it = table.find(std::to_string(step));
    return it == table.end() ? json(nullptr) : *it;
}

}  // namespace

ChatResult ScriptedClient::complete(const ChatRequest& request) {
    std::size_t call_index = 0;
    std::size_t step_call = 0;
    {
        std::lock_guard lock(mutex_);
        call_index = calls_[request.sample_id]++;
        step_call = per_step_[{request.sample_id, request.step_index, static_cast<int>(request.kind)}]++;
    }

    if (setting(request.sample_id, "unreachable") == json(true)) {
        return ClientError{ClientError::Kind::transport, "endpoint unreachable (scripted)", {}};
    }
    const json failures = setting(request.sample_id, "transport_failures");
    if (failures.is_number_unsigned() && call_index < failures.get<std::size_t>()) {
        return ClientError{ClientError::Kind::transport, "transient transport failure (scripted)", {}};
    }

    switch (request.kind) {
        case RequestKind::generate_cot: {
            if (const json raw = setting(request.sample_id, "response"); raw.is_string()) {
                return raw.get<std::string>();
            }
            json steps = setting(request.sample_id, "steps");
            if (steps.is_null()) {
                steps = json::array({"Read the question and note what is asked.",
                                     "Collect the visual evidence relevant to it.",
                                     "State the answer supported by the evidence."});
            }
            std::string out;
            std::size_t k = 1;
            for (const auto& s : steps) {
                out += "Step " + std::to_string(k++) + ": " + s.get<std::string>() + "\n";
            }
            return out;
        }
        case RequestKind::score_step: {
            json seq = per_step(setting(request.sample_id, "step_scores"), request.step_index);
            if (seq.is_null()) seq = setting(request.sample_id, "scores");
            const json score = seq.is_null() ? json(1.0) : nth(seq, step_call);
            if (score.is_string()) return score.get<std::string>();  // raw reply, for protocol tests
            return json{{"score", score}}.dump();
        }
        case RequestKind::locate_error: {
            const json locate = setting(request.sample_id, "locate");
            json span = locate.is_object() && locate.contains("span") ? locate.at("span") : json(nullptr);
            if (span.is_null()) span = json::array({0, text::length(request.subject)});
            const std::string critique = locate.is_object() && locate.contains("critique")
                                             ? locate.at("critique").get<std::string>()
                                             : std::string("this step needs revision");
            return json{{"span", span}, {"critique", critique}}.dump();
        }
        case RequestKind::correct_step: {
            const json seq = per_step(setting(request.sample_id, "corrections"), request.step_index);
            const json fix = nth(seq, step_call);
            if (fix.is_string()) return fix.get<std::string>();
            return "revised step " + std::to_string(request.step_index) + " (attempt " +
                   std::to_string(step_call + 1) + ")";
        }
    }
    return ClientError{ClientError::Kind::protocol, "unknown request kind", {}};
}

std::size_t ScriptedClient::calls_for(const std::string& sample_id) const {
    std::lock_guard lock(mutex_);
    const auto it = calls_.find(sample_id);
    return it == calls_.end() ? 0 : it->second;
}

std::size_t ScriptedClient::total_calls() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& [id, c] : calls_) n += c;
    return n;
}

std::unique_ptr<ChatClient> make_client(const EndpointConfig& config) {
    if (config.type == "http") return std::make_unique<HttpChatClient>(config);
    if (config.type == "mock") return ScriptedClient::from_file(config.script);
    throw std::invalid_argument("unknown client type '" + config.type + "'");
}

// ---------------------------------------------------------------------------
// Prompts

namespace {

std::string numbered(const std::vector<std::string>& steps) {
    std::ostringstream out;
    for (std::size_t i = 0; i < steps.size(); ++i) out << "Step " << i + 1 << ": " << steps[i] << "\n";
    return out.str();
}

}  // namespace

std::vector<ChatMessage> generation_prompt(const std::string& image_ref, const std::string& question,
                                           const std::string& answer) {
    const std::string system =
        "You annotate visual question answering data with structured reasoning. "
        "Work through four stages in order:\n"
        "(a) list the text regions you can read, one per line, as "
        "[x_min,y_min,x_max,y_max] followed by a short summary of the text;\n"
        "(b) name the primary language of that text with \\lang{code} using a two-letter code;\n"
        "(c) describe the main objects and where they are, and give their total with \\obj{N};\n"
        "(d) reason step by step from the evidence to the given answer.\n"
        "Write each step on its own line starting with \"Step k:\". "
        "Do not contradict the reference answer.";
    std::string user = "Image: " + image_ref + "\nQuestion: " + question + "\nReference answer: " +
                       answer + "\nProduce the reasoning steps.";
    return {{"system", system}, {"user", std::move(user)}};
}

std::vector<ChatMessage> scoring_prompt(const std::string& question, const std::string& answer,
                                        const std::vector<std::string>& steps, std::size_t step) {
    const std::string system =
        "You review one step of a reasoning chain for a visual question. Judge whether the step "
        "is factually consistent with the question, the reference answer and the earlier steps, "
        "and whether it follows the required stage format. Reply with JSON only: "
        "{\"score\": <number between 0 and 1>}.";
    std::string user = "Question: " + question + "\nReference answer: " + answer +
                       "\nReasoning chain:\n" + numbered(steps) + "Score step " +
                       std::to_string(step) + ".";
    return {{"system", system}, {"user", std::move(user)}};
}

std::vector<ChatMessage> locate_prompt(const std::string& question, const std::string& answer,
                                       const std::vector<std::string>& steps, std::size_t step) {
    const std::string system =
        "A step in this reasoning chain was judged incorrect. Find the erroneous part of the step. "
        "Reply with JSON only: {\"span\": [begin, end], \"critique\": \"...\"} where begin and end "
        "are character offsets into the step text (end exclusive).";
    std::string user = "Question: " + question + "\nReference answer: " + answer +
                       "\nReasoning chain:\n" + numbered(steps) + "Locate the error in step " +
                       std::to_string(step) + ".";
    return {{"system", system}, {"user", std::move(user)}};
}

std::vector<ChatMessage> correction_prompt(const std::string& question, const std::string& answer,
                                           const std::string& step_text, std::size_t span_begin,
                                           std::size_t span_end, const std::string& critique) {
    const std::string system =
        "Rewrite the marked part of a reasoning step so that it is correct. Keep the stage markup "
        "(bounding boxes, \\lang{}, \\obj{}) intact. Reply with the replacement text for the "
        "marked part only.";
    std::string user = "Question: " + question + "\nReference answer: " + answer + "\nStep: " +
                       step_text + "\nMarked characters: [" + std::to_string(span_begin) + ", " +
                       std::to_string(span_end) + ")\nCritique: " + critique;
    return {{"system", system}, {"user", std::move(user)}};
}

}  // namespace aspectrl::curation
