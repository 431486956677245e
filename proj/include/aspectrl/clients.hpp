#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace aspectrl::curation {

enum class RequestKind { generate_cot, score_step, locate_error, correct_step };

std::string_view to_string(RequestKind kind) noexcept;

struct ChatMessage {
    std::string role;
    std::string content;
};

// A chat-completion call plus the routing metadata the pipeline knows about
// it. HTTP clients send only the messages; the scripted client uses the rest.
struct ChatRequest {
    RequestKind kind = RequestKind::generate_cot;
    std::string sample_id;
    std::size_t step_index = 0;  // 1-based, 0 for whole-sample requests
    std::string image_ref;
    std::string subject;  // the step text under evaluation or correction
    std::vector<ChatMessage> messages;
};

struct ClientError {
    enum class Kind { transport, protocol };
    Kind kind = Kind::transport;
    std::string message;
    std::string payload;
};

using ChatResult = std::variant<std::string, ClientError>;

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Must be safe to call concurrently.
    virtual ChatResult complete(const ChatRequest& request) = 0;
};

struct EndpointConfig {
    std::string type = "http";  // "http" or "mock"
    std::string base_url;       // e.g. http://localhost:8000/v1
    std::string model;
    std::string token_env = "ASPECTRL_API_TOKEN";
    double timeout_seconds = 60.0;
    std::filesystem::path script;  // mock only
};

// OpenAI-style POST {base_url}/chat/completions.
class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(EndpointConfig config);
    ChatResult complete(const ChatRequest& request) override;

private:
    EndpointConfig config_;
    std::string origin_;       // scheme://host[:port]
    std::string path_prefix_;  // path part of base_url, no trailing slash
};

// Deterministic stand-in driven by a JSON script. Responses depend only on
// (sample id, step, per-step call count), never on scheduling order.
//
//   {"default": {...}, "samples": {"<id>": {...}}}
//
// Per-sample keys (sample entries override "default" key by key):
//   steps            list of step texts for the initial CoT
//   response         raw generator response, overrides "steps"
//   scores           score sequence used for every step
//   step_scores      {"<step>": [score, ...]}; the last value repeats
//   locate           {"span": [b, e] | null, "critique": "..."}
//   corrections      {"<step>": [replacement, ...]}
//   unreachable      true -> every call fails with a transport error
//   transport_failures  number of leading calls that fail with transport errors
class ScriptedClient final : public ChatClient {
public:
    explicit ScriptedClient(nlohmann::json script);
    static std::unique_ptr<ScriptedClient> from_file(const std::filesystem::path& path);

    ChatResult complete(const ChatRequest& request) override;

    std::size_t calls_for(const std::string& sample_id) const;
    std::size_t total_calls() const;

private:
    nlohmann::json setting(const std::string& sample_id, const char* key) const;

    nlohmann::json script_;
    mutable std::mutex mutex_;
    std::map<std::string, std::size_t> calls_;
    std::map<std::tuple<std::string, std::size_t, int>, std::size_t> per_step_;
};

// Throws std::invalid_argument for unknown types or unreadable scripts.
std::unique_ptr<ChatClient> make_client(const EndpointConfig& config);

// Prompt templates for each request kind.
std::vector<ChatMessage> generation_prompt(const std::string& image_ref, const std::string& question,
                                           const std::string& answer);
std::vector<ChatMessage> scoring_prompt(const std::string& question, const std::string& answer,
                                        const std::vector<std::string>& steps, std::size_t step);
std::vector<ChatMessage> locate_prompt(const std::string& question, const std::string& answer,
                                       const std::vector<std::string>& steps, std::size_t step);
std::vector<ChatMessage> correction_prompt(const std::string& question, const std::string& answer,
                                           const std::string& step_text, std::size_t span_begin,
                                           std::size_t span_end, const std::string& critique);

}  // namespace aspectrl::curation
