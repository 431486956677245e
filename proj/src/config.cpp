#include "aspectrl/config.hpp"

#include "aspectrl/language.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace aspectrl::config {

using nlohmann::json;

namespace {

// A JSON object plus its dotted path, with typed accessors that report the
// full path on error and reject keys nobody asked about.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(where(key) + ": " + what);
    }

    const json& raw(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void number(const char* key, double& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_number()) fail(key, "must be a number");
        out = v.get<double>();
        if (!std::isfinite(out)) fail(key, "must be finite");
    }

    template <class Int>
    void integer(const char* key, Int& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_number_unsigned()) fail(key, "must be a non-negative integer");
        out = v.get<Int>();
    }

    void string(const char* key, std::string& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_string()) fail(key, "must be a string");
        out = v.get<std::string>();
    }

    void path(const char* key, std::filesystem::path& out, const std::filesystem::path& base) {
        if (!has(key)) return;
        std::string s;
        string(key, s);
        if (s.empty()) fail(key, "must not be empty");
        std::filesystem::path p(s);
        out = p.is_absolute() ? p : base / p;
    }

    Section child(const char* key) {
        return Section(raw(key), where(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) fail(key, "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// Validators that already lead with the field name get joined with '.'.
template <class F>
void guarded(const std::string& path, F&& f, const char* separator = ": ") {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path + separator + e.what());
    }
}

curation::EndpointConfig parse_endpoint(Section s, const std::filesystem::path& base) {
    curation::EndpointConfig e;
    s.string("type", e.type);
    s.string("base_url", e.base_url);
    s.string("model", e.model);
    s.string("token_env", e.token_env);
    s.number("timeout_s", e.timeout_seconds);
    s.path("script", e.script, base);
    s.finish();
    if (e.type == "http") {
        if (e.base_url.empty()) s.fail("base_url", "required for http endpoints");
        if (!(e.timeout_seconds > 0.0)) s.fail("timeout_s", "must be positive");
    } else if (e.type == "mock") {
        if (e.script.empty()) s.fail("script", "required for mock endpoints");
    } else {
        s.fail("type", "must be \"http\" or \"mock\"");
    }
    return e;
}

cot::TagSet parse_tags(const json& j) {
    if (!j.is_array()) throw ConfigError("tags: must be an array");
    std::vector<cot::TagPair> pairs;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "tags[" + std::to_string(i) + "]";
        if (j[i].is_string()) {
            const auto name = j[i].get<std::string>();
            if (name.empty()) throw ConfigError(where + ": empty tag name");
            pairs.push_back({"<" + name + ">", "</" + name + ">"});
        } else if (j[i].is_object()) {
            Section s(j[i], where);
            cot::TagPair p;
            s.string("open", p.open);
            s.string("close", p.close);
            s.finish();
            pairs.push_back(std::move(p));
        } else {
            throw ConfigError(where + ": must be a tag name or {\"open\", \"close\"}");
        }
    }
    cot::TagSet out;
    guarded("tags", [&] { out = cot::TagSet(std::move(pairs)); });
    return out;
}

}  // namespace

AppConfig parse_config(const json& document, const std::filesystem::path& base_dir) {
    AppConfig cfg;
    Section root(document, "");

    if (root.has("weights")) {
        Section s = root.child("weights");
        s.number("language", cfg.weights.language);
        s.number("count", cfg.weights.count);
        s.number("answer", cfg.weights.answer);
        s.number("format", cfg.weights.format);
        s.finish();
        guarded("weights", [&] { cfg.weights.validate(); }, ".");
    }

    if (root.has("tags")) cfg.tags = parse_tags(root.raw("tags"));

    if (root.has("scoring")) {
        Section s = root.child("scoring");
        std::string count_mode(to_string(cfg.scoring.count_mode));
        std::string format_mode(to_string(cfg.scoring.format_mode));
        s.string("count_mode", count_mode);
        s.string("format_mode", format_mode);
        s.finish();
        guarded("scoring.count_mode", [&] { cfg.scoring.count_mode = parse_count_mode(count_mode); });
        guarded("scoring.format_mode", [&] { cfg.scoring.format_mode = parse_format_mode(format_mode); });
    }

    if (root.has("grpo")) {
        Section s = root.child("grpo");
        s.number("clip_epsilon", cfg.grpo.clip_epsilon);
        s.number("kl_coefficient", cfg.grpo.kl_coefficient);
        s.number("advantage_epsilon", cfg.grpo.advantage_epsilon);
        s.integer("group_size", cfg.grpo.group_size);
        s.finish();
        guarded("grpo", [&] { cfg.grpo.validate(); }, ".");
    }

    if (root.has("curation")) {
        Section s = root.child("curation");
        auto& c = cfg.curation;
        s.path("input", c.input, base_dir);
        s.path("output", c.output, base_dir);
        s.path("rejected_output", c.rejected_output, base_dir);
        s.number("threshold", c.run.threshold);
        s.integer("max_correction_iters", c.run.max_correction_iters);
        s.integer("concurrency", c.run.concurrency);
        s.integer("retries", c.run.retries);
        s.integer("retry_backoff_ms", c.run.retry_backoff_ms);
        if (s.has("generator")) c.generator = parse_endpoint(s.child("generator"), base_dir);
        if (s.has("evaluator")) c.evaluator = parse_endpoint(s.child("evaluator"), base_dir);
        s.finish();
        guarded("curation", [&] { c.run.validate(); }, ".");
    }

    if (root.has("toy")) {
        Section s = root.child("toy");
        auto& t = cfg.toy;
        s.integer("steps", t.steps);
        s.integer("seed", t.seed);
        s.number("learning_rate", t.learning_rate);
        s.number("temperature", t.temperature);
        s.number("init_scale", t.init_scale);
        s.integer("smoothing_window", t.smoothing_window);
        if (s.has("language")) {
            std::string code;
            s.string("language", code);
            const auto lang = language_from_code(code);
            if (!lang) s.fail("language", "unknown language code '" + code + "'");
            t.task.language = *lang;
        }
        s.integer("text_segments", t.task.counts.text_segments);
        s.integer("objects", t.task.counts.objects);
        s.string("answer", t.task.answer);
        s.integer("max_segments", t.task.max_segments);
        s.integer("max_objects", t.task.max_objects);
        s.finish();
    }
    root.finish();

    cfg.toy.weights = cfg.weights;
    cfg.toy.grpo = cfg.grpo;
    // Toy messages already name their field.
    guarded("", [&] {
        cfg.toy.validate();
        (void)toy::ToyTask::structured(cfg.toy.task);
    }, "");
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    json document;
    try {
        document = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    return parse_config(document, base);
}

reward::CountMode parse_count_mode(const std::string& text) {
    if (text == "literal") return reward::CountMode::literal;
    if (text == "absolute_sum") return reward::CountMode::absolute_sum;
    throw std::invalid_argument("unknown count mode '" + text + "' (literal|absolute_sum)");
}

cot::FormatMode parse_format_mode(const std::string& text) {
    if (text == "strict") return cot::FormatMode::strict;
    if (text == "containment") return cot::FormatMode::containment;
    throw std::invalid_argument("unknown format mode '" + text + "' (strict|containment)");
}

reward::RewardWeights parse_weights(const std::string& text) {
    std::vector<double> values;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw std::invalid_argument("weights: '" + item + "' is not a number");
        values.push_back(v);
    }
    if (values.size() != 4) {
        throw std::invalid_argument("weights: expected 4 comma-separated values (language,count,answer,format)");
    }
    reward::RewardWeights w{values[0], values[1], values[2], values[3]};
    try {
        w.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("weights.") + e.what());
    }
    return w;
}

cot::TagSet parse_tag_names(const std::string& text) {
    std::vector<std::string> names;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) names.push_back(item);
    return cot::TagSet::from_names(names);
}

std::string_view to_string(reward::CountMode mode) noexcept {
    return mode == reward::CountMode::literal ? "literal" : "absolute_sum";
}

std::string_view to_string(cot::FormatMode mode) noexcept {
    return mode == cot::FormatMode::strict ? "strict" : "containment";
}

}  // namespace aspectrl::config
