#include "aspectrl/commands.hpp"

#include "aspectrl/records.hpp"
#include "aspectrl/text.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <memory>

namespace aspectrl::cli {

using nlohmann::json;

namespace {

std::string dump(const json& j) {
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

// Either a file or the fallback stream.
class Sink {
public:
    Sink(const std::filesystem::path& path, std::ostream& fallback) : stream_(&fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
            if (!*file_) throw std::runtime_error("cannot write " + path.string());
            stream_ = file_.get();
        }
    }
    void line(const json& j) { *stream_ << dump(j) << '\n'; }
    void close() {
        stream_->flush();
        if (!*stream_) throw std::runtime_error("write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return in;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

json score_line(const std::string& id, const reward::RewardReport& report) {
    return {{"id", id},
            {"r_lang", report.r_lang},
            {"r_count", report.r_count},
            {"r_answer", report.r_answer},
            {"r_format", report.r_format},
            {"total", report.total},
            {"diagnostics", report.diagnostics}};
}

json advantage_line(const json& group, double epsilon) {
    json result = json::object();
    try {
        const json* rewards = &group;
        if (group.is_object()) {
            if (group.contains("id")) result["id"] = group.at("id");
            if (!group.contains("rewards")) throw std::runtime_error("group needs a 'rewards' array");
            rewards = &group.at("rewards");
        }
        if (!rewards->is_array()) throw std::runtime_error("rewards must be an array");
        std::vector<double> values;
        for (const auto& r : *rewards) {
            if (!r.is_number()) throw std::runtime_error("rewards must be numbers");
            values.push_back(r.get<double>());
        }
        result["advantages"] = grpo::group_advantages(values, epsilon);
    } catch (const std::exception& e) {
        result["error"] = e.what();
    }
    return result;
}

// ---------------------------------------------------------------------------
// score

int cmd_score(const ScoreOptions& options, std::ostream& out, std::ostream& err) {
    std::map<std::string, reward::ScoringReference> references;
    {
        auto in = open_input(options.references);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (blank(line)) continue;
            try {
                auto record = curation::scoring_record_from_json(json::parse(line));
                if (!references.emplace(record.id, std::move(record.reference)).second) {
                    throw std::runtime_error("duplicate reference id '" + record.id + "'");
                }
            } catch (const std::exception& e) {
                throw std::runtime_error(options.references.string() + ":" + std::to_string(line_no) + ": " +
                                         e.what());
            }
        }
    }

    Sink sink(options.output, out);
    json rejects = json::array();
    double sums[5] = {0, 0, 0, 0, 0};
    std::size_t scored = 0;

    auto in = open_input(options.predictions);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        json entry{{"line", line_no}};
        try {
            const json j = json::parse(line);
            if (!j.is_object() || !j.contains("id") || !j.at("id").is_string()) {
                throw std::runtime_error("prediction needs a string 'id'");
            }
            const auto id = j.at("id").get<std::string>();
            entry["id"] = id;
            if (!j.contains("output") || !j.at("output").is_string()) {
                throw std::runtime_error("prediction needs a string 'output'");
            }
            const auto ref = references.find(id);
            if (ref == references.end()) throw std::runtime_error("no reference with id '" + id + "'");

            const auto report = reward::score_record(j.at("output").get<std::string>(), ref->second,
                                                     options.weights, options.tags, options.scoring);
            sink.line(score_line(id, report));
            sums[0] += report.r_lang;
            sums[1] += report.r_count;
            sums[2] += report.r_answer;
            sums[3] += report.r_format;
            sums[4] += report.total;
            ++scored;
        } catch (const std::exception& e) {
            entry["error"] = e.what();
            rejects.push_back(std::move(entry));
        }
    }
    sink.close();

    json means = nullptr;
    if (scored > 0) {
        const double n = static_cast<double>(scored);
        means = {{"r_lang", sums[0] / n}, {"r_count", sums[1] / n}, {"r_answer", sums[2] / n},
                 {"r_format", sums[3] / n}, {"total", sums[4] / n}};
    }
    const json summary{{"scored", scored},
                       {"rejected", rejects.size()},
                       {"means", means},
                       {"weights",
                        {{"language", options.weights.language},
                         {"count", options.weights.count},
                         {"answer", options.weights.answer},
                         {"format", options.weights.format}}},
                       {"rejects", rejects}};
    Sink summary_sink(options.summary, err);
    summary_sink.line(summary);
    summary_sink.close();
    return rejects.empty() ? kOk : kPartial;
}

// ---------------------------------------------------------------------------
// advantage

int cmd_advantage(const AdvantageOptions& options, std::ostream& out, std::ostream& err) {
    auto in = open_input(options.input);
    Sink sink(options.output, out);
    std::size_t rejected = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        json result;
        try {
            result = advantage_line(json::parse(line), options.epsilon);
        } catch (const json::exception& e) {
            result = {{"error", e.what()}};
        }
        if (result.contains("error")) ++rejected;
        result["line"] = line_no;
        sink.line(result);
    }
    sink.close();
    if (rejected > 0) err << rejected << " group(s) rejected\n";
    return rejected == 0 ? kOk : kPartial;
}

// ---------------------------------------------------------------------------
// curate

int cmd_curate(const CurateOptions& options, std::ostream& out, std::ostream& err) {
    const auto& c = options.curation;
    if (c.input.empty()) throw config::ConfigError("curation.input: required");
    if (c.output.empty()) throw config::ConfigError("curation.output: required");

    auto generator = curation::make_client(c.generator);
    auto evaluator = curation::make_client(c.evaluator);

    curation::RunOptions run;
    run.input = c.input;
    run.output = c.output;
    run.rejected_output = c.rejected_output;
    run.resume = options.resume;
    run.max_new_samples = options.limit;
    const auto stats = curation::run_curation(run, {*generator, *evaluator}, c.run);
    out << dump(stats.to_json()) << '\n';
    if (stats.rejected > 0) err << stats.rejected << " sample(s) rejected\n";
    return stats.rejected == 0 ? kOk : kPartial;
}

// ---------------------------------------------------------------------------
// train-toy

int cmd_train_toy(const TrainToyOptions& options, std::ostream& out, std::ostream& /*err*/) {
    std::vector<toy::GridEntry> runs;
    if (options.grid) {
        runs = toy::weight_grid();
    } else {
        runs.push_back({"metrics", options.training.weights});
    }
    std::filesystem::create_directories(options.out_dir);

    json summary = json::array();
    for (const auto& entry : runs) {
        toy::TrainingConfig cfg = options.training;
        cfg.weights = entry.weights;
        const auto result = toy::run_training(cfg);
        const auto stem = options.out_dir / entry.name;
        if (options.format != MetricsFormat::jsonl) {
            toy::write_metrics_csv(stem.string() + ".csv", result.rows, cfg.smoothing_window);
        }
        if (options.format != MetricsFormat::csv) {
            toy::write_metrics_jsonl(stem.string() + ".jsonl", result.rows, cfg.smoothing_window);
        }
        const auto total = toy::smooth(toy::series(result.rows, toy::Series::total), cfg.smoothing_window);
        const auto eval = toy::smooth(toy::series(result.rows, toy::Series::eval_total), cfg.smoothing_window);
        const std::size_t first = std::min(total.size(), cfg.smoothing_window) - 1;
        summary.push_back({{"name", entry.name},
                           {"weights", {entry.weights.language, entry.weights.count, entry.weights.answer,
                                        entry.weights.format}},
                           {"steps", cfg.steps},
                           {"initial_smoothed_total", total[first]},
                           {"final_smoothed_total", total.back()},
                           {"final_smoothed_eval_total", eval.back()}});
    }
    for (const auto& s : summary) out << dump(s) << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// argv

namespace {

struct Overrides {
    std::string weights;
    std::string tags;
    std::string count_mode;
    bool containment = false;
};

config::AppConfig load_or_default(const std::string& path) {
    return path.empty() ? config::parse_config(json::object(), ".") : config::load_config(path);
}

void apply(const Overrides& o, config::AppConfig& cfg) {
    if (!o.weights.empty()) cfg.weights = config::parse_weights(o.weights);
    if (!o.tags.empty()) cfg.tags = config::parse_tag_names(o.tags);
    if (!o.count_mode.empty()) cfg.scoring.count_mode = config::parse_count_mode(o.count_mode);
    if (o.containment) cfg.scoring.format_mode = cot::FormatMode::containment;
    cfg.toy.weights = cfg.weights;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-aspect reward scoring, group advantages, verified data curation and toy GRPO training"};
    app.name("aspectrl");
    app.require_subcommand(1);
    app.set_version_flag("--version", "aspectrl 0.1.0");

    std::string config_path;
    Overrides overrides;

    ScoreOptions score;
    std::string score_output, score_summary, predictions, references;
    auto* score_cmd = app.add_subcommand("score", "Score predictions against references");
    score_cmd->add_option("--predictions", predictions, "JSONL of {id, output}")->required();
    score_cmd->add_option("--references", references, "JSONL of {id, language, answer, reference_counts}")
        ->required();
    score_cmd->add_option("--config", config_path, "Config file");
    score_cmd->add_option("--weights", overrides.weights, "language,count,answer,format");
    score_cmd->add_option("--tags", overrides.tags, "Required tag names, e.g. think,answer");
    score_cmd->add_option("--count-mode", overrides.count_mode, "literal or absolute_sum");
    score_cmd->add_flag("--containment", overrides.containment, "Format check only requires tags to occur");
    score_cmd->add_option("--output", score_output, "Report JSONL (default stdout)");
    score_cmd->add_option("--summary", score_summary, "Summary JSON (default stderr)");

    std::string adv_input, adv_output;
    std::optional<double> adv_epsilon;
    auto* adv_cmd = app.add_subcommand("advantage", "Group-relative advantages for reward groups");
    adv_cmd->add_option("--input", adv_input, "JSONL of {id, rewards}")->required();
    adv_cmd->add_option("--output", adv_output, "Output JSONL (default stdout)");
    adv_cmd->add_option("--epsilon", adv_epsilon, "Denominator epsilon (default from config)");
    adv_cmd->add_option("--config", config_path, "Config file");

    bool resume = false;
    std::optional<std::size_t> limit;
    auto* curate_cmd = app.add_subcommand("curate", "Generate verified reasoning data");
    curate_cmd->add_option("--config", config_path, "Config file with a curation section")->required();
    curate_cmd->add_flag("--resume", resume, "Skip samples already in the output files");
    curate_cmd->add_option("--limit", limit, "Stop after this many new samples");

    TrainToyOptions train;
    std::string format = "csv", out_dir = ".";
    std::optional<std::size_t> steps;
    std::optional<std::uint64_t> seed;
    auto* train_cmd = app.add_subcommand("train-toy", "Train the toy policy and write metrics");
    train_cmd->add_option("--config", config_path, "Config file")->required();
    train_cmd->add_flag("--grid", train.grid, "Sweep the five reward-weight configurations");
    train_cmd->add_option("--out-dir", out_dir, "Directory for metrics files");
    train_cmd->add_option("--format", format, "csv, jsonl or both")
        ->check(CLI::IsMember({"csv", "jsonl", "both"}));
    train_cmd->add_option("--weights", overrides.weights, "language,count,answer,format");
    train_cmd->add_option("--steps", steps, "Training steps");
    train_cmd->add_option("--seed", seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        config::AppConfig cfg = load_or_default(config_path);
        apply(overrides, cfg);

        if (*score_cmd) {
            score.predictions = predictions;
            score.references = references;
            score.output = score_output;
            score.summary = score_summary;
            score.weights = cfg.weights;
            score.tags = cfg.tags;
            score.scoring = cfg.scoring;
            return cmd_score(score, out, err);
        }
        if (*adv_cmd) {
            AdvantageOptions adv;
            adv.input = adv_input;
            adv.output = adv_output;
            adv.epsilon = adv_epsilon.value_or(cfg.grpo.advantage_epsilon);
            return cmd_advantage(adv, out, err);
        }
        if (*curate_cmd) {
            return cmd_curate({cfg.curation, resume, limit}, out, err);
        }
        if (*train_cmd) {
            train.training = cfg.toy;
            if (steps) train.training.steps = *steps;
            if (seed) train.training.seed = *seed;
            train.training.validate();
            train.out_dir = out_dir;
            train.format = format == "csv"     ? MetricsFormat::csv
                           : format == "jsonl" ? MetricsFormat::jsonl
                                               : MetricsFormat::both;
            return cmd_train_toy(train, out, err);
        }
    } catch (const config::ConfigError& e) {
        err << "aspectrl: config error: " << e.what() << '\n';
        return kFatal;
    } catch (const std::exception& e) {
        err << "aspectrl: " << e.what() << '\n';
        return kFatal;
    }
    return kUsage;
}

}  // namespace aspectrl::cli
