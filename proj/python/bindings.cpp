// Python module aspectrl._core. Inputs and outputs are plain Python objects;
// the batch functions return the same objects the CLI writes as JSONL.

#include "aspectrl/commands.hpp"
#include "aspectrl/config.hpp"
#include "aspectrl/cot_document.hpp"
#include "aspectrl/grpo.hpp"
#include "aspectrl/records.hpp"
#include "aspectrl/reward.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>

namespace py = pybind11;
using namespace aspectrl;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return py::none();
        case json::value_t::boolean: return py::bool_(j.get<bool>());
        case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
        case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
        case json::value_t::number_float: return py::float_(j.get<double>());
        case json::value_t::string: return py::str(j.get_ref<const std::string&>());
        case json::value_t::array: {
            py::list out;
            for (const auto& v : j) out.append(to_py(v));
            return std::move(out);
        }
        case json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
            return std::move(out);
        }
        default: throw py::type_error("unsupported JSON value");
    }
}

json from_py(py::handle h) {
    if (h.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
    if (py::isinstance<py::int_>(h)) {
        const auto v = h.cast<py::int_>();
        if (py::int_(0) <= v) return h.cast<std::uint64_t>();
        return h.cast<std::int64_t>();
    }
    if (py::isinstance<py::float_>(h)) return h.cast<double>();
    if (py::isinstance<py::str>(h)) return h.cast<std::string>();
    if (py::isinstance<py::dict>(h)) {
        json out = json::object();
        for (const auto& [k, v] : h.cast<py::dict>()) out[py::str(k).cast<std::string>()] = from_py(v);
        return out;
    }
    if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
        json out = json::array();
        for (const auto& v : h) out.push_back(from_py(v));
        return out;
    }
    throw py::type_error("cannot convert " + std::string(py::str(h.get_type())) + " to JSON");
}

reward::RewardWeights weights_from(const std::optional<std::vector<double>>& w) {
    if (!w) return {};
    if (w->size() != 4) throw py::value_error("weights: expected 4 values (language, count, answer, format)");
    reward::RewardWeights out{(*w)[0], (*w)[1], (*w)[2], (*w)[3]};
    out.validate();
    return out;
}

cot::TagSet tags_from(const std::optional<std::vector<std::string>>& names) {
    return names ? cot::TagSet::from_names(*names) : cot::TagSet{};
}

reward::ScoringOptions scoring_from(const std::string& count_mode, const std::string& format_mode) {
    return {config::parse_count_mode(count_mode), config::parse_format_mode(format_mode)};
}

json document_json(const cot::CoTDocument& d) {
    json segments = json::array();
    for (const auto& s : d.segments) {
        segments.push_back({{"box", {s.box.x_min, s.box.y_min, s.box.x_max, s.box.y_max}}, {"summary", s.summary}});
    }
    return {{"segments", segments},
            {"language", d.language ? json(std::string(to_string(*d.language))) : json(nullptr)},
            {"object_count", d.object_count ? json(*d.object_count) : json(nullptr)},
            {"caption", d.caption},
            {"reasoning", d.reasoning},
            {"answer", d.final_answer},
            {"notes", d.notes}};
}

cot::CoTDocument document_from(const json& j) {
    cot::CoTDocument d;
    for (const auto& s : j.value("segments", json::array())) {
        const auto& b = s.at("box");
        d.segments.push_back({{b.at(0).get<std::int64_t>(), b.at(1).get<std::int64_t>(),
                               b.at(2).get<std::int64_t>(), b.at(3).get<std::int64_t>()},
                              s.at("summary").get<std::string>()});
    }
    if (j.contains("language") && !j.at("language").is_null()) {
        const auto code = language_from_code(j.at("language").get<std::string>());
        if (!code) throw py::value_error("language: unknown code");
        d.language = *code;
    }
    if (j.contains("object_count") && !j.at("object_count").is_null()) {
        d.object_count = j.at("object_count").get<std::uint64_t>();
    }
    d.caption = j.value("caption", "");
    d.reasoning = j.value("reasoning", "");
    d.final_answer = j.value("answer", "");
    return d;
}

struct Scorer {
    reward::RewardWeights weights;
    cot::TagSet tags;
    reward::ScoringOptions options;

    // Same object as a `score` output line; the id is omitted when the
    // reference has none.
    json score(const std::string& text, json reference) const {
        const bool has_id = reference.contains("id");
        if (!has_id) reference["id"] = "";
        const auto record = curation::scoring_record_from_json(reference);
        json line = cli::score_line(record.id, reward::score_record(text, record.reference, weights, tags, options));
        if (!has_id) line.erase("id");
        return line;
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-aspect reward scoring and GRPO utilities.";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const grpo::GrpoError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const curation::RecordError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const json::exception& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def(
        "parse_document",
        [](const std::string& text) {
            auto r = cot::parse_document(text);
            if (const auto* f = std::get_if<cot::ParseFailure>(&r)) {
                throw py::value_error(std::string(to_string(f->stage)) + ": " + f->message);
            }
            return to_py(document_json(std::get<cot::CoTDocument>(r)));
        },
        py::arg("text"), "Parse a reasoning document into a dict; raises ValueError on fatal errors.");

    m.def(
        "serialize_document",
        [](const py::dict& doc) {
            const auto d = document_from(from_py(doc));
            const auto problems = cot::validate_document(d);
            if (!problems.empty()) throw py::value_error(problems.front());
            return cot::serialize_document(d);
        },
        py::arg("document"), "Canonical text for a document dict as returned by parse_document.");

    py::class_<Scorer>(m, "Scorer",
                       "Immutable scoring handle: weights, required tags and scoring modes fixed at construction.")
        .def(py::init([](std::optional<std::vector<double>> weights, std::optional<std::vector<std::string>> tags,
                         const std::string& count_mode, const std::string& format_mode) {
                 return Scorer{weights_from(weights), tags_from(tags), scoring_from(count_mode, format_mode)};
             }),
             py::arg("weights") = py::none(), py::arg("tags") = py::none(), py::arg("count_mode") = "literal",
             py::arg("format_mode") = "strict")
        .def_property_readonly("weights",
                               [](const Scorer& s) {
                                   return std::vector<double>{s.weights.language, s.weights.count, s.weights.answer,
                                                              s.weights.format};
                               })
        .def_property_readonly("tags",
                               [](const Scorer& s) {
                                   std::vector<std::pair<std::string, std::string>> out;
                                   for (const auto& t : s.tags.pairs()) out.emplace_back(t.open, t.close);
                                   return out;
                               })
        .def(
            "score",
            [](const Scorer& s, const std::string& text, const py::dict& reference) {
                return to_py(s.score(text, from_py(reference)));
            },
            py::arg("text"), py::arg("reference"),
            "Score one raw output against {id?, language, answer, reference_counts}. Raises on a bad reference.")
        .def(
            "score_batch",
            [](const Scorer& s, const py::sequence& items) {
                std::vector<std::pair<std::string, json>> inputs;
                std::vector<std::optional<std::string>> bad(py::len(items));
                for (std::size_t i = 0; i < bad.size(); ++i) {
                    try {
                        const auto pair = items[i].cast<py::tuple>();
                        if (pair.size() != 2) throw std::invalid_argument("expected (text, reference)");
                        inputs.emplace_back(pair[0].cast<std::string>(), from_py(pair[1]));
                    } catch (const std::exception& e) {
                        bad[i] = e.what();
                        inputs.emplace_back();
                    }
                }
                std::vector<json> results(inputs.size());
                {
                    py::gil_scoped_release release;
                    for (std::size_t i = 0; i < inputs.size(); ++i) {
                        if (bad[i]) {
                            results[i] = {{"index", i}, {"error", *bad[i]}};
                            continue;
                        }
                        try {
                            results[i] = s.score(inputs[i].first, inputs[i].second);
                        } catch (const std::exception& e) {
                            results[i] = {{"index", i}, {"error", e.what()}};
                        }
                    }
                }
                py::list out;
                for (const auto& r : results) out.append(to_py(r));
                return out;
            },
            py::arg("items"),
            "items: [(text, reference)]. One report per item, or {index, error} for a malformed item. "
            "Reports match `aspectrl score` lines.");

    m.def(
        "group_advantages",
        [](const std::vector<double>& rewards, double epsilon) { return grpo::group_advantages(rewards, epsilon); },
        py::arg("rewards"), py::arg("epsilon") = 1e-8, "(r - mean) / (std + epsilon); all zeros for a constant group.");

    m.def(
        "group_advantages_batch",
        [](const py::list& groups, double epsilon) {
            py::list out;
            std::size_t index = 0;
            for (const auto& g : groups) {
                json line = cli::advantage_line(from_py(g), epsilon);
                line["line"] = ++index;
                out.append(to_py(line));
            }
            return out;
        },
        py::arg("groups"), py::arg("epsilon") = 1e-8,
        "One result per group ({id, rewards} or a list); entries match `aspectrl advantage`.");

    m.def(
        "grpo_objective",
        [](const std::vector<std::tuple<double, double, double, double>>& samples, double clip_epsilon,
           double kl_coefficient, double advantage_epsilon) {
            grpo::GrpoConfig cfg{clip_epsilon, kl_coefficient, advantage_epsilon, samples.size()};
            grpo::PolicyGroup group;
            for (const auto& [r, lp_new, lp_old, lp_ref] : samples) group.outputs.push_back({r, lp_new, lp_old, lp_ref});
            const auto adv = grpo::group_advantages(group.rewards(), advantage_epsilon);
            py::dict out;
            out["advantages"] = adv;
            out["clipped"] = grpo::clipped_surrogate(group, adv, clip_epsilon);
            out["unclipped"] = grpo::unclipped_surrogate(group, adv);
            out["kl"] = grpo::kl_penalty(group);
            out["objective"] = grpo::grpo_objective(group, cfg);
            return out;
        },
        py::arg("samples"), py::arg("clip_epsilon") = 0.2, py::arg("kl_coefficient") = 0.04,
        py::arg("advantage_epsilon") = 1e-8,
        "samples: [(reward, logp_new, logp_old, logp_ref)]. Returns the objective and its parts.");
}
