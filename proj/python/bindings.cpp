#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "symmlp/experiments.hpp"
#include "symmlp/imputation.hpp"
#include "symmlp/mlp.hpp"
#include "symmlp/objective.hpp"
#include "symmlp/pipeline.hpp"
#include "symmlp/recoding.hpp"
#include "symmlp/symbolic_model.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace symmlp;

namespace {

// Structured values cross the boundary as JSON documents, so the Python side sees
// the same schemas as the command-line tool.
json from_py(const py::handle& obj) {
    if (py::isinstance<py::str>(obj)) return json::parse(obj.cast<std::string>());
    auto dumps = py::module_::import("json").attr("dumps");
    return json::parse(dumps(obj).cast<std::string>());
}

py::object to_py(const json& j) {
    auto loads = py::module_::import("json").attr("loads");
    return loads(j.dump());
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    return Matrix::from_rows(rows);
}

py::dict loss_dict(const LossValue& l) {
    py::dict d;
    d["value"] = l.value;
    d["gradient"] = l.gradient;
    return d;
}

MonthlyVector to_months(const std::vector<double>& v) {
    if (v.size() != 12) throw std::invalid_argument("expected 12 monthly values");
    MonthlyVector m{};
    std::copy(v.begin(), v.end(), m.begin());
    return m;
}

py::dict station_dict(const Station& s) {
    py::dict d;
    d["lon"] = s.longitude;
    d["lat"] = s.latitude;
    d["t"] = std::vector<double>(s.temperature.begin(), s.temperature.end());
    d["p"] = std::vector<double>(s.precipitation.begin(), s.precipitation.end());
    return d;
}

Station station_from(const py::dict& d) {
    Station s;
    s.longitude = d["lon"].cast<double>();
    s.latitude = d["lat"].cast<double>();
    s.temperature = to_months(d["t"].cast<std::vector<double>>());
    s.precipitation = to_months(d["p"].cast<std::vector<double>>());
    return s;
}

std::vector<Station> stations_from(const py::object& obj) {
    std::vector<Station> out;
    for (auto item : obj) out.push_back(station_from(item.cast<py::dict>()));
    return out;
}

}  // namespace

PYBIND11_MODULE(_symmlp, m) {
    m.doc() = "Multilayer perceptrons on symbolic data";
    m.attr("__version__") = SYMMLP_VERSION;

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<EncodingError>(m, "EncodingError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ImputationError>(m, "ImputationError", PyExc_ValueError);
    py::register_exception<SelectionError>(m, "SelectionError", PyExc_ValueError);
    // Missing or mistyped keys in a document are caller errors too.
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const json::exception& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def(
        "parse_table", [](const py::object& doc) { return to_py(serialize_table(parse_table(from_py(doc)))); },
        py::arg("document"), "Validate a symbolic table document and return its normalized form.");

    m.def(
        "recode",
        [](const py::object& doc, const py::object& coding) {
            const auto table = parse_table(from_py(doc));
            const auto modes = coding.is_none() ? CodingModes{} : parse_coding_modes(from_py(coding));
            auto enc = encode_table(table, modes);
            if (enc.values.rows() >= 2) enc = fit_standardizer(enc);
            py::list groups;
            for (const auto& g : enc.groups) {
                py::dict d;
                d["source_variable"] = g.source_variable;
                d["begin"] = g.begin;
                d["end"] = g.end;
                d["coding"] = std::string(to_string(g.coding));
                d["decay_divisor"] = g.decay_divisor;
                d["mean"] = g.mean;
                d["scale"] = g.scale;
                groups.append(d);
            }
            py::dict out;
            out["values"] = enc.values.to_rows();
            out["groups"] = groups;
            return out;
        },
        py::arg("document"), py::arg("coding") = py::none(),
        "Encode the input variables of a table. Returns {'values': rows, 'groups': [...]}.");

    m.def(
        "count_weights", [](std::size_t n, std::size_t q, std::size_t p) { return count_weights(n, q, p); },
        py::arg("inputs"), py::arg("hidden"), py::arg("outputs"));
    m.def(
        "count_weights_architecture",
        [](const py::object& arch) { return count_weights(architecture_from_json(from_py(arch))); },
        py::arg("architecture"));

    m.def(
        "forward",
        [](const py::object& arch_doc, const std::vector<double>& weights, const std::vector<double>& x) {
            const auto arch = architecture_from_json(from_py(arch_doc));
            const WeightVector w(arch, weights);
            auto trace = forward(arch, w, x);
            return std::vector<double>(trace.output().begin(), trace.output().end());
        },
        py::arg("architecture"), py::arg("weights"), py::arg("x"), "Network output for one input vector.");
    m.def(
        "initial_weights",
        [](const py::object& arch_doc, std::uint64_t seed) {
            const auto arch = architecture_from_json(from_py(arch_doc));
            auto rng = make_rng(seed);
            return initialize_weights(arch, rng).values();
        },
        py::arg("architecture"), py::arg("seed") = 0);

    m.def(
        "quadratic_loss", [](const std::vector<double>& y, const std::vector<double>& t) {
            return loss_dict(quadratic_loss(y, t));
        },
        py::arg("y"), py::arg("t"));
    m.def(
        "cross_entropy_loss", [](const std::vector<double>& y, const std::vector<double>& t) {
            return loss_dict(cross_entropy_loss(y, t));
        },
        py::arg("y"), py::arg("t"));
    m.def(
        "independent_cross_entropy_loss", [](const std::vector<double>& y, const std::vector<double>& t) {
            return loss_dict(independent_cross_entropy_loss(y, t));
        },
        py::arg("y"), py::arg("t"));
    m.def(
        "weighted_multinomial_loss", [](const std::vector<double>& p, const std::vector<double>& t, double l) {
            return loss_dict(weighted_multinomial_loss(p, t, l));
        },
        py::arg("p"), py::arg("t"), py::arg("l"));

    m.def("missing_months", [](const std::string& level) {
        return missing_months(degradation_level_from_string(level));
    });
    m.def("surviving_months", [](const std::string& level) {
        return surviving_months(degradation_level_from_string(level));
    });
    m.def(
        "interpolate_periodic",
        [](const std::vector<double>& months, const std::string& level) {
            const auto out = interpolate_periodic(to_months(months), degradation_level_from_string(level));
            return std::vector<double>(out.begin(), out.end());
        },
        py::arg("months"), py::arg("level"), "Fill NaN months left by a degradation level.");

    m.def(
        "impute_mean", [](const std::vector<std::vector<double>>& rows) { return impute_mean(to_matrix(rows)).to_rows(); },
        py::arg("rows"));
    m.def(
        "impute_knn",
        [](const std::vector<std::vector<double>>& rows, std::size_t k) {
            std::vector<std::string> warnings;
            auto out = impute_knn(to_matrix(rows), k, &warnings);
            return py::make_tuple(out.to_rows(), warnings);
        },
        py::arg("rows"), py::arg("k") = 3, "Returns (rows, warnings).");

    m.def(
        "generate_stations",
        [](std::size_t n, std::uint64_t seed, double noise) {
            py::list out;
            for (const auto& s : generate_synthetic_stations(n, seed, noise)) out.append(station_dict(s));
            return out;
        },
        py::arg("n") = 260, py::arg("seed") = 7, py::arg("noise") = 1.0);
    m.def(
        "stations_to_csv", [](const py::object& stations) { return stations_to_csv(stations_from(stations)); },
        py::arg("stations"));
    m.def(
        "apply_coding",
        [](const py::dict& station, const std::string& method) {
            return apply_coding(station_from(station), coding_method_from_string(method));
        },
        py::arg("station"), py::arg("method"));

    m.def(
        "fit_pipeline",
        [](const py::object& doc, const py::object& config) {
            const auto table = parse_table(from_py(doc));
            const auto cfg = PipelineConfig::from_json(config.is_none() ? json::object() : from_py(config));
            PipelineFit fit;
            {
                py::gil_scoped_release release;
                fit = fit_pipeline(table, cfg);
            }
            py::dict out;
            out["model"] = to_py(fit.model.to_json());
            out["fit_report"] = to_py(fit.fit.to_json());
            out["test_error"] = fit.test_error ? py::cast(*fit.test_error) : py::none();
            return out;
        },
        py::arg("document"), py::arg("config") = py::none());
    m.def(
        "evaluate",
        [](const py::object& model, const py::object& doc) {
            return to_py(SymbolicModel::from_json(from_py(model)).evaluate(parse_table(from_py(doc))));
        },
        py::arg("model"), py::arg("document"));

    m.def(
        "run_experiment",
        [](const py::object& config, const py::object& stations, const py::object& outlier) {
            const auto cfg = ExperimentConfig::from_json(config.is_none() ? json::object() : from_py(config));
            const auto data = stations.is_none()
                                  ? generate_synthetic_stations(cfg.stations, cfg.seed, cfg.noise_level)
                                  : stations_from(stations);
            ExperimentReport report;
            DegradationReport study;
            {
                py::gil_scoped_release release;
                report = run_experiment(data, cfg);
                std::vector<LocationModel> models;
                for (const auto& r : report.results) models.push_back(r.model);
                study = run_degradation_study(
                    models, report.split.test,
                    {DegradationLevel::None, DegradationLevel::Half, DegradationLevel::TwoThirds,
                     DegradationLevel::ThreeQuarters},
                    outlier.is_none() ? std::nullopt : std::optional<double>(outlier.cast<double>()));
            }
            py::dict out;
            out["report"] = to_py(report.to_json());
            out["table"] = report.to_table();
            out["predictions_csv"] = report.predictions_csv();
            out["robustness"] = to_py(study.to_json());
            return out;
        },
        py::arg("config") = py::none(), py::arg("stations") = py::none(), py::arg("outlier") = py::none(),
        "Location experiment plus the degradation study on its test stations.");
}
