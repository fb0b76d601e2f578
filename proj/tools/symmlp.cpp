// symmlp: command-line front end for recoding, training and the climate experiments.
//
// Every artifact-producing command writes a manifest next to its outputs with the
// argv, the effective configuration (defaults, then --config file, then flags),
// its hash, and the hashes of every input and output file.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "symmlp/experiments.hpp"
#include "symmlp/imputation.hpp"
#include "symmlp/pipeline.hpp"
#include "symmlp/recoding.hpp"
#include "symmlp/symbolic_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace symmlp;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

json read_json(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::string fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string number(double v) {
    if (is_missing(v)) return "";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Collects what went into and came out of one command run.
class Manifest {
public:
    Manifest(std::string command, int argc, char** argv) : command_(std::move(command)) {
        for (int i = 0; i < argc; ++i) argv_.push_back(argv[i]);
        start_ = std::chrono::steady_clock::now();
    }

    void input(const std::string& path) { inputs_.push_back(file_entry(path)); }
    void output(const std::string& path) { outputs_.push_back(file_entry(path)); }
    void config(json c) { config_ = std::move(c); }
    void note(const std::string& key, json value) { extra_[key] = std::move(value); }

    void write(const std::string& path) {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json j{{"command", command_},
               {"argv", argv_},
               {"config", config_},
               {"config_hash", "fnv1a64:" + fnv1a(config_.dump())},
               {"inputs", inputs_},
               {"outputs", outputs_},
               {"versions",
                {{"symmlp", SYMMLP_VERSION},
                 {"compiler", __VERSION__},
                 {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                       std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                 {"cli11", CLI11_VERSION}}},
               {"wall_time_seconds", elapsed}};
        for (auto it = extra_.begin(); it != extra_.end(); ++it) j[it.key()] = it.value();
        write_file(path, j.dump(2) + "\n");
    }

private:
    static json file_entry(const std::string& path) {
        const auto bytes = read_file(path);
        return json{{"path", path}, {"bytes", bytes.size()}, {"fnv1a64", fnv1a(bytes)}};
    }

    std::string command_;
    std::vector<std::string> argv_;
    json config_ = json::object();
    json inputs_ = json::array();
    json outputs_ = json::array();
    json extra_ = json::object();
    std::chrono::steady_clock::time_point start_;
};

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

// ---- CSV matrices (impute) ----

struct CsvMatrix {
    std::vector<std::string> header;
    Matrix values;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

CsvMatrix read_csv_matrix(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    CsvMatrix out;
    if (!std::getline(in, line)) throw std::runtime_error("CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.header = split_csv_line(line);
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != out.header.size())
            throw std::runtime_error("line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(out.header.size()) + " fields, got " +
                                     std::to_string(cells.size()));
        std::vector<double> row;
        for (const auto& c : cells) {
            if (c.empty() || c == "NA") {
                row.push_back(missing_value);
                continue;
            }
            double v = 0.0;
            auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc() || res.ptr != c.data() + c.size())
                throw std::runtime_error("line " + std::to_string(lineno) + ": '" + c + "' is not a number");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    out.values = rows.empty() ? Matrix(0, out.header.size()) : Matrix::from_rows(rows);
    return out;
}

std::string write_csv_matrix(const std::vector<std::string>& header, const Matrix& m) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
    out += "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out += (c ? "," : "") + number(m(r, c));
        out += "\n";
    }
    return out;
}

std::vector<std::string> encoded_column_names(const SymbolicTable& table, const EncodedMatrix& enc) {
    std::vector<std::string> names;
    for (const auto& g : enc.groups) {
        const auto& spec = table.specs[*table.variable_index(g.source_variable)];
        switch (g.coding) {
            case CodingTag::Identity:
            case CodingTag::Rank: names.push_back(g.source_variable); break;
            case CodingTag::MeanLength:
                names.push_back(g.source_variable + ".mid");
                names.push_back(g.source_variable + ".length");
                break;
            case CodingTag::MeanLogLength:
                names.push_back(g.source_variable + ".mid");
                names.push_back(g.source_variable + ".log_length");
                break;
            case CodingTag::Bounds:
                names.push_back(g.source_variable + ".a");
                names.push_back(g.source_variable + ".b");
                break;
            default:
                for (std::size_t j = 0; j < g.width(); ++j)
                    names.push_back(g.source_variable + "." +
                                    (j < spec.categories.size() ? spec.categories[j] : std::to_string(j)));
        }
    }
    return names;
}

json groups_to_json(const EncodedMatrix& enc) {
    json out = json::array();
    for (const auto& g : enc.groups)
        out.push_back({{"source_variable", g.source_variable},
                       {"begin", g.begin},
                       {"end", g.end},
                       {"coding", to_string(g.coding)},
                       {"decay_divisor", g.decay_divisor},
                       {"mean", g.mean},
                       {"scale", g.scale}});
    return out;
}

// ---- configuration layering ----

/// Applies a config file over `base` (objects merge key by key).
json layered(json base, const std::string& config_path) {
    if (!config_path.empty()) base.merge_patch(read_json(config_path));
    return base;
}

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string manifest;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON config file (flags override it)");
    cmd->add_option("--seed", c.seed, "Master seed");
    cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--manifest", c.manifest, "Manifest path (default: next to the outputs)");
}

bool given(CLI::App* cmd, const std::string& name) { return cmd->count(name) > 0; }

// ---- commands ----

int cmd_recode(CLI::App* cmd, const Common& common, const std::string& input, const std::string& out,
               const std::string& groups_out, bool standardize, int argc, char** argv) {
    Manifest manifest("recode", argc, argv);
    const auto table = parse_table(std::string_view(read_file(input)));
    manifest.input(input);
    json cfg = layered(json{{"coding", json::object()}, {"standardize", false}}, common.config);
    if (given(cmd, "--standardize")) cfg["standardize"] = standardize;
    const auto modes = parse_coding_modes(cfg["coding"]);

    auto enc = encode_table(table, modes);
    if (enc.values.rows() >= 2) enc = fit_standardizer(enc);
    Matrix values = enc.values;
    if (cfg["standardize"].get<bool>()) {
        if (enc.values.rows() < 2) throw std::runtime_error("standardizing needs at least two rows");
        values = standardizer_of(enc).transform(values);
    }
    write_file(out, write_csv_matrix(encoded_column_names(table, enc), values));
    write_file(groups_out, json{{"columns", enc.values.cols()}, {"groups", groups_to_json(enc)}}.dump(2) + "\n");
    manifest.output(out);
    manifest.output(groups_out);
    manifest.config(cfg);
    manifest.write(common.manifest.empty() ? out + ".manifest.json" : common.manifest);
    std::cout << "encoded " << enc.values.rows() << " rows into " << enc.values.cols() << " columns ("
              << enc.groups.size() << " groups)\n";
    return 0;
}

PipelineConfig pipeline_config(CLI::App* cmd, const Common& common, std::size_t restarts, const std::string& optimizer,
                               json& effective) {
    json cfg = layered(PipelineConfig{}.to_json(), common.config);
    if (given(cmd, "--seed")) cfg["train"]["seed"] = common.seed;
    if (given(cmd, "--restarts")) cfg["train"]["restarts"] = restarts;
    if (given(cmd, "--optimizer")) cfg["train"]["optimizer"] = optimizer;
    auto config = PipelineConfig::from_json(cfg);
    config.train.jobs = common.jobs;
    effective = config.to_json();
    return config;
}

int cmd_train(CLI::App* cmd, const Common& common, const std::string& data, const std::string& out_dir,
              std::size_t restarts, const std::string& optimizer, int argc, char** argv) {
    Manifest manifest("train", argc, argv);
    json effective;
    const auto config = pipeline_config(cmd, common, restarts, optimizer, effective);
    const auto table = parse_table(std::string_view(read_file(data)));
    manifest.input(data);
    if (!common.config.empty()) manifest.input(common.config);

    const auto fit = fit_pipeline(table, config);
    json report = fit.fit.to_json();
    report["split"] = {{"train", fit.split.train.size()},
                       {"validation", fit.split.validation.size()},
                       {"test", fit.split.test.size()}};
    if (fit.test_error) report["test_error"] = *fit.test_error;
    const fs::path dir(out_dir);
    write_file(join(dir, "model.json"), fit.model.to_json().dump(2) + "\n");
    write_file(join(dir, "fit_report.json"), report.dump(2) + "\n");
    manifest.output(join(dir, "model.json"));
    manifest.output(join(dir, "fit_report.json"));
    manifest.config(effective);
    manifest.note("jobs", common.jobs);
    manifest.note("train_wall_time_seconds", fit.fit.wall_time_seconds);
    manifest.write(common.manifest.empty() ? join(dir, "manifest.json") : common.manifest);
    std::cout << "best validation error " << number(fit.fit.best_validation_error) << " (restart "
              << fit.fit.best_restart << ")";
    if (fit.test_error) std::cout << ", test error " << number(*fit.test_error);
    std::cout << "\n";
    return 0;
}

int cmd_evaluate(const Common& common, const std::string& model_path, const std::string& data,
                 const std::string& out, int argc, char** argv) {
    Manifest manifest("evaluate", argc, argv);
    const auto model = SymbolicModel::from_json(read_json(model_path));
    const auto table = parse_table(std::string_view(read_file(data)));
    manifest.input(model_path);
    manifest.input(data);
    std::vector<std::string> notes;
    model.predict(table, &notes);
    json metrics = model.evaluate(table);
    metrics["decoder_notes"] = notes.size();
    const auto text = metrics.dump(2) + "\n";
    if (out.empty() || out == "-") {
        std::cout << text;
        if (!common.manifest.empty()) manifest.write(common.manifest);
        return 0;
    }
    write_file(out, text);
    manifest.output(out);
    manifest.write(common.manifest.empty() ? out + ".manifest.json" : common.manifest);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_select(CLI::App* cmd, const Common& common, const std::string& data, const std::string& out_dir,
               std::size_t restarts, const std::string& optimizer, const std::vector<std::size_t>& sizes,
               std::size_t folds, int argc, char** argv) {
    Manifest manifest("select", argc, argv);
    json effective;
    auto config = pipeline_config(cmd, common, restarts, optimizer, effective);
    if (given(cmd, "--sizes")) config.plan.hidden_sizes = sizes;
    if (given(cmd, "--folds")) config.plan.cv_folds = folds;
    config.plan.validate();
    effective = config.to_json();
    const auto table = parse_table(std::string_view(read_file(data)));
    manifest.input(data);
    if (!common.config.empty()) manifest.input(common.config);

    const auto sel = select_pipeline(table, config);
    json report{{"sweep", sel.sweep.to_json()}};
    if (sel.cv) report["cv"] = sel.cv->to_json();
    const fs::path dir(out_dir);
    write_file(join(dir, "selection.json"), report.dump(2) + "\n");
    write_file(join(dir, "model.json"), sel.model.to_json().dump(2) + "\n");
    manifest.output(join(dir, "selection.json"));
    manifest.output(join(dir, "model.json"));
    manifest.config(effective);
    manifest.note("jobs", common.jobs);
    manifest.write(common.manifest.empty() ? join(dir, "manifest.json") : common.manifest);
    for (const auto& c : sel.sweep.candidates) {
        std::cout << "hidden " << c.hidden_size << ": ";
        if (c.ok()) std::cout << "validation " << number(c.validation_error) << "\n";
        else std::cout << "failed (" << c.error << ")\n";
    }
    std::cout << "winner: " << sel.sweep.winning().hidden_size << " hidden units\n";
    if (sel.cv) std::cout << "cv mean " << number(sel.cv->mean) << " sd " << number(sel.cv->sd) << "\n";
    return 0;
}

int cmd_impute(CLI::App* cmd, const Common& common, const std::string& input, const std::string& out,
               std::string method, std::size_t k, int argc, char** argv) {
    Manifest manifest("impute", argc, argv);
    json cfg = layered(json{{"method", "knn"}, {"k", 3}}, common.config);
    if (given(cmd, "--method")) cfg["method"] = method;
    if (given(cmd, "--k")) cfg["k"] = k;
    method = cfg["method"].get<std::string>();
    k = cfg["k"].get<std::size_t>();
    const auto csv = read_csv_matrix(read_file(input));
    manifest.input(input);

    std::vector<std::string> warnings;
    Matrix filled;
    if (method == "mean") filled = impute_mean(csv.values);
    else if (method == "knn") filled = impute_knn(csv.values, k, &warnings);
    else throw std::runtime_error("unknown imputation method '" + method + "' (mean, knn)");
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    write_file(out, write_csv_matrix(csv.header, filled));
    manifest.output(out);
    manifest.config(cfg);
    manifest.note("warnings", warnings);
    manifest.write(common.manifest.empty() ? out + ".manifest.json" : common.manifest);
    std::size_t missing = 0;
    for (double v : csv.values.data()) missing += is_missing(v) ? 1 : 0;
    std::cout << "imputed " << missing << " entries with " << method << "\n";
    return 0;
}

int cmd_gen_climate(CLI::App* cmd, const Common& common, std::size_t n, double noise, const std::string& out,
                    int argc, char** argv) {
    Manifest manifest("gen-climate", argc, argv);
    json cfg = layered(json{{"stations", 260}, {"seed", 7}, {"noise_level", 1.0}}, common.config);
    if (given(cmd, "--n")) cfg["stations"] = n;
    if (given(cmd, "--seed")) cfg["seed"] = common.seed;
    if (given(cmd, "--noise")) cfg["noise_level"] = noise;
    const auto stations = generate_synthetic_stations(cfg["stations"].get<std::size_t>(),
                                                      cfg["seed"].get<std::uint64_t>(), cfg["noise_level"].get<double>());
    const auto text = stations_to_csv(stations);
    if (out.empty() || out == "-") {
        std::cout << text;
        if (!common.manifest.empty()) {
            manifest.config(cfg);
            manifest.write(common.manifest);
        }
        return 0;
    }
    write_file(out, text);
    manifest.output(out);
    manifest.config(cfg);
    manifest.write(common.manifest.empty() ? out + ".manifest.json" : common.manifest);
    std::cout << "wrote " << stations.size() << " stations to " << out << "\n";
    return 0;
}

struct ExperimentFlags {
    std::string stations;
    std::size_t n = 260;
    double noise = 1.0;
    std::string methods;
    bool full = false;
    std::size_t restarts = 0;
    std::string out_dir = "experiment";
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
    cmd->add_option("--stations", f.stations, "Station CSV (lon,lat,t1..t12,p1..p12); synthetic when omitted")
        ;
    cmd->add_option("--n", f.n, "Synthetic station count");
    cmd->add_option("--noise", f.noise, "Synthetic noise level");
    cmd->add_option("--methods", f.methods, "Comma-separated codings: full24,mean2,mean_sd4,min_max4");
    cmd->add_flag("--full", f.full, "Full protocol: 8 hidden sizes, 10 restarts");
    cmd->add_option("--restarts", f.restarts, "Restarts per hidden size");
    cmd->add_option("--out-dir", f.out_dir, "Output directory");
}

ExperimentConfig experiment_config(CLI::App* cmd, const Common& common, const ExperimentFlags& f, json& effective) {
    json cfg = common.config.empty() ? json::object() : read_json(common.config);
    if (f.full) cfg["protocol"] = "full";
    if (given(cmd, "--n")) cfg["stations"] = f.n;
    if (given(cmd, "--noise")) cfg["noise_level"] = f.noise;
    if (given(cmd, "--seed")) cfg["seed"] = common.seed;
    if (given(cmd, "--methods")) {
        cfg["methods"] = json::array();
        for (auto m : parse_methods(f.methods)) cfg["methods"].push_back(to_string(m));
    }
    if (given(cmd, "--restarts")) cfg["train"]["restarts"] = f.restarts;
    auto config = ExperimentConfig::from_json(cfg);
    config.train.jobs = common.jobs;
    effective = config.to_json();
    return config;
}

std::vector<Station> experiment_stations(const ExperimentFlags& f, const ExperimentConfig& config, Manifest& manifest) {
    if (f.stations.empty()) return generate_synthetic_stations(config.stations, config.seed, config.noise_level);
    manifest.input(f.stations);
    return stations_from_csv(read_file(f.stations));
}

int cmd_experiment(CLI::App* cmd, const Common& common, const ExperimentFlags& f, int argc, char** argv) {
    Manifest manifest("experiment", argc, argv);
    json effective;
    const auto config = experiment_config(cmd, common, f, effective);
    if (!common.config.empty()) manifest.input(common.config);
    const auto stations = experiment_stations(f, config, manifest);

    const auto report = run_experiment(stations, config);
    const fs::path dir(f.out_dir);
    write_file(join(dir, "report.json"), report.to_json().dump(2) + "\n");
    write_file(join(dir, "table.txt"), report.to_table());
    write_file(join(dir, "predictions.csv"), report.predictions_csv());
    for (auto name : {"report.json", "table.txt", "predictions.csv"}) manifest.output(join(dir, name));
    manifest.config(effective);
    manifest.note("jobs", common.jobs);
    manifest.write(common.manifest.empty() ? join(dir, "manifest.json") : common.manifest);
    std::cout << report.to_table();
    return 0;
}

int cmd_degrade_study(CLI::App* cmd, const Common& common, const ExperimentFlags& f, double outlier, int argc,
                      char** argv) {
    Manifest manifest("degrade-study", argc, argv);
    json effective;
    const auto config = experiment_config(cmd, common, f, effective);
    if (given(cmd, "--outlier")) effective["outlier"] = outlier;
    if (!common.config.empty()) manifest.input(common.config);
    const auto stations = experiment_stations(f, config, manifest);

    const auto report = run_experiment(stations, config);
    std::vector<LocationModel> models;
    for (const auto& r : report.results) models.push_back(r.model);
    const std::vector<DegradationLevel> levels{DegradationLevel::None, DegradationLevel::Half,
                                               DegradationLevel::TwoThirds, DegradationLevel::ThreeQuarters};
    const auto study = run_degradation_study(
        models, report.split.test, levels, given(cmd, "--outlier") ? std::optional<double>(outlier) : std::nullopt);

    const fs::path dir(f.out_dir);
    write_file(join(dir, "robustness.csv"), study.to_csv());
    write_file(join(dir, "robustness.json"), study.to_json().dump(2) + "\n");
    write_file(join(dir, "table.txt"), report.to_table());
    for (auto name : {"robustness.csv", "robustness.json", "table.txt"}) manifest.output(join(dir, name));
    manifest.config(effective);
    manifest.note("jobs", common.jobs);
    manifest.write(common.manifest.empty() ? join(dir, "manifest.json") : common.manifest);
    std::cout << study.to_csv();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilayer perceptrons on symbolic data: recoding, training, model selection, climate experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", SYMMLP_VERSION);
    app.failure_message(CLI::FailureMessage::help);

    Common common;

    auto* recode = app.add_subcommand("recode", "Encode a symbolic table into a numeric matrix");
    std::string recode_in, recode_out = "encoded.csv", recode_groups = "groups.json";
    bool recode_standardize = false;
    recode->add_option("input", recode_in, "Symbolic table JSON")->required();
    recode->add_option("--out", recode_out, "Encoded matrix CSV");
    recode->add_option("--groups", recode_groups, "Column group metadata JSON");
    recode->add_flag("--standardize", recode_standardize, "Write standardized columns");
    add_common(recode, common);

    auto* train_cmd = app.add_subcommand("train", "Fit a network on a symbolic table");
    std::string train_data, train_out = "model";
    std::size_t restarts = 1;
    std::string optimizer = "conjugate_gradient";
    train_cmd->add_option("data", train_data, "Symbolic table JSON")->required();
    train_cmd->add_option("--out-dir", train_out, "Directory for model.json and fit_report.json");
    train_cmd->add_option("--restarts", restarts, "Random restarts");
    train_cmd->add_option("--optimizer", optimizer, "conjugate_gradient, bfgs or gradient_descent");
    add_common(train_cmd, common);

    auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on a symbolic table");
    std::string eval_model, eval_data, eval_out;
    evaluate->add_option("model", eval_model, "model.json from train or select")->required();
    evaluate->add_option("data", eval_data, "Symbolic table JSON")->required();
    evaluate->add_option("--out", eval_out, "Metrics JSON (stdout when omitted)");
    add_common(evaluate, common);

    auto* select = app.add_subcommand("select", "Hidden-size sweep and optional k-fold cross-validation");
    std::string select_data, select_out = "selection";
    std::vector<std::size_t> sizes;
    std::size_t folds = 0;
    select->add_option("data", select_data, "Symbolic table JSON")->required();
    select->add_option("--out-dir", select_out, "Directory for selection.json and model.json");
    select->add_option("--sizes", sizes, "Hidden sizes to try")->delimiter(',');
    select->add_option("--folds", folds, "k for cross-validation of the winner")->check(CLI::Range(2, 1000));
    select->add_option("--restarts", restarts, "Random restarts");
    select->add_option("--optimizer", optimizer, "conjugate_gradient, bfgs or gradient_descent");
    add_common(select, common);

    auto* impute = app.add_subcommand("impute", "Fill missing entries of a numeric CSV");
    std::string impute_in, impute_out = "imputed.csv", impute_method = "knn";
    std::size_t impute_k = 3;
    impute->add_option("input", impute_in, "CSV with header; empty or NA cells are missing")
        ->required()
        ;
    impute->add_option("--out", impute_out, "Output CSV");
    impute->add_option("--method", impute_method, "mean or knn")->check(CLI::IsMember({"mean", "knn"}));
    impute->add_option("--k", impute_k, "Neighbours for knn")->check(CLI::PositiveNumber);
    add_common(impute, common);

    auto* gen = app.add_subcommand("gen-climate", "Write synthetic weather stations as CSV");
    std::size_t gen_n = 260;
    double gen_noise = 1.0;
    std::string gen_out = "stations.csv";
    gen->add_option("--n", gen_n, "Number of stations");
    gen->add_option("--noise", gen_noise, "Noise level");
    gen->add_option("--out", gen_out, "Output CSV ('-' for stdout)");
    add_common(gen, common);

    auto* experiment = app.add_subcommand("experiment", "Locate stations from their climate under each coding");
    ExperimentFlags exp_flags;
    add_experiment_flags(experiment, exp_flags);
    add_common(experiment, common);

    auto* degrade = app.add_subcommand("degrade-study", "Robustness of each coding to missing months");
    ExperimentFlags deg_flags;
    deg_flags.out_dir = "degrade-study";
    double outlier = 0.0;
    add_experiment_flags(degrade, deg_flags);
    degrade->add_option("--outlier", outlier, "Also add this much to July temperature of every test station");
    add_common(degrade, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*recode) return cmd_recode(recode, common, recode_in, recode_out, recode_groups, recode_standardize, argc, argv);
        if (*train_cmd) return cmd_train(train_cmd, common, train_data, train_out, restarts, optimizer, argc, argv);
        if (*evaluate) return cmd_evaluate(common, eval_model, eval_data, eval_out, argc, argv);
        if (*select)
            return cmd_select(select, common, select_data, select_out, restarts, optimizer, sizes, folds, argc, argv);
        if (*impute) return cmd_impute(impute, common, impute_in, impute_out, impute_method, impute_k, argc, argv);
        if (*gen) return cmd_gen_climate(gen, common, gen_n, gen_noise, gen_out, argc, argv);
        if (*experiment) return cmd_experiment(experiment, common, exp_flags, argc, argv);
        if (*degrade) return cmd_degrade_study(degrade, common, deg_flags, outlier, argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
