#include "symmlp/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace symmlp {

using nlohmann::json;

namespace {

constexpr std::size_t kMonths = 12;
constexpr std::size_t kWarmestMonth = 6;  // July, 0-based

// Spread of station-level departures at noise_level = 1.
constexpr double kLocalTemperatureSd = 1.0;
constexpr double kLocalAmplitudeSd = 0.08;
constexpr double kLocalPrecipitationSd = 0.2;
constexpr double kLocalMonsoonSd = 0.25;
constexpr double kLocalLagSd = 0.2;

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

double smoothstep(double lo, double hi, double x) {
    const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

struct Summary {
    double mean, sd, min, max;
};

Summary summarize(const MonthlyVector& v) {
    std::vector<double> xs;
    for (double x : v)
        if (!is_missing(x)) xs.push_back(x);
    if (xs.empty()) throw ImputationError("station has no observed months");
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    return {mean, sd, *lo, *hi};
}

std::uint64_t job_seed(std::uint64_t master, CodingMethod m, int coordinate) {
    return master * 1000003ULL + static_cast<std::uint64_t>(m) * 16ULL + static_cast<std::uint64_t>(coordinate);
}

Matrix coded_inputs(const std::vector<Station>& stations, CodingMethod m) {
    Matrix out(stations.size(), coded_dimension(m));
    for (std::size_t i = 0; i < stations.size(); ++i) {
        auto v = apply_coding(stations[i], m);
        std::copy(v.begin(), v.end(), out.row(i).begin());
    }
    return out;
}

Matrix coordinate_column(const std::vector<Station>& stations, int coordinate) {
    Matrix out(stations.size(), 1);
    for (std::size_t i = 0; i < stations.size(); ++i)
        out(i, 0) = coordinate == 0 ? stations[i].longitude : stations[i].latitude;
    return out;
}

double predict_coordinate(const CoordinateModel& model, std::span<const double> standardized_input) {
    auto trace = forward(model.architecture, model.weights, standardized_input);
    return trace.output()[0] * model.target_scale + model.target_mean;
}

CoordinateModel fit_coordinate(const Matrix& x_train, const Matrix& x_val, const Matrix& x_test,
                               const std::vector<Station>& split_train, const std::vector<Station>& split_val,
                               const std::vector<Station>& split_test, int coordinate, CodingMethod method,
                               const ExperimentConfig& config) {
    const Matrix y_train_raw = coordinate_column(split_train, coordinate);
    const auto target_std = Standardizer::fit(y_train_raw);
    Dataset train_set{x_train, target_std.transform(y_train_raw), {}};
    Dataset val_set{x_val, target_std.transform(coordinate_column(split_val, coordinate)), {}};
    Dataset test_set{x_test, target_std.transform(coordinate_column(split_test, coordinate)), {}};

    TrainConfig tc = config.train;
    tc.seed = job_seed(config.seed, method, coordinate);
    tc.jobs = 1;
    const auto arch_template = MlpArchitecture::single_hidden_regression(x_train.cols(), 1);
    if (tc.decay.active() && tc.decay.first_layer_divisors.empty())
        tc.decay.first_layer_divisors.assign(x_train.cols(), 1.0);

    CoordinateModel model;
    model.sweep = sweep(arch_template, config.plan.hidden_sizes, train_set, val_set, tc,
                        test_set.size() > 0 ? &test_set : nullptr);
    model.architecture = model.sweep.winner_fit.architecture;
    model.weights = model.sweep.winner_fit.best_weights;
    model.hidden_size = model.sweep.winning().hidden_size;
    model.target_mean = target_std.mean()[0];
    model.target_scale = target_std.scale()[0];
    return model;
}

json method_list_json(const std::vector<CodingMethod>& methods) {
    json j = json::array();
    for (auto m : methods) j.push_back(to_string(m));
    return j;
}

}  // namespace

std::string_view to_string(CodingMethod m) {
    switch (m) {
        case CodingMethod::Full24: return "full24";
        case CodingMethod::Mean2: return "mean2";
        case CodingMethod::MeanSd4: return "mean_sd4";
        case CodingMethod::MinMax4: return "min_max4";
    }
    return "?";
}

CodingMethod coding_method_from_string(std::string_view name) {
    for (auto m : {CodingMethod::Full24, CodingMethod::Mean2, CodingMethod::MeanSd4, CodingMethod::MinMax4})
        if (to_string(m) == name) return m;
    throw SelectionError("unknown coding method '" + std::string(name) + "'");
}

std::size_t coded_dimension(CodingMethod m) {
    switch (m) {
        case CodingMethod::Full24: return 24;
        case CodingMethod::Mean2: return 2;
        case CodingMethod::MeanSd4:
        case CodingMethod::MinMax4: return 4;
    }
    return 0;
}

std::vector<CodingMethod> parse_methods(std::string_view list) {
    std::vector<CodingMethod> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        auto end = list.find(',', start);
        if (end == std::string_view::npos) end = list.size();
        auto item = list.substr(start, end - start);
        if (!item.empty()) out.push_back(coding_method_from_string(item));
        start = end + 1;
    }
    if (out.empty()) throw SelectionError("no coding methods given");
    return out;
}

ClimateNormals climate_normals(double longitude, double latitude, const ClimateBox& box) {
    const double x = (longitude - box.lon_min) / (box.lon_max - box.lon_min);  // 0 west .. 1 east
    const double y = (latitude - box.lat_min) / (box.lat_max - box.lat_min);    // 0 south .. 1 north
    const double dx = (x - 0.2) / 0.13, dy = (y - 0.4) / 0.13;
    const double plateau = std::exp(-0.5 * (dx * dx + dy * dy));
    ClimateNormals c{};
    c.temperature_mean = 22.0 - 24.0 * y - 12.0 * plateau;
    c.temperature_amplitude = 4.0 + 12.0 * std::pow(1.0 - x, 1.3) + 8.0 * y;
    // Dry north and west, wet south-east; flat over the dry half.
    const double axis = 0.5 * (x + (1.0 - y));
    c.precipitation_mean = 15.0 + 150.0 * smoothstep(0.35, 0.95, axis);
    c.monsoon_concentration = 0.4 + 2.2 * x;
    // Oceanic stations peak later in the year.
    c.seasonal_lag = 0.5 * x;
    return c;
}

std::vector<Station> generate_synthetic_stations(std::size_t n, std::uint64_t seed, double noise_level,
                                                 const ClimateBox& box) {
    if (n < 10) throw SelectionError("synthetic climate needs at least 10 stations");
    auto rng = make_rng(seed, 0xc11a7e);
    std::vector<Station> out(n);
    for (auto& s : out) {
        s.longitude = uniform(rng, box.lon_min, box.lon_max);
        s.latitude = uniform(rng, box.lat_min, box.lat_max);
        auto c = climate_normals(s.longitude, s.latitude, box);
        // Station-level departures from the regional normals (elevation, exposure).
        c.temperature_mean += kLocalTemperatureSd * noise_level * standard_normal(rng);
        c.temperature_amplitude *= std::exp(kLocalAmplitudeSd * noise_level * standard_normal(rng));
        c.precipitation_mean *= std::exp(kLocalPrecipitationSd * noise_level * standard_normal(rng));
        c.monsoon_concentration =
            std::max(0.0, c.monsoon_concentration + kLocalMonsoonSd * noise_level * standard_normal(rng));
        const double lag = c.seasonal_lag + kLocalLagSd * noise_level * standard_normal(rng);
        double shape_sum = 0.0;
        std::array<double, kMonths> shape{};
        for (std::size_t m = 0; m < kMonths; ++m) {
            const double phase =
                2.0 * std::numbers::pi * (static_cast<double>(m) - static_cast<double>(kWarmestMonth) - lag) / 12.0;
            s.temperature[m] = c.temperature_mean + c.temperature_amplitude * std::cos(phase);
            shape[m] = std::exp(c.monsoon_concentration * std::cos(phase));
            shape_sum += shape[m];
        }
        for (std::size_t m = 0; m < kMonths; ++m)
            s.precipitation[m] = c.precipitation_mean * shape[m] * 12.0 / shape_sum;
        for (std::size_t m = 0; m < kMonths; ++m) {
            s.temperature[m] += noise_level * standard_normal(rng);
            s.precipitation[m] =
                std::max(0.0, s.precipitation[m] * (1.0 + 0.1 * noise_level * standard_normal(rng)));
        }
    }
    return out;
}

std::vector<double> apply_coding(const Station& s, CodingMethod m) {
    switch (m) {
        case CodingMethod::Full24: {
            std::vector<double> out(s.temperature.begin(), s.temperature.end());
            out.insert(out.end(), s.precipitation.begin(), s.precipitation.end());
            for (double x : out)
                if (is_missing(x)) throw ImputationError("full24 coding needs a complete station; interpolate first");
            return out;
        }
        case CodingMethod::Mean2: return {summarize(s.temperature).mean, summarize(s.precipitation).mean};
        case CodingMethod::MeanSd4: {
            const auto t = summarize(s.temperature), p = summarize(s.precipitation);
            return {t.mean, t.sd, p.mean, p.sd};
        }
        case CodingMethod::MinMax4: {
            const auto t = summarize(s.temperature), p = summarize(s.precipitation);
            return {t.min, t.max, p.min, p.max};
        }
    }
    return {};
}

Station degrade(const Station& s, DegradationLevel level) {
    Station out = s;
    for (auto m : missing_months(level)) {
        out.temperature[m] = missing_value;
        out.precipitation[m] = missing_value;
    }
    return out;
}

Station interpolate_station(const Station& s, DegradationLevel level) {
    if (level == DegradationLevel::None) return s;
    Station out = s;
    out.temperature = interpolate_periodic(s.temperature, level);
    out.precipitation = interpolate_periodic(s.precipitation, level);
    return out;
}

std::string stations_to_csv(const std::vector<Station>& stations) {
    std::string out = "lon,lat";
    for (int i = 1; i <= 12; ++i) out += ",t" + std::to_string(i);
    for (int i = 1; i <= 12; ++i) out += ",p" + std::to_string(i);
    out += '\n';
    for (const auto& s : stations) {
        out += format_double(s.longitude) + ',' + format_double(s.latitude);
        for (double t : s.temperature) out += ',' + (is_missing(t) ? std::string("NA") : format_double(t));
        for (double p : s.precipitation) out += ',' + (is_missing(p) ? std::string("NA") : format_double(p));
        out += '\n';
    }
    return out;
}

std::vector<Station> stations_from_csv(std::string_view text) {
    auto table = parse_quantitative_csv(text);
    auto col = [&](const std::string& name) {
        auto idx = table.variable_index(name);
        if (!idx) throw ParseError("station CSV is missing column '" + name + "'");
        return *idx;
    };
    const auto lon = col("lon"), lat = col("lat");
    std::array<std::size_t, 12> t{}, p{};
    for (int i = 0; i < 12; ++i) {
        t[i] = col("t" + std::to_string(i + 1));
        p[i] = col("p" + std::to_string(i + 1));
    }
    auto number = [](const SymbolicValue& v) {
        const auto* n = std::get_if<value::Number>(&v);
        return n ? n->x : missing_value;
    };
    std::vector<Station> out;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        const auto& row = table.rows[r];
        Station s;
        s.longitude = number(row[lon]);
        s.latitude = number(row[lat]);
        if (is_missing(s.longitude) || is_missing(s.latitude))
            throw ParseError("station CSV row " + std::to_string(r) + ": location is missing");
        for (int i = 0; i < 12; ++i) {
            s.temperature[i] = number(row[t[i]]);
            s.precipitation[i] = number(row[p[i]]);
        }
        out.push_back(s);
    }
    return out;
}

std::pair<double, double> LocationModel::predict(const Station& s, DegradationLevel level) const {
    const Station& src = s;
    Station filled;
    const Station* use = &src;
    if (method == CodingMethod::Full24 && level != DegradationLevel::None) {
        filled = interpolate_station(s, level);
        use = &filled;
    }
    auto x = apply_coding(*use, method);
    input_standardizer.transform_row(x);
    return {predict_coordinate(longitude, x), predict_coordinate(latitude, x)};
}

std::size_t LocationModel::weight_count() const {
    return count_weights(longitude.architecture) + count_weights(latitude.architecture);
}

ExperimentConfig ExperimentConfig::desk_scale() {
    ExperimentConfig c;
    c.plan.hidden_sizes = {3, 10, 30};
    c.train.restarts = 5;
    c.train.max_iterations = 300;
    c.train.early_stopping = {true, 50};
    return c;
}

ExperimentConfig ExperimentConfig::full_protocol() {
    ExperimentConfig c;
    c.plan.hidden_sizes = {3, 5, 7, 10, 15, 20, 30, 40};
    c.train.restarts = 10;
    c.train.max_iterations = 1000;
    c.train.early_stopping = {true, 50};
    return c;
}

json ExperimentConfig::to_json() const {
    return json{{"stations", stations},     {"noise_level", noise_level}, {"seed", seed},
                {"methods", method_list_json(methods)}, {"plan", plan.to_json()}, {"train", train.to_json()}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c = j.value("protocol", std::string("desk")) == "full" ? full_protocol() : desk_scale();
    c.stations = j.value("stations", c.stations);
    c.noise_level = j.value("noise_level", c.noise_level);
    c.seed = j.value("seed", c.seed);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j["methods"]) c.methods.push_back(coding_method_from_string(m.get<std::string>()));
    }
    if (j.contains("plan")) c.plan = SelectionPlan::from_json(j["plan"]);
    if (j.contains("train")) {
        json merged = c.train.to_json();
        merged.update(j["train"]);
        c.train = TrainConfig::from_json(merged);
    }
    return c;
}

StationSplit split_stations(const std::vector<Station>& stations, const SelectionPlan& plan, std::uint64_t seed) {
    const auto idx = split_indices(stations.size(), plan.split, seed);
    StationSplit out;
    for (auto i : idx.train) out.train.push_back(stations[i]);
    for (auto i : idx.validation) out.validation.push_back(stations[i]);
    for (auto i : idx.test) out.test.push_back(stations[i]);
    return out;
}

double mean_absolute_error(const std::vector<double>& truth, const std::vector<double>& predicted) {
    if (truth.size() != predicted.size() || truth.empty())
        throw DimensionError("mean_absolute_error: sizes differ or are empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(truth[i] - predicted[i]);
    return sum / static_cast<double>(truth.size());
}

LocationResult run_location_experiment(const StationSplit& split, CodingMethod method,
                                       const ExperimentConfig& config) {
    if (split.validation.empty()) throw SelectionError("location experiment needs a validation set");
    const Matrix raw_train = coded_inputs(split.train, method);
    const auto input_std = Standardizer::fit(raw_train);
    const Matrix x_train = input_std.transform(raw_train);
    const Matrix x_val = input_std.transform(coded_inputs(split.validation, method));
    const Matrix x_test = input_std.transform(coded_inputs(split.test, method));

    LocationResult result;
    result.method = method;
    result.model.method = method;
    result.model.input_standardizer = input_std;
    std::array<CoordinateModel, 2> models;
    parallel_for(2, std::max<std::size_t>(1, config.train.jobs), [&](std::size_t coord) {
        models[coord] = fit_coordinate(x_train, x_val, x_test, split.train, split.validation, split.test,
                                       static_cast<int>(coord), method, config);
    });
    result.model.longitude = std::move(models[0]);
    result.model.latitude = std::move(models[1]);

    std::vector<double> lon_true, lat_true, lon_pred, lat_pred;
    for (const auto& s : split.test) {
        const auto [lon, lat] = result.model.predict(s);
        lon_true.push_back(s.longitude);
        lat_true.push_back(s.latitude);
        lon_pred.push_back(lon);
        lat_pred.push_back(lat);
        result.test_predictions.push_back({s.longitude, s.latitude, lon, lat});
    }
    if (!split.test.empty()) {
        result.mae_longitude = mean_absolute_error(lon_true, lon_pred);
        result.mae_latitude = mean_absolute_error(lat_true, lat_pred);
    }
    return result;
}

ExperimentReport run_experiment(const std::vector<Station>& stations, const ExperimentConfig& config) {
    ExperimentReport report;
    report.split = split_stations(stations, config.plan, config.seed);
    report.results.resize(config.methods.size());
    ExperimentConfig inner = config;
    const std::size_t jobs = std::max<std::size_t>(1, config.train.jobs);
    inner.train.jobs = 1;
    parallel_for(config.methods.size(), jobs, [&](std::size_t i) {
        report.results[i] = run_location_experiment(report.split, config.methods[i], inner);
    });
    return report;
}

json ExperimentReport::to_json() const {
    json rows = json::array();
    for (const auto& r : results) {
        rows.push_back({{"method", to_string(r.method)},
                        {"mae_long", r.mae_longitude},
                        {"mae_lat", r.mae_latitude},
                        {"h_long", r.model.longitude.hidden_size},
                        {"h_lat", r.model.latitude.hidden_size},
                        {"weights", r.model.weight_count()},
                        {"sweep_long", r.model.longitude.sweep.to_json()},
                        {"sweep_lat", r.model.latitude.sweep.to_json()}});
    }
    return json{{"results", std::move(rows)},
                {"split", {{"train", split.train.size()}, {"validation", split.validation.size()},
                           {"test", split.test.size()}}}};
}

std::string ExperimentReport::to_table() const {
    std::ostringstream out;
    out << "inputs      longitude     latitude      weights\n";
    for (const auto& r : results) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-10s  %6s (%2zu)   %6s (%2zu)   %zu\n", std::string(to_string(r.method)).c_str(),
                      fixed(r.mae_longitude, 2).c_str(), r.model.longitude.hidden_size,
                      fixed(r.mae_latitude, 2).c_str(), r.model.latitude.hidden_size, r.model.weight_count());
        out << line;
    }
    return out.str();
}

std::string ExperimentReport::predictions_csv() const {
    std::string out = "method,true_lon,true_lat,pred_lon,pred_lat\n";
    for (const auto& r : results)
        for (const auto& p : r.test_predictions)
            out += std::string(to_string(r.method)) + ',' + format_double(p.true_longitude) + ',' +
                   format_double(p.true_latitude) + ',' + format_double(p.predicted_longitude) + ',' +
                   format_double(p.predicted_latitude) + '\n';
    return out;
}

const DegradationRow& DegradationReport::at(DegradationLevel level, CodingMethod method) const {
    for (const auto& r : rows)
        if (r.level == level && r.method == method) return r;
    throw SelectionError("no degradation row for level '" + std::string(to_string(level)) + "' and method '" +
                         std::string(to_string(method)) + "'");
}

json DegradationReport::to_json() const {
    json rs = json::array();
    for (const auto& r : rows)
        rs.push_back({{"level", to_string(r.level)},
                      {"method", to_string(r.method)},
                      {"mae_long", r.mae_longitude},
                      {"mae_lat", r.mae_latitude},
                      {"relative_increase_long", r.relative_increase_longitude},
                      {"relative_increase_lat", r.relative_increase_latitude}});
    json j{{"levels", std::move(rs)}};
    if (!outliers.empty()) {
        json os = json::array();
        for (const auto& o : outliers)
            os.push_back({{"method", to_string(o.method)}, {"mae_long", o.mae_longitude}, {"mae_lat", o.mae_latitude}});
        j["outlier"] = std::move(os);
    }
    return j;
}

std::string DegradationReport::to_csv() const {
    std::string out = "level,method,mae_long,mae_lat,relative_increase_long,relative_increase_lat\n";
    for (const auto& r : rows)
        out += std::string(to_string(r.level)) + ',' + std::string(to_string(r.method)) + ',' +
               format_double(r.mae_longitude) + ',' + format_double(r.mae_latitude) + ',' +
               format_double(r.relative_increase_longitude) + ',' + format_double(r.relative_increase_latitude) + '\n';
    return out;
}

DegradationReport run_degradation_study(const std::vector<LocationModel>& models, const std::vector<Station>& test,
                                        const std::vector<DegradationLevel>& levels,
                                        std::optional<double> outlier_magnitude) {
    if (test.empty()) throw SelectionError("degradation study needs test stations");
    DegradationReport report;
    auto evaluate = [&](const LocationModel& model, DegradationLevel level, const std::vector<Station>& stations) {
        std::vector<double> lt, la, lp, ap;
        for (const auto& s : stations) {
            const auto [lon, lat] = model.predict(degrade(s, level), level);
            lt.push_back(s.longitude);
            la.push_back(s.latitude);
            lp.push_back(lon);
            ap.push_back(lat);
        }
        return std::make_pair(mean_absolute_error(lt, lp), mean_absolute_error(la, ap));
    };
    for (const auto& model : models) {
        const auto baseline = evaluate(model, DegradationLevel::None, test);
        for (auto level : levels) {
            const auto mae = level == DegradationLevel::None ? baseline : evaluate(model, level, test);
            report.rows.push_back({level, model.method, mae.first, mae.second,
                                   (mae.first - baseline.first) / baseline.first,
                                   (mae.second - baseline.second) / baseline.second});
        }
        if (outlier_magnitude) {
            auto perturbed = test;
            for (auto& s : perturbed) s.temperature[kWarmestMonth] += *outlier_magnitude;
            const auto mae = evaluate(model, DegradationLevel::None, perturbed);
            report.outliers.push_back({model.method, mae.first, mae.second});
        }
    }
    return report;
}

}  // namespace symmlp
