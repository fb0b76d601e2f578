#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "symmlp/imputation.hpp"
#include "symmlp/model_selection.hpp"
#include "symmlp/recoding.hpp"
#include "symmlp/training.hpp"

namespace symmlp {

/// A weather station: location and 12 monthly temperatures / precipitations.
/// Degraded stations carry NaN in removed months.
struct Station {
    double longitude = 0.0;
    double latitude = 0.0;
    MonthlyVector temperature{};
    MonthlyVector precipitation{};
};

enum class CodingMethod { Full24, Mean2, MeanSd4, MinMax4 };

std::string_view to_string(CodingMethod m);
CodingMethod coding_method_from_string(std::string_view name);
std::size_t coded_dimension(CodingMethod m);
/// Parses "full24,mean2,..." into methods.
std::vector<CodingMethod> parse_methods(std::string_view list);

/// Synthetic climate bounds, in degrees.
struct ClimateBox {
    double lon_min = 75.0, lon_max = 131.0;
    double lat_min = 20.0, lat_max = 54.0;
};

/// Noise-free climate at a location.
struct ClimateNormals {
    double temperature_mean;
    double temperature_amplitude;
    double precipitation_mean;
    double monsoon_concentration;
    /// Months by which the seasonal cycle peaks after mid-July.
    double seasonal_lag;
};

ClimateNormals climate_normals(double longitude, double latitude, const ClimateBox& box = {});

/// Stations uniform over the box. Mean temperature falls with latitude and has a cold
/// plateau in the south-west; mean precipitation rises towards the south-east; the
/// seasonal amplitude grows with distance from the east coast. noise_level scales both the
/// station-level departures from these normals and the Gaussian noise on every month.
std::vector<Station> generate_synthetic_stations(std::size_t n, std::uint64_t seed, double noise_level = 1.0,
                                                 const ClimateBox& box = {});

/// Input vector for a station. Summary codings use the months that are present
/// (sample sd with divisor count - 1); full24 requires a complete station.
std::vector<double> apply_coding(const Station& s, CodingMethod m);

/// Removes the level's months from both monthly vectors.
Station degrade(const Station& s, DegradationLevel level);
/// Fills a degraded station by periodic linear interpolation.
Station interpolate_station(const Station& s, DegradationLevel level);

std::string stations_to_csv(const std::vector<Station>& stations);
std::vector<Station> stations_from_csv(std::string_view text);

struct CoordinateModel {
    MlpArchitecture architecture;
    WeightVector weights;
    double target_mean = 0.0;
    double target_scale = 1.0;
    std::size_t hidden_size = 0;
    SweepReport sweep;
};

/// Two single-output nets (longitude, latitude) sharing one input standardizer.
struct LocationModel {
    CodingMethod method = CodingMethod::Full24;
    Standardizer input_standardizer;
    CoordinateModel longitude;
    CoordinateModel latitude;

    /// Predicted (longitude, latitude); degraded stations are handled per coding.
    std::pair<double, double> predict(const Station& s, DegradationLevel level = DegradationLevel::None) const;
    std::size_t weight_count() const;
};

struct LocationPrediction {
    double true_longitude, true_latitude, predicted_longitude, predicted_latitude;
};

struct LocationResult {
    CodingMethod method = CodingMethod::Full24;
    double mae_longitude = 0.0;
    double mae_latitude = 0.0;
    LocationModel model;
    std::vector<LocationPrediction> test_predictions;
};

struct ExperimentConfig {
    std::size_t stations = 260;
    double noise_level = 1.0;
    std::uint64_t seed = 7;
    std::vector<CodingMethod> methods{CodingMethod::Full24, CodingMethod::Mean2, CodingMethod::MeanSd4,
                                      CodingMethod::MinMax4};
    SelectionPlan plan;
    TrainConfig train;

    /// Reduced sweep {3, 10, 30}, 5 restarts.
    static ExperimentConfig desk_scale();
    /// Sweep {3,5,7,10,15,20,30,40}, 10 restarts.
    static ExperimentConfig full_protocol();

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

struct StationSplit {
    std::vector<Station> train, validation, test;
};

StationSplit split_stations(const std::vector<Station>& stations, const SelectionPlan& plan, std::uint64_t seed);

/// Sweeps hidden sizes for the longitude and latitude nets independently and reports
/// the test mean absolute error in degrees.
LocationResult run_location_experiment(const StationSplit& split, CodingMethod method, const ExperimentConfig& config);

struct ExperimentReport {
    std::vector<LocationResult> results;
    StationSplit split;

    nlohmann::json to_json() const;
    /// Columns: inputs, longitude MAE (hidden), latitude MAE (hidden), number of weights.
    std::string to_table() const;
    /// true/predicted coordinate pairs on the test set, one row per station and method.
    std::string predictions_csv() const;
};

ExperimentReport run_experiment(const std::vector<Station>& stations, const ExperimentConfig& config);

struct DegradationRow {
    DegradationLevel level = DegradationLevel::None;
    CodingMethod method = CodingMethod::Full24;
    double mae_longitude = 0.0;
    double mae_latitude = 0.0;
    /// (MAE at level - MAE at none) / MAE at none.
    double relative_increase_longitude = 0.0;
    double relative_increase_latitude = 0.0;
};

struct OutlierRow {
    CodingMethod method;
    double mae_longitude;
    double mae_latitude;
};

struct DegradationReport {
    std::vector<DegradationRow> rows;
    std::vector<OutlierRow> outliers;

    const DegradationRow& at(DegradationLevel level, CodingMethod method) const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Evaluates already-trained models on degraded test stations. Full24 inputs are
/// rebuilt by interpolation; summary codings are recomputed from surviving months.
/// When outlier_magnitude is set, also reports MAE with that amount added to one
/// temperature month (July) of every test station.
DegradationReport run_degradation_study(const std::vector<LocationModel>& models, const std::vector<Station>& test,
                                        const std::vector<DegradationLevel>& levels,
                                        std::optional<double> outlier_magnitude = std::nullopt);

double mean_absolute_error(const std::vector<double>& truth, const std::vector<double>& predicted);

}  // namespace symmlp
