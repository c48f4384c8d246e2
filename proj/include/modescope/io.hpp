#pragma once

#include "modescope/detect.hpp"
#include "modescope/lindblad.hpp"
#include "modescope/mode_fit.hpp"
#include "modescope/model.hpp"
#include "modescope/sweep.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modescope {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Shortest representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Write via a temporary file in the same directory, then rename.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

// ------------------------------- CSV formats --------------------------------

std::string sweep_to_csv(const std::vector<SweepRecord>& records);
std::vector<SweepRecord> sweep_from_csv(const std::string& text);

std::string trace_to_csv(const Trace& trace);
std::pair<std::vector<double>, std::vector<double>> trace_from_csv(const std::string& text);

std::string oracle_series_to_csv(const OracleSeries& series);
OracleSeries oracle_series_from_csv(const std::string& text);

std::string power_points_to_csv(const std::vector<PowerPoint>& points);
std::vector<PowerPoint> power_points_from_csv(const std::string& text);

// ----------------------------- Run configuration ----------------------------

struct GridSpec {
    double start_hz = 0.0;
    double stop_hz = 0.0;
    double step_hz = 0.0;
    std::vector<double> points_hz;  // non-empty when given explicitly

    std::vector<AngularFrequency> resolve() const;
};

struct RunConfig {
    Environment env;
    double epsilon_rf_hz = 0.0;  // resolved drive amplitude
    std::optional<double> power;
    std::optional<double> conversion_hz2;
    GridSpec grid;
    NoiseModel noise;
    double asymmetry_w = 0.5;
    SweepMode sweep_mode = SweepMode::direct;
    int threads = 1;
};

/// Strict parse: unknown keys are rejected with their JSON path.
RunConfig parse_run_config(const nlohmann::json& config);
nlohmann::json run_config_to_json(const RunConfig& config);

struct CatalogFile {
    ModeCatalog catalog;
    std::vector<AngularFrequency> qubit_freqs;
};

CatalogFile parse_catalog_json(const nlohmann::json& doc);

// ------------------------------ Result documents ----------------------------

/// Fit output plus the exact data window it was computed from, so downstream
/// report/plot steps are reproducible from the file alone.
struct FitDocument {
    ModeFitOutcome outcome;
    double window_lo_hz = 0.0;
    double window_hi_hz = 0.0;
    std::vector<SweepRecord> data;
};

nlohmann::json fit_document_to_json(const FitDocument& doc);
FitDocument fit_document_from_json(const nlohmann::json& doc);

nlohmann::json features_to_json(const std::vector<DetectedFeature>& features);
nlohmann::json mode_report_to_json(const ModeReport& report);

}  // namespace modescope
