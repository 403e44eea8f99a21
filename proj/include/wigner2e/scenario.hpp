#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wigner2e/advection.hpp"
#include "wigner2e/core.hpp"
#include "wigner2e/diagnostics.hpp"
#include "wigner2e/errors.hpp"
#include "wigner2e/potentials.hpp"
#include "wigner2e/trajectories.hpp"

namespace wigner2e {

// Configuration file not matching the scenario schema (CLI exit 2).
struct SchemaError : ValidationError {
    using ValidationError::ValidationError;
};

enum class ModelChoice { full2e, bbgky, force, all };
const char* to_string(ModelChoice m);
ModelChoice model_from_string(const std::string& s);

struct CertificateSettings {
    bool enabled = false;
    // Section time; unset selects the closest approach of the packet centres.
    std::optional<double> t;
    int points_per_axis = 15;
    double half_width = 2.5;
};

struct ForceSettings {
    std::size_t n_particles = 100000;
    int batches = 8;
    // Pointwise pullback step and forward ensemble step.
    double h_max = 1e-3;
    double ensemble_h_max = 1e-2;
    // Purity / deposit grid of one electron; unset derives it from `grid`.
    std::optional<WignerGrid> estimator_grid;
    CertificateSettings certificate;
};

// Run description. JSON schema (sections mirror the fields below; unknown keys
// are rejected):
//   name, description, d, model, coupling_lambda, seed
//   units        {hbar, mass, charge}               (all fixed to 1)
//   interaction  {kind: coulomb3d | coulomb2d, epsilon}
//   grid         {n_x, x_min, x_max, coherence_length, n_p}
//   grid_1e      same keys, one-electron solver grid (default: grid)
//   packets      [{center_r, center_p, sigma}, {...}]
//   fields       {B0, B1, potential: {kind, strength, softening, center, table_x0, table_dx, samples}}
//   horizon      {T, output_interval, snapshot_times}
//   solver       {dt, interpolation, refresh_every, edge_tolerance}
//   force        {n_particles, batches, h_max, ensemble_h_max, estimator_grid,
//                 certificate: {enabled, t, points_per_axis, half_width}}
//   output       {directory}
struct ScenarioConfig {
    std::string name;
    std::string description;
    int d = 1;
    ModelChoice model = ModelChoice::all;
    UnitSystem units;
    PotentialSpec interaction = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0);
    WignerGrid grid;
    std::optional<WignerGrid> grid_1e;
    std::array<GaussianPacket, 2> packets;
    FieldConfig fields;
    double T = 0.0;
    double output_interval = 0.0;
    std::vector<double> snapshot_times;
    double dt = 1e-3;
    Interpolation interpolation = Interpolation::spectral;
    int refresh_every = 1;
    double edge_tolerance = 1e-4;
    ForceSettings force;
    std::string output_directory;
    std::uint64_t seed = 1;

    // Throws SchemaError on any inconsistency, including the scenario
    // invariants: packets at least 4 (sigma1 + sigma2) apart and, for d = 2,
    // aimed with a nonzero impact parameter; full2e needs d = 1.
    void validate() const;
    const WignerGrid& one_electron_grid() const { return grid_1e ? *grid_1e : grid; }
    WignerGrid estimator_grid() const;
    int output_every() const;
    int output_count() const;
    bool runs(ModelChoice m) const { return model == ModelChoice::all || model == m; }
};

// JSON text in and out; the output is the fully resolved configuration.
ScenarioConfig parse_scenario(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& c);
// Parses the file, or a bundled scenario when `path_or_name` names one and no such file exists.
ScenarioConfig load_scenario(const std::string& path_or_name);

std::vector<std::string> list_scenarios();
// JSON text of a bundled scenario; throws SchemaError for an unknown name.
const std::string& bundled_scenario(const std::string& name);

struct RunOptions {
    // Override of the configured output directory.
    std::string output_directory;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

enum class RunStatus { ok = 0, schema = 2, cost_guard = 3, numerical_guard = 4 };

struct RunResult {
    RunStatus status = RunStatus::ok;
    std::string message;
    std::filesystem::path directory;
    std::vector<std::string> artifacts;
    // Series of each model that ran, in run order.
    std::vector<std::pair<std::string, ObservableSeries>> series;
    // comparison.csv content (model all only).
    std::vector<std::string> comparison_columns;
    std::vector<std::vector<double>> comparison_rows;
    int exit_code() const { return static_cast<int>(status); }
};

// Runs the configured model(s) and writes manifest.json, series_<model>.csv,
// snapshot CSVs and, for model all, comparison.csv. Validation and cost
// checks happen before anything is written.
RunResult run_scenario(ScenarioConfig cfg, const RunOptions& opt = {});

}  // namespace wigner2e
