#include "wigner2e/scenario.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "wigner2e/bbgky.hpp"
#include "wigner2e/diagnostics.hpp"
#include "wigner2e/force_model.hpp"
#include "wigner2e/parallel.hpp"
#include "wigner2e/two_electron.hpp"

#ifndef WIGNER2E_VERSION
#define WIGNER2E_VERSION "0.0.0"
#endif

namespace wigner2e {

using nlohmann::json;

const char* to_string(ModelChoice m) {
    switch (m) {
        case ModelChoice::full2e: return "full2e";
        case ModelChoice::bbgky: return "bbgky";
        case ModelChoice::force: return "force";
        case ModelChoice::all: return "all";
    }
    return "?";
}

ModelChoice model_from_string(const std::string& s) {
    for (ModelChoice m : {ModelChoice::full2e, ModelChoice::bbgky, ModelChoice::force, ModelChoice::all})
        if (s == to_string(m)) return m;
    throw SchemaError(fmt::format("model: unknown model '{}' (full2e | bbgky | force | all)", s));
}

namespace {

constexpr int kCsvFormatVersion = 1;

// JSON object with required/optional typed fields; unknown keys are errors.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail("must be an object");
    }
    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }
    const json& at(const char* key) {
        if (!has(key)) fail(fmt::format("missing required field '{}'", key));
        return j_.at(key);
    }
    double number(const char* key) {
        const json& v = at(key);
        if (!v.is_number()) fail(fmt::format("'{}' must be a number", key));
        return v.get<double>();
    }
    double number(const char* key, double def) { return has(key) ? number(key) : def; }
    long long integer(const char* key) {
        const json& v = at(key);
        if (!v.is_number_integer()) fail(fmt::format("'{}' must be an integer", key));
        return v.get<long long>();
    }
    long long integer(const char* key, long long def) { return has(key) ? integer(key) : def; }
    std::string text(const char* key) {
        const json& v = at(key);
        if (!v.is_string()) fail(fmt::format("'{}' must be a string", key));
        return v.get<std::string>();
    }
    std::string text(const char* key, const std::string& def) { return has(key) ? text(key) : def; }
    bool flag(const char* key, bool def) {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_boolean()) fail(fmt::format("'{}' must be true or false", key));
        return v.get<bool>();
    }
    std::vector<double> numbers(const char* key) {
        const json& v = at(key);
        if (!v.is_array()) fail(fmt::format("'{}' must be an array of numbers", key));
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail(fmt::format("'{}' must be an array of numbers", key));
            out.push_back(e.get<double>());
        }
        return out;
    }
    std::vector<double> numbers(const char* key, std::vector<double> def) {
        return has(key) ? numbers(key) : std::move(def);
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(fmt::format("unknown field '{}'", it.key()));
    }
    [[noreturn]] void fail(const std::string& msg) const { throw SchemaError(fmt::format("{}: {}", where_, msg)); }
    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

int to_int(Section& s, const char* key, long long v) {
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        s.fail(fmt::format("'{}' out of range", key));
    return int(v);
}

WignerGrid grid_from(const json& j, const std::string& where, int d) {
    Section s(j, where);
    WignerGrid g;
    g.d = d;
    g.n_x = to_int(s, "n_x", s.integer("n_x"));
    g.x_min = s.number("x_min");
    g.x_max = s.number("x_max");
    g.coherence_length = s.number("coherence_length");
    g.n_p = to_int(s, "n_p", s.integer("n_p"));
    s.finish();
    return g;
}

json grid_to(const WignerGrid& g) {
    return json{{"n_x", g.n_x},
                {"x_min", g.x_min},
                {"x_max", g.x_max},
                {"coherence_length", g.coherence_length},
                {"n_p", g.n_p}};
}

GaussianPacket packet_from(const json& j, const std::string& where) {
    Section s(j, where);
    GaussianPacket p{s.numbers("center_r"), s.numbers("center_p"), s.numbers("sigma")};
    s.finish();
    return p;
}

json packet_to(const GaussianPacket& p) {
    return json{{"center_r", p.center_r}, {"center_p", p.center_p}, {"sigma", p.sigma}};
}

PotentialSpec potential_from(const json& j) {
    Section s(j, "fields.potential");
    PotentialSpec p;
    try {
        p.kind = potential_kind_from_string(s.text("kind"));
    } catch (const ValidationError& e) {
        s.fail(e.what());
    }
    p.strength = s.number("strength", 0.0);
    p.softening = s.number("softening", 0.0);
    p.center = s.numbers("center", {});
    p.table_x0 = s.number("table_x0", 0.0);
    p.table_dx = s.number("table_dx", 0.0);
    p.samples = s.numbers("samples", {});
    s.finish();
    return p;
}

json potential_to(const PotentialSpec& p) {
    json j{{"kind", to_string(p.kind)}, {"strength", p.strength}, {"softening", p.softening}, {"center", p.center}};
    if (p.kind == PotentialKind::tabulated) {
        j["table_x0"] = p.table_x0;
        j["table_dx"] = p.table_dx;
        j["samples"] = p.samples;
    }
    return j;
}

bool is_multiple(double a, double b) {
    const double r = a / b;
    return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, std::abs(r));
}

std::string file_time(double t) { return fmt::format("{:.6g}", t); }

const std::vector<std::pair<std::string, std::string>>& bundled() {
    static const std::vector<std::pair<std::string, std::string>> v{
#include "bundled_scenarios.inc"
    };
    return v;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(fmt::format("scenario: not valid JSON ({})", e.what()));
    }
    Section top(j, "scenario");
    ScenarioConfig c;
    c.name = top.text("name");
    c.description = top.text("description", "");
    c.d = to_int(top, "d", top.integer("d"));
    if (c.d != 1 && c.d != 2) top.fail("'d' must be 1 or 2");
    c.model = model_from_string(top.text("model"));
    c.units.coupling_lambda = top.number("coupling_lambda");
    c.seed = std::uint64_t(top.integer("seed", 1));
    if (top.has("units")) {
        Section u(j.at("units"), "units");
        c.units.hbar = u.number("hbar", 1.0);
        c.units.mass = u.number("mass", 1.0);
        c.units.charge = u.number("charge", 1.0);
        u.finish();
    }
    {
        Section s(top.at("interaction"), "interaction");
        const std::string kind = s.text("kind");
        if (kind != "coulomb3d" && kind != "coulomb2d") s.fail("'kind' must be coulomb3d or coulomb2d");
        c.interaction = PotentialSpec::coulomb(potential_kind_from_string(kind), 1.0, s.number("epsilon"));
        s.finish();
    }
    c.grid = grid_from(top.at("grid"), "grid", c.d);
    if (top.has("grid_1e")) c.grid_1e = grid_from(j.at("grid_1e"), "grid_1e", c.d);
    {
        const json& p = top.at("packets");
        if (!p.is_array() || p.size() != 2) top.fail("'packets' must be an array of two packets");
        c.packets = {packet_from(p[0], "packets[0]"), packet_from(p[1], "packets[1]")};
    }
    if (top.has("fields")) {
        Section s(j.at("fields"), "fields");
        c.fields.B0 = s.number("B0", 0.0);
        c.fields.B1 = s.number("B1", 0.0);
        if (s.has("potential")) c.fields.potential = potential_from(j.at("fields").at("potential"));
        s.finish();
    }
    {
        Section s(top.at("horizon"), "horizon");
        c.T = s.number("T");
        c.output_interval = s.number("output_interval");
        c.snapshot_times = s.numbers("snapshot_times", {});
        s.finish();
    }
    if (top.has("solver")) {
        Section s(j.at("solver"), "solver");
        c.dt = s.number("dt", c.dt);
        try {
            c.interpolation = interpolation_from_string(s.text("interpolation", to_string(c.interpolation)));
        } catch (const ValidationError& e) {
            s.fail(e.what());
        }
        c.refresh_every = to_int(s, "refresh_every", s.integer("refresh_every", c.refresh_every));
        c.edge_tolerance = s.number("edge_tolerance", c.edge_tolerance);
        s.finish();
    }
    if (top.has("force")) {
        const json& fj = j.at("force");
        Section s(fj, "force");
        auto& f = c.force;
        const long long n = s.integer("n_particles", (long long)f.n_particles);
        if (n < 1) s.fail("'n_particles' must be >= 1");
        f.n_particles = std::size_t(n);
        f.batches = to_int(s, "batches", s.integer("batches", f.batches));
        f.h_max = s.number("h_max", f.h_max);
        f.ensemble_h_max = s.number("ensemble_h_max", f.ensemble_h_max);
        if (s.has("estimator_grid")) f.estimator_grid = grid_from(fj.at("estimator_grid"), "force.estimator_grid", c.d);
        if (s.has("certificate")) {
            Section cs(fj.at("certificate"), "force.certificate");
            f.certificate.enabled = cs.flag("enabled", true);
            if (cs.has("t")) {
                const json& t = fj.at("certificate").at("t");
                if (t.is_string() && t.get<std::string>() == "closest") {
                } else if (t.is_number()) {
                    f.certificate.t = t.get<double>();
                } else {
                    cs.fail("'t' must be a number or \"closest\"");
                }
            }
            f.certificate.points_per_axis =
                to_int(cs, "points_per_axis", cs.integer("points_per_axis", f.certificate.points_per_axis));
            f.certificate.half_width = cs.number("half_width", f.certificate.half_width);
            cs.finish();
        }
        s.finish();
    }
    if (top.has("output")) {
        Section s(j.at("output"), "output");
        c.output_directory = s.text("directory", "");
        s.finish();
    }
    top.finish();
    c.validate();
    return c;
}

std::string scenario_to_json(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    j["description"] = c.description;
    j["d"] = c.d;
    j["model"] = to_string(c.model);
    j["coupling_lambda"] = c.units.coupling_lambda;
    j["seed"] = c.seed;
    j["units"] = {{"hbar", c.units.hbar}, {"mass", c.units.mass}, {"charge", c.units.charge}};
    j["interaction"] = {{"kind", to_string(c.interaction.kind)}, {"epsilon", c.interaction.softening}};
    j["grid"] = grid_to(c.grid);
    if (c.grid_1e) j["grid_1e"] = grid_to(*c.grid_1e);
    j["packets"] = json::array({packet_to(c.packets[0]), packet_to(c.packets[1])});
    j["fields"] = {{"B0", c.fields.B0}, {"B1", c.fields.B1}, {"potential", potential_to(c.fields.potential)}};
    j["horizon"] = {{"T", c.T}, {"output_interval", c.output_interval}, {"snapshot_times", c.snapshot_times}};
    j["solver"] = {{"dt", c.dt},
                   {"interpolation", to_string(c.interpolation)},
                   {"refresh_every", c.refresh_every},
                   {"edge_tolerance", c.edge_tolerance}};
    json cert{{"enabled", c.force.certificate.enabled},
              {"points_per_axis", c.force.certificate.points_per_axis},
              {"half_width", c.force.certificate.half_width}};
    if (c.force.certificate.t)
        cert["t"] = *c.force.certificate.t;
    else
        cert["t"] = "closest";
    j["force"] = {{"n_particles", c.force.n_particles},
                  {"batches", c.force.batches},
                  {"h_max", c.force.h_max},
                  {"ensemble_h_max", c.force.ensemble_h_max},
                  {"estimator_grid", grid_to(c.estimator_grid())},
                  {"certificate", cert}};
    j["output"] = {{"directory", c.output_directory}};
    return j.dump(2);
}

WignerGrid ScenarioConfig::estimator_grid() const {
    if (force.estimator_grid) return *force.estimator_grid;
    // finer cells on the same phase-space window
    const int k = d == 1 ? 4 : 1;
    const int nx = (grid.n_x * k + 1) / 2 * 2, np = (grid.n_p * k + 1) / 2 * 2;
    return WignerGrid{d, nx, grid.x_min, grid.x_max, grid.coherence_length * double(np) / grid.n_p, np};
}

int ScenarioConfig::output_every() const { return int(std::lround(output_interval / dt)); }
int ScenarioConfig::output_count() const { return int(std::lround(T / output_interval)); }

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& m) { throw SchemaError(m); };
    try {
        if (name.empty()) fail("name: must not be empty");
        if (name.find_first_of("/\\ ") != std::string::npos) fail("name: must not contain '/', '\\' or spaces");
        if (d != 1 && d != 2) fail("d: must be 1 or 2");
        units.validate();
        if (!interaction.is_coulomb()) fail("interaction: kind must be coulomb3d or coulomb2d");
        interaction.validate(d);
        if (grid.d != d) fail("grid: dimension differs from d");
        grid.validate();
        if (grid_1e) {
            if (grid_1e->d != d) fail("grid_1e: dimension differs from d");
            grid_1e->validate();
        }
        for (const auto& p : packets) p.validate(d);
        fields.validate(d);
        if (runs(ModelChoice::full2e) && d != 1)
            fail(fmt::format("model: {} includes the full two-electron solver, which needs d = 1", to_string(model)));

        // separation and aim
        double sep2 = 0.0, s1 = 0.0, s2 = 0.0;
        for (int a = 0; a < d; ++a) {
            const double dr = packets[0].center_r[a] - packets[1].center_r[a];
            sep2 += dr * dr;
            s1 = std::max(s1, packets[0].sigma[a]);
            s2 = std::max(s2, packets[1].sigma[a]);
        }
        if (std::sqrt(sep2) < 4.0 * (s1 + s2) * (1.0 - 1e-12))
            fail(fmt::format("packets: centres {:.6g} apart, at least 4 (sigma1 + sigma2) = {:.6g} required",
                             std::sqrt(sep2), 4.0 * (s1 + s2)));
        if (d == 2) {
            const double rx = packets[0].center_r[0] - packets[1].center_r[0];
            const double ry = packets[0].center_r[1] - packets[1].center_r[1];
            const double vx = packets[0].center_p[0] - packets[1].center_p[0];
            const double vy = packets[0].center_p[1] - packets[1].center_p[1];
            const double v = std::hypot(vx, vy);
            if (v > 0.0 && std::abs(rx * vy - ry * vx) / v <= 1e-9 * std::sqrt(sep2))
                fail("packets: head-on aim; a nonzero impact parameter is required for d = 2");
        }

        if (!(T > 0.0) || !std::isfinite(T)) fail("horizon.T: must be positive");
        if (!(dt > 0.0) || !std::isfinite(dt)) fail("solver.dt: must be positive");
        if (!(output_interval > 0.0) || output_interval > T * (1.0 + 1e-12))
            fail("horizon.output_interval: must be in (0, T]");
        if (!is_multiple(T, output_interval)) fail("horizon: T must be a multiple of output_interval");
        if (!is_multiple(output_interval, dt)) fail("horizon: output_interval must be a multiple of solver.dt");
        for (double ts : snapshot_times)
            if (ts < 0.0 || ts > T * (1.0 + 1e-12) || !is_multiple(ts, output_interval))
                fail(fmt::format("horizon.snapshot_times: {} is not an output time in [0, T]", ts));
        if (refresh_every < 1) fail("solver.refresh_every: must be >= 1");
        if (!(edge_tolerance > 0.0)) fail("solver.edge_tolerance: must be positive");

        const auto& f = force;
        if (f.batches < 8) fail("force.batches: must be >= 8");
        if (f.n_particles < std::size_t(f.batches)) fail("force.n_particles: must be at least force.batches");
        if (!(f.h_max > 0.0) || !(f.ensemble_h_max > 0.0)) fail("force: step sizes must be positive");
        const WignerGrid eg = estimator_grid();
        if (eg.d != d) fail("force.estimator_grid: dimension differs from d");
        eg.validate();
        if (eg.n_x % 2 || eg.n_p % 2) fail("force.estimator_grid: n_x and n_p must be even");
        if (f.certificate.enabled) {
            if (f.certificate.t && !(*f.certificate.t >= 0.0)) fail("force.certificate.t: must be >= 0");
            ProbeSet{f.certificate.points_per_axis, f.certificate.half_width, {}}.validate(d);
        }

        // the initial states must fit their grids
        if (runs(ModelChoice::full2e) || (runs(ModelChoice::force) && d == 1))
            for (const auto& p : packets) make_gaussian_state(p, grid);
        if (runs(ModelChoice::bbgky))
            for (const auto& p : packets) make_gaussian_state(p, one_electron_grid());
        if (runs(ModelChoice::bbgky) && fields.potential.kind != PotentialKind::none)
            fields.potential.validate(d);
    } catch (const SchemaError&) {
        throw;
    } catch (const ValidationError& e) {
        throw SchemaError(e.what());
    }
}

ScenarioConfig load_scenario(const std::string& path_or_name) {
    std::ifstream in(path_or_name);
    if (in) {
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_scenario(ss.str());
    }
    for (const auto& [name, text] : bundled())
        if (name == path_or_name) return parse_scenario(text);
    throw SchemaError(fmt::format("cannot read '{}' and no bundled scenario has that name", path_or_name));
}

std::vector<std::string> list_scenarios() {
    std::vector<std::string> names;
    for (const auto& [name, text] : bundled()) names.push_back(name);
    return names;
}

const std::string& bundled_scenario(const std::string& name) {
    for (const auto& [n, text] : bundled())
        if (n == name) return text;
    throw SchemaError(fmt::format("no bundled scenario named '{}'", name));
}

namespace {

std::size_t max_cells() { return default_max_cells(); }

void check_costs(const ScenarioConfig& c) {
    const std::size_t cap = max_cells();
    auto pow = [](std::size_t b, int e) {
        std::size_t r = 1;
        for (int k = 0; k < e; ++k) r *= b;
        return r;
    };
    if (c.runs(ModelChoice::full2e)) {
        SolverConfig2e sc;
        sc.max_cells = cap;
        check_cost_2e(c.grid, sc);
    }
    if (c.runs(ModelChoice::bbgky)) {
        const auto& g = c.one_electron_grid();
        const std::size_t table = pow(std::size_t(2 * g.n_x - 1), g.d) * pow(std::size_t(2 * g.n_p - 1), g.d);
        if (table > cap)
            throw CostGuardError(fmt::format("bbgky: pair kernel table of {} entries exceeds the cap of {} "
                                             "(WIGNER2E_MAX_CELLS)", table, cap));
    }
    if (c.runs(ModelChoice::force)) {
        const auto eg = c.estimator_grid();
        const std::size_t cells = pow(std::size_t(eg.n_x) * eg.n_p, eg.d);
        if (cells > cap)
            throw CostGuardError(fmt::format("force: estimator grid of {} cells exceeds the cap of {} "
                                             "(WIGNER2E_MAX_CELLS)", cells, cap));
        if (c.force.n_particles > cap)
            throw CostGuardError(fmt::format("force: {} particles exceed the cap of {} (WIGNER2E_MAX_CELLS)",
                                             c.force.n_particles, cap));
        if (c.d == 1) {
            const std::size_t pair = pow(std::size_t(c.grid.n_x) * c.grid.n_p, 2);
            if (pair > cap)
                throw CostGuardError(fmt::format("force: pair grid of {} cells exceeds the cap of {} "
                                                 "(WIGNER2E_MAX_CELLS)", pair, cap));
        }
    }
}

PotentialKernel external_kernel(const ScenarioConfig& c, const WignerGrid& g) {
    if (c.fields.potential.kind == PotentialKind::none) return PotentialKernel::zero(g);
    return wigner_kernel_1e(c.fields.potential, g);
}

// Per-model results kept for the comparison table.
struct ModelRun {
    std::string name;
    ObservableSeries series;
    bool ran = false;
    std::string failure;
    // electron-1 marginal on the scenario grid at every output time (d = 1)
    std::vector<WignerState> marginals;
    json info = json::object();
};

class Writer {
public:
    Writer(std::filesystem::path dir, RunResult& res) : dir_(std::move(dir)), res_(res) {}
    template <class F>
    void write(const std::string& name, F&& body) {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os) throw std::runtime_error(fmt::format("cannot write {}", (dir_ / name).string()));
        body(os);
        res_.artifacts.push_back(name);
    }

private:
    std::filesystem::path dir_;
    RunResult& res_;
};

void write_series(Writer& w, const std::string& model, const ObservableSeries& s, json& columns) {
    const std::string file = "series_" + model + ".csv";
    w.write(file, [&](std::ostream& os) { s.write_csv(os); });
    columns[file] = s.columns();
}

std::vector<double> output_times(const ScenarioConfig& c) {
    std::vector<double> t;
    const int n = c.output_count();
    for (int k = 0; k <= n; ++k) t.push_back(c.T * k / n);
    return t;
}

bool is_snapshot(const ScenarioConfig& c, double t) {
    for (double ts : c.snapshot_times)
        if (std::abs(ts - t) <= 1e-9 * std::max(1.0, c.T)) return true;
    return false;
}

void run_full2e(const ScenarioConfig& c, bool keep, Writer& w, ModelRun& m, json& columns) {
    const auto& g = c.grid;
    const auto f0 = tensor_product(make_gaussian_state(c.packets[0], g), make_gaussian_state(c.packets[1], g));
    Kernels2e K{external_kernel(c, g), external_kernel(c, g), coulomb_kernel_2e(c.units, c.interaction, g)};
    SolverConfig2e sc;
    sc.dt = c.dt;
    sc.interpolation = c.interpolation;
    sc.edge_tolerance = c.edge_tolerance;
    ObservableSeries shadow(pair_observable_columns());
    auto on_record = [&](const WignerState& f) {
        shadow.add(pair_observables(f, std::nan(""), edge_mass(f)));
        if (keep) m.marginals.push_back(marginal(f, 1));
    };
    Evolution2e ev;
    m.ran = true;
    try {
        ev = evolve_2e(f0, c.T, K, sc, c.output_every(), c.snapshot_times, on_record);
    } catch (const DomainError& e) {
        m.failure = e.what();
        m.series = shadow;
        write_series(w, m.name, m.series, columns);
        return;
    }
    m.failure = ev.failure;
    m.series = ev.series;
    write_series(w, m.name, m.series, columns);
    for (const auto& f : ev.snapshots) {
        const std::string t = file_time(f.time());
        w.write("snapshot_full2e_t" + t + "_position.csv", [&](std::ostream& os) { write_pair_density_csv(f, false, os); });
        w.write("snapshot_full2e_t" + t + "_momentum.csv", [&](std::ostream& os) { write_pair_density_csv(f, true, os); });
        w.write("snapshot_full2e_t" + t + "_e1.csv", [&](std::ostream& os) { write_state_csv(marginal(f, 1), os); });
        w.write("snapshot_full2e_t" + t + "_e2.csv", [&](std::ostream& os) { write_state_csv(marginal(f, 2), os); });
    }
}

void run_bbgky(const ScenarioConfig& c, bool keep, Writer& w, ModelRun& m, json& columns) {
    const auto& g = c.one_electron_grid();
    BbgkyConfig cfg;
    cfg.units = c.units;
    cfg.interaction = c.interaction;
    cfg.fields1 = cfg.fields2 = c.fields;
    cfg.fields1.potential = cfg.fields2.potential = PotentialSpec::none();
    if (c.fields.potential.kind != PotentialKind::none) cfg.ext1 = cfg.ext2 = wigner_kernel_1e(c.fields.potential, g);
    cfg.refresh_every = c.refresh_every;
    SolverConfig1e sc;
    sc.dt = c.dt;
    sc.interpolation = c.interpolation;
    sc.edge_tolerance = c.edge_tolerance;
    const CoupledState s0{make_gaussian_state(c.packets[0], g), make_gaussian_state(c.packets[1], g), 0.0};
    std::vector<double> snaps = c.snapshot_times;
    if (keep) snaps = output_times(c);
    m.ran = true;
    EvolutionBbgky ev;
    try {
        ev = evolve_bbgky(s0, c.T, cfg, sc, c.output_every(), snaps);
    } catch (const DomainError& e) {
        m.failure = e.what();
        return;
    }
    m.failure = ev.failure;
    m.series = ev.series;
    write_series(w, m.name, m.series, columns);
    for (const auto& s : ev.snapshots) {
        if (keep) m.marginals.push_back(restrict_to_grid(s.f1, c.grid));
        if (!is_snapshot(c, s.time)) continue;
        const std::string t = file_time(s.time);
        w.write("snapshot_bbgky_t" + t + "_e1.csv", [&](std::ostream& os) { write_state_csv(s.f1, os); });
        w.write("snapshot_bbgky_t" + t + "_e2.csv", [&](std::ostream& os) { write_state_csv(s.f2, os); });
    }
}

ForceModelConfig force_config(const ScenarioConfig& c, double h) {
    ForceModelConfig f;
    f.system.d = c.d;
    f.system.units = c.units;
    f.system.interaction = c.interaction;
    f.system.fields = c.fields;
    f.h_max = h;
    return f;
}

void run_force(const ScenarioConfig& c, bool keep, Writer& w, ModelRun& m, json& columns) {
    const auto& p1 = c.packets[0];
    const auto& p2 = c.packets[1];
    const ForceModelConfig ens = force_config(c, c.force.ensemble_h_max);
    EnsembleConfig ec;
    ec.n_particles = c.force.n_particles;
    ec.seed = c.seed;
    ec.grid = c.estimator_grid();
    ec.batches = c.force.batches;
    ec.pair_deposit = false;
    m.ran = true;
    const auto er = forward_ensemble(p1, p2, c.T, ec, ens, c.output_count(), c.snapshot_times);

    // d = 1: separability and snapshots of the pullback evaluated on the scenario grid
    ObservableSeries series(er.series.extra_columns());
    for (auto row : er.series.rows()) {
        if (c.d == 1) {
            WignerState G = force_state_on_grid(p1, p2, row.t, c.grid, ens);
            G *= 1.0 / G.integral();
            row.separability = separability_metric(G);
            if (keep) m.marginals.push_back(marginal(G, 1));
            if (is_snapshot(c, row.t)) {
                const std::string t = file_time(row.t);
                w.write("snapshot_force_t" + t + "_position.csv",
                        [&](std::ostream& os) { write_pair_density_csv(G, false, os); });
                w.write("snapshot_force_t" + t + "_momentum.csv",
                        [&](std::ostream& os) { write_pair_density_csv(G, true, os); });
            }
        }
        series.add(row);
    }
    m.series = series;
    write_series(w, m.name, m.series, columns);
    for (std::size_t k = 0; k < er.snapshots.size(); ++k) {
        const std::string t = file_time(c.snapshot_times[k]);
        w.write("snapshot_force_t" + t + "_e1.csv", [&](std::ostream& os) { write_state_csv(er.snapshots[k].first, os); });
        w.write("snapshot_force_t" + t + "_e2.csv", [&](std::ostream& os) { write_state_csv(er.snapshots[k].second, os); });
    }

    const ForceModelConfig fine = force_config(c, c.force.h_max);
    const auto ca = closest_approach(p1, p2, c.T, fine);
    m.info["closest_approach"] = {{"t", ca.t}, {"distance", ca.distance}};
    if (c.force.certificate.enabled) {
        const double t = c.force.certificate.t ? *c.force.certificate.t : ca.t;
        const ProbeSet probes{c.force.certificate.points_per_axis, c.force.certificate.half_width, {}};
        const auto rep = separability_certificate(p1, p2, t, c.units.coupling_lambda, probes, fine);
        w.write("certificate_force.txt", [&](std::ostream& os) { rep.write(os); });
        m.info["certificate"] = {{"t", rep.t},
                                 {"coulomb_residual", rep.coulomb_residual},
                                 {"control_residual", rep.control_residual},
                                 {"probes", rep.probes},
                                 {"expansion_ratio", rep.expansion_ratio}};
    }
}

std::vector<std::string> comparison_columns() {
    return {"t",
            "purity1_full2e",
            "purity2_full2e",
            "purity1_bbgky",
            "purity2_bbgky",
            "purity1_force",
            "purity2_force",
            "separability_full2e",
            "separability_bbgky",
            "separability_force",
            "distance_full2e_bbgky",
            "distance_full2e_force",
            "distance_bbgky_force"};
}

std::vector<std::vector<double>> comparison_rows(const ScenarioConfig& c, const ModelRun& full, const ModelRun& bb,
                                                 const ModelRun& fo) {
    const auto times = output_times(c);
    const double nan = std::nan("");
    auto col = [&](const ModelRun& m, const char* name, std::size_t k) {
        const auto& rows = m.series.rows();
        if (k >= rows.size()) return nan;
        const auto& r = rows[k];
        if (std::string(name) == "purity1") return r.purity1;
        if (std::string(name) == "purity2") return r.purity2;
        return r.separability;
    };
    auto dist = [&](const ModelRun& a, const ModelRun& b, std::size_t k) {
        if (k >= a.marginals.size() || k >= b.marginals.size()) return nan;
        return model_distance(a.marginals[k], b.marginals[k]);
    };
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < times.size(); ++k) {
        out.push_back({times[k], col(full, "purity1", k), col(full, "purity2", k), col(bb, "purity1", k),
                       col(bb, "purity2", k), col(fo, "purity1", k), col(fo, "purity2", k), col(full, "sep", k),
                       col(bb, "sep", k), col(fo, "sep", k), dist(full, bb, k), dist(full, fo, k), dist(bb, fo, k)});
    }
    return out;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

RunResult run_scenario(ScenarioConfig cfg, const RunOptions& opt) {
    RunResult res;
    if (opt.seed) cfg.seed = *opt.seed;
    if (!opt.output_directory.empty()) cfg.output_directory = opt.output_directory;
    if (cfg.output_directory.empty()) cfg.output_directory = "output/" + cfg.name;
    try {
        if (opt.threads < 1) throw SchemaError("threads: must be >= 1");
        cfg.validate();
    } catch (const ValidationError& e) {
        res.status = RunStatus::schema;
        res.message = e.what();
        return res;
    }
    try {
        check_costs(cfg);
    } catch (const CostGuardError& e) {
        res.status = RunStatus::cost_guard;
        res.message = e.what();
        if (res.message.find("WIGNER2E_MAX_CELLS") == std::string::npos)
            res.message += " (cap set by WIGNER2E_MAX_CELLS)";
        return res;
    }
    set_worker_count(opt.threads);
    res.directory = cfg.output_directory;
    std::filesystem::create_directories(res.directory);
    Writer w(res.directory, res);
    json columns = json::object();

    const bool keep = cfg.model == ModelChoice::all;
    ModelRun full, bb, fo;
    full.name = "full2e";
    bb.name = "bbgky";
    fo.name = "force";
    std::vector<ModelRun*> runs;
    if (cfg.runs(ModelChoice::full2e)) runs.push_back(&full);
    if (cfg.runs(ModelChoice::bbgky)) runs.push_back(&bb);
    if (cfg.runs(ModelChoice::force)) runs.push_back(&fo);
    for (ModelRun* m : runs) {
        try {
            if (m == &full) run_full2e(cfg, keep, w, *m, columns);
            if (m == &bb) run_bbgky(cfg, keep, w, *m, columns);
            if (m == &fo) run_force(cfg, keep, w, *m, columns);
        } catch (const NumericalGuardError& e) {
            m->failure = e.what();
        } catch (const DomainError& e) {
            m->failure = e.what();
        }
        if (!m->failure.empty()) {
            res.status = RunStatus::numerical_guard;
            if (!res.message.empty()) res.message += "; ";
            res.message += m->name + ": " + m->failure;
        }
        res.series.emplace_back(m->name, m->series);
    }

    if (keep) {
        res.comparison_columns = comparison_columns();
        res.comparison_rows = comparison_rows(cfg, full, bb, fo);
        w.write("comparison.csv", [&](std::ostream& os) {
            const auto& cols = res.comparison_columns;
            for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
            os << '\n';
            for (const auto& row : res.comparison_rows) {
                os << fmt::format("{:.10g}", row[0]);
                for (std::size_t k = 1; k < row.size(); ++k) os << fmt::format(",{:.15e}", row[k]);
                os << '\n';
            }
        });
        columns["comparison.csv"] = res.comparison_columns;
    }

    nlohmann::ordered_json manifest;
    manifest["schema_version"] = 1;
    manifest["program"] = "wigner2e";
    manifest["version"] = WIGNER2E_VERSION;
    manifest["created_utc"] = utc_now();
    manifest["csv_format_version"] = kCsvFormatVersion;
    manifest["seed"] = cfg.seed;
    manifest["status"] = res.status == RunStatus::ok ? "ok" : "numerical_guard";
    manifest["exit_code"] = res.exit_code();
    manifest["partial"] = res.status != RunStatus::ok;
    if (!res.message.empty()) manifest["message"] = res.message;
    manifest["config"] = nlohmann::ordered_json::parse(scenario_to_json(cfg));
    manifest["libraries"] = {
        {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
        {"boost", fmt::format("{}.{}.{}", BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100)},
        {"fmt", fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100, FMT_VERSION % 100)},
        {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                      NLOHMANN_JSON_VERSION_PATCH)}};
    nlohmann::ordered_json models = nlohmann::ordered_json::object();
    for (const ModelRun* m : runs) {
        nlohmann::ordered_json e = m->info;
        e["status"] = m->failure.empty() ? "ok" : "failed";
        e["partial"] = !m->failure.empty();
        if (!m->failure.empty()) e["failure"] = m->failure;
        e["rows"] = m->series.size();
        models[m->name] = e;
    }
    manifest["models"] = models;
    manifest["csv_columns"] = columns;
    auto artifacts = res.artifacts;
    artifacts.push_back("manifest.json");
    manifest["artifacts"] = artifacts;
    w.write("manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    return res;
}

}  // namespace wigner2e
