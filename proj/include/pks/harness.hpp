#pragma once

// Run configuration, scenario presets, parameter sweeps and on-disk outputs.
//
// A run is described by one JSON document:
//
//   {
//     "grid":         {"nx": 64, "ny": 257, "Ly": 8},
//     "model":        {"A": 1e4, "epsilon": 1, "shear": {"name": "couette", "a": 0, "coefficients": []}},
//     "initial_data": {"preset": "gaussian_blob", "mass": 37.7, "sigma": 0.5, "center": [0, 0],
//                      "chemical": {"name": "equilibrium_zero_mode", "q": 1.0}},
//     "time":         {"t_end": 10, "dt_init": 1e-2, "dt_min": 1e-7, "dt_max": 0.1, "cfl": 0.75, ...},
//     "hypo":         {"eps_alpha": 0.01, "eps_beta": 0.003, "eps_gamma": 0.01, "k_report": 4},
//     "output":       {"directory": "out", "stride": 100, "formats": ["csv"], "checkpoint": false},
//     "mode":         "pks"
//   }
//
// Only model.A is required. model.A = 0 selects the flowless reference: the
// shear is replaced by u = 0 and time keeps the A = 1 scaling.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pks/errors.hpp"
#include "pks/grid.hpp"
#include "pks/hypocoercivity.hpp"
#include "pks/integrator.hpp"
#include "pks/model.hpp"
#include "pks/monitors.hpp"

namespace pks {

using Json = nlohmann::json;

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr std::string_view kEnvOverridePrefix = "PKS_SET_";
inline constexpr double kCriticalMass = 8.0 * std::numbers::pi;

struct GridConfig {
    int nx = 64;
    int ny = 257;
    double Ly = 8.0;
};

struct ShearConfig {
    std::string name = "couette";
    double a = 0.0;
    std::vector<double> coefficients;
    double derivative_cap = 1e3;
};

struct ModelConfig {
    double A = 0.0;
    int epsilon = 1;
    ShearConfig shear;
    std::optional<double> mass_target;
};

inline constexpr std::array<std::string_view, 4> kChemicalNames = {"zero_chemical", "equilibrium",
                                                                   "equilibrium_zero_mode", "scaled_chemical"};
inline constexpr std::array<std::string_view, 2> kInitialPresets = {"gaussian_blob", "single_mode"};
inline constexpr std::array<std::string_view, 4> kScenarioNames = {"blowup_noflow", "suppression",
                                                                   "passive_scalar_ed", "elliptic_comparison"};

struct ChemicalConfig {
    std::string name = "zero_chemical";
    double q = 1.0;  // scaled_chemical: (c_in)_neq = A^{-q} (c_eq)_neq
};

struct InitialDataConfig {
    std::string preset = "gaussian_blob";
    // gaussian_blob: mass / (2 pi sigma^2) exp(-|x - center|^2 / (2 sigma^2)), periodized in x
    double mass = 1.5 * kCriticalMass;
    double sigma = 0.5;
    std::array<double, 2> center{0.0, 0.0};
    // single_mode: amplitude cos(k (x - center_x)) exp(-(y - center_y)^2 / (2 width^2))
    int k = 1;
    double amplitude = 1.0;
    double width = 1.0;
    ChemicalConfig chemical;
};

struct RunConfig {
    GridConfig grid;
    ModelConfig model;
    InitialDataConfig initial_data;
    StepConfig time;
    std::optional<double> t_end_scaled;  // t_end = t_end_scaled * A^{1/3} when set
    HypoEpsilons eps;
    int k_report = 4;
    std::string output_directory;
    std::vector<std::string> formats{"csv"};
    bool checkpoint = false;
    RunMode mode = RunMode::pks;

    bool flowless() const { return model.A == 0.0 || model.shear.name == "zero"; }
    /// A used by the equations; the flowless reference keeps the A = 1 scaling.
    double effective_A() const { return model.A == 0.0 ? 1.0 : model.A; }
    double resolved_t_end() const {
        return t_end_scaled ? *t_end_scaled * std::cbrt(effective_A()) : time.t_end;
    }
};

// ---------------------------------------------------------------------------
// JSON <-> RunConfig

namespace detail {

inline std::string join(std::span<const std::string_view> names) {
    std::string out;
    for (auto n : names) {
        if (!out.empty()) out += ", ";
        out += n;
    }
    return out;
}

inline void reject_unknown(const Json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
    if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError("unknown key '" + std::string(where) + "." + key + "'");
        }
    }
}

template <class T>
void read(const Json& obj, std::string_view where, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("key '" + std::string(where) + "." + key + "' has the wrong type");
    }
}

template <class T>
void read_optional(const Json& obj, std::string_view where, const char* key, std::optional<T>& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return;
    T v{};
    read(obj, where, key, v);
    out = v;
}

inline bool contains_name(std::span<const std::string_view> names, std::string_view v) {
    return std::find(names.begin(), names.end(), v) != names.end();
}

}  // namespace detail

inline Json to_json(const RunConfig& c) {
    const auto& id = c.initial_data;
    Json shear{{"name", c.model.shear.name},
               {"a", c.model.shear.a},
               {"coefficients", c.model.shear.coefficients},
               {"derivative_cap", c.model.shear.derivative_cap}};
    Json model{{"A", c.model.A}, {"epsilon", c.model.epsilon}, {"shear", shear}};
    model["mass_target"] = c.model.mass_target ? Json(*c.model.mass_target) : Json(nullptr);
    Json initial{{"preset", id.preset},
                 {"mass", id.mass},
                 {"sigma", id.sigma},
                 {"center", id.center},
                 {"k", id.k},
                 {"amplitude", id.amplitude},
                 {"width", id.width},
                 {"chemical", {{"name", id.chemical.name}, {"q", id.chemical.q}}}};
    Json time{{"t_end", c.resolved_t_end()},
              {"dt_init", c.time.dt_init},
              {"dt_min", c.time.dt_min},
              {"dt_max", c.time.dt_max},
              {"cfl", c.time.cfl},
              {"blowup_factor", c.time.blowup_factor},
              {"negativity_tol", c.time.negativity_tol}};
    time["t_end_scaled"] = c.t_end_scaled ? Json(*c.t_end_scaled) : Json(nullptr);
    return Json{{"grid", {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"Ly", c.grid.Ly}}},
                {"model", model},
                {"initial_data", initial},
                {"time", time},
                {"hypo",
                 {{"eps_alpha", c.eps.alpha},
                  {"eps_beta", c.eps.beta},
                  {"eps_gamma", c.eps.gamma},
                  {"k_report", c.k_report}}},
                {"output",
                 {{"directory", c.output_directory},
                  {"stride", c.time.output_stride},
                  {"formats", c.formats},
                  {"checkpoint", c.checkpoint}}},
                {"mode", c.mode == RunMode::pks ? "pks" : "passive_scalar"}};
}

inline void validate(const RunConfig& c) {
    const Grid g(c.grid.nx, c.grid.ny, c.grid.Ly);
    if (!(c.model.A >= 0.0) || !std::isfinite(c.model.A)) throw ConfigError("model.A must be >= 0 (0 = no flow)");
    ModelParams{c.effective_A(), c.model.epsilon, c.model.mass_target}.validate();
    const ShearKind kind = parse_shear_kind(c.model.shear.name);
    if (!c.flowless()) {
        build_shear(kind, {c.model.shear.a, c.model.shear.coefficients, c.model.shear.derivative_cap}, g);
    }
    const auto& id = c.initial_data;
    if (!detail::contains_name(kInitialPresets, id.preset)) {
        throw ConfigError("unknown initial_data.preset '" + id.preset +
                          "'; valid presets: " + detail::join(kInitialPresets));
    }
    if (id.preset == "gaussian_blob") {
        if (!(id.mass > 0.0)) throw ConfigError("initial_data.mass must be positive");
        if (!(id.sigma > 0.0)) throw ConfigError("initial_data.sigma must be positive");
    } else {
        if (id.k < 1 || id.k > g.dealias_kmax()) {
            throw ConfigError("initial_data.k must lie in 1.." + std::to_string(g.dealias_kmax()));
        }
        if (!(id.width > 0.0)) throw ConfigError("initial_data.width must be positive");
    }
    if (!detail::contains_name(kChemicalNames, id.chemical.name)) {
        throw ConfigError("unknown initial_data.chemical.name '" + id.chemical.name +
                          "'; valid names: " + detail::join(kChemicalNames));
    }
    if (id.chemical.name == "scaled_chemical" && !(id.chemical.q > 0.5)) {
        throw ConfigError("initial_data.chemical.q must satisfy q > 1/2, got " + std::to_string(id.chemical.q));
    }
    if (c.t_end_scaled && !(*c.t_end_scaled > 0.0)) throw ConfigError("time.t_end_scaled must be positive");
    StepConfig resolved = c.time;
    resolved.t_end = c.resolved_t_end();
    resolved.validate();
    c.eps.validate();
    if (c.k_report < 0) throw ConfigError("hypo.k_report must be >= 0");
    for (const auto& f : c.formats) {
        if (f != "csv" && f != "json") throw ConfigError("unknown output format '" + f + "'; valid: csv, json");
    }
}

inline RunConfig config_from_json(const Json& j) {
    using detail::read;
    detail::reject_unknown(j, "config", {"grid", "model", "initial_data", "time", "hypo", "output", "mode"});
    RunConfig c;
    if (j.contains("grid")) {
        const Json& g = j.at("grid");
        detail::reject_unknown(g, "grid", {"nx", "ny", "Ly"});
        read(g, "grid", "nx", c.grid.nx);
        read(g, "grid", "ny", c.grid.ny);
        read(g, "grid", "Ly", c.grid.Ly);
    }
    if (!j.contains("model") || !j.at("model").contains("A")) {
        throw ConfigError("missing required key 'model.A'");
    }
    {
        const Json& m = j.at("model");
        detail::reject_unknown(m, "model", {"A", "epsilon", "shear", "mass_target"});
        read(m, "model", "A", c.model.A);
        read(m, "model", "epsilon", c.model.epsilon);
        detail::read_optional(m, "model", "mass_target", c.model.mass_target);
        if (m.contains("shear")) {
            const Json& s = m.at("shear");
            if (s.is_string()) {
                c.model.shear.name = s.get<std::string>();
            } else {
                detail::reject_unknown(s, "model.shear", {"name", "a", "coefficients", "derivative_cap"});
                read(s, "model.shear", "name", c.model.shear.name);
                read(s, "model.shear", "a", c.model.shear.a);
                read(s, "model.shear", "coefficients", c.model.shear.coefficients);
                read(s, "model.shear", "derivative_cap", c.model.shear.derivative_cap);
            }
        }
    }
    if (j.contains("initial_data")) {
        const Json& d = j.at("initial_data");
        auto& id = c.initial_data;
        detail::reject_unknown(d, "initial_data",
                               {"preset", "mass", "sigma", "center", "k", "amplitude", "width", "chemical"});
        read(d, "initial_data", "preset", id.preset);
        read(d, "initial_data", "mass", id.mass);
        read(d, "initial_data", "sigma", id.sigma);
        read(d, "initial_data", "center", id.center);
        read(d, "initial_data", "k", id.k);
        read(d, "initial_data", "amplitude", id.amplitude);
        read(d, "initial_data", "width", id.width);
        if (d.contains("chemical")) {
            const Json& ch = d.at("chemical");
            if (ch.is_string()) {
                id.chemical.name = ch.get<std::string>();
            } else {
                detail::reject_unknown(ch, "initial_data.chemical", {"name", "q"});
                read(ch, "initial_data.chemical", "name", id.chemical.name);
                read(ch, "initial_data.chemical", "q", id.chemical.q);
            }
        }
    }
    if (j.contains("time")) {
        const Json& t = j.at("time");
        detail::reject_unknown(t, "time",
                               {"t_end", "t_end_scaled", "dt_init", "dt_min", "dt_max", "cfl", "blowup_factor",
                                "negativity_tol"});
        read(t, "time", "t_end", c.time.t_end);
        detail::read_optional(t, "time", "t_end_scaled", c.t_end_scaled);
        read(t, "time", "dt_init", c.time.dt_init);
        read(t, "time", "dt_min", c.time.dt_min);
        read(t, "time", "dt_max", c.time.dt_max);
        read(t, "time", "cfl", c.time.cfl);
        read(t, "time", "blowup_factor", c.time.blowup_factor);
        read(t, "time", "negativity_tol", c.time.negativity_tol);
    }
    if (j.contains("hypo")) {
        const Json& h = j.at("hypo");
        detail::reject_unknown(h, "hypo", {"eps_alpha", "eps_beta", "eps_gamma", "k_report"});
        read(h, "hypo", "eps_alpha", c.eps.alpha);
        read(h, "hypo", "eps_beta", c.eps.beta);
        read(h, "hypo", "eps_gamma", c.eps.gamma);
        read(h, "hypo", "k_report", c.k_report);
    }
    if (j.contains("output")) {
        const Json& o = j.at("output");
        detail::reject_unknown(o, "output", {"directory", "stride", "formats", "checkpoint"});
        read(o, "output", "directory", c.output_directory);
        read(o, "output", "stride", c.time.output_stride);
        read(o, "output", "formats", c.formats);
        read(o, "output", "checkpoint", c.checkpoint);
    }
    if (j.contains("mode")) {
        std::string mode;
        read(j, "config", "mode", mode);
        if (mode == "pks") {
            c.mode = RunMode::pks;
        } else if (mode == "passive_scalar") {
            c.mode = RunMode::passive_scalar;
        } else {
            throw ConfigError("unknown mode '" + mode + "'; valid: pks, passive_scalar");
        }
    }
    validate(c);
    return c;
}

// ---------------------------------------------------------------------------
// Overrides: "a.b.c=value" from --set and PKS_SET_a__b__c=value from the environment.

/// Values are parsed as JSON when possible and taken as strings otherwise.
inline void apply_override(Json& doc, std::string_view path, std::string_view value) {
    if (path.empty()) throw ConfigError("empty override path");
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key(path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (key.empty()) throw ConfigError("malformed override path '" + std::string(path) + "'");
        if (!node->is_object()) {
            if (!node->is_null()) *node = Json::object();
        }
        if (dot == std::string_view::npos) {
            Json parsed = Json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? Json(std::string(value)) : parsed;
            return;
        }
        node = &(*node)[key];
        if (node->is_string()) {
            // "shear": "couette" widened to {"name": "couette"} when a sub-key is set
            *node = Json{{"name", node->get<std::string>()}};
        }
        start = dot + 1;
    }
}

inline std::pair<std::string, std::string> split_assignment(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(kv) + "' must have the form key=value");
    }
    return {std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1))};
}

/// PKS_SET_time__t_end=5 -> ("time.t_end", "5"), sorted by path.
inline std::vector<std::pair<std::string, std::string>> env_overrides(char** envp) {
    std::vector<std::pair<std::string, std::string>> out;
    if (envp == nullptr) return out;
    for (char** e = envp; *e != nullptr; ++e) {
        std::string_view entry(*e);
        if (!entry.starts_with(kEnvOverridePrefix)) continue;
        auto [name, value] = split_assignment(entry.substr(kEnvOverridePrefix.size()));
        std::string path;
        for (std::size_t i = 0; i < name.size(); ++i) {
            if (name[i] == '_' && i + 1 < name.size() && name[i + 1] == '_') {
                path += '.';
                ++i;
            } else {
                path += name[i];
            }
        }
        out.emplace_back(path, value);
    }
    std::sort(out.begin(), out.end());
    return out;
}

using Overrides = std::vector<std::pair<std::string, std::string>>;

inline RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {}) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path.string());
    Json doc = Json::parse(is, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
    for (const auto& [k, v] : overrides) apply_override(doc, k, v);
    return config_from_json(doc);
}

/// FNV-1a over the resolved config, ignoring the output section and the end
/// time so a checkpoint can be continued to a later t_end.
inline std::uint64_t config_hash(const RunConfig& c) {
    Json j = to_json(c);
    j.erase("output");
    j["time"].erase("t_end");
    j["time"].erase("t_end_scaled");
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Initial data

inline ModelParams model_params(const RunConfig& c) {
    return {c.effective_A(), c.model.epsilon, c.model.mass_target};
}

inline ShearProfile shear_profile(const RunConfig& c, const Grid& g) {
    if (c.flowless()) return build_shear(ShearKind::zero, {}, g);
    return build_shear(parse_shear_kind(c.model.shear.name),
                       {c.model.shear.a, c.model.shear.coefficients, c.model.shear.derivative_cap}, g);
}

inline Field initial_density(const RunConfig& c, const Grid& g) {
    const auto& id = c.initial_data;
    const double x0 = id.center[0];
    const double y0 = id.center[1];
    Field n(g);
    if (id.preset == "gaussian_blob") {
        const double s2 = id.sigma * id.sigma;
        n = Field::from_function(g, [&](double x, double y) {
            double v = 0.0;
            for (int m = -2; m <= 2; ++m) {
                const double dx = x - x0 + 2.0 * std::numbers::pi * m;
                v += std::exp(-(dx * dx + (y - y0) * (y - y0)) / (2.0 * s2));
            }
            return v;
        });
        const double target = c.model.mass_target.value_or(id.mass);
        const double scale = target / integrate(n);
        for (double& v : n.values()) v *= scale;
    } else {
        const double w2 = id.width * id.width;
        n = Field::from_function(g, [&](double x, double y) {
            return id.amplitude * std::cos(id.k * (x - x0)) * std::exp(-(y - y0) * (y - y0) / (2.0 * w2));
        });
    }
    return n;
}

inline Field initial_chemical(const RunConfig& c, const Field& n) {
    const Grid& g = n.grid();
    const std::string& name = c.initial_data.chemical.name;
    if (name == "zero_chemical" || c.mode == RunMode::passive_scalar) return Field(g);
    SpectralField c_hat = chem_elliptic_solve(to_spectral(n));
    if (name == "equilibrium_zero_mode" || name == "scaled_chemical") {
        const double factor =
            name == "scaled_chemical" ? std::pow(c.effective_A(), -c.initial_data.chemical.q) : 0.0;
        for (int k = 1; k < g.nk(); ++k) {
            for (auto& v : c_hat.profile(k)) v *= factor;
        }
    }
    return to_physical(c_hat);
}

inline PKSState initial_state(const RunConfig& c) {
    const Grid g(c.grid.nx, c.grid.ny, c.grid.Ly);
    Field n = initial_density(c, g);
    Field ch = initial_chemical(c, n);
    return {0.0, std::move(n), std::move(ch)};
}

// ---------------------------------------------------------------------------
// Records on disk

inline std::vector<std::string> csv_columns(int k_report) {
    std::vector<std::string> cols = {"t",       "dt",      "mass",   "n_linf",         "n0_l2",
                                     "n0_h1",   "nneq_l2", "gradc_neq_l2", "gradc_neq_linf", "dyc0_linf",
                                     "F_total", "F_n",     "F_dyc",  "F_dxc",          "F_Akc"};
    for (int k = 1; k <= k_report; ++k) cols.push_back("phi_k" + std::to_string(k));
    for (const char* c : {"h1_accum", "nash_ratio", "hk_ratio", "blowup_flag"}) cols.emplace_back(c);
    return cols;
}

namespace detail {
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

inline void write_csv(std::ostream& os, std::span<const MonitorRecord> records, int k_report) {
    const auto cols = csv_columns(k_report);
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : records) {
        std::vector<double> v = {r.t,     r.dt,      r.mass,         r.n_linf,         r.n0_l2,
                                 r.n0_h1, r.nneq_l2, r.gradc_neq_l2, r.gradc_neq_linf, r.dyc0_linf,
                                 r.F_total, r.F_n,   r.F_dyc,        r.F_dxc,          r.F_Akc};
        for (int k = 0; k < k_report; ++k) {
            v.push_back(static_cast<std::size_t>(k) < r.phi_per_k.size() ? r.phi_per_k[static_cast<std::size_t>(k)]
                                                                         : 0.0);
        }
        v.push_back(r.h1_accumulator);
        v.push_back(r.nash_ratio);
        v.push_back(r.heat_kernel_ratio);
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << detail::format_double(v[i]);
        os << ',' << static_cast<int>(r.blowup_flag) << '\n';
    }
}

inline void write_records(std::span<const MonitorRecord> records, const std::filesystem::path& directory,
                          int k_report, const std::string& filename = "records.csv") {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    const auto path = directory / filename;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write records: " + path.string());
    write_csv(os, records, k_report);
    if (!os) throw IoError("failed writing records: " + path.string());
}

/// A parsed records CSV.
struct RecordTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw ConfigError("no column '" + std::string(name) + "' in records");
    }
    /// A column by name; "h2" is derived as nneq_l2^2 + gradc_neq_l2^2.
    std::vector<double> column(std::string_view name) const {
        std::vector<double> out;
        out.reserve(rows.size());
        if (name == "h2") {
            const auto a = index("nneq_l2");
            const auto b = index("gradc_neq_l2");
            for (const auto& r : rows) out.push_back(r[a] * r[a] + r[b] * r[b]);
            return out;
        }
        const auto i = index(name);
        for (const auto& r : rows) out.push_back(r[i]);
        return out;
    }
};

inline RecordTable parse_csv(std::istream& is) {
    RecordTable t;
    std::string line;
    if (!std::getline(is, line)) throw DataError("records CSV is empty");
    std::stringstream header(line);
    for (std::string cell; std::getline(header, cell, ',');) t.columns.push_back(cell);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0') {
                throw DataError("records CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
            row.push_back(v);
        }
        if (row.size() != t.columns.size()) {
            throw DataError("records CSV line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                            " fields, header has " + std::to_string(t.columns.size()));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline RecordTable read_records(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open records: " + path.string());
    return parse_csv(is);
}

// ---------------------------------------------------------------------------
// Running

struct RunResult {
    RunConfig config;
    RunOutcome outcome;
    std::uint64_t hash = 0;
    double wall_seconds = 0.0;
    std::filesystem::path directory;  // empty when nothing was written
};

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline Json run_metadata(const RunResult& r) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    const auto& o = r.outcome;
    Json m{{"version", kVersion},
           {"status", to_string(o.status)},
           {"message", o.message},
           {"t_final", o.final_state.t},
           {"steps", o.final_snapshot ? o.final_snapshot->steps : 0},
           {"records", o.records.size()},
           {"config_hash", hex64(r.hash)},
           {"A_effective", r.config.effective_A()},
           {"time_scaling", "rescaled time; t_original = t / A"},
           {"columns", csv_columns(r.config.k_report)},
           {"wall_seconds", r.wall_seconds},
           {"timestamp", stamp}};
    return m;
}

inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    auto write_json = [&](const std::string& name, const Json& j) {
        const auto path = dir / name;
        std::ofstream os(path, std::ios::trunc);
        if (!os) throw IoError("cannot write " + path.string());
        os << std::setw(2) << j << '\n';
        if (!os) throw IoError("failed writing " + path.string());
    };
    write_json("config.resolved.json", to_json(r.config));
    write_json("metadata.json", run_metadata(r));
    for (const auto& f : r.config.formats) {
        if (f == "csv") write_records(r.outcome.records, dir, r.config.k_report);
        if (f == "json") {
            Json rows = Json::array();
            const auto cols = csv_columns(r.config.k_report);
            std::stringstream ss;
            write_csv(ss, r.outcome.records, r.config.k_report);
            const RecordTable t = parse_csv(ss);
            for (const auto& row : t.rows) {
                Json obj;
                for (std::size_t i = 0; i < cols.size(); ++i) obj[cols[i]] = row[i];
                rows.push_back(obj);
            }
            write_json("records.json", rows);
        }
    }
    if (r.config.checkpoint && r.outcome.final_snapshot) {
        Checkpoint ck{r.config.mode, model_params(r.config), r.hash, *r.outcome.final_snapshot,
                      r.outcome.records.empty() ? MonitorRecord{} : r.outcome.records.back()};
        write_checkpoint(dir / "checkpoint.bin", ck);
    }
}

inline MonitorConfig monitor_config(const RunConfig& c) { return {c.eps, c.k_report, 4.0, 2.0}; }

/// Runs `cfg`, continuing from `resume` when given, and writes outputs when
/// output.directory is set.
inline RunResult execute(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume = std::nullopt) {
    validate(cfg);
    const std::uint64_t hash = config_hash(cfg);
    StepConfig step = cfg.time;
    step.t_end = cfg.resolved_t_end();
    const Grid g(cfg.grid.nx, cfg.grid.ny, cfg.grid.Ly);
    const ShearProfile shear = shear_profile(cfg, g);
    const auto t0 = std::chrono::steady_clock::now();
    auto outcome = [&]() -> RunOutcome {
        if (!resume) return run(initial_state(cfg), shear, model_params(cfg), step, cfg.mode, monitor_config(cfg));
        const Checkpoint ck = read_checkpoint(*resume);
        if (ck.config_hash != hash) {
            throw ConfigError("checkpoint " + resume->string() + " was written by a different configuration");
        }
        if (!ck.snapshot.n_hat.grid().same_shape(g)) throw ConfigError("checkpoint grid does not match config");
        ImexStepper stepper(ck.snapshot, shear, model_params(cfg), cfg.mode);
        return run_from(stepper, step, monitor_config(cfg), ck.carry);
    }();
    RunResult r{cfg, std::move(outcome), hash,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), {}};
    if (!cfg.output_directory.empty()) {
        r.directory = cfg.output_directory;
        write_outputs(r, r.directory);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Scenarios

inline Json scenario_document(std::string_view name) {
    const Json blob{{"preset", "gaussian_blob"},
                    {"mass", 1.5 * kCriticalMass},
                    {"sigma", 0.5},
                    {"center", {0.0, 0.0}}};
    if (name == "blowup_noflow") {
        Json init = blob;
        init["chemical"] = {{"name", "equilibrium"}};
        return {{"model", {{"A", 0.0}, {"epsilon", 1}, {"shear", {{"name", "zero"}}}}},
                {"initial_data", init},
                {"time",
                 {{"t_end", 5.0},
                  {"dt_init", 1e-3},
                  {"dt_max", 1e-3},
                  {"blowup_factor", 10.0},
                  {"negativity_tol", 1e-2}}},
                {"output", {{"stride", 50}}}};
    }
    if (name == "suppression" || name == "elliptic_comparison") {
        Json init = blob;
        init["chemical"] = {{"name", "equilibrium_zero_mode"}};
        return {{"model", {{"A", 1e4}, {"epsilon", name == "suppression" ? 1 : 0}, {"shear", {{"name", "couette"}}}}},
                {"initial_data", init},
                {"time",
                 {{"t_end_scaled", 50.0},
                  {"dt_init", 1e-3},
                  {"dt_max", 0.1},
                  {"blowup_factor", 10.0},
                  {"negativity_tol", 1e-2}}},
                {"output", {{"stride", 200}}}};
    }
    if (name == "passive_scalar_ed") {
        return {{"grid", {{"ny", 1025}}},
                {"model", {{"A", 1e3}, {"epsilon", 1}, {"shear", {{"name", "couette"}}}}},
                {"initial_data",
                 {{"preset", "single_mode"},
                  {"k", 1},
                  {"amplitude", 1.0},
                  {"width", 1.0},
                  {"chemical", {{"name", "zero_chemical"}}}}},
                {"time", {{"t_end_scaled", 2.5}, {"dt_max", 0.1}}},
                {"output", {{"stride", 20}}},
                {"mode", "passive_scalar"}};
    }
    std::vector<std::string_view> names(kScenarioNames.begin(), kScenarioNames.end());
    throw ConfigError("unknown scenario '" + std::string(name) + "'; valid: " + detail::join(names));
}

inline bool sets_flowless(const Overrides& overrides) {
    for (const auto& [k, v] : overrides) {
        if (k == "model.A") {
            const Json parsed = Json::parse(v, nullptr, false);
            if (parsed.is_number() && parsed.get<double>() == 0.0) return true;
        }
    }
    return false;
}

/// The preset document with overrides applied. The A = 0 point of a
/// suppression run is the no-flow preset.
inline RunConfig scenario_config(std::string_view name, const Overrides& overrides = {}) {
    std::string_view base = name;
    if ((name == "suppression" || name == "elliptic_comparison") && sets_flowless(overrides)) base = "blowup_noflow";
    Json doc = scenario_document(base);
    if (base != name && name == "elliptic_comparison") doc["model"]["epsilon"] = 0;
    for (const auto& [k, v] : overrides) apply_override(doc, k, v);
    return config_from_json(doc);
}

inline RunResult run_scenario(std::string_view name, const Overrides& overrides = {}) {
    return execute(scenario_config(name, overrides));
}

// ---------------------------------------------------------------------------
// Sweeps

struct FitRequest {
    std::string column = "phi_k1";
    std::pair<double, double> window{1.0, 2.0};
    bool scaled_window = true;  // window in units of A^{1/3}
};

struct SweepRow {
    double value = 0.0;
    RunStatus status = RunStatus::completed;
    std::optional<DecayFit> fit;
    std::string message;
    std::filesystem::path directory;
};

struct SweepResult {
    std::string parameter;
    std::vector<SweepRow> rows;
    std::optional<double> slope;  // scaling_slope over (A, rate), parameter model.A only
    std::string slope_message;
};

inline std::vector<double> parse_value_list(std::string_view list) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const std::string item(list.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                  : comma - start));
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (item.empty() || end == item.c_str() || *end != '\0') {
            throw ConfigError("bad numeric value '" + item + "' in list");
        }
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::pair<double, double> parse_window(std::string_view s) {
    const auto v = parse_value_list(s);
    if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError("window must be 'a,b' with a < b");
    return {v[0], v[1]};
}

inline DecayFit fit_records(const RecordTable& t, const FitRequest& req, double A) {
    const double s = req.scaled_window ? std::cbrt(A) : 1.0;
    const auto ts = t.column("t");
    const auto vs = t.column(req.column);
    return fit_decay_rate(ts, vs, {req.window.first * s, req.window.second * s});
}

inline DecayFit fit_records(std::span<const MonitorRecord> records, int k_report, const FitRequest& req, double A) {
    std::stringstream ss;
    write_csv(ss, records, k_report);
    return fit_records(parse_csv(ss), req, A);
}

/// Runs `base` once per value of `parameter`, fitting `fit` on each run.
/// `base` is a scenario name or a config document.
inline SweepResult sweep(const std::variant<std::string, Json>& base, const std::string& parameter,
                         const std::vector<double>& values, const FitRequest& fit, const Overrides& overrides = {},
                         const std::filesystem::path& directory = {}) {
    if (values.size() < 2) throw ConfigError("a sweep needs at least 2 values");
    SweepResult out{parameter, {}, std::nullopt, ""};
    for (std::size_t i = 0; i < values.size(); ++i) {
        SweepRow row;
        row.value = values[i];
        Overrides ov = overrides;
        std::ostringstream val;
        val << std::setprecision(17) << values[i];
        ov.emplace_back(parameter, val.str());
        if (!directory.empty()) {
            row.directory = directory / ("run_" + std::to_string(i));
            ov.emplace_back("output.directory", Json(row.directory.string()).dump());
        }
        try {
            RunConfig cfg;
            if (std::holds_alternative<std::string>(base)) {
                cfg = scenario_config(std::get<std::string>(base), ov);
            } else {
                Json doc = std::get<Json>(base);
                for (const auto& [k, v] : ov) apply_override(doc, k, v);
                cfg = config_from_json(doc);
            }
            const RunResult r = execute(cfg);
            row.status = r.outcome.status;
            row.message = r.outcome.message;
            if (r.outcome.status == RunStatus::completed) {
                try {
                    row.fit = fit_records(r.outcome.records, cfg.k_report, fit, cfg.effective_A());
                } catch (const Error& e) {
                    row.message = std::string("fit failed: ") + e.what();
                }
            }
        } catch (const Error& e) {
            row.status = RunStatus::aborted;
            row.message = e.what();
        }
        out.rows.push_back(std::move(row));
    }
    if (parameter == "model.A") {
        std::vector<std::pair<double, double>> pairs;
        for (const auto& r : out.rows) {
            if (r.fit && r.value > 0.0 && r.fit->rate > 0.0) pairs.emplace_back(r.value, r.fit->rate);
        }
        try {
            out.slope = scaling_slope(pairs);
        } catch (const Error& e) {
            out.slope_message = e.what();
        }
    }
    if (!directory.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(directory, ec);
        const auto path = directory / "sweep.csv";
        std::ofstream os(path, std::ios::trunc);
        if (!os) throw IoError("cannot write " + path.string());
        os << "value,status,rate,r_squared,samples,t_lo,t_hi\n";
        for (const auto& r : out.rows) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            os << detail::format_double(r.value) << ',' << to_string(r.status) << ','
               << detail::format_double(r.fit ? r.fit->rate : nan) << ','
               << detail::format_double(r.fit ? r.fit->r_squared : nan) << ',' << (r.fit ? r.fit->samples : 0) << ','
               << detail::format_double(r.fit ? r.fit->t_lo : nan) << ','
               << detail::format_double(r.fit ? r.fit->t_hi : nan) << '\n';
        }
    }
    return out;
}

inline Json to_json(const SweepResult& s) {
    Json rows = Json::array();
    for (const auto& r : s.rows) {
        Json row{{"value", r.value}, {"status", to_string(r.status)}, {"message", r.message}};
        if (r.fit) {
            row["rate"] = r.fit->rate;
            row["r_squared"] = r.fit->r_squared;
            row["samples"] = r.fit->samples;
            row["window"] = {r.fit->t_lo, r.fit->t_hi};
        } else {
            row["rate"] = nullptr;
        }
        if (!r.directory.empty()) row["directory"] = r.directory.string();
        rows.push_back(row);
    }
    Json out{{"parameter", s.parameter}, {"rows", rows}};
    out["slope"] = s.slope ? Json(*s.slope) : Json(nullptr);
    if (!s.slope_message.empty()) out["slope_message"] = s.slope_message;
    return out;
}

}  // namespace pks
