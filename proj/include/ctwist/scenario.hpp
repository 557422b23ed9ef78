#pragma once

// Declarative run descriptions: a Scenario names the model parameters, the
// photon input, a uniform time grid, the engines to dispatch, the observables
// to record, optional Husimi snapshots, an optional one-field sweep, and
// embedded numeric assertions. Scenarios are read from strict JSON (unknown
// keys are errors) and serialize back losslessly after sweep resolution.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "closed_form.hpp"
#include "errors.hpp"
#include "lindblad.hpp"
#include "metrology.hpp"
#include "physical_params.hpp"

namespace ctwist {

// ---------------------------------------------------------------------------
// Enumerations.
// ---------------------------------------------------------------------------

enum class Engine {
    closed_form,       // exact reduced density matrix (lossless; pumped needs vacuum)
    exact_sum,         // coherence-factor QFI sum, no state construction
    closed_form_approx,// Gaussian-envelope QFI formulas with regime warnings
    lindblad_blocks,   // sector-pair block integrator with photon loss
    lindblad_dense,    // dense joint-space integrator (supports tunneling)
    oat_baseline,      // cavity switched off: bare J_z^2 twisting from vacuum
};

enum class Observable { qfi_eigen, qfi_variance, xi2, n_mean, purity };

inline const std::vector<std::pair<Engine, std::string>>& engine_names() {
    static const std::vector<std::pair<Engine, std::string>> table = {
        {Engine::closed_form, "closed_form"},
        {Engine::exact_sum, "exact_sum"},
        {Engine::closed_form_approx, "closed_form_approx"},
        {Engine::lindblad_blocks, "lindblad_blocks"},
        {Engine::lindblad_dense, "lindblad_dense"},
        {Engine::oat_baseline, "oat_baseline"},
    };
    return table;
}

inline std::string engine_name(Engine e) {
    for (const auto& [engine, name] : engine_names())
        if (engine == e) return name;
    throw InvalidArgument("engine_name: unknown engine value");
}

inline Engine engine_from_name(const std::string& name) {
    for (const auto& [engine, n] : engine_names())
        if (n == name) return engine;
    throw ScenarioError("engines: unknown engine \"" + name + "\"");
}

// Engines that construct a reduced atomic density matrix every grid point
// (and can therefore produce Husimi maps and matrix-based observables).
inline bool engine_produces_state(Engine e) {
    return e == Engine::closed_form || e == Engine::oat_baseline ||
           e == Engine::lindblad_blocks || e == Engine::lindblad_dense;
}

inline const std::vector<std::pair<Observable, std::string>>& observable_names() {
    static const std::vector<std::pair<Observable, std::string>> table = {
        {Observable::qfi_eigen, "qfi_eigen"},     {Observable::qfi_variance, "qfi_variance"},
        {Observable::xi2, "xi2"},                 {Observable::n_mean, "n_mean"},
        {Observable::purity, "purity"},
    };
    return table;
}

inline std::string observable_name(Observable o) {
    for (const auto& [obs, name] : observable_names())
        if (obs == o) return name;
    throw InvalidArgument("observable_name: unknown observable value");
}

inline Observable observable_from_name(const std::string& name) {
    for (const auto& [obs, n] : observable_names())
        if (n == name) return obs;
    throw ScenarioError("observables: unknown observable \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// Scenario building blocks.
// ---------------------------------------------------------------------------

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    int points = 0;

    double spacing() const { return (t_end - t_start) / (points - 1); }
    double time_at(int i) const { return t_start + i * spacing(); }

    // Snap an externally supplied time to a grid index; tolerance is a
    // millionth of the spacing so last-digit wobble passes but misconfigured
    // times are rejected.
    int index_of(double t, const std::string& context) const {
        const double h = spacing();
        const long i = std::lround((t - t_start) / h);
        if (i < 0 || i >= points || std::abs(t - time_at(static_cast<int>(i))) > 1e-6 * h)
            throw ScenarioError(context + ": time " + std::to_string(t) +
                                " does not lie on the scenario time grid");
        return static_cast<int>(i);
    }

    void validate() const {
        if (!(std::isfinite(t_start) && std::isfinite(t_end)))
            throw ScenarioError("time_grid: non-finite bound");
        if (t_start < 0.0) throw ScenarioError("time_grid: t_start must be >= 0");
        if (!(t_end > t_start)) throw ScenarioError("time_grid: t_end must exceed t_start");
        if (points < 2) throw ScenarioError("time_grid: points must be >= 2");
    }
};

struct HusimiGridSpec {
    int n_theta = 128;
    int n_phi = 256;

    void validate() const {
        if (n_theta < 2 || n_phi < 2)
            throw ScenarioError("husimi_grid: n_theta and n_phi must be >= 2");
    }
};

struct SweepSpec {
    std::string field;          // one of the real-valued model parameters
    std::vector<double> values; // resolved numeric values, in config order
};

struct IntegratorSpec {
    std::optional<double> dt;
    std::optional<int> n_max;
    double cutoff_tolerance = 1e-8;
    int hermitize_every = 50;
    bool adaptive_span = true;

    IntegratorConfig to_config() const {
        IntegratorConfig cfg;
        cfg.dt = dt;
        cfg.cutoff_tolerance = cutoff_tolerance;
        cfg.hermitize_every = hermitize_every;
        cfg.adaptive_span = adaptive_span;
        return cfg;
    }

    void validate() const {
        if (dt && !(*dt > 0.0)) throw ScenarioError("integrator: dt must be > 0");
        if (n_max && *n_max < 1) throw ScenarioError("integrator: n_max must be >= 1");
        if (!(cutoff_tolerance > 0.0))
            throw ScenarioError("integrator: cutoff_tolerance must be > 0");
        if (hermitize_every < 1) throw ScenarioError("integrator: hermitize_every must be >= 1");
    }
};

// Laboratory-unit inputs for the physical parameter chain, kept in the units
// they were written in so serialization round-trips exactly.
struct PhysicalSpec {
    double omega_0_2pi_khz = 0.0;
    double delta_a_2pi_khz = 0.0;
    double r_0_bohr = 0.0;
    double a_s_bohr = 0.0;
    double m_atom_u = 0.0;
    double lambda_nm = 0.0;
    double sigma_um = 0.0;
    double cavity_length_um = 0.0;
    double l_h_um = 0.0;
    double well_sep_um = 0.0;
    double well_width_um = 0.0;
    std::optional<double> v_dw_omega_2pi_khz; // harmonic double-well curvature, if any

    ExperimentalInputs to_inputs() const {
        return ExperimentalInputs::from_laboratory_units(
            omega_0_2pi_khz, delta_a_2pi_khz, r_0_bohr, a_s_bohr, m_atom_u, lambda_nm, sigma_um,
            cavity_length_um, l_h_um, well_sep_um, well_width_um);
    }

    void validate() const {
        try {
            to_inputs().validate();
        } catch (const InvalidArgument& e) {
            throw ScenarioError(std::string("physical: ") + e.what());
        }
        if (v_dw_omega_2pi_khz && !(*v_dw_omega_2pi_khz > 0.0))
            throw ScenarioError("physical.v_dw: omega_2pi_khz must be > 0");
    }
};

// One embedded numeric check. Record assertions address a results column at a
// grid time (and sweep index); physical assertions address a quantity of the
// laboratory parameter chain. Both carry a closed [min, max] window with at
// least one bound present.
struct ScenarioAssertion {
    enum class Kind { record, physical };
    Kind kind = Kind::record;

    // record kind
    std::optional<Engine> engine;
    std::string observable;
    double time = 0.0;
    int sweep_index = 0;

    // physical kind
    std::string quantity;

    std::optional<double> min;
    std::optional<double> max;
};

struct Scenario {
    std::string name;
    ModelParams params;
    PhotonInput photon_input;
    TimeGrid time_grid;
    std::vector<Engine> engines;
    std::vector<Observable> observables = {Observable::qfi_eigen, Observable::qfi_variance,
                                           Observable::n_mean, Observable::purity};
    std::vector<double> husimi_times;
    HusimiGridSpec husimi_grid;
    std::optional<SweepSpec> sweep;
    IntegratorSpec integrator;
    std::optional<PhysicalSpec> physical;
    std::vector<ScenarioAssertion> assertions;

    // Model parameters with sweep value k applied (k ignored when no sweep).
    ModelParams params_for_sweep(int k) const;
    int sweep_size() const { return sweep ? static_cast<int>(sweep->values.size()) : 1; }
};

// ---------------------------------------------------------------------------
// Results-column schema. The CSV layout is fixed by the scenario alone:
// t, then each engine's columns in config order, then a warnings column.
// ---------------------------------------------------------------------------

struct ColumnSpec {
    Engine engine;
    std::string observable; // "qfi", "qfi_eigen", ..., "qcrb_residual", "top_level_population"
    std::string header;     // e.g. "qfi_eigen_closed_form [1]"
};

inline std::vector<ColumnSpec> scenario_columns(const Scenario& s) {
    std::vector<ColumnSpec> cols;
    const auto add = [&](Engine e, const std::string& obs, const std::string& unit) {
        cols.push_back({e, obs, obs + "_" + engine_name(e) + " [" + unit + "]"});
    };
    for (Engine e : s.engines) {
        if (e == Engine::exact_sum || e == Engine::closed_form_approx) {
            add(e, "qfi", "1");
            continue;
        }
        // State-producing engines share one column menu.
        for (Observable o : s.observables) {
            switch (o) {
                case Observable::qfi_eigen: add(e, "qfi_eigen", "1"); break;
                case Observable::qfi_variance: add(e, "qfi_variance", "1"); break;
                case Observable::xi2:
                    add(e, "xi2", "1");
                    add(e, "xi2_perp", "1");
                    break;
                case Observable::n_mean: add(e, "n_mean", "photons"); break;
                case Observable::purity: add(e, "purity", "1"); break;
            }
        }
        add(e, "qcrb_residual", "1");
        if (e == Engine::lindblad_blocks || e == Engine::lindblad_dense)
            add(e, "top_level_population", "1");
    }
    return cols;
}

// Quantities addressable by physical assertions and emitted to physical.csv,
// in output order, with SI unit labels (laboratory-unit inputs produce SI).
inline const std::vector<std::pair<std::string, std::string>>& physical_quantity_units() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"xi", "m^1.5"},
        {"omega_r", "rad/s m^1.5"},
        {"u0", "rad/s m^3"},
        {"contact_g", "J m^3"},
        {"u0_over_g", "1"},
        {"epsilon", "J"},
        {"tunneling_j", "J"},
        {"u", "J"},
        {"w0", "J/m^3"},
        {"mode_overlap_factor", "1"},
        {"quartic_integral", "1/m"},
        {"weighted_quartic_integral", "1/m"},
    };
    return table;
}

// The last seven entries require the double-well potential.
inline bool physical_quantity_needs_potential(const std::string& q) {
    return q == "epsilon" || q == "tunneling_j" || q == "u" || q == "w0" ||
           q == "mode_overlap_factor" || q == "quartic_integral" ||
           q == "weighted_quartic_integral";
}

// ---------------------------------------------------------------------------
// Sweep plumbing and validation.
// ---------------------------------------------------------------------------

namespace detail {

inline const std::vector<std::string>& sweepable_fields() {
    static const std::vector<std::string> fields = {"u",     "w0",          "delta_c", "eta",
                                                    "kappa", "tunneling_j", "epsilon"};
    return fields;
}

inline void apply_model_field(ModelParams& p, const std::string& field, double value) {
    if (field == "u") p.u = value;
    else if (field == "w0") p.w0 = value;
    else if (field == "delta_c") p.delta_c = value;
    else if (field == "eta") p.eta = value;
    else if (field == "kappa") p.kappa = value;
    else if (field == "tunneling_j") p.tunneling_j = value;
    else if (field == "epsilon") p.epsilon = value;
    else throw ScenarioError("sweep: unknown field \"" + field + "\"");
}

} // namespace detail

inline ModelParams Scenario::params_for_sweep(int k) const {
    ModelParams p = params;
    if (sweep) detail::apply_model_field(p, sweep->field, sweep->values.at(k));
    return p;
}

// Engine/parameter compatibility, applied to the base parameters and to every
// resolved sweep point.
inline void validate_engine_compatibility(const Scenario& s, const ModelParams& p,
                                          const std::string& where) {
    for (Engine e : s.engines) {
        const std::string tag = "engines" + where + ": " + engine_name(e);
        const bool closed_family = e == Engine::closed_form || e == Engine::exact_sum ||
                                   e == Engine::closed_form_approx;
        if (closed_family) {
            if (p.kappa != 0.0)
                throw ScenarioError(tag + " models a lossless cavity; kappa must be 0 "
                                          "(use a lindblad engine for kappa > 0)");
            if (p.tunneling_j != 0.0)
                throw ScenarioError(tag + " requires tunneling_j = 0");
            if (p.eta != 0.0 && s.photon_input.kind != PhotonInput::Kind::vacuum)
                throw ScenarioError(tag + " with a pump requires a vacuum photon input");
            if (p.eta != 0.0 && e != Engine::closed_form_approx) {
                try {
                    SpectralCoefficients::compute(p);
                } catch (const ResonanceError& err) {
                    throw ScenarioError(tag + ": " + err.what());
                }
            }
        }
        if (e == Engine::oat_baseline && p.tunneling_j != 0.0)
            throw ScenarioError(tag + " requires tunneling_j = 0");
        if (e == Engine::lindblad_blocks && p.tunneling_j != 0.0)
            throw ScenarioError(tag + ": tunneling couples the J_z sectors, which the block "
                                      "form cannot represent (BlockFormInvalid); use "
                                      "lindblad_dense instead");
    }
}

inline void validate_scenario(const Scenario& s) {
    if (s.name.empty()) throw ScenarioError("name: must be a non-empty string");
    try {
        s.params.validate();
    } catch (const InvalidArgument& e) {
        throw ScenarioError(std::string("params: ") + e.what());
    }
    s.time_grid.validate();
    s.husimi_grid.validate();
    s.integrator.validate();
    if (s.physical) s.physical->validate();

    // Engines: no duplicates; empty only when a physical section gives the
    // scenario something to report.
    std::set<Engine> seen_engines;
    for (Engine e : s.engines)
        if (!seen_engines.insert(e).second)
            throw ScenarioError("engines: duplicate entry \"" + engine_name(e) + "\"");
    if (s.engines.empty() && !s.physical)
        throw ScenarioError("engines: empty engine list requires a physical section");

    std::set<Observable> seen_obs;
    for (Observable o : s.observables)
        if (!seen_obs.insert(o).second)
            throw ScenarioError("observables: duplicate entry \"" + observable_name(o) + "\"");
    if (s.observables.empty()) throw ScenarioError("observables: must not be empty");

    // Sweep values: finite, and valid model parameters at every point.
    if (s.sweep) {
        const auto& fields = detail::sweepable_fields();
        if (std::find(fields.begin(), fields.end(), s.sweep->field) == fields.end())
            throw ScenarioError("sweep: field \"" + s.sweep->field +
                                "\" is not a sweepable model parameter");
        if (s.sweep->values.empty()) throw ScenarioError("sweep: values must not be empty");
        for (double v : s.sweep->values)
            if (!std::isfinite(v)) throw ScenarioError("sweep: non-finite value");
    }
    for (int k = 0; k < s.sweep_size(); ++k) {
        const ModelParams p = s.params_for_sweep(k);
        try {
            p.validate();
        } catch (const InvalidArgument& e) {
            throw ScenarioError("sweep: value index " + std::to_string(k) +
                                " produces invalid parameters: " + e.what());
        }
        const std::string where =
            s.sweep ? " (sweep index " + std::to_string(k) + ")" : std::string();
        validate_engine_compatibility(s, p, where);
    }

    // Husimi snapshots need a state-producing engine and grid-aligned times.
    const bool any_state_engine =
        std::any_of(s.engines.begin(), s.engines.end(), engine_produces_state);
    if (!s.husimi_times.empty() && !any_state_engine)
        throw ScenarioError("husimi_times: no engine in this scenario produces a state");
    for (double t : s.husimi_times) s.time_grid.index_of(t, "husimi_times");

    // Assertions must address columns/quantities that will actually exist.
    const std::vector<ColumnSpec> cols = scenario_columns(s);
    for (std::size_t i = 0; i < s.assertions.size(); ++i) {
        const ScenarioAssertion& a = s.assertions[i];
        const std::string tag = "assertions[" + std::to_string(i) + "]";
        if (!a.min && !a.max) throw ScenarioError(tag + ": needs at least one of min/max");
        if (a.min && !std::isfinite(*a.min)) throw ScenarioError(tag + ": non-finite min");
        if (a.max && !std::isfinite(*a.max)) throw ScenarioError(tag + ": non-finite max");
        if (a.min && a.max && *a.min > *a.max) throw ScenarioError(tag + ": min exceeds max");
        if (a.kind == ScenarioAssertion::Kind::record) {
            if (!a.engine) throw ScenarioError(tag + ": missing engine");
            const bool known = std::any_of(cols.begin(), cols.end(), [&](const ColumnSpec& c) {
                return c.engine == *a.engine && c.observable == a.observable;
            });
            if (!known)
                throw ScenarioError(tag + ": no column \"" + a.observable + "\" for engine \"" +
                                    engine_name(*a.engine) +
                                    "\" (is the engine listed and the observable requested?)");
            s.time_grid.index_of(a.time, tag);
            if (a.sweep_index < 0 || a.sweep_index >= s.sweep_size())
                throw ScenarioError(tag + ": sweep_index out of range");
        } else {
            if (!s.physical)
                throw ScenarioError(tag + ": physical assertion requires a physical section");
            const auto& table = physical_quantity_units();
            const bool known =
                std::any_of(table.begin(), table.end(),
                            [&](const auto& q) { return q.first == a.quantity; });
            if (!known) throw ScenarioError(tag + ": unknown quantity \"" + a.quantity + "\"");
            if (physical_quantity_needs_potential(a.quantity) &&
                !s.physical->v_dw_omega_2pi_khz)
                throw ScenarioError(tag + ": quantity \"" + a.quantity +
                                    "\" requires physical.v_dw");
        }
    }
}

// ---------------------------------------------------------------------------
// Strict JSON parsing.
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void require_known_keys(const json& obj, const std::string& context,
                               std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ScenarioError(context + ": expected a JSON object");
    for (const auto& item : obj.items()) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                    [&](const char* k) { return item.key() == k; });
        if (!ok) throw ScenarioError(context + ": unknown key \"" + item.key() + "\"");
    }
}

inline const json& require_field(const json& obj, const std::string& context,
                                 const std::string& key) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ScenarioError(context + ": missing required key \"" + key + "\"");
    return *it;
}

inline double get_double(const json& obj, const std::string& context, const std::string& key) {
    const json& v = require_field(obj, context, key);
    if (!v.is_number()) throw ScenarioError(context + "." + key + ": expected a number");
    return v.get<double>();
}

inline double get_double_or(const json& obj, const std::string& context, const std::string& key,
                            double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ScenarioError(context + "." + key + ": expected a number");
    return v.get<double>();
}

inline int get_int(const json& obj, const std::string& context, const std::string& key) {
    const json& v = require_field(obj, context, key);
    if (!v.is_number_integer()) throw ScenarioError(context + "." + key + ": expected an integer");
    return v.get<int>();
}

inline int get_int_or(const json& obj, const std::string& context, const std::string& key,
                      int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ScenarioError(context + "." + key + ": expected an integer");
    return v.get<int>();
}

inline std::string get_string(const json& obj, const std::string& context,
                              const std::string& key) {
    const json& v = require_field(obj, context, key);
    if (!v.is_string()) throw ScenarioError(context + "." + key + ": expected a string");
    return v.get<std::string>();
}

inline ModelParams parse_params(const json& j) {
    require_known_keys(j, "params",
                       {"n_atoms", "u", "w0", "delta_c", "eta", "kappa", "tunneling_j",
                        "epsilon"});
    ModelParams p;
    p.n_atoms = get_int(j, "params", "n_atoms");
    p.u = get_double(j, "params", "u");
    p.w0 = get_double(j, "params", "w0");
    p.delta_c = get_double(j, "params", "delta_c");
    p.eta = get_double_or(j, "params", "eta", 0.0);
    p.kappa = get_double_or(j, "params", "kappa", 0.0);
    p.tunneling_j = get_double_or(j, "params", "tunneling_j", 0.0);
    p.epsilon = get_double_or(j, "params", "epsilon", 0.0);
    return p;
}

inline PhotonInput parse_photon_input(const json& j) {
    const std::string kind = get_string(j, "photon_input", "kind");
    if (kind == "vacuum") {
        require_known_keys(j, "photon_input", {"kind"});
        return PhotonInput::make_vacuum();
    }
    if (kind == "coherent") {
        require_known_keys(j, "photon_input", {"kind", "alpha_re", "alpha_im"});
        const double re = get_double(j, "photon_input", "alpha_re");
        const double im = get_double_or(j, "photon_input", "alpha_im", 0.0);
        return PhotonInput::make_coherent(complex(re, im));
    }
    if (kind == "fock") {
        require_known_keys(j, "photon_input", {"kind", "n"});
        const int n = get_int(j, "photon_input", "n");
        if (n < 0) throw ScenarioError("photon_input.n: must be >= 0");
        return PhotonInput::make_fock(n);
    }
    throw ScenarioError("photon_input.kind: expected vacuum, coherent, or fock; got \"" + kind +
                        "\"");
}

inline TimeGrid parse_time_grid(const json& j) {
    require_known_keys(j, "time_grid", {"t_start", "t_end", "points"});
    TimeGrid g;
    g.t_start = get_double(j, "time_grid", "t_start");
    g.t_end = get_double(j, "time_grid", "t_end");
    g.points = get_int(j, "time_grid", "points");
    return g;
}

// Sweep values are numbers or {"multiple": x, "of": "tau_a"|"tau_b"}. The
// symbolic form resolves to x / tau, i.e. the multiple names a rate in units
// of the inverse crossover time (the form the loss rate is quoted in).
inline SweepSpec parse_sweep(const json& j, const ModelParams& base, const PhotonInput& input) {
    require_known_keys(j, "sweep", {"field", "values"});
    SweepSpec sw;
    sw.field = get_string(j, "sweep", "field");
    const json& values = require_field(j, "sweep", "values");
    if (!values.is_array()) throw ScenarioError("sweep.values: expected an array");
    CrossoverTimes taus;
    try {
        taus = crossover_times(base, input.mean_photons());
    } catch (const InvalidArgument& e) {
        throw ScenarioError(std::string("sweep: base parameters are invalid: ") + e.what());
    }
    for (const json& v : values) {
        if (v.is_number()) {
            sw.values.push_back(v.get<double>());
            continue;
        }
        if (!v.is_object())
            throw ScenarioError("sweep.values: entries must be numbers or {multiple, of}");
        require_known_keys(v, "sweep.values", {"multiple", "of"});
        const double multiple = get_double(v, "sweep.values", "multiple");
        const std::string of = get_string(v, "sweep.values", "of");
        double tau = 0.0;
        if (of == "tau_a") tau = taus.tau_a;
        else if (of == "tau_b") tau = taus.tau_b;
        else throw ScenarioError("sweep.values.of: expected tau_a or tau_b, got \"" + of + "\"");
        if (!std::isfinite(tau) || tau <= 0.0)
            throw ScenarioError("sweep.values: " + of +
                                " is undefined for the base parameters (needs w0 != 0 and " +
                                (of == "tau_a" ? "a photon-carrying input" : "a pump") + ")");
        sw.values.push_back(multiple / tau);
    }
    return sw;
}

inline IntegratorSpec parse_integrator(const json& j) {
    require_known_keys(j, "integrator",
                       {"dt", "n_max", "cutoff_tolerance", "hermitize_every", "adaptive_span"});
    IntegratorSpec spec;
    if (j.contains("dt")) spec.dt = get_double(j, "integrator", "dt");
    if (j.contains("n_max")) spec.n_max = get_int(j, "integrator", "n_max");
    spec.cutoff_tolerance = get_double_or(j, "integrator", "cutoff_tolerance", 1e-8);
    spec.hermitize_every = get_int_or(j, "integrator", "hermitize_every", 50);
    if (j.contains("adaptive_span")) {
        const json& v = j.at("adaptive_span");
        if (!v.is_boolean()) throw ScenarioError("integrator: adaptive_span must be a boolean");
        spec.adaptive_span = v.get<bool>();
    }
    return spec;
}

inline PhysicalSpec parse_physical(const json& j) {
    require_known_keys(j, "physical",
                       {"omega_0_2pi_khz", "delta_a_2pi_khz", "r_0_bohr", "a_s_bohr", "m_atom_u",
                        "lambda_nm", "sigma_um", "cavity_length_um", "l_h_um", "well_sep_um",
                        "well_width_um", "v_dw"});
    PhysicalSpec spec;
    spec.omega_0_2pi_khz = get_double(j, "physical", "omega_0_2pi_khz");
    spec.delta_a_2pi_khz = get_double(j, "physical", "delta_a_2pi_khz");
    spec.r_0_bohr = get_double(j, "physical", "r_0_bohr");
    spec.a_s_bohr = get_double(j, "physical", "a_s_bohr");
    spec.m_atom_u = get_double(j, "physical", "m_atom_u");
    spec.lambda_nm = get_double(j, "physical", "lambda_nm");
    spec.sigma_um = get_double(j, "physical", "sigma_um");
    spec.cavity_length_um = get_double(j, "physical", "cavity_length_um");
    spec.l_h_um = get_double(j, "physical", "l_h_um");
    spec.well_sep_um = get_double(j, "physical", "well_sep_um");
    spec.well_width_um = get_double(j, "physical", "well_width_um");
    if (j.contains("v_dw")) {
        require_known_keys(j.at("v_dw"), "physical.v_dw", {"omega_2pi_khz"});
        spec.v_dw_omega_2pi_khz = get_double(j.at("v_dw"), "physical.v_dw", "omega_2pi_khz");
    }
    return spec;
}

inline ScenarioAssertion parse_assertion(const json& j, const std::string& tag) {
    ScenarioAssertion a;
    if (j.contains("quantity")) {
        require_known_keys(j, tag, {"quantity", "min", "max"});
        a.kind = ScenarioAssertion::Kind::physical;
        a.quantity = get_string(j, tag, "quantity");
    } else {
        require_known_keys(j, tag, {"engine", "observable", "time", "sweep_index", "min", "max"});
        a.kind = ScenarioAssertion::Kind::record;
        a.engine = engine_from_name(get_string(j, tag, "engine"));
        a.observable = get_string(j, tag, "observable");
        a.time = get_double(j, tag, "time");
        a.sweep_index = get_int_or(j, tag, "sweep_index", 0);
    }
    if (j.contains("min")) a.min = get_double(j, tag, "min");
    if (j.contains("max")) a.max = get_double(j, tag, "max");
    return a;
}

} // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
    using detail::require_field;
    using detail::require_known_keys;
    require_known_keys(j, "scenario",
                       {"name", "params", "photon_input", "time_grid", "engines", "observables",
                        "husimi_times", "husimi_grid", "sweep", "integrator", "physical",
                        "assertions"});
    Scenario s;
    s.name = detail::get_string(j, "scenario", "name");

    // The dynamical sections are mandatory whenever an engine will run; a
    // physical-only scenario may omit them (placeholder defaults are used).
    const bool has_engines = j.contains("engines") && !j.at("engines").empty();
    if (has_engines || j.contains("params"))
        s.params = detail::parse_params(require_field(j, "scenario", "params"));
    else
        s.params = ModelParams{2, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    if (has_engines || j.contains("time_grid"))
        s.time_grid = detail::parse_time_grid(require_field(j, "scenario", "time_grid"));
    else
        s.time_grid = TimeGrid{0.0, 1.0, 2};
    if (j.contains("photon_input"))
        s.photon_input = detail::parse_photon_input(j.at("photon_input"));

    if (j.contains("engines")) {
        const nlohmann::json& engines = j.at("engines");
        if (!engines.is_array()) throw ScenarioError("engines: expected an array");
        for (const auto& e : engines) {
            if (!e.is_string()) throw ScenarioError("engines: entries must be strings");
            s.engines.push_back(engine_from_name(e.get<std::string>()));
        }
    }
    if (j.contains("observables")) {
        const nlohmann::json& obs = j.at("observables");
        if (!obs.is_array()) throw ScenarioError("observables: expected an array");
        s.observables.clear();
        for (const auto& o : obs) {
            if (!o.is_string()) throw ScenarioError("observables: entries must be strings");
            s.observables.push_back(observable_from_name(o.get<std::string>()));
        }
    }
    if (j.contains("husimi_times")) {
        const nlohmann::json& times = j.at("husimi_times");
        if (!times.is_array()) throw ScenarioError("husimi_times: expected an array");
        for (const auto& t : times) {
            if (!t.is_number()) throw ScenarioError("husimi_times: entries must be numbers");
            s.husimi_times.push_back(t.get<double>());
        }
    }
    if (j.contains("husimi_grid")) {
        require_known_keys(j.at("husimi_grid"), "husimi_grid", {"n_theta", "n_phi"});
        s.husimi_grid.n_theta = detail::get_int(j.at("husimi_grid"), "husimi_grid", "n_theta");
        s.husimi_grid.n_phi = detail::get_int(j.at("husimi_grid"), "husimi_grid", "n_phi");
    }
    if (j.contains("sweep")) s.sweep = detail::parse_sweep(j.at("sweep"), s.params, s.photon_input);
    if (j.contains("integrator")) s.integrator = detail::parse_integrator(j.at("integrator"));
    if (j.contains("physical")) s.physical = detail::parse_physical(j.at("physical"));
    if (j.contains("assertions")) {
        const nlohmann::json& arr = j.at("assertions");
        if (!arr.is_array()) throw ScenarioError("assertions: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i)
            s.assertions.push_back(
                detail::parse_assertion(arr[i], "assertions[" + std::to_string(i) + "]"));
    }

    validate_scenario(s);
    return s;
}

inline Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("parse_scenario: cannot open \"" + path + "\"");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError("parse_scenario: " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Lossless serialization (sweep values already resolved to numbers).
// ---------------------------------------------------------------------------

inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["params"] = {{"n_atoms", s.params.n_atoms}, {"u", s.params.u},
                   {"w0", s.params.w0},           {"delta_c", s.params.delta_c},
                   {"eta", s.params.eta},         {"kappa", s.params.kappa},
                   {"tunneling_j", s.params.tunneling_j}, {"epsilon", s.params.epsilon}};
    switch (s.photon_input.kind) {
        case PhotonInput::Kind::vacuum: j["photon_input"] = {{"kind", "vacuum"}}; break;
        case PhotonInput::Kind::coherent:
            j["photon_input"] = {{"kind", "coherent"},
                                 {"alpha_re", s.photon_input.alpha.real()},
                                 {"alpha_im", s.photon_input.alpha.imag()}};
            break;
        case PhotonInput::Kind::fock:
            j["photon_input"] = {{"kind", "fock"}, {"n", s.photon_input.fock_n}};
            break;
    }
    j["time_grid"] = {{"t_start", s.time_grid.t_start},
                      {"t_end", s.time_grid.t_end},
                      {"points", s.time_grid.points}};
    j["engines"] = nlohmann::json::array();
    for (Engine e : s.engines) j["engines"].push_back(engine_name(e));
    j["observables"] = nlohmann::json::array();
    for (Observable o : s.observables) j["observables"].push_back(observable_name(o));
    if (!s.husimi_times.empty()) {
        j["husimi_times"] = s.husimi_times;
        j["husimi_grid"] = {{"n_theta", s.husimi_grid.n_theta}, {"n_phi", s.husimi_grid.n_phi}};
    }
    if (s.sweep) j["sweep"] = {{"field", s.sweep->field}, {"values", s.sweep->values}};
    nlohmann::json integ = nlohmann::json::object();
    if (s.integrator.dt) integ["dt"] = *s.integrator.dt;
    if (s.integrator.n_max) integ["n_max"] = *s.integrator.n_max;
    integ["cutoff_tolerance"] = s.integrator.cutoff_tolerance;
    integ["hermitize_every"] = s.integrator.hermitize_every;
    integ["adaptive_span"] = s.integrator.adaptive_span;
    j["integrator"] = integ;
    if (s.physical) {
        const PhysicalSpec& ph = *s.physical;
        nlohmann::json pj = {{"omega_0_2pi_khz", ph.omega_0_2pi_khz},
                             {"delta_a_2pi_khz", ph.delta_a_2pi_khz},
                             {"r_0_bohr", ph.r_0_bohr},
                             {"a_s_bohr", ph.a_s_bohr},
                             {"m_atom_u", ph.m_atom_u},
                             {"lambda_nm", ph.lambda_nm},
                             {"sigma_um", ph.sigma_um},
                             {"cavity_length_um", ph.cavity_length_um},
                             {"l_h_um", ph.l_h_um},
                             {"well_sep_um", ph.well_sep_um},
                             {"well_width_um", ph.well_width_um}};
        if (ph.v_dw_omega_2pi_khz) pj["v_dw"] = {{"omega_2pi_khz", *ph.v_dw_omega_2pi_khz}};
        j["physical"] = pj;
    }
    if (!s.assertions.empty()) {
        j["assertions"] = nlohmann::json::array();
        for (const ScenarioAssertion& a : s.assertions) {
            nlohmann::json aj;
            if (a.kind == ScenarioAssertion::Kind::physical) {
                aj["quantity"] = a.quantity;
            } else {
                aj["engine"] = engine_name(*a.engine);
                aj["observable"] = a.observable;
                aj["time"] = a.time;
                if (a.sweep_index != 0) aj["sweep_index"] = a.sweep_index;
            }
            if (a.min) aj["min"] = *a.min;
            if (a.max) aj["max"] = *a.max;
            j["assertions"].push_back(aj);
        }
    }
    return j;
}

// ---------------------------------------------------------------------------
// Dotted-path overrides for the CLI: "params.kappa=0.5" etc. The value text
// is parsed as JSON when possible and treated as a bare string otherwise.
// ---------------------------------------------------------------------------

inline void apply_override(nlohmann::json& root, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ScenarioError("override: expected key=value, got \"" + spec + "\"");
    const std::string path = spec.substr(0, eq);
    const std::string text = spec.substr(eq + 1);

    nlohmann::json value;
    try {
        value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
        value = text; // bare string
    }

    std::vector<std::string> segments;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        segments.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (const std::string& seg : segments)
        if (seg.empty()) throw ScenarioError("override: empty path segment in \"" + path + "\"");

    nlohmann::json* node = &root;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
        const std::string& seg = segments[i];
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(seg);
            } catch (const std::exception&) {
                throw ScenarioError("override: \"" + seg + "\" is not an array index");
            }
            if (idx >= node->size())
                throw ScenarioError("override: index " + seg + " out of range");
            node = &(*node)[idx];
        } else {
            if (!node->is_object() && !node->is_null())
                throw ScenarioError("override: cannot descend into \"" + seg + "\"");
            node = &(*node)[seg];
        }
    }
    const std::string& leaf = segments.back();
    if (node->is_array()) {
        std::size_t idx = 0;
        try {
            idx = std::stoul(leaf);
        } catch (const std::exception&) {
            throw ScenarioError("override: \"" + leaf + "\" is not an array index");
        }
        // Assign in range; the index one past the end appends.
        if (idx > node->size()) throw ScenarioError("override: index " + leaf + " out of range");
        if (idx == node->size()) node->push_back(value);
        else (*node)[idx] = value;
    } else {
        if (!node->is_object() && !node->is_null())
            throw ScenarioError("override: cannot assign \"" + leaf + "\" on a non-object");
        (*node)[leaf] = value;
    }
}

} // namespace ctwist
