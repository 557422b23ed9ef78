#pragma once

// Scenario execution and output writing. run_scenario dispatches every
// requested engine over the time grid (once per sweep value), producing one
// row of named columns per grid point plus optional Husimi snapshots;
// write_outputs serializes everything to CSV files and a checksummed
// manifest. The whole pipeline is deterministic: fixed 17-significant-digit
// formatting, no timestamps, no randomness.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "closed_form.hpp"
#include "errors.hpp"
#include "husimi.hpp"
#include "lindblad.hpp"
#include "metrology.hpp"
#include "physical_params.hpp"
#include "scenario.hpp"

namespace ctwist {

struct OutputRecord {
    double t = 0.0;
    std::vector<double> values; // aligned with ScenarioResult::columns
    std::vector<std::string> warnings;
};

struct HusimiOutput {
    Engine engine = Engine::closed_form;
    int time_index = 0;
    double time = 0.0;
    HusimiMap map;
};

struct SweepRun {
    std::optional<double> sweep_value; // resolved swept-field value, if any
    ModelParams params;                // base parameters with the sweep applied
    std::optional<int> fock_cutoff;    // n_max used by the Lindblad engines
    std::vector<OutputRecord> records;
    std::vector<HusimiOutput> husimi;
};

struct PhysicalReport {
    // (column header with unit, value), in the canonical quantity order.
    std::vector<std::pair<std::string, double>> values;
};

struct ScenarioResult {
    std::vector<ColumnSpec> columns;
    std::vector<SweepRun> sweeps;
    std::optional<PhysicalReport> physical;
};

namespace detail {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string failure_tag(const Scenario& s, int k, double t) {
    std::string tag = s.name + ": ";
    if (s.sweep)
        tag += "sweep " + std::to_string(k) + " (" + s.sweep->field + " = " +
               format_g17(s.sweep->values.at(k)) + "), ";
    tag += "t = " + format_g17(t) + ": ";
    return tag;
}

// Observable columns shared by every state-producing engine, in the order
// scenario_columns declares them.
inline void append_state_columns(const Scenario& s, const AtomicDensityMatrix& rho,
                                 double n_mean, std::optional<double> top_level_population,
                                 const Eigen::MatrixXcd& jy, std::vector<double>& out) {
    for (Observable o : s.observables) {
        switch (o) {
            case Observable::qfi_eigen: out.push_back(qfi_eigen(rho, jy).value); break;
            case Observable::qfi_variance: out.push_back(qfi_variance(rho, jy)); break;
            case Observable::xi2:
                out.push_back(spin_squeezing_xi2(rho));
                out.push_back(spin_squeezing_xi2_perp_min(rho));
                break;
            case Observable::n_mean: out.push_back(n_mean); break;
            case Observable::purity: out.push_back(rho.purity()); break;
        }
    }
    const Eigen::MatrixXcd m = rho.matrix() * jy;
    out.push_back(std::abs((m * m).trace()));
    if (top_level_population) out.push_back(*top_level_population);
}

inline void execute_sweep(const Scenario& s, int k, SweepRun& run,
                          const std::vector<int>& husimi_indices, const SphereGrid& husimi_grid,
                          std::size_t expected_columns) {
    const ModelParams& p = run.params;
    const DickeBasis basis(p.n_atoms);
    const Eigen::MatrixXcd jy = jy_matrix(basis);
    const IntegratorConfig cfg = s.integrator.to_config();

    const bool has_blocks = std::find(s.engines.begin(), s.engines.end(),
                                      Engine::lindblad_blocks) != s.engines.end();
    const bool has_dense = std::find(s.engines.begin(), s.engines.end(),
                                     Engine::lindblad_dense) != s.engines.end();

    std::optional<JointBlockState> blocks;
    std::optional<DenseJointState> dense;
    if (has_blocks || has_dense) {
        const int n_max = s.integrator.n_max
                              ? *s.integrator.n_max
                              : (p.kappa > 0.0
                                     ? choose_fock_cutoff_damped(p, s.photon_input,
                                                                 s.time_grid.t_end)
                                     : choose_fock_cutoff(p, s.photon_input, s.time_grid.t_end));
        run.fock_cutoff = n_max;
        const FockSpace fock{n_max};
        const AtomicState css = coherent_state_plus_x(p.n_atoms);
        if (has_blocks) blocks = make_initial_block_state(css, fock, s.photon_input);
        if (has_dense) dense = make_initial_dense_state(css, fock, s.photon_input);
    }

    // The baseline engine evaluates the same initial spin state with the
    // cavity removed entirely: no coupling, no pump, no loss, vacuum field.
    ModelParams p_oat = p;
    p_oat.w0 = 0.0;
    p_oat.eta = 0.0;
    p_oat.kappa = 0.0;
    const PhotonInput vacuum = PhotonInput::make_vacuum();

    run.records.reserve(s.time_grid.points);
    for (int i = 0; i < s.time_grid.points; ++i) {
        const double t = s.time_grid.time_at(i);
        const bool want_husimi =
            std::find(husimi_indices.begin(), husimi_indices.end(), i) != husimi_indices.end();
        OutputRecord rec;
        rec.t = t;
        try {
            if (blocks) *blocks = evolve_blocks(std::move(*blocks), p, cfg, t);
            if (dense) *dense = evolve_dense(std::move(*dense), p, cfg, t);

            for (Engine e : s.engines) {
                switch (e) {
                    case Engine::exact_sum:
                        rec.values.push_back(qfi_exact_sum(p, s.photon_input, t));
                        break;
                    case Engine::closed_form_approx: {
                        const QfiApproxResult r =
                            p.eta == 0.0
                                ? qfi_closed_form_no_pump(p, s.photon_input.mean_photons(), t)
                                : qfi_closed_form_pumped(p, t,
                                                         PumpedEnvelope::with_interaction);
                        rec.values.push_back(r.value);
                        for (const std::string& w : r.warnings)
                            rec.warnings.push_back("closed_form_approx: " + w);
                        break;
                    }
                    case Engine::closed_form: {
                        const AtomicDensityMatrix rho = p.eta == 0.0
                                                            ? evolve_no_pump(p, s.photon_input, t)
                                                            : evolve_pumped(p, t);
                        append_state_columns(s, rho, closed_form_mean_photons(p, s.photon_input, t),
                                             std::nullopt, jy, rec.values);
                        if (want_husimi)
                            run.husimi.push_back({e, i, t, husimi_q(rho, husimi_grid)});
                        break;
                    }
                    case Engine::oat_baseline: {
                        const AtomicDensityMatrix rho = evolve_no_pump(p_oat, vacuum, t);
                        append_state_columns(s, rho, 0.0, std::nullopt, jy, rec.values);
                        if (want_husimi)
                            run.husimi.push_back({e, i, t, husimi_q(rho, husimi_grid)});
                        break;
                    }
                    case Engine::lindblad_blocks: {
                        const AtomicDensityMatrix rho = partial_trace_photons(*blocks);
                        const PhotonObservables po = photon_observables(*blocks);
                        append_state_columns(s, rho, po.n_mean, po.top_level_population, jy,
                                             rec.values);
                        if (want_husimi)
                            run.husimi.push_back({e, i, t, husimi_q(rho, husimi_grid)});
                        break;
                    }
                    case Engine::lindblad_dense: {
                        const AtomicDensityMatrix rho = partial_trace_photons(*dense);
                        const PhotonObservables po = photon_observables(*dense);
                        append_state_columns(s, rho, po.n_mean, po.top_level_population, jy,
                                             rec.values);
                        if (want_husimi)
                            run.husimi.push_back({e, i, t, husimi_q(rho, husimi_grid)});
                        break;
                    }
                }
            }
        } catch (const EngineFailure&) {
            throw;
        } catch (const std::exception& err) {
            throw EngineFailure(failure_tag(s, k, t) + err.what());
        }

        if (rec.values.size() != expected_columns)
            throw EngineFailure(failure_tag(s, k, t) + "internal column-count mismatch: " +
                                std::to_string(rec.values.size()) + " values for " +
                                std::to_string(expected_columns) + " columns");
        for (std::size_t c = 0; c < rec.values.size(); ++c)
            if (!std::isfinite(rec.values[c]))
                throw EngineFailure(failure_tag(s, k, t) + "non-finite value in column " +
                                    std::to_string(c));
        run.records.push_back(std::move(rec));
    }
}

inline PhysicalReport physical_report(const PhysicalSpec& spec) {
    PhysicalReport rep;
    const ExperimentalInputs in = spec.to_inputs();
    const double xi = xi_gaussian(in.r_0);
    const double wr = omega_r(in.omega_0, xi);
    const double u0_value = u0(wr, in.delta_a);
    const double g = contact_g(in.a_s, in.m_atom, in.hbar);

    const auto& units_table = physical_quantity_units();
    const auto header_for = [&](const std::string& name) -> std::string {
        for (const auto& [n, unit] : units_table)
            if (n == name) return n + " [" + unit + "]";
        throw InvalidArgument("physical_report: unknown quantity " + name);
    };

    rep.values.emplace_back(header_for("xi"), xi);
    rep.values.emplace_back(header_for("omega_r"), wr);
    rep.values.emplace_back(header_for("u0"), u0_value);
    rep.values.emplace_back(header_for("contact_g"), g);
    rep.values.emplace_back(header_for("u0_over_g"), u0_over_g(in));

    if (spec.v_dw_omega_2pi_khz) {
        const double omega = 2.0 * pi * (*spec.v_dw_omega_2pi_khz) * 1e3;
        const double curvature = 0.5 * in.m_atom * omega * omega;
        const TwoModeCouplings c = two_mode_couplings(
            in, in.hbar * u0_value, [curvature](double x) { return curvature * x * x; });
        rep.values.emplace_back(header_for("epsilon"), c.epsilon);
        rep.values.emplace_back(header_for("tunneling_j"), c.tunneling_j);
        rep.values.emplace_back(header_for("u"), c.u);
        rep.values.emplace_back(header_for("w0"), c.w0);
        rep.values.emplace_back(header_for("mode_overlap_factor"), c.mode_overlap_factor);
        rep.values.emplace_back(header_for("quartic_integral"), c.quartic_integral);
        rep.values.emplace_back(header_for("weighted_quartic_integral"),
                                c.weighted_quartic_integral);
    }
    return rep;
}

} // namespace detail

inline ScenarioResult run_scenario(const Scenario& s) {
    validate_scenario(s);
    ScenarioResult result;
    result.columns = scenario_columns(s);
    if (s.physical) result.physical = detail::physical_report(*s.physical);
    if (s.engines.empty()) return result;

    std::vector<int> husimi_indices;
    for (double t : s.husimi_times)
        husimi_indices.push_back(s.time_grid.index_of(t, "husimi_times"));
    std::sort(husimi_indices.begin(), husimi_indices.end());
    husimi_indices.erase(std::unique(husimi_indices.begin(), husimi_indices.end()),
                         husimi_indices.end());
    const SphereGrid husimi_grid =
        husimi_indices.empty()
            ? SphereGrid{}
            : SphereGrid::gauss_legendre_grid(s.husimi_grid.n_theta, s.husimi_grid.n_phi);

    for (int k = 0; k < s.sweep_size(); ++k) {
        SweepRun run;
        run.params = s.params_for_sweep(k);
        if (s.sweep) run.sweep_value = s.sweep->values.at(k);
        detail::execute_sweep(s, k, run, husimi_indices, husimi_grid, result.columns.size());
        result.sweeps.push_back(std::move(run));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Embedded assertion evaluation.
// ---------------------------------------------------------------------------

struct AssertionOutcome {
    std::string description;
    double measured = 0.0;
    bool passed = false;
};

inline std::vector<AssertionOutcome> evaluate_assertions(const Scenario& s,
                                                         const ScenarioResult& r) {
    std::vector<AssertionOutcome> out;
    for (const ScenarioAssertion& a : s.assertions) {
        AssertionOutcome o;
        if (a.kind == ScenarioAssertion::Kind::record) {
            std::size_t col = r.columns.size();
            for (std::size_t c = 0; c < r.columns.size(); ++c)
                if (r.columns[c].engine == *a.engine && r.columns[c].observable == a.observable)
                    col = c;
            if (col == r.columns.size())
                throw ScenarioError("evaluate_assertions: column " + a.observable + "_" +
                                    engine_name(*a.engine) + " not present in the result");
            const int ti = s.time_grid.index_of(a.time, "evaluate_assertions");
            o.measured = r.sweeps.at(a.sweep_index).records.at(ti).values.at(col);
            o.description = r.columns[col].header + " at t = " + detail::format_g17(a.time);
            if (s.sweep) o.description += " (sweep " + std::to_string(a.sweep_index) + ")";
        } else {
            if (!r.physical)
                throw ScenarioError("evaluate_assertions: no physical report in the result");
            const std::string prefix = a.quantity + " [";
            bool found = false;
            for (const auto& [header, value] : r.physical->values) {
                if (header.rfind(prefix, 0) == 0) {
                    o.measured = value;
                    o.description = header;
                    found = true;
                    break;
                }
            }
            if (!found)
                throw ScenarioError("evaluate_assertions: physical quantity \"" + a.quantity +
                                    "\" not present in the result");
        }
        o.passed = (!a.min || o.measured >= *a.min) && (!a.max || o.measured <= *a.max);
        std::string window;
        if (a.min && a.max)
            window = "[" + detail::format_g17(*a.min) + ", " + detail::format_g17(*a.max) + "]";
        else if (a.min)
            window = ">= " + detail::format_g17(*a.min);
        else
            window = "<= " + detail::format_g17(*a.max);
        o.description += ": measured " + detail::format_g17(o.measured) + ", required " + window;
        out.push_back(std::move(o));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output files: per-sweep results CSVs, Husimi CSVs, physical.csv, and a
// manifest with the resolved scenario and FNV-1a checksums of every file.
// ---------------------------------------------------------------------------

struct WrittenFile {
    std::string name;
    std::uint64_t fnv1a64 = 0;
    std::uint64_t bytes = 0;
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv_hex(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string sanitize_cell(std::string text) {
    for (char& c : text)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return text;
}

inline std::string results_file_name(const Scenario& s, int k) {
    if (!s.sweep) return "results.csv";
    return "results_" + s.sweep->field + "_" + std::to_string(k) + ".csv";
}

inline std::string husimi_file_name(const Scenario& s, int k, Engine e, int time_index) {
    std::string name = "husimi_";
    if (s.sweep) name += s.sweep->field + "_" + std::to_string(k) + "_";
    name += engine_name(e) + "_t" + std::to_string(time_index) + ".csv";
    return name;
}

inline std::string render_results_csv(const ScenarioResult& r, const SweepRun& run) {
    std::string out = "t [1/U]";
    for (const ColumnSpec& c : r.columns) out += "," + c.header;
    out += ",warnings\n";
    for (const OutputRecord& rec : run.records) {
        out += format_g17(rec.t);
        for (double v : rec.values) out += "," + format_g17(v);
        out += ",";
        for (std::size_t w = 0; w < rec.warnings.size(); ++w) {
            if (w > 0) out += " | ";
            out += sanitize_cell(rec.warnings[w]);
        }
        out += "\n";
    }
    return out;
}

inline void write_file(const std::filesystem::path& dir, const std::string& name,
                       const std::string& content, std::vector<WrittenFile>& written) {
    const std::filesystem::path path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_outputs: cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write_outputs: short write to " + path.string());
    written.push_back({name, fnv1a64(content), content.size()});
}

} // namespace detail

inline std::vector<WrittenFile> write_outputs(const Scenario& s, const ScenarioResult& r,
                                              const std::string& dir,
                                              const std::string& version) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("write_outputs: cannot create directory " + dir + ": " + ec.message());

    std::vector<WrittenFile> written;
    for (std::size_t k = 0; k < r.sweeps.size(); ++k) {
        const SweepRun& run = r.sweeps[k];
        detail::write_file(dir, detail::results_file_name(s, static_cast<int>(k)),
                           detail::render_results_csv(r, run), written);
        for (const HusimiOutput& h : run.husimi) {
            std::ostringstream os;
            write_husimi_csv(h.map, os);
            detail::write_file(
                dir, detail::husimi_file_name(s, static_cast<int>(k), h.engine, h.time_index),
                os.str(), written);
        }
    }
    if (r.physical) {
        std::string header, row;
        for (std::size_t i = 0; i < r.physical->values.size(); ++i) {
            if (i > 0) {
                header += ",";
                row += ",";
            }
            header += r.physical->values[i].first;
            row += detail::format_g17(r.physical->values[i].second);
        }
        detail::write_file(dir, "physical.csv", header + "\n" + row + "\n", written);
    }

    nlohmann::json manifest;
    manifest["version"] = version;
    manifest["scenario"] = scenario_to_json(s);
    manifest["files"] = nlohmann::json::object();
    for (const WrittenFile& f : written)
        manifest["files"][f.name] = {{"bytes", f.bytes}, {"fnv1a64", detail::fnv_hex(f.fnv1a64)}};
    manifest["runs"] = nlohmann::json::array();
    for (std::size_t k = 0; k < r.sweeps.size(); ++k) {
        const SweepRun& run = r.sweeps[k];
        nlohmann::json rj;
        rj["results"] = detail::results_file_name(s, static_cast<int>(k));
        rj["sweep_value"] = run.sweep_value ? nlohmann::json(*run.sweep_value) : nlohmann::json();
        rj["fock_cutoff"] = run.fock_cutoff ? nlohmann::json(*run.fock_cutoff) : nlohmann::json();
        manifest["runs"].push_back(rj);
    }
    detail::write_file(dir, "manifest.json", manifest.dump(2) + "\n", written);
    return written;
}

} // namespace ctwist
