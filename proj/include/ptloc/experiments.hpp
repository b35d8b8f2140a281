#ifndef PTLOC_EXPERIMENTS_HPP
#define PTLOC_EXPERIMENTS_HPP

#include <chrono>
#include <random>
#include <string>
#include <vector>

#include "ptloc/classical.hpp"
#include "ptloc/io.hpp"
#include "ptloc/momentum_state.hpp"
#include "ptloc/operators.hpp"
#include "ptloc/povm_position.hpp"
#include "ptloc/povm_time.hpp"
#include "ptloc/radial.hpp"
#include "ptloc/specfun.hpp"

namespace ptloc::experiments {

using io::json;

// ---------------------------------------------------------------------------------------------
// Configuration

inline const io::Schema& schema() {
    using io::ValueType;
    static const io::Schema s = {
        {"mass", ValueType::real, "1", "particle mass"},
        {"xi", ValueType::integer, "1", "energy sign, +1 or -1"},
        {"seed", ValueType::integer, "20240607", "seed for random phase-space points"},
        // momentum grid and Gaussian state
        {"grid.n", ValueType::integer, "64", "nodes per axis"},
        {"grid.extent", ValueType::real, "8", "momentum half-width"},
        {"state.width", ValueType::real, "0.6", "momentum width sigma"},
        {"state.center_x", ValueType::real, "0.3", ""},
        {"state.center_y", ValueType::real, "-0.2", ""},
        {"state.center_z", ValueType::real, "0.4", ""},
        {"state.position_x", ValueType::real, "0.5", "NW position centre"},
        {"state.position_y", ValueType::real, "0", ""},
        {"state.position_z", ValueType::real, "-0.3", ""},
        // time POVM
        {"time.n_r", ValueType::integer, "2048", "radial nodes"},
        {"time.r_min", ValueType::real, "1e-6", ""},
        {"time.r_max", ValueType::real, "30", ""},
        {"time.l_max", ValueType::integer, "8", ""},
        {"time.tau", ValueType::real, "0", "proper time of the kernel"},
        {"time.refine", ValueType::real, "2", "t-grid refinement over the natural step"},
        {"time.max_defect", ValueType::real, "1e-2", "completeness gate"},
        // Hegerfeldt leakage
        {"heg.mode", ValueType::string, "radial", "radial or 3d"},
        {"heg.radius", ValueType::real, "1", "bump radius R"},
        {"heg.compare_radius", ValueType::real, "2", "second radius for the R comparison"},
        {"heg.n_r", ValueType::integer, "8192", "radial nodes"},
        {"heg.r_max", ValueType::real, "40", "radial box"},
        {"heg.grid_n", ValueType::integer, "128", "3d nodes per axis"},
        {"heg.box", ValueType::real, "4", "3d spatial half-width"},
        {"heg.t", ValueType::string, "0,0.05,0.1,0.15,0.2,0.3,0.4", "times"},
        {"heg.floor", ValueType::real, "1e-8", "localization gate for P_out(0)"},
        {"heg.spread", ValueType::boolean, "true", "also report the temporal spread of the bumps"},
        // temporal spread of NW-localized states
        {"spread.radii", ValueType::string, "0.5,1,2", ""},
        {"spread.n_r", ValueType::integer, "2048", ""},
        {"spread.r_min", ValueType::real, "1e-6", ""},
        {"spread.r_max", ValueType::real, "1000", ""},
        {"spread.coverage", ValueType::real, "0.9999", ""},
        {"spread.leak_t", ValueType::real, "0.1", "time at which leakage is correlated with spread"},
        // Kijowski arrival
        {"kij.px", ValueType::real, "0.1", ""},
        {"kij.py", ValueType::real, "-0.05", ""},
        {"kij.pz", ValueType::real, "2", ""},
        {"kij.rel_width", ValueType::real, "0.05", "sigma / pi^3_0"},
        {"kij.phase", ValueType::real, "0.8", "amplitude phase per unit pi^3"},
        {"kij.grid_n", ValueType::integer, "64", ""},
        {"kij.s_count", ValueType::integer, "256", ""},
        {"kij.z", ValueType::string, "0,0.5,1,1.5,2", "detector planes"},
        {"kij.ambiguity", ValueType::real, "1e-8", "two-sided support warning threshold"},
        // NW transport and density
        {"nw.t", ValueType::string, "0,0.5,1,2", "observer times"},
        {"nw.bins", ValueType::integer, "64", "radial bins of the density"},
        // invariant suite
        {"verify.points", ValueType::integer, "20", "random phase-space points"},
        {"verify.ordering", ValueType::string, "symmetric", "symmetric, left or right"},
        {"verify.grid_n", ValueType::integer, "64", "grid for operator checks"},
        {"verify.scan_n", ValueType::string, "256,512,1024,2048", "radial resolution scan"},
        {"verify.position", ValueType::boolean, "true", "include the position POVM gate"},
        // tolerances
        {"tol.bracket", ValueType::real, "1e-6", ""},
        {"tol.restrict", ValueType::real, "1e-10", ""},
        {"tol.ordering", ValueType::real, "1e-8", ""},
        {"tol.commute", ValueType::real, "1e-6", ""},
        {"tol.canonical", ValueType::real, "1e-8", ""},
        {"tol.velocity", ValueType::real, "1e-8", ""},
        {"tol.completeness", ValueType::real, "1e-3", ""},
        {"tol.position", ValueType::real, "1e-4", ""},
        {"tol.chart", ValueType::real, "1e-5", ""},
        {"tol.slope", ValueType::real, "1e-2", ""},
        {"tol.specfun", ValueType::real, "1e-8", ""},
        {"tol.gamma", ValueType::real, "1e-10", ""},
        {"tol.spread", ValueType::real, "1e-6", ""},
        // state I/O
        {"state_io.action", ValueType::string, "roundtrip", "save, load or roundtrip"},
        {"state_io.path", ValueType::string, "state.bin", "relative to the output directory"},
    };
    return s;
}

struct StateSpec {
    GaussianSpec gaussian;
    EnergySign xi = EnergySign::positive;
};

struct ExperimentConfig {
    io::Config raw;  // resolved entries; hashed into every output
    double mass = 1.0;
    unsigned seed = 0;
    int grid_n = 64;
    double grid_extent = 8.0;
    StateSpec state;

    struct Time {
        RadialGrid grid;
        int l_max = 8;
        double tau = 0.0, refine = 2.0, max_defect = 1e-2;
    } time;

    struct Hegerfeldt {
        std::string mode;
        double radius = 1.0, compare_radius = 2.0;
        int n_r = 8192;
        double r_max = 40.0;
        int grid_n = 128;
        double box = 4.0;
        std::vector<double> t;
        double floor = 1e-8;
        bool spread = true;
    } heg;

    struct Spread {
        std::vector<double> radii;
        RadialGrid grid;
        double coverage = 0.9999, leak_t = 0.1;
    } spread;

    struct Kijowski {
        Vec3 center{};
        double rel_width = 0.05, phase = 0.8;
        int grid_n = 64, s_count = 256;
        std::vector<double> z;
        double ambiguity = 1e-8;
    } kij;

    struct NwScan {
        std::vector<double> t;
        int bins = 64;
    } nw;

    struct Verify {
        int points = 20;
        ops::Ordering ordering = ops::Ordering::symmetric;
        int grid_n = 64;
        std::vector<int> scan_n;
        bool position = true;
    } verify;

    struct Tolerances {
        double bracket, restrict, ordering, commute, canonical, velocity, completeness, position, chart, slope,
            specfun, gamma, spread;
    } tol{};

    struct StateIo {
        std::string action, path;
    } state_io;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { fail(ErrorKind::config, what); }

inline void positive(double v, const char* key) {
    if (!(v > 0.0)) config_error(std::string(key) + " must be positive");
}

inline std::vector<double> nonempty(std::vector<double> v, const char* key) {
    if (v.empty()) config_error(std::string(key) + " must not be empty");
    return v;
}

}  // namespace detail

inline ExperimentConfig make_config(const io::Config& user = {}) {
    const io::Config c = user.resolved(schema());
    ExperimentConfig e;
    e.raw = c;
    e.mass = c.get_real("mass");
    detail::positive(e.mass, "mass");
    const auto xi = c.get_int("xi");
    if (xi != 1 && xi != -1) detail::config_error("xi must be 1 or -1");
    e.state.xi = static_cast<EnergySign>(xi);
    e.seed = static_cast<unsigned>(c.get_int("seed"));
    e.grid_n = static_cast<int>(c.get_int("grid.n"));
    if (e.grid_n < 8) detail::config_error("grid.n must be at least 8");
    e.grid_extent = c.get_real("grid.extent");
    detail::positive(e.grid_extent, "grid.extent");
    auto& g = e.state.gaussian;
    g.width = c.get_real("state.width");
    detail::positive(g.width, "state.width");
    g.center = {c.get_real("state.center_x"), c.get_real("state.center_y"), c.get_real("state.center_z")};
    g.position = {c.get_real("state.position_x"), c.get_real("state.position_y"), c.get_real("state.position_z")};

    e.time.grid = {c.get_real("time.r_min"), c.get_real("time.r_max"), static_cast<int>(c.get_int("time.n_r")), e.mass};
    e.time.l_max = static_cast<int>(c.get_int("time.l_max"));
    if (e.time.l_max < 0) detail::config_error("time.l_max must be non-negative");
    e.time.tau = c.get_real("time.tau");
    e.time.refine = c.get_real("time.refine");
    detail::positive(e.time.refine, "time.refine");
    e.time.max_defect = c.get_real("time.max_defect");
    detail::positive(e.time.max_defect, "time.max_defect");

    e.heg.mode = c.get_string("heg.mode");
    if (e.heg.mode != "radial" && e.heg.mode != "3d") detail::config_error("heg.mode must be radial or 3d");
    e.heg.radius = c.get_real("heg.radius");
    e.heg.compare_radius = c.get_real("heg.compare_radius");
    detail::positive(e.heg.radius, "heg.radius");
    detail::positive(e.heg.compare_radius, "heg.compare_radius");
    e.heg.n_r = static_cast<int>(c.get_int("heg.n_r"));
    if (e.heg.n_r < 64) detail::config_error("heg.n_r must be at least 64");
    e.heg.r_max = c.get_real("heg.r_max");
    detail::positive(e.heg.r_max, "heg.r_max");
    e.heg.grid_n = static_cast<int>(c.get_int("heg.grid_n"));
    if (e.heg.grid_n < 16) detail::config_error("heg.grid_n must be at least 16");
    e.heg.box = c.get_real("heg.box");
    detail::positive(e.heg.box, "heg.box");
    e.heg.t = detail::nonempty(c.get_reals("heg.t"), "heg.t");
    for (double t : e.heg.t)
        if (t < 0.0) detail::config_error("heg.t must be non-negative");
    e.heg.floor = c.get_real("heg.floor");
    detail::positive(e.heg.floor, "heg.floor");
    e.heg.spread = c.get_bool("heg.spread");

    e.spread.radii = detail::nonempty(c.get_reals("spread.radii"), "spread.radii");
    for (double r : e.spread.radii) detail::positive(r, "spread.radii");
    e.spread.grid = {c.get_real("spread.r_min"), c.get_real("spread.r_max"), static_cast<int>(c.get_int("spread.n_r")),
                     e.mass};
    e.spread.coverage = c.get_real("spread.coverage");
    if (!(e.spread.coverage > 0.0 && e.spread.coverage < 1.0)) detail::config_error("spread.coverage must be in (0, 1)");
    e.spread.leak_t = c.get_real("spread.leak_t");
    detail::positive(e.spread.leak_t, "spread.leak_t");

    e.kij.center = {c.get_real("kij.px"), c.get_real("kij.py"), c.get_real("kij.pz")};
    if (e.kij.center[2] == 0.0) detail::config_error("kij.pz must be nonzero");
    e.kij.rel_width = c.get_real("kij.rel_width");
    detail::positive(e.kij.rel_width, "kij.rel_width");
    e.kij.phase = c.get_real("kij.phase");
    e.kij.grid_n = static_cast<int>(c.get_int("kij.grid_n"));
    e.kij.s_count = static_cast<int>(c.get_int("kij.s_count"));
    if (e.kij.grid_n < 16 || e.kij.s_count < 16) detail::config_error("kij.grid_n and kij.s_count must be at least 16");
    e.kij.z = detail::nonempty(c.get_reals("kij.z"), "kij.z");
    e.kij.ambiguity = c.get_real("kij.ambiguity");
    detail::positive(e.kij.ambiguity, "kij.ambiguity");

    e.nw.t = detail::nonempty(c.get_reals("nw.t"), "nw.t");
    e.nw.bins = static_cast<int>(c.get_int("nw.bins"));
    if (e.nw.bins < 4) detail::config_error("nw.bins must be at least 4");

    e.verify.points = static_cast<int>(c.get_int("verify.points"));
    if (e.verify.points < 1) detail::config_error("verify.points must be positive");
    const std::string ord = c.get_string("verify.ordering");
    if (ord == "symmetric")
        e.verify.ordering = ops::Ordering::symmetric;
    else if (ord == "left")
        e.verify.ordering = ops::Ordering::left;
    else if (ord == "right")
        e.verify.ordering = ops::Ordering::right;
    else
        detail::config_error("verify.ordering must be symmetric, left or right");
    e.verify.grid_n = static_cast<int>(c.get_int("verify.grid_n"));
    if (e.verify.grid_n < 16) detail::config_error("verify.grid_n must be at least 16");
    for (double n : detail::nonempty(c.get_reals("verify.scan_n"), "verify.scan_n")) {
        if (n < 8 || n != std::floor(n)) detail::config_error("verify.scan_n entries must be integers >= 8");
        e.verify.scan_n.push_back(static_cast<int>(n));
    }
    e.verify.position = c.get_bool("verify.position");

    auto& t = e.tol;
    const std::pair<double*, const char*> tols[] = {
        {&t.bracket, "tol.bracket"},   {&t.restrict, "tol.restrict"},         {&t.ordering, "tol.ordering"},
        {&t.commute, "tol.commute"},   {&t.canonical, "tol.canonical"},       {&t.velocity, "tol.velocity"},
        {&t.completeness, "tol.completeness"}, {&t.position, "tol.position"}, {&t.chart, "tol.chart"},
        {&t.slope, "tol.slope"},       {&t.specfun, "tol.specfun"},           {&t.gamma, "tol.gamma"},
        {&t.spread, "tol.spread"},
    };
    for (const auto& [p, key] : tols) {
        *p = c.get_real(key);
        detail::positive(*p, key);
    }

    e.state_io.action = c.get_string("state_io.action");
    if (e.state_io.action != "save" && e.state_io.action != "load" && e.state_io.action != "roundtrip")
        detail::config_error("state_io.action must be save, load or roundtrip");
    e.state_io.path = c.get_string("state_io.path");
    if (e.state_io.path.empty()) detail::config_error("state_io.path must not be empty");
    return e;
}

// ---------------------------------------------------------------------------------------------
// Reports

struct ReportRow {
    std::string label;
    double parameter = 0.0;
    double value = 0.0;
    double error = 0.0;
    bool pass = true;
};

struct ExperimentReport {
    std::string name;
    std::vector<ReportRow> rows;
    /// Optional dense table (e.g. a density) written as its own CSV.
    std::string table_name = "table";
    std::vector<std::string> table_header;
    std::vector<std::vector<double>> table;
    json metadata = json::object();
    std::vector<std::string> warnings;

    ReportRow& add(std::string label, double parameter, double value, double error = 0.0, bool pass = true) {
        if (!std::isfinite(parameter) || !std::isfinite(value) || !std::isfinite(error))
            fail(ErrorKind::numerical_domain, "non-finite report row '" + label + "'");
        rows.push_back({std::move(label), parameter, value, error, pass});
        return rows.back();
    }

    bool ok() const {
        for (const auto& r : rows)
            if (!r.pass) return false;
        return true;
    }

    const ReportRow& row(const std::string& label) const {
        for (const auto& r : rows)
            if (r.label == label) return r;
        fail(ErrorKind::invalid_input, "report has no row '" + label + "'");
    }

    std::vector<const ReportRow*> rows_with(const std::string& label) const {
        std::vector<const ReportRow*> out;
        for (const auto& r : rows)
            if (r.label == label) out.push_back(&r);
        return out;
    }

    void append(const ExperimentReport& other) {
        for (const auto& r : other.rows) rows.push_back(r);
        for (const auto& w : other.warnings) warnings.push_back(w);
        for (auto it = other.metadata.begin(); it != other.metadata.end(); ++it) metadata[it.key()] = it.value();
    }
};

namespace detail {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void finish(ExperimentReport& r, const ExperimentConfig& c, const Stopwatch& w) {
    r.metadata["experiment"] = r.name;
    r.metadata["config_hash"] = c.raw.hash_hex();
    r.metadata["runtime_s"] = w.seconds();
    r.metadata["warnings"] = r.warnings;
    r.metadata["ok"] = r.ok();
}

inline Grid3 state_grid(const ExperimentConfig& c, int n) { return cartesian_grid(n, c.grid_extent, c.mass); }

inline MomentumState gaussian(const ExperimentConfig& c, int n) {
    return gaussian_state(state_grid(c, n), c.state.gaussian, c.state.xi);
}

/// The Gaussian of the config as an analytic amplitude (unnormalized).
inline ops::Field gaussian_field(const GaussianSpec& s) {
    const double inv = 1.0 / (4.0 * s.width * s.width);
    return [s, inv](const Vec3& p) {
        const Vec3 d{p[0] - s.center[0], p[1] - s.center[1], p[2] - s.center[2]};
        const double ph = -(p[0] * s.position[0] + p[1] * s.position[1] + p[2] * s.position[2]);
        return std::polar(std::exp(-norm2(d) * inv), ph);
    };
}

inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i];
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, ErrorKind::invalid_input, "slope fit needs at least two distinct abscissae");
    return sxy / sxx;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// Hegerfeldt leakage

/// C^2 bump (1 - (r/R)^2)^3 for r < R.
inline double bump(double r, double radius) {
    const double x = r / radius;
    return x < 1.0 ? std::pow(1.0 - x * x, 3) : 0.0;
}

struct LeakageCurve {
    std::vector<double> t, p_out;
    double floor = 0.0;  // P_out(0)
};

/// P_out(t) = int_{|x| > R + t} |phi(x, t)|^2 / ||phi||^2 for the radial NW bump of radius R.
inline LeakageCurve radial_leakage(double radius, const std::vector<double>& t, int n, double r_max, double mass,
                                   EnergySign xi, double floor_gate) {
    const RadialLine line{n, r_max / n, mass};
    const double t_max = *std::max_element(t.begin(), t.end());
    if (radius >= r_max - line.dr)
        fail(ErrorKind::localization_failure, "bump of radius " + std::to_string(radius) +
                                                  " is clipped by the radial grid (r_max = " + std::to_string(r_max) + ")");
    if (radius + t_max > 0.5 * r_max)
        fail(ErrorKind::localization_failure, "light cone R + t_max = " + std::to_string(radius + t_max) +
                                                  " leaves the inner half of the radial grid");
    RadialProfile prof{line, std::vector<complex>(line.size())};
    for (int i = 0; i < line.size(); ++i) prof.u[i] = line.r(i) * bump(line.r(i), radius);
    const RadialMomentum psi = radial_state_from_profile(prof, xi);
    const double n0 = radial_norm2(radial_nw_profile(psi, 0.0));
    require(n0 > 0.0, ErrorKind::localization_failure, "bump has no grid support");
    LeakageCurve c;
    c.floor = radial_mass_beyond(radial_nw_profile(psi, 0.0), radius) / n0;
    if (c.floor > floor_gate)
        fail(ErrorKind::localization_failure, "P_out(0) = " + std::to_string(c.floor) + " above the localization gate");
    c.t = t;
    for (double s : t) c.p_out.push_back(radial_mass_beyond(radial_nw_profile(psi, s), radius + s) / n0);
    return c;
}

/// The same experiment on a 3-d Cartesian grid of n^3 nodes spanning [-box, box)^3 in position.
inline LeakageCurve cartesian_leakage(double radius, const std::vector<double>& t, int n, double box, double mass,
                                      EnergySign xi, double floor_gate) {
    const double t_max = *std::max_element(t.begin(), t.end());
    if (radius + t_max >= box)
        fail(ErrorKind::localization_failure, "bump plus light cone (" + std::to_string(radius + t_max) +
                                                  ") does not fit in the spatial box " + std::to_string(box));
    const Grid3 g = cartesian_grid(n, n * pi / (2.0 * box), mass);
    const PositionField field = sample_profile(g, [radius](const Vec3& x) { return complex(bump(std::sqrt(norm2(x)), radius)); });
    const MomentumState psi = nw_state_from_profile(field, g, 0.0, xi);
    auto beyond = [](const PositionField& f, double r0) {
        std::vector<double> out, all;
        for (std::size_t i = 0; i < f.amp.size(); ++i) {
            const double d = std::norm(f.amp[i]);
            all.push_back(d);
            if (norm2(f.grid.node(i)) > r0 * r0) out.push_back(d);
        }
        return pairwise_sum(out) / pairwise_sum(all);
    };
    LeakageCurve c;
    c.floor = beyond(nw_transform(psi, 0.0), radius);
    if (c.floor > floor_gate)
        fail(ErrorKind::localization_failure, "P_out(0) = " + std::to_string(c.floor) + " above the localization gate");
    c.t = t;
    for (double s : t) c.p_out.push_back(beyond(nw_transform(psi, s), radius + s));
    return c;
}

inline ExperimentReport hegerfeldt_leakage(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "heg-leakage";
    const auto& h = c.heg;
    const bool radial = h.mode == "radial";
    auto run = [&](double radius, bool fine) {
        return radial ? radial_leakage(radius, h.t, fine ? 2 * h.n_r : h.n_r, h.r_max, c.mass, c.state.xi, h.floor)
                      : cartesian_leakage(radius, h.t, h.grid_n, h.box, c.mass, c.state.xi, h.floor);
    };
    const LeakageCurve a = run(h.radius, false);
    // Discretization error: the radial run is repeated at twice the resolution.
    LeakageCurve fine;
    if (radial) fine = run(h.radius, true);
    const LeakageCurve b = run(h.compare_radius, false);

    r.add("floor", 0.0, a.floor);
    bool monotone = true;
    double prev = -1.0;
    std::vector<std::size_t> order(h.t.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return h.t[i] < h.t[j]; });
    for (std::size_t k : order) {
        const double err = radial ? std::abs(fine.p_out[k] - a.p_out[k]) : 0.0;
        const bool positive = h.t[k] == 0.0 || a.p_out[k] > 10.0 * std::max(a.floor, err);
        r.add("p_out", h.t[k], a.p_out[k], err, positive);
        if (h.t[k] > 0.0) {
            if (a.p_out[k] <= prev) monotone = false;
            prev = a.p_out[k];
        }
    }
    r.add("monotone_in_t", h.radius, monotone ? 1.0 : 0.0, 0.0, monotone);
    for (std::size_t k : order) {
        if (h.t[k] == 0.0) continue;
        const bool smaller = (h.compare_radius > h.radius) == (b.p_out[k] < a.p_out[k]);
        r.add("p_out_compare", h.t[k], b.p_out[k], 0.0, smaller);
    }
    r.metadata["mode"] = h.mode;
    r.metadata["radius"] = h.radius;
    r.metadata["compare_radius"] = h.compare_radius;
    r.metadata["truncation"] = radial ? json{{"n_r", h.n_r}, {"r_max", h.r_max}, {"error_estimate", "2 n_r rerun"}}
                                      : json{{"grid_n", h.grid_n}, {"box", h.box}};
    r.table_name = "leakage";
    r.table_header = {"t", "p_out"};
    for (std::size_t k : order) r.table.push_back({h.t[k], a.p_out[k]});
    detail::finish(r, c, watch);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Temporal spread of NW-localized states

/// psi(p) = sqrt(E/m) (2 pi)^{-3/2} int d^3x exp(-i p.x) bump(|x|) for the radial bump,
/// i.e. sqrt(E/m) sqrt(2/pi) / p int_0^R r bump(r) sin(p r) dr (composite Gauss-Legendre).
inline double bump_momentum(double p, double radius, double mass) {
    static const auto gl = specfun::gauss_legendre(16);
    const double e = std::sqrt(p * p + mass * mass);
    if (p < 1e-8) {
        // sin(pr)/p -> r
        double acc = 0.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double r = 0.5 * radius * (1.0 + gl.nodes[i]);
            acc += 0.5 * radius * gl.weights[i] * r * r * bump(r, radius);
        }
        return std::sqrt(e / mass) * std::sqrt(2.0 / pi) * acc;
    }
    const int panels = static_cast<int>(p * radius / 2.0) + 4;
    std::vector<double> terms;
    terms.reserve(panels * gl.nodes.size());
    for (int k = 0; k < panels; ++k) {
        const double a = radius * k / panels, b = radius * (k + 1) / panels;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double r = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
            terms.push_back(0.5 * (b - a) * gl.weights[i] * r * bump(r, radius) * std::sin(p * r));
        }
    }
    return std::sqrt(e / mass) * std::sqrt(2.0 / pi) / p * pairwise_sum(terms);
}

/// The bump state as an s-wave radial state (psi_00 = sqrt(4 pi) psi(r)), normalized.
inline RadialState bump_radial_state(const RadialGrid& g, double radius, EnergySign xi) {
    check_radial_grid(g);
    RadialState s{g, 0, {std::vector<complex>(g.count)}, xi, 0.0, 0.0};
    parallel_for(static_cast<std::size_t>(g.count), [&](std::size_t i) {
        s.channels[0][i] = std::sqrt(4.0 * pi) * bump_momentum(g.r(static_cast<int>(i)), radius, g.mass);
    });
    s.full_norm2 = norm2(s);
    return normalized(s);
}

inline ExperimentReport temporal_spread_report(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "temporal-spread";
    const auto& sp = c.spread;
    RadialGrid fine = sp.grid;
    fine.count = 2 * sp.grid.count - 1;
    std::vector<double> dts, leaks;
    bool heavy = false;
    for (double radius : sp.radii) {
        const auto m = povm::time_uncertainty(bump_radial_state(sp.grid, radius, c.state.xi), c.time.tau, sp.coverage);
        const auto mf = povm::time_uncertainty(bump_radial_state(fine, radius, c.state.xi), c.time.tau, sp.coverage);
        heavy = heavy || m.heavy_tail || mf.heavy_tail;
        r.add("dt", radius, mf.sigma, std::abs(mf.sigma - m.sigma), mf.sigma > c.tol.spread && m.sigma > c.tol.spread);
        r.add("mean_t", radius, mf.mean, std::abs(mf.mean - m.mean));
        r.add("captured", radius, mf.captured, std::abs(mf.captured - m.captured));
        const auto leak = radial_leakage(radius, {0.0, sp.leak_t}, c.heg.n_r, std::max(c.heg.r_max, 4.0 * (radius + sp.leak_t)),
                                         c.mass, c.state.xi, c.heg.floor);
        r.add("p_out", radius, leak.p_out[1]);
        dts.push_back(mf.sigma);
        leaks.push_back(leak.p_out[1]);
    }
    if (heavy)
        r.warnings.push_back("p(t) has a heavy tail for at least one bump: dt is the spread inside the resolved window");
    // Exploratory only: correlation between temporal spread and leakage across radii.
    if (dts.size() >= 2) {
        const double n = static_cast<double>(dts.size());
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < dts.size(); ++i) ma += dts[i] / n, mb += leaks[i] / n;
        double sab = 0, saa = 0, sbb = 0;
        for (std::size_t i = 0; i < dts.size(); ++i) {
            sab += (dts[i] - ma) * (leaks[i] - mb);
            saa += (dts[i] - ma) * (dts[i] - ma);
            sbb += (leaks[i] - mb) * (leaks[i] - mb);
        }
        if (saa > 0 && sbb > 0) r.metadata["exploratory_dt_leakage_correlation"] = sab / std::sqrt(saa * sbb);
    }
    r.metadata["truncation"] = {{"n_r", sp.grid.count}, {"n_r_fine", fine.count}, {"r_min", sp.grid.r_min},
                                {"r_max", sp.grid.r_max}, {"coverage", sp.coverage}};
    detail::finish(r, c, watch);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Kijowski arrival times

struct KijowskiPacket {
    Vec3 center{0.0, 0.0, 2.0};
    double width = 0.1;
    double phase = 0.8;

    complex operator()(const Vec3& p) const {
        const Vec3 d{p[0] - center[0], p[1] - center[1], p[2] - center[2]};
        return std::polar(std::exp(-norm2(d) / (4.0 * width * width)), phase * p[2]);
    }
};

struct KijowskiStates {
    MomentumState pi_state;  // momentum chart, normalized
    MomentumState s_state;   // s-chart, sampled directly
    double two_sided = 0.0;  // Gaussian estimate of the measure with the opposite sign of pi^3
};

/// Both charts of a one-sided packet on a grid centred on the packet. The grid is clipped
/// before pi^3 = 0; the discarded opposite-sign part is reported.
inline KijowskiStates kijowski_states(const KijowskiPacket& pk, int n, int s_count, double mass) {
    const double pz = std::abs(pk.center[2]);
    const double half = std::min(7.0 * pk.width, 0.95 * pz);
    const Grid3 g = cartesian_grid(n, half, mass, true, pk.center);
    const MomentumState raw = sample_state(g, EnergySign::positive, pk);
    const double c = 1.0 / norm(raw);
    KijowskiStates k;
    k.pi_state = normalized(raw);
    k.s_state = ops::s_chart_from_function(ops::s_chart_grid(g, ops::s_axis_for(g, s_count)),
                                           [&](const Vec3& p) { return c * pk(p); });
    k.two_sided = 0.5 * std::erfc(pz / (std::sqrt(2.0) * pk.width));
    return k;
}

inline ExperimentReport kijowski_arrival_scan(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "kijowski-arrival";
    if (c.state.xi != EnergySign::positive) fail(ErrorKind::invalid_chart, "the s-chart is defined on positive energy");
    const KijowskiPacket pk{c.kij.center, c.kij.rel_width * std::abs(c.kij.center[2]), c.kij.phase};
    const auto k = kijowski_states(pk, c.kij.grid_n, c.kij.s_count, c.mass);
    if (k.two_sided > c.kij.ambiguity)
        r.warnings.push_back("ambiguous arrival: " + io::format_real(k.two_sided) +
                             " of the packet has the opposite sign of pi^3 and was clipped");
    const auto pos = EnergySign::positive;
    std::vector<double> zs, ts;
    for (double z : c.kij.z) {
        const complex t = ops::expectation(ops::kijowski_time(z, pos, c.mass), k.s_state);
        const double var = ops::variance(ops::kijowski_time(z, pos, c.mass), k.s_state);
        r.add("arrival_time", z, t.real(), std::abs(t.imag()));
        r.add("arrival_spread", z, std::sqrt(std::max(var, 0.0)), 0.0, var > 0.0);
        zs.push_back(z);
        ts.push_back(t.real());
    }
    // z = 0 chart agreement.
    const complex ts0 = ops::expectation(ops::kijowski_time(0.0, pos, c.mass), k.s_state);
    const complex tp0 = ops::expectation(ops::kijowski_time_pi(0.0, pos, c.mass), k.pi_state);
    r.add("chart_agreement", 0.0, std::abs(ts0 - tp0), 0.0, std::abs(ts0 - tp0) < c.tol.chart);
    if (zs.size() >= 2) {
        const double slope = detail::least_squares_slope(zs, ts);
        const double quad =
            expect_multiplier(k.pi_state, [m = c.mass](const Vec3& p) { return complex(energy(p, m) / p[2]); }).real();
        const Vec3& p0 = pk.center;
        const classical::PhasePoint cl{{0, 0, 0, 0}, {energy(p0, c.mass), p0[0], p0[1], p0[2]}, c.mass};
        const double classical_slope = classical::arrival_time(cl, 1.0) - classical::arrival_time(cl, 0.0);
        const double rel = std::abs(slope - classical_slope) / std::abs(classical_slope);
        r.add("slope", 0.0, slope, std::abs(slope - quad));
        r.add("slope_quadrature", 0.0, quad);
        r.add("slope_classical", 0.0, classical_slope, rel, rel < c.tol.slope);
    }
    r.metadata["packet"] = {{"center", {pk.center[0], pk.center[1], pk.center[2]}}, {"width", pk.width}};
    r.metadata["two_sided_fraction"] = k.two_sided;
    r.metadata["truncation"] = {{"grid_n", c.kij.grid_n}, {"s_count", c.kij.s_count}};
    detail::finish(r, c, watch);
    return r;
}

// ---------------------------------------------------------------------------------------------
// NW transport and density

inline ExperimentReport nw_velocity_scan(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "nw-velocity";
    const MomentumState psi = detail::gaussian(c, c.grid_n);
    const auto spectral = DerivativeScheme::spectral;
    for (int j = 1; j <= 3; ++j) {
        std::vector<double> xs;
        for (double t : c.nw.t) {
            const complex x = ops::expectation(ops::newton_wigner(j, t, psi.xi, c.mass), psi, spectral);
            r.add("x" + std::to_string(j), t, x.real(), std::abs(x.imag()));
            xs.push_back(x.real());
        }
        const double quad =
            expect_multiplier(psi, [j, m = c.mass](const Vec3& p) { return complex(p[j - 1] / energy(p, m)); }).real();
        if (c.nw.t.size() >= 2) {
            const double slope = detail::least_squares_slope(c.nw.t, xs);
            const double err = std::abs(slope - quad);
            r.add("velocity" + std::to_string(j), j, slope, err, err < c.tol.velocity && std::abs(slope) < 1.0);
        }
        r.add("velocity_quadrature" + std::to_string(j), j, quad);
    }
    r.metadata["truncation"] = {{"grid_n", c.grid_n}, {"extent", c.grid_extent}};
    detail::finish(r, c, watch);
    return r;
}

/// Radially binned NW density of the configured Gaussian at the configured times.
inline ExperimentReport nw_density(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "nw-density";
    const MomentumState psi = detail::gaussian(c, c.grid_n);
    r.table_name = "density";
    r.table_header = {"t", "r", "density"};
    for (double t : c.nw.t) {
        const PositionField f = nw_transform(psi, t);
        double rmax = 0.0;
        for (const auto& a : f.grid.axes) rmax = std::max(rmax, -a.origin);
        const int bins = c.nw.bins;
        const double dr = rmax / bins;
        std::vector<std::vector<double>> mass(bins);
        std::vector<double> all;
        for (std::size_t i = 0; i < f.amp.size(); ++i) {
            const double d = std::norm(f.amp[i]) * f.grid.cell_volume();
            all.push_back(d);
            const int b = static_cast<int>(std::sqrt(norm2(f.grid.node(i))) / dr);
            if (b < bins) mass[b].push_back(d);
        }
        for (int b = 0; b < bins; ++b) {
            const double shell = 4.0 * pi / 3.0 * (std::pow((b + 1) * dr, 3) - std::pow(b * dr, 3));
            r.table.push_back({t, (b + 0.5) * dr, pairwise_sum(mass[b]) / shell});
        }
        const double total = pairwise_sum(all);
        r.add("norm", t, total, std::abs(total - 1.0), std::abs(total - 1.0) < 1e-6);
        r.add("tail_decay", t, nw_tail_decay(f));
    }
    r.metadata["truncation"] = {{"grid_n", c.grid_n}, {"extent", c.grid_extent}, {"bins", c.nw.bins}};
    detail::finish(r, c, watch);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Time POVM density

inline ExperimentReport time_povm_report(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "time-povm";
    const auto f = detail::gaussian_field(c.state.gaussian);
    const RadialState s = normalized(radial_from_function(c.time.grid, c.time.l_max, c.state.xi, f));
    const auto t = povm::auto_time_grid(s, c.time.tau, c.time.refine);
    const auto d = povm::time_distribution(s, c.time.tau, t, c.time.max_defect);
    const auto m = povm::time_uncertainty(s, c.time.tau);
    r.add("integral", 0.0, d.integral, d.defect, d.defect < c.tol.completeness);
    r.add("mean_t", 0.0, m.mean);
    r.add("dt", 0.0, m.sigma, 0.0, m.sigma > c.tol.spread);
    r.add("angular_truncation", c.time.l_max, s.reconstruction_error);
    if (m.heavy_tail) r.warnings.push_back("p(t) has a heavy tail; moments are window-limited");
    r.table_name = "density";
    r.table_header = {"t", "density"};
    for (std::size_t k = 0; k < d.t.size(); ++k) r.table.push_back({d.t[k], d.p[k]});
    r.metadata["truncation"] = {{"n_r", c.time.grid.count}, {"r_min", c.time.grid.r_min}, {"r_max", c.time.grid.r_max},
                                {"l_max", c.time.l_max}, {"resolved_time", povm::resolved_time(c.time.grid)},
                                {"angular_loss", s.reconstruction_error}};
    r.metadata["defect"] = d.defect;
    detail::finish(r, c, watch);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Invariant suite pieces

inline classical::PhasePoint random_on_shell(std::mt19937_64& rng, double mass) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    classical::PhasePoint s;
    s.mass = mass;
    for (int mu = 0; mu < 4; ++mu) s.x[mu] = u(rng);
    for (int k = 1; k < 4; ++k) s.p[k] = u(rng);
    s.p[0] = std::sqrt(s.p[1] * s.p[1] + s.p[2] * s.p[2] + s.p[3] * s.p[3] + mass * mass);
    return s;
}

/// Brackets of the restricted four-position: {Q~,Q~} = 0, {Q~^mu, Pi^nu} = eta - Pi^mu u^nu/(u.Pi),
/// {J~^{mu nu}, Q~^s} = {Q~^s,Pi^mu} Q~^nu - {Q~^s,Pi^nu} Q~^mu; worst residual over random points.
inline ExperimentReport classical_brackets(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "classical-brackets";
    using namespace classical;
    std::mt19937_64 rng(c.seed);
    const Vec4 u{1.0, 0.0, 0.0, 0.0};
    const double t = 0.4;
    const BracketOptions opt{1e-4, true};
    double wa = 0, wb = 0, wc = 0;
    for (int n = 0; n < c.verify.points; ++n) {
        const PhasePoint s = random_on_shell(rng, c.mass);
        const Vec4 q = restricted_instantaneous(s, u, t);
        for (int mu = 0; mu < 4; ++mu)
            for (int nu = 0; nu < 4; ++nu) {
                if (mu < nu)
                    wa = std::max(wa, std::abs(poisson_bracket(restricted_component(mu, u, t), restricted_component(nu, u, t), s, 0.0, opt)));
                wb = std::max(wb, std::abs(poisson_bracket(restricted_component(mu, u, t), momentum_component(nu), s, 0.0, opt) -
                                           restricted_momentum_bracket(s, u, mu, nu)));
            }
        // one (mu, nu, sigma) triple per point keeps the suite fast
        const int mu = n % 4, nu = (n + 1 + n / 4) % 4, sg = (n + 2) % 4;
        if (mu != nu) {
            const double lhs = poisson_bracket(restricted_angular_momentum(mu, nu, u, t), restricted_component(sg, u, t), s, 0.0, opt);
            const double a = poisson_bracket(restricted_component(sg, u, t), momentum_component(mu), s, 0.0, opt);
            const double b = poisson_bracket(restricted_component(sg, u, t), momentum_component(nu), s, 0.0, opt);
            wc = std::max(wc, std::abs(lhs - (a * q[nu] - b * q[mu])));
        }
    }
    r.add("bracket_qq", c.verify.points, wa, 0.0, wa < c.tol.bracket);
    r.add("bracket_qpi", c.verify.points, wb, 0.0, wb < c.tol.bracket);
    r.add("bracket_jq", c.verify.points, wc, 0.0, wc < c.tol.bracket);
    // Weak equality: off the shell the (Q~^2, Pi^2) residual is linear in the shell offset.
    const PhasePoint s = random_on_shell(rng, c.mass);
    auto residual = [&](double eps) {
        PhasePoint p = s;
        p.p[0] = std::sqrt(p.p[1] * p.p[1] + p.p[2] * p.p[2] + p.p[3] * p.p[3] + p.mass * p.mass - eps);
        const double v = poisson_bracket(restricted_component(2, u, 0.1), momentum_component(2), p, 0.0, opt);
        return std::pair{v - restricted_momentum_bracket(p, u, 2, 2), p.shell_residual()};
    };
    const auto [r1, e1] = residual(1e-3);
    const auto [r2, e2] = residual(2e-3);
    const double ratio = (r2 / r1) / (e2 / e1);
    r.add("offshell_linearity", e2 / e1, ratio, std::abs(ratio - 1.0), std::abs(ratio - 1.0) < 1e-3);
    detail::finish(r, c, watch);
    return r;
}

/// Root-summed restriction against the closed form; fixed-z slope against E/p^3.
inline ExperimentReport classical_restriction(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "classical-restriction";
    using namespace classical;
    std::mt19937_64 rng(c.seed + 1);
    const Vec4 u{1.0, 0.0, 0.0, 0.0};
    RestrictOptions generic;
    generic.closed_form = false;
    double wr = 0.0, ws = 0.0;
    for (int n = 0; n < c.verify.points; ++n) {
        const PhasePoint s = random_on_shell(rng, c.mass);
        const double t = -2.0 + 4.0 * n / std::max(1, c.verify.points - 1);
        const Vec4 q = restricted_instantaneous(s, u, t);
        for (int mu = 0; mu < 4; ++mu)
            wr = std::max(wr, std::abs(restrict_classical(four_position_component(mu), instantaneous_surface(u, t), s, generic) - q[mu]));
        if (std::abs(s.p[3]) > 1e-3) {
            const double slope = restrict_classical(four_position_component(0), fixed_z_surface(1.0), s) -
                                 restrict_classical(four_position_component(0), fixed_z_surface(0.0), s);
            ws = std::max(ws, std::abs(slope - s.p[0] / s.p[3]) / std::abs(s.p[0] / s.p[3]));
        }
    }
    r.add("restriction_closed_form", c.verify.points, wr, 0.0, wr < c.tol.restrict);
    r.add("fixed_z_slope", c.verify.points, ws, 0.0, ws < c.tol.restrict);
    detail::finish(r, c, watch);
    return r;
}

inline ExperimentReport classical_check(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r = classical_brackets(c);
    r.append(classical_restriction(c));
    r.name = "classical-check";
    detail::finish(r, c, watch);
    return r;
}

/// ||xi i pi^j / (2E^2) psi|| / ||psi||: what a one-sided ordering leaves behind.
inline double anticommutator_norm(const MomentumState& psi, int j) {
    MomentumState t = psi;
    const double xi = sign_value(psi.xi);
    for (std::size_t i = 0; i < t.amp.size(); ++i) {
        const Vec3 p = psi.grid.node(i);
        const double e = energy(p, psi.grid.mass);
        t.amp[i] *= complex(0.0, xi * p[j - 1] / (2.0 * e * e));
    }
    return norm(t) / norm(psi);
}

/// X_NW = Q^j - g:Q^0 + g t with the configured ordering, for states sharing one grid. The
/// difference operator is tabulated once per (j, xi). Rows are grouped by state, then j.
inline ExperimentReport ordering_identity(const ExperimentConfig& c, const std::vector<MomentumState>& states) {
    ExperimentReport r;
    r.name = "ordering";
    if (states.empty()) return r;
    const Grid3& grid = states.front().grid;
    const double m = grid.mass;
    std::vector<std::array<double, 3>> res(states.size());
    for (auto xi : {EnergySign::positive, EnergySign::negative}) {
        if (std::none_of(states.begin(), states.end(), [xi](const auto& s) { return s.xi == xi; })) continue;
        for (int j = 1; j <= 3; ++j) {
            const auto diff = ops::tabulate(
                ops::newton_wigner(j, 0.5, xi, m) - ops::nw_from_four_position(j, 0.5, xi, m, c.verify.ordering), grid);
            for (std::size_t n = 0; n < states.size(); ++n)
                if (states[n].xi == xi) res[n][j - 1] = norm(ops::apply(diff, states[n])) / norm(states[n]);
        }
    }
    for (std::size_t n = 0; n < states.size(); ++n)
        for (int j = 1; j <= 3; ++j) {
            const double control = anticommutator_norm(states[n], j);
            r.add("ordering_residual", j, res[n][j - 1], control, res[n][j - 1] < c.tol.ordering);
        }
    r.metadata["ordering"] = ops::to_string(c.verify.ordering);
    return r;
}

inline ExperimentReport ordering_identity(const ExperimentConfig& c, const MomentumState& psi) {
    return ordering_identity(c, std::vector<MomentumState>{psi});
}

inline ExperimentReport nw_algebra(const ExperimentConfig& c, const MomentumState& psi) {
    ExperimentReport r;
    r.name = "nw-algebra";
    const auto xi = psi.xi;
    const double m = c.mass;
    double wc = 0.0;
    for (int a = 1; a <= 3; ++a)
        for (int b = a + 1; b <= 3; ++b)
            wc = std::max(wc, norm(ops::apply(ops::commutator(ops::newton_wigner(a, 0.5, xi, m), ops::newton_wigner(b, 0.5, xi, m)), psi)) /
                                  norm(psi));
    r.add("nw_commute", 0.5, wc, 0.0, wc < c.tol.commute);
    double wk = 0.0;
    for (int j = 1; j <= 3; ++j)
        for (int k = 1; k <= 3; ++k) {
            MomentumState d = ops::apply(ops::commutator(ops::newton_wigner(j, 0.3, xi, m), ops::momentum(k, xi, m)), psi);
            const complex expect = j == k ? complex(0.0, sign_value(xi)) : complex(0.0);
            for (std::size_t i = 0; i < d.amp.size(); ++i) d.amp[i] -= expect * psi.amp[i];
            wk = std::max(wk, norm(d) / norm(psi));
        }
    r.add("nw_canonical", 0.3, wk, 0.0, wk < c.tol.canonical);
    double wv = 0.0;
    for (int j = 1; j <= 3; ++j) {
        const complex a = ops::expectation(ops::newton_wigner(j, 0.0, xi, m), psi, DerivativeScheme::spectral);
        const complex b = ops::expectation(ops::newton_wigner(j, 2.0, xi, m), psi, DerivativeScheme::spectral);
        const double v = expect_multiplier(psi, [j, m](const Vec3& p) { return complex(p[j - 1] / energy(p, m)); }).real();
        wv = std::max(wv, std::abs((b - a).real() / 2.0 - v));
    }
    r.add("nw_velocity", 2.0, wv, 0.0, wv < c.tol.velocity);
    return r;
}

/// int p(t) dt = 1 at the configured resolution, and the defect over a radial resolution scan
/// (decreasing, or already at the rounding floor).
inline ExperimentReport time_completeness(const ExperimentConfig& c) {
    ExperimentReport r;
    r.name = "time-completeness";
    const auto f = detail::gaussian_field(c.state.gaussian);
    auto defect_at = [&](int n) {
        RadialGrid g = c.time.grid;
        g.count = n;
        const RadialState s = normalized(radial_from_function(g, c.time.l_max, c.state.xi, f));
        return povm::time_distribution(s, c.time.tau, povm::auto_time_grid(s, c.time.tau, c.time.refine), 1.0);
    };
    const auto d = defect_at(c.time.grid.count);
    r.add("time_integral", c.time.grid.count, d.integral, d.defect, d.defect < c.tol.completeness);
    double prev = std::numeric_limits<double>::infinity();
    for (int n : c.verify.scan_n) {
        const double def = defect_at(n).defect;
        r.add("time_defect_scan", n, def, 0.0, def < prev || def < 1e-9);
        prev = def;
    }
    return r;
}

inline ExperimentReport position_completeness(const ExperimentConfig& c) {
    ExperimentReport r;
    r.name = "position-completeness";
    const auto f = detail::gaussian_field(c.state.gaussian);
    povm::PositionOptions o;
    o.max_defect = 1.0;
    const auto d = povm::position_distribution(f, c.state.xi, povm::hyperbolic_maps(c.mass), {}, c.mass, o);
    r.add("position_defect", o.n_nu, d.defect, d.lambda_tail, d.defect < c.tol.position);
    r.metadata["position_maps"] = d.maps;
    return r;
}

inline ExperimentReport kijowski_charts(const ExperimentConfig& c, const std::vector<KijowskiPacket>& packets) {
    ExperimentReport r;
    r.name = "kijowski-charts";
    const auto pos = EnergySign::positive;
    for (std::size_t n = 0; n < packets.size(); ++n) {
        const auto k = kijowski_states(packets[n], c.kij.grid_n, c.kij.s_count, c.mass);
        double w = std::abs(ops::expectation(ops::kijowski_time(0.0, pos, c.mass), k.s_state) -
                            ops::expectation(ops::kijowski_time_pi(0.0, pos, c.mass), k.pi_state));
        for (int j = 1; j <= 2; ++j)
            w = std::max(w, std::abs(ops::expectation(ops::kijowski_transverse(j, 0.0, pos, c.mass), k.s_state) -
                                     ops::expectation(ops::kijowski_transverse_pi(j, 0.0, pos, c.mass), k.pi_state)));
        r.add("kijowski_chart", static_cast<double>(n), w, 0.0, w < c.tol.chart);
    }
    return r;
}

inline ExperimentReport special_functions(const ExperimentConfig& c) {
    ExperimentReport r;
    r.name = "specfun";
    double wg = 0.0;
    for (double y = 0.0; y <= 20.0; y += 0.5) {
        const double lhs = std::exp(2.0 * specfun::log_gamma(complex(0.5, y)).real());
        wg = std::max(wg, std::abs(lhs - pi / std::cosh(pi * y)) / (pi / std::cosh(pi * y)));
    }
    r.add("gamma_half_line", 20.0, wg, 0.0, wg < c.tol.gamma);
    double wp = 0.0;
    for (int mu = 0; mu <= 4; ++mu)
        for (double lam = 0.0; lam <= 4.0; lam += 0.5)
            for (int i = 0; i <= 9; ++i) {
                const double x = 1.05 + 0.05 * i;
                wp = std::max(wp, std::abs(specfun::conical_p_series({mu, lam}, x) - specfun::conical_p_integral({mu, lam}, x)));
            }
    r.add("conical_dual_path", 4.0, wp, 0.0, wp < c.tol.specfun);
    const int lmax = 8, n = specfun::lm_count(lmax);
    const auto gl = specfun::gauss_legendre(24);
    const int nphi = 32;
    std::vector<complex> gram(n * n, 0.0);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double th = std::acos(gl.nodes[i]);
        for (int k = 0; k < nphi; ++k) {
            const auto y = specfun::spherical_harmonics(lmax, th, 2.0 * pi * k / nphi);
            const double w = gl.weights[i] * 2.0 * pi / nphi;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) gram[a * n + b] += w * std::conj(y[a]) * y[b];
        }
    }
    double wy = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) wy = std::max(wy, std::abs(gram[a * n + b] - (a == b ? 1.0 : 0.0)));
    r.add("ylm_orthonormal", lmax, wy, 0.0, wy < c.tol.gamma);
    return r;
}

/// All module invariants as pass/fail rows. Failures are rows, not exceptions.
inline ExperimentReport verify_suite(const ExperimentConfig& c) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "verify";
    auto guarded = [&](const char* label, auto&& body) {
        try {
            r.append(body());
        } catch (const Error& e) {
            r.add(std::string(label) + "_error", 0.0, 0.0, 0.0, false);
            r.warnings.push_back(std::string(label) + ": " + e.what());
        }
    };
    guarded("classical", [&] { return classical_brackets(c); });
    guarded("restriction", [&] { return classical_restriction(c); });
    const MomentumState psi = detail::gaussian(c, c.verify.grid_n);
    guarded("ordering", [&] { return ordering_identity(c, psi); });
    guarded("nw_algebra", [&] { return nw_algebra(c, psi); });
    guarded("time", [&] { return time_completeness(c); });
    if (c.verify.position) guarded("position", [&] { return position_completeness(c); });
    if (c.state.xi == EnergySign::positive) {
        const KijowskiPacket pk{c.kij.center, c.kij.rel_width * std::abs(c.kij.center[2]), c.kij.phase};
        guarded("kijowski", [&] { return kijowski_charts(c, {pk}); });
    }
    guarded("specfun", [&] { return special_functions(c); });
    detail::finish(r, c, watch);
    return r;
}

// ---------------------------------------------------------------------------------------------
// State files

inline ExperimentReport state_io_report(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
    detail::Stopwatch watch;
    ExperimentReport r;
    r.name = "state-io";
    const std::filesystem::path path = out_dir / c.state_io.path;
    const auto& action = c.state_io.action;
    MomentumState saved;
    if (action == "save" || action == "roundtrip") {
        saved = detail::gaussian(c, c.grid_n);
        io::save_state(path, saved, {{"config_hash", c.raw.hash_hex()}});
        r.add("saved_norm", saved.amp.size(), norm(saved));
    }
    if (action == "load" || action == "roundtrip") {
        const MomentumState loaded = io::load_state(path);
        r.add("loaded_norm", loaded.amp.size(), norm(loaded));
        if (action == "roundtrip") {
            const bool same = loaded.grid == saved.grid && loaded.xi == saved.xi && loaded.amp == saved.amp;
            r.add("bit_identical", loaded.amp.size(), same ? 1.0 : 0.0, 0.0, same);
        }
    }
    r.metadata["path"] = path.filename().string();
    detail::finish(r, c, watch);
    return r;
}

}  // namespace ptloc::experiments

#endif
