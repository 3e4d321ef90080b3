#include "pcf/experiments.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>

#include "pcf/errors.hpp"
#include "pcf/genkahler.hpp"
#include "pcf/grf.hpp"
#include "pcf/homogeneous.hpp"
#include "pcf/io.hpp"
#include "pcf/potential.hpp"

namespace pcf {

namespace fs = std::filesystem;

namespace {

const char* kExperiments[] = {"torus_pcf", "grf_coupled", "potential_pcf", "homogeneous",
                              "twisted_ma", "cone", "fixedpoint_checks"};

// Read-only view of a JSON object that reports errors with the full field path.
class Cfg {
public:
    Cfg(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }
    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw ValidationError(path + ": " + what);
    }
    std::string path(const std::string& key) const { return path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    Cfg sub(const std::string& key) const {
        static const json empty = json::object();
        return has(key) ? Cfg(j_.at(key), path(key)) : Cfg(empty, path(key));
    }
    const json& raw(const std::string& key) const {
        if (!has(key)) fail(path(key), "required");
        return j_.at(key);
    }

    double num(const std::string& key, std::optional<double> def = {}) const {
        if (!has(key)) {
            if (def) return *def;
            fail(path(key), "required");
        }
        const json& v = j_.at(key);
        if (!v.is_number()) fail(path(key), "expected a number");
        double d = v.get<double>();
        if (!std::isfinite(d)) fail(path(key), "must be finite");
        return d;
    }
    double positive(const std::string& key, std::optional<double> def = {}) const {
        double d = num(key, def);
        if (!(d > 0)) fail(path(key), "must be positive");
        return d;
    }
    long integer(const std::string& key, std::optional<long> def = {}) const {
        if (!has(key)) {
            if (def) return *def;
            fail(path(key), "required");
        }
        const json& v = j_.at(key);
        if (!v.is_number_integer()) fail(path(key), "expected an integer");
        return v.get<long>();
    }
    bool flag(const std::string& key, bool def) const {
        if (!has(key)) return def;
        if (!j_.at(key).is_boolean()) fail(path(key), "expected true or false");
        return j_.at(key).get<bool>();
    }
    std::string str(const std::string& key, std::optional<std::string> def = {}) const {
        if (!has(key)) {
            if (def) return *def;
            fail(path(key), "required");
        }
        if (!j_.at(key).is_string()) fail(path(key), "expected a string");
        return j_.at(key).get<std::string>();
    }
    void allow(const std::vector<const char*>& keys) const {
        for (auto& [k, v] : j_.items()) {
            bool ok = false;
            for (const char* a : keys) ok = ok || k == a;
            if (!ok) fail(path(k), "unknown field");
        }
    }

private:
    const json& j_;
    std::string path_;
};

struct Common {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string output;
    ChartGrid grid;
};

Common common(const Cfg& c) {
    Common r;
    r.experiment = c.str("experiment");
    bool known = false;
    for (const char* e : kExperiments) known = known || r.experiment == e;
    if (!known) Cfg::fail(c.path("experiment"), "unknown experiment '" + r.experiment + "'");
    long seed = c.integer("seed", 0);
    if (seed < 0) Cfg::fail(c.path("seed"), "must be nonnegative");
    r.seed = std::uint64_t(seed);
    r.output = c.str("output", r.experiment);
    if (r.output.empty() || r.output.find("..") != std::string::npos || r.output.front() == '/')
        Cfg::fail(c.path("output"), "must be a relative directory name");
    Cfg g = c.sub("grid");
    g.allow({"n", "period"});
    long n = g.integer("n", 8);
    double period = g.positive("period", 2 * M_PI);
    if (n < 8 || n > 64 || (n & (n - 1)) != 0) Cfg::fail(g.path("n"), "must be a power of two between 8 and 64");
    r.grid = ChartGrid(int(n), period);
    if (c.has("tolerances")) {
        Cfg t = c.sub("tolerances");
        for (auto& item : c.raw("tolerances").items()) t.positive(item.key());
    }
    return r;
}

double tol(const Cfg& c, const std::string& key, double def) { return c.sub("tolerances").positive(key, def); }

AlphaModes alpha_spec(const Cfg& c, std::uint64_t seed) {
    if (c.has("modes")) {
        c.allow({"modes"});
        const json& arr = c.raw("modes");
        if (!arr.is_array()) Cfg::fail(c.path("modes"), "expected a list");
        AlphaModes m;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Cfg md(arr[i], c.path("modes") + "[" + std::to_string(i) + "]");
            md.allow({"comp", "k", "re", "im"});
            AlphaMode a;
            long comp = md.integer("comp");
            if (comp != 0 && comp != 1) Cfg::fail(md.path("comp"), "must be 0 or 1");
            a.comp = int(comp);
            const json& k = md.raw("k");
            if (!k.is_array() || k.size() != 4) Cfg::fail(md.path("k"), "expected 4 integers");
            for (int q = 0; q < 4; ++q) {
                if (!k[q].is_number_integer()) Cfg::fail(md.path("k"), "expected 4 integers");
                a.k[q] = k[q].get<int>();
            }
            a.coef = cplx(md.num("re", 0), md.num("im", 0));
            m.modes.push_back(a);
        }
        return m;
    }
    c.allow({"nmodes", "kmax", "amplitude"});
    long nm = c.integer("nmodes", 6), km = c.integer("kmax", 1);
    if (nm < 1) Cfg::fail(c.path("nmodes"), "must be at least 1");
    if (km < 1) Cfg::fail(c.path("kmax"), "must be at least 1");
    return random_alpha(seed, int(nm), int(km), c.positive("amplitude", 0.03));
}

json check(const std::string& name, double value, double tolerance, const std::string& anchor) {
    return {{"name", name}, {"value", value}, {"tolerance", tolerance}, {"pass", value < tolerance}, {"anchor", anchor}};
}

std::vector<double> vec_of(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }

struct Out {
    fs::path dir;
    json artifacts = json::array();
    std::string csv(const std::string& name) {
        artifacts.push_back(name);
        return (dir / name).string();
    }
    void snapshot(const std::string& name, const Snapshot& s) {
        write_snapshot((dir / name).string(), s);
        artifacts.push_back(name);
    }
};

double fitted_rate(const std::vector<double>& t, const std::vector<double>& y) {
    std::vector<double> tt, yy;
    for (std::size_t i = t.size() / 2; i < t.size(); ++i)
        if (y[i] > 0) {
            tt.push_back(t[i]);
            yy.push_back(y[i]);
        }
    if (tt.size() < 3) return 0;
    return fit_exponential(tt, yy).rate;
}

// ---- experiments

void torus_pcf(const Cfg& c, const Common& cm, Out& out, json& s) {
    AlphaModes m = alpha_spec(c.sub("alpha"), cm.seed);
    double t_end = c.positive("t_end", 1.0), cfl = c.positive("cfl", 0.2);
    long every = c.integer("sample_every", 10);
    if (every < 1) Cfg::fail(c.path("sample_every"), "must be at least 1");
    HermField g = m.metric_field(cm.grid);
    validate_metric(g);
    out.snapshot("initial.pcfs", snapshot_of(g, 0));
    double dt = max_stable_dt(cm.grid, cfl);
    int n = int(std::ceil(t_end / dt));
    dt = t_end / n;
    CsvWriter csv(out.csv("series.csv"), {"t", "flat_distance", "torsion_l2", "min_eig", "pluriclosed_residual"});
    std::vector<double> ts, fd;
    StepOptions so;
    so.cfl = cfl;
    double pl_max = 0;
    auto sample = [&](double t) {
        double d = flat_distance(g), pl = check_pluriclosed(g);
        pl_max = std::max(pl_max, pl);
        ts.push_back(t);
        fd.push_back(d);
        csv.row({t, d, torsion_l2(g), g.min_eigenvalue().first, pl});
    };
    sample(0);
    for (int i = 1; i <= n; ++i) {
        g = step_flow(g, dt, so);
        if (i % every == 0 || i == n) sample(i * dt);
    }
    out.snapshot("final.pcfs", snapshot_of(g, t_end));
    s["results"] = {{"initial_flat_distance", fd.front()},
                    {"final_flat_distance", fd.back()},
                    {"monotone_tail", monotone_tail(fd)},
                    {"fitted_decay_rate", fitted_rate(ts, fd)},
                    {"steps", n},
                    {"dt", dt}};
    s["checks"].push_back(check("pluriclosed residual", pl_max, tol(c, "pluriclosed", 1e-6),
                                "the flow preserves the pluriclosed condition"));
}

void potential_pcf(const Cfg& c, const Common& cm, Out& out, json& s) {
    AlphaModes m = alpha_spec(c.sub("alpha"), cm.seed);
    PotentialRunOptions opt;
    opt.cfl = c.positive("cfl", 0.2);
    long every = c.integer("sample_every", 10);
    if (every < 1) Cfg::fail(c.path("sample_every"), "must be at least 1");
    opt.sample_every = int(every);
    double t_end = c.positive("t_end", 1.0);
    PotentialForm a = m.sample(cm.grid);
    out.snapshot("initial.pcfs", snapshot_of(metric_from_alpha(a), 0));
    CsvWriter csv(out.csv("series.csv"), {"t", "flat_distance", "det_w_dev", "torsion_l2", "min_eig"});
    std::vector<double> ts, fd;
    double det = 0;
    PotentialRun run = run_potential_flow(a, t_end, opt, [&](const PotentialSample& p) {
        csv.row({p.t, p.flat_distance, p.det_w_dev, p.torsion_l2, p.min_eig});
        ts.push_back(p.t);
        fd.push_back(p.flat_distance);
        det = std::max(det, p.det_w_dev);
    });
    out.snapshot("final.pcfs", snapshot_of(metric_from_alpha(run.final_alpha), t_end));
    s["results"] = {{"initial_flat_distance", fd.front()},
                    {"final_flat_distance", fd.back()},
                    {"monotone_tail", run.monotone_tail},
                    {"fitted_decay_rate", fitted_rate(ts, fd)},
                    {"max_det_w_dev", det}};
    s["checks"].push_back(check("det W - 1", det, tol(c, "det_w", 1e-7), "the generalized metric W has det W = 1"));
    if (c.sub("tolerances").has("flat_distance"))
        s["checks"].push_back(check("final flat distance", fd.back(), tol(c, "flat_distance", 1e-4),
                                    "torus flow converges to a flat Kahler metric"));
}

std::string verdict_text(const Classification& k) {
    const char* type = "inconclusive";
    switch (k.verdict) {
        case Asymptotics::finite_time_I: type = "type I"; break;
        case Asymptotics::infinite_IIb: type = "type IIb"; break;
        case Asymptotics::infinite_III: type = "type III"; break;
        default: break;
    }
    if (k.collapse == "none") return std::string(type) + ", converges without collapse";
    return std::string(type) + ", " + k.collapse + " collapse";
}

void homogeneous(const Cfg& c, const Common& cm, Out& out, json& s) {
    std::string name = c.str("model");
    LieModel m;
    try {
        m = build_model(name);
    } catch (const ValidationError& e) {
        Cfg::fail(c.path("model"), e.what());
    }
    InvariantMetric h0;
    if (c.has("initial")) {
        Cfg i = c.sub("initial");
        i.allow({"a", "b", "r", "s"});
        h0 = {i.positive("a"), i.positive("b"), i.num("r", 0), i.num("s", 0)};
    } else {
        std::mt19937_64 rng(cm.seed);
        std::uniform_real_distribution<double> u(0.5, 2.0), o(-0.2, 0.2);
        h0 = {u(rng), u(rng), o(rng), o(rng)};
    }
    if (!h0.positive()) Cfg::fail(c.path("initial"), "metric is not positive definite");
    double t_end = c.positive("t_end", 1000);
    bool normalized = c.flag("normalized", false);
    Trajectory tr = integrate(m, h0, t_end, normalized);
    CsvWriter csv(out.csv("trajectory.csv"), {"t", "a", "b", "r", "s", "rm", "volume", "eig0", "eig1", "eig2", "eig3"});
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const auto& h = tr.states[i];
        csv.row({tr.times[i], h.a, h.b, h.r, h.s, tr.rm[i], tr.volume[i], tr.eig[i](0), tr.eig[i](1), tr.eig[i](2),
                 tr.eig[i](3)});
    }
    json r = {{"model", name}, {"initial", vec_of(h0.vec())}, {"final_time", tr.times.back()},
              {"singular", tr.singular}, {"halt_reason", tr.halt_reason}};
    if (tr.singular) {
        r["verdict"] = "type I, finite-time singularity";
    } else {
        Classification k = classify_asymptotics(m, tr);
        r["verdict"] = verdict_text(k);
        r["classification"] = {{"type", to_string(k.verdict)},
                               {"collapse", k.collapse},
                               {"gh_dimension", k.gh_dimension},
                               {"profile", vec_of(k.profile)},
                               {"exponents", vec_of(k.exponents)},
                               {"rm_t_last_decade", {k.stat_start, k.stat_end, k.stat_max}}};
    }
    if (name == "Hopf") {
        std::vector<double> t, d;
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            double x = ray_distance(tr.states[i], hopf_metric());
            if (tr.times[i] > 1 && x > 1e-9) {
                t.push_back(tr.times[i]);
                d.push_back(x);
            }
        }
        if (t.size() >= 3) {
            ExpFit f = fit_exponential(t, d);
            r["hopf_ray_fit"] = {{"rate", f.rate}, {"r2", f.r2}};
        }
        r["final_ray_distance"] = ray_distance(tr.states.back(), hopf_metric());
    }
    if (c.has("blowdown")) {
        const json& sl = c.raw("blowdown");
        if (!sl.is_array()) Cfg::fail(c.path("blowdown"), "expected a list of scales");
        std::vector<double> sv;
        for (auto& x : sl) {
            if (!x.is_number() || !(x.get<double>() > 0)) Cfg::fail(c.path("blowdown"), "scales must be positive");
            sv.push_back(x.get<double>());
        }
        Blowdown b = blowdown(m, tr, sv);
        CsvWriter bc(out.csv("blowdown.csv"), {"s", "a", "b", "r", "s_param", "defect", "soliton_identity"});
        for (std::size_t i = 0; i < b.s.size(); ++i) {
            const auto& h = b.rescaled[i];
            bc.row({b.s[i], h.a, h.b, h.r, h.s, b.defect[i], b.soliton_identity[i]});
        }
        r["blowdown_defect"] = b.defect;
    }
    s["results"] = r;
}

GRFState pluriclosed_state(const AlphaModes& m, const ChartGrid& g) {
    HermField w = m.metric_field(g);
    validate_metric(w);
    return GRFState(SymField::from_herm(w), ThreeFormField::torsion_of(w));
}

void grf_coupled(const Cfg& c, const Common& cm, Out& out, json& s) {
    AlphaModes m = alpha_spec(c.sub("alpha"), cm.seed);
    GRFState st = pluriclosed_state(m, cm.grid);
    GrfRunOptions ro;
    ro.cfl = c.positive("cfl", 0.02);
    ro.deturck = c.flag("deturck", true);
    double t_end = c.positive("t_end", 0.6);
    double famp = c.num("dilaton_amplitude", 0.3);
    GrfTrajectory tr = run_grf(st.g, st.H, t_end, ro);
    Field fT(cm.grid.size());
    for (std::size_t p = 0; p < fT.size(); ++p) fT[p] = famp * std::cos(cm.grid.coords(p)[1]);
    double shift = std::log(weighted_volume(GRFState(tr.g.back(), tr.H.back(), fT)));
    for (double& v : fT) v += shift;
    auto f = solve_conjugate_heat(tr, fT);
    auto rows = f_monotonicity(tr, f);
    CsvWriter csv(out.csv("monotonicity.csv"), {"t", "F", "weighted_volume", "integrand", "dFdt"});
    double drop = 0, mismatch = 0, vol = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        csv.row({r.t, r.F, r.weighted_volume, r.integrand, r.dFdt});
        if (k > 0) drop = std::max(drop, rows[k - 1].F - r.F);
        if (k > 0 && k + 1 < rows.size() && r.integrand > 0)
            mismatch = std::max(mismatch, std::abs(r.dFdt - r.integrand) / r.integrand);
        vol = std::max(vol, std::abs(r.weighted_volume - 1));
    }
    double l0 = lambda_lowest(tr.g.front(), tr.H.front()).lambda;
    double l1 = lambda_lowest(tr.g.back(), tr.H.back()).lambda;
    out.snapshot("initial.pcfs", snapshot_of(GRFState(tr.g.front(), tr.H.front(), f.front()), 0));
    out.snapshot("final.pcfs", snapshot_of(GRFState(tr.g.back(), tr.H.back(), f.back()), t_end));
    s["results"] = {{"F_start", rows.front().F}, {"F_end", rows.back().F},
                    {"lambda_start", l0},        {"lambda_end", l1},
                    {"steps", tr.t.size() - 1},  {"deturck", tr.deturck},
                    {"closedness_end", closedness(tr.H.back())}};
    s["checks"].push_back(check("max F decrease", drop, tol(c, "F_drop", 1e-8), "F is nondecreasing"));
    s["checks"].push_back(check("dF/dt vs integrand (relative)", mismatch, tol(c, "dFdt", 0.1),
                                "dF/dt equals the weighted residual-square integrand"));
    s["checks"].push_back(check("weighted volume drift", vol, tol(c, "weighted_volume", 1e-6),
                                "the conjugate heat flow preserves the weighted volume"));
    s["checks"].push_back(check("lambda decrease", std::max(0.0, l0 - l1), tol(c, "lambda_drop", 1e-6),
                                "lambda is nondecreasing"));
}

void twisted_ma(const Cfg& c, const Common& cm, Out& out, json& s) {
    Cfg sp = c.sub("split");
    sp.allow({"nmodes", "amplitude", "plus_only", "b_plus", "b_minus"});
    long nm = sp.integer("nmodes", 4);
    if (nm < 1) Cfg::fail(sp.path("nmodes"), "must be at least 1");
    SplitPotential s0 = random_split(cm.grid, cm.seed, int(nm), sp.positive("amplitude", 0.3), sp.flag("plus_only", false));
    s0.b_plus = sp.positive("b_plus", 1);
    s0.b_minus = sp.positive("b_minus", 1);
    s0.validate();
    TwistedOptions opt;
    opt.cfl = c.positive("cfl", 0.25);
    long every = c.integer("sample_every", 10);
    if (every < 1) Cfg::fail(c.path("sample_every"), "must be at least 1");
    opt.sample_every = int(every);
    opt.check_tensor = c.flag("check_tensor", true);
    double t_end = c.positive("t_end", 2.0);
    out.snapshot("initial.pcfs", snapshot_of(s0, 0));
    out.snapshot("initial_triple.pcfs", snapshot_of(split_triple(s0)));
    CsvWriter csv(out.csv("series.csv"), {"t", "f_osc", "flat_distance", "consistency", "min_eig"});
    TwistedRun run = run_twisted_flow(s0, t_end, opt, [&](const TwistedSample& p) {
        csv.row({p.t, p.f_osc, p.flat_distance, p.consistency, p.min_eig});
    });
    out.snapshot("final.pcfs", snapshot_of(run.final_state, t_end));
    std::vector<double> ts, fd;
    for (auto& p : run.samples) {
        ts.push_back(p.t);
        fd.push_back(p.flat_distance);
    }
    PoissonReport pr = poisson_sigma(split_triple(run.final_state));
    s["results"] = {{"initial_flat_distance", fd.front()},
                    {"final_flat_distance", fd.back()},
                    {"monotone_tail", run.monotone_tail},
                    {"fitted_decay_rate", fitted_rate(ts, fd)},
                    {"max_abs_p", pr.max_abs_p},
                    {"degenerate_points", pr.degenerate.size()}};
    if (opt.check_tensor)
        s["checks"].push_back(check("scalar vs tensor rate", run.max_consistency, tol(c, "consistency", 1e-5),
                                    "the twisted Monge-Ampere flow is pluriclosed flow in the commuting case"));
}

void cone_experiment(const Cfg& c, const Common&, Out& out, json& s) {
    ConeProblem p = cone_problem_from_json(c.raw("problem"), c.path("problem"));
    std::vector<double> times = {0.0};
    if (c.has("times")) {
        const json& t = c.raw("times");
        if (!t.is_array()) Cfg::fail(c.path("times"), "expected a list");
        times.clear();
        for (auto& x : t) {
            if (!x.is_number() || x.get<double>() < 0) Cfg::fail(c.path("times"), "times must be nonnegative numbers");
            times.push_back(x.get<double>());
        }
    }
    std::vector<std::string> cols = {"t"};
    for (auto& cv : p.curves) cols.push_back(cv.name);
    if (p.gamma_pairing) cols.push_back("gamma_pairing");
    CsvWriter csv(out.csv("class_trajectory.csv"), cols);
    for (double t : times) {
        ClassPoint cp = class_trajectory(p, t);
        std::vector<double> row = {t};
        row.insert(row.end(), cp.pairings.begin(), cp.pairings.end());
        if (cp.gamma_pairing) row.push_back(*cp.gamma_pairing);
        csv.row(row);
    }
    s["results"] = cone_report(p);
}

void fixedpoint_checks(const Cfg& c, const Common& cm, Out&, json& s) {
    double rtol = tol(c, "rhs", 1e-12), gtol = tol(c, "gauge", 1e-5);
    double flat = pcf_rhs(HermField::identity(cm.grid)).rhs.sup();
    LieModel hopf = build_model("Hopf");
    AlgebraicGeometry G = algebraic_geometry(hopf, hopf_metric());
    double hopf_rhs = invariant_pcf_rhs(hopf, hopf_metric()).norm();
    double sol = std::max((G.ric - 0.25 * G.H2).cwiseAbs().maxCoeff(), G.dstarH.cwiseAbs().maxCoeff());
    AlphaModes m = alpha_spec(c.sub("alpha"), cm.seed);
    GaugeReport gr = gauge_equivalence_check(m.metric_field(cm.grid));
    s["checks"].push_back(check("flat torus RHS", flat, rtol, "the flat metric is a fixed point"));
    s["checks"].push_back(check("Hopf RHS", hopf_rhs, rtol, "the Hopf metric is a fixed point"));
    s["checks"].push_back(check("Hopf soliton residual", sol, rtol, "the Hopf metric is a generalized Ricci soliton"));
    s["checks"].push_back(check("gauge-equivalence residual", gr.sup_diff, gtol,
                                "pluriclosed flow is generalized Ricci flow up to the Lee-vector gauge"));
    s["results"] = {{"gauge_rate_sup", gr.sup_pcf}, {"pluriclosed_residual", gr.pluriclosed_residual},
                    {"dc_sign", conventions().dc_sign}};
}

using Runner = void (*)(const Cfg&, const Common&, Out&, json&);

Runner runner_for(const std::string& e) {
    if (e == "torus_pcf") return torus_pcf;
    if (e == "potential_pcf") return potential_pcf;
    if (e == "homogeneous") return homogeneous;
    if (e == "grf_coupled") return grf_coupled;
    if (e == "twisted_ma") return twisted_ma;
    if (e == "cone") return cone_experiment;
    return fixedpoint_checks;
}

void allowed_fields(const Cfg& c, const std::string& e) {
    std::vector<const char*> keys = {"experiment", "seed", "output", "grid", "tolerances", "description"};
    std::vector<const char*> extra;
    if (e == "torus_pcf" || e == "potential_pcf") extra = {"alpha", "t_end", "cfl", "sample_every"};
    else if (e == "homogeneous") extra = {"model", "initial", "t_end", "normalized", "blowdown"};
    else if (e == "grf_coupled") extra = {"alpha", "t_end", "cfl", "deturck", "dilaton_amplitude"};
    else if (e == "twisted_ma") extra = {"split", "t_end", "cfl", "sample_every", "check_tensor"};
    else if (e == "cone") extra = {"problem", "times"};
    else extra = {"alpha", "dc_sign"};
    keys.insert(keys.end(), extra.begin(), extra.end());
    c.allow(keys);
}

}  // namespace

ConeProblem cone_problem_from_json(const json& j, const std::string& path) {
    Cfg c(j, path);
    c.allow({"curves", "gamma_pairing", "kahler", "c1_polarization"});
    ConeProblem p;
    p.kahler = c.flag("kahler", false);
    if (c.has("gamma_pairing")) p.gamma_pairing = c.num("gamma_pairing");
    if (c.has("c1_polarization")) p.c1_polarization = c.num("c1_polarization");
    const json& cs = c.has("curves") ? c.raw("curves") : json::array();
    if (!cs.is_array()) Cfg::fail(c.path("curves"), "expected a list");
    for (std::size_t i = 0; i < cs.size(); ++i) {
        Cfg cv(cs[i], c.path("curves") + "[" + std::to_string(i) + "]");
        cv.allow({"name", "self_intersection", "K_dot", "area"});
        p.curves.push_back({cv.str("name", "D" + std::to_string(i)), int(cv.integer("self_intersection")),
                            int(cv.integer("K_dot")), cv.num("area")});
    }
    try {
        p.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + "." + e.what());
    }
    return p;
}

json cone_report(const ConeProblem& p) {
    TauStar t = p.kahler ? kahler_tau_star(p) : tau_star(p);
    json r;
    r["kahler"] = p.kahler;
    r["tau_star"] = t.finite() ? json(t.value) : json("inf");
    r["binding_curve"] = t.binding.empty() ? json(nullptr) : json(t.binding);
    if (!p.kahler) r["gamma_condition"] = t.gamma_ok;
    if (p.kahler) r["incomplete_data"] = t.incomplete;
    if (p.kahler) r["upper_bound_only"] = true;
    return r;
}

json describe_model(const std::string& name) {
    LieModel m = build_model(name);
    json brackets = json::array();
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            json terms = json::object();
            for (int k = 0; k < 4; ++k)
                if (std::abs(m.c[k][i][j]) > 1e-14) terms["e" + std::to_string(k)] = m.c[k][i][j];
            if (!terms.empty()) brackets.push_back({{"pair", {i, j}}, {"value", terms}});
        }
    json J = json::array();
    for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back(m.J(r, c));
        J.push_back(row);
    }
    std::vector<bool> fiber(m.fiber.begin(), m.fiber.end());
    return {{"name", m.name},
            {"brackets", brackets},
            {"J", J},
            {"adapted_axes", m.axis},
            {"fiber_directions", fiber},
            {"dense_fiber_lattice", m.dense_fiber_lattice},
            {"jacobi_residual", m.jacobi_residual()},
            {"nijenhuis_residual", m.nijenhuis_residual()},
            {"unimodularity", m.unimodularity()}};
}

std::string output_root() {
    const char* e = std::getenv("PCFLAB_OUT");
    return e && *e ? std::string(e) : std::string("pcflab_out");
}

void validate_config(const json& config) {
    Cfg c(config, "config");
    Common cm = common(c);
    allowed_fields(c, cm.experiment);
}

ExperimentResult run_experiment(const json& config, const std::string& out_root) {
    Cfg c(config, "config");
    Common cm = common(c);
    allowed_fields(c, cm.experiment);
    if (cm.experiment == "fixedpoint_checks" && c.has("dc_sign")) {
        long d = c.integer("dc_sign");
        if (d != 1 && d != -1) Cfg::fail(c.path("dc_sign"), "must be 1 or -1");
    }
    ScopedDcSign sign(cm.experiment == "fixedpoint_checks" ? int(c.integer("dc_sign", 1)) : conventions().dc_sign);

    Out out;
    out.dir = fs::path(out_root) / cm.output;
    fs::create_directories(out.dir);
    json s;
    s["experiment"] = cm.experiment;
    s["seed"] = cm.seed;
    if (cm.experiment != "cone" && cm.experiment != "homogeneous")
        s["grid"] = {{"n", cm.grid.n}, {"periods", cm.grid.periods}};
    s["config"] = config;
    s["checks"] = json::array();
    ExperimentResult r;
    try {
        runner_for(cm.experiment)(c, cm, out, s);
        bool ok = true;
        for (auto& ch : s["checks"]) ok = ok && ch["pass"].get<bool>();
        s["status"] = ok ? "ok" : "check_failed";
        r.exit_code = ok ? 0 : 4;
    } catch (const SingularityError& e) {
        s["status"] = "singularity";
        s["singularity"] = {{"message", e.what()}, {"time", e.time}, {"location", e.location}};
        r.exit_code = 3;
    }
    s["artifacts"] = out.artifacts;
    std::ofstream(out.dir / "summary.json") << s.dump(2) << '\n';
    r.summary = s;
    return r;
}

}  // namespace pcf
