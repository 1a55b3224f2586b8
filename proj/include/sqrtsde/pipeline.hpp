#pragma once

#include <cstdint>
#include <sstream>
#include <string>

#include "sqrtsde/io.hpp"

#ifndef SQRTSDE_MODELS_DIR
#define SQRTSDE_MODELS_DIR "models"
#endif

namespace sqrtsde {

struct ReproduceOptions {
    std::string case_name = "c22";  // c22 | c2 | feller-control
    double t0 = 1.0;
    double dt = 1e-3;
    std::uint64_t paths = 100'000;
    std::uint64_t seed = 42;
    unsigned threads = 0;
    std::string models_dir = SQRTSDE_MODELS_DIR;
};

struct ReproduceResult {
    json report;
    std::string summary;
    bool pass = false;
};

inline std::string model_file_for_case(const std::string& case_name) {
    if (case_name == "c22") return "c22-violating.json";
    if (case_name == "c2") return "c2-violating.json";
    if (case_name == "feller-control") return "feller-satisfying.json";
    fail(ErrorKind::Input, "reproduce: unknown case '" + case_name + "' (expected c22, c2 or feller-control)");
}

namespace detail {

inline std::string num(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

inline void require_profile(const FellerReport& r, const char* who) {
    std::string failed;
    for (const auto& c : r.conditions) {
        if (!c.holds) failed += (failed.empty() ? "" : ", ") + c.name;
    }
    if (!failed.empty()) fail(ErrorKind::Hypothesis, std::string(who) + ": hypotheses fail: " + failed);
}

inline std::string negativity_lines(const NegativityReport& nr) {
    std::ostringstream s;
    s << "  untilted: " << nr.statistic << " = " << nr.count << "/" << nr.n << " = " << num(nr.fraction)
      << " (99% lower bound " << num(nr.lower_bound_99) << ")\n";
    s << "  tilted mean V(t0) = " << num(nr.tilted_mean_v) << " +- " << num(nr.tilted_se)
      << ", closed form " << num(nr.ode_prediction) << ", Euler mean " << num(nr.euler_prediction) << "\n";
    return s.str();
}

}  // namespace detail

/// Expectation ODE, certificate and Monte Carlo experiment for one bundled case.
inline ReproduceResult reproduce(const ReproduceOptions& opt) {
    const std::string file = model_file_for_case(opt.case_name);
    const SdeModel model = load_model(opt.models_dir + "/" + file);

    SimConfig cfg;
    cfg.horizon = opt.t0;
    cfg.dt = std::min(opt.dt, opt.t0);
    cfg.n_paths = opt.paths;
    cfg.master_seed = opt.seed;
    cfg.threads = opt.threads;
    cfg.validate();

    ReproduceResult out;
    json& r = out.report;
    r["case"] = opt.case_name;
    r["model_file"] = file;
    r["model"] = to_json(model);
    r["config"] = {{"t0", opt.t0}, {"dt", cfg.step()}, {"paths", opt.paths}, {"seed", opt.seed}};
    const SdeClass cls = classify(model);
    r["class"] = to_json(cls);

    std::ostringstream s;
    s << "case " << opt.case_name << " (" << file << "), class " << to_string(cls.tag) << ", t0 = " << detail::num(opt.t0)
      << ", " << opt.paths << " paths, dt = " << detail::num(cfg.step()) << ", seed " << opt.seed << "\n";

    if (opt.case_name == "c22") {
        const FellerReport feller = check_canonical_feller(model);
        const FellerReport profile = check_c22_violation_profile(model);
        detail::require_profile(profile, "reproduce c22");
        r["feller"] = to_json(feller);
        r["profile"] = to_json(profile);
        const CharSolution sol = solve_expectation(model);
        r["expectation"] = {{"solution", to_json(sol)}, {"x_t0", eval(sol, opt.t0)}};
        const Certificate cert = certify_c22(model, opt.t0);
        r["certificate"] = to_json(cert);
        const NegativityReport nr = negativity_experiment(model, cert, cfg);
        r["experiment"] = to_json(nr);
        out.pass = nr.pass;
        s << "  Feller conditions hold: " << (feller.overall ? "yes" : "no") << "\n";
        s << "  untilted E V(t0) = " << detail::num(eval(sol, opt.t0)) << "\n";
        s << "  certificate: a_11 -> 0, a_22 -> " << detail::num(cert.tilted_params[1].tilted) << ", lambda = ("
          << detail::num(cert.lambda(0)) << ", " << detail::num(cert.lambda(1)) << "), E^Q V(t0) = " << detail::num(cert.expected_value)
          << "\n";
        s << detail::negativity_lines(nr);
    } else if (opt.case_name == "c2") {
        const FellerReport feller = check_canonical_feller(model);
        const FellerReport profile = check_c2_violation_profile(model);
        r["feller"] = to_json(feller);
        r["profile"] = to_json(profile);
        for (const char* name : {"a_12>0", "a_11<0", "a_22<0", "det_a>0"}) {
            if (!find_condition(profile.conditions, name)->holds) {
                fail(ErrorKind::Hypothesis, std::string("reproduce c2: hypothesis ") + name + " fails");
            }
        }
        const SdeModel reduced = eliminate_b1(model);
        r["reduced_model"] = to_json(reduced);
        const NovikovConstants k = constants(reduced, 1.0);
        const Partition part = partition(reduced, 1.0, opt.t0);
        r["novikov"] = {{"constants", to_json(k)}, {"steps", part.steps()}, {"first_step", part.times[1]}};
        const CharSolution sol = solve_expectation(reduced);
        r["expectation"] = {{"solution", to_json(sol)}, {"x_t0", eval(sol, opt.t0)}};
        const Certificate cert = certify_c2(reduced, opt.t0);
        r["certificate"] = to_json(cert);
        const NegativityReport nr = negativity_experiment(reduced, cert, cfg);
        r["experiment"] = to_json(nr);
        out.pass = nr.pass;
        s << "  Feller conditions hold: " << (feller.overall ? "yes" : "no") << "\n";
        s << "  after removing b_1: y0 = " << detail::num(reduced.x0()(1)) << ", b_2 = " << detail::num(reduced.b()(1)) << "\n";
        s << "  local Novikov partition of [0, t0]: " << part.steps() << " steps (c = 1)\n";
        s << "  untilted E V(t0) = " << detail::num(eval(sol, opt.t0)) << "\n";
        s << "  certificate: case " << cert.proof_case << ", k = " << *cert.k << ", a_11 -> "
          << detail::num(cert.tilted_params[0].tilted) << ", a_21 -> " << detail::num(cert.tilted_params[1].tilted)
          << ", E^Q V(t0) = " << detail::num(cert.expected_value) << "\n";
        s << detail::negativity_lines(nr);
    } else {
        const FellerReport feller = check_canonical_feller(model);
        r["feller"] = to_json(feller);
        if (!feller.overall) fail(ErrorKind::Hypothesis, "reproduce feller-control: model violates the Feller conditions");
        const CharSolution sol = solve_expectation(model);
        r["expectation"] = {{"solution", to_json(sol)}, {"x_t0", eval(sol, opt.t0)}};
        SimConfig c = cfg;
        c.observe_times = {opt.t0};
        const SimResult sim = simulate(model, c, Vector::Zero(model.p()), false);
        const ObservationStats& o = sim.observations.back();
        r["experiment"] = {{"negative_count", o.negative_count()},
                           {"tau_count", o.tau_count()},
                           {"n", o.v_negative.n},
                           {"frac_V_negative", o.v_negative.mean},
                           {"frac_tau_before", o.tau_before.mean},
                           {"mean_v", to_json(o.v.front())},
                           {"n_excluded", sim.n_excluded}};
        out.pass = o.negative_count() == 0 && o.tau_count() == 0;
        s << "  Feller conditions hold: yes\n";
        s << "  E V(t0) = " << detail::num(eval(sol, opt.t0)) << ", MC mean " << detail::num(o.v.front().mean) << " +- "
          << detail::num(o.v.front().standard_error()) << "\n";
        s << "  untilted: P(V_t0<0) = " << o.negative_count() << "/" << o.v_negative.n
          << ", P(tau<t0) = " << o.tau_count() << "/" << o.tau_before.n << "\n";
    }
    r["pass"] = out.pass;
    s << "  outcome: " << (out.pass ? "PASS" : "FAIL") << "\n";
    out.summary = s.str();
    return out;
}

}  // namespace sqrtsde
