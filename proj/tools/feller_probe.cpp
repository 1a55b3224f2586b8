// feller-probe: command-line front end for the sqrtsde library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sqrtsde/io.hpp"
#include "sqrtsde/linear_ode.hpp"
#include "sqrtsde/pipeline.hpp"

namespace {

using namespace sqrtsde;

constexpr const char* kToolVersion = "0.1.0";

struct Outcome {
    json body;
    int code = 0;
    std::string text;  // non-JSON primary output (CSV), if any
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Input, path + ": cannot open for writing");
    out << text;
}

std::map<std::string, std::string> collect_flags(const CLI::App* sub) {
    std::map<std::string, std::string> flags;
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_name() == "--help" || opt->get_name().empty() || opt->count() == 0) continue;
        std::string v;
        for (const auto& r : opt->results()) v += (v.empty() ? "" : ",") + r;
        flags[opt->get_name()] = v;
    }
    return flags;
}

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::Input, what + ": '" + s + "' is not a number");
    }
}

std::vector<double> parse_grid(const std::string& spec) {
    const auto c1 = spec.find(':');
    const auto c2 = c1 == std::string::npos ? std::string::npos : spec.find(':', c1 + 1);
    if (c2 == std::string::npos) fail(ErrorKind::Input, "--grid: expected start:stop:step");
    const double a = parse_number(spec.substr(0, c1), "--grid start");
    const double b = parse_number(spec.substr(c1 + 1, c2 - c1 - 1), "--grid stop");
    const double h = parse_number(spec.substr(c2 + 1), "--grid step");
    if (!(a >= 0.0) || !(b >= a) || !(h > 0.0)) fail(ErrorKind::Input, "--grid: need 0 <= start <= stop and step > 0");
    std::vector<double> t;
    for (long i = 0;; ++i) {
        const double ti = a + static_cast<double>(i) * h;
        if (ti > b + 1e-9 * h) break;
        t.push_back(ti);
        if (t.size() > 10'000'000) fail(ErrorKind::Input, "--grid: too many points");
    }
    return t;
}

Vector lambda_vector(const std::vector<double>& lam, int p) {
    if (lam.empty()) return Vector::Zero(p);
    if (static_cast<int>(lam.size()) != p) {
        fail(ErrorKind::Input, "--lambda: expected " + std::to_string(p) + " comma-separated values");
    }
    return Eigen::Map<const Vector>(lam.data(), p);
}

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Square-root SDE analysis: Feller checks, canonical form, certificates, simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string model_path, out_path, csv_path, grid, case_name = "c22", models_dir = SQRTSDE_MODELS_DIR;
    double t0 = 1.0, c = 1.0, horizon = 1.0, T = 1.0, dt = 1e-3;
    std::uint64_t paths = 10'000, seed = 0, rep_paths = 100'000, rep_seed = 42;
    std::vector<double> lambda;
    bool stopped = false;
    int csv_points = 50;

    auto add_model = [&](CLI::App* s) {
        s->add_option("model", model_path, "Model JSON file")->required();
        s->add_option("--out", out_path, "Write output here instead of stdout");
    };

    auto* check = app.add_subcommand("check-feller", "Weak Feller conditions (canonical form)");
    add_model(check);
    auto* canon = app.add_subcommand("canonicalize", "Affine map of a proportional model to canonical form");
    add_model(canon);
    auto* expect = app.add_subcommand("expectation", "Expected state on a time grid (CSV t,x,y)");
    add_model(expect);
    expect->add_option("--grid", grid, "start:stop:step")->required();
    auto* cert = app.add_subcommand("certify", "Negativity certificate for C_2(2) or C(2) models");
    add_model(cert);
    cert->add_option("--t0", t0, "Target time")->required();
    auto* nov = app.add_subcommand("novikov-schedule", "Local Novikov constants and partition");
    add_model(nov);
    nov->add_option("--c", c, "Exponent scale c > 0")->required();
    nov->add_option("--horizon", horizon, "Horizon T")->required();
    auto* addreq = app.add_subcommand("check-addreq", "Search for a witness of the additional requirement");
    add_model(addreq);
    auto* sim = app.add_subcommand("simulate", "Euler Monte Carlo with optional tilt");
    add_model(sim);
    sim->add_option("--t", T, "Horizon")->required();
    sim->add_option("--dt", dt, "Time step");
    sim->add_option("--paths", paths, "Number of paths");
    sim->add_option("--seed", seed, "Master seed");
    sim->add_option("--lambda", lambda, "Tilt vector, comma separated")->delimiter(',');
    sim->add_flag("--stopped", stopped, "Freeze the density at the first negative V_1");
    sim->add_option("--csv", csv_path, "Time series CSV (t,mean_V,se,frac_negative)");
    sim->add_option("--csv-points", csv_points, "Number of CSV time points")->check(CLI::Range(1, 100000));
    auto* rep = app.add_subcommand("reproduce", "End-to-end run on a bundled case");
    rep->add_option("--case", case_name, "c22 | c2 | feller-control")
        ->check(CLI::IsMember({"c22", "c2", "feller-control"}));
    rep->add_option("--t0", t0, "Target time");
    rep->add_option("--paths", rep_paths, "Number of paths");
    rep->add_option("--seed", rep_seed, "Master seed");
    rep->add_option("--dt", dt, "Time step");
    rep->add_option("--models-dir", models_dir, "Directory with bundled models");
    rep->add_option("--out", out_path, "Write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const CLI::App* active = app.get_subcommands().front();
    const std::string name = active->get_name();
    try {
        Outcome res;
        json hashed_input;
        if (name == "reproduce") {
            ReproduceOptions opt;
            opt.case_name = case_name;
            opt.t0 = t0;
            opt.dt = dt;
            opt.paths = rep_paths;
            opt.seed = rep_seed;
            opt.threads = threads_from_env();
            opt.models_dir = models_dir;
            const ReproduceResult rr = reproduce(opt);
            res.body = rr.report;
            res.code = rr.pass ? 0 : 1;
            (out_path.empty() ? std::cerr : std::cout) << rr.summary;
            hashed_input = rr.report["model"];
        } else {
            const SdeModel model = load_model(model_path);
            hashed_input = to_json(model);
            if (name == "check-feller") {
                if (is_canonical(model)) {
                    const FellerReport r = check_canonical_feller(model);
                    res.body = to_json(r);
                    res.code = r.overall ? 0 : 1;
                } else {
                    // Proportional models are checked after the canonical map.
                    const CanonicalTransform tr = canonicalize(model);
                    const FellerReport r = check_canonical_feller(tr.transformed);
                    res.body = to_json(r);
                    res.body["checked_after"] = to_json(tr);
                    res.code = r.overall ? 0 : 1;
                }
                if (is_c22(model)) res.body["c22_profile"] = to_json(check_c22_violation_profile(model));
                if (is_c2(model)) res.body["c2_profile"] = to_json(check_c2_violation_profile(model));
            } else if (name == "canonicalize") {
                res.body = to_json(canonicalize(model));
            } else if (name == "expectation") {
                const CharSolution sol = solve_expectation(model);
                const std::vector<double> times = parse_grid(grid);
                LinearOdeIntegrator ode(model.a(), model.b(), 1e-10);
                const std::vector<Vector> ys = ode.solve(model.x0(), times);
                std::string csv = "t,x,y\n";
                for (std::size_t i = 0; i < times.size(); ++i) {
                    csv += csv_number(times[i]) + "," + csv_number(eval(sol, times[i])) + "," + csv_number(ys[i](1)) + "\n";
                }
                res.text = csv;
            } else if (name == "certify") {
                if (is_c22(model)) {
                    res.body = {{"certificate", to_json(certify_c22(model, t0))}};
                } else if (is_c2(model)) {
                    const SdeModel reduced = eliminate_b1(model);
                    res.body = {{"certificate", to_json(certify_c2(reduced, t0))}};
                    if (model.b()(0) != 0.0) res.body["reduced_model"] = to_json(reduced);
                } else {
                    fail(ErrorKind::Hypothesis, "certify: model is neither in C_2(2) nor in C(2)");
                }
            } else if (name == "novikov-schedule") {
                const SdeModel reduced = is_c2(model) ? eliminate_b1(model) : model;
                const Partition part = partition(reduced, c, horizon);
                res.body = {{"constants", to_json(constants(reduced, c))}, {"partition", to_json(part)}};
            } else if (name == "check-addreq") {
                const int m = model.m();
                const AddreqResult ar = check_addreq(model.a(), m);
                res.body = to_json(ar);
                res.body["m"] = m;
                if (m == 2) {
                    const auto cases = classify_2x2_cases(model.a().topLeftCorner(2, 2));
                    res.body["cases"] = std::vector<std::string>(cases.begin(), cases.end());
                }
                if (is_canonical(model)) res.body["diag_shift"] = to_json(find_diag_shift(model));
                res.code = ar.holds ? 0 : 1;
            } else if (name == "simulate") {
                SimConfig cfg;
                cfg.horizon = T;
                cfg.dt = dt;
                cfg.n_paths = paths;
                cfg.master_seed = seed;
                cfg.threads = threads_from_env();
                if (!csv_path.empty()) {
                    for (int k = 0; k <= csv_points; ++k) cfg.observe_times.push_back(T * k / csv_points);
                }
                const SimResult sr = simulate(model, cfg, lambda_vector(lambda, model.p()), stopped);
                res.body = to_json(sr);
                if (!csv_path.empty()) {
                    std::string csv = "t,mean_V,se,frac_negative\n";
                    for (const auto& o : sr.observations) {
                        csv += csv_number(o.t) + "," + csv_number(o.v.front().mean) + "," +
                               csv_number(o.v.front().standard_error()) + "," + csv_number(o.v_negative.mean) + "\n";
                    }
                    write_text(csv_path, csv);
                }
            }
        }

        const std::string primary = res.text.empty() ? res.body.dump(2) + "\n" : res.text;
        write_text(out_path, primary);
        if (!out_path.empty()) {
            const auto flags = collect_flags(active);
            json manifest = {{"subcommand", name},
                             {"input_path", name == "reproduce" ? models_dir + "/" + model_file_for_case(case_name)
                                                                : model_path},
                             {"flags", flags},
                             {"output_paths", csv_path.empty() ? std::vector<std::string>{out_path}
                                                               : std::vector<std::string>{out_path, csv_path}}};
            auto hashed_flags = flags;
            for (const char* k : {"model", "--out", "--csv", "--models-dir"}) hashed_flags.erase(k);
            const json hashed = {{"subcommand", name}, {"input", hashed_input}, {"flags", hashed_flags}};
            manifest["versions"] = {{"tool", kToolVersion}, {"config_hash", hex64(fnv1a(hashed.dump()))}};
            write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");
        }
        return res.code;
    } catch (const Error& e) {
        std::cerr << "feller-probe " << name << ": " << to_string(e.kind()) << " error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "feller-probe " << name << ": input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "feller-probe " << name << ": internal error: " << e.what() << "\n";
        return 4;
    }
}
