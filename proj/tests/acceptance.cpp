// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <unistd.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sqrtsde/io.hpp"
#include "sqrtsde/pipeline.hpp"
#include "support/oracles.hpp"

using namespace sqrtsde;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::string kModels = SQRTSDE_MODELS_DIR;

SdeModel bundled(const std::string& name) { return load_model(kModels + "/" + name + ".json"); }

SimConfig mc_config(std::uint64_t seed) {
    SimConfig c;
    c.horizon = 1.0;
    c.dt = 1e-3;
    c.n_paths = 100'000;
    c.master_seed = seed;
    c.threads = threads_from_env();
    return c;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

SdeParams c22_params(const Eigen::Matrix2d& a, const Eigen::Vector2d& b, double x, double y) {
    SdeParams p;
    p.a = a;
    p.b = b;
    p.sigma = Matrix::Identity(2, 2);
    p.alpha = Vector::Zero(2);
    p.beta = Matrix::Identity(2, 2);
    p.x0 = vec2(x, y);
    return p;
}

SdeParams c2_params(const Eigen::Matrix2d& a, double b2, double x, double y) {
    SdeParams p = c22_params(a, Eigen::Vector2d(0.0, b2), x, y);
    p.beta << 1.0, 0.0, 1.0, 0.0;
    return p;
}

// 1. Canonicalization.
Outcome canonicalization() {
    std::mt19937_64 g(101);
    double worst_gram = 0.0, worst_affine = 0.0;
    int ok_class = 0;
    const int n = 1000;
    for (int k = 0; k < n; ++k) {
        const int p = 2 + k % 2;
        SdeParams q;
        do {
            q.sigma = oracle::random_matrix(g, p, p);
        } while (std::abs(q.sigma.determinant()) < 0.05);
        q.a = oracle::random_matrix(g, p, p);
        q.b = oracle::random_matrix(g, p, 1);
        Vector beta1;
        do {
            beta1 = oracle::random_matrix(g, p, 1);
        } while (beta1.norm() < 0.1);
        const double alpha1 = oracle::uniform(g, -1, 1);
        q.alpha = Vector::Constant(p, alpha1);
        q.beta = beta1.transpose().replicate(p, 1);
        q.x0 = oracle::random_matrix(g, p, 1);
        const double v = alpha1 + beta1.dot(q.x0);
        if (v < 0) q.x0 -= 2.0 * v * beta1 / beta1.squaredNorm();
        const SdeModel m(q);
        const CanonicalTransform t = canonicalize(m);
        const Matrix R = t.K * m.sigma() / std::sqrt(t.c);
        worst_gram = std::max(worst_gram, (R * R.transpose() - Matrix::Identity(p, p)).cwiseAbs().maxCoeff());
        ok_class += classify(t.transformed).tag == SdeClassTag::ProportionalCanonical;
        for (int s = 0; s < 100; ++s) {
            const Vector x = oracle::random_matrix(g, p, 1, -5, 5);
            const double lhs = (t.K * x + t.ell)(0);
            const double rhs = t.c * (alpha1 + beta1.dot(x));
            worst_affine = std::max(worst_affine, std::abs(lhs - rhs));
        }
    }
    return {worst_gram < 1e-10 && worst_affine < 1e-10 && ok_class == n,
            "1000 models, max |Gram - I| = " + fmt(worst_gram, 3) + ", max |X~1 - c V1| = " + fmt(worst_affine, 3)};
}

// 2. Closed-form expectation against RK4.
Outcome ode_oracle() {
    std::mt19937_64 g(202);
    int kinds[3] = {0, 0, 0};
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        Eigen::Matrix2d a = oracle::random_matrix(g, 2, 2, -2, 2);
        if (k % 10 < 2 && std::abs(a(0, 1)) < 0.2) a(0, 1) = 0.5;
        if (k % 10 == 0) {
            // D = 0: a12 a21 = -u^2 with a11 - a22 = 2u.
            const double u = a(0, 0), c = oracle::uniform(g, -1, 1);
            a(0, 0) = c + u;
            a(1, 1) = c - u;
            a(1, 0) = -u * u / a(0, 1);
        } else if (k % 10 == 1) {
            a(1, 0) = a(0, 0) * a(1, 1) / a(0, 1);  // Delta = 0
        }
        const Eigen::Vector2d b = oracle::random_matrix(g, 2, 1, -2, 2);
        const double x0 = oracle::uniform(g, -2, 2), y0 = oracle::uniform(g, -2, 2);
        const CharSolution s = solve_expectation(a, b, x0, y0);
        ++kinds[s.real_distinct() ? 0 : s.complex() ? 1 : 2];
        for (double t : {0.1, 0.5, 1.0, 2.0}) {
            const double ref = oracle::rk4_x(a, b, x0, y0, t);
            worst = std::max(worst, std::abs(eval(s, t) - ref) / std::max(1.0, std::abs(ref)));
        }
    }
    return {worst < 1e-7 && kinds[0] > 0 && kinds[1] > 0 && kinds[2] > 0,
            "real " + std::to_string(kinds[0]) + ", complex " + std::to_string(kinds[1]) + ", degenerate " +
                std::to_string(kinds[2]) + ", max error " + fmt(worst, 3)};
}

// 3. certify_c22 soundness.
Outcome certify_c22_soundness() {
    std::mt19937_64 g(303);
    int ok = 0, n = 0;
    std::string first_error;
    for (int k = 0; k < 200; ++k) {
        Eigen::Matrix2d a;
        a << oracle::uniform(g, -3, 3), -oracle::uniform(g, 0.01, 3), oracle::uniform(g, 0.01, 3),
            oracle::uniform(g, -3, 3);
        const Eigen::Vector2d b(oracle::uniform(g, -1, 2), oracle::uniform(g, 0.01, 3));
        const double x0 = k % 7 == 0 ? 0.0 : oracle::uniform(g, 0, 3);
        const double y0 = k % 5 == 0 ? 0.0 : oracle::uniform(g, 0, 3);
        const double t0 = std::array{0.5, 1.0, 2.0}[static_cast<std::size_t>(k % 3)];
        ++n;
        try {
            const SdeModel m(c22_params(a, b, x0, y0));
            const Certificate cert = certify_c22(m, t0);
            const SdeModel t = to_tilted_model(m, cert);
            const double ref = oracle::rk4_x(Eigen::Matrix2d(t.a()), Eigen::Vector2d(t.b()), x0, y0, t0);
            ok += cert.expected_value < 0.0 && ref < 0.0;
        } catch (const std::exception& e) {
            if (first_error.empty()) first_error = e.what();
        }
    }
    return {ok == n, std::to_string(ok) + "/" + std::to_string(n) + " RK4-verified negative" +
                         (first_error.empty() ? "" : "; first error: " + first_error)};
}

// 4. certify_c2 soundness over the three cases.
Outcome certify_c2_soundness() {
    std::mt19937_64 g(404);
    int ok = 0, n = 0, cases[4] = {0, 0, 0, 0}, bound_ok = 0;
    std::string first_error;
    for (int k = 0; k < 200; ++k) {
        const int pick = k % 3;
        Eigen::Matrix2d a;
        a << oracle::uniform(g, -2, 1), oracle::uniform(g, 0.05, 2), oracle::uniform(g, -2, 2), oracle::uniform(g, -2, 1);
        const double x0 = pick == 0 ? oracle::uniform(g, 0.05, 2) : 0.0;
        const double sgn = (k / 3) % 2 ? 1.0 : -1.0;
        const double b2 = pick == 0 ? oracle::uniform(g, -1, 2) : pick == 1 ? sgn * oracle::uniform(g, 0.05, 2) : 0.0;
        const double y0 = pick == 2 ? sgn * oracle::uniform(g, 0.05, 2) : oracle::uniform(g, -1, 1);
        const double t0 = std::array{0.5, 1.0, 2.0}[static_cast<std::size_t>((k / 3) % 3)];
        ++n;
        try {
            const SdeModel m(c2_params(a, b2, x0, y0));
            const Certificate cert = certify_c2(m, t0);
            ++cases[cert.proof_case];
            const SdeModel t = to_tilted_model(m, cert);
            const double ref = oracle::rk4_x(Eigen::Matrix2d(t.a()), Eigen::Vector2d(t.b()), x0, y0, t0);
            const bool sound = cert.expected_value < 0.0 && ref < 0.0 && cert.proof_case == pick + 1;
            bool bound = true;
            if (cert.proof_case == 1) {
                const CharSolution s = solve_expectation(t);
                const double e = std::exp(0.5 * s.tau * t0);
                bound = s.xbar && *s.xbar < x0 * e / (e + 1.0);
                bound_ok += bound;
            }
            ok += sound && bound;
        } catch (const std::exception& e) {
            if (first_error.empty()) first_error = e.what();
        }
    }
    return {ok == n && cases[1] > 0 && cases[2] > 0 && cases[3] > 0,
            std::to_string(ok) + "/" + std::to_string(n) + " verified; cases 1/2/3 = " + std::to_string(cases[1]) +
                "/" + std::to_string(cases[2]) + "/" + std::to_string(cases[3]) + ", case-1 bound held " +
                std::to_string(bound_ok) + "/" + std::to_string(cases[1]) +
                (first_error.empty() ? "" : "; first error: " + first_error)};
}

// 5. E L_t = 1.
Outcome martingale() {
    bool pass = true;
    double worst = 0.0;
    std::string failing;
    int runs = 0;
    auto run = [&](const std::string& label, const SdeModel& m, const Vector& lam, bool stopped, std::uint64_t seed) {
        const MartingaleReport r = martingale_check(m, mc_config(seed), lam, stopped);
        ++runs;
        for (const auto& pt : r.points) worst = std::max(worst, pt.z);
        if (!r.pass) {
            pass = false;
            failing += " " + label;
        }
    };
    std::uint64_t seed = 500;
    for (const char* name : {"feller-satisfying", "appendix-a-case-i", "feller-weak-boundary", "a1-mixed", "a1-gaussian"}) {
        const SdeModel m = bundled(name);
        if (!classify(m).canonical_feller) {
            pass = false;
            failing += std::string(" ") + name + "(not A_m(p))";
        }
        run(std::string(name) + "/(0.3,0.3)", m, vec2(0.3, 0.3), false, ++seed);
        run(std::string(name) + "/(0.5,0)", m, vec2(0.5, 0.0), false, ++seed);
    }
    const std::vector<std::pair<std::string, SdeModel>> c2 = {
        {"c2-violating(reduced)", eliminate_b1(bundled("c2-violating"))},
        {"c2-mean-reverting", bundled("c2-mean-reverting")},
        {"c2-oscillating", bundled("c2-oscillating")}};
    for (const auto& [name, m] : c2) {
        const FellerReport prof = check_c2_violation_profile(m);
        for (const char* c : {"a_12>0", "a_11<0", "a_22<0", "det_a>0"}) {
            if (!find_condition(prof.conditions, c)->holds) {
                pass = false;
                failing += " " + name + "(" + c + ")";
            }
        }
        run(name + "/stopped(0.3,0.3)", m, vec2(0.3, 0.3), true, ++seed);
        run(name + "/stopped(0.5,0)", m, vec2(0.5, 0.0), true, ++seed);
    }
    return {pass, std::to_string(runs) + " runs x 1e5 paths, max z = " + fmt(worst, 3) +
                      (failing.empty() ? "" : "; failing:" + failing)};
}

// 6. Girsanov consistency.
Outcome girsanov() {
    bool pass = true;
    double worst = 0.0;
    std::string failing;
    const std::vector<std::tuple<std::string, SdeModel, Vector>> cases = {
        {"feller-satisfying", bundled("feller-satisfying"), vec2(0.5, 0.0)},
        {"a1-mixed", bundled("a1-mixed"), vec2(0.3, 0.3)},
        {"c22-violating", bundled("c22-violating"), vec2(0.5, 1.0)}};
    std::uint64_t seed = 600;
    for (const auto& [name, m, lam] : cases) {
        const GirsanovReport r = girsanov_consistency(m, mc_config(++seed), lam);
        for (const auto& f : r.functionals) worst = std::max(worst, f.z);
        if (!r.pass) {
            pass = false;
            failing += " " + name;
        }
    }
    return {pass, "3 models x 3 functionals, max z = " + fmt(worst, 3) + (failing.empty() ? "" : "; failing:" + failing)};
}

// 7. Negative volatility under violated conditions, none under the control.
Outcome negativity() {
    std::string detail;
    bool pass = true;
    for (const char* c : {"c22", "c2", "feller-control"}) {
        ReproduceOptions opt;
        opt.case_name = c;
        opt.threads = threads_from_env();
        const ReproduceResult r = reproduce(opt);
        const json& e = r.report.at("experiment");
        if (std::string(c) == "feller-control") {
            detail += std::string(c) + ": " + std::to_string(e.at("negative_count").get<std::uint64_t>()) + "/" +
                      std::to_string(e.at("n").get<std::uint64_t>()) + " negative";
        } else {
            detail += std::string(c) + ": " + e.at("statistic").get<std::string>() + " = " +
                      std::to_string(e.at("count").get<std::uint64_t>()) + "/" +
                      std::to_string(e.at("n").get<std::uint64_t>()) + ", 99% LB " +
                      fmt(e.at("lower_bound_99").get<double>()) + "; ";
        }
        pass = pass && r.pass;
    }
    return {pass, detail};
}

// 8. Monte Carlo mean against the expectation ODE.
Outcome ode_consistency() {
    bool pass = true;
    double worst = 0.0;
    std::uint64_t seed = 800;
    for (const char* name : {"feller-satisfying", "feller-weak-boundary", "appendix-a-case-i"}) {
        const SdeModel m = bundled(name);
        if (!check_canonical_feller(m).overall) pass = false;
        SimConfig cfg = mc_config(++seed);
        cfg.observe_times = {0.5, 1.0};
        const SimResult r = simulate(m, cfg, Vector::Zero(2), false);
        const CharSolution s = solve_expectation(m);
        for (const auto& o : r.observations) {
            const Eigen::Vector2d want(eval(s, o.t), integrate_expectation(s, o.t)(1));
            for (int i = 0; i < 2; ++i) {
                const double z = z_score(o.x[static_cast<std::size_t>(i)].mean - want(i),
                                         o.x[static_cast<std::size_t>(i)].standard_error());
                worst = std::max(worst, z);
                pass = pass && z < kZThreshold;
            }
        }
    }
    return {pass, "3 models, t in {0.5, 1}, both coordinates, max z = " + fmt(worst, 3)};
}

// 9. Novikov machinery.
Outcome novikov_machinery() {
    std::mt19937_64 g(909);
    double worst = 0.0;
    int done = 0;
    while (done < 1000) {
        Eigen::Matrix2d a;
        a << oracle::uniform(g, -3, 3), oracle::uniform(g, 0.05, 3), oracle::uniform(g, -3, 3), oracle::uniform(g, -3, -0.05);
        if (!(a.determinant() > 1e-3)) continue;
        const NovikovConstants k = constants(SdeModel(c2_params(a, 0.1, 1.0, 0.0)), 1.0);
        worst = std::max({worst, std::abs(k.c1 * a(0, 1) + k.c2 * a(1, 1)),
                          std::abs(k.c1 * a(0, 0) + k.c2 * a(1, 0) + 0.5 * (k.c1 * k.c1 + k.c2 * k.c2))});
        ++done;
    }
    Eigen::Matrix2d a;
    a << -1, 1, 0, -1;
    const Partition part = partition(SdeModel(c2_params(a, 0.1, 1.0, 0.0)), 1.0, 10.0);
    bool steps_positive = true;
    for (std::size_t i = 0; i + 1 < part.times.size(); ++i) steps_positive = steps_positive && part.times[i + 1] > part.times[i];
    const bool covers = part.times.back() >= 10.0;

    int found = 0, total = 0;
    auto U = [&](double lo, double hi) { return oracle::uniform(g, lo, hi); };
    static const char* names[] = {"i", "ii", "iii", "iv"};
    for (int which = 0; which < 4; ++which) {
        int n = 0;
        while (n < 500) {
            Matrix m(2, 2);
            switch (which) {
                case 0: m << U(-2, -0.01), U(0, 2), U(0, 2), U(-2, -0.01); break;
                case 1: m << U(0, 2), U(-2, -0.01), U(-2, -0.01), U(0, 2); break;
                case 2: m << U(-2, -0.01), U(-2, -0.01), U(-2, 2), U(-2, 2); break;
                default: m << U(-2, 2), U(-2, 2), U(-2, -0.01), U(-2, -0.01); break;
            }
            if (!classify_2x2_cases(m).count(names[which])) continue;
            const AddreqResult r = check_addreq(m, 2);
            found += r.holds && r.witness && verify_addreq_witness(m, *r.witness);
            ++n;
            ++total;
        }
    }
    return {worst < 1e-10 && steps_positive && covers && found == total,
            "identity residual " + fmt(worst, 3) + ", partition of [0,10]: " + std::to_string(part.steps()) +
                " steps, addreq witnesses " + std::to_string(found) + "/" + std::to_string(total)};
}

// 10. reproduce output independent of the thread count.
Outcome determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("feller-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::string outputs[2];
    int codes[2] = {-1, -1};
    const char* caps[2] = {"1", "8"};
    for (int i = 0; i < 2; ++i) {
        const fs::path out = dir / (std::string("run") + caps[i] + ".json");
        const std::string cmd = std::string("FELLER_PROBE_THREADS=") + caps[i] + " '" + FELLER_PROBE_BIN +
                                "' reproduce --case c22 --seed 42 --out '" + out.string() + "' >/dev/null 2>&1";
        codes[i] = std::system(cmd.c_str());
        try {
            outputs[i] = read_file(out.string());
        } catch (const Error&) {
        }
    }
    fs::remove_all(dir);
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
    return {codes[0] == 0 && codes[1] == 0 && same,
            std::string("threads 1 vs 8: ") + (same ? "identical" : "different") + " JSON (" +
                std::to_string(outputs[0].size()) + " bytes), exit codes " + std::to_string(codes[0]) + "/" +
                std::to_string(codes[1])};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"canonicalization correctness", canonicalization},
        {"ODE oracle equivalence", ode_oracle},
        {"certificate soundness, independent volatilities", certify_c22_soundness},
        {"certificate soundness, proportional volatilities", certify_c2_soundness},
        {"martingale property E L_T = 1", martingale},
        {"Girsanov consistency", girsanov},
        {"negative-volatility reproduction", negativity},
        {"Monte Carlo mean vs expectation ODE", ode_consistency},
        {"Novikov machinery", novikov_machinery},
        {"determinism across thread counts", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("%s criterion %zu: %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
