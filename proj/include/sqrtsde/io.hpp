#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "sqrtsde/canonical.hpp"
#include "sqrtsde/certify.hpp"
#include "sqrtsde/feller.hpp"
#include "sqrtsde/model.hpp"
#include "sqrtsde/montecarlo.hpp"
#include "sqrtsde/novikov.hpp"
#include "sqrtsde/odeexp.hpp"

namespace sqrtsde {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Model files

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline double number_at(const json& j, const std::string& where) {
    if (!j.is_number()) fail(ErrorKind::Input, where + ": expected a number, got " + std::string(j.type_name()));
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(ErrorKind::Input, where + ": value is not finite");
    return v;
}

inline Vector vector_at(const json& doc, const std::string& key, int p, const std::string& src) {
    const std::string where = src + ": key \"" + key + "\"";
    const json& j = doc.at(key);
    if (!j.is_array()) fail(ErrorKind::Input, where + ": expected an array of " + std::to_string(p) + " numbers");
    if (static_cast<int>(j.size()) != p) {
        fail(ErrorKind::Input, where + ": expected " + std::to_string(p) + " entries, got " +
                                   std::to_string(j.size()));
    }
    Vector v(p);
    for (int i = 0; i < p; ++i) v(i) = number_at(j[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
    return v;
}

inline Matrix matrix_at(const json& doc, const std::string& key, int p, const std::string& src) {
    const std::string where = src + ": key \"" + key + "\"";
    const json& j = doc.at(key);
    if (!j.is_array() || static_cast<int>(j.size()) != p) {
        fail(ErrorKind::Input, where + ": expected " + std::to_string(p) + " rows");
    }
    Matrix m(p, p);
    for (int i = 0; i < p; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        const std::string rw = where + " row " + std::to_string(i);
        if (!row.is_array() || static_cast<int>(row.size()) != p) {
            fail(ErrorKind::Input, rw + ": expected " + std::to_string(p) + " entries");
        }
        for (int k = 0; k < p; ++k) {
            m(i, k) = number_at(row[static_cast<std::size_t>(k)], rw + "[" + std::to_string(k) + "]");
        }
    }
    return m;
}

}  // namespace detail

/// Parameters from a model object. `src` prefixes error messages.
inline SdeParams params_from_json(const json& doc, const std::string& src = "model") {
    if (!doc.is_object()) fail(ErrorKind::Input, src + ": top level must be a JSON object");
    for (const char* key : {"p", "a", "b", "beta", "x0"}) {
        if (!doc.contains(key)) fail(ErrorKind::Input, src + ": missing key \"" + std::string(key) + "\"");
    }
    const json& pj = doc.at("p");
    if (!pj.is_number_integer() || pj.get<long long>() < 1 || pj.get<long long>() > 1000) {
        fail(ErrorKind::Input, src + ": key \"p\": expected a positive integer");
    }
    const int p = pj.get<int>();
    SdeParams out;
    out.a = detail::matrix_at(doc, "a", p, src);
    out.b = detail::vector_at(doc, "b", p, src);
    out.sigma = doc.contains("sigma") ? detail::matrix_at(doc, "sigma", p, src) : Matrix::Identity(p, p);
    out.alpha = doc.contains("alpha") ? detail::vector_at(doc, "alpha", p, src) : Vector::Zero(p);
    out.beta = detail::matrix_at(doc, "beta", p, src);
    out.x0 = detail::vector_at(doc, "x0", p, src);
    return out;
}

/// Parses model text; syntax errors carry line and column.
inline SdeModel model_from_string(const std::string& text, const std::string& src = "model") {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Input, src + ": " + detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0) +
                                   ": JSON syntax error (" + e.what() + ")");
    }
    try {
        return SdeModel(params_from_json(doc, src));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Input && std::string(e.what()).rfind(src, 0) != 0) {
            fail(ErrorKind::Input, src + ": " + e.what());
        }
        throw;
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Input, path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SdeModel load_model(const std::string& path) { return model_from_string(read_file(path), path); }

// ---------------------------------------------------------------------------
// Serializers

inline json to_json(const Vector& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

inline json to_json(const Matrix& m) {
    json j = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        j.push_back(std::move(row));
    }
    return j;
}

inline json to_json(const SdeModel& m) {
    return {{"p", m.p()},         {"a", to_json(m.a())},         {"b", to_json(m.b())},
            {"sigma", to_json(m.sigma())}, {"alpha", to_json(m.alpha())}, {"beta", to_json(m.beta())},
            {"x0", to_json(m.x0())}};
}

inline json to_json(const Condition& c) {
    return {{"name", c.name}, {"expression", c.expression}, {"holds", c.holds}, {"margin", c.margin},
            {"strict", c.strict}};
}

inline json to_json(const std::vector<Condition>& cs) {
    json j = json::array();
    for (const auto& c : cs) j.push_back(to_json(c));
    return j;
}

inline json to_json(const SdeClass& c) {
    return {{"tag", to_string(c.tag)},
            {"p", c.p},
            {"m", c.m},
            {"canonical", c.canonical},
            {"canonical_feller", c.canonical_feller},
            {"proportional", c.proportional},
            {"proportional_canonical", c.proportional_canonical()},
            {"zero_initial_volatility", c.zero_initial_volatility},
            {"conditions", to_json(c.satisfied_conditions)}};
}

inline json to_json(const FellerReport& r) {
    json j = {{"overall", r.overall}, {"conditions", to_json(r.conditions)}, {"class", to_json(r.class_context)}};
    if (!r.canonical_feller.empty()) j["canonical_feller"] = to_json(r.canonical_feller);
    return j;
}

inline json to_json(const CanonicalTransform& t) {
    return {{"K", to_json(t.K)}, {"ell", to_json(t.ell)}, {"c", t.c}, {"model", to_json(t.transformed)},
            {"sign_flips", t.sign_flips}};
}

inline json to_json(const CharSolution& s) {
    json j = {{"tau", s.tau}, {"delta", s.delta}, {"rho", s.rho}, {"D", s.D}, {"kind", kind_name(s)},
              {"x0", s.x0},   {"y0", s.y0},       {"xdot0", s.xdot0}};
    j["xbar"] = s.xbar ? json(*s.xbar) : json(nullptr);
    if (const auto* r = std::get_if<RealDistinctRoots>(&s.kind)) {
        j["roots"] = {{"r1", r->r1}, {"r2", r->r2}, {"B1", r->B1}, {"B2", r->B2}};
    } else if (const auto* c = std::get_if<ComplexRoots>(&s.kind)) {
        j["roots"] = {{"omega", c->omega}, {"c1", c->c1}, {"c2", c->c2}};
    }
    return j;
}

inline json to_json(const Certificate& c) {
    json params = json::array();
    for (const auto& e : c.tilted_params) {
        params.push_back({{"entry", e.name()}, {"original", e.original}, {"tilted", e.tilted}});
    }
    json j = {{"route", to_string(c.route)},
              {"t0", c.t0},
              {"tilted_params", params},
              {"lambda", {c.lambda(0), c.lambda(1)}},
              {"expected_value", c.expected_value},
              {"oracle_value", c.oracle_value}};
    if (c.route == CertRoute::IndependentVols) {
        j["doublings"] = c.doublings;
    } else {
        j["case"] = c.proof_case;
        if (c.k) j["k"] = *c.k;
        if (c.omega) j["omega"] = *c.omega;
        if (c.case1_bound) j["case1_bound"] = *c.case1_bound;
    }
    return j;
}

inline json to_json(const NovikovConstants& k) {
    return {{"c1", k.c1}, {"c2", k.c2}, {"c", k.c}, {"k_intercept", k.k_intercept}, {"k_slope", k.k_slope}};
}

inline json to_json(const Partition& p) {
    return {{"horizon", p.horizon}, {"steps", p.steps()}, {"times", p.times}};
}

inline json to_json(const AddreqResult& r) {
    return {{"holds", r.holds}, {"witness", r.witness ? to_json(*r.witness) : json(nullptr)}};
}

inline json to_json(const Moments& m) {
    return {{"mean", m.mean}, {"se", m.standard_error()}, {"n", m.n}};
}

inline json to_json(const SimConfig& c) {
    return {{"horizon", c.horizon}, {"dt", c.step()},   {"n_steps", c.n_steps()},
            {"n_paths", c.n_paths}, {"seed", c.master_seed}, {"scheme", SimConfig::scheme}};
}

inline json to_json(const ObservationStats& o) {
    json mean_state = json::array(), vols = json::array();
    for (const auto& m : o.x) mean_state.push_back(to_json(m));
    for (const auto& m : o.v) vols.push_back(to_json(m));
    return {{"t", o.t},
            {"mean_state", mean_state},
            {"mean_v", vols},
            {"mean_L", to_json(o.L)},
            {"frac_V_negative", to_json(o.v_negative)},
            {"frac_tau_before", to_json(o.tau_before)},
            {"negative_count", o.negative_count()},
            {"tau_count", o.tau_count()}};
}

inline json to_json(const SimResult& r) {
    json obs = json::array();
    for (const auto& o : r.observations) obs.push_back(to_json(o));
    return {{"config", to_json(r.config)},
            {"lambda", to_json(r.lambda)},
            {"stopped", r.stopped},
            {"n_excluded", r.n_excluded},
            {"observations", obs}};
}

inline json to_json(const MartingaleReport& r) {
    json pts = json::array();
    for (const auto& p : r.points) pts.push_back({{"t", p.t}, {"mean_L", p.mean_L}, {"se", p.se}, {"z", p.z}});
    return {{"pass", r.pass}, {"n_excluded", r.n_excluded}, {"points", pts}};
}

inline json to_json(const GirsanovReport& r) {
    json fs = json::array();
    for (const auto& f : r.functionals) {
        fs.push_back({{"functional", f.name},
                      {"weighted", f.weighted},
                      {"weighted_se", f.weighted_se},
                      {"tilted", f.tilted},
                      {"tilted_se", f.tilted_se},
                      {"z", f.z},
                      {"pass", f.pass}});
    }
    return {{"pass", r.pass}, {"functionals", fs}};
}

inline json to_json(const NegativityReport& r) {
    return {{"route", to_string(r.route)},
            {"t0", r.t0},
            {"statistic", r.statistic},
            {"count", r.count},
            {"n", r.n},
            {"fraction", r.fraction},
            {"se", r.se},
            {"lower_bound_99", r.lower_bound_99},
            {"tilted_mean_v", r.tilted_mean_v},
            {"tilted_se", r.tilted_se},
            {"ode_prediction", r.ode_prediction},
            {"euler_prediction", r.euler_prediction},
            {"tilted_z", r.tilted_z},
            {"tilted_agrees", r.tilted_agrees},
            {"pass", r.pass}};
}

/// 64-bit FNV-1a of a string.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace sqrtsde
