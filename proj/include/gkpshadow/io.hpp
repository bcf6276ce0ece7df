#pragma once
// JSON serialization of bases, characteristic-function specs and run
// configurations, with strict key validation, plus run-manifest digests.

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gkpshadow/charfun.hpp"
#include "gkpshadow/shadow.hpp"
#include "gkpshadow/symplectic.hpp"

namespace gkps {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

inline void schema_fail(const std::string& path, const std::string& what) {
    throw Error(Errc::SchemaError, path + ": " + what);
}

/// Rejects keys of `j` outside `allowed`.
inline void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) schema_fail(path, "expected object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) schema_fail(path + "." + it.key(), "unknown key");
}

inline double get_number(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) schema_fail(path + "." + key, "missing");
    if (!j.at(key).is_number()) schema_fail(path + "." + key, "expected number");
    return j.at(key).get<double>();
}

inline std::uint64_t get_count(const json& j, const std::string& key, const std::string& path) {
    if (!j.at(key).is_number_unsigned() && !(j.at(key).is_number_integer() && j.at(key).get<long long>() >= 0))
        schema_fail(path + "." + key, "expected non-negative integer");
    return j.at(key).get<std::uint64_t>();
}

inline MatrixXd matrix_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) schema_fail(path, "expected non-empty array of rows");
    const std::size_t r = j.size(), c = j[0].size();
    MatrixXd M(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (!j[i].is_array() || j[i].size() != c) schema_fail(path + "[" + std::to_string(i) + "]", "ragged row");
        for (std::size_t k = 0; k < c; ++k) {
            if (!j[i][k].is_number()) schema_fail(path, "expected number");
            M(i, k) = j[i][k].get<double>();
        }
    }
    return M;
}

inline json matrix_to_json(const MatrixXd& M) {
    json j = json::array();
    for (int i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        j.push_back(row);
    }
    return j;
}

inline json matrix_to_json(const MatrixXl& M) {
    json j = json::array();
    for (int i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        j.push_back(row);
    }
    return j;
}

// ---------------------------------------------------------------- bases

inline json basis_to_json(const SymplecticBasis& b) { return {{"n", b.n()}, {"rows", matrix_to_json(b.M())}}; }

inline SymplecticBasis basis_from_json(const json& j, double tol = 1e-9) {
    check_keys(j, "basis", {"n", "rows"});
    const MatrixXd M = matrix_from_json(j.at("rows"), "basis.rows");
    if (j.contains("n") && j.at("n").get<int>() * 2 != M.rows()) schema_fail("basis.n", "does not match rows");
    return SymplecticBasis(M, tol);
}

/// Plain-text form (whitespace-separated rows) or JSON object, by first character.
inline SymplecticBasis load_basis(const std::string& text, double tol = 1e-9) {
    const auto p = text.find_first_not_of(" \t\r\n");
    if (p != std::string::npos && text[p] == '{') return basis_from_json(json::parse(text), tol);
    return SymplecticBasis(parse_matrix_text(text), tol);
}

// ---------------------------------------------------------------- specs

inline MatrixXcd cmatrix_from_json(const json& j, const std::string& path) {
    if (j.is_object()) {
        check_keys(j, path, {"re", "im"});
        const MatrixXd re = matrix_from_json(j.at("re"), path + ".re");
        MatrixXd im = MatrixXd::Zero(re.rows(), re.cols());
        if (j.contains("im")) im = matrix_from_json(j.at("im"), path + ".im");
        if (im.rows() != re.rows() || im.cols() != re.cols()) schema_fail(path, "re/im shape mismatch");
        return re.cast<cd>() + cd(0, 1) * im.cast<cd>();
    }
    return matrix_from_json(j, path).cast<cd>();
}

inline VectorXd vector_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) schema_fail(path, "expected array");
    VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) schema_fail(path, "expected number");
        v[i] = j[i].get<double>();
    }
    return v;
}

inline VectorXcd cvector_from_json(const json& j, const std::string& path) {
    if (j.is_object()) {
        check_keys(j, path, {"re", "im"});
        const VectorXd re = vector_from_json(j.at("re"), path + ".re");
        VectorXd im = VectorXd::Zero(re.size());
        if (j.contains("im")) im = vector_from_json(j.at("im"), path + ".im");
        if (im.size() != re.size()) schema_fail(path, "re/im length mismatch");
        return re.cast<cd>() + cd(0, 1) * im.cast<cd>();
    }
    return vector_from_json(j, path).cast<cd>();
}

inline json cmatrix_to_json(const MatrixXcd& M) {
    return {{"re", matrix_to_json(MatrixXd(M.real()))}, {"im", matrix_to_json(MatrixXd(M.imag()))}};
}

inline json cvector_to_json(const VectorXcd& v) {
    json re = json::array(), im = json::array();
    for (int i = 0; i < v.size(); ++i) {
        re.push_back(v[i].real());
        im.push_back(v[i].imag());
    }
    return {{"re", re}, {"im", im}};
}

/// Raw form {n, terms:[{amp_re, amp_im, quad, lin}], label}.
inline json spec_to_json(const ObservableSpec& s) {
    json terms = json::array();
    for (const auto& t : s.terms)
        terms.push_back({{"amp_re", t.amp.real()},
                         {"amp_im", t.amp.imag()},
                         {"quad", cmatrix_to_json(t.G)},
                         {"lin", cvector_to_json(t.b)}});
    return {{"n", s.n}, {"terms", terms}, {"label", s.label}};
}

inline std::vector<cd> amplitudes_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) schema_fail(path, "expected array of [re, im]");
    std::vector<cd> a;
    for (const auto& x : j) {
        if (x.is_number()) {
            a.emplace_back(x.get<double>(), 0.0);
        } else if (x.is_array() && x.size() == 2) {
            a.emplace_back(x[0].get<double>(), x[1].get<double>());
        } else {
            schema_fail(path, "amplitude must be a number or [re, im]");
        }
    }
    return a;
}

/// Raw spec or named constructor {"kind": ...}.
inline ObservableSpec spec_from_json(const json& j, const std::string& path = "spec") {
    if (!j.is_object()) schema_fail(path, "expected object");
    ObservableSpec s;
    const std::string label = j.value("label", "");
    if (j.contains("kind")) {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "thermal") {
            check_keys(j, path, {"kind", "beta", "n", "label"});
            s = thermal_char(get_number(j, "beta", path), j.value("n", 1));
        } else if (kind == "vacuum") {
            check_keys(j, path, {"kind", "n", "label"});
            s = vacuum_char(j.value("n", 1));
        } else if (kind == "coherent") {
            check_keys(j, path, {"kind", "alpha", "label"});
            s = coherent_char(amplitudes_from_json(j.at("alpha"), path + ".alpha"));
        } else if (kind == "squeezed") {
            check_keys(j, path, {"kind", "r", "label"});
            const VectorXd r = vector_from_json(j.at("r"), path + ".r");
            s = squeezed_char(std::vector<double>(r.data(), r.data() + r.size()));
        } else if (kind == "thermal_state") {
            check_keys(j, path, {"kind", "nbar", "n", "label"});
            s = thermal_state_char(get_number(j, "nbar", path), j.value("n", 1));
        } else if (kind == "gaussian_state") {
            check_keys(j, path, {"kind", "V", "xbar", "label"});
            s = gaussian_state_char(matrix_from_json(j.at("V"), path + ".V"), vector_from_json(j.at("xbar"), path + ".xbar"));
        } else if (kind == "tensor") {
            check_keys(j, path, {"kind", "factors", "label"});
            std::vector<ObservableSpec> f;
            for (std::size_t i = 0; i < j.at("factors").size(); ++i)
                f.push_back(spec_from_json(j.at("factors")[i], path + ".factors[" + std::to_string(i) + "]"));
            s = tensor_product(f);
        } else {
            schema_fail(path + ".kind", "unknown kind '" + kind + "'");
        }
    } else {
        check_keys(j, path, {"n", "terms", "label", "hermitian"});
        s.n = j.at("n").get<int>();
        if (s.n < 1) schema_fail(path + ".n", "must be >= 1");
        s.hermitian = j.value("hermitian", true);
        const json& terms = j.at("terms");
        if (!terms.is_array() || terms.empty()) schema_fail(path + ".terms", "expected non-empty array");
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const std::string tp = path + ".terms[" + std::to_string(i) + "]";
            check_keys(terms[i], tp, {"amp_re", "amp_im", "quad", "lin"});
            GaussianChar t;
            t.n = s.n;
            t.amp = cd(terms[i].value("amp_re", 0.0), terms[i].value("amp_im", 0.0));
            t.G = cmatrix_from_json(terms[i].at("quad"), tp + ".quad");
            t.b = terms[i].contains("lin") ? cvector_from_json(terms[i].at("lin"), tp + ".lin")
                                           : VectorXcd::Zero(2 * s.n).eval();
            if (t.G.rows() != 2 * s.n || t.G.cols() != 2 * s.n || t.b.size() != 2 * s.n)
                schema_fail(tp, "quad/lin shape does not match n");
            if (Eigen::LLT<MatrixXd>(t.G.real()).info() != Eigen::Success)
                throw Error(Errc::InadmissibleCovariance, tp + ": Re quad not positive definite");
            s.terms.push_back(t);
        }
    }
    if (!label.empty()) s.label = label;
    return s;
}

// ---------------------------------------------------------------- shadow config

inline ShadowConfig shadow_config_from_json(const json& j) {
    check_keys(j, "config", {"mode", "n", "state", "observables", "epsilon", "delta", "N", "B", "K", "seed", "shards",
                             "tol", "grid_res", "sampler", "approx_steps", "nbar", "plan_bound", "c_multiplier"});
    ShadowConfig c;
    const std::string mode = j.value("mode", "global");
    if (mode == "global") {
        c.mode = ShadowMode::Global;
    } else if (mode == "local") {
        c.mode = ShadowMode::Local;
    } else {
        schema_fail("config.mode", "expected global or local");
    }
    if (!j.contains("state")) schema_fail("config.state", "missing");
    if (!j.contains("observables")) schema_fail("config.observables", "missing");
    c.state = spec_from_json(j.at("state"), "config.state");
    c.n = j.value("n", c.state.n);
    if (c.n != c.state.n) schema_fail("config.n", "does not match the state");
    const json& obs = j.at("observables");
    if (!obs.is_array() || obs.empty()) schema_fail("config.observables", "expected non-empty array");
    for (std::size_t i = 0; i < obs.size(); ++i) {
        c.observables.push_back(spec_from_json(obs[i], "config.observables[" + std::to_string(i) + "]"));
        if (c.observables.back().label.empty()) c.observables.back().label = "O" + std::to_string(i);
    }
    if (j.contains("epsilon")) c.epsilon = get_number(j, "epsilon", "config");
    if (j.contains("delta")) c.delta = get_number(j, "delta", "config");
    if (!(c.epsilon > 0 && c.epsilon < 1)) schema_fail("config.epsilon", "must lie in (0, 1)");
    if (!(c.delta > 0 && c.delta < 1)) schema_fail("config.delta", "must lie in (0, 1)");
    if (j.contains("N")) c.N = get_count(j, "N", "config");
    if (j.contains("B")) c.B = get_count(j, "B", "config");
    if (j.contains("K")) c.K = get_count(j, "K", "config");
    if (c.B && c.K && c.N && *c.N != *c.B * *c.K) schema_fail("config.N", "inconsistent with B*K");
    if (c.K && *c.K == 0) schema_fail("config.K", "must be >= 1");
    if (j.contains("seed")) c.seed = get_count(j, "seed", "config");
    c.shards = j.contains("shards") ? static_cast<unsigned>(get_count(j, "shards", "config")) : default_shards();
    if (c.shards == 0) schema_fail("config.shards", "must be >= 1");
    if (j.contains("tol")) c.tol = get_number(j, "tol", "config");
    if (!(c.tol > 0)) schema_fail("config.tol", "must be positive");
    if (j.contains("grid_res")) c.grid_res = static_cast<int>(get_count(j, "grid_res", "config"));
    const std::string sampler = j.value("sampler", "rejection");
    if (sampler == "rejection") {
        c.sampler = PointerSampler::Rejection;
    } else if (sampler == "grid") {
        c.sampler = PointerSampler::Grid;
    } else {
        schema_fail("config.sampler", "expected rejection or grid");
    }
    if (j.contains("approx_steps")) c.approx_steps = static_cast<int>(get_count(j, "approx_steps", "config"));
    if (j.contains("nbar")) c.nbar = get_number(j, "nbar", "config");
    c.plan_bound = j.value("plan_bound", "vhat");
    if (c.plan_bound != "vhat" && c.plan_bound != "vtilde" && c.plan_bound != "vloc")
        schema_fail("config.plan_bound", "expected vhat, vtilde or vloc");
    if (j.contains("c_multiplier")) c.c_multiplier = get_number(j, "c_multiplier", "config");
    if (!(c.c_multiplier > 0)) schema_fail("config.c_multiplier", "must be positive");
    return c;
}

/// Echo with defaults filled; round-trips through shadow_config_from_json.
inline json shadow_config_to_json(const ShadowConfig& c) {
    json j{{"mode", c.mode == ShadowMode::Global ? "global" : "local"},
           {"n", c.n},
           {"state", spec_to_json(c.state)},
           {"epsilon", c.epsilon},
           {"delta", c.delta},
           {"seed", c.seed},
           {"shards", c.shards},
           {"tol", c.tol},
           {"grid_res", c.grid_res},
           {"sampler", c.sampler == PointerSampler::Grid ? "grid" : "rejection"},
           {"approx_steps", c.approx_steps},
           {"plan_bound", c.plan_bound},
           {"c_multiplier", c.c_multiplier}};
    json obs = json::array();
    for (const auto& o : c.observables) obs.push_back(spec_to_json(o));
    j["observables"] = obs;
    if (c.N) j["N"] = *c.N;
    if (c.B) j["B"] = *c.B;
    if (c.K) j["K"] = *c.K;
    if (c.nbar) j["nbar"] = *c.nbar;
    return j;
}

inline json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::InvalidArgument, "cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw Error(Errc::SchemaError, path + ": " + e.what());
    }
}

inline ShadowConfig load_config(const std::string& path) { return shadow_config_from_json(read_json_file(path)); }

// ---------------------------------------------------------------- manifest

/// SHA-256 hex digest; the hashing routine is injected so the library stays
/// free of a crypto dependency.
using DigestFn = std::string (*)(const std::string&);

/// Digest over the reproducibility-relevant fields only (no timestamps).
inline std::string manifest_digest(DigestFn sha, const std::string& command, const json& config, std::uint64_t seed,
                                   unsigned shards) {
    const json key{{"command", command}, {"config", config}, {"seed", seed}, {"shards", shards}, {"version", kVersion}};
    return sha(key.dump());
}

}  // namespace gkps
