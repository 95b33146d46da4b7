#pragma once

/**
 * @file io.hpp
 * @brief JSON system and certificate files, CSV exports.
 *
 * Every file carries "format": 1. Matrices are written as nested rows and read
 * from nested rows, a flat row-major list of n*n numbers, or a bare number
 * (1x1).
 */

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "cert.hpp"
#include "margin.hpp"
#include "model.hpp"

namespace ltvcert::io {

using json = nlohmann::json;

inline constexpr int format_version = 1;

// ------------------------------------------------------------------ matrices

[[nodiscard]] inline json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

[[nodiscard]] inline Matrix matrix_from_json(const json& j, const std::string& what) {
    auto number = [&](const json& v) {
        if (!v.is_number())
            throw InputError(what + ": matrix entries must be numbers");
        return v.get<double>();
    };
    if (j.is_number())
        return Matrix::Constant(1, 1, number(j));
    if (!j.is_array() || j.empty())
        throw InputError(what + ": expected a matrix");
    if (j.front().is_array()) {
        const auto rows = static_cast<Eigen::Index>(j.size());
        const auto cols = static_cast<Eigen::Index>(j.front().size());
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& row = j[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
                throw InputError(what + ": ragged matrix rows");
            for (Eigen::Index c = 0; c < cols; ++c)
                m(i, c) = number(row[static_cast<std::size_t>(c)]);
        }
        return m;
    }
    const auto len = j.size();
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(len))));
    if (static_cast<std::size_t>(n * n) != len)
        throw InputError(what + ": flat matrix length " + std::to_string(len) + " is not a square");
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < n; ++c)
            m(i, c) = number(j[static_cast<std::size_t>(i * n + c)]);
    return m;
}

[[nodiscard]] inline json to_json(const std::vector<Matrix>& ms) {
    json out = json::array();
    for (const auto& m : ms)
        out.push_back(to_json(m));
    return out;
}

[[nodiscard]] inline std::vector<Matrix> matrices_from_json(const json& j, const std::string& what) {
    if (!j.is_array())
        throw InputError(what + ": expected a list of matrices");
    std::vector<Matrix> out;
    for (std::size_t k = 0; k < j.size(); ++k)
        out.push_back(matrix_from_json(j[k], what + "_" + std::to_string(k)));
    return out;
}

[[nodiscard]] inline std::vector<double> numbers_from_json(const json& j, const std::string& what) {
    if (!j.is_array())
        throw InputError(what + ": expected a list of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number())
            throw InputError(what + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

// --------------------------------------------------------------------- files

[[nodiscard]] inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

[[nodiscard]] inline json parse(const std::string& text, const std::string& what) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(what + ": malformed JSON: " + e.what());
    }
    if (!j.is_object())
        throw InputError(what + ": expected a JSON object");
    if (!j.contains("format") || !j["format"].is_number_integer() || j["format"].get<int>() != format_version)
        throw InputError(what + ": missing or unsupported \"format\" (expected 1)");
    return j;
}

// -------------------------------------------------------------------- system

struct SystemFile {
    std::string name;
    SystemDescription description;
};

[[nodiscard]] inline SystemFile system_from_json(const json& j) {
    SystemFile f;
    f.name = j.value("name", std::string{});
    if (!j.contains("breakpoints") || !j.contains("A"))
        throw InputError("system file needs \"breakpoints\" and \"A\"");
    f.description.breakpoints = numbers_from_json(j["breakpoints"], "breakpoints");
    f.description.a = matrices_from_json(j["A"], "A");
    if (j.contains("B") && !j["B"].is_null())
        f.description.b = matrices_from_json(j["B"], "B");
    if (j.contains("epsilon") && !j["epsilon"].is_null()) {
        if (j["epsilon"].is_number())
            f.description.epsilon =
                std::vector<double>(f.description.breakpoints.size(), j["epsilon"].get<double>());
        else
            f.description.epsilon = numbers_from_json(j["epsilon"], "epsilon");
    }
    return f;
}

[[nodiscard]] inline json to_json(const SystemFile& f) {
    json j;
    j["format"] = format_version;
    if (!f.name.empty())
        j["name"] = f.name;
    j["breakpoints"] = f.description.breakpoints;
    j["A"] = to_json(f.description.a);
    if (f.description.b)
        j["B"] = to_json(*f.description.b);
    if (f.description.epsilon)
        j["epsilon"] = *f.description.epsilon;
    return j;
}

[[nodiscard]] inline SystemFile load_system(const std::string& path) {
    return system_from_json(parse(read_file(path), path));
}

/// Decay rates from the file, or the default when absent.
[[nodiscard]] inline DecayRates decay_rates(const SystemDescription& d, std::optional<double> uniform_override = {}) {
    if (uniform_override)
        return DecayRates::uniform(d.breakpoints.size(), *uniform_override);
    if (d.epsilon)
        return DecayRates{*d.epsilon};
    return DecayRates::uniform(d.breakpoints.size());
}

// -------------------------------------------------------------- certificates

[[nodiscard]] inline json to_json(const SolverSummary& s) {
    return json{{"status", s.status},
                {"iterations", s.iterations},
                {"converged", s.converged},
                {"primal_objective", s.primal_objective},
                {"dual_objective", s.dual_objective},
                {"relative_gap", s.relative_gap},
                {"seconds", s.seconds},
                {"message", s.message}};
}

[[nodiscard]] inline SolverSummary solver_from_json(const json& j) {
    SolverSummary s;
    if (!j.is_object())
        return s;
    s.status = j.value("status", std::string{});
    s.iterations = j.value("iterations", 0);
    s.converged = j.value("converged", false);
    s.primal_objective = j.value("primal_objective", 0.0);
    s.dual_objective = j.value("dual_objective", 0.0);
    s.relative_gap = j.value("relative_gap", 0.0);
    s.seconds = j.value("seconds", 0.0);
    s.message = j.value("message", std::string{});
    return s;
}

[[nodiscard]] inline json to_json(const NominalCertificate& c) {
    json j;
    j["format"] = format_version;
    j["kind"] = "nominal";
    j["epsilon"] = c.epsilon.epsilon;
    j["mu_star"] = c.mu_star;
    j["P"] = to_json(c.p);
    j["Gamma"] = to_json(c.gamma);
    j["S"] = to_json(c.s);
    j["solver"] = to_json(c.solver);
    return j;
}

[[nodiscard]] inline json to_json(const RobustCertificate& c) {
    json j;
    j["format"] = format_version;
    j["kind"] = "robust";
    j["epsilon"] = c.epsilon.epsilon;
    j["Delta"] = c.delta;
    j["beta"] = c.beta;
    j["strict_boundary"] = c.strict_boundary;
    j["mu_star"] = c.mu_star;
    j["P"] = to_json(c.p);
    j["Gamma"] = to_json(c.gamma);
    j["Psi"] = to_json(c.psi);
    j["S1"] = to_json(c.s1);
    j["S2"] = to_json(c.s2);
    j["solver"] = to_json(c.solver);
    return j;
}

[[nodiscard]] inline std::string certificate_kind(const json& j) {
    const auto kind = j.value("kind", std::string{});
    if (kind != "nominal" && kind != "robust")
        throw InputError("certificate \"kind\" must be \"nominal\" or \"robust\"");
    return kind;
}

namespace detail {

inline const json& field(const json& j, const char* name) {
    if (!j.contains(name))
        throw InputError(std::string("certificate is missing \"") + name + "\"");
    return j[name];
}

}  // namespace detail

[[nodiscard]] inline NominalCertificate nominal_from_json(const json& j) {
    if (certificate_kind(j) != "nominal")
        throw InputError("expected a nominal certificate");
    NominalCertificate c;
    c.epsilon = DecayRates{numbers_from_json(detail::field(j, "epsilon"), "epsilon")};
    c.mu_star = j.value("mu_star", 0.0);
    c.p = matrices_from_json(detail::field(j, "P"), "P");
    c.gamma = matrices_from_json(detail::field(j, "Gamma"), "Gamma");
    c.s = matrices_from_json(detail::field(j, "S"), "S");
    if (j.contains("solver"))
        c.solver = solver_from_json(j["solver"]);
    return c;
}

[[nodiscard]] inline RobustCertificate robust_from_json(const json& j) {
    if (certificate_kind(j) != "robust")
        throw InputError("expected a robust certificate");
    RobustCertificate c;
    c.epsilon = DecayRates{numbers_from_json(detail::field(j, "epsilon"), "epsilon")};
    const auto& d = detail::field(j, "Delta");
    if (!d.is_number())
        throw InputError("certificate \"Delta\" must be a number");
    c.delta = d.get<double>();
    c.beta = beta_of_delta(c.delta);
    c.strict_boundary = j.value("strict_boundary", false);
    c.mu_star = j.value("mu_star", 0.0);
    c.p = matrices_from_json(detail::field(j, "P"), "P");
    c.gamma = matrices_from_json(detail::field(j, "Gamma"), "Gamma");
    c.psi = matrices_from_json(detail::field(j, "Psi"), "Psi");
    c.s1 = matrices_from_json(detail::field(j, "S1"), "S1");
    c.s2 = matrices_from_json(detail::field(j, "S2"), "S2");
    if (j.contains("solver"))
        c.solver = solver_from_json(j["solver"]);
    return c;
}

// ----------------------------------------------------------------------- CSV

/// 17 significant digits, locale independent.
[[nodiscard]] inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const LyapunovTrace* lt = nullptr) {
    const auto n = tr.states.empty() ? 0 : tr.states.front().size();
    os << "t";
    for (Eigen::Index i = 0; i < n; ++i)
        os << ",x_" << (i + 1);
    if (lt)
        os << ",V";
    os << "\n";
    for (std::size_t s = 0; s < tr.times.size(); ++s) {
        os << fmt(tr.times[s]);
        for (Eigen::Index i = 0; i < n; ++i)
            os << ',' << fmt(tr.states[s](i));
        if (lt)
            os << ',' << fmt(lt->values[s]);
        os << "\n";
    }
}

inline void write_frozen_csv(std::ostream& os, const FrozenTimeReport& rep) {
    os << "k,t_k,abscissa,delta_lower,delta_upper\n";
    for (const auto& e : rep.entries)
        os << e.k << ',' << fmt(e.t) << ',' << fmt(e.abscissa) << ',' << fmt(e.lower) << ',' << fmt(e.upper) << "\n";
}

inline void write_probe_csv(std::ostream& os, const std::vector<Probe>& probes) {
    os << "delta,beta,status,mu_star,seconds\n";
    for (const auto& p : probes)
        os << fmt(p.delta) << ',' << fmt(p.beta) << ',' << sdp::to_string(p.status) << ',' << fmt(p.mu_star) << ','
           << fmt(p.seconds) << "\n";
}

}  // namespace ltvcert::io
