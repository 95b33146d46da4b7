#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <ltvcert/analysis.hpp>
#include <ltvcert/cert.hpp>
#include <ltvcert/conic.hpp>
#include <ltvcert/io.hpp>
#include <ltvcert/margin.hpp>
#include <ltvcert/model.hpp>

namespace fs = std::filesystem;
using namespace ltvcert;
using io::json;

namespace {

enum Exit : int { exit_ok = 0, exit_negative = 1, exit_inconclusive = 2, exit_input = 64 };

int exit_of(sdp::Status s) {
    switch (s) {
        case sdp::Status::feasible: return exit_ok;
        case sdp::Status::infeasible: return exit_negative;
        case sdp::Status::inconclusive: return exit_inconclusive;
    }
    return exit_inconclusive;
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

struct Input {
    std::string path;
    std::string digest;
    io::SystemFile file;
};

Input load_input(const std::string& path) {
    Input in;
    in.path = path;
    const auto text = io::read_file(path);
    in.digest = sha256_hex(text);
    in.file = io::system_from_json(io::parse(text, path));
    const auto issues = validate(in.file.description);
    if (!issues.empty()) {
        std::string msg = "invalid system " + path + ":";
        for (const auto& s : issues)
            msg += "\n  " + s;
        throw InputError(msg);
    }
    return in;
}

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
    return p;
}

json report_head(const std::string& command, const Input& in) {
    json r;
    r["format"] = io::format_version;
    r["command"] = command;
    r["input"] = in.path;
    r["input_sha256"] = in.digest;
    if (!in.file.name.empty())
        r["system"] = in.file.name;
    return r;
}

void write_report(const fs::path& dir, const json& report) { io::write_file((dir / "report.json").string(), report.dump(1) + "\n"); }

json grid_json(const GridReport& g) {
    return json{{"max_eigenvalue", g.max_eigenvalue}, {"segment", g.segment}, {"alpha", g.alpha},
                {"delta", g.delta},                   {"role", g.role},       {"confirmed", g.confirmed()}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ commands

struct CommonArgs {
    std::string system;
    std::string out_dir = ".";
    std::optional<double> eps;
};

int cmd_validate(const CommonArgs& a) {
    const auto in = load_input(a.system);
    const auto& d = in.file.description;
    std::cout << "valid: n = " << d.a.front().rows() << ", N = " << d.breakpoints.size() - 1
              << (d.b ? ", B present" : ", no B") << "\n";
    return exit_ok;
}

struct CertifyArgs {
    std::optional<double> delta;
    bool strict = false;
    int grid = 101;
};

int cmd_certify(const CommonArgs& a, const CertifyArgs& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto in = load_input(a.system);
    const auto& d = in.file.description;
    const auto eps = io::decay_rates(d, a.eps);
    eps.check(d.breakpoints.size());
    CertOptions opts;
    opts.strict_boundary = c.strict;
    const auto dir = prepare_out_dir(a.out_dir);
    auto report = report_head("certify", in);
    const auto cert_path = (dir / "certificate.json").string();

    auto finish = [&](const auto& out, const char* kind, auto&& recheck_from_disk) {
        report["kind"] = kind;
        report["verdict"] = sdp::to_string(out.status);
        report["solver"] = io::to_json(out.solver);
        std::cout << "certify (" << kind << "): " << sdp::to_string(out.status);
        if (out.certificate) {
            io::write_file(cert_path, io::to_json(*out.certificate).dump(1) + "\n");
            const auto numbers = recheck_from_disk();
            report["numbers"] = numbers;
            report["files"] = json::array({cert_path});
            std::cout << ", mu* = " << io::fmt(numbers["mu_star"].template get<double>()) << "\n";
        } else {
            report["numbers"] = json{{"mu_star", out.mu_star}};
            report["most_violated"] = json{{"label", out.most_violated}, {"segment", out.most_violated_segment}};
            std::cout << ", mu* = " << io::fmt(out.mu_star) << "; most violated: " << out.most_violated << "\n";
            if (out.status == sdp::Status::inconclusive)
                std::cerr << "solver: " << out.solver.message << "\n";
        }
        report["timings"] = json{{"total_seconds", seconds_since(t0)}, {"solver_seconds", out.solver.seconds}};
        write_report(dir, report);
        return exit_of(out.status);
    };

    GridOptions grid;
    grid.alpha_points = c.grid;
    if (c.delta) {
        const auto usys = make_uncertain_system(d);
        const auto out = solve_robust(usys, eps, *c.delta, opts);
        return finish(out, "robust", [&] {
            const auto cert = io::robust_from_json(io::parse(io::read_file(cert_path), cert_path));
            const auto chk = recheck(usys, cert, opts);
            return json{{"mu_star", chk.margin},
                        {"Delta", cert.delta},
                        {"beta", beta_of_delta(cert.delta)},
                        {"grid_oracle", grid_json(verify_certificate_grid(cert, usys, grid))}};
        });
    }
    const auto sys = make_system(d);
    const auto out = solve_nominal(sys, eps, opts);
    return finish(out, "nominal", [&] {
        const auto cert = io::nominal_from_json(io::parse(io::read_file(cert_path), cert_path));
        const auto chk = recheck(sys, cert, opts);
        return json{{"mu_star", chk.margin}, {"grid_oracle", grid_json(verify_certificate_grid(cert, sys, grid))}};
    });
}

struct MarginArgs {
    double delta_max = 1e6;
    double tol_bis = 1e-3;
    bool printed_boundary = false;
    int grid = 101;
};

int cmd_margin(const CommonArgs& a, const MarginArgs& m) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto in = load_input(a.system);
    const auto& d = in.file.description;
    const auto usys = make_uncertain_system(d);
    const auto eps = io::decay_rates(d, a.eps);
    eps.check(d.breakpoints.size());
    MarginOptions opts;
    opts.delta_max = m.delta_max;
    opts.tol_bis = m.tol_bis;
    opts.cert.strict_boundary = !m.printed_boundary;
    const auto dir = prepare_out_dir(a.out_dir);
    auto report = report_head("margin", in);

    const auto result = max_uncertainty(usys, eps, opts);
    if (!result) {
        report["verdict"] = "infeasible";
        report["timings"] = json{{"total_seconds", seconds_since(t0)}};
        write_report(dir, report);
        std::cout << "margin: no certified interval (Delta = 1 + 1e-6 not certified)\n";
        return exit_negative;
    }

    const auto cert_path = (dir / "certificate.json").string();
    const auto probe_path = (dir / "probes.csv").string();
    io::write_file(cert_path, io::to_json(result->certificate).dump(1) + "\n");
    std::ostringstream csv;
    io::write_probe_csv(csv, result->probes);
    io::write_file(probe_path, csv.str());

    const auto cert = io::robust_from_json(io::parse(io::read_file(cert_path), cert_path));
    GridOptions grid;
    grid.alpha_points = m.grid;
    const auto oracle = verify_certificate_grid(cert, usys, grid);
    const double delta_star = cert.delta;
    report["verdict"] = "feasible";
    report["numbers"] = json{{"delta_star", delta_star},
                             {"beta_star", beta_of_delta(delta_star)},
                             {"interval", json::array({1.0 / delta_star, delta_star})},
                             {"grid_oracle", grid_json(oracle)}};
    report["flags"] = json{{"uncertainty_inactive", result->uncertainty_inactive},
                           {"capped", result->capped},
                           {"verified", result->verified},
                           {"inconclusive_probes", result->any_inconclusive},
                           {"strict_boundary", cert.strict_boundary}};
    if (!result->note.empty())
        report["note"] = result->note;
    report["probes"] = result->probes.size();
    report["files"] = json::array({cert_path, probe_path});
    report["timings"] = json{{"total_seconds", seconds_since(t0)}};
    write_report(dir, report);

    char line[128];
    std::snprintf(line, sizeof line, "stable for all \xce\xb4 \xe2\x88\x88 [%.4f, %.4f]", 1.0 / delta_star, delta_star);
    std::cout << line << "\n";
    std::cout << "Delta* = " << io::fmt(delta_star) << ", beta* = " << io::fmt(beta_of_delta(delta_star)) << "\n";
    if (!result->note.empty())
        std::cout << "note: " << result->note << "\n";
    if (!oracle.confirmed()) {
        std::cerr << "grid oracle rejected the certificate at " << oracle.role << "\n";
        return exit_inconclusive;
    }
    return exit_ok;
}

struct SimulateArgs {
    std::optional<double> delta;
    std::vector<double> x0;
    std::optional<double> t0, t1;
    double h = 1e-3;
    std::string cert;
};

int cmd_simulate(const CommonArgs& a, const SimulateArgs& s) {
    const auto in = load_input(a.system);
    const auto& d = in.file.description;
    const auto n = d.a.front().rows();
    Vector x0 = Vector::Zero(n);
    if (s.x0.empty())
        x0(0) = 1.0;
    else if (static_cast<Eigen::Index>(s.x0.size()) != n)
        throw InputError("--x0 needs " + std::to_string(n) + " values");
    else
        for (Eigen::Index i = 0; i < n; ++i)
            x0(i) = s.x0[static_cast<std::size_t>(i)];
    const double t0 = s.t0.value_or(d.breakpoints.front());
    const double t1 = s.t1.value_or(d.breakpoints.back());
    SimulationOptions so;
    so.h = s.h;

    Trajectory tr;
    if (s.delta) {
        const auto usys = make_uncertain_system(d);
        tr = simulate(usys, *s.delta, x0, t0, t1, so);
    } else {
        tr = simulate(make_system(d), x0, t0, t1, so);
    }

    const auto dir = prepare_out_dir(a.out_dir);
    auto report = report_head("simulate", in);
    std::optional<LyapunovTrace> lt;
    std::vector<std::string> notes;
    if (!s.cert.empty()) {
        const auto j = io::parse(io::read_file(s.cert), s.cert);
        const TimeGrid grid(d.breakpoints);
        if (io::certificate_kind(j) == "robust") {
            const auto c = io::robust_from_json(j);
            lt = lyapunov_monitor(tr, grid, c);
            const double delta = s.delta.value_or(0.0);
            if (!s.delta || delta < 1.0 / c.delta || delta > c.delta)
                notes.push_back("outside certified interval");
        } else {
            lt = lyapunov_monitor(tr, grid, io::nominal_from_json(j));
            if (s.delta && *s.delta != 0.0)
                notes.push_back("outside certified interval");
        }
    }
    if (tr.diverged)
        notes.push_back("diverged");

    const auto csv_path = (dir / "trajectory.csv").string();
    std::ostringstream csv;
    io::write_trajectory_csv(csv, tr, lt ? &*lt : nullptr);
    io::write_file(csv_path, csv.str());

    const double growth = tr.states.back().norm() / std::max(x0.norm(), std::numeric_limits<double>::min());
    report["numbers"] = json{{"samples", tr.times.size()}, {"final_time", tr.times.back()}, {"growth", growth}};
    if (s.delta)
        report["delta"] = *s.delta;
    if (lt)
        report["lyapunov"] = json{{"pass", lt->pass}, {"epsilon_floor", lt->epsilon_floor}};
    report["notes"] = notes;
    report["files"] = json::array({csv_path});
    write_report(dir, report);

    std::cout << "simulate: " << tr.times.size() << " samples, |x(t1)|/|x0| = " << io::fmt(growth) << "\n";
    for (const auto& note : notes)
        std::cout << "note: " << note << "\n";
    if (lt) {
        std::cout << "lyapunov decay: " << (lt->pass ? "pass" : "fail") << "\n";
        return lt->pass ? exit_ok : exit_negative;
    }
    return exit_ok;
}

int cmd_frozen(const CommonArgs& a, bool signed_search, double cap) {
    const auto in = load_input(a.system);
    const auto usys = make_uncertain_system(in.file.description);
    FrozenOptions opts;
    opts.signed_search = signed_search;
    opts.cap = cap;
    const auto rep = frozen_time_margins(usys, opts);
    const auto dir = prepare_out_dir(a.out_dir);
    const auto csv_path = (dir / "frozen.csv").string();
    std::ostringstream csv;
    io::write_frozen_csv(csv, rep);
    io::write_file(csv_path, csv.str());

    auto report = report_head("frozen", in);
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& e : rep.entries)
        worst = std::max(worst, e.abscissa);
    report["numbers"] = json{{"lower", rep.lower}, {"upper", rep.upper}, {"max_abscissa", worst}};
    report["empty"] = rep.empty;
    report["files"] = json::array({csv_path});
    write_report(dir, report);

    if (rep.empty) {
        std::cout << "frozen-time: no common interval (some A_k + B_k is not Hurwitz)\n";
        return exit_negative;
    }
    std::cout << "frozen-time interval: [" << io::fmt(rep.lower) << ", " << io::fmt(rep.upper) << "]\n";
    return exit_ok;
}

int cmd_verify(const CommonArgs& a, const std::string& cert_path, int grid_points) {
    const auto in = load_input(a.system);
    const auto& d = in.file.description;
    const auto j = io::parse(io::read_file(cert_path), cert_path);
    GridOptions opts;
    opts.alpha_points = grid_points;
    GridReport g;
    if (io::certificate_kind(j) == "robust")
        g = verify_certificate_grid(io::robust_from_json(j), make_uncertain_system(d), opts);
    else
        g = verify_certificate_grid(io::nominal_from_json(j), make_system(d), opts);

    std::cout << "verify: max eigenvalue " << io::fmt(g.max_eigenvalue) << " at " << g.role;
    if (g.role == "segment")
        std::cout << " k = " << g.segment << ", alpha = " << io::fmt(g.alpha) << ", delta = " << io::fmt(g.delta);
    std::cout << " -> " << (g.confirmed() ? "confirmed" : "rejected") << "\n";
    return g.confirmed() ? exit_ok : exit_negative;
}

int cmd_dump(const CommonArgs& a, std::optional<double> delta, bool strict, const std::string& out) {
    const auto in = load_input(a.system);
    const auto& d = in.file.description;
    const auto eps = io::decay_rates(d, a.eps);
    CertOptions opts;
    opts.strict_boundary = strict;
    const auto form = delta ? lmi::lower(build_robust(make_uncertain_system(d), eps, *delta, opts).problem)
                            : lmi::lower(build_nominal(make_system(d), eps, opts).problem);
    if (out.empty() || out == "-") {
        dump(std::cout, form);
    } else {
        std::ofstream os(out);
        if (!os)
            throw std::runtime_error("cannot write " + out);
        dump(os, form);
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stability certificates for piecewise linear time-varying systems"};
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* sub, bool eps) {
        sub->add_option("system", common.system, "system JSON file")->required();
        sub->add_option("--out-dir", common.out_dir, "directory for emitted files");
        if (eps)
            sub->add_option("--eps", common.eps, "uniform decay rate override")->check(CLI::PositiveNumber);
    };

    auto* validate_cmd = app.add_subcommand("validate", "check a system file");
    validate_cmd->add_option("system", common.system, "system JSON file")->required();

    CertifyArgs certify;
    auto* certify_cmd = app.add_subcommand("certify", "solve the nominal (or, with --delta, robust) LMIs");
    add_common(certify_cmd, true);
    certify_cmd->add_option("--delta", certify.delta, "robust certificate for delta in [1/Delta, Delta]")
        ->check(CLI::Range(1.0, std::numeric_limits<double>::max()));
    certify_cmd->add_flag("--strict-boundary", certify.strict, "add boundary LMIs at the delta vertices");
    certify_cmd->add_option("--grid", certify.grid, "alpha points for the grid oracle")->check(CLI::Range(2, 100000));

    MarginArgs margin;
    auto* margin_cmd = app.add_subcommand("margin", "largest certified interval [1/Delta, Delta]");
    add_common(margin_cmd, true);
    margin_cmd->add_option("--delta-max", margin.delta_max, "bracket cap")->check(CLI::Range(1.0 + 1e-9, 1e300));
    margin_cmd->add_option("--tol-bis", margin.tol_bis, "relative bisection tolerance")->check(CLI::PositiveNumber);
    margin_cmd->add_flag("--printed-boundary", margin.printed_boundary, "boundary LMIs without the B terms");
    margin_cmd->add_option("--grid", margin.grid, "alpha points for the grid oracle")->check(CLI::Range(2, 100000));

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "RK4 simulation, optionally with Lyapunov monitoring");
    add_common(simulate_cmd, false);
    simulate_cmd->add_option("--delta", sim.delta, "uncertainty value (requires B)");
    simulate_cmd->add_option("--x0", sim.x0, "initial state")->delimiter(',');
    simulate_cmd->add_option("--t0", sim.t0, "start time (default t_0)");
    simulate_cmd->add_option("--t1", sim.t1, "end time (default t_N)");
    simulate_cmd->add_option("--h", sim.h, "integration step")->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--cert", sim.cert, "certificate for the Lyapunov monitor");

    bool signed_search = false;
    double cap = 1e6;
    auto* frozen_cmd = app.add_subcommand("frozen", "frozen-time LTI margins per breakpoint");
    add_common(frozen_cmd, false);
    frozen_cmd->add_flag("--signed", signed_search, "allow negative delta");
    frozen_cmd->add_option("--cap", cap, "search cap")->check(CLI::Range(1.0 + 1e-9, 1e300));

    std::string verify_cert;
    int verify_grid = 101;
    auto* verify_cmd = app.add_subcommand("verify", "check a certificate with the eigenvalue grid oracle");
    verify_cmd->add_option("system", common.system, "system JSON file")->required();
    verify_cmd->add_option("--cert", verify_cert, "certificate JSON file")->required();
    verify_cmd->add_option("--grid", verify_grid, "alpha points")->check(CLI::Range(2, 100000));

    std::optional<double> dump_delta;
    bool dump_strict = false;
    std::string dump_out;
    auto* dump_cmd = app.add_subcommand("dump", "write the lowered conic problem as text");
    add_common(dump_cmd, true);
    dump_cmd->add_option("--delta", dump_delta, "robust problem at Delta")
        ->check(CLI::Range(1.0, std::numeric_limits<double>::max()));
    dump_cmd->add_flag("--strict-boundary", dump_strict, "add boundary LMIs at the delta vertices");
    dump_cmd->add_option("--out", dump_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_input;
    }

    try {
        if (*validate_cmd)
            return cmd_validate(common);
        if (*certify_cmd)
            return cmd_certify(common, certify);
        if (*margin_cmd)
            return cmd_margin(common, margin);
        if (*simulate_cmd)
            return cmd_simulate(common, sim);
        if (*frozen_cmd)
            return cmd_frozen(common, signed_search, cap);
        if (*verify_cmd)
            return cmd_verify(common, verify_cert, verify_grid);
        if (*dump_cmd)
            return cmd_dump(common, dump_delta, dump_strict, dump_out);
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_inconclusive;
    }
    return exit_input;
}
