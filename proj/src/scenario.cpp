#include "tdho/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "tdho/format.hpp"
#include "tdho/squeeze.hpp"

namespace tdho {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kE = 2.71828182845904523536;
const double kNan = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void cfg_fail(const std::string& path, const std::string& msg) {
    throw ConfigError("config " + path + ": " + msg);
}

const json* child(const json& obj, const std::string& path, const char* key,
                  json::value_t expect) {
    if (!obj.contains(key)) return nullptr;
    const json& v = obj.at(key);
    const bool numeric_ok =
        expect == json::value_t::number_float &&
        (v.is_number_float() || v.is_number_integer() || v.is_number_unsigned());
    if (!numeric_ok && v.type() != expect) {
        const char* what = expect == json::value_t::number_float ? "a number"
                           : expect == json::value_t::string    ? "a string"
                           : expect == json::value_t::boolean   ? "a boolean"
                           : expect == json::value_t::array     ? "an array"
                                                                : "an object";
        cfg_fail(path + "/" + key, std::string("expected ") + what);
    }
    return &v;
}

double get_num(const json& obj, const std::string& path, const char* key, double dflt) {
    const json* v = child(obj, path, key, json::value_t::number_float);
    return v != nullptr ? v->get<double>() : dflt;
}

std::size_t get_size(const json& obj, const std::string& path, const char* key,
                     std::size_t dflt) {
    const json* v = child(obj, path, key, json::value_t::number_float);
    if (v == nullptr) return dflt;
    const double d = v->get<double>();
    if (d < 0.0 || d != std::floor(d)) cfg_fail(path + "/" + key, "expected a whole number");
    return static_cast<std::size_t>(d);
}

std::string get_str(const json& obj, const std::string& path, const char* key,
                    const std::string& dflt) {
    const json* v = child(obj, path, key, json::value_t::string);
    return v != nullptr ? v->get<std::string>() : dflt;
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool dflt) {
    const json* v = child(obj, path, key, json::value_t::boolean);
    return v != nullptr ? v->get<bool>() : dflt;
}

void check_name(const std::string& path, const std::string& name) {
    if (name.empty()) cfg_fail(path, "name must not be empty");
    for (char ch : name)
        if (std::isalnum(static_cast<unsigned char>(ch)) == 0 && ch != '_' && ch != '-')
            cfg_fail(path, "name may use letters, digits, '_' and '-' only");
}

ProtocolConfig parse_protocol(const json& j, const std::string& path) {
    if (!j.is_object()) cfg_fail(path, "expected an object");
    ProtocolConfig pc;
    pc.name = get_str(j, path, "name", pc.name);
    check_name(path + "/name", pc.name);
    pc.type = get_str(j, path, "type", pc.type);
    if (pc.type != "sudden_jump" && pc.type != "exp_ramp" && pc.type != "ansatz" &&
        pc.type != "quasi_optimal")
        cfg_fail(path + "/type",
                 "expected sudden_jump, exp_ramp, ansatz or quasi_optimal, got '" + pc.type + "'");
    pc.omega0 = get_num(j, path, "omega0", pc.omega0);
    pc.omega1 = get_num(j, path, "omega1", pc.omega1);
    pc.omegaf = get_num(j, path, "omegaf", pc.omegaf);
    pc.tau = get_num(j, path, "tau", pc.tau);
    pc.basis = get_str(j, path, "basis", pc.basis);
    if (pc.basis != "polynomial" && pc.basis != "exponential")
        cfg_fail(path + "/basis", "expected polynomial or exponential");
    pc.rate = get_num(j, path, "rate", pc.rate);
    if (j.contains("delta") && !j.at("delta").is_null())
        pc.delta = get_num(j, path, "delta", 0.0);
    pc.epsilon = get_num(j, path, "epsilon", pc.epsilon);
    pc.gamma = get_num(j, path, "gamma", pc.gamma);
    pc.sigma = get_num(j, path, "sigma", pc.sigma);

    if (!(pc.omega0 > 0.0)) cfg_fail(path + "/omega0", "must be positive");
    if (!(pc.tau > 0.0)) cfg_fail(path + "/tau", "must be positive");
    if (pc.type == "sudden_jump" && !(pc.omega1 > 0.0))
        cfg_fail(path + "/omega1", "must be positive for sudden_jump");
    if (pc.type != "sudden_jump" && !(pc.omegaf > 0.0))
        cfg_fail(path + "/omegaf", "must be positive for this protocol type");
    return pc;
}

json protocol_to_json(const ProtocolConfig& pc) {
    json j;
    j["name"] = pc.name;
    j["type"] = pc.type;
    j["omega0"] = pc.omega0;
    j["omega1"] = pc.omega1;
    j["omegaf"] = pc.omegaf;
    j["tau"] = pc.tau;
    j["basis"] = pc.basis;
    j["rate"] = pc.rate;
    if (pc.delta.has_value())
        j["delta"] = *pc.delta;
    else
        j["delta"] = nullptr;
    j["epsilon"] = pc.epsilon;
    j["gamma"] = pc.gamma;
    j["sigma"] = pc.sigma;
    return j;
}

ScenarioConfig parse_config_json(const json& j) {
    if (!j.is_object()) cfg_fail("/", "top level must be an object");
    ScenarioConfig c;

    if (const json* units = child(j, "", "units", json::value_t::object)) {
        c.m0 = get_num(*units, "/units", "m0", c.m0);
        c.hbar = get_num(*units, "/units", "hbar", c.hbar);
    }
    if (!(c.m0 > 0.0)) cfg_fail("/units/m0", "must be positive");
    if (!(c.hbar > 0.0)) cfg_fail("/units/hbar", "must be positive");

    if (const json* grid = child(j, "", "grid", json::value_t::object)) {
        c.t_min_over_tau = get_num(*grid, "/grid", "t_min_over_tau", c.t_min_over_tau);
        c.t_max_over_tau = get_num(*grid, "/grid", "t_max_over_tau", c.t_max_over_tau);
        c.points = get_size(*grid, "/grid", "points", c.points);
    }
    if (!(c.t_max_over_tau > c.t_min_over_tau))
        cfg_fail("/grid/t_max_over_tau", "must exceed t_min_over_tau");

    if (const json* integ = child(j, "", "integrator", json::value_t::object)) {
        c.rtol = get_num(*integ, "/integrator", "rtol", c.rtol);
        c.atol = get_num(*integ, "/integrator", "atol", c.atol);
    }
    if (!(c.rtol > 0.0)) cfg_fail("/integrator/rtol", "must be positive");
    if (!(c.atol > 0.0)) cfg_fail("/integrator/atol", "must be positive");

    c.expulsive_policy = get_str(j, "", "expulsive_policy", c.expulsive_policy);
    if (c.expulsive_policy != "record" && c.expulsive_policy != "strict")
        cfg_fail("/expulsive_policy", "expected record or strict");

    if (const json* qn = child(j, "", "quantum_numbers", json::value_t::array)) {
        c.quantum_numbers.clear();
        for (std::size_t i = 0; i < qn->size(); ++i) {
            const json& v = (*qn)[i];
            if (!v.is_number_integer() && !v.is_number_unsigned())
                cfg_fail("/quantum_numbers/" + std::to_string(i), "expected an integer");
            const long long n = v.get<long long>();
            if (n < 0) cfg_fail("/quantum_numbers/" + std::to_string(i), "must be nonnegative");
            c.quantum_numbers.push_back(static_cast<unsigned>(n));
        }
        if (c.quantum_numbers.empty())
            cfg_fail("/quantum_numbers", "must not be empty when given");
    }

    if (const json* ps = child(j, "", "protocols", json::value_t::array)) {
        for (std::size_t i = 0; i < ps->size(); ++i)
            c.protocols.push_back(parse_protocol((*ps)[i], "/protocols/" + std::to_string(i)));
    }

    if (const json* sw = child(j, "", "sweep", json::value_t::object)) {
        c.sweep.max_points = get_size(*sw, "/sweep", "max_points", c.sweep.max_points);
        c.sweep.n = static_cast<unsigned>(get_size(*sw, "/sweep", "n", c.sweep.n));
        if (const json* params = child(*sw, "/sweep", "parameters", json::value_t::array)) {
            for (std::size_t i = 0; i < params->size(); ++i) {
                const std::string ppath = "/sweep/parameters/" + std::to_string(i);
                const json& pj = (*params)[i];
                if (!pj.is_object()) cfg_fail(ppath, "expected an object");
                SweepParameter sp;
                sp.path = get_str(pj, ppath, "path", "");
                if (sp.path.empty() || sp.path.front() != '/')
                    cfg_fail(ppath + "/path", "expected a JSON pointer starting with '/'");
                if (const json* vals = child(pj, ppath, "values", json::value_t::array)) {
                    for (std::size_t k = 0; k < vals->size(); ++k) {
                        const json& v = (*vals)[k];
                        if (!v.is_number())
                            cfg_fail(ppath + "/values/" + std::to_string(k), "expected a number");
                        sp.values.push_back(v.get<double>());
                    }
                } else {
                    const double lo = get_num(pj, ppath, "min", kNan);
                    const double hi = get_num(pj, ppath, "max", kNan);
                    const std::size_t count = get_size(pj, ppath, "count", 0);
                    if (!std::isfinite(lo) || !std::isfinite(hi) || count == 0)
                        cfg_fail(ppath, "expected either values or min/max/count");
                    sp.values = linspace(lo, hi, count);
                }
                if (sp.values.empty()) cfg_fail(ppath + "/values", "must not be empty");
                c.sweep.parameters.push_back(std::move(sp));
            }
        }
    }

    if (const json* eq = child(j, "", "equivalence", json::value_t::object)) {
        c.equivalence.problem = get_str(*eq, "/equivalence", "problem", c.equivalence.problem);
        if (c.equivalence.problem != "jump_vs_exp_ramp" &&
            c.equivalence.problem != "janszky_tau" && c.equivalence.problem != "identical")
            cfg_fail("/equivalence/problem",
                     "expected jump_vs_exp_ramp, janszky_tau or identical");
        c.equivalence.omega0 = get_num(*eq, "/equivalence", "omega0", c.equivalence.omega0);
        c.equivalence.omega1 = get_num(*eq, "/equivalence", "omega1", c.equivalence.omega1);
        c.equivalence.tau_min = get_num(*eq, "/equivalence", "tau_min", c.equivalence.tau_min);
        c.equivalence.tau_max = get_num(*eq, "/equivalence", "tau_max", c.equivalence.tau_max);
        c.equivalence.grid = get_size(*eq, "/equivalence", "grid", c.equivalence.grid);
        c.equivalence.accept_tol =
            get_num(*eq, "/equivalence", "accept_tol", c.equivalence.accept_tol);
        c.equivalence.write_scan =
            get_bool(*eq, "/equivalence", "write_scan", c.equivalence.write_scan);
        if (eq->contains("box") && !eq->at("box").is_null()) {
            const json& box = eq->at("box");
            if (!box.is_array()) cfg_fail("/equivalence/box", "expected an array of [lo, hi]");
            for (std::size_t i = 0; i < box.size(); ++i) {
                const json& b = box[i];
                if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
                    cfg_fail("/equivalence/box/" + std::to_string(i), "expected [lo, hi]");
                c.equivalence.box.emplace_back(b[0].get<double>(), b[1].get<double>());
            }
        }
    }

    if (const json* out = child(j, "", "output", json::value_t::object)) {
        c.out_dir = get_str(*out, "/output", "dir", c.out_dir);
        c.prefix = get_str(*out, "/output", "prefix", c.prefix);
        check_name("/output/prefix", c.prefix);
        c.format = get_str(*out, "/output", "format", c.format);
        if (c.format != "csv" && c.format != "json")
            cfg_fail("/output/format", "expected csv or json");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Output plumbing

struct Table {
    std::vector<std::string> columns;
    std::vector<json> rows; // each row is a json array
};

void write_table(const fs::path& file, const Table& table, const std::string& format) {
    std::ofstream os(file);
    if (!os) throw Error("cannot open output file " + file.string());
    if (format == "csv") {
        for (std::size_t i = 0; i < table.columns.size(); ++i)
            os << (i != 0 ? "," : "") << table.columns[i];
        os << '\n';
        for (const json& row : table.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i != 0) os << ',';
                const json& cell = row[i];
                if (cell.is_string())
                    os << cell.get<std::string>();
                else if (cell.is_null())
                    os << "nan";
                else
                    os << detail::g12(cell.get<double>());
            }
            os << '\n';
        }
    } else {
        json j;
        j["columns"] = table.columns;
        j["rows"] = table.rows;
        os << j.dump(1) << '\n';
    }
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream os(file);
    if (!os) throw Error("cannot open output file " + file.string());
    os << text;
    if (text.empty() || text.back() != '\n') os << '\n';
}

fs::path out_path(const ScenarioConfig& c, const std::string& stem, const std::string& ext) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / (c.prefix + "_" + stem + "." + ext);
}

std::string table_ext(const ScenarioConfig& c) { return c.format == "csv" ? "csv" : "json"; }

std::string sanitize_message(std::string msg) {
    for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
    return msg;
}

json expulsive_to_json(const ExpulsiveReport& rep) {
    json j;
    j["min_omega_sq"] = rep.min_omega_sq;
    j["argmin_t"] = rep.argmin_t;
    json intervals = json::array();
    for (const auto& [lo, hi] : rep.negative_intervals) intervals.push_back({lo, hi});
    j["negative_intervals"] = intervals;
    return j;
}

void enforce_strict_policy(const ScenarioConfig& c, const FrequencyProtocol& proto) {
    if (c.expulsive_policy != "strict") return;
    const ExpulsiveReport rep = scan_expulsive(proto, 2048);
    if (!rep.clean()) {
        std::ostringstream os;
        os << "omega^2 reaches " << rep.min_omega_sq << " near t = " << rep.argmin_t;
        throw ExpulsiveRegime(os.str(), rep.negative_intervals.front().first,
                              rep.negative_intervals.front().second);
    }
}

double cap_poly_eval(const std::array<double, 6>& cap, double s, int order) {
    double sum = 0.0;
    for (int l = 5; l >= order; --l) {
        double coeff = cap[l];
        for (int k = 0; k < order; ++k) coeff *= (l - k);
        sum = sum * s + coeff;
    }
    return sum;
}

} // namespace

// ---------------------------------------------------------------------------
// Presets

ScenarioConfig preset(const std::string& name) {
    ScenarioConfig c;
    c.prefix = name;
    if (name == "fig1") {
        ProtocolConfig jump;
        jump.name = "jump";
        jump.type = "sudden_jump";
        jump.omega0 = 2.657887;
        jump.omega1 = 4.473165;
        jump.tau = 1.0;
        jump.omegaf = kE * jump.omega0;
        ProtocolConfig ramp;
        ramp.name = "ramp";
        ramp.type = "exp_ramp";
        ramp.omega0 = jump.omega0;
        ramp.tau = 1.0;
        ramp.omegaf = jump.omegaf;
        c.protocols = {jump, ramp};
        c.points = 901;
        return c;
    }
    if (name == "fig2" || name == "fig3") {
        const double eps = name == "fig2" ? 3.0 : 0.0;
        ProtocolConfig poly;
        poly.name = "poly";
        poly.type = "ansatz";
        poly.basis = "polynomial";
        poly.rate = 1.0;
        poly.omega0 = 20.0;
        poly.omegaf = 1.25; // omega0 / 16
        poly.tau = 0.5;     // 10 / omega0
        poly.epsilon = eps;
        ProtocolConfig expo = poly;
        expo.name = "exp";
        expo.basis = "exponential";
        c.protocols = {poly, expo};
        c.points = 1201;
        return c;
    }
    if (name == "fig4") {
        ProtocolConfig quasi;
        quasi.name = "quasi";
        quasi.type = "quasi_optimal";
        quasi.omega0 = 20.0;
        quasi.omegaf = 1.25;
        quasi.tau = 0.5;
        quasi.sigma = 0.3;
        quasi.epsilon = 1.0;
        ProtocolConfig poly;
        poly.name = "poly";
        poly.type = "ansatz";
        poly.basis = "polynomial";
        poly.rate = 1.0;
        poly.omega0 = 20.0;
        poly.omegaf = 1.25;
        poly.tau = 0.5;
        poly.epsilon = 1.0;
        ProtocolConfig expo = poly;
        expo.name = "exp";
        expo.basis = "exponential";
        c.protocols = {quasi, poly, expo};
        c.points = 1201;
        return c;
    }
    throw ConfigError("unknown preset '" + name + "' (expected fig1, fig2, fig3 or fig4)");
}

// ---------------------------------------------------------------------------
// Config ingestion and echo

ScenarioConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config_json(j);
}

ScenarioConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot read file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

std::string dump_config(const ScenarioConfig& c) {
    json j;
    j["units"] = {{"m0", c.m0}, {"hbar", c.hbar}};
    j["grid"] = {{"t_min_over_tau", c.t_min_over_tau},
                 {"t_max_over_tau", c.t_max_over_tau},
                 {"points", c.points}};
    j["integrator"] = {{"rtol", c.rtol}, {"atol", c.atol}};
    j["expulsive_policy"] = c.expulsive_policy;
    j["quantum_numbers"] = c.quantum_numbers;
    json ps = json::array();
    for (const ProtocolConfig& pc : c.protocols) ps.push_back(protocol_to_json(pc));
    j["protocols"] = ps;

    json sw;
    json params = json::array();
    for (const SweepParameter& sp : c.sweep.parameters)
        params.push_back({{"path", sp.path}, {"values", sp.values}});
    sw["parameters"] = params;
    sw["max_points"] = c.sweep.max_points;
    sw["n"] = c.sweep.n;
    j["sweep"] = sw;

    json eq;
    eq["problem"] = c.equivalence.problem;
    eq["omega0"] = c.equivalence.omega0;
    eq["omega1"] = c.equivalence.omega1;
    eq["tau_min"] = c.equivalence.tau_min;
    eq["tau_max"] = c.equivalence.tau_max;
    eq["grid"] = c.equivalence.grid;
    eq["accept_tol"] = c.equivalence.accept_tol;
    if (c.equivalence.box.empty()) {
        eq["box"] = nullptr;
    } else {
        json box = json::array();
        for (const auto& [lo, hi] : c.equivalence.box) box.push_back({lo, hi});
        eq["box"] = box;
    }
    eq["write_scan"] = c.equivalence.write_scan;
    j["equivalence"] = eq;

    j["output"] = {{"dir", c.out_dir}, {"prefix", c.prefix}, {"format", c.format}};
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Protocol construction

std::optional<RhoProfile> build_profile(const ProtocolConfig& pc, double m0) {
    if (pc.type == "ansatz") {
        AnsatzSpec s;
        s.basis = pc.basis == "polynomial" ? AnsatzBasis::polynomial : AnsatzBasis::exponential;
        s.rate = pc.rate;
        s.rho0 = rho_constant(m0, pc.omega0);
        s.delta = pc.delta.value_or(1.0 / std::sqrt(m0 * pc.omegaf));
        s.epsilon = pc.epsilon;
        s.gamma = pc.gamma;
        s.tau = pc.tau;
        return RhoProfile(ansatz_coefficients(s), m0);
    }
    if (pc.type == "quasi_optimal") {
        QuasiOptimalSpec q;
        q.m0 = m0;
        q.omega0 = pc.omega0;
        q.omegaf = pc.omegaf;
        q.tau = pc.tau;
        q.sigma = pc.sigma;
        q.delta = pc.delta;
        q.epsilon = pc.epsilon;
        q.gamma = pc.gamma;
        return RhoProfile(quasi_optimal_rho(q));
    }
    return std::nullopt;
}

FrequencyProtocol build_protocol(const ProtocolConfig& pc, double m0) {
    if (pc.type == "sudden_jump") {
        const double omegaf = pc.omegaf > 0.0 ? pc.omegaf : pc.omega0;
        return make_sudden_jump(m0, pc.omega0, pc.omega1, pc.tau, omegaf);
    }
    if (pc.type == "exp_ramp") return make_exp_ramp(m0, pc.omega0, pc.tau, pc.omegaf);
    std::optional<RhoProfile> profile = build_profile(pc, m0);
    if (!profile.has_value())
        throw ConfigError("protocol '" + pc.name + "': unknown type '" + pc.type + "'");
    return make_from_rho(std::move(*profile), pc.omegaf, pc.omega0);
}

// ---------------------------------------------------------------------------
// simulate

RunResult run_simulate(const ScenarioConfig& c) {
    if (c.protocols.empty()) throw ConfigError("simulate: config lists no protocols");
    if (c.points < 2) throw ConfigError("simulate: grid needs at least 2 points");

    RunResult rr;
    json summary;
    summary["m0"] = c.m0;
    summary["hbar"] = c.hbar;
    summary["grid"] = {{"t_min_over_tau", c.t_min_over_tau},
                       {"t_max_over_tau", c.t_max_over_tau},
                       {"points", c.points}};
    json proto_summaries = json::array();

    IntegrateOptions io;
    io.rtol = c.rtol;
    io.atol = c.atol;

    struct EndInfo {
        std::string name;
        ErmakovState end;
        double omegaf = 0.0;
        double r = 0.0;
    };
    std::vector<EndInfo> ends;

    for (const ProtocolConfig& pc : c.protocols) {
        const FrequencyProtocol proto = build_protocol(pc, c.m0);
        enforce_strict_policy(c, proto);

        const std::vector<double> grid =
            linspace(c.t_min_over_tau * pc.tau, c.t_max_over_tau * pc.tau, c.points);
        const ErmakovTrajectory traj = integrate_ep(proto, grid, io);

        // Trajectory file
        const fs::path tfile = out_path(c, pc.name + "_trajectory", table_ext(c));
        if (c.format == "csv") {
            std::ofstream os(tfile);
            if (!os) throw Error("cannot open output file " + tfile.string());
            write_trajectory_csv(os, traj);
        } else {
            Table tbl;
            tbl.columns = {"t", "rho", "rho_dot", "omega", "segment"};
            for (std::size_t i = 0; i < traj.size(); ++i) {
                const double w2 = traj.omega_sq[i];
                tbl.rows.push_back(json::array({traj.t[i], traj.rho[i], traj.rho_dot[i],
                                                w2 >= 0.0 ? std::sqrt(w2) : kNan,
                                                traj.segment[i]}));
            }
            write_table(tfile, tbl, c.format);
        }
        rr.files.push_back(tfile.string());

        // Observable files, one per quantum number
        for (unsigned n : c.quantum_numbers) {
            Table tbl;
            tbl.columns = {"t",        "t_over_tau", "r", "phi", "sigma_x2",
                           "sigma_p2", "E",          "sigma_H2", "N", "Qstar"};
            for (std::size_t i = 0; i < traj.size(); ++i) {
                const double t = traj.t[i];
                const double w2 = traj.omega_sq[i];
                if (w2 > 0.0) {
                    const SqueezeRecord rec = make_record(t, traj.rho[i], traj.rho_dot[i], c.m0,
                                                          std::sqrt(w2), n, c.hbar);
                    tbl.rows.push_back(json::array({t, t / pc.tau, rec.r, rec.phi, rec.sigma_x2,
                                                    rec.sigma_p2, rec.energy, rec.energy_var,
                                                    rec.excitations, rec.qstar}));
                } else {
                    tbl.rows.push_back(json::array(
                        {t, t / pc.tau, kNan, kNan, kNan, kNan, kNan, kNan, kNan, kNan}));
                }
            }
            const fs::path ofile =
                out_path(c, pc.name + "_observables_n" + std::to_string(n), table_ext(c));
            write_table(ofile, tbl, c.format);
            rr.files.push_back(ofile.string());
        }

        // Scalar summary of the frozen final state
        const ErmakovState end = end_state_ode(proto, io);
        const FinalSegmentCoefficients fseg =
            final_segment(end.rho, end.rho_dot, c.m0, proto.omegaf(), proto.tau());
        const FinalSqueeze fin = final_squeeze(fseg);
        json pj;
        pj["name"] = pc.name;
        pj["type"] = pc.type;
        pj["omega0"] = proto.omega0();
        pj["omegaf"] = proto.omegaf();
        pj["tau"] = proto.tau();
        pj["delta"] = fseg.delta;
        pj["epsilon"] = fseg.epsilon;
        pj["lambda_f"] = fin.lambda;
        pj["r_f"] = fin.r;
        pj["n0_f"] = fin.n0;
        pj["qstar_f"] = fin.qstar;
        pj["p00"] = transition_prob(0, 0, fin.n0);
        pj["excitation_prob"] = excitation_prob(fin.n0);
        try {
            pj["phi_f_at_tau"] = fin.phase(proto.tau());
        } catch (PhaseUndefined&) {
            pj["phi_f_at_tau"] = 0.0;
        }
        pj["expulsive"] = expulsive_to_json(scan_expulsive(proto, 2048));
        proto_summaries.push_back(pj);
        ends.push_back({pc.name, end, proto.omegaf(), fin.r});
    }

    summary["protocols"] = proto_summaries;
    json pairwise = json::array();
    for (std::size_t i = 0; i < ends.size(); ++i) {
        for (std::size_t k = i + 1; k < ends.size(); ++k) {
            json pj;
            pj["a"] = ends[i].name;
            pj["b"] = ends[k].name;
            pj["d_delta"] = std::abs(ends[i].end.rho - ends[k].end.rho);
            pj["d_epsilon"] = std::abs(ends[i].end.rho_dot - ends[k].end.rho_dot);
            pj["d_omegaf"] = std::abs(ends[i].omegaf - ends[k].omegaf);
            pj["d_r"] = std::abs(ends[i].r - ends[k].r);
            pairwise.push_back(pj);
        }
    }
    summary["pairwise"] = pairwise;

    rr.summary = summary.dump(2);
    const fs::path sfile = out_path(c, "summary", "json");
    write_text(sfile, rr.summary);
    rr.files.push_back(sfile.string());
    return rr;
}

// ---------------------------------------------------------------------------
// design

RunResult run_design(const ScenarioConfig& c) {
    if (c.points < 2) throw ConfigError("design: grid needs at least 2 points");
    RunResult rr;
    json feas_all = json::array();
    bool any = false;

    for (const ProtocolConfig& pc : c.protocols) {
        std::optional<RhoProfile> profile = build_profile(pc, c.m0);
        if (!profile.has_value()) continue;
        any = true;
        const RhoProfile& rp = *profile;
        const double tau = rp.tau();
        const double omega0 = pc.omega0;
        const double rho0 = rho_constant(c.m0, omega0);
        const double delta = pc.delta.value_or(1.0 / std::sqrt(c.m0 * pc.omegaf));

        // Feasibility scan before any file is written.
        const std::size_t scan_pts = std::max<std::size_t>(c.points, 2048);
        double min_w2 = std::numeric_limits<double>::infinity();
        double argmin = 0.0;
        std::vector<std::pair<double, double>> neg;
        bool in_neg = false;
        double neg_start = 0.0, neg_last = 0.0;
        for (std::size_t i = 1; i <= scan_pts; ++i) {
            const double t = tau * static_cast<double>(i) / static_cast<double>(scan_pts);
            const double w2 = rp.omega_sq(t);
            if (w2 < min_w2) {
                min_w2 = w2;
                argmin = t;
            }
            if (w2 < 0.0) {
                if (!in_neg) {
                    in_neg = true;
                    neg_start = t;
                }
                neg_last = t;
            } else if (in_neg) {
                in_neg = false;
                neg.emplace_back(neg_start, neg_last);
            }
        }
        if (in_neg) neg.emplace_back(neg_start, neg_last);

        if (c.expulsive_policy == "strict" && !neg.empty()) {
            std::ostringstream os;
            os << "designed omega^2 reaches " << min_w2 << " near t = " << argmin;
            throw ExpulsiveRegime(os.str(), neg.front().first, neg.front().second);
        }

        // Profile table over [0, tau]
        Table tbl;
        tbl.columns = {"t", "t_over_tau", "rho", "rho_dot", "rho_ddot", "omega_sq", "omega"};
        for (double t : linspace(0.0, tau, c.points)) {
            const double w2 = rp.omega_sq(t);
            tbl.rows.push_back(json::array({t, t / tau, rp.value(t), rp.deriv(t), rp.second(t),
                                            w2, w2 >= 0.0 ? std::sqrt(w2) : kNan}));
        }
        const fs::path dfile = out_path(c, pc.name + "_design", table_ext(c));
        write_table(dfile, tbl, c.format);
        rr.files.push_back(dfile.string());

        json fj;
        fj["name"] = pc.name;
        fj["kind"] = rp.kind();
        fj["omega0"] = omega0;
        fj["omegaf_target"] = pc.omegaf;
        fj["tau"] = tau;
        fj["delta"] = delta;
        fj["epsilon"] = pc.epsilon;
        fj["gamma"] = pc.gamma;
        fj["min_omega_sq"] = min_w2;
        fj["min_omega_sq_over_omega0_sq"] = min_w2 / (omega0 * omega0);
        fj["argmin_t"] = argmin;
        json nj = json::array();
        for (const auto& [lo, hi] : neg) nj.push_back({lo, hi});
        fj["negative_intervals"] = nj;

        fj["boundary_residuals"] = {{"rho_start", std::abs(rp.value(0.0) - rho0)},
                                    {"drho_start", std::abs(rp.deriv(0.0))},
                                    {"ddrho_start", std::abs(rp.second(0.0))},
                                    {"rho_end", std::abs(rp.value(tau) - delta)},
                                    {"drho_end", std::abs(rp.deriv(tau) - pc.epsilon)},
                                    {"ddrho_end", std::abs(rp.second(tau) - pc.gamma)}};

        const double w2_end = rp.omega_sq(tau);
        fj["omega_end"] = w2_end >= 0.0 ? std::sqrt(w2_end) : kNan;
        fj["omega_end_residual"] =
            w2_end >= 0.0 ? std::abs(std::sqrt(w2_end) - pc.omegaf) : kNan;

        if (const QuasiOptimalProfile* qp = rp.quasi_optimal()) {
            const double sig = qp->spec().sigma;
            json stitches;
            for (int side = 0; side < 2; ++side) {
                const double s = side == 0 ? sig : 1.0 - sig;
                const auto& cap = side == 0 ? qp->start_cap() : qp->end_cap();
                json diffs = json::array();
                for (int order = 0; order <= 2; ++order)
                    diffs.push_back(std::abs(cap_poly_eval(cap, s, order) - qp->middle(s, order)));
                stitches[side == 0 ? "entry_seam" : "exit_seam"] = diffs;
            }
            fj["stitch_residuals"] = stitches;
        }
        feas_all.push_back(fj);
    }

    if (!any)
        throw ConfigError("design: config needs at least one ansatz or quasi_optimal protocol");

    json out;
    out["designs"] = feas_all;
    rr.summary = out.dump(2);
    const fs::path ffile = out_path(c, "feasibility", "json");
    write_text(ffile, rr.summary);
    rr.files.push_back(ffile.string());
    return rr;
}

// ---------------------------------------------------------------------------
// sweep

RunResult run_sweep(const ScenarioConfig& c) {
    if (c.sweep.parameters.empty()) throw ConfigError("sweep: no parameters configured");
    if (c.protocols.size() != 1)
        throw ConfigError("sweep: config must list exactly one protocol");

    std::size_t total = 1;
    for (const SweepParameter& sp : c.sweep.parameters) {
        if (sp.values.empty()) throw ConfigError("sweep: parameter '" + sp.path + "' is empty");
        total *= sp.values.size();
    }
    if (total > c.sweep.max_points) {
        std::ostringstream os;
        os << "sweep: " << total << " points exceed the cap of " << c.sweep.max_points;
        throw ConfigError(os.str());
    }

    json base;
    try {
        base = json::parse(dump_config(c));
    } catch (const json::parse_error& e) {
        throw Error(std::string("internal: config echo is not valid JSON: ") + e.what());
    }
    std::vector<json::json_pointer> pointers;
    for (const SweepParameter& sp : c.sweep.parameters) {
        json::json_pointer ptr;
        try {
            ptr = json::json_pointer(sp.path);
        } catch (const json::exception& e) {
            throw ConfigError("sweep: bad JSON pointer '" + sp.path + "': " + e.what());
        }
        if (!base.contains(ptr))
            throw ConfigError("sweep: path '" + sp.path + "' does not exist in the config");
        pointers.push_back(ptr);
    }

    Table tbl;
    for (const SweepParameter& sp : c.sweep.parameters) tbl.columns.push_back(sp.path);
    tbl.columns.insert(tbl.columns.end(), {"r_f", "N_f", "E_f", "Qstar_f", "error"});

    const std::size_t np = c.sweep.parameters.size();
    std::vector<std::size_t> odo(np, 0);
    for (std::size_t row = 0; row < total; ++row) {
        json patched = base;
        json cells = json::array();
        for (std::size_t j = 0; j < np; ++j) {
            const double v = c.sweep.parameters[j].values[odo[j]];
            patched[pointers[j]] = v;
            cells.push_back(v);
        }

        std::string error;
        double r_f = kNan, n_f = kNan, e_f = kNan, q_f = kNan;
        try {
            const ScenarioConfig point = parse_config_text(patched.dump());
            const ProtocolConfig& pc = point.protocols.at(0);
            const FrequencyProtocol proto = build_protocol(pc, point.m0);
            enforce_strict_policy(point, proto);

            ErmakovState end;
            if (std::optional<RhoProfile> rp = build_profile(pc, point.m0)) {
                end.t = rp->tau();
                end.rho = rp->value(rp->tau());
                end.rho_dot = rp->deriv(rp->tau());
            } else {
                try {
                    end = end_state_closed_form(proto);
                } catch (ConfigError&) {
                    IntegrateOptions io;
                    io.rtol = point.rtol;
                    io.atol = point.atol;
                    end = end_state_ode(proto, io);
                }
            }
            const FinalSqueeze fin = final_squeeze(
                final_segment(end.rho, end.rho_dot, point.m0, proto.omegaf(), proto.tau()));
            r_f = fin.r;
            n_f = mean_excitations(fin.r, c.sweep.n);
            e_f = mean_energy(fin.r, c.sweep.n, proto.omegaf(), point.hbar);
            q_f = fin.qstar;
        } catch (const Error& err) {
            error = sanitize_message(err.what());
        }

        cells.push_back(r_f);
        cells.push_back(n_f);
        cells.push_back(e_f);
        cells.push_back(q_f);
        cells.push_back(error);
        tbl.rows.push_back(std::move(cells));

        for (std::size_t j = np; j-- > 0;) {
            if (++odo[j] < c.sweep.parameters[j].values.size()) break;
            odo[j] = 0;
        }
    }

    RunResult rr;
    const fs::path sfile = out_path(c, "sweep", table_ext(c));
    write_table(sfile, tbl, c.format);
    rr.files.push_back(sfile.string());
    json meta;
    meta["rows"] = total;
    meta["file"] = sfile.string();
    rr.summary = meta.dump(2);
    return rr;
}

// ---------------------------------------------------------------------------
// equivalence

RunResult run_equivalence(const ScenarioConfig& c) {
    const EquivalenceConfig& ec = c.equivalence;
    EquivalenceProblem prob;
    std::function<double(const std::vector<double>&)> rf_of;

    if (ec.problem == "jump_vs_exp_ramp") {
        prob = jump_vs_exp_ramp_problem(c.m0);
        rf_of = [m0 = c.m0](const std::vector<double>& x) {
            const auto jump = make_sudden_jump(m0, x[0], x[1], 1.0, kE * x[0]);
            const ErmakovState s = end_state_closed_form(jump);
            return squeeze_param(s.rho, s.rho_dot, m0, kE * x[0]);
        };
    } else if (ec.problem == "janszky_tau") {
        prob = janszky_tau_problem(ec.omega0, ec.omega1, c.m0, ec.tau_min, ec.tau_max);
        rf_of = [m0 = c.m0, w0 = ec.omega0, w1 = ec.omega1](const std::vector<double>& x) {
            const auto jump = make_sudden_jump(m0, w0, w1, x[0], w0);
            const ErmakovState s = end_state_closed_form(jump);
            return squeeze_param(s.rho, s.rho_dot, m0, w0);
        };
    } else if (ec.problem == "identical") {
        // Two copies of the same template: the residual vanishes identically.
        prob = jump_vs_exp_ramp_problem(c.m0);
        prob.residual = [m0 = c.m0](const std::vector<double>& x) {
            const auto a = make_sudden_jump(m0, x[0], x[1], 1.0, kE * x[0]);
            const auto b = make_sudden_jump(m0, x[0], x[1], 1.0, kE * x[0]);
            const ErmakovState sa = end_state_closed_form(a);
            const ErmakovState sb = end_state_closed_form(b);
            return std::vector<double>{sa.rho - sb.rho, sa.rho_dot - sb.rho_dot};
        };
        rf_of = [m0 = c.m0](const std::vector<double>& x) {
            const auto jump = make_sudden_jump(m0, x[0], x[1], 1.0, kE * x[0]);
            const ErmakovState s = end_state_closed_form(jump);
            return squeeze_param(s.rho, s.rho_dot, m0, kE * x[0]);
        };
    } else {
        throw ConfigError("equivalence: unknown problem '" + ec.problem + "'");
    }

    if (ec.grid != 0) prob.grid = ec.grid;
    if (ec.accept_tol > 0.0) prob.accept_tol = ec.accept_tol;
    if (!ec.box.empty()) {
        if (ec.box.size() != prob.box.size())
            throw ConfigError("equivalence: box override has the wrong dimension");
        prob.box = ec.box;
    }

    const EquivalenceSolution sol = solve_equivalence(prob);

    json out;
    out["problem"] = ec.problem;
    out["parameters"] = prob.names;
    out["degenerate_family"] = sol.degenerate_family;
    out["best_norm"] = sol.best_norm;
    json roots = json::array();
    for (const EquivalenceRoot& root : sol.roots) {
        json rj;
        json params;
        for (std::size_t j = 0; j < root.params.size(); ++j)
            params[prob.names[j]] = root.params[j];
        rj["params"] = params;
        rj["residual"] = root.residual;
        rj["residual_norm"] = root.residual_norm;
        rj["r_f"] = rf_of(root.params);
        roots.push_back(rj);
    }
    out["roots"] = roots;

    RunResult rr;
    rr.summary = out.dump(2);
    const fs::path rfile = out_path(c, "equivalence", "json");
    write_text(rfile, rr.summary);
    rr.files.push_back(rfile.string());

    if (ec.write_scan) {
        Table tbl;
        tbl.columns = prob.names;
        tbl.columns.push_back("residual_norm");
        const std::size_t side = prob.grid + 1;
        std::vector<std::size_t> odo(prob.dim(), 0);
        std::size_t total = 1;
        for (std::size_t j = 0; j < prob.dim(); ++j) total *= side;
        for (std::size_t f = 0; f < total; ++f) {
            std::vector<double> x(prob.dim());
            json cells = json::array();
            for (std::size_t j = 0; j < prob.dim(); ++j) {
                const auto& [lo, hi] = prob.box[j];
                x[j] = lo + (hi - lo) * static_cast<double>(odo[j]) /
                                static_cast<double>(prob.grid);
                cells.push_back(x[j]);
            }
            double norm;
            try {
                std::vector<double> r = prob.residual(x);
                double s = 0.0;
                for (double v : r) s += v * v;
                norm = std::sqrt(s);
            } catch (const Error&) {
                norm = kNan;
            }
            cells.push_back(norm);
            tbl.rows.push_back(std::move(cells));
            for (std::size_t j = prob.dim(); j-- > 0;) {
                if (++odo[j] < side) break;
                odo[j] = 0;
            }
        }
        const fs::path scanf = out_path(c, "equivalence_scan", table_ext(c));
        write_table(scanf, tbl, c.format);
        rr.files.push_back(scanf.string());
    }
    return rr;
}

} // namespace tdho
