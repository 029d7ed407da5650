#include "hmflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "hmflow/problems.hpp"

namespace hmflow {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    const std::string v = lower(value);
    if (v == "true" || v == "yes" || v == "1" || v == "on") {
        return true;
    }
    if (v == "false" || v == "no" || v == "0" || v == "off") {
        return false;
    }
    throw ConfigError("config: '" + key + "' expects true or false, got '" + value + "'");
}

std::string fmt(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

std::string fmt_opt(const std::optional<double>& x)
{
    return x ? fmt(*x) : std::string{};
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw std::runtime_error("error writing " + path.string());
    }
}

std::string indexed_name(const std::string& stem, std::size_t index, std::size_t count, const std::string& ext)
{
    return count == 1 ? stem + ext : stem + "_" + std::to_string(index) + ext;
}

}  // namespace

double parse_number(const std::string& text)
{
    const std::string s = trim(text);
    if (s.rfind("2^", 0) == 0) {
        std::size_t used = 0;
        const std::string exponent = s.substr(2);
        int k = 0;
        try {
            k = std::stoi(exponent, &used);
        } catch (const std::exception&) {
            throw ConfigError("config: bad power of two '" + text + "'");
        }
        if (used != exponent.size()) {
            throw ConfigError("config: bad power of two '" + text + "'");
        }
        return std::ldexp(1.0, k);
    }
    if (lower(s) == "inf" || lower(s) == "infinity") {
        return std::numeric_limits<double>::infinity();
    }
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: bad number '" + text + "'");
    }
    if (used != s.size()) {
        throw ConfigError("config: bad number '" + text + "'");
    }
    return value;
}

std::vector<double> ExperimentConfig::step_sizes() const
{
    return sweep.empty() ? std::vector<double>{scheme.step.tau} : sweep;
}

void ExperimentConfig::validate() const
{
    if (mesh_file.empty() && structured_n < 1) {
        throw ConfigError("config: structured mesh size must be >= 1");
    }
    if (!mesh_file.empty() && !std::filesystem::exists(mesh_file)) {
        throw ConfigError("config: mesh file '" + mesh_file.string() + "' does not exist");
    }
    const auto names = problem_names();
    if (std::find(names.begin(), names.end(), problem) == names.end()) {
        throw ConfigError("config: unknown problem '" + problem + "'");
    }
    for (std::size_t k = 1; k < sweep.size(); ++k) {
        if (!(sweep[k] < sweep[k - 1])) {
            throw ConfigError("config: sweep step sizes must be strictly decreasing");
        }
    }
    for (double tau : step_sizes()) {
        SchemeConfig c = scheme;
        c.step.tau = tau;
        c.validate();
    }
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir)
{
    ExperimentConfig cfg;
    cfg.scheme = SchemeConfig::midpoint(Metric::H1, StepPolicy::constant(0.0625), StopRule::tolerance(1e-6));
    std::optional<double> theta;
    std::optional<double> mu;
    bool have_tolerance = false;
    bool have_final_time = false;
    bool have_structured = false;

    std::istringstream in(text);
    std::string section;
    std::set<std::string> seen;
    int line_no = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
            }
            section = lower(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section + "." + key;
        if (!seen.insert(full).second) {
            throw ConfigError("config: duplicate key '" + full + "'");
        }

        if (full == "mesh.structured") {
            const double n = parse_number(value);
            if (n != std::floor(n) || n < 1) {
                throw ConfigError("config: mesh.structured must be a positive integer");
            }
            cfg.structured_n = static_cast<int>(n);
            have_structured = true;
        } else if (full == "mesh.file") {
            std::filesystem::path p = value;
            cfg.mesh_file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        } else if (full == "problem.name") {
            cfg.problem = value;
        } else if (full == "scheme.method") {
            cfg.method = lower(value);
        } else if (full == "scheme.theta") {
            theta = parse_number(value);
        } else if (full == "scheme.mu") {
            mu = parse_number(value);
        } else if (full == "scheme.metric") {
            const std::string m = lower(value);
            if (m == "l2") {
                cfg.scheme.metric = Metric::L2;
            } else if (m == "h1") {
                cfg.scheme.metric = Metric::H1;
            } else {
                throw ConfigError("config: scheme.metric must be L2 or H1");
            }
        } else if (full == "steps.policy") {
            const std::string p = lower(value);
            if (p == "constant") {
                cfg.scheme.step.kind = StepPolicy::Kind::Constant;
            } else if (p == "prescribed_growth") {
                cfg.scheme.step.kind = StepPolicy::Kind::PrescribedGrowth;
            } else if (p == "adaptive") {
                cfg.scheme.step.kind = StepPolicy::Kind::Adaptive;
            } else {
                throw ConfigError("config: unknown step policy '" + value + "'");
            }
        } else if (full == "steps.tau") {
            cfg.scheme.step.tau = parse_number(value);
        } else if (full == "steps.growth") {
            cfg.scheme.step.growth = parse_number(value);
        } else if (full == "steps.tau_min") {
            cfg.scheme.step.tau_min = parse_number(value);
        } else if (full == "steps.tau_max") {
            cfg.scheme.step.tau_max = parse_number(value);
        } else if (full == "steps.sweep") {
            std::istringstream list(value);
            for (std::string item; std::getline(list, item, ',');) {
                if (!trim(item).empty()) {
                    cfg.sweep.push_back(parse_number(item));
                }
            }
        } else if (full == "stop.tolerance") {
            cfg.scheme.stop.kind = StopRule::Kind::Tolerance;
            cfg.scheme.stop.value = parse_number(value);
            have_tolerance = true;
        } else if (full == "stop.final_time") {
            cfg.scheme.stop.kind = StopRule::Kind::FinalTime;
            cfg.scheme.stop.value = parse_number(value);
            have_final_time = true;
        } else if (full == "stop.max_steps") {
            cfg.scheme.stop.max_steps = static_cast<int>(parse_number(value));
        } else if (full == "solver.tolerance") {
            cfg.scheme.solver.relative_tolerance = parse_number(value);
        } else if (full == "solver.max_iterations") {
            cfg.scheme.solver.max_iterations = static_cast<int>(parse_number(value));
        } else if (full == "output.dir") {
            std::filesystem::path p = value;
            cfg.output_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        } else if (full == "output.save_fields") {
            cfg.save_fields = parse_bool(full, value);
        } else if (full == "output.verify") {
            cfg.verify = parse_bool(full, value);
        } else {
            throw ConfigError("config: unknown key '" + full + "'");
        }
    }

    if (have_tolerance && have_final_time) {
        throw ConfigError("config: give either stop.tolerance or stop.final_time, not both");
    }
    if (have_structured && !cfg.mesh_file.empty()) {
        throw ConfigError("config: give either mesh.structured or mesh.file, not both");
    }

    const SchemeConfig base = cfg.scheme;
    if (cfg.method == "euler") {
        cfg.scheme = SchemeConfig::euler(base.metric, base.step, base.stop);
    } else if (cfg.method == "midpoint") {
        cfg.scheme = SchemeConfig::midpoint(base.metric, base.step, base.stop);
    } else if (cfg.method == "modified_euler") {
        cfg.scheme = SchemeConfig::modified_euler(base.metric, base.step, base.stop);
    } else if (cfg.method == "bdf2") {
        cfg.scheme = SchemeConfig::bdf2(base.metric, base.step.tau, base.stop);
        if (base.step.kind != StepPolicy::Kind::Constant) {
            throw ConfigError("config: BDF2 supports only a constant step size");
        }
    } else if (cfg.method == "theta_mu") {
        if (!theta || !mu) {
            throw ConfigError("config: method theta_mu needs scheme.theta and scheme.mu");
        }
        cfg.scheme = SchemeConfig::euler(base.metric, base.step, base.stop);
        cfg.scheme.theta = *theta;
        cfg.scheme.mu = *mu;
    } else {
        throw ConfigError("config: unknown method '" + cfg.method + "'");
    }
    if (cfg.method != "theta_mu" && (theta || mu)) {
        throw ConfigError("config: scheme.theta and scheme.mu are only valid with method = theta_mu");
    }
    cfg.scheme.solver = base.solver;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str(), path.parent_path());
}

Discretization make_discretization(const ExperimentConfig& config)
{
    Mesh mesh = config.mesh_file.empty() ? generate_structured_mesh(config.structured_n) : load_mesh(config.mesh_file);
    Operators ops = assemble_operators(mesh);
    return {std::move(mesh), std::move(ops)};
}

bool ExperimentResult::any_failure() const
{
    return std::any_of(entries.begin(), entries.end(),
                       [](const SweepEntry& e) { return e.flow.stopped_by == StopReason::Failure; });
}

bool ExperimentResult::identities_passed() const
{
    return std::all_of(entries.begin(), entries.end(),
                       [](const SweepEntry& e) { return !e.identities || e.identities->all_passed(); });
}

ExperimentResult run_experiment(const ExperimentConfig& config, int threads)
{
    config.validate();
    const Discretization disc = make_discretization(config);
    const ProblemSpec problem = make_problem(config.problem);
    const NodalField u0 = nodal_interpolate(problem.initial_value, disc.mesh);

    const std::vector<double> taus = config.step_sizes();
    ExperimentResult result;
    result.entries.resize(taus.size());

    const auto run_one = [&](std::size_t k) {
        SchemeConfig scheme = config.scheme;
        scheme.step.tau = taus[k];
        scheme.keep_fields = config.save_fields || config.verify;
        SweepEntry& entry = result.entries[k];
        entry.tau = taus[k];
        entry.flow = run_flow(scheme, u0, disc.mesh, disc.ops);
        entry.summary = summarize(entry.flow, problem.reference_energy);
        if (config.verify) {
            entry.identities = verify_identities(entry.flow.trajectory, scheme, disc.mesh, disc.ops);
        }
        if (!config.save_fields) {
            entry.flow.trajectory = {};
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, taus.size());
    if (workers == 1) {
        for (std::size_t k = 0; k < taus.size(); ++k) {
            run_one(k);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t k = next++; k < taus.size(); k = next++) {
                        run_one(k);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    std::vector<double> inf;
    std::vector<double> uni;
    for (const auto& e : result.entries) {
        inf.push_back(e.summary.delta_inf);
        uni.push_back(e.summary.delta_uni);
    }
    result.eoc_inf = eoc(inf, taus);
    result.eoc_uni = eoc(uni, taus);
    return result;
}

std::string format_trajectory_csv(const FlowResult& result)
{
    std::string out =
        "n,t,tau,energy,update_norm_star,update_grad_norm,dtu_norm_l2,stop_quantity,delta_uni,delta_inf,a2,b2,c2,"
        "step_ratio_term,cg_iterations,cg_residual,tau_exceeds_max\n";
    for (const auto& r : result.records) {
        out += std::to_string(r.n) + "," + fmt(r.t) + "," + fmt(r.tau) + "," + fmt(r.energy) + "," +
               fmt(r.update_norm_star) + "," + fmt(r.update_grad_norm) + "," + fmt(r.dtu_norm_l2) + "," +
               fmt(r.stop_quantity) + "," + fmt(r.delta_uni) + "," + fmt(r.delta_inf) + "," + fmt(r.a2) + "," +
               fmt(r.b2) + "," + fmt(r.c2) + "," + fmt(r.step_ratio_term) + "," + std::to_string(r.cg_iterations) +
               "," + fmt(r.cg_residual) + "," + (r.tau_exceeds_max ? "1" : "0") + "\n";
    }
    return out;
}

std::string format_summary_csv(const ExperimentResult& result)
{
    std::string out =
        "tau,N_stop,stopped_by,tau_last,final_time,energy,delta_inf,eoc_inf,delta_uni,eoc_uni,delta_ener,a2,b2,c2,"
        "cg_iterations\n";
    for (std::size_t k = 0; k < result.entries.size(); ++k) {
        const auto& e = result.entries[k];
        const auto& s = e.summary;
        const std::string eoc_inf = k > 0 ? fmt_opt(result.eoc_inf[k - 1]) : std::string{};
        const std::string eoc_uni = k > 0 ? fmt_opt(result.eoc_uni[k - 1]) : std::string{};
        out += fmt(e.tau) + "," + std::to_string(s.steps) + "," + to_string(s.stopped_by) + "," + fmt(s.tau_last) +
               "," + fmt(s.final_time) + "," + fmt(s.energy) + "," + fmt(s.delta_inf) + "," + eoc_inf + "," +
               fmt(s.delta_uni) + "," + eoc_uni + "," + fmt_opt(s.delta_ener) + "," + fmt(s.a2) + "," + fmt(s.b2) +
               "," + fmt(s.c2) + "," + std::to_string(s.total_cg_iterations) + "\n";
    }
    return out;
}

std::string format_table_csv(const ExperimentConfig& config, const ExperimentResult& result)
{
    const SchemeConfig& sc = config.scheme;
    const bool constant = sc.step.kind == StepPolicy::Kind::Constant;
    const bool adaptive = sc.step.kind == StepPolicy::Kind::Adaptive;
    const bool tolerance = sc.stop.kind == StopRule::Kind::Tolerance;
    const bool bdf2 = sc.kind == SchemeKind::Bdf2;
    const bool euler_like = !bdf2 && sc.mu == 0.0;
    const bool has_reference = make_problem(config.problem).reference_energy.has_value();

    std::vector<std::string> header{constant ? "tau" : "tau_1", tolerance ? "N_stop" : "N"};
    if (!constant && !adaptive) {
        header.emplace_back(tolerance ? "tau_N_stop" : "tau_N");
    }
    header.emplace_back("delta_inf");
    if (constant) {
        header.emplace_back("eoc_inf");
    }
    header.emplace_back("delta_uni");
    if (constant) {
        header.emplace_back("eoc_uni");
    }
    if (has_reference && !adaptive) {
        header.emplace_back("delta_ener");
    }
    if (!euler_like) {
        header.emplace_back("A2");
        header.emplace_back("B2");
        if (!bdf2) {
            header.emplace_back("C2");
        }
    }

    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        out += (i ? "," : "") + header[i];
    }
    out += "\n";
    for (std::size_t k = 0; k < result.entries.size(); ++k) {
        const auto& e = result.entries[k];
        const auto& s = e.summary;
        std::vector<std::string> row{fmt(e.tau), std::to_string(s.steps)};
        if (!constant && !adaptive) {
            row.push_back(fmt(s.tau_last));
        }
        row.push_back(fmt(s.delta_inf));
        if (constant) {
            row.push_back(k > 0 ? fmt_opt(result.eoc_inf[k - 1]) : std::string{});
        }
        row.push_back(fmt(s.delta_uni));
        if (constant) {
            row.push_back(k > 0 ? fmt_opt(result.eoc_uni[k - 1]) : std::string{});
        }
        if (has_reference && !adaptive) {
            row.push_back(fmt_opt(s.delta_ener));
        }
        if (!euler_like) {
            row.push_back(fmt(s.a2));
            row.push_back(fmt(s.b2));
            if (!bdf2) {
                row.push_back(fmt(s.c2));
            }
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += (i ? "," : "") + row[i];
        }
        out += "\n";
    }
    return out;
}

std::string format_snapshots(const Trajectory& trajectory)
{
    const std::size_t nv = trajectory.fields.empty() ? 0 : trajectory.fields.front().size();
    std::string out = "# hmflow snapshots: N V, then per iterate 'step n tau_n' and V lines 'u1 u2 u3'\n";
    out += std::to_string(trajectory.taus.size()) + " " + std::to_string(nv) + "\n";
    char buf[128];
    for (std::size_t n = 0; n < trajectory.fields.size(); ++n) {
        std::snprintf(buf, sizeof buf, "step %zu %.17g\n", n, n == 0 ? 0.0 : trajectory.taus[n - 1]);
        out += buf;
        for (const auto& v : trajectory.fields[n].values()) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v[0], v[1], v[2]);
            out += buf;
        }
    }
    return out;
}

Trajectory parse_snapshots(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    const auto next_line = [&]() -> std::string {
        while (std::getline(in, line)) {
            const std::string t = trim(line);
            if (!t.empty() && t.front() != '#') {
                return t;
            }
        }
        throw std::runtime_error("snapshots: unexpected end of file");
    };
    std::size_t steps = 0;
    std::size_t nv = 0;
    {
        std::istringstream header(next_line());
        if (!(header >> steps >> nv) || nv == 0) {
            throw std::runtime_error("snapshots: bad header");
        }
    }
    Trajectory tr;
    for (std::size_t n = 0; n <= steps; ++n) {
        std::istringstream step_line(next_line());
        std::string word;
        std::size_t index = 0;
        double tau = 0.0;
        if (!(step_line >> word >> index >> tau) || word != "step" || index != n) {
            throw std::runtime_error("snapshots: bad step line for iterate " + std::to_string(n));
        }
        if (n > 0) {
            tr.taus.push_back(tau);
        }
        NodalField field(nv);
        for (std::size_t z = 0; z < nv; ++z) {
            std::istringstream row(next_line());
            if (!(row >> field[z][0] >> field[z][1] >> field[z][2])) {
                throw std::runtime_error("snapshots: bad value line in iterate " + std::to_string(n));
            }
        }
        tr.fields.push_back(std::move(field));
    }
    return tr;
}

Trajectory load_snapshots(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open snapshot file '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_snapshots(buffer.str());
}

void write_run_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                       const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    const std::size_t count = result.entries.size();
    for (std::size_t k = 0; k < count; ++k) {
        const auto& e = result.entries[k];
        write_file(dir / indexed_name("trajectory", k, count, ".csv"), format_trajectory_csv(e.flow));
        if (config.save_fields) {
            write_file(dir / indexed_name("snapshots", k, count, ".txt"), format_snapshots(e.flow.trajectory));
        }
        if (e.identities) {
            std::ostringstream report;
            write_identity_report(report, *e.identities);
            write_file(dir / indexed_name("residuals", k, count, ".csv"), report.str());
        }
    }
    write_file(dir / "summary.csv", format_summary_csv(result));
}

void write_table_output(const ExperimentConfig& config, const ExperimentResult& result,
                        const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_file(dir / "table.csv", format_table_csv(config, result));
}

}  // namespace hmflow
