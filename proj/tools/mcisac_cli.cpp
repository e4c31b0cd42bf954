// Command-line front end: endpoint computation, accuracy/rate sweeps across
// the three transmit schemes, Monte Carlo estimator checks, and channel file
// generation. Configuration is a flat JSON file; power quantities are given
// in dB and converted to linear internally. Exit codes: 0 ok, 2 config
// error, 3 solver error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcisac/mcisac.hpp"

namespace {

using nlohmann::json;
using namespace mcisac;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct RunConfig {
    SystemConfig system;
    std::size_t users = 3;
    std::uint64_t seed = 1;
    std::string channel_file;

    double gamma_lo = 0.0;  // 0 = derive from the accuracy endpoint
    double gamma_hi = 0.0;
    bool has_gamma_hi = false;
    std::size_t points = 20;
    std::string spacing = "log";
    bool want_optimal = true, want_beamforming = true, want_isotropic = true;

    double gamma_bar = 0.5;  // operating point for ksweep / montecarlo
    std::vector<std::size_t> k_list = {3, 8, 35};
    std::size_t trials = 10;

    std::size_t mc_trials = 500;
    bool fix_waveform = false;
    std::string scheme = "isotropic";

    P1Options p1;
    P2Options p2;
    unsigned workers = 0;
};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return it->get<T>();
}

RunConfig parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(is);

    RunConfig rc;
    rc.system.n_tx = get_or<std::size_t>(j, "n_tx", rc.system.n_tx);
    rc.system.n_rx = get_or<std::size_t>(j, "n_rx", rc.system.n_rx);
    rc.system.symbols = get_or<std::size_t>(j, "symbols", rc.system.symbols);
    rc.system.power = db_to_linear(get_or<double>(j, "power_db", 0.0));
    rc.system.noise_comm = db_to_linear(get_or<double>(j, "noise_comm_db", 0.0));
    rc.system.noise_radar = db_to_linear(get_or<double>(j, "noise_radar_db", 0.0));

    rc.users = get_or<std::size_t>(j, "users", rc.users);
    rc.seed = get_or<std::uint64_t>(j, "seed", rc.seed);
    rc.channel_file = get_or<std::string>(j, "channel_file", "");

    rc.gamma_lo = get_or<double>(j, "gamma_lo", 0.0);
    if (j.contains("gamma_hi")) {
        rc.gamma_hi = j.at("gamma_hi").get<double>();
        rc.has_gamma_hi = true;
    }
    rc.points = get_or<std::size_t>(j, "points", rc.points);
    rc.spacing = get_or<std::string>(j, "spacing", rc.spacing);
    if (rc.spacing != "log" && rc.spacing != "linear")
        throw ConfigError("spacing must be \"log\" or \"linear\"");

    if (j.contains("schemes")) {
        rc.want_optimal = rc.want_beamforming = rc.want_isotropic = false;
        for (const json& s : j.at("schemes")) {
            const std::string name = s.get<std::string>();
            if (name == "optimal")
                rc.want_optimal = true;
            else if (name == "beamforming")
                rc.want_beamforming = true;
            else if (name == "isotropic")
                rc.want_isotropic = true;
            else
                throw ConfigError("unknown scheme: " + name);
        }
    }

    rc.gamma_bar = get_or<double>(j, "gamma_bar", rc.gamma_bar);
    if (j.contains("k_list")) {
        rc.k_list.clear();
        for (const json& k : j.at("k_list")) rc.k_list.push_back(k.get<std::size_t>());
        if (rc.k_list.empty()) throw ConfigError("k_list must not be empty");
    }
    rc.trials = get_or<std::size_t>(j, "trials", rc.trials);

    rc.mc_trials = get_or<std::size_t>(j, "mc_trials", rc.mc_trials);
    rc.fix_waveform = get_or<bool>(j, "fix_waveform", false);
    rc.scheme = get_or<std::string>(j, "scheme", rc.scheme);

    rc.p1.gap_tol = get_or<double>(j, "gap_tol", rc.p1.gap_tol);
    rc.p1.max_iter = get_or<long>(j, "max_iter", rc.p1.max_iter);
    rc.p2.t_tol = get_or<double>(j, "t_tol", rc.p2.t_tol);
    rc.p2.sca_tol = get_or<double>(j, "sca_tol", rc.p2.sca_tol);
    rc.p2.max_sca_iter = get_or<int>(j, "max_sca_iter", rc.p2.max_sca_iter);
    rc.workers = get_or<unsigned>(j, "workers", 0);

    rc.system.validate();
    return rc;
}

ChannelSet load_or_generate(const RunConfig& rc) {
    ChannelSet ch = rc.channel_file.empty()
                        ? generate_rayleigh_channels(rc.users, rc.system.n_tx, rc.seed)
                        : load_channels_csv(rc.channel_file);
    ch.validate(rc.system.n_tx);
    return ch;
}

void write_output(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw ConfigError("cannot open output file: " + out_path);
    os << content;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

double crb_floor(const SystemConfig& cfg) {
    return static_cast<double>(cfg.n_rx) * static_cast<double>(cfg.n_tx * cfg.n_tx) *
           cfg.noise_radar / (static_cast<double>(cfg.symbols) * cfg.power);
}

/// Feasibility re-check of a covariance before its rate is written out.
bool certify(const TransmitCovariance& s, const SystemConfig& cfg, double gamma_bar) {
    return crb_trace(s, cfg) <= gamma_bar * (1.0 + 2e-4) &&
           s.trace() <= cfg.power * (1.0 + 1e-6);
}

int cmd_endpoints(const RunConfig& rc, const std::string& out) {
    const ChannelSet ch = load_or_generate(rc);
    const auto [pmin, iso] = crb_min_point(ch, rc.system);
    const RateMaxResult rm = rate_max_point_full(ch, rc.system);
    const std::string crb_com =
        std::isfinite(rm.point.crb) ? num(rm.point.crb) : std::string("\"inf\"");
    std::ostringstream os;
    os << "{\n"
       << "  \"crb_min\": " << num(pmin.crb) << ",\n"
       << "  \"r_sen\": " << num(pmin.rate) << ",\n"
       << "  \"r_max\": " << num(rm.point.rate) << ",\n"
       << "  \"crb_com\": " << crb_com << "\n}\n";
    write_output(out, os.str());
    return 0;
}

struct SweepRow {
    std::string rate_opt, rate_beam, rate_iso;
    std::string st_opt = "skipped", st_beam = "skipped", st_iso = "skipped";
};

int cmd_sweep(const RunConfig& rc, const std::string& out, std::ostream* log) {
    const SystemConfig& cfg = rc.system;
    const ChannelSet ch = load_or_generate(rc);
    const auto [pmin, iso_cov] = crb_min_point(ch, cfg);
    const double crb_min = pmin.crb;
    const double r_sen = pmin.rate;

    const RateMaxResult rm = rate_max_point_full(ch, cfg);
    double hi = rc.has_gamma_hi ? rc.gamma_hi : std::numeric_limits<double>::infinity();
    if (std::isfinite(rm.point.crb)) hi = std::min(hi, rm.point.crb);
    if (!std::isfinite(hi))
        throw ConfigError(
            "sweep: the rate-optimal covariance is rank deficient (crb_com = inf); "
            "set gamma_hi to bound the grid");
    const double lo = rc.gamma_lo > 0.0 ? rc.gamma_lo : crb_min * 1.0001;
    if (lo < crb_min * (1.0 - 1e-9))
        throw ConfigError("sweep: gamma_lo is below the achievable accuracy endpoint");
    if (!(lo < hi)) throw ConfigError("sweep: empty accuracy grid (gamma_lo >= gamma_hi)");
    if (rc.points < 2) throw ConfigError("sweep: need at least two grid points");

    std::vector<double> grid(rc.points);
    for (std::size_t i = 0; i < rc.points; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(rc.points - 1);
        grid[i] = rc.spacing == "log" ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f;
    }

    std::vector<SweepRow> rows(rc.points);
    std::mutex log_mutex;
    unsigned workers = rc.workers ? rc.workers : default_worker_count();
    if (log) workers = 1;  // keep trace rows readable

    parallel_for(
        grid.size(),
        [&](std::size_t i) {
            const double g = grid[i];
            SweepRow& row = rows[i];
            if (rc.want_optimal) {
                try {
                    P1Options o = rc.p1;
                    if (log) {
                        o.trace = log;
                    }
                    const P1Solution s = solve_p1(ch, cfg, g, o);
                    const double rate = multicast_rate(s.covariance, ch, cfg);
                    if (certify(s.covariance, cfg, g)) {
                        row.rate_opt = num(rate);
                        row.st_opt = "ok";
                    } else {
                        row.st_opt = "failed";
                    }
                } catch (const SolverFailure& e) {
                    row.st_opt = "failed";
                    std::lock_guard<std::mutex> lk(log_mutex);
                    std::cerr << "sweep: optimal at gamma=" << g << ": " << e.what() << "\n";
                }
            }
            if (rc.want_beamforming) {
                try {
                    P2Options o = rc.p2;
                    if (log) o.trace = log;
                    const BeamformingSolution b = solve_p2_sca(ch, cfg, g, {}, o);
                    const double rate = beamforming_rate(b.w, b.s_s, ch, cfg);
                    if (certify(b.s_x, cfg, g) && b.psd_residual <= 1e-8) {
                        row.rate_beam = num(rate);
                        row.st_beam = "ok";
                    } else {
                        row.st_beam = "failed";
                    }
                } catch (const SolverFailure& e) {
                    row.st_beam = "failed";
                    std::lock_guard<std::mutex> lk(log_mutex);
                    std::cerr << "sweep: beamforming at gamma=" << g << ": " << e.what() << "\n";
                }
            }
            if (rc.want_isotropic) {
                if (g >= crb_min * (1.0 - 1e-9)) {
                    row.rate_iso = num(r_sen);
                    row.st_iso = "ok";
                } else {
                    row.st_iso = "infeasible";
                }
            }
        },
        workers);

    std::ostringstream os;
    os << "gamma,rate_optimal,rate_beamforming,rate_isotropic,"
          "status_optimal,status_beamforming,status_isotropic\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const SweepRow& r = rows[i];
        os << num(grid[i]) << ',' << r.rate_opt << ',' << r.rate_beam << ',' << r.rate_iso << ','
           << r.st_opt << ',' << r.st_beam << ',' << r.st_iso << '\n';
    }
    write_output(out, os.str());
    return 0;
}

int cmd_ksweep(const RunConfig& rc, const std::string& out, std::ostream* log) {
    const SystemConfig& cfg = rc.system;
    if (rc.gamma_bar < crb_floor(cfg) * (1.0 - 1e-9))
        throw ConfigError("ksweep: gamma_bar is below the achievable accuracy endpoint");
    if (rc.trials == 0) throw ConfigError("ksweep: trials must be positive");

    std::ostringstream os;
    os << "k,rate_optimal,rate_beamforming,rate_isotropic\n";
    for (std::size_t k : rc.k_list) {
        double sum_opt = 0.0, sum_beam = 0.0, sum_iso = 0.0;
        std::size_t n_opt = 0, n_beam = 0, n_iso = 0;
        for (std::size_t trial = 0; trial < rc.trials; ++trial) {
            const std::uint64_t s = mix_seed(mix_seed(rc.seed, 0x6b7377656570ULL + k), trial);
            const ChannelSet ch = generate_rayleigh_channels(k, cfg.n_tx, s);
            if (rc.want_optimal) {
                try {
                    P1Options o = rc.p1;
                    if (log) o.trace = log;
                    const P1Solution sol = solve_p1(ch, cfg, rc.gamma_bar, o);
                    if (certify(sol.covariance, cfg, rc.gamma_bar)) {
                        sum_opt += multicast_rate(sol.covariance, ch, cfg);
                        ++n_opt;
                    }
                } catch (const SolverFailure& e) {
                    std::cerr << "ksweep: optimal K=" << k << " trial " << trial << ": "
                              << e.what() << "\n";
                }
            }
            if (rc.want_beamforming) {
                try {
                    P2Options o = rc.p2;
                    if (log) o.trace = log;
                    const BeamformingSolution b = solve_p2_sca(ch, cfg, rc.gamma_bar, {}, o);
                    if (certify(b.s_x, cfg, rc.gamma_bar) && b.psd_residual <= 1e-8) {
                        sum_beam += beamforming_rate(b.w, b.s_s, ch, cfg);
                        ++n_beam;
                    }
                } catch (const SolverFailure& e) {
                    std::cerr << "ksweep: beamforming K=" << k << " trial " << trial << ": "
                              << e.what() << "\n";
                }
            }
            if (rc.want_isotropic) {
                const auto [pmin, iso] = crb_min_point(ch, cfg);
                sum_iso += pmin.rate;
                ++n_iso;
            }
        }
        os << k << ',' << (n_opt ? num(sum_opt / static_cast<double>(n_opt)) : std::string())
           << ',' << (n_beam ? num(sum_beam / static_cast<double>(n_beam)) : std::string())
           << ',' << (n_iso ? num(sum_iso / static_cast<double>(n_iso)) : std::string()) << '\n';
    }
    write_output(out, os.str());
    return 0;
}

int cmd_montecarlo(const RunConfig& rc, const std::string& out) {
    const SystemConfig& cfg = rc.system;
    TransmitCovariance cov;
    if (rc.scheme == "isotropic") {
        cov = TransmitCovariance{
            HermitianMatrix::scaled_identity(cfg.n_tx, cfg.power / static_cast<double>(cfg.n_tx))};
    } else if (rc.scheme == "optimal") {
        const ChannelSet ch = load_or_generate(rc);
        cov = solve_p1(ch, cfg, rc.gamma_bar, rc.p1).covariance;
    } else if (rc.scheme == "beamforming") {
        const ChannelSet ch = load_or_generate(rc);
        cov = solve_p2_sca(ch, cfg, rc.gamma_bar, {}, rc.p2).s_x;
    } else {
        throw ConfigError("montecarlo: scheme must be isotropic, optimal, or beamforming");
    }
    const McReport rep = mc_crb_check(cov, cfg, rc.mc_trials, rc.seed, rc.fix_waveform);
    write_output(out, rep.to_json());
    return 0;
}

int cmd_gen_channels(const RunConfig& rc, const std::string& out) {
    const ChannelSet ch = generate_rayleigh_channels(rc.users, rc.system.n_tx, rc.seed);
    if (out.empty()) {
        save_channels_csv(std::cout, ch);
    } else {
        std::ofstream os(out, std::ios::binary);
        if (!os) throw ConfigError("cannot open output file: " + out);
        save_channels_csv(os, ch);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multicast ISAC transmit design toolkit"};
    app.fallthrough(true);
    app.require_subcommand(1);

    std::string config_path, out_path, channels_path, log_path;
    std::uint64_t seed_val = 0;
    app.add_option("--config", config_path, "JSON run configuration");
    auto* seed_opt = app.add_option("--seed", seed_val, "override the config seed");
    app.add_option("--out", out_path, "output file (stdout when omitted)");
    app.add_option("--channels", channels_path, "channel CSV to load instead of generating");
    app.add_option("--log", log_path, "per-iteration solver trace sink (CSV rows)");

    CLI::App* sc_end = app.add_subcommand("endpoints", "accuracy/rate endpoints as JSON");
    CLI::App* sc_sweep = app.add_subcommand("sweep", "rate vs accuracy budget CSV");
    CLI::App* sc_ksweep = app.add_subcommand("ksweep", "rate vs user count CSV");
    CLI::App* sc_mc = app.add_subcommand("montecarlo", "estimator Monte Carlo report JSON");
    CLI::App* sc_gen = app.add_subcommand("gen-channels", "write a Rayleigh channel CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig rc = config_path.empty() ? RunConfig{} : parse_config(config_path);
        if (seed_opt->count()) rc.seed = seed_val;
        if (!channels_path.empty()) rc.channel_file = channels_path;
        rc.system.validate();

        std::ofstream log_os;
        std::ostream* log = nullptr;
        if (!log_path.empty()) {
            log_os.open(log_path, std::ios::binary);
            if (!log_os) throw ConfigError("cannot open log file: " + log_path);
            log = &log_os;
        }

        if (sc_end->parsed()) return cmd_endpoints(rc, out_path);
        if (sc_sweep->parsed()) return cmd_sweep(rc, out_path, log);
        if (sc_ksweep->parsed()) return cmd_ksweep(rc, out_path, log);
        if (sc_mc->parsed()) return cmd_montecarlo(rc, out_path);
        if (sc_gen->parsed()) return cmd_gen_channels(rc, out_path);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ContractViolation& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SolverFailure& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
