#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hermitian.hpp"
#include "rng.hpp"

namespace mcisac {

/// Static system description. All quantities are linear (not dB): power is
/// the transmit budget, noise_comm the per-user receiver noise variance,
/// noise_radar the per-entry echo noise variance, symbols the waveform
/// block length used for estimation.
struct SystemConfig {
    std::size_t n_tx = 4;
    std::size_t n_rx = 4;
    std::size_t symbols = 256;
    double power = 1.0;
    double noise_comm = 1.0;
    double noise_radar = 1.0;

    void validate() const {
        if (n_tx == 0) throw ContractViolation("SystemConfig: n_tx must be positive");
        if (n_rx < n_tx) throw ContractViolation("SystemConfig: n_rx must be >= n_tx");
        if (symbols <= n_tx)
            throw ContractViolation("SystemConfig: symbols must exceed n_tx");
        if (!(power > 0.0)) throw ContractViolation("SystemConfig: power must be positive");
        if (!(noise_comm > 0.0) || !(noise_radar > 0.0))
            throw ContractViolation("SystemConfig: noise variances must be positive");
    }
};

/// Downlink channel vectors, one per user. Multicast needs at least two
/// users; the single-user case degenerates to ordinary beamforming and is
/// rejected to keep min-rate semantics meaningful.
struct ChannelSet {
    std::vector<CVector> channels;

    std::size_t users() const { return channels.size(); }
    std::size_t n_tx() const { return channels.empty() ? 0 : channels[0].size(); }

    void validate(std::size_t expected_n_tx) const {
        if (users() < 2) throw ContractViolation("ChannelSet: need at least two users");
        for (const CVector& h : channels) {
            if (h.size() != expected_n_tx)
                throw ContractViolation("ChannelSet: channel length != n_tx");
            for (const cxd& v : h)
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                    throw ContractViolation("ChannelSet: non-finite channel entry");
        }
    }
};

/// Transmit-side covariance of the unified waveform.
struct TransmitCovariance {
    HermitianMatrix matrix;

    std::size_t dim() const { return matrix.dim(); }
    double trace() const { return matrix.trace(); }
};

/// One point on the estimation-accuracy versus rate boundary.
struct CrPoint {
    double crb = 0.0;  // trace of the error bound; +infinity when rank-deficient
    double rate = 0.0;
};

struct RateDetail {
    double rate = 0.0;
    std::vector<double> snr;           // per-user h^H S h / noise
    std::vector<std::size_t> argmin;   // users attaining the minimum (1e-9 rel. tie)
};

inline RateDetail multicast_rate_detail(const TransmitCovariance& s, const ChannelSet& ch,
                                        const SystemConfig& cfg) {
    if (ch.n_tx() != s.dim()) throw ContractViolation("multicast_rate: dimension mismatch");
    RateDetail d;
    d.snr.reserve(ch.users());
    double worst = std::numeric_limits<double>::infinity();
    for (const CVector& h : ch.channels) {
        const double v = s.matrix.quad_form(h) / cfg.noise_comm;
        d.snr.push_back(v);
        worst = std::min(worst, v);
    }
    for (std::size_t k = 0; k < d.snr.size(); ++k)
        if (d.snr[k] <= worst * (1.0 + 1e-9) + 1e-300) d.argmin.push_back(k);
    d.rate = std::log2(1.0 + std::max(worst, 0.0));
    return d;
}

/// Worst-user rate log2(1 + min_k h_k^H S h_k / noise).
inline double multicast_rate(const TransmitCovariance& s, const ChannelSet& ch,
                             const SystemConfig& cfg) {
    return multicast_rate_detail(s, ch, cfg).rate;
}

/// Estimation error bound achieved by covariance S:
/// n_rx * noise_radar / symbols * tr(S^{-1}), +infinity if S is singular.
inline double crb_trace(const TransmitCovariance& s, const SystemConfig& cfg, double pd_tol) {
    const double ti = trace_inverse(s.matrix, pd_tol);
    return static_cast<double>(cfg.n_rx) * cfg.noise_radar / static_cast<double>(cfg.symbols) * ti;
}

inline double crb_trace(const TransmitCovariance& s, const SystemConfig& cfg) {
    return crb_trace(s, cfg, default_pd_tol(s.matrix));
}

/// SINR of beam w at channel h with residual sensing covariance S_s treated
/// as interference: |h^H w|^2 / (h^H S_s h + noise).
inline double sinr_with_sensing(const CVector& w, const HermitianMatrix& s_s, const CVector& h,
                                const SystemConfig& cfg) {
    if (w.size() != h.size() || s_s.dim() != h.size())
        throw ContractViolation("sinr_with_sensing: dimension mismatch");
    const double num = std::norm(vdot(h, w));
    const double den = std::max(s_s.quad_form(h), 0.0) + cfg.noise_comm;
    return num / den;
}

inline double beamforming_rate(const CVector& w, const HermitianMatrix& s_s, const ChannelSet& ch,
                               const SystemConfig& cfg) {
    double worst = std::numeric_limits<double>::infinity();
    for (const CVector& h : ch.channels)
        worst = std::min(worst, sinr_with_sensing(w, s_s, h, cfg));
    return std::log2(1.0 + std::max(worst, 0.0));
}

/// Normalized Rayleigh fading: i.i.d. CN(0,1) draws scaled to ‖h_k‖ = 1, so
/// users differ only in direction. Fading the norms as well would reduce the
/// many-user behavior to "serve the weakest user" and mask the direction
/// coverage effects this model is about.
inline ChannelSet generate_rayleigh_channels(std::size_t users, std::size_t n_tx,
                                             std::uint64_t seed) {
    if (users < 2) throw ContractViolation("generate_rayleigh_channels: need users >= 2");
    if (n_tx == 0) throw ContractViolation("generate_rayleigh_channels: n_tx must be positive");
    Rng rng(mix_seed(seed, 0x6368616e6e656cULL));
    ChannelSet ch;
    ch.channels.reserve(users);
    for (std::size_t k = 0; k < users; ++k) {
        CVector h = rng.cgaussian_vector(n_tx, 1.0);
        double n2 = norm2sq(h);
        while (!(n2 > 0.0)) {  // measure zero, but keep every draw well defined
            h = rng.cgaussian_vector(n_tx, 1.0);
            n2 = norm2sq(h);
        }
        const double inv = 1.0 / std::sqrt(n2);
        for (cxd& x : h) x *= inv;
        ch.channels.push_back(std::move(h));
    }
    return ch;
}

// --- channel CSV: one row per user, columns re/im interleaved per antenna ---

inline void save_channels_csv(std::ostream& os, const ChannelSet& ch) {
    for (std::size_t i = 0; i < ch.n_tx(); ++i)
        os << (i ? "," : "") << "h" << i << "_re,h" << i << "_im";
    os << "\n";
    char buf[64];
    for (const CVector& h : ch.channels) {
        for (std::size_t i = 0; i < h.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", h[i].real(), h[i].imag());
            os << (i ? "," : "") << buf;
        }
        os << "\n";
    }
}

inline ChannelSet load_channels_csv(std::istream& is) {
    ChannelSet ch;
    std::string line;
    std::size_t width = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string tok;
        bool numeric = true;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(tok, &pos);
                while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
                if (pos != tok.size()) { numeric = false; break; }
                vals.push_back(v);
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (ch.channels.empty()) continue;  // header row
            throw ContractViolation("channel csv: non-numeric field");
        }
        if (vals.size() % 2 != 0 || vals.empty())
            throw ContractViolation("channel csv: need an even, positive column count");
        if (width == 0) width = vals.size();
        if (vals.size() != width) throw ContractViolation("channel csv: ragged rows");
        CVector h(vals.size() / 2);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = cxd(vals[2 * i], vals[2 * i + 1]);
        ch.channels.push_back(std::move(h));
    }
    if (ch.users() < 2) throw ContractViolation("channel csv: need at least two rows");
    return ch;
}

inline void save_channels_csv(const std::string& path, const ChannelSet& ch) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ContractViolation("cannot open channel csv for writing: " + path);
    save_channels_csv(os, ch);
}

inline ChannelSet load_channels_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ContractViolation("cannot open channel csv: " + path);
    return load_channels_csv(is);
}

}  // namespace mcisac
