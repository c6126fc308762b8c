#include "sigrule/records.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <tuple>

namespace sigrule {

namespace {

using nlohmann::ordered_json;

template <typename T>
T parse_integer(std::string_view text, const char* field) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument(std::string("bad integer for ") + field + ": '" + std::string(text) + "'");
    }
    return value;
}

double parse_real(std::string_view text, const char* field) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw std::invalid_argument(std::string("bad number for ") + field + ": '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// Bounded stacks sort before unbounded, smaller bounds first.
auto bound_key(const std::optional<int>& b) { return std::make_pair(!b.has_value(), b.value_or(0)); }

ordered_json bound_json(const std::optional<int>& b) {
    if (b) return *b;
    return "inf";
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string format_stack_bound(const std::optional<int>& bound) { return bound ? std::to_string(*bound) : "inf"; }

std::optional<int> parse_stack_bound(std::string_view text) {
    if (text == "inf") return std::nullopt;
    const int m = parse_integer<int>(text, "stack_bound");
    if (m < 1) throw std::invalid_argument("stack bound must be >= 1 or 'inf'");
    return m;
}

SweepRow make_row(const TrialConfig& config, const BatchStats& stats) {
    SweepRow row;
    row.d = config.d;
    row.eps_d = config.eps_d;
    row.eps_m = config.eps_m;
    row.tau = stats.tau;
    row.stack_bound = config.stack_bound;
    row.trials = stats.trials;
    row.fail_any = stats.fail_any;
    row.fail_h = stats.fail_h;
    row.fail_v = stats.fail_v;
    row.p_l = stats.p_l;
    row.eps_l = stats.eps_l;
    row.ci_low = stats.ci_low;
    row.ci_high = stats.ci_high;
    row.master_seed = config.master_seed;
    return row;
}

std::string format_row(const SweepRow& r) {
    std::string out;
    out += std::to_string(r.d) + ',' + format_double(r.eps_d) + ',' + format_double(r.eps_m) + ',';
    out += std::to_string(r.tau) + ',' + format_stack_bound(r.stack_bound) + ',';
    out += std::to_string(r.trials) + ',' + std::to_string(r.fail_any) + ',' + std::to_string(r.fail_h) + ',' +
           std::to_string(r.fail_v) + ',';
    out += format_double(r.p_l) + ',' + format_double(r.eps_l) + ',' + format_double(r.ci_low) + ',' +
           format_double(r.ci_high) + ',';
    out += std::to_string(r.master_seed);
    return out;
}

void write_csv(std::ostream& out, std::span<const SweepRow> rows, bool header) {
    if (header) out << kCsvHeader << '\n';
    for (const auto& r : rows) out << format_row(r) << '\n';
}

std::vector<SweepRow> read_csv(std::istream& in) {
    std::vector<SweepRow> rows;
    std::string line;
    std::size_t number = 0;
    auto strip = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    };
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    ++number;
    strip(line);
    if (line != kCsvHeader) throw ParseError(number, "unexpected header");
    while (std::getline(in, line)) {
        ++number;
        strip(line);
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 14) {
            throw ParseError(number, "expected 14 fields, got " + std::to_string(f.size()));
        }
        try {
            SweepRow r;
            r.d = parse_integer<int>(f[0], "d");
            r.eps_d = parse_real(f[1], "eps_d");
            r.eps_m = parse_real(f[2], "eps_m");
            r.tau = parse_integer<int>(f[3], "tau");
            r.stack_bound = parse_stack_bound(f[4]);
            r.trials = parse_integer<long>(f[5], "trials");
            r.fail_any = parse_integer<long>(f[6], "fail_any");
            r.fail_h = parse_integer<long>(f[7], "fail_h");
            r.fail_v = parse_integer<long>(f[8], "fail_v");
            r.p_l = parse_real(f[9], "p_l");
            r.eps_l = parse_real(f[10], "eps_l");
            r.ci_low = parse_real(f[11], "ci_low");
            r.ci_high = parse_real(f[12], "ci_high");
            r.master_seed = parse_integer<std::uint64_t>(f[13], "master_seed");
            if (r.d < 3 || r.tau < 1 || r.trials < 1) throw std::invalid_argument("d, tau or trials out of range");
            if (r.fail_h < 0 || r.fail_v < 0 || r.fail_any > r.trials || r.fail_any > r.fail_h + r.fail_v ||
                r.fail_any < std::max(r.fail_h, r.fail_v)) {
                throw std::invalid_argument("inconsistent failure counts");
            }
            rows.push_back(r);
        } catch (const std::invalid_argument& e) {
            throw ParseError(number, e.what());
        }
    }
    return rows;
}

bool row_order_less(const SweepRow& a, const SweepRow& b) {
    return std::make_tuple(bound_key(a.stack_bound), a.d, a.eps_d, a.eps_m, a.tau, a.master_seed, a.trials) <
           std::make_tuple(bound_key(b.stack_bound), b.d, b.eps_d, b.eps_m, b.tau, b.master_seed, b.trials);
}

FitReport analyze_rows(std::span<const SweepRow> rows, Weighting weighting) {
    FitReport report;
    report.weighting = weighting;

    using CellKey = std::tuple<int, double, double>;
    using BoundKey = std::pair<bool, int>;
    std::map<BoundKey, std::map<CellKey, std::map<int, SweepRow>>> cells;
    for (const auto& r : rows) {
        auto& by_tau = cells[bound_key(r.stack_bound)][{r.d, r.eps_d, r.eps_m}];
        auto it = by_tau.find(r.tau);
        // Repeated cells: the larger sample wins.
        if (it == by_tau.end() || it->second.trials < r.trials) by_tau[r.tau] = r;
    }

    for (const auto& [bkey, group_cells] : cells) {
        FitGroup group;
        group.stack_bound = bkey.first ? std::nullopt : std::optional<int>(bkey.second);
        std::map<int, std::vector<SweepRow>> by_d;
        for (const auto& [ckey, by_tau] : group_cells) {
            by_d[std::get<0>(ckey)].push_back(by_tau.rbegin()->second);
            if (by_tau.size() < 3) continue;
            SeriesDiagnostics s;
            s.d = std::get<0>(ckey);
            s.eps_d = std::get<1>(ckey);
            s.eps_m = std::get<2>(ckey);
            s.stack_bound = group.stack_bound;
            for (const auto& [tau, row] : by_tau) s.points.push_back({tau, row.p_l});
            try {
                s.poisson = fit_poisson(s.points);
            } catch (const FitError& e) {
                s.poisson_reason = e.what();
            }
            s.eps_l_last = p_to_rate(s.points.back().p_l, s.points.back().tau).eps_l;
            if (s.eps_l_last > 0.0) s.convergence_tau = convergence_time(s.points, s.eps_l_last);
            report.series.push_back(std::move(s));
        }
        for (const auto& [d, drows] : by_d) {
            try {
                group.fits.push_back(fit_powerlaw_per_d(drows, weighting));
            } catch (const FitError& e) {
                group.skipped.emplace_back(d, e.what());
            }
        }
        try {
            group.ansatz = fit_ansatz(group.fits);
        } catch (const FitError& e) {
            group.ansatz_reason = e.what();
        }
        group.crossings = adjacent_crossings(group.fits);
        report.groups.push_back(std::move(group));
    }
    return report;
}

ordered_json to_json(const FitReport& report) {
    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["weighting"] = report.weighting == Weighting::Wilson ? "wilson" : "uniform";
    j["reference"] = {{"A", 5.7e-4}, {"eps_c", 0.0068}};
    j["groups"] = ordered_json::array();
    for (const auto& g : report.groups) {
        ordered_json jg;
        jg["stack_bound"] = bound_json(g.stack_bound);
        if (g.ansatz) {
            jg["A"] = g.ansatz->a;
            jg["eps_c"] = g.ansatz->eps_c;
        } else {
            jg["eps_c_reason"] = g.ansatz_reason;
        }
        jg["gamma"] = ordered_json::array();
        for (const auto& f : g.fits) {
            jg["gamma"].push_back({{"d", f.d},
                                   {"gamma", f.gamma},
                                   {"gamma_se", f.gamma_se},
                                   {"intercept", f.intercept},
                                   {"intercept_se", f.intercept_se},
                                   {"points", f.points},
                                   {"excluded", f.excluded},
                                   {"weighted", f.weighted}});
        }
        if (g.ansatz) {
            ordered_json res = ordered_json::array();
            for (const auto& [d, r] : g.ansatz->residuals) res.push_back({{"d", d}, {"residual", r}});
            jg["ansatz_residuals"] = res;
        }
        jg["skipped"] = ordered_json::array();
        for (const auto& [d, reason] : g.skipped) jg["skipped"].push_back({{"d", d}, {"reason", reason}});
        jg["crossings"] = ordered_json::array();
        for (const auto& c : g.crossings) {
            jg["crossings"].push_back({{"d_i", c.d_i},
                                       {"d_j", c.d_j},
                                       {"eps_c_tilde", c.eps_c_tilde},
                                       {"gamma_i", c.gamma_i},
                                       {"gamma_j", c.gamma_j}});
        }
        j["groups"].push_back(std::move(jg));
    }
    j["series"] = ordered_json::array();
    for (const auto& s : report.series) {
        ordered_json js;
        js["d"] = s.d;
        js["eps_d"] = s.eps_d;
        js["eps_m"] = s.eps_m;
        js["stack_bound"] = bound_json(s.stack_bound);
        if (s.poisson) {
            js["poisson"] = {{"lambda", s.poisson->lambda},
                             {"eps_l", s.poisson->eps_l},
                             {"r_squared", s.poisson->r_squared},
                             {"rms_residual", s.poisson->rms_residual},
                             {"points", s.poisson->points},
                             {"excluded", s.poisson->excluded}};
        } else {
            js["poisson_reason"] = s.poisson_reason;
        }
        js["eps_l_last"] = s.eps_l_last;
        if (s.convergence_tau) {
            js["convergence_tau"] = *s.convergence_tau;
        } else {
            js["convergence_tau"] = nullptr;
            js["convergence_reason"] = "not converged";
        }
        js["points"] = ordered_json::array();
        for (const auto& p : s.points) js["points"].push_back({p.tau, p.p_l});
        j["series"].push_back(std::move(js));
    }
    return j;
}

std::string manifest_path(const std::string& output_path) { return output_path + ".manifest.json"; }

ordered_json manifest_entry(std::string_view command, const ordered_json& parameters) {
    ordered_json e;
    e["command"] = command;
    e["parameters"] = parameters;
    e["timestamp"] = utc_timestamp();
    return e;
}

void write_manifest(const std::string& output_path, const std::vector<ordered_json>& entries) {
    ordered_json j;
    j["tool"] = "sigrule";
    j["tool_version"] = kToolVersion;
    j["output"] = std::filesystem::path(output_path).filename().string();
    j["runs"] = entries;
    const auto path = manifest_path(output_path);
    const auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << j.dump(2) << '\n';
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::vector<ordered_json> read_manifest(const std::string& output_path) {
    const auto path = manifest_path(output_path);
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt manifest " + path + ": " + e.what());
    }
    if (!j.contains("runs") || !j["runs"].is_array()) throw std::runtime_error("corrupt manifest " + path);
    return j["runs"].get<std::vector<ordered_json>>();
}

void append_manifest(const std::string& output_path, const ordered_json& entry) {
    auto entries = read_manifest(output_path);
    entries.push_back(entry);
    write_manifest(output_path, entries);
}

}  // namespace sigrule
