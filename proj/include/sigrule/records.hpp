#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sigrule/analysis.hpp"
#include "sigrule/montecarlo.hpp"

namespace sigrule {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Column order of results files.
inline constexpr std::string_view kCsvHeader =
    "d,eps_d,eps_m,tau,stack_bound,trials,fail_any,fail_h,fail_v,p_l,eps_l,ci_low,ci_high,master_seed";

// Malformed input; `line` is 1-based and counts the header.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}
    [[nodiscard]] std::size_t line() const { return line_; }
    [[nodiscard]] const std::string& reason() const { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

// 17 significant digits: every double parses back unchanged.
[[nodiscard]] std::string format_double(double x);
[[nodiscard]] std::string format_stack_bound(const std::optional<int>& bound);
// "inf" or a positive integer. Throws std::invalid_argument.
[[nodiscard]] std::optional<int> parse_stack_bound(std::string_view text);

[[nodiscard]] SweepRow make_row(const TrialConfig& config, const BatchStats& stats);

[[nodiscard]] std::string format_row(const SweepRow& row);
void write_csv(std::ostream& out, std::span<const SweepRow> rows, bool header = true);
// Header line required. Throws ParseError naming the offending line.
[[nodiscard]] std::vector<SweepRow> read_csv(std::istream& in);

// Cell identity used for sorting sweep output and for resume bookkeeping.
[[nodiscard]] bool row_order_less(const SweepRow& a, const SweepRow& b);

// Everything needed to rebuild a report from a results file.
struct FitGroup {
    std::optional<int> stack_bound;
    std::vector<PowerLawFit> fits;
    std::vector<std::pair<int, std::string>> skipped;  // distance, reason
    std::optional<AnsatzFit> ansatz;
    std::string ansatz_reason;
    std::vector<Crossing> crossings;
};

struct SeriesDiagnostics {
    int d = 0;
    double eps_d = 0.0;
    double eps_m = 0.0;
    std::optional<int> stack_bound;
    std::vector<SeriesPoint> points;
    std::optional<PoissonFit> poisson;
    std::string poisson_reason;
    double eps_l_last = 0.0;  // per-round rate from the longest run
    std::optional<int> convergence_tau;
};

struct FitReport {
    Weighting weighting = Weighting::Wilson;
    std::vector<FitGroup> groups;  // one per stack bound
    std::vector<SeriesDiagnostics> series;
};

// Groups rows by stack bound and fits each group. Cells sampled at several
// tau contribute their longest run to the power-law fits and, with three or
// more tau values, a series diagnostic.
[[nodiscard]] FitReport analyze_rows(std::span<const SweepRow> rows, Weighting weighting);
[[nodiscard]] nlohmann::ordered_json to_json(const FitReport& report);

// Sidecar provenance of an output file: one entry per command that wrote it.
[[nodiscard]] std::string manifest_path(const std::string& output_path);
[[nodiscard]] nlohmann::ordered_json manifest_entry(std::string_view command, const nlohmann::ordered_json& parameters);
// Appends `entry` to the manifest of `output_path`, creating it if needed.
void append_manifest(const std::string& output_path, const nlohmann::ordered_json& entry);
void write_manifest(const std::string& output_path, const std::vector<nlohmann::ordered_json>& entries);
[[nodiscard]] std::vector<nlohmann::ordered_json> read_manifest(const std::string& output_path);

}  // namespace sigrule
