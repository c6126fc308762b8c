#include "sigrule/trace.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <stdexcept>

#include "sigrule/noise.hpp"
#include "sigrule/records.hpp"

namespace sigrule {

namespace {

using nlohmann::ordered_json;

constexpr const char* kDirKeys[] = {"N", "E", "S", "W"};
constexpr const char* kForwardKeys[] = {"fwd1", "fwd2"};
constexpr const char* kAntiKeys[] = {"anti1", "anti2"};
constexpr const char* kStackKeys[] = {"stack1", "stack2"};

ordered_json sites_json(const std::vector<Vertex>& sites) {
    ordered_json a = ordered_json::array();
    for (const auto& v : sites) a.push_back({v.row, v.col});
    return a;
}

ordered_json channels_json(const std::array<std::vector<Vertex>, 4>& by_dir) {
    ordered_json o = ordered_json::object();
    for (int k = 0; k < 4; ++k) o[kDirKeys[k]] = sites_json(by_dir[static_cast<std::size_t>(k)]);
    return o;
}

Vertex site_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [row, col]");
    return {j[0].get<int>(), j[1].get<int>()};
}

std::vector<Vertex> sites_from(const nlohmann::json& j) {
    if (!j.is_array()) throw std::invalid_argument("expected a list of sites");
    std::vector<Vertex> out;
    for (const auto& e : j) out.push_back(site_from(e));
    return out;
}

std::array<std::vector<Vertex>, 4> channels_from(const nlohmann::json& j) {
    if (!j.is_object() || j.size() != 4) throw std::invalid_argument("expected an object keyed N, E, S, W");
    std::array<std::vector<Vertex>, 4> out;
    for (int k = 0; k < 4; ++k) out[static_cast<std::size_t>(k)] = sites_from(j.at(kDirKeys[k]));
    return out;
}

int parse_int(std::string_view text) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("bad integer '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

TraceFrame capture_frame(const Automaton& automaton, int t, const Chain& corrections, std::string step) {
    const int d = automaton.distance();
    TraceFrame f;
    f.t = t;
    f.step = std::move(step);
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            const Vertex v{r, c};
            const auto s = automaton.site(v);
            if (s.defect) f.defects.push_back(v);
            for (std::size_t k = 0; k < 2; ++k) {
                for (std::size_t dir = 0; dir < 4; ++dir) {
                    if (s.forward[k][dir]) f.forward[k][dir].push_back(v);
                    if (s.anti[k][dir]) f.anti[k][dir].push_back(v);
                    if (s.stack[k][dir] != 0) {
                        f.stacks[k].push_back({v, static_cast<Direction>(dir), s.stack[k][dir]});
                    }
                }
            }
        }
    }
    f.corrections = corrections.edges();
    std::sort(f.corrections.begin(), f.corrections.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.anchor, a.orientation) < std::tie(b.anchor, b.orientation);
    });
    return f;
}

ordered_json to_json(const TraceFrame& f) {
    ordered_json j;
    j["t"] = f.t;
    if (!f.step.empty()) j["step"] = f.step;
    j["defects"] = sites_json(f.defects);
    for (std::size_t k = 0; k < 2; ++k) j[kForwardKeys[k]] = channels_json(f.forward[k]);
    for (std::size_t k = 0; k < 2; ++k) j[kAntiKeys[k]] = channels_json(f.anti[k]);
    for (std::size_t k = 0; k < 2; ++k) {
        ordered_json a = ordered_json::array();
        for (const auto& e : f.stacks[k]) {
            a.push_back({e.site.row, e.site.col, std::string(1, direction_symbol(e.dir)), e.value});
        }
        j[kStackKeys[k]] = a;
    }
    ordered_json corr = ordered_json::array();
    for (const auto& e : f.corrections) {
        corr.push_back({e.anchor.row, e.anchor.col, e.orientation == Orientation::H ? "H" : "V"});
    }
    j["corrections"] = corr;
    return j;
}

std::string format_frame(const TraceFrame& frame) { return to_json(frame).dump(); }

TraceFrame parse_frame(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
    }
    try {
        TraceFrame f;
        f.t = j.at("t").get<int>();
        if (j.contains("step")) f.step = j.at("step").get<std::string>();
        f.defects = sites_from(j.at("defects"));
        for (std::size_t k = 0; k < 2; ++k) {
            f.forward[k] = channels_from(j.at(kForwardKeys[k]));
            f.anti[k] = channels_from(j.at(kAntiKeys[k]));
            for (const auto& e : j.at(kStackKeys[k])) {
                if (!e.is_array() || e.size() != 4) throw std::invalid_argument("expected [row, col, dir, value]");
                f.stacks[k].push_back({{e[0].get<int>(), e[1].get<int>()},
                                       parse_direction(e[2].get<std::string>()),
                                       e[3].get<int>()});
            }
        }
        for (const auto& e : j.at("corrections")) {
            if (!e.is_array() || e.size() != 3) throw std::invalid_argument("expected [row, col, \"H\"|\"V\"]");
            const auto o = e[2].get<std::string>();
            if (o != "H" && o != "V") throw std::invalid_argument("edge orientation must be H or V");
            f.corrections.push_back({o == "H" ? Orientation::H : Orientation::V, {e[0].get<int>(), e[1].get<int>()}});
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed record: ") + e.what());
    }
}

std::vector<TraceFrame> read_trace(std::istream& in) {
    std::vector<TraceFrame> frames;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            frames.push_back(parse_frame(line));
        } catch (const std::invalid_argument& e) {
            throw ParseError(number, e.what());
        }
    }
    return frames;
}

Injection parse_injection(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(',', start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (parts.size() != 2 && parts.size() != 3) {
        throw std::invalid_argument("injection must be 'r,c' or 'r,c,H|V', got '" + std::string(text) + "'");
    }
    Injection inj;
    inj.site = {parse_int(parts[0]), parse_int(parts[1])};
    if (inj.site.row < 0 || inj.site.col < 0) throw std::invalid_argument("injection coordinates must be non-negative");
    if (parts.size() == 3) {
        if (parts[2] == "H") {
            inj.edge = Orientation::H;
        } else if (parts[2] == "V") {
            inj.edge = Orientation::V;
        } else {
            throw std::invalid_argument("injection edge must be H or V");
        }
    }
    return inj;
}

std::string format_injection(const Injection& inj) {
    std::string out = std::to_string(inj.site.row) + "," + std::to_string(inj.site.col);
    if (inj.edge) out += *inj.edge == Orientation::H ? ",H" : ",V";
    return out;
}

void TraceConfig::validate() const {
    check_distance(d);
    if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    NoiseParams{eps_d, eps_m}.validate();
    RuleParams p;
    p.d = d;
    p.stack_bound = stack_bound;
    p.validate();
    for (const auto& inj : injections) {
        if (inj.site.row < 0 || inj.site.row >= d || inj.site.col < 0 || inj.site.col >= d) {
            throw std::invalid_argument("injection " + format_injection(inj) + " lies outside the lattice");
        }
    }
}

void run_trace(const TraceConfig& config, const std::function<void(const TraceFrame&)>& sink) {
    config.validate();
    const int d = config.d;
    RuleParams params;
    params.d = d;
    params.stack_bound = config.stack_bound;
    Automaton automaton(params);
    // Same draws, in the same order, as trial 0 of a batch with this seed.
    RandomStream stream(config.seed, 0);
    const auto data_p = BernoulliThreshold::from_probability(config.eps_d);
    const auto meas_p = BernoulliThreshold::from_probability(config.eps_m);
    const std::size_t n_edges = 2 * static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
    const std::size_t n_vertices = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
    Chain error(d);
    std::vector<std::size_t> picks;

    for (int t = 1; t <= config.rounds; ++t) {
        sample_flips(n_edges, data_p, stream, picks);
        for (auto e : picks) error.flip_index(e);
        if (t == 1) {
            for (const auto& inj : config.injections) {
                if (inj.edge) error.flip({*inj.edge, inj.site});
            }
        }
        Syndrome measured = boundary(error);
        sample_flips(n_vertices, meas_p, stream, picks);
        for (auto v : picks) measured.flip_index(v);
        if (t == 1) {
            for (const auto& inj : config.injections) {
                if (!inj.edge) measured.flip(inj.site);
            }
        }
        if (!config.substeps) {
            const Chain correction = automaton.iterate(measured);
            error ^= correction;
            sink(capture_frame(automaton, t, correction));
            continue;
        }
        const Chain none(d);
        automaton.load_syndrome(measured);
        sink(capture_frame(automaton, t, none, "measure"));
        const Chain matched = automaton.step_match();
        sink(capture_frame(automaton, t, matched, "match"));
        automaton.step_signals();
        sink(capture_frame(automaton, t, none, "signals"));
        const Chain moved = automaton.step_attract();
        sink(capture_frame(automaton, t, moved, "attract"));
        automaton.step_cleanup();
        sink(capture_frame(automaton, t, none, "cleanup"));
        error ^= matched;
        error ^= moved;
    }
}

}  // namespace sigrule
