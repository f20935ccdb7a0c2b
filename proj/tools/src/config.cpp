#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "twomem/constants.hpp"
#include "twomem/errors.hpp"

namespace twomem::cli {

namespace {

using K = ValueKind;

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

const KeySpec* find_key(std::string_view path) {
    for (const auto& k : schema())
        if (path.size() == k.section.size() + 1 + k.key.size() && path.starts_with(k.section) &&
            path[k.section.size()] == '.' && path.ends_with(k.key))
            return &k;
    return nullptr;
}

struct UnitEntry {
    std::string_view name;
    double factor;
};

double scale_unit(const std::string& path, const Quantity& q, std::initializer_list<UnitEntry> units) {
    for (const auto& u : units)
        if (q.unit == u.name) return q.value * u.factor;
    std::string names;
    for (const auto& u : units) names += (names.empty() ? "" : ", ") + std::string(u.name);
    if (q.unit.empty()) throw ConfigError(fmt::format("{}: missing unit (one of {})", path, names));
    throw ConfigError(fmt::format("{}: unknown unit '{}' (one of {})", path, q.unit, names));
}

const char* kind_name(ValueKind k) {
    switch (k) {
        case K::Frequency: return "frequency";
        case K::Rate: return "rate";
        case K::Length: return "length";
        case K::Position: return "position";
        case K::Density: return "density";
        case K::Power: return "power";
        case K::Angle: return "angle";
        case K::Number: return "number";
        case K::Integer: return "integer";
        case K::Count: return "count";
        case K::Flag: return "flag";
        case K::Choice: return "choice";
        case K::List: return "list";
        case K::Text: return "text";
    }
    return "value";
}

}  // namespace

const std::vector<KeySpec>& schema() {
    static const std::vector<KeySpec> keys = {
        {"physical", "omega1", K::Frequency, "235 kHz"},
        {"physical", "omega2", K::Frequency, "236 kHz"},
        {"physical", "gamma1", K::Frequency, "1 Hz"},
        {"physical", "gamma2", K::Frequency, "10 Hz"},
        {"physical", "kappa_in", K::Frequency, "50 kHz"},
        {"physical", "kappa_ex", K::Frequency, "100 kHz"},
        {"physical", "n", K::Number, "2.17"},
        {"physical", "L", K::Length, "9 cm"},
        {"physical", "lambda", K::Length, "1064 nm"},
        {"physical", "Lz", K::Length, "104 nm"},
        {"physical", "Lx1", K::Length, "1.519 mm"},
        {"physical", "Ly1", K::Length, "1.536 mm"},
        {"physical", "Lx2", K::Length, "1.522 mm"},
        {"physical", "Ly2", K::Length, "1.525 mm"},
        {"physical", "rho", K::Density, "3100 kg/m^3"},
        {"physical", "branch_l", K::Integer, "0"},
        {"physical", "nbar_a", K::Number, "0"},
        {"physical", "nbar_1", K::Number, "0"},
        {"physical", "nbar_2", K::Number, "0"},
        {"physical", "reflectivity", K::Number, "none", {}, true},
        {"physical", "reflectivity_phase", K::Angle, "0 rad"},

        {"placement", "Q1", K::Position, "0.562 lambda"},
        {"placement", "Q2", K::Position, "0.440 lambda"},

        {"drive", "kind", K::Choice, "single_tone", {"single_tone", "two_tone"}},
        {"drive", "detuning", K::Frequency, "235.5 kHz"},
        {"drive", "power", K::Power, "1 mW", {}, true},
        {"drive", "rate", K::Rate, "none", {}, true},
        {"drive", "rate1", K::Rate, "none", {}, true},
        {"drive", "rate2", K::Rate, "none", {}, true},
        {"drive", "sideband1", K::Frequency, "none", {}, true},
        {"drive", "sideband2", K::Frequency, "none", {}, true},

        {"noise", "enabled", K::Flag, "false"},
        {"noise", "seed", K::Count, "1"},

        {"integration", "tier", K::Choice, "full", {"first_order", "second_order", "full"}},
        {"integration", "dtau", K::Number, "0.005"},
        {"integration", "tau_end", K::Number, "1000"},
        {"integration", "stride", K::Count, "10"},
        {"integration", "initial_q1", K::Number, "1"},
        {"integration", "initial_q2", K::Number, "1"},
        {"integration", "ordering", K::Number, "0.5"},

        {"analysis", "grid", K::Count, "256"},
        {"analysis", "q_min", K::Position, "0.25 lambda"},
        {"analysis", "q_max", K::Position, "0.75 lambda"},
        {"analysis", "threshold", K::Number, "3.1622776601683795e-8"},
        {"analysis", "region_fraction", K::Number, "0.1"},
        {"analysis", "envelope", K::Flag, "true"},
        {"analysis", "smoothing_periods", K::Number, "10"},
        {"analysis", "envelope_periods", K::Number, "1"},
        {"analysis", "tau_start", K::Number, "2e6"},
        {"analysis", "tau_window", K::Number, "5e5"},
        {"analysis", "tiers", K::List, "full, first_order", {"first_order", "second_order", "full"}},
        {"analysis", "delta_min", K::Frequency, "0.5 kHz"},
        {"analysis", "delta_max", K::Frequency, "30 kHz"},
        {"analysis", "delta_points", K::Count, "12"},
        {"analysis", "power_min", K::Power, "10 uW"},
        {"analysis", "power_max", K::Power, "100 mW"},
        {"analysis", "power_points", K::Count, "12"},
        {"analysis", "check_union", K::Number, "0.265"},
        {"analysis", "check_union_tolerance", K::Number, "0.02"},
        {"analysis", "check_max_error", K::Number, "none", {}, true},

        {"ensemble", "realizations", K::Count, "4000"},
        {"ensemble", "shard_size", K::Count, "1024"},
        {"ensemble", "tiers", K::List, "first_order", {"first_order", "second_order", "full"}},
        {"ensemble", "dtau", K::Number, "0.01"},
        {"ensemble", "tau_end", K::Number, "2000"},
        {"ensemble", "sample_every", K::Number, "10"},
        {"ensemble", "vacuum_initial", K::Flag, "true"},
        {"ensemble", "meanfield", K::Flag, "true"},
        {"ensemble", "error_start", K::Number, "0"},
        {"ensemble", "histograms", K::List, "epr_plus, epr_minus", {"epr_plus", "epr_minus", "mode1", "mode2"}, true},
        {"ensemble", "histogram_h", K::Number, "0.05"},
        {"ensemble", "histogram_extent", K::Number, "5"},
        {"ensemble", "checkpoint", K::Text, "none", {}, true},
        {"ensemble", "resume", K::Flag, "false"},
    };
    return keys;
}

Quantity split_quantity(std::string_view text) {
    const auto s = trim(text);
    Quantity q;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, q.value);
    if (ec != std::errc() || ptr == first) throw ConfigError(fmt::format("'{}' is not a number", s));
    q.unit = std::string(trim(std::string_view(ptr, static_cast<std::size_t>(last - ptr))));
    return q;
}

RunConfig::RunConfig() {
    for (const auto& k : schema()) values_[k.section + "." + k.key] = k.fallback;
}

RunConfig RunConfig::parse(std::string_view text, std::string_view origin) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("{}:{}: {}", origin, e.line(), e.message()));
    }
    RunConfig config;
    for (const auto& [section, node] : tree) {
        if (node.empty()) throw ConfigError(fmt::format("{}: key '{}' outside a section", origin, section));
        for (const auto& [key, leaf] : node) config.set(section + "." + key, leaf.data());
    }
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    if (text.starts_with("# twomem ")) {
        std::string embedded;
        std::istringstream lines(text);
        for (std::string line; std::getline(lines, line);)
            if (line.starts_with("#cfg ")) embedded += line.substr(5) + '\n';
        if (embedded.empty()) throw ConfigError(fmt::format("{} carries no embedded config", path.string()));
        text = std::move(embedded);
    }
    return parse(text, path.string());
}

void RunConfig::set(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("override '{}' is not KEY=VALUE", assignment));
    set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
}

void RunConfig::set(const std::string& path, const std::string& value) {
    if (!find_key(path)) throw ConfigError(fmt::format("unknown key {}", path));
    const std::string old = values_[path];
    values_[path] = std::string(trim(value));
    try {
        validate();
    } catch (...) {
        values_[path] = old;
        throw;
    }
}

const std::string& RunConfig::raw(const std::string& path, ValueKind expected) const {
    const KeySpec* spec = find_key(path);
    if (!spec) throw ConfigError(fmt::format("unknown key {}", path));
    if (spec->kind != expected)
        throw ConfigError(fmt::format("{} holds a {}, not a {}", path, kind_name(spec->kind), kind_name(expected)));
    const auto& v = values_.at(path);
    if (v == "none") throw ConfigError(fmt::format("{} is not set", path));
    return v;
}

bool RunConfig::is_none(const std::string& path) const {
    if (!find_key(path)) throw ConfigError(fmt::format("unknown key {}", path));
    return values_.at(path) == "none";
}

double RunConfig::frequency(const std::string& path) const {
    const auto q = split_quantity(raw(path, K::Frequency));
    return scale_unit(path, q,
                      {{"Hz", kTwoPi}, {"kHz", kTwoPi * 1e3}, {"MHz", kTwoPi * 1e6}, {"GHz", kTwoPi * 1e9},
                       {"rad/s", 1.0}});
}

double RunConfig::rate(const std::string& path) const {
    return scale_unit(path, split_quantity(raw(path, K::Rate)), {{"1/s", 1.0}, {"/s", 1.0}, {"s^-1", 1.0}});
}

double RunConfig::length(const std::string& path) const {
    return scale_unit(path, split_quantity(raw(path, K::Length)),
                      {{"m", 1.0}, {"cm", 1e-2}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}});
}

double RunConfig::position(const std::string& path) const {
    const auto q = split_quantity(raw(path, K::Position));
    if (q.unit == "lambda") return q.value * length("physical.lambda");
    return scale_unit(path, q, {{"lambda", 0.0}, {"m", 1.0}, {"cm", 1e-2}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}});
}

double RunConfig::density(const std::string& path) const {
    return scale_unit(path, split_quantity(raw(path, K::Density)), {{"kg/m^3", 1.0}, {"g/cm^3", 1e3}});
}

double RunConfig::power(const std::string& path) const {
    return scale_unit(path, split_quantity(raw(path, K::Power)), {{"W", 1.0}, {"mW", 1e-3}, {"uW", 1e-6}, {"nW", 1e-9}});
}

double RunConfig::angle(const std::string& path) const {
    return scale_unit(path, split_quantity(raw(path, K::Angle)), {{"rad", 1.0}, {"deg", kPi / 180.0}});
}

double RunConfig::number(const std::string& path) const {
    const auto q = split_quantity(raw(path, K::Number));
    if (!q.unit.empty()) throw ConfigError(fmt::format("{}: takes a plain number, got unit '{}'", path, q.unit));
    return q.value;
}

std::int64_t RunConfig::integer(const std::string& path) const {
    const auto& v = raw(path, K::Integer);
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(fmt::format("{}: '{}' is not an integer", path, v));
    return out;
}

std::uint64_t RunConfig::count(const std::string& path) const {
    const auto& v = raw(path, K::Count);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", path, v));
    return out;
}

bool RunConfig::flag(const std::string& path) const {
    const auto& v = raw(path, K::Flag);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(fmt::format("{}: '{}' is neither true nor false", path, v));
}

std::string RunConfig::text(const std::string& path) const {
    const KeySpec* spec = find_key(path);
    if (spec && spec->kind == K::Choice) {
        const auto& v = values_.at(path);
        if (std::find(spec->choices.begin(), spec->choices.end(), v) == spec->choices.end())
            throw ConfigError(fmt::format("{}: '{}' is not one of {}", path, v, fmt::join(spec->choices, ", ")));
        return v;
    }
    return raw(path, K::Text);
}

std::vector<std::string> RunConfig::list(const std::string& path) const {
    const KeySpec* spec = find_key(path);
    if (spec && spec->optional && values_.at(path) == "none") return {};
    const auto& v = raw(path, K::List);
    std::vector<std::string> out;
    std::string_view rest = v;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto word = trim(rest.substr(0, comma));
        if (word.empty()) throw ConfigError(fmt::format("{}: empty list entry", path));
        if (std::find(spec->choices.begin(), spec->choices.end(), word) == spec->choices.end())
            throw ConfigError(fmt::format("{}: '{}' is not one of {}", path, word, fmt::join(spec->choices, ", ")));
        if (std::find(out.begin(), out.end(), word) != out.end())
            throw ConfigError(fmt::format("{}: '{}' listed twice", path, word));
        out.emplace_back(word);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    return out;
}

std::vector<std::string> RunConfig::resolved_lines() const {
    std::vector<std::string> lines;
    std::string section;
    for (const auto& k : schema()) {
        if (k.section != section) {
            section = k.section;
            lines.push_back("[" + section + "]");
        }
        lines.push_back(k.key + " = " + values_.at(k.section + "." + k.key));
    }
    return lines;
}

void RunConfig::validate() const {
    for (const auto& k : schema()) {
        const std::string path = k.section + "." + k.key;
        const auto& v = values_.at(path);
        if (v.empty()) throw ConfigError(fmt::format("{}: empty value", path));
        if (v == "none") {
            if (k.optional) continue;
            throw ConfigError(fmt::format("{}: a value is required", path));
        }
        switch (k.kind) {
            case K::Frequency: frequency(path); break;
            case K::Rate: rate(path); break;
            case K::Length: length(path); break;
            case K::Position: position(path); break;
            case K::Density: density(path); break;
            case K::Power: power(path); break;
            case K::Angle: angle(path); break;
            case K::Number: number(path); break;
            case K::Integer: integer(path); break;
            case K::Count: count(path); break;
            case K::Flag: flag(path); break;
            case K::Choice:
            case K::Text: text(path); break;
            case K::List: list(path); break;
        }
    }
}

PhysicalParams physical_params(const RunConfig& c) {
    PhysicalParams p;
    p.omega1 = c.frequency("physical.omega1");
    p.omega2 = c.frequency("physical.omega2");
    p.gamma1 = c.frequency("physical.gamma1");
    p.gamma2 = c.frequency("physical.gamma2");
    p.kappa_in = c.frequency("physical.kappa_in");
    p.kappa_ex = c.frequency("physical.kappa_ex");
    p.n_refr = c.number("physical.n");
    p.L = c.length("physical.L");
    p.lambda = c.length("physical.lambda");
    p.Lz = c.length("physical.Lz");
    p.Lx1 = c.length("physical.Lx1");
    p.Ly1 = c.length("physical.Ly1");
    p.Lx2 = c.length("physical.Lx2");
    p.Ly2 = c.length("physical.Ly2");
    p.rho = c.density("physical.rho");
    p.branch_l = static_cast<int>(c.integer("physical.branch_l"));
    p.nbar_a = c.number("physical.nbar_a");
    p.nbar_1 = c.number("physical.nbar_1");
    p.nbar_2 = c.number("physical.nbar_2");
    if (!c.is_none("physical.reflectivity"))
        p.reflectivity_override = Reflectivity{c.number("physical.reflectivity"), c.angle("physical.reflectivity_phase")};
    // placeholder until the placement fixes it relative to the shifted resonance
    p.Delta = p.omega_bar();
    try {
        p.validate();
    } catch (const DomainError& e) {
        throw ConfigError(fmt::format("physical: {}", e.what()));
    }
    return p;
}

Setup resolve_setup(const RunConfig& c) {
    Setup s;
    s.params = physical_params(c);
    s.Q1 = c.position("placement.Q1");
    s.Q2 = c.position("placement.Q2");
    try {
        s.params = with_shifted_detuning(s.params, s.Q1, s.Q2, c.frequency("drive.detuning"));
        s.couplings = coupling_coefficients(s.params, s.Q1, s.Q2);
    } catch (const DomainError& e) {
        throw ConfigError(fmt::format("placement: {}", e.what()));
    }

    auto exactly_one = [&](const char* a, const char* b) {
        const bool ha = !c.is_none(a), hb = !c.is_none(b);
        if (ha == hb) throw ConfigError(fmt::format("drive: set exactly one of {} and {}", a, b));
        return ha;
    };
    auto both_or_neither = [&](const char* a, const char* b) {
        const bool ha = !c.is_none(a), hb = !c.is_none(b);
        if (ha != hb) throw ConfigError(fmt::format("drive: {} and {} go together", a, b));
        return ha;
    };
    try {
        if (c.text("drive.kind") == "single_tone") {
            s.drive = exactly_one("drive.power", "drive.rate") ? DriveSpec::from_power(c.power("drive.power"), s.params)
                                                               : DriveSpec::single_tone(c.rate("drive.rate"));
        } else {
            const bool rates = both_or_neither("drive.rate1", "drive.rate2");
            const bool sidebands = both_or_neither("drive.sideband1", "drive.sideband2");
            if (rates == sidebands)
                throw ConfigError("drive: two_tone needs either rate1/rate2 or sideband1/sideband2");
            s.drive = rates ? DriveSpec::two_tone(c.rate("drive.rate1"), c.rate("drive.rate2"))
                            : DriveSpec::from_sideband_rates(c.frequency("drive.sideband1"),
                                                             c.frequency("drive.sideband2"), s.params, s.couplings);
        }
    } catch (const DomainError& e) {
        throw ConfigError(fmt::format("drive: {}", e.what()));
    }
    return s;
}

std::vector<ModelTier> tiers(const RunConfig& config, const std::string& path) {
    std::vector<ModelTier> out;
    for (const auto& name : config.list(path)) out.push_back(parse_tier(name));
    if (out.empty()) throw ConfigError(fmt::format("{}: at least one tier is required", path));
    return out;
}

}  // namespace twomem::cli
