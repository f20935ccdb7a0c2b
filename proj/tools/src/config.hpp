#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "twomem/dynamics.hpp"
#include "twomem/model.hpp"

namespace twomem::cli {

/// What a config value means and which unit suffixes it accepts.
enum class ValueKind {
    Frequency,  ///< Hz, kHz, MHz, GHz (times 2 pi) or rad/s
    Rate,       ///< 1/s
    Length,     ///< m, cm, mm, um, nm
    Position,   ///< lambda or any length unit
    Density,    ///< kg/m^3, g/cm^3
    Power,      ///< W, mW, uW, nW
    Angle,      ///< rad, deg
    Number,     ///< plain number, no unit
    Integer,
    Count,
    Flag,
    Choice,
    List,  ///< comma-separated words
    Text,
};

struct KeySpec {
    std::string section;
    std::string key;
    ValueKind kind;
    std::string fallback;
    /// Allowed words for Choice and List; "none" marks an optional value.
    std::vector<std::string> choices = {};
    bool optional = false;
};

/// Every accepted section.key with its default, in output order.
const std::vector<KeySpec>& schema();

/// Config document after defaults and overrides. Values stay as text so the
/// resolved form reproduces the run exactly when fed back in.
class RunConfig {
public:
    /// Defaults only.
    RunConfig();

    /// Reads an INI-style file. A result table written by this tool is also
    /// accepted; its embedded `#cfg` lines are used.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(std::string_view text, std::string_view origin = "<text>");

    /// `section.key=value`; throws ConfigError on unknown keys or bad values.
    void set(std::string_view assignment);
    void set(const std::string& path, const std::string& value);

    bool is_none(const std::string& path) const;
    double frequency(const std::string& path) const;
    double rate(const std::string& path) const;
    double length(const std::string& path) const;
    /// Position in metres; `lambda` suffix uses physical.lambda.
    double position(const std::string& path) const;
    double density(const std::string& path) const;
    double power(const std::string& path) const;
    double angle(const std::string& path) const;
    double number(const std::string& path) const;
    std::int64_t integer(const std::string& path) const;
    std::uint64_t count(const std::string& path) const;
    bool flag(const std::string& path) const;
    std::string text(const std::string& path) const;
    std::vector<std::string> list(const std::string& path) const;

    /// `[section]` / `key = value` lines of the full resolved document.
    std::vector<std::string> resolved_lines() const;
    /// Throws ConfigError naming the first key whose value does not parse.
    void validate() const;

private:
    const std::string& raw(const std::string& path, ValueKind expected) const;
    std::map<std::string, std::string> values_;
};

/// Numeric value with its unit, e.g. "235.5 kHz" -> {235.5, "kHz"}.
struct Quantity {
    double value = 0.0;
    std::string unit;
};
Quantity split_quantity(std::string_view text);

/// Physical constants, placement and detuning resolved from the config. The
/// drive detuning is taken from the membrane-shifted resonance.
struct Setup {
    PhysicalParams params;
    double Q1 = 0.0, Q2 = 0.0;
    CouplingSet couplings;
    DriveSpec drive;
};

PhysicalParams physical_params(const RunConfig& config);
Setup resolve_setup(const RunConfig& config);
std::vector<ModelTier> tiers(const RunConfig& config, const std::string& path);

}  // namespace twomem::cli
