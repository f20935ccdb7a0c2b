#include "twomem/gridfile.hpp"

#include <charconv>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "twomem/errors.hpp"

namespace twomem {

namespace {

constexpr std::string_view kMagic = "# twomem ";
constexpr std::string_view kConfigPrefix = "#cfg ";
constexpr std::string_view kColumnsPrefix = "# columns: ";

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view text) {
    text = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        // from_chars rejects "inf"/"nan" spellings produced by fmt
        if (text == "inf") return std::numeric_limits<double>::infinity();
        if (text == "-inf") return -std::numeric_limits<double>::infinity();
        if (text == "nan" || text == "-nan") return std::numeric_limits<double>::quiet_NaN();
        throw Error(fmt::format("malformed number '{}'", text));
    }
    return value;
}

}  // namespace

std::string format_number(double value) { return fmt::format("{}", value); }

const std::string* TableHeader::find(std::string_view key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return &v;
    return nullptr;
}

TableWriter::TableWriter(const std::filesystem::path& path, const TableHeader& header)
    : out_(path), width_(header.columns.size()), path_(path) {
    if (!out_) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    out_ << kMagic << header.kind << " v1\n";
    for (const auto& [key, value] : header.meta) out_ << "# " << key << " = " << value << '\n';
    for (const auto& line : header.config_lines) out_ << kConfigPrefix << line << '\n';
    out_ << kColumnsPrefix;
    for (std::size_t i = 0; i < header.columns.size(); ++i) out_ << (i ? "," : "") << header.columns[i];
    out_ << '\n';
}

void TableWriter::row(std::span<const double> values) {
    if (values.size() != width_)
        throw Error(fmt::format("row has {} values, table '{}' has {} columns", values.size(), path_.string(),
                                width_));
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) line += ',';
        line += format_number(values[i]);
    }
    line += '\n';
    out_ << line;
}

void TableWriter::close() {
    out_.close();
    if (!out_) throw Error(fmt::format("failed writing '{}'", path_.string()));
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.columns.size(); ++i)
        if (header.columns[i] == name) return i;
    throw Error(fmt::format("no column '{}'", name));
}

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
    Table table;
    std::string line;
    if (!std::getline(in, line) || !line.starts_with(kMagic))
        throw Error(fmt::format("'{}' is not a twomem table", path.string()));
    {
        auto rest = std::string_view(line).substr(kMagic.size());
        const auto space = rest.rfind(' ');
        table.header.kind = std::string(rest.substr(0, space));
    }
    while (std::getline(in, line)) {
        if (line.starts_with(kConfigPrefix)) {
            table.header.config_lines.push_back(line.substr(kConfigPrefix.size()));
        } else if (line.starts_with(kColumnsPrefix)) {
            table.header.columns = split(std::string_view(line).substr(kColumnsPrefix.size()), ',');
        } else if (line.starts_with("#")) {
            auto body = std::string_view(line).substr(1);
            const auto eq = body.find(" = ");
            if (eq != std::string_view::npos)
                table.header.meta.emplace_back(std::string(trim(body.substr(0, eq))),
                                               std::string(trim(body.substr(eq + 3))));
        } else if (!trim(line).empty()) {
            std::vector<double> row;
            for (const auto& cell : split(line, ',')) row.push_back(parse_double(cell));
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

}  // namespace twomem
