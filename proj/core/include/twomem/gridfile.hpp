#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace twomem {

/// Self-describing comma-separated table:
///
///     # twomem <kind> v1
///     # <key> = <value>          (metadata, any number)
///     #cfg <config line>         (resolved run configuration, any number)
///     # columns: c1,c2,...
///     v11,v12,...
///
/// Values are written in shortest round-trip decimal form.
struct TableHeader {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> config_lines;
    std::vector<std::string> columns;

    const std::string* find(std::string_view key) const;
};

class TableWriter {
public:
    TableWriter(const std::filesystem::path& path, const TableHeader& header);

    void row(std::span<const double> values);
    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
    void close();

private:
    std::ofstream out_;
    std::size_t width_;
    std::filesystem::path path_;
};

struct Table {
    TableHeader header;
    std::vector<std::vector<double>> rows;

    std::size_t column(std::string_view name) const;
};

Table read_table(const std::filesystem::path& path);

/// Shortest round-trip decimal text of a double.
std::string format_number(double value);

}  // namespace twomem
