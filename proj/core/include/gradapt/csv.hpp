#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gradapt {

/// Formats a double with 17 significant digits (round-trips exactly).
std::string fmt_g17(double v);

/// RFC-4180-style table: header row required, quoted fields and embedded
/// commas/newlines supported, UTF-8 passed through.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
    /// Column index or a descriptive error naming the column.
    int require_column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in, const std::string& origin = "csv");
CsvTable read_csv_file(const std::string& filename);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Numeric parse with an error message naming the column and row.
double parse_csv_number(const std::string& field, const std::string& column, std::size_t row);

}  // namespace gradapt
