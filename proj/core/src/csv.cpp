#include "gradapt/csv.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace gradapt {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int CsvTable::require_column(const std::string& name) const {
    int c = column(name);
    if (c < 0) throw std::runtime_error("csv: missing column '" + name + "'");
    return c;
}

namespace {

// One record, honoring quoted fields (which may contain commas, quotes and
// newlines). Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    int ch = in.get();
    if (ch == EOF) return false;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    while (ch != EOF) {
        any = true;
        char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field.push_back(c);
        }
        ch = in.get();
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

}  // namespace

CsvTable read_csv(std::istream& in, const std::string& origin) {
    CsvTable t;
    if (!read_record(in, t.header) || t.header.empty())
        throw std::runtime_error(origin + ": missing header row");
    std::vector<std::string> fields;
    std::size_t line = 1;
    while (read_record(in, fields)) {
        ++line;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != t.header.size())
            throw std::runtime_error(origin + ": row " + std::to_string(line) + " has " +
                                     std::to_string(fields.size()) + " fields, header has " +
                                     std::to_string(t.header.size()));
        t.rows.push_back(fields);
    }
    return t;
}

CsvTable read_csv_file(const std::string& filename) {
    std::ifstream in(filename, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open csv file: " + filename);
    return read_csv(in, filename);
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n\r") != std::string::npos) {
            out << '"';
            for (char c : f) {
                if (c == '"') out << '"';
                out << c;
            }
            out << '"';
        } else {
            out << f;
        }
    }
    out << '\n';
}

double parse_csv_number(const std::string& field, const std::string& column, std::size_t row) {
    try {
        std::size_t pos = 0;
        double v = std::stod(field, &pos);
        while (pos < field.size() && (field[pos] == ' ' || field[pos] == '\t')) ++pos;
        if (pos != field.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("csv: column '" + column + "', row " + std::to_string(row) +
                                 ": not a number: '" + field + "'");
    }
}

}  // namespace gradapt
