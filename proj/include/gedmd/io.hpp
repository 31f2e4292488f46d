#pragma once

#include "gedmd/linalg.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace gedmd {

/// Shortest round-trip decimal form (%.17g); "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double value);

/// RFC-4180 field: quoted when it contains a comma, quote, CR or LF.
std::string csv_escape(const std::string& field);

using CsvCell = std::variant<double, long long, std::string>;

/// Header plus rows, written with CRLF-free "\n" line endings.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(std::vector<CsvCell> row);
    std::size_t rows() const { return rows_.size(); }
    const std::vector<std::string>& header() const { return header_; }

    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<CsvCell>> rows_;
};

/// Matrix as CSV with the given column names (row index in the first column when `index` is set).
CsvTable matrix_table(const MatrixXd& a, const std::vector<std::string>& columns, const std::string& index = {});

/// UTF-8 JSON with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace gedmd
