#include "gedmd/io.hpp"

#include "gedmd/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gedmd {

std::string format_double(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string csv_escape(const std::string& field)
{
    if (field.find_first_of(",\"\r\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header))
{
    if (header_.empty())
        throw InputError("CsvTable: empty header");
}

void CsvTable::add_row(std::vector<CsvCell> row)
{
    if (row.size() != header_.size())
        throw InputError("CsvTable: row has " + std::to_string(row.size()) + " fields, header has " +
                         std::to_string(header_.size()));
    rows_.push_back(std::move(row));
}

std::string CsvTable::str() const
{
    std::ostringstream out;
    for (std::size_t i = 0; i < header_.size(); ++i)
        out << (i ? "," : "") << csv_escape(header_[i]);
    out << '\n';
    for (const auto& row : rows_) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                out << ',';
            std::visit(
                [&out](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>)
                        out << format_double(v);
                    else if constexpr (std::is_same_v<T, long long>)
                        out << v;
                    else
                        out << csv_escape(v);
                },
                row[i]);
        }
        out << '\n';
    }
    return out.str();
}

void CsvTable::write(const std::filesystem::path& path) const
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error("cannot write " + path.string());
    f << str();
}

CsvTable matrix_table(const MatrixXd& a, const std::vector<std::string>& columns, const std::string& index)
{
    std::vector<std::string> header;
    if (!index.empty())
        header.push_back(index);
    header.insert(header.end(), columns.begin(), columns.end());
    if (static_cast<Eigen::Index>(columns.size()) != a.cols())
        throw InputError("matrix_table: column names do not match the matrix");
    CsvTable t(header);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        std::vector<CsvCell> row;
        if (!index.empty())
            row.emplace_back(static_cast<long long>(i));
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            row.emplace_back(a(i, j));
        t.add_row(std::move(row));
    }
    return t;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace gedmd
