#pragma once
// CSV ingestion for user-supplied observational data.
// Header row required, UTF-8, '.' decimal, no missing values.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "claga/dataset.hpp"
#include "claga/errors.hpp"

namespace claga {

struct CsvSchema {
    std::vector<std::string> feature_columns;
    std::string w_column = "w";
    std::string y_column = "y";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    if (begin == end)
        throw ParseError("empty cell at row " + std::to_string(row) + ", column '" + col + "'");
    double value = 0.0;
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ParseError("non-numeric cell '" + std::string(begin, end) + "' at row " +
                         std::to_string(row) + ", column '" + col + "'");
    return value;
}

}  // namespace detail

inline ObservedDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path);
    auto header = detail::split_csv_line(line);
    for (auto& h : header) {
        while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
    }

    auto column_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        throw ParseError("missing column '" + name + "' in " + path);
    };

    const std::size_t wj = column_index(schema.w_column);
    const std::size_t yj = column_index(schema.y_column);
    std::vector<std::size_t> fj;
    for (const auto& name : schema.feature_columns) fj.push_back(column_index(name));
    if (fj.empty()) throw ConfigError("load_csv: schema must name at least one feature column");

    std::vector<double> xs;
    std::vector<int> w;
    std::vector<double> y;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError("row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
        const double wv = detail::parse_cell(cells[wj], row, schema.w_column);
        if (wv != 0.0 && wv != 1.0)
            throw ParseError("non-binary w value '" + cells[wj] + "' at row " +
                             std::to_string(row));
        w.push_back(static_cast<int>(wv));
        y.push_back(detail::parse_cell(cells[yj], row, schema.y_column));
        for (std::size_t j : fj) xs.push_back(detail::parse_cell(cells[j], row, header[j]));
    }
    if (w.empty()) throw ParseError("empty dataset: " + path);

    ObservedDataset ds;
    ds.x = CovariateMatrix(w.size(), fj.size(), std::move(xs));
    ds.w = std::move(w);
    ds.y = std::move(y);
    ds.validate();
    return ds;
}

}  // namespace claga
