#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace geminet::pipeline {

/// Header plus string cells; every row has the header's width.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

/// Plain comma-separated text without quoting. Throws ParseError on ragged
/// rows and DataError when there is no data row.
CsvTable parse_csv(std::string_view text, const std::string& source = "<csv>");
CsvTable read_csv(const std::filesystem::path& path);

struct PlotOptions {
    std::string x;               // default: first column
    std::vector<std::string> y;  // default: every other numeric column
    std::string title;
    std::string x_label;         // default: the x column name
    std::string y_label;
    int width = 720;
    int height = 480;
};

/// Standalone SVG line plot with one polyline per y series. Empty cells are
/// skipped. Output depends only on the inputs (fixed number formatting).
std::string render_svg(const CsvTable& table, const PlotOptions& opt);

}  // namespace geminet::pipeline
