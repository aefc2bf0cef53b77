#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>

namespace cpvi {

/// %.17g so every double round-trips exactly.
std::string format_real(double v);

class CsvWriter {
public:
    CsvWriter(const std::string& path, std::string_view header);

    void row(std::initializer_list<double> values);
    /// Row whose second column is text (tau,metric,value).
    void row(double tau, std::string_view label, double value);

private:
    std::ofstream out_;
    std::string path_;
};

void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

}  // namespace cpvi
