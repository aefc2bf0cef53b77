#include "cpvi/csv.hpp"

#include <cstdio>
#include <sstream>

#include "cpvi/error.hpp"

namespace cpvi {

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, std::string_view header) : out_(path), path_(path) {
    if (!out_) fail(ErrorCode::Io, "cannot open " + path + " for writing");
    out_ << header << '\n';
}

void CsvWriter::row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) out_ << ',';
        out_ << format_real(v);
        first = false;
    }
    out_ << '\n';
    if (!out_) fail(ErrorCode::Io, "write failed: " + path_);
}

void CsvWriter::row(double tau, std::string_view label, double value) {
    out_ << format_real(tau) << ',' << label << ',' << format_real(value) << '\n';
    if (!out_) fail(ErrorCode::Io, "write failed: " + path_);
}

void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot open " + path + " for writing");
    out << content;
    if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cpvi
