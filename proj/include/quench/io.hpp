// ============================================================================
// quench/io.hpp - CSV tables and field snapshots
//
// CSV: comma separated, one header line, numbers printed with %.17g (round-trip
// exact, negative zero printed as 0), integers verbatim, strings quoted when
// they contain a comma or a quote.
//
// Snapshots: <dir>/<field>_<step:06d>.bin holds nx*ny little-endian float64
// values, row-major with x fastest; the sidecar <dir>/<field>_<step:06d>.hdr is
// text, one "key value" per line: nx, ny, lx, ly, t, field.
// ============================================================================
#pragma once

#include "quench/grid.hpp"

#include <cstdio>
#include <string>
#include <variant>
#include <vector>

namespace quench {

class IoError : public Error {
public:
    using Error::Error;
};

std::string format_double(double v);

class CsvWriter {
public:
    using Cell = std::variant<double, long long, std::string>;

    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<Cell>& cells);
    void close();

private:
    std::FILE* fp_ = nullptr;
    std::string path_;
    std::size_t columns_;
};

/// Reads a CSV written by CsvWriter: header and rows as strings.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

struct SnapshotHeader {
    int nx = 0, ny = 0;
    double lx = 0.0, ly = 0.0;
    double t = 0.0;
    std::string field;
};

std::string snapshot_stem(const std::string& dir, const std::string& field, int step);

/// Writes the .bin/.hdr pair and returns the .bin path.
std::string write_snapshot(const std::string& dir, const std::string& field, int step, double t, const Field& f);

struct Snapshot {
    SnapshotHeader header;
    Field values;
};

/// `bin_path` may name the .bin or the .hdr; the other is found by extension.
Snapshot read_snapshot(const std::string& bin_path);

/// Writes every stride-th node and the last one; stride 0 disables output.
void write_series(const std::string& dir, const std::string& field, const TimeSeries& s, const TimeGrid& tg,
                  int stride);

void ensure_directory(const std::string& dir);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

} // namespace quench
