#include "quench/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace quench {

namespace fs = std::filesystem;

std::string format_double(double v) {
    if (v == 0.0) v = 0.0; // drop the sign of zero
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

} // namespace

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
    fp_ = std::fopen(path.c_str(), "w");
    if (!fp_) throw IoError("cannot open " + path + " for writing");
    for (std::size_t k = 0; k < header.size(); ++k) std::fprintf(fp_, k ? ",%s" : "%s", header[k].c_str());
    std::fputc('\n', fp_);
}

CsvWriter::~CsvWriter() {
    if (fp_) std::fclose(fp_);
}

void CsvWriter::row(const std::vector<Cell>& cells) {
    if (!fp_) throw IoError(path_ + ": write after close");
    if (cells.size() != columns_) throw IoError(path_ + ": row width does not match the header");
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) std::fputc(',', fp_);
        if (const auto* d = std::get_if<double>(&cells[k]))
            std::fputs(format_double(*d).c_str(), fp_);
        else if (const auto* i = std::get_if<long long>(&cells[k]))
            std::fprintf(fp_, "%lld", *i);
        else
            std::fputs(quote(std::get<std::string>(cells[k])).c_str(), fp_);
    }
    std::fputc('\n', fp_);
}

void CsvWriter::close() {
    if (fp_ && std::fclose(fp_) != 0) throw IoError("error closing " + path_);
    fp_ = nullptr;
}

CsvTable read_csv(const std::string& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    if (!std::getline(in, line)) throw IoError(path + ": empty CSV");
    t.header = split(line);
    while (std::getline(in, line))
        if (!line.empty()) t.rows.push_back(split(line));
    return t;
}

std::string snapshot_stem(const std::string& dir, const std::string& field, int step) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%06d", step);
    return (fs::path(dir) / (field + buf)).string();
}

std::string write_snapshot(const std::string& dir, const std::string& field, int step, double t, const Field& f) {
    ensure_directory(dir);
    const std::string stem = snapshot_stem(dir, field, step);
    const Grid& g = f.grid();

    std::ostringstream hdr;
    hdr << "nx " << g.nx << "\nny " << g.ny << "\nlx " << format_double(g.lx) << "\nly " << format_double(g.ly)
        << "\nt " << format_double(t) << "\nfield " << field << "\n";
    write_text(stem + ".hdr", hdr.str());

    std::vector<unsigned char> bytes(f.size() * 8);
    for (std::size_t k = 0; k < f.size(); ++k) {
        auto bits = std::bit_cast<std::uint64_t>(f[k]);
        for (int b = 0; b < 8; ++b) bytes[8 * k + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    std::ofstream out(stem + ".bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + stem + ".bin");
    return stem + ".bin";
}

Snapshot read_snapshot(const std::string& path) {
    fs::path stem(path);
    stem.replace_extension();
    const std::string bin = stem.string() + ".bin", hdr = stem.string() + ".hdr";

    Snapshot s;
    std::istringstream in(read_text(hdr));
    std::string key;
    int seen = 0;
    while (in >> key) {
        if (key == "nx") in >> s.header.nx;
        else if (key == "ny") in >> s.header.ny;
        else if (key == "lx") in >> s.header.lx;
        else if (key == "ly") in >> s.header.ly;
        else if (key == "t") in >> s.header.t;
        else if (key == "field") in >> s.header.field;
        else throw IoError(hdr + ": unknown key '" + key + "'");
        if (!in) throw IoError(hdr + ": bad value for '" + key + "'");
        ++seen;
    }
    if (seen < 6) throw IoError(hdr + ": incomplete header");

    const Grid g(s.header.nx, s.header.ny, s.header.lx, s.header.ly);
    std::ifstream bin_in(bin, std::ios::binary);
    if (!bin_in) throw IoError("cannot open " + bin);
    std::vector<unsigned char> bytes(g.size() * 8);
    bin_in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (bin_in.gcount() != static_cast<std::streamsize>(bytes.size()) || bin_in.peek() != EOF)
        throw IoError(bin + ": size does not match " + std::to_string(g.nx) + "x" + std::to_string(g.ny));
    std::vector<double> v(g.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[8 * k + b]) << (8 * b);
        v[k] = std::bit_cast<double>(bits);
    }
    s.values = Field(g, std::move(v));
    return s;
}

void write_series(const std::string& dir, const std::string& field, const TimeSeries& s, const TimeGrid& tg,
                  int stride) {
    if (stride <= 0) return;
    for (int n = 0; n <= tg.nt; ++n)
        if (n % stride == 0 || n == tg.nt) write_snapshot(dir, field, n, tg.t(n), s.at(n));
}

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw IoError("cannot write " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace quench
