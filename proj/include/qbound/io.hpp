#pragma once

// Flat-file outputs: CSV tables (17 significant digits, complex values as
// re,im column pairs), whitespace-separated plot blocks and JSON reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qbound/config.hpp"
#include "qbound/types.hpp"

namespace qbound::io {

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  return f;
}

inline void close_checked(std::ofstream& f, const std::filesystem::path& p) {
  f.close();
  if (!f) throw IoError("write failed for " + p.string());
}

/// Column-oriented table; complex columns expand to name_re, name_im.
class CsvTable {
 public:
  void add_column(const std::string& name, std::vector<double> values) {
    header_.push_back(name);
    cols_.push_back(std::move(values));
  }
  void add_column(const std::string& name, const std::vector<cplx>& values) {
    std::vector<double> re, im;
    for (const auto& z : values) {
      re.push_back(z.real());
      im.push_back(z.imag());
    }
    add_column(name + "_re", std::move(re));
    add_column(name + "_im", std::move(im));
  }

  void write(const std::filesystem::path& p) const {
    size_t rows = 0;
    for (const auto& c : cols_) rows = std::max(rows, c.size());
    auto f = open_out(p);
    for (size_t j = 0; j < header_.size(); ++j) f << (j ? "," : "") << header_[j];
    f << "\n";
    for (size_t r = 0; r < rows; ++r) {
      for (size_t j = 0; j < cols_.size(); ++j) {
        if (j) f << ",";
        if (r < cols_[j].size()) f << format_double(cols_[j][r]);
      }
      f << "\n";
    }
    close_checked(f, p);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> cols_;
};

/// One block per curve, rows of whitespace-separated numbers, blocks
/// separated by a blank line. `comment` lines are prefixed with '#'.
inline void write_dat(const std::filesystem::path& p, const std::vector<std::vector<std::vector<double>>>& blocks,
                      const std::vector<std::string>& comment = {}) {
  auto f = open_out(p);
  for (const auto& c : comment) f << "# " << c << "\n";
  for (size_t b = 0; b < blocks.size(); ++b) {
    if (b) f << "\n";
    for (const auto& row : blocks[b]) {
      for (size_t j = 0; j < row.size(); ++j) f << (j ? " " : "") << format_double(row[j]);
      f << "\n";
    }
  }
  close_checked(f, p);
}

inline void write_json(const std::filesystem::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << "\n";
  close_checked(f, p);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace qbound::io
