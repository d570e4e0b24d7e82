#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <fmt/format.h>

#include "grushin_lab/potential.hpp"
#include "grushin_lab/schrodinger.hpp"
#include "grushin_lab/verify.hpp"

namespace grushin_lab {

// {"family":"power","d":1.5}, {"family":"tabulated","x":[...],"v":[...]}, ...
// with optional "amplitude" and "dilation". Unknown keys are rejected.
PotentialSpec potential_from_json(std::string_view text);
PotentialSpec load_potential(const std::filesystem::path& path);
std::string potential_to_json(const PotentialSpec& spec);

std::string certificate_to_json(const ClassCertificate& c);
std::string report_to_json(const BoundReport& r);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

// CSV with LF endings; reals as {:.10g}.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);

  template <class... Ts>
  void row(const Ts&... values) {
    std::size_t i = 0;
    ((buf_ += (i++ ? "," : ""), append(values)), ...);
    buf_ += '\n';
  }
  const std::string& str() const { return buf_; }

 private:
  template <class T>
  void append(const T& v) {
    if constexpr (std::is_floating_point_v<T>)
      fmt::format_to(std::back_inserter(buf_), "{:.10g}", v);
    else
      fmt::format_to(std::back_inserter(buf_), "{}", v);
  }
  std::string buf_;
};

// Row-major grid: two little-endian uint64 (rows, cols) then the values as
// little-endian float64.
struct Grid {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> values;
};
void write_grid(const std::filesystem::path& path, const Grid& g);
Grid read_grid(const std::filesystem::path& path);

// Eigenpair files: length-prefixed float64 arrays {n, E, residual,
// norm_defect}, grid, v, psi, dpsi.
void save_pair(const std::filesystem::path& path, const EigenPair& p);
EigenPair load_pair(const std::filesystem::path& path);

// eigenfunction() backed by a directory cache keyed by (potential hash, n,
// config hash). Without a directory, the GRUSHIN_LAB_CACHE variable is used;
// if that is unset too, nothing is cached.
EigenPair cached_eigenfunction(const Potential& V, int n, const EigenSolveConfig& cfg = {},
                               std::optional<std::filesystem::path> dir = std::nullopt);

}  // namespace grushin_lab
