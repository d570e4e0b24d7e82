#include "grushin_lab/io.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "grushin_lab/error.hpp"

namespace grushin_lab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_spec(const std::string& msg) { throw Error(ErrorKind::InvalidSpec, msg); }

void check_keys(const json& j, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) bad_spec("unknown key '" + key + "' in potential");
}

double number(const json& j, const char* key) {
  if (!j.contains(key)) bad_spec(std::string("potential needs '") + key + "'");
  if (!j[key].is_number()) bad_spec(std::string("'") + key + "' must be a number");
  return j[key].get<double>();
}

std::vector<double> numbers(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) bad_spec(std::string("'") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j[key]) {
    if (!v.is_number()) bad_spec(std::string("'") + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xff) << (8 * (7 - i));
    return r;
  }
  return v;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  const std::uint64_t le = to_le(v);
  os.write(reinterpret_cast<const char*>(&le), 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t le = 0;
  if (!is.read(reinterpret_cast<char*>(&le), 8)) throw Error(ErrorKind::IoError, "truncated binary file");
  return to_le(le);
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_array(std::ostream& os, const std::vector<double>& v) {
  put_u64(os, v.size());
  for (double x : v) put_f64(os, x);
}

std::vector<double> get_array(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (std::uint64_t{1} << 32)) throw Error(ErrorKind::IoError, "implausible array length");
  std::vector<double> v(n);
  for (auto& x : v) x = get_f64(is);
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  return is;
}

}  // namespace

PotentialSpec potential_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    bad_spec(std::string("potential is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) bad_spec("potential needs a 'family'");
  const std::string family = j["family"].get<std::string>();
  PotentialSpec spec;
  if (family == "power") {
    check_keys(j, {"family", "d", "amplitude", "dilation"});
    spec = power(number(j, "d"));
  } else if (family == "power_asym") {
    check_keys(j, {"family", "d", "a", "amplitude", "dilation"});
    spec = power_asym(number(j, "d"), number(j, "a"));
  } else if (family == "power_logperturbed") {
    check_keys(j, {"family", "d", "eps", "amplitude", "dilation"});
    spec = power_logperturbed(number(j, "d"), number(j, "eps"));
  } else if (family == "two_power") {
    check_keys(j, {"family", "d1", "d2", "amplitude", "dilation"});
    spec = two_power(number(j, "d1"), number(j, "d2"));
  } else if (family == "tabulated") {
    check_keys(j, {"family", "x", "v", "amplitude", "dilation"});
    spec = tabulated(numbers(j, "x"), numbers(j, "v"));
  } else {
    bad_spec("unknown potential family '" + family + "'");
  }
  if (j.contains("amplitude")) spec.amplitude = number(j, "amplitude");
  if (j.contains("dilation")) spec.dilation = number(j, "dilation");
  return spec;
}

PotentialSpec load_potential(const fs::path& path) { return potential_from_json(read_text(path)); }

std::string potential_to_json(const PotentialSpec& spec) {
  json j;
  j["family"] = to_string(spec.family());
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, PowerParams>) {
          j["d"] = p.d;
        } else if constexpr (std::is_same_v<P, PowerAsymParams>) {
          j["d"] = p.d;
          j["a"] = p.a;
        } else if constexpr (std::is_same_v<P, LogPerturbedParams>) {
          j["d"] = p.d;
          j["eps"] = p.eps;
        } else if constexpr (std::is_same_v<P, TwoPowerParams>) {
          j["d1"] = p.d1;
          j["d2"] = p.d2;
        } else {
          j["x"] = p.x;
          j["v"] = p.v;
        }
      },
      spec.params);
  if (spec.amplitude != 1) j["amplitude"] = spec.amplitude;
  if (spec.dilation != 1) j["dilation"] = spec.dilation;
  return j.dump();
}

std::string certificate_to_json(const ClassCertificate& c) {
  json j;
  j["class"] = to_string(c.cls);
  j["kappa_hat"] = c.kappa_hat;
  j["theta"] = c.theta;
  j["verdict"] = c.pass ? "pass" : "fail";
  j["worst_x"] = c.worst_x;
  if (c.cls == PotentialClass::Pk) j["k"] = c.k;
  if (!c.reason.empty()) j["reason"] = c.reason;
  return j.dump(2) + "\n";
}

std::string report_to_json(const BoundReport& r) {
  json j;
  j["inequality_id"] = to_string(r.id);
  j["family"] = r.family;
  j["class"] = r.cls;
  j["alpha"] = r.alpha;
  j["per_n"] = json::array();
  for (const auto& e : r.per_n) j["per_n"].push_back({{"n", e.n}, {"sup_ratio", e.sup_ratio}, {"argmax_x", e.argmax_x}});
  j["uniform_constant"] = r.uniform_constant;
  j["trend"] = r.trend;
  j["params"] = r.params;
  return j.dump(2) + "\n";
}

std::string read_text(const fs::path& path) {
  auto is = open_in(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  auto os = open_out(path);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) {
  for (std::size_t i = 0; i < header.size(); ++i) buf_ += (i ? "," : "") + header[i];
  buf_ += '\n';
}

void write_grid(const fs::path& path, const Grid& g) {
  if (g.values.size() != g.rows * g.cols) throw Error(ErrorKind::PreconditionViolated, "grid size mismatch");
  auto os = open_out(path);
  put_u64(os, g.rows);
  put_u64(os, g.cols);
  for (double v : g.values) put_f64(os, v);
  if (!os) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

Grid read_grid(const fs::path& path) {
  auto is = open_in(path);
  Grid g;
  g.rows = get_u64(is);
  g.cols = get_u64(is);
  if (g.rows * g.cols > (std::uint64_t{1} << 32)) throw Error(ErrorKind::IoError, "implausible grid dimensions");
  g.values.resize(g.rows * g.cols);
  for (auto& v : g.values) v = get_f64(is);
  return g;
}

void save_pair(const fs::path& path, const EigenPair& p) {
  auto os = open_out(path);
  put_array(os, {static_cast<double>(p.n), p.E, p.residual, p.norm_defect});
  put_array(os, p.grid);
  put_array(os, p.v);
  put_array(os, p.psi);
  put_array(os, p.dpsi);
  if (!os) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

EigenPair load_pair(const fs::path& path) {
  auto is = open_in(path);
  const auto head = get_array(is);
  if (head.size() != 4) throw Error(ErrorKind::IoError, "malformed eigenpair file " + path.string());
  EigenPair p;
  p.n = static_cast<int>(head[0]);
  p.E = head[1];
  p.residual = head[2];
  p.norm_defect = head[3];
  p.grid = get_array(is);
  p.v = get_array(is);
  p.psi = get_array(is);
  p.dpsi = get_array(is);
  const std::size_t m = p.grid.size();
  if (p.v.size() != m || p.psi.size() != m || p.dpsi.size() != m)
    throw Error(ErrorKind::IoError, "malformed eigenpair file " + path.string());
  return p;
}

EigenPair cached_eigenfunction(const Potential& V, int n, const EigenSolveConfig& cfg, std::optional<fs::path> dir) {
  if (!dir) {
    if (const char* env = std::getenv("GRUSHIN_LAB_CACHE"); env && *env) dir = fs::path(env);
  }
  if (!dir) return eigenfunction(V, n, cfg);
  const fs::path file = *dir / fmt::format("{:016x}_{}_{:016x}.bin", V.hash(), n, cfg.hash());
  if (fs::exists(file)) {
    try {
      auto p = load_pair(file);
      if (p.n == n) return p;
    } catch (const Error&) {
      // unreadable entries are recomputed and overwritten
    }
  }
  auto p = eigenfunction(V, n, cfg);
  // write to a temporary name first so concurrent readers never see half a file
  const fs::path tmp = file.string() + fmt::format(".{}.tmp", std::hash<std::thread::id>{}(std::this_thread::get_id()));
  save_pair(tmp, p);
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) fs::remove(tmp, ec);
  return p;
}

}  // namespace grushin_lab
