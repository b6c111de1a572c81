#include "dampbeam/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dampbeam {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("snapshot: truncated file");
  return to_little(v);
}

constexpr char kMagic[8] = {'D', 'B', 'T', 'R', 'A', 'J', '0', '1'};

}  // namespace

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  auto os = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << fmt(r[i]);
    os << "\n";
  }
}

void write_key_values(const fs::path& path, const KeyValues& kv) {
  auto os = open_out(path);
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

KeyValues read_key_values(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  KeyValues kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  return kv;
}

void write_snapshot(const fs::path& path, const Snapshot& s) {
  const std::uint64_t nt = s.times.size();
  for (const auto& f : s.fields)
    if (f.size() != nt * s.n_nodes) throw std::invalid_argument("snapshot: field size mismatch");
  auto os = open_out(path, std::ios::out | std::ios::binary);
  os.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(os, nt);
  put<std::uint64_t>(os, s.n_nodes);
  put<std::uint64_t>(os, s.fields.size());
  put(os, s.circumference);
  put(os, s.x0);
  for (double t : s.times) put(os, t);
  for (std::uint64_t it = 0; it < nt; ++it)
    for (const auto& f : s.fields)
      for (std::uint64_t x = 0; x < s.n_nodes; ++x) put(os, f[it * s.n_nodes + x]);
}

Snapshot read_snapshot(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("snapshot: bad magic in " + path.string());
  Snapshot s;
  const auto nt = get<std::uint64_t>(is);
  s.n_nodes = get<std::uint64_t>(is);
  const auto nf = get<std::uint64_t>(is);
  s.circumference = get<double>(is);
  s.x0 = get<double>(is);
  s.times.resize(nt);
  for (auto& t : s.times) t = get<double>(is);
  s.fields.assign(nf, std::vector<double>(nt * s.n_nodes));
  for (std::uint64_t it = 0; it < nt; ++it)
    for (auto& f : s.fields)
      for (std::uint64_t x = 0; x < s.n_nodes; ++x) f[it * s.n_nodes + x] = get<double>(is);
  return s;
}

Snapshot trajectory_snapshot(const SpatialGrid& grid, const BeamTrajectory& tr) {
  Snapshot s;
  s.circumference = grid.circumference();
  s.x0 = grid.x0();
  s.n_nodes = grid.n();
  s.times = tr.times;
  s.fields.assign(2, {});
  for (std::size_t i = 0; i < tr.size(); ++i) {
    s.fields[0].insert(s.fields[0].end(), tr.beta[i].begin(), tr.beta[i].end());
    s.fields[1].insert(s.fields[1].end(), tr.beta_t[i].begin(), tr.beta_t[i].end());
  }
  return s;
}

Snapshot control_snapshot(const SpatialGrid& grid, const ControlField& v) {
  Snapshot s;
  s.circumference = grid.circumference();
  s.x0 = grid.x0();
  s.n_nodes = v.nx;
  s.times = v.times;
  s.fields = {v.values};
  return s;
}

void write_trajectory_csv(const fs::path& path, const SpatialGrid& grid, const BeamTrajectory& tr,
                          std::size_t stride) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < tr.size(); i += std::max<std::size_t>(stride, 1))
    for (int x = 0; x < grid.n(); ++x) rows.push_back({tr.times[i], grid.nodes()[x], tr.beta[i][x], tr.beta_t[i][x]});
  write_csv(path, {"t", "x", "beta", "beta_t"}, rows);
}

void write_weight_csv(const fs::path& path, const WeightField& w) {
  std::vector<std::string> header{"x", "t", "phi", "xi"};
  for (int a = 0; a <= WeightField::kMaxT; ++a)
    for (int b = 0; b <= WeightField::kMaxX; ++b)
      if (a + b > 0) header.push_back("phi_t" + std::to_string(a) + "x" + std::to_string(b));
  for (int a = 0; a <= WeightField::kMaxT; ++a)
    for (int b = 0; b <= WeightField::kMaxX; ++b)
      if (a + b > 0) header.push_back("xi_t" + std::to_string(a) + "x" + std::to_string(b));
  std::vector<std::vector<double>> rows;
  for (std::size_t it = 0; it < w.nt(); ++it) {
    for (std::size_t ix = 0; ix < w.nx(); ++ix) {
      const std::size_t i = w.index(it, ix);
      std::vector<double> r{w.xs()[ix], w.ts()[it], w.phi()[i], w.xi()[i]};
      for (int a = 0; a <= WeightField::kMaxT; ++a)
        for (int b = 0; b <= WeightField::kMaxX; ++b)
          if (a + b > 0) r.push_back(w.phi(a, b)[i]);
      for (int a = 0; a <= WeightField::kMaxT; ++a)
        for (int b = 0; b <= WeightField::kMaxX; ++b)
          if (a + b > 0) r.push_back(w.xi(a, b)[i]);
      rows.push_back(std::move(r));
    }
  }
  write_csv(path, header, rows);
}

void write_bound_report_csv(const fs::path& path, const std::vector<BoundReport>& reports) {
  auto os = open_out(path);
  os << "id,kind,lambda,constant,pass,x,t\n";
  static const char* kinds[] = {"upper", "positivity", "identity"};
  for (const auto& rep : reports)
    for (const auto& r : rep.records)
      os << r.id << "," << kinds[static_cast<int>(r.kind)] << "," << fmt(r.lambda) << ","
         << fmt(r.constant) << "," << (r.pass ? 1 : 0) << "," << fmt(r.x_at) << "," << fmt(r.t_at) << "\n";
}

void write_ratio_report_csv(const fs::path& path, const RatioReport& r) {
  auto os = open_out(path);
  os << "lambda,s,family,role,max,median\n";
  for (std::size_t il = 0; il < r.lambda_grid.size(); ++il) {
    for (std::size_t is = 0; is < r.s_grid.size(); ++is) {
      const auto& c = r.calibration[il][is];
      os << fmt(r.lambda_grid[il]) << "," << fmt(r.s_grid[is]) << "," << c.id << ",calibration,"
         << fmt(c.max) << "," << fmt(c.median) << "\n";
      for (const auto& fam : r.held_out) {
        const auto& h = fam[il][is];
        os << fmt(r.lambda_grid[il]) << "," << fmt(r.s_grid[is]) << "," << h.id << ",held_out,"
           << fmt(h.max) << "," << fmt(h.median) << "\n";
      }
    }
  }
}

void write_control_csv(const fs::path& path, const SpatialGrid& grid, const ControlField& v) {
  std::vector<std::vector<double>> rows;
  for (std::size_t it = 0; it < v.times.size(); ++it)
    for (std::size_t x = 0; x < v.nx; ++x) rows.push_back({v.times[it], grid.nodes()[x], v.values[it * v.nx + x]});
  write_csv(path, {"t", "x", "v"}, rows);
}

KeyValues terminal_report_kv(const TerminalReport& r) {
  return {{"controlled_norm", fmt(r.controlled_norm)},
          {"uncontrolled_norm", fmt(r.uncontrolled_norm)},
          {"suppression_ratio", fmt(r.suppression_ratio)},
          {"control_l2", fmt(r.control_l2)},
          {"data_norm", fmt(r.data_norm)},
          {"bound_ratio", fmt(r.bound_ratio)},
          {"g_terminal_norm", fmt(r.g_terminal_norm)},
          {"superposition_error", fmt(r.superposition_error)},
          {"support_ok", r.support_ok ? "true" : "false"}};
}

}  // namespace dampbeam
