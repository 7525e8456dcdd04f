#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "minpo/expcli/run.hpp"

namespace minpo::expcli {

namespace {

// Shortest round-trip text; NaN becomes an empty cell.
std::string num(double v) {
  if (std::isnan(v)) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_file(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> coordinate_names(core::Experiment e) {
  switch (e) {
    case core::Experiment::exp1_forward:
    case core::Experiment::exp1_inverse:
      return {"t"};
    case core::Experiment::exp2:
      return {"x1", "x2", "t"};
    case core::Experiment::exp3:
      return {"x", "t"};
  }
  return {};
}

}  // namespace

void emit_metrics(const RunRecord& rec, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw std::runtime_error("cannot create output directory " + dir);
  const auto& c = rec.config;

  {
    auto out = open_file(root / "run.csv");
    out << "iteration,L_IDE,L_data,L_M,total,e_u,e_M,e_kappa\n";
    for (const auto& r : rec.log) {
      out << r.iteration << ',' << num(r.ide) << ',' << num(r.data) << ',' << num(r.memory) << ',' << num(r.total)
          << ',' << num(r.e_u) << ',' << num(r.e_m) << ',' << num(r.e_kappa) << '\n';
    }
  }
  {
    auto out = open_file(root / "summary.csv");
    out << "experiment,method,seed,e_u,e_M,e_kappa,wall_seconds";
    if (is_fd(c.method)) out << ",scheme,n_x";
    out << '\n';
    out << core::to_string(c.experiment) << ',' << to_string(c.method) << ',' << c.seed << ',' << num(rec.e_u) << ','
        << num(rec.e_m) << ',' << num(rec.e_kappa) << ',' << num(rec.wall_seconds);
    if (is_fd(c.method)) out << ',' << (c.method == Method::fd_forward ? "forward" : "upwind") << ',' << c.n_x;
    out << '\n';
  }
  {
    auto out = open_file(root / "fields.csv");
    const auto names = coordinate_names(c.experiment);
    for (const auto& n : names) out << n << ',';
    out << "u_pred,u_exact,M_pred,M_exact\n";
    const auto& f = rec.fields;
    const std::size_t d = static_cast<std::size_t>(f.dims);
    for (std::size_t i = 0; i < f.u_exact.size(); ++i) {
      for (std::size_t k = 0; k < d; ++k) out << num(f.points[i * d + k]) << ',';
      out << num(f.u_pred[i]) << ',' << num(f.u_exact[i]) << ',' << num(f.m_pred[i]) << ',' << num(f.m_exact[i]) << '\n';
    }
  }
  if (!rec.checkpoint.empty()) encoders::save_checkpoint((root / "checkpoint.txt").string(), rec.checkpoint);
  {
    auto out = open_file(root / "config.txt");
    out << describe(c);
  }
}

}  // namespace minpo::expcli
