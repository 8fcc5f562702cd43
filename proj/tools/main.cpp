// Command-line driver: solve single saddle-point systems, sweep iteration
// benchmarks to CSV, run the verification suites, and import/export meshes
// and matrices. See README.md for the full flag and schema reference.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "msp/assembly.hpp"
#include "msp/genspd.hpp"
#include "msp/krylov.hpp"
#include "msp/mesh.hpp"
#include "msp/saddle.hpp"
#include "msp/sparse.hpp"
#include "msp/spectral.hpp"

using nlohmann::json;
using namespace msp;

namespace {

// Deterministic numeric formatting for CSV cells (timing excluded from the
// byte-identical contract and formatted separately).
std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

Mesh build_mesh(const std::string& domain, int level, double grading) {
  if (domain == "square") return gen_square(level, grading);
  if (domain == "lshape") return gen_lshape(level, grading);
  throw std::invalid_argument("unknown domain: " + domain);
}

std::string mesh_label(const std::string& domain, int level) {
  return domain + "-" + std::to_string(level);
}

PrecondKind parse_precond(const std::string& name) {
  if (name == "P") return PrecondKind::P;
  if (name == "Mtri") return PrecondKind::Mtri;
  if (name == "Mdiag") return PrecondKind::Mdiag;
  if (name == "P0") return PrecondKind::P0;
  if (name == "PD") return PrecondKind::PD;
  if (name == "directk0") return PrecondKind::DirectK0;
  throw std::invalid_argument("unknown preconditioner: " + name);
}

Method parse_method(const std::string& name) {
  if (name == "cg") return Method::cg;
  if (name == "minres") return Method::minres;
  throw std::invalid_argument("unknown method: " + name);
}

RhsKind parse_rhs(const std::string& name) {
  if (name == "ones") return RhsKind::ones;
  if (name == "df0g") return RhsKind::df0g;
  if (name == "rf0g") return RhsKind::rf0g;
  if (name == "rfrg") return RhsKind::rfrg;
  throw std::invalid_argument("unknown rhs kind: " + name);
}

InnerPolicy parse_inner(const std::string& text) {
  InnerPolicy policy;
  if (text == "exact") {
    policy.mode = InnerPolicy::Mode::exact;
    return policy;
  }
  if (text.rfind("pcg:", 0) == 0) {
    policy.mode = InnerPolicy::Mode::pcg;
    policy.tol = std::stod(text.substr(4));
    if (policy.tol <= 0.0)
      throw std::invalid_argument("inner tolerance must be positive");
    return policy;
  }
  throw std::invalid_argument("inner policy must be 'exact' or 'pcg:TOL'");
}

// --out paths resolve against MSP_OUT_DIR when relative and the variable is
// set; absolute paths and unset variable pass through.
std::string resolve_out(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* base = std::getenv("MSP_OUT_DIR");
  if (base == nullptr || *base == '\0') return path;
  return (std::filesystem::path(base) / path).string();
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  const std::string resolved = resolve_out(out_path);
  std::ofstream os(resolved);
  if (!os) throw std::runtime_error("cannot open output file: " + resolved);
  os << j.dump(2) << "\n";
}

json structure_report_json(const StructureReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name},
                      {"residual", c.residual},
                      {"tol", c.tolerance},
                      {"pass", c.pass}});
  return {{"pass", rep.all_pass}, {"checks", checks}};
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

struct SolveOptions {
  std::string domain = "square";
  int level = 2;
  double grading = 1.0;
  double k = 0.0;
  double eta = 0.0;  // 0 means "default to k^2 + 1"
  bool eta_given = false;
  std::string precond = "P";
  double epsilon = 0.0;
  bool epsilon_given = false;
  std::string method = "cg";
  double tol = 1e-6;
  std::size_t max_it = 200;
  std::string inner = "exact";
  std::string rhs = "df0g";
  std::uint64_t seed = 1;
  std::string out;
};

int run_solve(const SolveOptions& opt) {
  const PrecondKind kind = parse_precond(opt.precond);
  if (kind == PrecondKind::DirectK0 && opt.k != 0.0) {
    std::cerr << "usage error: the direct null-space solver requires k = 0\n";
    return 1;
  }

  const SaddleSystem sys =
      assemble_system(build_mesh(opt.domain, opt.level, opt.grading), opt.k);
  const double eta = opt.eta_given ? opt.eta : default_eta(opt.k);

  PreconditionerConfig cfg;
  cfg.kind = kind;
  cfg.eta = eta;
  cfg.epsilon = opt.epsilon_given ? opt.epsilon : 1.0 / eta;
  cfg.inner = parse_inner(opt.inner);

  SolveReport rep;
  try {
    rep = solve_case(sys, cfg, parse_method(opt.method), parse_rhs(opt.rhs),
                     opt.seed, opt.tol, opt.max_it);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  json j{{"domain", opt.domain},
         {"level", opt.level},
         {"grading", opt.grading},
         {"k", opt.k},
         {"eta", eta},
         {"precond", opt.precond},
         {"method", opt.method},
         {"rhs", opt.rhs},
         {"seed", opt.seed},
         {"tol", opt.tol},
         {"max_it", opt.max_it},
         {"inner", opt.inner},
         {"n", sys.n},
         {"m", sys.m},
         {"algorithm", rep.algorithm},
         {"iterations", rep.iterations},
         {"converged", rep.converged},
         {"breakdown", rep.breakdown},
         {"breakdown_reason", rep.breakdown_reason},
         {"final_residual", rep.relative_residuals.empty()
                                ? 0.0
                                : rep.relative_residuals.back()},
         {"residual_history", rep.relative_residuals},
         {"inner_failures", rep.inner_failures},
         {"config", rep.config},
         {"wall_time_seconds", rep.wall_time}};
  if (opt.precond == "Mtri") j["epsilon"] = cfg.epsilon;
  emit(j, opt.out);
  return rep.converged ? 0 : 2;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepCell {
  std::string precond;
  std::string method;
  std::optional<double> epsilon;  // Mtri only; absent means 1/eta
};

struct SweepSpec {
  std::string domain = "square";
  std::vector<int> levels;
  double grading = 1.0;
  std::vector<double> k_values;
  std::vector<double> eta_offsets;  // eta = k^2 + offset
  std::vector<double> eta_values;   // explicit eta list (overrides offsets)
  std::vector<SweepCell> cells;
  std::vector<std::string> rhs_kinds = {"ones"};
  double tol = 1e-6;
  std::size_t max_it = 200;
  std::string inner = "exact";
  std::uint64_t seed = 1;
  bool lambda_min = false;
  std::string out;

  void validate() const {
    if (levels.empty() || k_values.empty() || cells.empty() ||
        rhs_kinds.empty())
      throw std::invalid_argument("sweep: level, k, and cell grids must be nonempty");
    if (eta_offsets.empty() && eta_values.empty())
      throw std::invalid_argument("sweep: an eta rule is required");
    if (tol <= 0.0) throw std::invalid_argument("sweep: tol must be positive");
    if (domain != "square" && domain != "lshape")
      throw std::invalid_argument("sweep: unknown domain " + domain);
  }
};

SweepSpec sweep_from_json(const json& j) {
  SweepSpec spec;
  spec.domain = j.value("domain", spec.domain);
  if (j.contains("levels")) spec.levels = j["levels"].get<std::vector<int>>();
  spec.grading = j.value("grading", spec.grading);
  if (j.contains("k_values"))
    spec.k_values = j["k_values"].get<std::vector<double>>();
  if (j.contains("eta")) {
    const json& eta = j["eta"];
    if (eta.contains("offsets"))
      spec.eta_offsets = eta["offsets"].get<std::vector<double>>();
    if (eta.contains("values"))
      spec.eta_values = eta["values"].get<std::vector<double>>();
  }
  if (j.contains("cells")) {
    for (const json& c : j["cells"]) {
      SweepCell cell;
      cell.precond = c.at("precond").get<std::string>();
      cell.method = c.at("method").get<std::string>();
      if (c.contains("epsilon")) cell.epsilon = c["epsilon"].get<double>();
      spec.cells.push_back(std::move(cell));
    }
  } else if (j.contains("preconds")) {
    const auto preconds = j["preconds"].get<std::vector<std::string>>();
    const auto methods =
        j.value("methods", std::vector<std::string>{"cg", "minres"});
    for (const auto& p : preconds)
      for (const auto& m : methods) spec.cells.push_back({p, m, std::nullopt});
  }
  if (j.contains("rhs")) {
    if (j["rhs"].is_array())
      spec.rhs_kinds = j["rhs"].get<std::vector<std::string>>();
    else
      spec.rhs_kinds = {j["rhs"].get<std::string>()};
  }
  spec.tol = j.value("tol", spec.tol);
  spec.max_it = j.value("max_it", spec.max_it);
  spec.inner = j.value("inner", spec.inner);
  spec.seed = j.value("seed", spec.seed);
  spec.lambda_min = j.value("lambda_min", spec.lambda_min);
  spec.out = j.value("output", spec.out);
  return spec;
}

struct SweepJob {
  int level = 0;
  double k = 0.0;
  double eta = 0.0;
  SweepCell cell;
  std::string rhs;
};

int run_sweep(const SweepSpec& spec, std::size_t jobs) {
  spec.validate();
  const InnerPolicy inner = parse_inner(spec.inner);

  // Deterministic cell enumeration; rows are emitted in this exact order.
  std::vector<SweepJob> plan;
  for (int level : spec.levels)
    for (double k : spec.k_values) {
      std::vector<double> etas = spec.eta_values;
      if (etas.empty())
        for (double off : spec.eta_offsets) etas.push_back(k * k + off);
      for (double eta : etas)
        for (const SweepCell& cell : spec.cells)
          for (const std::string& rhs : spec.rhs_kinds)
            plan.push_back({level, k, eta, cell, rhs});
    }

  // Shared read-only systems, one per (level, k).
  std::map<std::pair<int, double>, SaddleSystem> systems;
  for (const SweepJob& job : plan) {
    const auto key = std::make_pair(job.level, job.k);
    if (!systems.count(key))
      systems.emplace(key, assemble_system(build_mesh(spec.domain, job.level,
                                                      spec.grading),
                                           job.k));
  }

  // Optional smallest-eigenvalue column, cached per (level, k, eta).
  std::map<std::string, double> lambda_cache;
  if (spec.lambda_min) {
    for (const SweepJob& job : plan) {
      const std::string key = std::to_string(job.level) + "|" +
                              fmt_num(job.k) + "|" + fmt_num(job.eta);
      if (!lambda_cache.count(key))
        lambda_cache[key] =
            lambda_min_Aeta(systems.at({job.level, job.k}), job.eta);
    }
  }

  std::vector<std::string> rows(plan.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < plan.size();
         i = next.fetch_add(1)) {
      const SweepJob& job = plan[i];
      const SaddleSystem& sys = systems.at({job.level, job.k});
      PreconditionerConfig cfg;
      cfg.eta = job.eta;
      cfg.inner = inner;
      std::ostringstream row;
      try {
        cfg.kind = parse_precond(job.cell.precond);
        cfg.epsilon = job.cell.epsilon ? *job.cell.epsilon : 1.0 / job.eta;
        const SolveReport rep =
            solve_case(sys, cfg, parse_method(job.cell.method),
                       parse_rhs(job.rhs), spec.seed, spec.tol, spec.max_it);
        row << csv_escape(mesh_label(spec.domain, job.level)) << ','
            << fmt_num(job.k) << ',' << fmt_num(job.eta) << ','
            << csv_escape(job.cell.precond) << ','
            << csv_escape(job.cell.method) << ',' << csv_escape(job.rhs) << ','
            << rep.iterations << ',' << (rep.converged ? 1 : 0) << ','
            << (rep.breakdown ? 1 : 0) << ',';
        if (spec.lambda_min)
          row << fmt_num(lambda_cache.at(std::to_string(job.level) + "|" +
                                         fmt_num(job.k) + "|" +
                                         fmt_num(job.eta)));
        char tbuf[32];
        std::snprintf(tbuf, sizeof(tbuf), "%.3e", rep.wall_time);
        row << ',' << tbuf;
      } catch (const std::exception& e) {
        // Per-cell failures stay in-row; the sweep continues.
        row.str("");
        row << csv_escape(mesh_label(spec.domain, job.level)) << ','
            << fmt_num(job.k) << ',' << fmt_num(job.eta) << ','
            << csv_escape(job.cell.precond) << ','
            << csv_escape(job.cell.method) << ',' << csv_escape(job.rhs)
            << ",,0,1,," << csv_escape(std::string("error: ") + e.what());
      }
      rows[i] = row.str();
    }
  };

  const std::size_t n_threads = std::max<std::size_t>(1, jobs);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::ostringstream csv;
  csv << "mesh,k,eta,precond,method,rhs,iters,converged,breakdown,lambda_min,"
         "time\n";
  for (const std::string& row : rows) csv << row << '\n';

  if (spec.out.empty()) {
    std::cout << csv.str();
  } else {
    const std::string resolved = resolve_out(spec.out);
    std::ofstream os(resolved);
    if (!os) throw std::runtime_error("cannot open output file: " + resolved);
    os << csv.str();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyOptions {
  std::string suite = "all";
  std::string domain;  // empty means suite default
  int level = 2;
  double grading = 1.0;
  double k = 0.0;
  double eta = 0.0;
  bool eta_given = false;
  std::uint64_t seed = 7;
  std::size_t trials = 50;
  std::string out;
};

json verify_structure_suite(const VerifyOptions& opt, bool& pass) {
  json components = json::array();
  std::vector<std::pair<std::string, int>> targets;
  if (!opt.domain.empty()) {
    targets.emplace_back(opt.domain, opt.level);
  } else {
    for (const std::string& d : {"square", "lshape"})
      for (int level : {1, 2, 3}) targets.emplace_back(d, level);
  }
  for (const auto& [domain, level] : targets) {
    const SaddleSystem sys =
        assemble_system(build_mesh(domain, level, opt.grading), opt.k);
    const StructureReport rep = verify_structure(sys);
    json c = structure_report_json(rep);
    c["mesh"] = mesh_label(domain, level);
    c["n"] = sys.n;
    c["m"] = sys.m;
    pass = pass && rep.all_pass;
    components.push_back(std::move(c));
  }
  return components;
}

json verify_inverse_suite(const VerifyOptions& opt, bool& pass) {
  json components = json::array();
  std::vector<std::pair<std::string, int>> targets;
  if (!opt.domain.empty())
    targets.emplace_back(opt.domain, opt.level);
  else
    targets = {{"square", 2}, {"lshape", 2}};
  for (const auto& [domain, level] : targets) {
    for (double k : {0.0, 1.0, 2.0}) {
      const SaddleSystem sys =
          assemble_system(build_mesh(domain, level, opt.grading), k);
      const double eta = opt.eta_given ? opt.eta : default_eta(k);
      const DenseMatrix K = dense_K(sys);
      const DenseMatrix Kinv = dense_K_inverse(sys, eta);
      const DenseMatrix I = DenseMatrix::identity(sys.total_size());
      const double inv_residual = (K * Kinv - I).norm_max();
      const DenseMatrix Kinv2 = dense_K_inverse(sys, eta + 7.0);
      const double eta_independence = (Kinv - Kinv2).norm_max();
      const StructureReport trep = verify_T_properties(sys, eta);

      json c = structure_report_json(trep);
      c["mesh"] = mesh_label(domain, level);
      c["k"] = k;
      c["eta"] = eta;
      c["inverse_residual"] = inv_residual;
      c["eta_independence"] = eta_independence;
      const bool ok =
          trep.all_pass && inv_residual <= 1e-8 && eta_independence <= 1e-8;
      c["pass"] = ok;
      pass = pass && ok;
      components.push_back(std::move(c));
    }
  }
  return components;
}

json verify_spectral_suite(const VerifyOptions& opt, bool& pass) {
  const std::string domain = opt.domain.empty() ? "square" : opt.domain;
  const SaddleSystem sys =
      assemble_system(build_mesh(domain, opt.level, opt.grading), opt.k);
  const double eta = opt.eta_given ? opt.eta : default_eta(opt.k);

  PreconditionerConfig cfg;
  cfg.kind = PrecondKind::P;
  cfg.eta = eta;
  const SpectrumReport rep = spectrum_preconditioned(sys, cfg);
  const SpectrumWindowCheck window = check_spectrum_window(rep);

  json c{{"mesh", mesh_label(domain, opt.level)},
         {"k", opt.k},
         {"eta", eta},
         {"n", sys.n},
         {"m", sys.m},
         {"eigenvalues", rep.eigenvalues.size()},
         {"multiplicity_of_one", rep.multiplicity_of_one},
         {"expected_unit_multiplicity", rep.expected_unit_multiplicity},
         {"alpha_bar", rep.alpha_bar},
         {"bound_lower", rep.bound_lower},
         {"lambda_min_shifted", rep.lambda_min_Aeta},
         {"violations", rep.violations},
         {"window_pass", window.pass},
         {"detail", window.detail}};
  c["pass"] = window.pass;
  pass = pass && window.pass;
  return json::array({c});
}

json verify_appendix_suite(const VerifyOptions& opt, bool& pass) {
  json components = json::array();

  // Hand instance with a known exact inverse.
  {
    DenseMatrix A(2, 2);
    A(0, 0) = 1.0;
    DenseMatrix B(2, 1);
    B(1, 0) = 1.0;
    DenseMatrix C(1, 2);
    C(0, 1) = 1.0;
    const GeneralSaddle gs = make_general_saddle(A, B, C, DenseMatrix(1, 1));
    DenseMatrix expected(3, 3);
    expected(0, 0) = 1.0;
    expected(1, 2) = 1.0;
    expected(2, 1) = 1.0;
    const NullData nd = build_null_data(gs);
    const double r1 = (inverse_via_nullspace(gs, nd) - expected).norm_max();
    const double r2 = (inverse_via_pseudoinverse(gs) - expected).norm_max();
    const bool ok = r1 <= 1e-12 && r2 <= 1e-12;
    components.push_back({{"name", "hand instance"},
                          {"nullspace_route_error", r1},
                          {"pseudoinverse_route_error", r2},
                          {"pass", ok}});
    pass = pass && ok;
  }

  // Seeded random instances over a cycle of admissible shapes.
  const std::vector<std::array<std::size_t, 4>> shapes = {
      {2, 2, 1, 1}, {5, 4, 3, 2}, {4, 5, 2, 3}, {6, 6, 2, 2},
      {8, 7, 4, 3}, {3, 6, 1, 4}, {7, 7, 3, 3}, {8, 8, 4, 4}};
  std::size_t failures = 0;
  json failure_detail = json::array();
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    const auto& s = shapes[trial % shapes.size()];
    const std::uint64_t seed = opt.seed + trial;
    std::string why;
    try {
      const GeneralSaddle gs = random_admissible(s[0], s[1], s[2], s[3], seed);
      const NullData nd = build_null_data(gs);
      const DenseMatrix inv1 = inverse_via_nullspace(gs, nd);
      const DenseMatrix inv2 = inverse_via_pseudoinverse(gs);
      const DenseMatrix oracle = DenseLU(block_matrix(gs)).inverse();
      const double scale = std::max(1.0, oracle.norm_frobenius());
      if ((inv1 - oracle).norm_frobenius() / scale > 1e-9)
        why = "null-space route disagrees with dense inversion";
      else if ((inv2 - oracle).norm_frobenius() / scale > 1e-9)
        why = "pseudoinverse route disagrees with dense inversion";
      else {
        const InverseIdentityReport rep = verify_inverse_identities(gs, nd);
        for (const auto& check : rep.checks)
          if (!check.pass) {
            why = "identity failed: " + check.name;
            break;
          }
      }
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    if (!why.empty()) {
      ++failures;
      json fd{{"trial", trial}, {"seed", seed}, {"reason", why}};
      fd["shape"] = json::array({s[0], s[1], s[2], s[3]});
      failure_detail.push_back(std::move(fd));
    }
  }
  const bool ok = failures == 0;
  components.push_back({{"name", "random admissible instances"},
                        {"trials", opt.trials},
                        {"failures", failures},
                        {"failure_detail", failure_detail},
                        {"pass", ok}});
  pass = pass && ok;
  return components;
}

int run_verify(const VerifyOptions& opt) {
  bool pass = true;
  json suites = json::object();
  try {
    if (opt.suite == "structure" || opt.suite == "all")
      suites["structure"] = verify_structure_suite(opt, pass);
    if (opt.suite == "inverse" || opt.suite == "all")
      suites["inverse"] = verify_inverse_suite(opt, pass);
    if (opt.suite == "spectral" || opt.suite == "all")
      suites["spectral"] = verify_spectral_suite(opt, pass);
    if (opt.suite == "appendix" || opt.suite == "all")
      suites["appendix"] = verify_appendix_suite(opt, pass);
  } catch (const std::exception& e) {
    suites["error"] = e.what();
    pass = false;
  }
  json j{{"suite", opt.suite}, {"pass", pass}, {"components", suites}};
  emit(j, opt.out);
  return pass ? 0 : 2;
}

// ---------------------------------------------------------------------------
// mesh / export
// ---------------------------------------------------------------------------

int run_mesh(const std::string& domain, int level, double grading,
             const std::string& node_path, const std::string& ele_path,
             const std::string& write_prefix, const std::string& out) {
  Mesh mesh;
  std::string source;
  if (!node_path.empty() || !ele_path.empty()) {
    if (node_path.empty() || ele_path.empty())
      throw std::invalid_argument("mesh: --node and --ele must be given together");
    std::ifstream nf(node_path), ef(ele_path);
    if (!nf) throw std::runtime_error("cannot open " + node_path);
    if (!ef) throw std::runtime_error("cannot open " + ele_path);
    std::stringstream ns, es;
    ns << nf.rdbuf();
    es << ef.rdbuf();
    mesh = read_triangle(ns.str(), es.str());
    source = node_path;
  } else {
    mesh = build_mesh(domain, level, grading);
    source = mesh_label(domain, level);
  }

  if (!write_prefix.empty()) {
    const TriangleFiles files = write_triangle(mesh);
    const std::string prefix = resolve_out(write_prefix);
    std::ofstream nf(prefix + ".node"), ef(prefix + ".ele");
    if (!nf || !ef)
      throw std::runtime_error("cannot write mesh files at " + prefix);
    nf << files.node_text;
    ef << files.ele_text;
  }

  const MeshStats stats = mesh_statistics(mesh);
  json j{{"source", source},
         {"vertices", stats.vertices},
         {"edges", stats.edges},
         {"triangles", stats.triangles},
         {"n", stats.n},
         {"m", stats.m},
         {"min_edge_length", stats.min_edge},
         {"max_edge_length", stats.max_edge}};
  emit(j, out);
  return 0;
}

int run_export(const std::string& domain, int level, double grading, double k,
               const std::string& out_dir) {
  const SaddleSystem sys =
      assemble_system(build_mesh(domain, level, grading), k);
  const std::filesystem::path dir(resolve_out(out_dir));
  std::filesystem::create_directories(dir);
  write_matrix_market(sys.A, (dir / "A.mtx").string());
  write_matrix_market(sys.M, (dir / "M.mtx").string());
  write_matrix_market(sys.B, (dir / "B.mtx").string());
  write_matrix_market(sys.C, (dir / "C.mtx").string());
  write_matrix_market(sys.L, (dir / "L.mtx").string());
  json sizes{{"mesh", mesh_label(domain, level)},
             {"k", k},
             {"n", sys.n},
             {"m", sys.m}};
  std::ofstream os(dir / "sizes.json");
  os << sizes.dump(2) << "\n";
  std::cout << "wrote A.mtx M.mtx B.mtx C.mtx L.mtx sizes.json to "
            << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saddle-point solver benchmark and verification driver"};
  app.require_subcommand(1);

  // --- solve ---
  SolveOptions sopt;
  CLI::App* solve = app.add_subcommand("solve", "Solve one system and report");
  solve->add_option("--domain", sopt.domain)
      ->check(CLI::IsMember({"square", "lshape"}));
  solve->add_option("--level", sopt.level)->check(CLI::Range(1, 8));
  solve->add_option("--grading", sopt.grading);
  solve->add_option("--k", sopt.k);
  solve->add_option("--eta", sopt.eta)
      ->each([&sopt](const std::string&) { sopt.eta_given = true; });
  solve->add_option("--precond", sopt.precond)
      ->check(CLI::IsMember({"P", "Mtri", "Mdiag", "P0", "directk0", "PD"}));
  solve->add_option("--epsilon", sopt.epsilon)
      ->each([&sopt](const std::string&) { sopt.epsilon_given = true; });
  solve->add_option("--method", sopt.method)
      ->check(CLI::IsMember({"cg", "minres"}));
  solve->add_option("--tol", sopt.tol);
  solve->add_option("--maxit", sopt.max_it);
  solve->add_option("--inner", sopt.inner);
  solve->add_option("--rhs", sopt.rhs)
      ->check(CLI::IsMember({"ones", "df0g", "rf0g", "rfrg"}));
  solve->add_option("--seed", sopt.seed);
  solve->add_option("--out", sopt.out);

  // --- sweep ---
  std::string sweep_preset;
  std::string sweep_out;
  std::size_t sweep_jobs = 1;
  SweepSpec inline_spec;
  std::string inline_levels, inline_ks, inline_eta_offsets, inline_eta_values,
      inline_preconds, inline_methods = "cg,minres", inline_rhs = "ones";
  CLI::App* sweep =
      app.add_subcommand("sweep", "Run a benchmark grid and emit CSV");
  sweep->add_option("--preset", sweep_preset, "JSON sweep specification file");
  sweep->add_option("--out", sweep_out);
  sweep->add_option("--jobs", sweep_jobs)->check(CLI::Range(1, 64));
  sweep->add_option("--domain", inline_spec.domain)
      ->check(CLI::IsMember({"square", "lshape"}));
  sweep->add_option("--levels", inline_levels, "comma list, e.g. 1,2,3");
  sweep->add_option("--grading", inline_spec.grading);
  sweep->add_option("--k-values", inline_ks, "comma list");
  sweep->add_option("--eta-offsets", inline_eta_offsets,
                    "comma list of offsets above k^2");
  sweep->add_option("--eta-values", inline_eta_values, "explicit eta list");
  sweep->add_option("--preconds", inline_preconds, "comma list");
  sweep->add_option("--methods", inline_methods, "comma list");
  sweep->add_option("--rhs", inline_rhs, "comma list of rhs kinds");
  sweep->add_option("--tol", inline_spec.tol);
  sweep->add_option("--max-it", inline_spec.max_it);
  sweep->add_option("--inner", inline_spec.inner);
  sweep->add_option("--seed", inline_spec.seed);
  sweep->add_flag("--lambda-min", inline_spec.lambda_min,
                  "add the smallest shifted-block eigenvalue column");

  // --- verify ---
  VerifyOptions vopt;
  CLI::App* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("--suite", vopt.suite)
      ->check(CLI::IsMember(
          {"structure", "inverse", "spectral", "appendix", "all"}));
  verify->add_option("--domain", vopt.domain)
      ->check(CLI::IsMember({"square", "lshape"}));
  verify->add_option("--level", vopt.level)->check(CLI::Range(1, 8));
  verify->add_option("--grading", vopt.grading);
  verify->add_option("--k", vopt.k);
  verify->add_option("--eta", vopt.eta)
      ->each([&vopt](const std::string&) { vopt.eta_given = true; });
  verify->add_option("--seed", vopt.seed);
  verify->add_option("--trials", vopt.trials);
  verify->add_option("--out", vopt.out);

  // --- mesh ---
  std::string m_domain = "square", m_node, m_ele, m_write, m_out;
  int m_level = 2;
  double m_grading = 1.0;
  CLI::App* meshcmd =
      app.add_subcommand("mesh", "Generate or read a mesh; report statistics");
  meshcmd->add_option("--domain", m_domain)
      ->check(CLI::IsMember({"square", "lshape"}));
  meshcmd->add_option("--level", m_level)->check(CLI::Range(1, 8));
  meshcmd->add_option("--grading", m_grading);
  meshcmd->add_option("--node", m_node, "read this .node file");
  meshcmd->add_option("--ele", m_ele, "read this .ele file");
  meshcmd->add_option("--write", m_write, "write PREFIX.node / PREFIX.ele");
  meshcmd->add_option("--out", m_out);

  // --- export ---
  std::string e_domain = "square", e_dir = "matrices";
  int e_level = 2;
  double e_grading = 1.0, e_k = 0.0;
  CLI::App* exportcmd = app.add_subcommand(
      "export", "Write the assembled matrices in MatrixMarket format");
  exportcmd->add_option("--domain", e_domain)
      ->check(CLI::IsMember({"square", "lshape"}));
  exportcmd->add_option("--level", e_level)->check(CLI::Range(1, 8));
  exportcmd->add_option("--grading", e_grading);
  exportcmd->add_option("--k", e_k);
  exportcmd->add_option("--out-dir", e_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return run_solve(sopt);
    if (sweep->parsed()) {
      SweepSpec spec;
      if (!sweep_preset.empty()) {
        std::ifstream f(sweep_preset);
        if (!f) {
          std::cerr << "usage error: cannot open preset " << sweep_preset
                    << "\n";
          return 1;
        }
        json j;
        f >> j;
        spec = sweep_from_json(j);
      } else {
        spec = inline_spec;
        auto split_d = [](const std::string& s) {
          std::vector<double> out;
          std::stringstream ss(s);
          std::string item;
          while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(std::stod(item));
          return out;
        };
        auto split_s = [](const std::string& s) {
          std::vector<std::string> out;
          std::stringstream ss(s);
          std::string item;
          while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
          return out;
        };
        for (double v : split_d(inline_levels))
          spec.levels.push_back(static_cast<int>(v));
        spec.k_values = split_d(inline_ks);
        spec.eta_offsets = split_d(inline_eta_offsets);
        spec.eta_values = split_d(inline_eta_values);
        for (const auto& p : split_s(inline_preconds))
          for (const auto& m : split_s(inline_methods))
            spec.cells.push_back({p, m, std::nullopt});
        spec.rhs_kinds = split_s(inline_rhs);
      }
      if (!sweep_out.empty()) spec.out = sweep_out;
      return run_sweep(spec, sweep_jobs);
    }
    if (verify->parsed()) return run_verify(vopt);
    if (meshcmd->parsed())
      return run_mesh(m_domain, m_level, m_grading, m_node, m_ele, m_write,
                      m_out);
    if (exportcmd->parsed())
      return run_export(e_domain, e_level, e_grading, e_k, e_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
