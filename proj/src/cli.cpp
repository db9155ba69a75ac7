#include "kext/cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include "kext/bounds.hpp"
#include "kext/conic.hpp"
#include "kext/diverge.hpp"
#include "kext/privtest.hpp"
#include "kext/qmat.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace kext::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// formatting and small parsers

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// "start:stop:step", endpoints included within half a step; a bare number is
// a single-point grid
std::vector<double> parse_grid(const std::string& spec) {
  auto parts = split(spec, ':');
  if (parts.size() == 1) return {std::stod(parts[0])};
  if (parts.size() != 3) throw CLI::ValidationError("grid", "expected start:stop:step");
  const double start = std::stod(parts[0]);
  const double stop = std::stod(parts[1]);
  const double step = std::stod(parts[2]);
  if (step <= 0) throw CLI::ValidationError("grid", "step must be positive");
  std::vector<double> out;
  for (long i = 0;; ++i) {
    const double v = start + i * step;
    if (v > stop + 0.5 * step) break;
    out.push_back(std::min(v, stop));  // clamp accumulated endpoint overshoot
  }
  if (out.empty()) throw CLI::ValidationError("grid", "empty grid");
  return out;
}

KParam parse_k(const std::string& s) {
  if (s == "inf") return KParam::inf();
  return KParam::finite(std::stol(s));
}

std::vector<KParam> parse_k_list(const std::string& s) {
  std::vector<KParam> out;
  for (const std::string& t : split(s, ',')) out.push_back(parse_k(t));
  if (out.empty()) throw CLI::ValidationError("k-list", "empty k list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const std::string& t : split(s, ',')) out.push_back(std::stod(t));
  if (out.empty()) throw CLI::ValidationError("list", "empty list");
  return out;
}

// ---------------------------------------------------------------------------
// CSV and SVG output

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const CsvTable& t, std::ostream& os) {
  for (size_t i = 0; i < t.header.size(); ++i)
    os << t.header[i] << (i + 1 < t.header.size() ? "," : "\n");
  for (const auto& row : t.rows)
    for (size_t i = 0; i < row.size(); ++i)
      os << row[i] << (i + 1 < row.size() ? "," : "\n");
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> pts;
};

std::string render_line_chart(const std::string& title, const std::string& xlabel,
                              const std::string& ylabel,
                              const std::vector<Series>& series) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  const double w = 640, h = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " " << h
     << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << title << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
     << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
     << h - mb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = xmin + (xmax - xmin) * i / 4.0;
    const double y = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << px(x) << "\" y=\"" << h - mb + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(x) << "</text>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << py(y) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(y) << "</text>\n";
  }
  os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
     << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (mt + h - mb) / 2 << ")\">" << ylabel << "</text>\n";
  int ci = 0;
  for (const auto& s : series) {
    const char* color = palette[ci % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.pts) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << w - mr - 6 << "\" y=\"" << mt + 16 * (ci + 1)
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">" << s.name
       << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
  return os.str();
}

struct OutputSink {
  std::string path;    // empty: stdout
  std::string format;  // csv or svg

  void emit(const CsvTable& table, const std::string& title, const std::string& xlabel,
            const std::string& ylabel, const std::vector<Series>& series) const {
    if (path.empty()) {
      write_csv(table, std::cout);
    } else {
      std::ofstream f(path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open output file " + path);
      write_csv(table, f);
    }
    if (format == "svg") {
      std::string svg_path = path;
      const auto dot = svg_path.rfind('.');
      if (dot != std::string::npos)
        svg_path = svg_path.substr(0, dot) + ".svg";
      else
        svg_path += ".svg";
      std::ofstream f(svg_path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open output file " + svg_path);
      f << render_line_chart(title, xlabel, ylabel, series);
    }
  }
};

// ---------------------------------------------------------------------------
// bounded worker pool; results land in index order, so output is
// deterministic regardless of completion order

void parallel_for(long count, int jobs, const std::function<void(long)>& fn) {
  if (jobs < 1) jobs = 1;
  jobs = std::min<long>(jobs, count);
  if (jobs <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&, w] {
      try {
        for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// shared command state

struct Common {
  std::string output;
  std::string format = "csv";
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  double tol = 0.0;  // 0: use defaults (env-aware)
  conic::SolveOptions solver_opts() const {
    conic::SolveOptions o = conic::SolveOptions::defaults();
    if (tol > 0) o.tol = tol;
    return o;
  }
  void add_flags(CLI::App* sub) {
    sub->add_option("--output,-o", output, "output file (default: stdout)");
    sub->add_option("--format", format, "csv or svg (svg also writes the csv)")
        ->check(CLI::IsMember({"csv", "svg"}));
    sub->add_option("--jobs", jobs, "worker pool size (default: logical cores)");
    sub->add_option("--tol", tol, "solver tolerance (default 1e-8 or KEXT_SOLVER_TOL)");
  }
  void validate() const {
    if (format == "svg" && output.empty())
      throw CLI::ValidationError("--format", "svg output requires --output");
  }
  void emit(const CsvTable& table, const std::string& title, const std::string& xlabel,
            const std::string& ylabel, const std::vector<Series>& series) const {
    OutputSink{output, format}.emit(table, title, xlabel, ylabel, series);
  }
};

std::ostream& report_stream(std::ofstream& file, const Common& c) {
  if (c.output.empty()) return std::cout;
  file.open(c.output, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output file " + c.output);
  return file;
}

// ---------------------------------------------------------------------------
// subcommand implementations

int cmd_privacy_max(const Common& common, int d, int k, int shield_a, int shield_b,
                    bool random, unsigned long long seed, const std::string& control) {
  privtest::ControlSide side =
      control == "B" ? privtest::ControlSide::B : privtest::ControlSide::A;
  privtest::TwistSpec spec = [&] {
    if (random) {
      std::mt19937_64 rng(seed);
      return privtest::random_twist(d, shield_a, shield_b, rng, side);
    }
    return privtest::identity_twist(d, shield_a, shield_b, side);
  }();
  privtest::PrivacyTest test = privtest::privacy_test(spec);
  privtest::PrivacyMaxResult res =
      privtest::max_pass_probability_ext(test, k, common.solver_opts());

  std::ofstream file;
  std::ostream& os = report_stream(file, common);
  os << "privacy-max: d=" << d << " k=" << k << " shields=" << shield_a << "x"
     << shield_b << " twist=" << (random ? "random" : "identity")
     << " control=" << (side == privtest::ControlSide::A ? "A" : "B");
  if (random) os << " seed=" << seed;
  os << "\n";
  os << "sdp_optimum = " << fmt(res.value) << "\n";
  os << "ceiling     = " << fmt(res.ceiling) << "  (1/d + 1/k - 1/(dk))\n";
  os << "gap         = " << fmt(res.value - res.ceiling) << "\n";
  os << "status      = " << res.sol.message << " (iterations=" << res.sol.iterations
     << ", primal_res=" << fmt(res.sol.residuals.primal)
     << ", dual_res=" << fmt(res.sol.residuals.dual) << ")\n";
  return res.sol.status == conic::SolveStatus::Optimal ? 0 : 2;
}

int cmd_fig1(const Common& common, double eps, int d, long k,
             const std::string& grid_spec) {
  const std::vector<double> grid = parse_grid(grid_spec);
  CsvTable t;
  t.header = {"F", "bound_bits", "bound_bits_bernoulli", "valid"};
  t.rows.resize(grid.size());
  std::atomic<long> ok_rows{0};
  const conic::SolveOptions opts = common.solver_opts();
  parallel_for(static_cast<long>(grid.size()), common.jobs, [&](long i) {
    const double F = grid[i];
    diverge::DivergenceValue bern =
        diverge::e_hyp_isotropic_n(F, d, KParam::finite(k), 1, eps);
    bounds::BoundResult bb = bounds::key_bound(bern.bits, KParam::finite(k));
    std::string sdp_cell = "invalid", bern_cell = "invalid", valid_cell = "false";
    if (bb.valid) bern_cell = fmt(bb.bits);
    diverge::DivergenceValue e = diverge::e_hyp_state(isotropic(F, d), k, eps, opts);
    if (e.ok()) {
      bounds::BoundResult b = bounds::key_bound(e.bits, KParam::finite(k));
      if (b.valid) {
        sdp_cell = fmt(b.bits);
        valid_cell = "true";
      }
      ok_rows.fetch_add(1);
    }
    t.rows[i] = {fmt(F), sdp_cell, bern_cell, valid_cell};
  });
  std::vector<Series> series(2);
  series[0].name = "sdp";
  series[1].name = "bernoulli";
  for (size_t i = 0; i < grid.size(); ++i) {
    if (t.rows[i][1] != "invalid") series[0].pts.emplace_back(grid[i], std::stod(t.rows[i][1]));
    if (t.rows[i][2] != "invalid") series[1].pts.emplace_back(grid[i], std::stod(t.rows[i][2]));
  }
  common.emit(t, "one-shot key bound, isotropic state", "F", "bits", series);
  return ok_rows.load() > 0 ? 0 : 2;
}

int cmd_key_oneshot(const Common& common, double F, int d, const KParam& k, double eps,
                    const std::string& method) {
  diverge::DivergenceValue e;
  if (method == "sdp") {
    if (k.is_inf())
      throw CLI::ValidationError("--k", "the sdp method needs a finite k (use --method bernoulli)");
    e = diverge::e_hyp_state(isotropic(F, d), static_cast<int>(k.value()), eps,
                             common.solver_opts());
    if (!e.ok()) {
      std::cerr << "solver failure computing the divergence\n";
      return 2;
    }
  } else {
    e = diverge::e_hyp_isotropic_n(F, d, k, 1, eps);
  }
  bounds::BoundResult b = bounds::key_bound(e.bits, k);
  std::ofstream file;
  std::ostream& os = report_stream(file, common);
  os << "key-oneshot: F=" << fmt(F) << " d=" << d << " k=" << k.str()
     << " eps=" << fmt(eps) << " method=" << method << "\n";
  os << "divergence_bits = " << fmt(e.bits) << "\n";
  os << "bound_bits      = " << (b.valid ? fmt(b.bits) : "invalid") << "\n";
  os << "valid           = " << (b.valid ? "true" : "false") << "\n";
  return 0;
}

int cmd_key_nshot(const Common& common, double F, int d, double eps,
                  const std::vector<KParam>& ks, long n_min, long n_max) {
  CsvTable t;
  t.header = {"n", "k", "rate_bits_per_copy", "valid"};
  std::vector<Series> series(ks.size());
  for (size_t ki = 0; ki < ks.size(); ++ki) series[ki].name = "k=" + ks[ki].str();
  for (long n = n_min; n <= n_max; ++n) {
    for (size_t ki = 0; ki < ks.size(); ++ki) {
      diverge::DivergenceValue e = diverge::e_hyp_isotropic_n(F, d, ks[ki], n, eps);
      bounds::BoundResult b = bounds::key_bound(e.bits, ks[ki]);
      if (b.valid) {
        const double rate = b.bits / static_cast<double>(n);
        t.rows.push_back({std::to_string(n), ks[ki].str(), fmt(rate), "true"});
        series[ki].pts.emplace_back(static_cast<double>(n), rate);
      } else {
        t.rows.push_back({std::to_string(n), ks[ki].str(), "invalid", "false"});
      }
    }
  }
  common.emit(t, "n-shot key rate bound, isotropic F=" + fmt(F), "n", "bits per copy",
              series);
  return 0;
}

int cmd_min_copies(const Common& common, const std::string& grid_spec,
                   const std::string& eps_spec, int d, const std::vector<KParam>& ks) {
  const std::vector<double> grid = parse_grid(grid_spec);
  const std::vector<double> epss = parse_double_list(eps_spec);
  for (double F : grid)
    if (!(F > 1.0 / d))
      throw CLI::ValidationError("--grid-f", "grid must satisfy F > 1/d");
  CsvTable t;
  t.header = {"F", "eps", "n_min"};
  const long total = static_cast<long>(grid.size() * epss.size());
  t.rows.resize(total);
  parallel_for(total, common.jobs, [&](long idx) {
    const double F = grid[idx / epss.size()];
    const double eps = epss[idx % epss.size()];
    std::optional<long> n = bounds::min_copies_isotropic(F, d, eps, ks);
    t.rows[idx] = {fmt(F), fmt(eps), n ? std::to_string(*n) : "unbounded"};
  });
  std::vector<Series> series(epss.size());
  for (size_t ei = 0; ei < epss.size(); ++ei) series[ei].name = "eps=" + fmt(epss[ei]);
  for (long idx = 0; idx < total; ++idx)
    if (t.rows[idx][2] != "unbounded")
      series[idx % epss.size()].pts.emplace_back(grid[idx / epss.size()],
                                                 std::stod(t.rows[idx][2]));
  common.emit(t, "copies needed for one secret bit", "F", "n_min", series);
  return 0;
}

int cmd_privcap(const Common& common, double p, double eps, const KParam& k, long n_min,
                long n_max) {
  CsvTable t;
  t.header = {"n", "rate_bits_per_use", "valid"};
  Series s;
  s.name = "k=" + k.str();
  const double g = k.is_inf() ? 0.5 : 1.0 / static_cast<double>(k.value());
  for (long n = n_min; n <= n_max; ++n) {
    diverge::DivergenceValue e =
        diverge::dh_bernoulli_n(diverge::BinaryDistributionPair(1.0 - p, g, n), eps);
    bounds::BoundResult b = bounds::privcap_bound(e.bits, k);
    if (b.valid) {
      const double rate = b.bits / static_cast<double>(n);
      t.rows.push_back({std::to_string(n), fmt(rate), "true"});
      s.pts.emplace_back(static_cast<double>(n), rate);
    } else {
      t.rows.push_back({std::to_string(n), "invalid", "false"});
    }
  }
  common.emit(t, "n-shot private capacity bound, erasure p=" + fmt(p), "n",
              "bits per use", {s});
  return 0;
}

int cmd_min_uses(const Common& common, const std::string& grid_spec,
                 const std::string& eps_spec, const std::vector<KParam>& ks) {
  const std::vector<double> grid = parse_grid(grid_spec);
  const std::vector<double> epss = parse_double_list(eps_spec);
  CsvTable t;
  t.header = {"p", "eps", "n_min"};
  const long total = static_cast<long>(grid.size() * epss.size());
  t.rows.resize(total);
  parallel_for(total, common.jobs, [&](long idx) {
    const double p = grid[idx / epss.size()];
    const double eps = epss[idx % epss.size()];
    std::string cell;
    try {
      std::optional<long> n = bounds::min_uses_erasure(p, eps, ks);
      cell = n ? std::to_string(*n) : "unbounded";
    } catch (const std::invalid_argument&) {
      cell = "unbounded";  // no k in the set certifies this p
    }
    t.rows[idx] = {fmt(p), fmt(eps), cell};
  });
  std::vector<Series> series(epss.size());
  for (size_t ei = 0; ei < epss.size(); ++ei) series[ei].name = "eps=" + fmt(epss[ei]);
  for (long idx = 0; idx < total; ++idx)
    if (t.rows[idx][2] != "unbounded")
      series[idx % epss.size()].pts.emplace_back(grid[idx / epss.size()],
                                                 std::stod(t.rows[idx][2]));
  common.emit(t, "erasure-channel uses for one private bit", "p", "n_min", series);
  return 0;
}

ChoiOperator load_choi(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open choi file " + path);
  json j = json::parse(f);
  const int din = j.at("dim_in").get<int>();
  const int dout = j.at("dim_out").get<int>();
  const auto& re = j.at("re");
  const int n = din * dout;
  Mat m = Mat::Zero(n, n);
  if (static_cast<int>(re.size()) != n)
    throw std::invalid_argument("choi file: re matrix has wrong size");
  for (int i = 0; i < n; ++i)
    for (int jc = 0; jc < n; ++jc) m(i, jc) = cd(re[i][jc].get<double>(), 0.0);
  if (j.contains("im")) {
    const auto& im = j.at("im");
    if (static_cast<int>(im.size()) != n)
      throw std::invalid_argument("choi file: im matrix has wrong size");
    for (int i = 0; i < n; ++i)
      for (int jc = 0; jc < n; ++jc) m(i, jc) += cd(0.0, im[i][jc].get<double>());
  }
  return ChoiOperator(m, din, dout);  // constructor enforces the invariants
}

int cmd_channel(const Common& common, const std::string& channel, double p, int d,
                const std::string& choi_file, int k, const std::string& method,
                double eps, int ell, long n) {
  std::optional<ChoiOperator> choi;
  if (channel == "erasure") {
    choi.emplace(erasure_choi(p, d));
  } else if (channel == "choi-file") {
    try {
      choi.emplace(load_choi(choi_file));
    } catch (const std::invalid_argument& e) {
      std::cerr << "invalid Choi operator: " << e.what() << "\n";
      return 3;
    } catch (const json::exception& e) {
      std::cerr << "invalid Choi file: " << e.what() << "\n";
      return 3;
    }
  } else {
    throw CLI::ValidationError("--channel", "expected erasure or choi-file");
  }

  const conic::SolveOptions opts = common.solver_opts();
  diverge::DivergenceValue e;
  bounds::BoundResult b;
  double alpha = std::numeric_limits<double>::infinity();
  if (method == "hyp") {
    if (n != 1)
      throw CLI::ValidationError("--n", "the hyp method is one-shot; use geo or max for n > 1");
    e = diverge::e_hyp_channel(*choi, k, eps, opts);
    if (e.ok()) b = bounds::privcap_bound(e.bits, KParam::finite(k), {eps, {}, n, channel});
  } else if (method == "geo") {
    alpha = 1.0 + std::pow(2.0, -ell);
    e = diverge::e_geo_channel(*choi, k, ell, opts);
    if (e.ok()) b = bounds::privcap_nshot_geo(e.bits, n, k, alpha, eps, {eps, alpha, n, channel});
  } else if (method == "max") {
    e = diverge::e_max_channel(*choi, k, opts);
    if (e.ok())
      b = bounds::privcap_nshot_sandwich(e.bits, n, k, alpha, eps, choi->dim_in(),
                                         {eps, alpha, n, channel});
  } else {
    throw CLI::ValidationError("--method", "expected hyp, geo or max");
  }

  std::ofstream file;
  std::ostream& os = report_stream(file, common);
  os << "channel: " << channel;
  if (channel == "erasure") os << " p=" << fmt(p) << " d=" << d;
  os << " k=" << k << " method=" << method;
  if (method == "hyp") os << " eps=" << fmt(eps);
  if (method == "geo") os << " ell=" << ell << " alpha=" << fmt(alpha);
  if (method != "hyp") os << " n=" << n << " eps=" << fmt(eps);
  os << "\n";
  if (!e.ok()) {
    os << "status = solver failure\n";
    return 2;
  }
  os << "divergence_bits = " << fmt(e.bits) << "\n";
  os << "bound_bits      = " << (b.valid ? fmt(b.bits) : "invalid") << "\n";
  os << "valid           = " << (b.valid ? "true" : "false") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// config file support: a flat JSON object mirroring long option names;
// command-line flags override config values

std::vector<std::string> inject_config(std::vector<std::string> args) {
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + i);
      break;
    }
  }
  if (config_path.empty()) return args;
  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("cannot open config file " + config_path);
  json j = json::parse(f);
  if (!j.is_object()) throw std::runtime_error("config file must be a JSON object");
  // find the subcommand token (first non-flag argument)
  size_t sub_pos = args.size();
  for (size_t i = 0; i < args.size(); ++i)
    if (!args[i].empty() && args[i][0] != '-') {
      sub_pos = i;
      break;
    }
  if (sub_pos == args.size()) return args;
  std::vector<std::string> injected;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    if (it.value().is_boolean()) {
      if (it.value().get<bool>()) injected.push_back(flag);
      continue;
    }
    std::string val;
    if (it.value().is_string()) {
      val = it.value().get<std::string>();
    } else if (it.value().is_array()) {
      std::string acc;
      for (const auto& v : it.value()) {
        if (!acc.empty()) acc += ",";
        acc += v.is_string() ? v.get<std::string>() : fmt(v.get<double>());
      }
      val = acc;
    } else {
      val = fmt(it.value().get<double>());
    }
    injected.push_back(flag);
    injected.push_back(val);
  }
  // config values go right after the subcommand so that user flags win
  args.insert(args.begin() + sub_pos + 1, injected.begin(), injected.end());
  return args;
}

void take_last_everywhere(CLI::App* app) {
  for (CLI::Option* o : app->get_options())
    if (o->get_expected_min() > 0) o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  for (CLI::App* sub : app->get_subcommands({})) take_last_everywhere(sub);
}

}  // namespace

int run(const std::vector<std::string>& args_in) {
  std::vector<std::string> args_vec;
  try {
    args_vec = inject_config(args_in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::vector<std::string> argv_store;
  argv_store.push_back("kext");
  for (const auto& a : args_vec) argv_store.push_back(a);
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  CLI::App app{"k-extendibility upper bounds on one-way distillable key and "
               "forward-assisted private capacity"};
  app.require_subcommand(1);
  std::function<int()> action;

  // privacy-max
  {
    auto* sub = app.add_subcommand(
        "privacy-max", "SDP maximum of the privacy-test pass probability over "
                       "k-extendible states, against the analytic ceiling");
    auto common = std::make_shared<Common>();
    auto d = std::make_shared<int>(2);
    auto k = std::make_shared<int>(2);
    auto sa = std::make_shared<int>(1), sb = std::make_shared<int>(1);
    auto rnd = std::make_shared<bool>(false), ident = std::make_shared<bool>(false);
    auto seed = std::make_shared<unsigned long long>(0);
    auto control = std::make_shared<std::string>("A");
    sub->add_option("--d", *d, "key dimension");
    sub->add_option("--k", *k, "extendibility order");
    sub->add_option("--shield-a", *sa, "shield dimension |A'|");
    sub->add_option("--shield-b", *sb, "shield dimension |B'|");
    sub->add_flag("--random-twist", *rnd, "Haar-random control unitaries");
    sub->add_flag("--identity-twist", *ident, "identity twist (default)");
    sub->add_option("--seed", *seed, "random twist seed");
    sub->add_option("--control", *control, "control register, A or B")
        ->check(CLI::IsMember({"A", "B"}));
    common->add_flags(sub);
    sub->callback([=, &action] {
      action = [=] {
        common->validate();
        return cmd_privacy_max(*common, *d, *k, *sa, *sb, *rnd, *seed, *control);
      };
    });
  }

  // fig1
  {
    auto* sub = app.add_subcommand(
        "fig1", "one-shot key bound of isotropic states over an F grid (CSV)");
    auto common = std::make_shared<Common>();
    auto eps = std::make_shared<double>(0.05);
    auto d = std::make_shared<int>(2);
    auto k = std::make_shared<long>(2);
    auto grid = std::make_shared<std::string>("0.75:1.0:0.005");
    sub->add_option("--eps", *eps, "error tolerance");
    sub->add_option("--d", *d, "local dimension");
    sub->add_option("--k", *k, "extendibility order");
    sub->add_option("--grid-f", *grid, "F grid start:stop:step");
    common->add_flags(sub);
    sub->callback([=, &action] {
      action = [=] {
        common->validate();
        return cmd_fig1(*common, *eps, *d, *k, *grid);
      };
    });
  }

  // key-oneshot
  {
    auto* sub = app.add_subcommand("key-oneshot",
                                   "one-shot key bound for a single isotropic state");
    auto common = std::make_shared<Common>();
    auto f = std::make_shared<double>(0.95);
    auto d = std::make_shared<int>(2);
    auto k = std::make_shared<std::string>("2");
    auto eps = std::make_shared<double>(0.05);
    auto method = std::make_shared<std::string>("sdp");
    sub->add_option("--F", *f, "isotropic fidelity parameter");
    sub->add_option("--d", *d, "local dimension");
    sub->add_option("--k", *k, "extendibility order or inf");
    sub->add_option("--eps", *eps, "error tolerance");
    sub->add_option("--method", *method, "sdp or bernoulli")
        ->check(CLI::IsMember({"sdp", "bernoulli"}));
    common->add_flags(sub);
    sub->callback([=, &action] {
      action = [=] {
        common->validate();
        return cmd_key_oneshot(*common, *f, *d, parse_k(*k), *eps, *method);
      };
    });
  }

  // key-nshot (fig2)
  {
    auto* sub = app.add_subcommand(
        "key-nshot", "n-shot key rate bounds of isotropic states (CSV)");
    auto common = std::make_shared<Common>();
    auto f = std::make_shared<double>(0.95);
    auto d = std::make_shared<int>(2);
    auto eps = std::make_shared<double>(1e-5);
    auto ks = std::make_shared<std::string>("2,3,100000,inf");
    auto n_min = std::make_shared<long>(1), n_max = std::make_shared<long>(50);
    sub->add_option("--F", *f, "isotropic fidelity parameter");
    sub->add_option("--d", *d, "local dimension");
    sub->add_option("--eps", *eps, "error tolerance");
    sub->add_option("--k-list", *ks, "comma-separated k values, inf allowed");
    sub->add_option("--n-min", *n_min, "first copy count");
    sub->add_option("--n-max", *n_max, "last copy count");
    common->add_flags(sub);
    sub->callback([=, &action] {
      action = [=] {
        common->validate();
        return cmd_key_nshot(*common, *f, *d, *eps, parse_k_list(*ks), *n_min, *n_max);
      };
    });
  }

  // min-copies (fig3)
  {
    auto* sub = app.add_subcommand(
        "min-copies", "minimum isotropic copies for one secret bit (CSV)");
    auto common = std::make_shared<Common>();
    auto grid = std::make_shared<std::string>("0.8:1.0:0.01");
    auto epss = std::make_shared<std::string>("0.05,0.001,1e-05");
    auto d = std::make_shared<int>(2);
    auto ks = std::make_shared<std::string>("2,3,inf");
    sub->add_option("--grid-f", *grid, "F grid start:stop:step");
    sub->add_option("--eps-list", *epss, "comma-separated error tolerances");
    sub->add_option("--d", *d, "local dimension");
    sub->add_option("--k-list", *ks, "comma-separated k values, inf allowed");
    common->add_flags(sub);
    sub->callback([=, &action] {
      action = [=] {
        common->validate();
        return cmd_min_copies(*common, *grid, *epss, *d, parse_k_list(*ks));
      };
    });
  }

  // privcap (fig4a)
  {
    auto* sub = app.add_subcommand(
        "privcap", "n-shot private capacity bounds of an erasure channel (CSV)");
    auto common = std::make_shared<Common>();
    auto p = std::make_shared<double>(0.3);
    auto eps = std::make_shared<double>(1e-5);
    auto k = std::make_shared<std::string>("2");
    auto n_min = std::make_shared<long>(1), n_max = std::make_shared<long>(120);
    sub->add_option("--p", *p, "erasure probability");
    sub->add_option("--eps", *eps, "error tolerance");
    sub->add_option("--k", *k, "extendibility order or inf");
    sub->add_option("--n-min", *n_min, "first use count");
    sub->add_option("--n-max", *n_max, "last use count");
    common->add_flags(sub);
    sub->callback([=, &action] {
      action = [=] {
        common->validate();
        return cmd_privcap(*common, *p, *eps, parse_k(*k), *n_min, *n_max);
      };
    });
  }

  // min-uses (fig4b)
  {
    auto* sub = app.add_subcommand(
        "min-uses", "minimum erasure-channel uses for one private bit (CSV)");
    auto common = std::make_shared<Common>();
    auto grid = std::make_shared<std::string>("0.05:0.45:0.05");
    auto epss = std::make_shared<std::string>("0.001,1e-05");
    auto ks = std::make_shared<std::string>("2,inf");
    sub->add_option("--grid-p", *grid, "p grid start:stop:step");
    sub->add_option("--eps-list", *epss, "comma-separated error tolerances");
    sub->add_option("--k-list", *ks, "comma-separated k values, inf allowed");
    common->add_flags(sub);
    sub->callback([=, &action] {
      action = [=] {
        common->validate();
        return cmd_min_uses(*common, *grid, *epss, parse_k_list(*ks));
      };
    });
  }

  // channel
  {
    auto* sub = app.add_subcommand(
        "channel", "k-unextendible channel divergences and capacity bounds");
    auto common = std::make_shared<Common>();
    auto channel = std::make_shared<std::string>("erasure");
    auto p = std::make_shared<double>(0.3);
    auto d = std::make_shared<int>(2);
    auto choi_file = std::make_shared<std::string>();
    auto k = std::make_shared<int>(2);
    auto method = std::make_shared<std::string>("hyp");
    auto eps = std::make_shared<double>(1e-5);
    auto ell = std::make_shared<int>(1);
    auto n = std::make_shared<long>(1);
    sub->add_option("--channel", *channel, "erasure or choi-file");
    sub->add_option("--p", *p, "erasure probability");
    sub->add_option("--d", *d, "erasure input dimension");
    sub->add_option("--choi-file", *choi_file,
                    "JSON file {dim_in, dim_out, re, im} with the Choi operator");
    sub->add_option("--k", *k, "extendibility order");
    sub->add_option("--method", *method, "hyp, geo or max");
    sub->add_option("--eps", *eps, "error tolerance");
    sub->add_option("--ell", *ell, "geometric level, alpha = 1 + 2^-ell");
    sub->add_option("--n", *n, "number of channel uses for geo/max bounds");
    common->add_flags(sub);
    sub->callback([=, &action] {
      action = [=] {
        common->validate();
        return cmd_channel(*common, *channel, *p, *d, *choi_file, *k, *method, *eps,
                           *ell, *n);
      };
    });
  }

  take_last_everywhere(&app);

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    return action ? action() : 1;
  } catch (const conic::GuardExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace kext::cli
