#include "emloc/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "emloc/el.hpp"
#include "emloc/parallel.hpp"

namespace emloc {

using njson = nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t stream_id(const std::string& label) { return fnv1a_hash(label); }

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("rows.csv: missing column " + name);
  }
  double num(const std::vector<std::string>& row, int c) const { return std::stod(row[c]); }
};

void write_table(const Table& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      t.rows.push_back(cells);
    }
  }
  return t;
}

ChannelModelKind kind_from_string(const std::string& s) {
  if (s == "nf") return ChannelModelKind::NF;
  if (s == "ff") return ChannelModelKind::FF;
  if (s == "nfmc") return ChannelModelKind::NFMC;
  if (s == "ffmc") return ChannelModelKind::FFMC;
  if (s == "tm") return ChannelModelKind::TM_Direct;
  throw std::invalid_argument("config error: unknown model kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// config parsing

class ConfigReader {
 public:
  explicit ConfigReader(const njson& j, const std::string& scope = "") : j_(j), scope_(scope) {
    if (!j.is_object()) throw std::invalid_argument("config error: " + where("") + "must be an object");
  }
  ~ConfigReader() = default;

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const std::exception&) {
      throw std::invalid_argument("config error: field '" + where(key) + "' has the wrong type");
    }
  }

  template <typename T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key))
      throw std::invalid_argument("config error: missing required field '" + where(key) + "'");
    try {
      return j_.at(key).get<T>();
    } catch (const std::exception&) {
      throw std::invalid_argument("config error: field '" + where(key) + "' has the wrong type");
    }
  }

  njson sub(const std::string& key) {
    used_.insert(key);
    return j_.value(key, njson::object());
  }

  void check_unknown() const {
    for (const auto& [key, value] : j_.items())
      if (used_.count(key) == 0)
        throw std::invalid_argument("config error: unknown field '" + where(key) + "'");
  }

 private:
  std::string where(const std::string& key) const {
    return scope_.empty() ? key : scope_ + "." + key;
  }
  const njson& j_;
  std::string scope_;
  std::set<std::string> used_;
};

ElementLayout parse_layout(const njson& spec, const std::string& scope, double wavelength,
                           const DipoleDims& dims, bool is_ris) {
  ConfigReader r(spec, scope);
  const std::string layout = r.get<std::string>("layout", "uniform");
  const double spacing = r.get<double>("spacing_lambda", 0.5) * wavelength;
  Vec3 origin = Vec3::Zero();
  double phi = 0.0;
  if (is_ris) {
    const auto o = r.get<std::vector<double>>("origin_m", {1.0, 0.0, 1.0});
    if (o.size() != 3) throw std::invalid_argument("config error: " + scope + ".origin_m needs 3 values");
    origin = Vec3(o[0], o[1], o[2]);
    phi = r.get<double>("phi_rad", M_PI / 2.0);
    (void)r.get<double>("r0_ohm", 0.2);  // consumed by the caller
  }
  ElementLayout out;
  if (layout == "uniform") {
    const int nh = r.get<int>("nh", is_ris ? 10 : 8);
    const int nv = r.get<int>("nv", is_ris ? 10 : 8);
    out = is_ris ? build_ris_layout(nh, nv, spacing, spacing, origin, phi, dims)
                 : build_uniform_array(nh, nv, spacing, spacing, dims);
  } else if (layout == "min-redundancy") {
    const std::vector<int> default_gaps =
        is_ris ? std::vector<int>{1, 2, 3, 7, 7, 7, 4, 4, 1} : std::vector<int>{1, 3, 6, 6, 2, 3, 2};
    const auto gaps = r.get<std::vector<int>>("gaps", default_gaps);
    RedundancyPattern pat{gaps, spacing};
    out = build_min_redundancy_layout(pat, pat, dims,
                                      is_ris ? LayoutKind::RIS : LayoutKind::BSArray, origin, phi);
  } else {
    throw std::invalid_argument("config error: " + scope + ".layout must be uniform or min-redundancy");
  }
  r.check_unknown();
  return out;
}

OptimizationArea parse_area(const njson& spec, const std::string& scope) {
  ConfigReader r(spec, scope);
  (void)r.get<std::string>("name", "");
  const std::string kind = r.require<std::string>("kind");
  OptimizationArea area;
  if (kind == "continuous") {
    area = OptimizationArea::continuous(r.get<double>("lo_ohm", -500.0),
                                        r.get<double>("hi_ohm", 500.0));
  } else if (kind == "fa") {
    area = OptimizationArea::finite(r.require<std::vector<double>>("values_ohm"));
  } else {
    throw std::invalid_argument("config error: " + scope + ".kind must be continuous or fa");
  }
  r.check_unknown();
  return area;
}

njson effective_config_json(const ExperimentConfig& cfg, const njson& raw);

}  // namespace

ExperimentConfig parse_experiment_config_text(const std::string& json_text) {
  njson raw;
  try {
    raw = njson::parse(json_text);
  } catch (const njson::parse_error& e) {
    throw std::invalid_argument(std::string("config error: invalid JSON: ") + e.what());
  }

  ConfigReader r(raw);
  (void)r.sub("derived");  // informational block written into manifests
  ExperimentConfig cfg;
  cfg.experiment = r.require<std::string>("experiment");
  const std::set<std::string> known = {"lr-dist", "gamma-map", "locate", "q-map", "ris-opt",
                                       "grouping"};
  if (known.count(cfg.experiment) == 0)
    throw std::invalid_argument("config error: unknown experiment '" + cfg.experiment + "'");

  cfg.seed = r.get<std::uint64_t>("seed", 1);
  cfg.trials = r.get<int>("trials", 100);
  if (cfg.trials < 0) throw std::invalid_argument("config error: trials must be >= 0");
  cfg.workers = r.get<int>("workers", 1);
  cfg.carrier_hz = r.get<double>("carrier_ghz", 28.0) * 1e9;
  const double wavelength = cfg.wavelength();
  cfg.dims.half_length = r.get<double>("dipole_length_lambda", 0.5) / 2.0 * wavelength;
  cfg.dims.radius = r.get<double>("dipole_radius_lambda", 1.0 / 500.0) * wavelength;
  cfg.z_load_ohm = r.get<double>("z_load_ohm", 50.0);

  const std::string link = r.get<std::string>("link", "direct");
  if (link == "direct")
    cfg.link = LinkKind::Direct;
  else if (link == "ris")
    cfg.link = LinkKind::RISOnly;
  else
    throw std::invalid_argument("config error: link must be direct or ris");

  cfg.bs = parse_layout(r.sub("bs"), "bs", wavelength, cfg.dims, false);
  if (r.has("ris")) cfg.ris = parse_layout(r.sub("ris"), "ris", wavelength, cfg.dims, true);
  const bool needs_channel = cfg.experiment != "lr-dist";
  if (cfg.link == LinkKind::RISOnly && needs_channel && !cfg.ris)
    throw std::invalid_argument("config error: a RIS experiment needs a 'ris' layout block");
  if (r.has("ris")) {
    ConfigReader rr(raw.at("ris"), "ris");
    cfg.r0_ohm = rr.get<double>("r0_ohm", 0.2);
    // layout fields are validated in parse_layout
  }

  // sources with per-link baseline positions
  if (r.has("sources")) {
    for (const auto& s : r.sub("sources")) {
      ConfigReader sr(s, "sources[]");
      const auto pos = sr.require<std::vector<double>>("position_m");
      if (pos.size() != 3)
        throw std::invalid_argument("config error: sources[].position_m needs 3 values");
      cfg.source_positions.emplace_back(pos[0], pos[1], pos[2]);
      cfg.source_power_dbm.push_back(sr.get<double>("power_dbm", 20.0));
      sr.check_unknown();
    }
    if (cfg.source_positions.empty())
      throw std::invalid_argument("config error: sources must be non-empty");
    const double y0 = cfg.source_positions.front().y();
    for (const auto& p : cfg.source_positions)
      if (p.y() != y0)
        throw std::invalid_argument("config error: all sources must lie on one y-plane");
  } else {
    if (cfg.link == LinkKind::Direct) {
      cfg.source_positions = {Vec3(-2.0, -0.5, 4.0)};
      cfg.source_power_dbm = {20.0};
      cfg.notices.push_back("sources defaulted to [-2,-0.5,4] m at 20 dBm");
    } else {
      cfg.source_positions = {Vec3(-1.51, -1.0, 6.61)};
      cfg.source_power_dbm = {0.0};
      cfg.notices.push_back("sources defaulted to [-1.51,-1,6.61] m at 0 dBm");
    }
  }
  cfg.power_dbm_list = r.get<std::vector<double>>("power_dbm_list", {});

  if (r.has("noise_dbm")) {
    cfg.noise_dbm = r.get<double>("noise_dbm", -87.0);
  } else {
    cfg.noise_dbm = (cfg.link == LinkKind::Direct) ? -87.0 : -120.0;
    cfg.notices.push_back("noise_dbm defaulted to " + fmt_g(cfg.noise_dbm));
  }

  const bool has_t = r.has("t_snapshots");
  const bool has_t12 = r.has("t1_snapshots") || r.has("t2_snapshots");
  if (has_t && has_t12)
    throw std::invalid_argument("config error: t_snapshots conflicts with t1/t2_snapshots");
  cfg.t = r.get<int>("t_snapshots", 10);
  cfg.t1 = r.get<int>("t1_snapshots", 10);
  cfg.t2 = r.get<int>("t2_snapshots", 10);
  if (has_t12) cfg.t = cfg.t2;

  for (const auto& s : r.get<std::vector<std::string>>("mm_kinds", {"nfmc"}))
    cfg.mm_kinds.push_back(kind_from_string(s));
  if (cfg.link == LinkKind::RISOnly)
    for (auto k : cfg.mm_kinds)
      if (needs_channel && !is_mc_corrected(k) && k != ChannelModelKind::TM_Direct)
        throw std::invalid_argument("config error: RIS experiments need MC-corrected models");

  {
    const njson g = r.sub("grid");
    ConfigReader gr(g, "grid");
    if (gr.has("center_m")) {
      const auto c = gr.require<std::vector<double>>("center_m");
      if (c.size() != 2) throw std::invalid_argument("config error: grid.center_m needs [x,z]");
      cfg.grid_center_auto = false;
      cfg.grid_center_x = c[0];
      cfg.grid_center_z = c[1];
    }
    const bool ris_map = (cfg.link == LinkKind::RISOnly) &&
                         (cfg.experiment == "q-map" || cfg.experiment == "ris-opt" ||
                          cfg.experiment == "grouping");
    cfg.grid_span_x = gr.get<double>("span_x_m", ris_map ? 4.0 : 1.4);
    cfg.grid_span_z = gr.get<double>("span_z_m", ris_map ? 7.0 : 1.4);
    cfg.grid_nx = gr.get<int>("nx", ris_map ? 41 : 15);
    cfg.grid_nz = gr.get<int>("nz", ris_map ? 41 : 15);
    if (ris_map && !gr.has("center_m")) {
      cfg.grid_center_auto = false;
      cfg.grid_center_x = -1.0;  // paper search area x in [-3,1], z in [1,8]
      cfg.grid_center_z = 4.5;
      cfg.notices.push_back("grid defaulted to the RIS search area x=[-3,1], z=[1,8]");
    }
    gr.check_unknown();
  }
  {
    const njson rj = r.sub("refine");
    ConfigReader rr(rj, "refine");
    cfg.refine_enabled = rr.get<bool>("enabled", true);
    cfg.refine_nx = rr.get<int>("nx", 50);
    cfg.refine_nz = rr.get<int>("nz", 50);
    rr.check_unknown();
  }

  cfg.p_beta = r.get<double>("p_beta", 0.01);
  if (!(cfg.p_beta > 0.0 && cfg.p_beta < 1.0))
    throw std::invalid_argument("config error: p_beta must be in (0,1)");
  cfg.ref_draws = r.get<int>("ref_draws", 10000);
  cfg.ref_seed = r.get<std::uint64_t>("ref_seed", 99);
  const std::string symbols = r.get<std::string>("symbols", "qpsk");
  if (symbols == "qpsk")
    cfg.alphabet = SymbolAlphabet::QPSK;
  else if (symbols == "gaussian")
    cfg.alphabet = SymbolAlphabet::Gaussian;
  else
    throw std::invalid_argument("config error: symbols must be qpsk or gaussian");

  cfg.mu_profile_ohm = r.get<double>("mu_profile_ohm", 100.0);
  if (r.has("opt_areas")) {
    for (const auto& a : r.sub("opt_areas")) {
      if (!a.is_object() || !a.contains("name"))
        throw std::invalid_argument("config error: opt_areas[] entries need a name");
      cfg.opt_areas.emplace_back(a.at("name").get<std::string>(), parse_area(a, "opt_areas[]"));
    }
  } else if (cfg.experiment == "ris-opt") {
    const double mu = cfg.mu_profile_ohm;
    cfg.opt_areas.emplace_back("continuous", OptimizationArea::continuous(-500.0, 500.0));
    cfg.opt_areas.emplace_back("fa1",
                               OptimizationArea::finite({-2 * mu, -mu, 0.0, mu, 2 * mu}));
    cfg.opt_areas.emplace_back("fa2", OptimizationArea::finite({-mu, mu}));
    cfg.notices.push_back("opt_areas defaulted to continuous [-500,500], fa1, fa2");
  }
  cfg.protocol = r.get<std::string>("protocol", "algorithm2");
  if (cfg.protocol != "algorithm2" && cfg.protocol != "two-stage")
    throw std::invalid_argument("config error: protocol must be algorithm2 or two-stage");
  cfg.max_sweeps = r.get<int>("max_sweeps", 100);
  cfg.gamma_k = r.get<int>("gamma_k", 50);
  cfg.grouping_peaks = r.get<int>("grouping_peaks", 3);
  cfg.lr_dist_n = r.get<int>("lr_dist_n", cfg.bs.size());
  {
    auto tl = r.get<std::vector<int>>("lr_dist_t_list", {cfg.t});
    cfg.lr_dist_t_list = tl;
  }

  r.check_unknown();
  cfg.effective_json = effective_config_json(cfg, raw).dump(2);
  return cfg;
}

namespace {

njson effective_config_json(const ExperimentConfig& cfg, const njson& raw) {
  njson out = raw;
  out["experiment"] = cfg.experiment;
  out["seed"] = cfg.seed;
  out["trials"] = cfg.trials;
  out["carrier_ghz"] = cfg.carrier_hz / 1e9;
  out["link"] = (cfg.link == LinkKind::Direct) ? "direct" : "ris";
  out["noise_dbm"] = cfg.noise_dbm;
  out["t_snapshots"] = cfg.t;
  out["p_beta"] = cfg.p_beta;
  out["ref_draws"] = cfg.ref_draws;
  out["ref_seed"] = cfg.ref_seed;
  njson sources = njson::array();
  for (size_t i = 0; i < cfg.source_positions.size(); ++i) {
    sources.push_back({{"position_m",
                        {cfg.source_positions[i].x(), cfg.source_positions[i].y(),
                         cfg.source_positions[i].z()}},
                       {"power_dbm", cfg.source_power_dbm[i]}});
  }
  out["sources"] = sources;
  njson derived;
  derived["bs_elements"] = cfg.bs.size();
  derived["wavelength_m"] = cfg.wavelength();
  if (cfg.ris) derived["ris_elements"] = cfg.ris->size();
  out["derived"] = derived;
  return out;
}

// ---------------------------------------------------------------------------
// shared experiment helpers

PhysicalScenario build_scenario(const ExperimentConfig& cfg, const std::vector<double>& powers_dbm) {
  RVector g(static_cast<int>(powers_dbm.size()));
  for (size_t i = 0; i < powers_dbm.size(); ++i) g(static_cast<int>(i)) = dbm_to_watt(powers_dbm[i]);
  return compile_scenario(cfg.carrier_hz, cfg.dims, cfg.bs, cfg.ris, cfg.link,
                          cfg.source_positions, g, dbm_to_watt(cfg.noise_dbm), cfg.t,
                          cfg.z_load_ohm, cfg.r0_ohm);
}

SearchGrid build_grid(const ExperimentConfig& cfg) {
  double cx = cfg.grid_center_x, cz = cfg.grid_center_z;
  if (cfg.grid_center_auto) {
    cx = cz = 0.0;
    for (const auto& p : cfg.source_positions) {
      cx += p.x();
      cz += p.z();
    }
    cx /= cfg.source_positions.size();
    cz /= cfg.source_positions.size();
  }
  return SearchGrid::centered(cx, cz, cfg.grid_span_x, cfg.grid_span_z, cfg.grid_nx, cfg.grid_nz,
                              cfg.source_positions.front().y());
}

std::vector<double> sweep_powers(const ExperimentConfig& cfg) {
  if (!cfg.power_dbm_list.empty()) return cfg.power_dbm_list;
  return {cfg.source_power_dbm.front()};
}

// RMSE per axis and source with the best assignment of estimates to truths
struct AxisErrors {
  std::vector<double> dx2, dz2;  // per source, squared errors accumulated
  int count = 0;
};

void accumulate_axis_errors(AxisErrors& acc, const std::vector<Vec3>& truth,
                            const std::vector<double>& est_x, const std::vector<double>& est_z) {
  const int m = static_cast<int>(truth.size());
  if (acc.dx2.empty()) {
    acc.dx2.assign(m, 0.0);
    acc.dz2.assign(m, 0.0);
  }
  // best permutation by total squared distance (m <= 3 here; brute force)
  std::vector<int> perm(m), best_perm(m);
  for (int i = 0; i < m; ++i) perm[i] = i;
  double best = std::numeric_limits<double>::infinity();
  do {
    double tot = 0.0;
    for (int i = 0; i < m; ++i) {
      const double dx = est_x[perm[i]] - truth[i].x();
      const double dz = est_z[perm[i]] - truth[i].z();
      tot += dx * dx + dz * dz;
    }
    if (tot < best) {
      best = tot;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (int i = 0; i < m; ++i) {
    const double dx = est_x[best_perm[i]] - truth[i].x();
    const double dz = est_z[best_perm[i]] - truth[i].z();
    acc.dx2[i] += dx * dx;
    acc.dz2[i] += dz * dz;
  }
  acc.count += 1;
}

// ---------------------------------------------------------------------------
// experiment: lr-dist

njson aggregate_lr_dist(const Table& t, double p_beta) {
  njson agg;
  const int ct = t.col("t"), clr = t.col("lr");
  std::map<int, std::vector<double>> by_t;
  for (const auto& row : t.rows) by_t[static_cast<int>(t.num(row, ct))].push_back(t.num(row, clr));
  for (auto& [tt, samples] : by_t) {
    std::sort(samples.begin(), samples.end());
    LRDistribution d;
    d.samples = samples;
    d.n = 0;
    d.t = tt;
    d.n_draws = static_cast<int>(samples.size());
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= samples.size();
    agg["t=" + std::to_string(tt)] = {{"beta", lr_threshold(d, p_beta)},
                                      {"mean", mean},
                                      {"min", samples.front()},
                                      {"max", samples.back()},
                                      {"draws", d.n_draws}};
  }
  return agg;
}

void run_lr_dist(const ExperimentConfig& cfg, Table& rows) {
  rows.header = {"t", "draw", "lr"};
  for (int tt : cfg.lr_dist_t_list) {
    Rng rng(derive_seed(cfg.seed, stream_id("lr-dist"), tt));
    const auto dist = lr_reference_distribution(cfg.lr_dist_n, tt, cfg.ref_draws, rng);
    for (int i = 0; i < dist.n_draws; ++i)
      rows.rows.push_back({std::to_string(tt), std::to_string(i), fmt_g(dist.samples[i])});
  }
}

// ---------------------------------------------------------------------------
// experiment: gamma-map

njson aggregate_gamma_map(const Table& t) {
  njson agg;
  const int cm = t.col("mm"), cg = t.col("g_dbm"), cgam = t.col("gamma");
  std::map<std::string, std::vector<double>> groups;
  for (const auto& row : t.rows)
    groups[row[cm] + "/g=" + row[cg]].push_back(t.num(row, cgam));
  for (auto& [key, vals] : groups) {
    double mean = 0.0, lo = 1e300, hi = -1e300;
    int near_one = 0;
    for (double v : vals) {
      mean += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (v >= 0.9 && v <= 1.1) ++near_one;
    }
    mean /= vals.size();
    agg[key] = {{"mean", mean},
                {"min", lo},
                {"max", hi},
                {"frac_near_one", static_cast<double>(near_one) / vals.size()},
                {"points", vals.size()}};
  }
  return agg;
}

void run_gamma_map(const ExperimentConfig& cfg, Table& rows) {
  rows.header = {"mm", "g_dbm", "ix", "iz", "x_m", "z_m", "gamma"};
  auto sc = build_scenario(cfg, cfg.source_power_dbm);
  const SearchGrid grid = build_grid(cfg);

  Rng ref_rng(cfg.ref_seed);
  const auto ref = lr_reference_distribution(sc.n(), cfg.t, cfg.ref_draws, ref_rng);
  const double ref_mean = ref.mean();

  std::optional<RVector> profile;
  if (cfg.link == LinkKind::RISOnly) {
    Rng prng(derive_seed(cfg.seed, stream_id("profile"), 0));
    RVector f(sc.n_ris());
    for (int i = 0; i < f.size(); ++i) f(i) = cfg.mu_profile_ohm * prng.normal();
    profile = f;
  }
  const TrueChannelOp op(sc, profile ? &*profile : nullptr);

  for (ChannelModelKind kind : cfg.mm_kinds) {
    const Manifold mm = sc.manifold(kind, profile ? &*profile : nullptr);
    for (double g_dbm : sweep_powers(cfg)) {
      const RVector g = RVector::Constant(1, dbm_to_watt(g_dbm));
      const std::uint64_t stream =
          stream_id(std::string("gamma/") + to_string(kind) + "/" + fmt_g(g_dbm));
      const int npts = grid.nx * grid.nz;
      std::vector<double> gamma(npts);
      parallel_for(npts, cfg.workers, [&](int idx) {
        const int ix = idx / grid.nz, iz = idx % grid.nz;
        const Vec3 p = grid.point(ix, iz);
        const CMatrix h_true = op.column(p);
        const CMatrix h_mm = mm.vector(p);
        Rng rng(derive_seed(cfg.seed, stream, idx));
        gamma[idx] = mismatch_metric_gamma(h_true, h_mm, g, sc.sigma2_watt, cfg.t, cfg.gamma_k,
                                           ref_mean, rng, cfg.alphabet);
      });
      for (int idx = 0; idx < npts; ++idx) {
        const int ix = idx / grid.nz, iz = idx % grid.nz;
        rows.rows.push_back({to_string(kind), fmt_g(g_dbm), std::to_string(ix), std::to_string(iz),
                             fmt_g(grid.x_at(ix)), fmt_g(grid.z_at(iz)), fmt_g(gamma[idx])});
      }
    }
  }
}

// ---------------------------------------------------------------------------
// experiment: locate

njson aggregate_locate(const Table& t, const std::vector<Vec3>& truth) {
  njson agg;
  const int cm = t.col("mm"), cg = t.col("g_dbm"), cmh = t.col("m_hat"),
            crel = t.col("reliable"), clr = t.col("lr");
  const int m = static_cast<int>(truth.size());
  std::vector<int> cx(m), cz(m);
  for (int s = 0; s < m; ++s) {
    cx[s] = t.col("x" + std::to_string(s));
    cz[s] = t.col("z" + std::to_string(s));
  }

  struct Group {
    AxisErrors err;
    int trials = 0, resolved = 0, outliers = 0, classified = 0;
    std::vector<double> lrs;
  };
  std::map<std::string, Group> groups;
  for (const auto& row : t.rows) {
    auto& gr = groups[row[cm] + "/g=" + row[cg]];
    gr.trials += 1;
    const int m_hat = static_cast<int>(t.num(row, cmh));
    if (m_hat >= 1) {
      gr.classified += 1;
      gr.lrs.push_back(t.num(row, clr));
      if (row[crel] == "0") gr.outliers += 1;
    }
    if (m_hat == m) {
      gr.resolved += 1;
      std::vector<double> ex(m), ez(m);
      for (int s = 0; s < m; ++s) {
        ex[s] = t.num(row, cx[s]);
        ez[s] = t.num(row, cz[s]);
      }
      accumulate_axis_errors(gr.err, truth, ex, ez);
    }
  }
  for (auto& [key, gr] : groups) {
    njson rmse_x = njson::array(), rmse_z = njson::array();
    for (int s = 0; s < m; ++s) {
      rmse_x.push_back(gr.err.count ? std::sqrt(gr.err.dx2[s] / gr.err.count) : -1.0);
      rmse_z.push_back(gr.err.count ? std::sqrt(gr.err.dz2[s] / gr.err.count) : -1.0);
    }
    // 20-bin LR histogram over [0,1]
    std::vector<int> hist(20, 0);
    for (double v : gr.lrs) hist[std::min(19, static_cast<int>(v * 20.0))] += 1;
    agg[key] = {{"trials", gr.trials},
                {"resolved", gr.resolved},
                {"classified", gr.classified},
                {"outliers", gr.outliers},
                {"outlier_fraction", gr.classified ? static_cast<double>(gr.outliers) / gr.classified : 0.0},
                {"rmse_x_m", rmse_x},
                {"rmse_z_m", rmse_z},
                {"lr_hist", hist}};
  }
  return agg;
}

void run_locate(const ExperimentConfig& cfg, Table& rows, njson& model_info) {
  const int m = static_cast<int>(cfg.source_positions.size());
  rows.header = {"mm", "g_dbm", "trial", "seed", "m_hat", "refined", "lr", "beta", "reliable",
                 "objective"};
  for (int s = 0; s < m; ++s) {
    rows.header.push_back("x" + std::to_string(s));
    rows.header.push_back("z" + std::to_string(s));
    rows.header.push_back("g" + std::to_string(s));
  }

  auto sc0 = build_scenario(cfg, cfg.source_power_dbm);
  const SearchGrid grid = build_grid(cfg);
  Rng ref_rng(cfg.ref_seed);
  const auto ref = lr_reference_distribution(sc0.n(), cfg.t, cfg.ref_draws, ref_rng);
  const double beta = lr_threshold(ref, cfg.p_beta);
  model_info["beta"] = beta;

  std::optional<RVector> profile;
  if (cfg.link == LinkKind::RISOnly) {
    Rng prng(derive_seed(cfg.seed, stream_id("profile"), 0));
    RVector f(sc0.n_ris());
    for (int i = 0; i < f.size(); ++i) f(i) = cfg.mu_profile_ohm * prng.normal();
    profile = f;
  }

  for (double g_dbm : sweep_powers(cfg)) {
    PhysicalScenario sc = sc0;
    sc.g_watts = RVector::Constant(m, dbm_to_watt(g_dbm));
    const TrueChannelOp op(sc, profile ? &*profile : nullptr);
    const CMatrix h_true = op.matrix();

    // model-side info: true-model CRB at the truth
    {
      const RVector q = pack_estimate(sc.source_positions, sc.g_watts);
      auto op_ptr = std::make_shared<TrueChannelOp>(sc, profile ? &*profile : nullptr);
      const auto model = tm_covariance_model(op_ptr, sc.sigma2_watt, sc.source_plane_y());
      const RMatrix j = fisher_information(model, q, cfg.t, default_fd_deltas(q));
      const RVector axes = crb_axes_from_fisher(j);
      njson crb_x = njson::array(), crb_z = njson::array();
      for (int s = 0; s < m; ++s) {
        crb_x.push_back(axes(3 * s));
        crb_z.push_back(axes(3 * s + 1));
      }
      model_info["tm_crb/g=" + fmt_g(g_dbm)] = {{"x_m", crb_x}, {"z_m", crb_z}};
    }

    for (ChannelModelKind kind : cfg.mm_kinds) {
      const Manifold mm = sc.manifold(kind, profile ? &*profile : nullptr);
      // mismatched-model CRB at the truth for model ordering studies
      {
        const RVector q = pack_estimate(sc.source_positions, sc.g_watts);
        const auto model = mm_covariance_model(mm, sc.sigma2_watt, sc.source_plane_y());
        const RMatrix j = fisher_information(model, q, cfg.t, default_fd_deltas(q));
        const RVector axes = crb_axes_from_fisher(j);
        njson crb_x = njson::array(), crb_z = njson::array();
        for (int s = 0; s < m; ++s) {
          crb_x.push_back(axes(3 * s));
          crb_z.push_back(axes(3 * s + 1));
        }
        model_info[std::string("mm_crb/") + to_string(kind) + "/g=" + fmt_g(g_dbm)] = {
            {"x_m", crb_x}, {"z_m", crb_z}};
      }

      const std::uint64_t stream =
          stream_id(std::string("locate/") + to_string(kind) + "/" + fmt_g(g_dbm));
      std::vector<std::vector<std::string>> slot(cfg.trials);
      parallel_for(cfg.trials, cfg.workers, [&](int trial) {
        const std::uint64_t tseed = derive_seed(cfg.seed, stream, trial);
        Rng rng(tseed);
        const auto snap =
            generate_received(h_true, sc.g_watts, sc.sigma2_watt, cfg.t, rng, cfg.alphabet);
        LocalizeOptions opts;
        opts.p_beta = cfg.p_beta;
        opts.refine_outliers = cfg.refine_enabled;
        opts.refine_nx = cfg.refine_nx;
        opts.refine_nz = cfg.refine_nz;
        const auto res = localize(snap.x, mm, grid, sc.sigma2_watt, ref, opts);

        std::vector<std::string> row = {to_string(kind),
                                        fmt_g(g_dbm),
                                        std::to_string(trial),
                                        std::to_string(tseed),
                                        std::to_string(res.m_hat),
                                        res.refined_from_outlier ? "1" : "0",
                                        fmt_g(res.lr_value),
                                        fmt_g(beta),
                                        (res.classification &&
                                         res.classification->label == Reliability::Reliable)
                                            ? "1"
                                            : "0",
                                        fmt_g(res.objective)};
        for (int s = 0; s < m; ++s) {
          if (s < static_cast<int>(res.p_hat.size())) {
            row.push_back(fmt_g(res.p_hat[s].x()));
            row.push_back(fmt_g(res.p_hat[s].z()));
            row.push_back(fmt_g(res.g_hat(s)));
          } else {
            row.push_back("nan");
            row.push_back("nan");
            row.push_back("nan");
          }
        }
        slot[trial] = std::move(row);
      });
      for (auto& row : slot) rows.rows.push_back(std::move(row));
    }
  }
}

// ---------------------------------------------------------------------------
// experiment: q-map

njson aggregate_q_map(const Table& t, double p0_x, double p0_z) {
  const int cx = t.col("x_m"), cz = t.col("z_m"), cq = t.col("q_db"), cix = t.col("ix"),
            ciz = t.col("iz");
  // nearest cell to the true location
  double best = 1e300;
  int best_ix = 0, best_iz = 0;
  for (const auto& row : t.rows) {
    const double d = std::hypot(t.num(row, cx) - p0_x, t.num(row, cz) - p0_z);
    if (d < best) {
      best = d;
      best_ix = static_cast<int>(t.num(row, cix));
      best_iz = static_cast<int>(t.num(row, ciz));
    }
  }
  int below = 0, total = 0;
  for (const auto& row : t.rows) {
    const int ix = static_cast<int>(t.num(row, cix)), iz = static_cast<int>(t.num(row, ciz));
    if (std::abs(ix - best_ix) <= 1 && std::abs(iz - best_iz) <= 1) continue;
    ++total;
    if (t.num(row, cq) < -20.0) ++below;
  }
  return njson{{"sub_-20db_points", below},
               {"points_outside_true_cell", total},
               {"true_cell", {best_ix, best_iz}}};
}

void run_q_map(const ExperimentConfig& cfg, Table& rows, njson& model_info) {
  rows.header = {"ix", "iz", "x_m", "z_m", "q", "q_db", "music"};
  auto sc = build_scenario(cfg, cfg.source_power_dbm);
  const SearchGrid grid = build_grid(cfg);

  std::optional<RVector> profile;
  if (cfg.link == LinkKind::RISOnly) {
    Rng prng(derive_seed(cfg.seed, stream_id("profile"), 0));
    RVector f(sc.n_ris());
    for (int i = 0; i < f.size(); ++i) f(i) = cfg.mu_profile_ohm * prng.normal();
    profile = f;
  }
  const TrueChannelOp op(sc, profile ? &*profile : nullptr);
  const Vec3 p0 = sc.source_positions.front();
  const CVector h0 = op.column(p0);

  // one received-signal realization for the MUSIC pattern
  Rng rng(derive_seed(cfg.seed, stream_id("q-map"), 0));
  const auto snap = generate_received(op.matrix(), sc.g_watts, sc.sigma2_watt, cfg.t, rng,
                                      cfg.alphabet);
  const int m_hat = std::max(1, estimate_num_sources_mdl(snap.x));
  const Manifold mm = sc.manifold(cfg.mm_kinds.front(), profile ? &*profile : nullptr);
  const RMatrix spectrum = music_spectrum(sample_covariance(snap.x), m_hat, grid, mm);
  model_info["m_hat"] = m_hat;

  const int npts = grid.nx * grid.nz;
  std::vector<double> qv(npts);
  parallel_for(npts, cfg.workers, [&](int idx) {
    const int ix = idx / grid.nz, iz = idx % grid.nz;
    qv[idx] = q_metric(op.column(grid.point(ix, iz)), h0);
  });
  for (int idx = 0; idx < npts; ++idx) {
    const int ix = idx / grid.nz, iz = idx % grid.nz;
    const double qdb = 10.0 * std::log10(std::max(qv[idx], 1e-300));
    rows.rows.push_back({std::to_string(ix), std::to_string(iz), fmt_g(grid.x_at(ix)),
                         fmt_g(grid.z_at(iz)), fmt_g(qv[idx]), fmt_g(qdb),
                         fmt_g(spectrum(ix, iz))});
  }
}

// ---------------------------------------------------------------------------
// experiment: ris-opt

njson aggregate_ris_opt(const Table& t) {
  njson agg;
  const int ca = t.col("area"), ctr = t.col("trial"), ck = t.col("kind"), cc = t.col("crb");
  struct Group {
    std::map<int, std::vector<double>> step_traces;  // trial -> accepted-update trace
    std::map<int, double> final_crb;
    std::map<int, int> sweeps;
  };
  std::map<std::string, Group> groups;
  for (const auto& row : t.rows) {
    auto& gr = groups[row[ca]];
    const int trial = static_cast<int>(t.num(row, ctr));
    if (row[ck] == "step")
      gr.step_traces[trial].push_back(t.num(row, cc));
    else if (row[ck] == "sweep") {
      gr.final_crb[trial] = t.num(row, cc);
      gr.sweeps[trial] += 1;
    }
  }
  for (auto& [area, gr] : groups) {
    bool monotone = true;
    for (auto& [trial, trace] : gr.step_traces)
      for (size_t i = 1; i < trace.size(); ++i)
        if (trace[i] > trace[i - 1] * (1.0 + 1e-12)) monotone = false;
    double final_mean = 0.0, sweeps_mean = 0.0;
    int sweeps_max = 0;
    for (auto& [trial, v] : gr.final_crb) final_mean += v;
    for (auto& [trial, s] : gr.sweeps) {
      sweeps_mean += s;
      sweeps_max = std::max(sweeps_max, s);
    }
    const double nt = static_cast<double>(gr.final_crb.size());
    agg[area] = {{"crb_final_mean", final_mean / nt},
                 {"sweeps_mean", sweeps_mean / nt},
                 {"sweeps_max", sweeps_max},
                 {"monotone", monotone},
                 {"trials", gr.final_crb.size()}};
  }
  return agg;
}

njson aggregate_two_stage(const Table& t, const std::vector<Vec3>& truth) {
  const int cm = t.col("final_m"), cx = t.col("final_x"), cz = t.col("final_z"),
            crel = t.col("reliable"), cco = t.col("crb_opt"), ccr = t.col("crb_random"),
            cearly = t.col("early");
  AxisErrors err;
  int reliable = 0, classified = 0, early = 0;
  double crb_opt_mean = 0.0, crb_rand_mean = 0.0;
  int crb_count = 0;
  for (const auto& row : t.rows) {
    if (row[cearly] == "1") {
      ++early;
      continue;
    }
    crb_opt_mean += t.num(row, cco);
    crb_rand_mean += t.num(row, ccr);
    ++crb_count;
    if (static_cast<int>(t.num(row, cm)) == static_cast<int>(truth.size())) {
      accumulate_axis_errors(err, truth, {t.num(row, cx)}, {t.num(row, cz)});
      ++classified;
      if (row[crel] == "1") ++reliable;
    }
  }
  njson agg;
  agg["early_returns"] = early;
  agg["resolved"] = err.count;
  agg["rmse_x_m"] = err.count ? std::sqrt(err.dx2[0] / err.count) : -1.0;
  agg["rmse_z_m"] = err.count ? std::sqrt(err.dz2[0] / err.count) : -1.0;
  agg["reliable_fraction"] = classified ? static_cast<double>(reliable) / classified : 0.0;
  agg["crb_opt_mean"] = crb_count ? crb_opt_mean / crb_count : -1.0;
  agg["crb_random_mean"] = crb_count ? crb_rand_mean / crb_count : -1.0;
  return agg;
}

void run_ris_opt(const ExperimentConfig& cfg, Table& rows, njson& model_info) {
  if (cfg.link != LinkKind::RISOnly)
    throw std::invalid_argument("config error: ris-opt requires link = ris");
  auto sc = build_scenario(cfg, cfg.source_power_dbm);
  const ChannelModelKind kind = cfg.mm_kinds.front();

  if (cfg.protocol == "algorithm2") {
    rows.header = {"area", "trial", "kind", "idx", "crb"};
    const RVector q = pack_estimate(sc.source_positions, sc.g_watts);
    for (const auto& [name, area] : cfg.opt_areas) {
      std::vector<RisOptimizeResult> results(cfg.trials);
      const std::uint64_t stream = stream_id("ris-opt/" + name);
      parallel_for(cfg.trials, cfg.workers, [&](int trial) {
        Rng rng(derive_seed(cfg.seed, stream, trial));
        RVector f0(sc.n_ris());
        for (int i = 0; i < f0.size(); ++i) f0(i) = cfg.mu_profile_ohm * rng.normal();
        RisCrbEvaluator eval(sc, kind, q, cfg.t, default_fd_deltas(q));
        RisOptimizeOptions opts;
        opts.max_sweeps = cfg.max_sweeps;
        results[trial] = optimize_ris_profile(eval, area, f0, opts);
      });
      for (int trial = 0; trial < cfg.trials; ++trial) {
        const auto& res = results[trial];
        for (size_t i = 0; i < res.crb_trace.size(); ++i)
          rows.rows.push_back({name, std::to_string(trial), "step", std::to_string(i),
                               fmt_g(res.crb_trace[i])});
        for (size_t i = 0; i < res.crb_per_sweep.size(); ++i)
          rows.rows.push_back({name, std::to_string(trial), "sweep", std::to_string(i),
                               fmt_g(res.crb_per_sweep[i])});
      }
    }
  } else {
    rows.header = {"trial", "seed",  "early",   "m1_hat",  "stage1_x", "stage1_z",
                   "crb_random", "crb_opt", "final_m", "final_x", "final_z",  "final_g",
                   "lr",     "beta",  "reliable"};
    Rng ref_rng(cfg.ref_seed);
    const auto ref = lr_reference_distribution(sc.n(), cfg.t2, cfg.ref_draws, ref_rng);
    const double beta = lr_threshold(ref, cfg.p_beta);
    model_info["beta"] = beta;
    TwoStageOptions opts;
    opts.t1 = cfg.t1;
    opts.t2 = cfg.t2;
    opts.area = cfg.opt_areas.front().second;
    opts.mu_profile_ohm = cfg.mu_profile_ohm;
    opts.grid = build_grid(cfg);
    opts.p_beta = cfg.p_beta;
    opts.mm_kind = kind;
    opts.opt.max_sweeps = cfg.max_sweeps;
    opts.loc.refine_outliers = cfg.refine_enabled;
    opts.loc.refine_nx = cfg.refine_nx;
    opts.loc.refine_nz = cfg.refine_nz;
    opts.alphabet = cfg.alphabet;

    std::vector<std::vector<std::string>> slot(cfg.trials);
    const std::uint64_t stream = stream_id("two-stage");
    parallel_for(cfg.trials, cfg.workers, [&](int trial) {
      const std::uint64_t tseed = derive_seed(cfg.seed, stream, trial);
      Rng rng(tseed);
      const auto res = two_stage_localize(sc, opts, ref, rng);
      std::vector<std::string> row = {std::to_string(trial), std::to_string(tseed),
                                      res.early_no_source ? "1" : "0",
                                      std::to_string(res.stage1_m_hat)};
      if (res.early_no_source) {
        for (int i = 0; i < 11; ++i) row.push_back("nan");
      } else {
        row.push_back(fmt_g(res.stage1_positions.front().x()));
        row.push_back(fmt_g(res.stage1_positions.front().z()));
        row.push_back(fmt_g(res.crb_at_random_profile));
        row.push_back(fmt_g(res.crb_optimized));
        row.push_back(std::to_string(res.final.m_hat));
        if (res.final.m_hat >= 1) {
          row.push_back(fmt_g(res.final.p_hat.front().x()));
          row.push_back(fmt_g(res.final.p_hat.front().z()));
          row.push_back(fmt_g(res.final.g_hat(0)));
          row.push_back(fmt_g(res.final.lr_value));
          row.push_back(fmt_g(beta));
          row.push_back(res.final.classification &&
                                res.final.classification->label == Reliability::Reliable
                            ? "1"
                            : "0");
        } else {
          for (int i = 0; i < 6; ++i) row.push_back("nan");
        }
      }
      slot[trial] = std::move(row);
    });
    for (auto& row : slot) rows.rows.push_back(std::move(row));
  }
}

// ---------------------------------------------------------------------------
// experiment: grouping

njson aggregate_grouping(const Table& t) {
  const int ctr = t.col("trial"), crank = t.col("rank"), clr = t.col("lr"), cb = t.col("beta");
  std::map<int, std::vector<std::pair<double, double>>> by_trial;  // trial -> (lr, beta) by rank
  for (const auto& row : t.rows) {
    auto& v = by_trial[static_cast<int>(t.num(row, ctr))];
    const size_t rank = static_cast<size_t>(t.num(row, crank));
    if (v.size() <= rank) v.resize(rank + 1);
    v[rank] = {t.num(row, clr), t.num(row, cb)};
  }
  int ok = 0;
  for (auto& [trial, v] : by_trial) {
    bool good = !v.empty() && v[0].first > v[0].second;
    for (size_t i = 1; i < v.size(); ++i)
      if (v[i].first >= v[i].second) good = false;
    if (good) ++ok;
  }
  return njson{{"trials", by_trial.size()},
               {"clean_separation_trials", ok},
               {"clean_separation_fraction",
                by_trial.empty() ? 0.0 : static_cast<double>(ok) / by_trial.size()}};
}

void run_grouping(const ExperimentConfig& cfg, Table& rows, njson& model_info) {
  rows.header = {"trial", "rank", "peaks", "m_hat", "indices", "lr", "beta", "above_beta"};
  auto sc = build_scenario(cfg, cfg.source_power_dbm);
  const SearchGrid grid = build_grid(cfg);
  Rng ref_rng(cfg.ref_seed);
  const auto ref = lr_reference_distribution(sc.n(), cfg.t, cfg.ref_draws, ref_rng);
  const double beta = lr_threshold(ref, cfg.p_beta);
  model_info["beta"] = beta;

  const std::uint64_t stream = stream_id("grouping");
  for (int trial = 0; trial < cfg.trials; ++trial) {
    Rng rng(derive_seed(cfg.seed, stream, trial));
    std::optional<RVector> profile;
    if (cfg.link == LinkKind::RISOnly) {
      RVector f(sc.n_ris());
      for (int i = 0; i < f.size(); ++i) f(i) = cfg.mu_profile_ohm * rng.normal();
      profile = f;
    }
    const TrueChannelOp op(sc, profile ? &*profile : nullptr);
    const auto snap =
        generate_received(op.matrix(), sc.g_watts, sc.sigma2_watt, cfg.t, rng, cfg.alphabet);
    const int m_hat = estimate_num_sources_mdl(snap.x);
    if (m_hat == 0) continue;
    const Manifold mm = sc.manifold(cfg.mm_kinds.front(), profile ? &*profile : nullptr);
    const RMatrix spectrum =
        music_spectrum(sample_covariance(snap.x), m_hat, grid, mm);
    const auto peaks = music_peaks(spectrum, grid, cfg.grouping_peaks);
    if (static_cast<int>(peaks.size()) < m_hat) continue;
    const auto groups = group_candidates(peaks, m_hat, snap.x, mm, sc.sigma2_watt);
    for (size_t rank = 0; rank < groups.size(); ++rank) {
      std::string idx;
      for (size_t i = 0; i < groups[rank].peak_indices.size(); ++i)
        idx += (i ? ";" : "") + std::to_string(groups[rank].peak_indices[i]);
      rows.rows.push_back({std::to_string(trial), std::to_string(rank),
                           std::to_string(peaks.size()), std::to_string(m_hat), idx,
                           fmt_g(groups[rank].lr), fmt_g(beta),
                           groups[rank].lr > beta ? "1" : "0"});
    }
  }
}

njson aggregates_for(const std::string& experiment, const ExperimentConfig& cfg, const Table& rows) {
  if (experiment == "lr-dist") return aggregate_lr_dist(rows, cfg.p_beta);
  if (experiment == "gamma-map") return aggregate_gamma_map(rows);
  if (experiment == "locate") return aggregate_locate(rows, cfg.source_positions);
  if (experiment == "q-map")
    return aggregate_q_map(rows, cfg.source_positions.front().x(),
                           cfg.source_positions.front().z());
  if (experiment == "ris-opt")
    return cfg.protocol == "algorithm2" ? aggregate_ris_opt(rows)
                                        : aggregate_two_stage(rows, cfg.source_positions);
  if (experiment == "grouping") return aggregate_grouping(rows);
  throw std::invalid_argument("unknown experiment " + experiment);
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config_text(ss.str());
}

ExperimentConfig validate_config(const std::string& path, std::string* report) {
  ExperimentConfig cfg = load_experiment_config(path);
  if (report != nullptr) {
    std::string out = "effective config:\n" + cfg.effective_json + "\n";
    for (const auto& n : cfg.notices) out += "notice: " + n + "\n";
    *report = out;
  }
  return cfg;
}

int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto t_start = std::chrono::steady_clock::now();

  Table rows;
  njson model_info = njson::object();
  std::string failure;
  try {
    if (cfg.experiment == "lr-dist")
      run_lr_dist(cfg, rows);
    else if (cfg.experiment == "gamma-map")
      run_gamma_map(cfg, rows);
    else if (cfg.experiment == "locate")
      run_locate(cfg, rows, model_info);
    else if (cfg.experiment == "q-map")
      run_q_map(cfg, rows, model_info);
    else if (cfg.experiment == "ris-opt")
      run_ris_opt(cfg, rows, model_info);
    else if (cfg.experiment == "grouping")
      run_grouping(cfg, rows, model_info);
  } catch (const std::exception& e) {
    failure = e.what();
  }

  write_table(rows, out_dir + "/rows.csv");
  const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
  {
    std::ofstream timing(out_dir + "/timing.csv");
    timing << "experiment,wall_ms\n" << cfg.experiment << "," << wall_ms << "\n";
  }

  njson manifest;
  manifest["experiment"] = cfg.experiment;
  manifest["config"] = njson::parse(cfg.effective_json);
  manifest["config_hash"] = std::to_string(fnv1a_hash(cfg.effective_json));
  manifest["base_seed"] = cfg.seed;
  manifest["seed_rule"] = "derive_seed(base_seed, fnv1a(stream_label), trial)";
  manifest["notices"] = cfg.notices;
  manifest["status"] = failure.empty() ? "ok" : ("failed: " + failure);

  if (failure.empty()) {
    njson agg;
    agg["from_rows"] = aggregates_for(cfg.experiment, cfg, rows);
    agg["model"] = model_info;
    std::ofstream out(out_dir + "/aggregates.json");
    out << agg.dump(2) << "\n";
  }
  std::ofstream mf(out_dir + "/manifest.json");
  mf << manifest.dump(2) << "\n";

  if (!failure.empty()) {
    std::fprintf(stderr, "experiment failed (partial rows preserved): %s\n", failure.c_str());
    return 1;
  }
  return 0;
}

namespace {
bool json_close(const njson& a, const njson& b, std::string path, std::string* report) {
  auto note = [&](const std::string& msg) {
    if (report != nullptr) *report += "mismatch at " + path + ": " + msg + "\n";
  };
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    const double tol = 1e-9 * std::max({1.0, std::abs(x), std::abs(y)});
    if (std::abs(x - y) > tol) {
      note(fmt_g(x) + " vs " + fmt_g(y));
      return false;
    }
    return true;
  }
  if (a.type() != b.type()) {
    note("type mismatch");
    return false;
  }
  if (a.is_object()) {
    bool ok = true;
    for (const auto& [k, v] : a.items()) {
      if (!b.contains(k)) {
        note("missing key " + k);
        ok = false;
        continue;
      }
      ok = json_close(v, b.at(k), path + "/" + k, report) && ok;
    }
    for (const auto& [k, v] : b.items())
      if (!a.contains(k)) {
        note("extra key " + k);
        ok = false;
      }
    return ok;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) {
      note("array size");
      return false;
    }
    bool ok = true;
    for (size_t i = 0; i < a.size(); ++i)
      ok = json_close(a[i], b[i], path + "[" + std::to_string(i) + "]", report) && ok;
    return ok;
  }
  if (a != b) {
    note("value mismatch");
    return false;
  }
  return true;
}
}  // namespace

int verify_out_dir(const std::string& out_dir, std::string* report) {
  njson manifest, stored;
  {
    std::ifstream mf(out_dir + "/manifest.json");
    if (!mf) throw std::runtime_error("cannot open " + out_dir + "/manifest.json");
    mf >> manifest;
    std::ifstream af(out_dir + "/aggregates.json");
    if (!af) throw std::runtime_error("cannot open " + out_dir + "/aggregates.json");
    af >> stored;
  }
  if (manifest.value("status", "") != "ok") {
    if (report != nullptr) *report += "run status is not ok\n";
    return 1;
  }
  const ExperimentConfig cfg = parse_experiment_config_text(manifest.at("config").dump());
  const Table rows = read_table(out_dir + "/rows.csv");
  const njson recomputed = aggregates_for(cfg.experiment, cfg, rows);
  const bool ok = json_close(recomputed, stored.at("from_rows"), "from_rows", report);
  if (report != nullptr && ok) *report += "aggregates reproducible from rows\n";
  return ok ? 0 : 1;
}

}  // namespace emloc
