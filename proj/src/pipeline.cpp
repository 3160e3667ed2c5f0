#include "nsdeform/pipeline.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nsdeform/errors.hpp"
#include "nsdeform/gp.hpp"

#ifndef NSDEFORM_VERSION
#define NSDEFORM_VERSION "0.1.0"
#endif

namespace nsdeform {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

Box parse_box(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_array() || !j[1].is_array() || j[0].size() != 2 ||
      j[1].size() != 2) {
    throw ConfigError(where + " must be [[xmin, xmax], [ymin, ymax]]");
  }
  Box b{number(j[0][0], where), number(j[0][1], where), number(j[1][0], where), number(j[1][1], where)};
  if (!(b.xmax > b.xmin) || !(b.ymax > b.ymin)) throw ConfigError(where + " has nonpositive extent");
  return b;
}

Eigen::Matrix2d parse_kernel(const json& j, const std::string& where) {
  Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
  if (j.is_number()) {
    k.diagonal().setConstant(j.get<double>());
  } else if (j.is_array() && j.size() == 2 && j[0].is_number()) {
    k(0, 0) = number(j[0], where);
    k(1, 1) = number(j[1], where);
  } else if (j.is_array() && j.size() == 2 && j[0].is_array() && j[1].is_array() && j[0].size() == 2 &&
             j[1].size() == 2) {
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) k(r, c) = number(j[r][c], where);
  } else {
    throw ConfigError(where + " must be a number, a diagonal pair or a 2x2 matrix");
  }
  if (k(0, 1) != k(1, 0) || !(k(0, 0) > 0.0) || !(k.determinant() > 0.0)) {
    throw ConfigError(where + " is not symmetric positive definite");
  }
  return k;
}

GridSpec parse_grid(const json& j, const std::string& where) {
  check_keys(j, where, {"box", "nx", "ny"});
  if (!j.contains("box")) throw ConfigError(where + ".box is required");
  GridSpec g{parse_box(j.at("box"), where + ".box"), get<int>(j, "nx", where, 0), get<int>(j, "ny", where, 0)};
  if (g.nx < 2 || g.ny < 2) throw ConfigError(where + " needs nx, ny >= 2");
  return g;
}

void parse_fit(const json& j, const std::string& where, FitOptions& fit) {
  fit.fix_nu = get_opt<double>(j, "fix_nu", where);
  if (fit.fix_nu && !(*fit.fix_nu > 0.0)) throw ConfigError(where + ".fix_nu must be positive");
  fit.with_nugget = get<bool>(j, "with_nugget", where, fit.with_nugget);
  fit.n_starts = get<int>(j, "n_starts", where, fit.n_starts);
  fit.min_sites = get<int>(j, "min_sites", where, fit.min_sites);
  fit.max_evaluations = get<int>(j, "max_evaluations", where, fit.max_evaluations);
  fit.seed = get<std::uint64_t>(j, "seed", where, fit.seed);
  if (fit.n_starts < 1 || fit.max_evaluations < 10) throw ConfigError(where + " has invalid optimizer settings");
}

}  // namespace

std::uint64_t RunConfig::effective_seed() const {
  if (!seed) throw ConfigError("a seed is required (config 'seed' or --seed)");
  return *seed;
}

std::uint64_t RunConfig::effective_split_seed() const {
  if (split_seed) return *split_seed;
  return effective_seed();
}

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"mode", "seed", "scenario", "data", "transform", "partition", "fit", "registration", "embedding",
              "kriging", "split", "prediction_grid", "correlation", "output_dir"});
  RunConfig c;
  c.canonical = root.dump();

  const std::string mode = get<std::string>(root, "mode", "config", "simulate");
  if (mode == "simulate") {
    c.mode = Mode::Simulate;
  } else if (mode == "ingest") {
    c.mode = Mode::Ingest;
  } else {
    throw ConfigError("mode must be 'simulate' or 'ingest'");
  }
  c.seed = get_opt<std::uint64_t>(root, "seed", "config");
  const bool data_run = c.mode == Mode::Ingest;
  c.fit.with_nugget = data_run;
  c.krige_fit.with_nugget = data_run;

  if (c.mode == Mode::Simulate) {
    if (!root.contains("scenario")) throw ConfigError("simulate mode needs a 'scenario' section");
    const json& s = root.at("scenario");
    check_keys(s, "scenario", {"domain", "grid", "nu", "regions"});
    if (s.contains("domain")) c.scenario.domain = parse_box(s.at("domain"), "scenario.domain");
    if (s.contains("grid")) {
      const json& g = s.at("grid");
      if (!g.is_array() || g.size() != 2) throw ConfigError("scenario.grid must be [nx, ny]");
      c.scenario.nx = g[0].get<int>();
      c.scenario.ny = g[1].get<int>();
      if (c.scenario.nx < 2 || c.scenario.ny < 2) throw ConfigError("scenario.grid needs at least 2x2 sites");
    }
    c.scenario.nu = get<double>(s, "nu", "scenario", c.scenario.nu);
    if (!(c.scenario.nu > 0.0)) throw ConfigError("scenario.nu must be positive");
    if (!s.contains("regions") || !s.at("regions").is_array() || s.at("regions").empty()) {
      throw ConfigError("scenario.regions must be a nonempty list");
    }
    for (std::size_t r = 0; r < s.at("regions").size(); ++r) {
      const json& rj = s.at("regions")[r];
      const std::string where = "scenario.regions[" + std::to_string(r) + "]";
      check_keys(rj, where, {"box", "kernel", "sd"});
      if (!rj.contains("box") || !rj.contains("kernel")) throw ConfigError(where + " needs box and kernel");
      ScenarioRegion reg;
      reg.box = parse_box(rj.at("box"), where + ".box");
      reg.kernel = parse_kernel(rj.at("kernel"), where + ".kernel");
      reg.sd = get<double>(rj, "sd", where, 1.0);
      if (!(reg.sd > 0.0)) throw ConfigError(where + ".sd must be positive");
      c.scenario.regions.push_back(reg);
    }
  } else {
    if (!root.contains("data")) throw ConfigError("ingest mode needs a 'data' section");
    const json& d = root.at("data");
    check_keys(d, "data", {"path", "x", "y", "value"});
    const auto p = get_opt<std::string>(d, "path", "data");
    if (!p) throw ConfigError("data.path is required");
    c.data_path = fs::path(*p).is_absolute() ? fs::path(*p) : base_dir / *p;
    if (!fs::exists(c.data_path)) throw ConfigError("data file not found: " + c.data_path.string());
    c.schema.x = get<std::string>(d, "x", "data", "x");
    c.schema.y = get<std::string>(d, "y", "data", "y");
    c.schema.value = get<std::string>(d, "value", "data", "value");
  }

  if (root.contains("transform")) {
    const json& t = root.at("transform");
    if (!t.is_array()) throw ConfigError("transform must be a list");
    for (const auto& step : t) {
      if (!step.is_string()) throw ConfigError("transform entries must be strings");
      c.transform.push_back(parse_transform_step(step.get<std::string>()));
    }
  }

  if (root.contains("partition")) {
    const json& p = root.at("partition");
    if (!p.is_array() || p.empty()) throw ConfigError("partition must be a nonempty list of boxes");
    for (std::size_t r = 0; r < p.size(); ++r) c.partition.push_back(parse_box(p[r], "partition[" + std::to_string(r) + "]"));
  } else if (c.mode == Mode::Simulate) {
    for (const auto& r : c.scenario.regions) c.partition.push_back(r.box);
  } else {
    throw ConfigError("partition is required in ingest mode");
  }
  if (c.partition.size() < 2) throw ConfigError("registration needs a partition with at least 2 regions");
  try {
    Partition check(c.partition);
    (void)check;
  } catch (const Error& e) {
    throw ConfigError(std::string("partition: ") + e.what());
  }

  if (root.contains("fit")) {
    const json& f = root.at("fit");
    check_keys(f, "fit", {"fix_nu", "with_nugget", "n_starts", "min_sites", "max_evaluations", "seed", "n_bins",
                          "max_dist"});
    parse_fit(f, "fit", c.fit);
    c.n_bins = get<int>(f, "n_bins", "fit", c.n_bins);
    c.max_dist = get_opt<double>(f, "max_dist", "fit");
    if (c.n_bins < 1) throw ConfigError("fit.n_bins must be >= 1");
  }
  c.krige_fit.fix_nu = c.fit.fix_nu;
  if (root.contains("kriging")) {
    const json& k = root.at("kriging");
    check_keys(k, "kriging", {"fix_nu", "with_nugget", "n_starts", "min_sites", "max_evaluations", "seed"});
    parse_fit(k, "kriging", c.krige_fit);
  }

  if (root.contains("registration")) {
    const json& r = root.at("registration");
    check_keys(r, "registration", {"grid_m", "bandwidth", "ht_rel_tol", "max_step", "max_iterations", "tolerance"});
    c.grid_m = get<std::size_t>(r, "grid_m", "registration", c.grid_m);
    c.bandwidth = get_opt<double>(r, "bandwidth", "registration");
    c.ht_rel_tol = get<double>(r, "ht_rel_tol", "registration", c.ht_rel_tol);
    c.registration.dp.max_step = get<int>(r, "max_step", "registration", c.registration.dp.max_step);
    c.registration.max_iterations = get<int>(r, "max_iterations", "registration", c.registration.max_iterations);
    c.registration.tolerance = get<double>(r, "tolerance", "registration", c.registration.tolerance);
  }
  if (c.grid_m < 8) throw ConfigError("registration.grid_m must be >= 8");
  if (c.bandwidth && !(*c.bandwidth > 0.0)) throw ConfigError("registration.bandwidth must be positive");
  if (!(c.ht_rel_tol > 0.0 && c.ht_rel_tol < 1.0)) throw ConfigError("registration.ht_rel_tol must lie in (0, 1)");
  if (c.registration.dp.max_step < 1) throw ConfigError("registration.max_step must be >= 1");

  if (root.contains("embedding")) {
    const json& e = root.at("embedding");
    check_keys(e, "embedding", {"psi_max", "epsilon", "psi"});
    c.psi_max = get<int>(e, "psi_max", "embedding", c.psi_max);
    c.epsilon = get<double>(e, "epsilon", "embedding", c.epsilon);
    c.psi = get_opt<int>(e, "psi", "embedding");
  }
  if (c.psi_max < 0 || (c.psi && *c.psi < 0) || c.epsilon < 0.0) throw ConfigError("embedding settings out of range");

  if (root.contains("split")) {
    const json& s = root.at("split");
    check_keys(s, "split", {"n_test", "seed"});
    c.n_test = get<Eigen::Index>(s, "n_test", "split", 0);
    c.split_seed = get_opt<std::uint64_t>(s, "seed", "split");
    if (c.n_test < 0) throw ConfigError("split.n_test must be >= 0");
  }
  if (root.contains("prediction_grid")) c.prediction_grid = parse_grid(root.at("prediction_grid"), "prediction_grid");
  if (root.contains("correlation")) {
    const json& m = root.at("correlation");
    check_keys(m, "correlation", {"anchors", "grid"});
    if (m.contains("anchors")) {
      for (const auto& a : m.at("anchors")) {
        if (!a.is_array() || a.size() != 2) throw ConfigError("correlation.anchors entries must be [x, y]");
        c.correlation_anchors.emplace_back(number(a[0], "anchor"), number(a[1], "anchor"));
      }
    }
    if (m.contains("grid")) c.correlation_grid = parse_grid(m.at("grid"), "correlation.grid");
  }
  c.output_dir = get<std::string>(root, "output_dir", "config", "out");
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Data: return "data";
    case Stage::Fit: return "fit-variograms";
    case Stage::Register: return "register";
    case Stage::Embed: return "embed";
    case Stage::Krige: return "krige";
    case Stage::Score: return "score";
    case Stage::Maps: return "maps";
  }
  return "unknown";
}

// ---------------------------------------------------------------- export

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Exporter {
public:
  explicit Exporter(std::optional<fs::path> dir) : dir_(std::move(dir)) {
    if (!dir_) return;
    std::error_code ec;
    fs::create_directories(*dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_->string() + ": " + ec.message());
  }

  bool enabled() const { return dir_.has_value(); }

  void text(const std::string& name, const std::string& content) {
    if (!dir_) return;
    const fs::path p = *dir_ / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    out.close();
    if (!out) throw IoError("cannot write " + p.string());
    artifacts_[name] = {content.size(), fnv1a64(content)};
  }

  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

  void manifest(const json& body) {
    if (!dir_) return;
    json m = body;
    json list = json::array();
    for (const auto& [name, info] : artifacts_) {
      list.push_back({{"file", name}, {"bytes", info.first}, {"fnv1a64", hex64(info.second)}});
    }
    m["artifacts"] = list;
    const fs::path p = *dir_ / "manifest.json";
    std::ofstream out(p, std::ios::binary);
    out << m.dump(2) << "\n";
    if (!out) throw IoError("cannot write " + p.string());
  }

private:
  std::optional<fs::path> dir_;
  std::map<std::string, std::pair<std::size_t, std::uint64_t>> artifacts_;
};

class Csv {
public:
  explicit Csv(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }
  Csv& cell(double v) { return raw(fmt(v)); }
  Csv& cell(long long v) { return raw(std::to_string(v)); }
  Csv& raw(const std::string& s) {
    out_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  void end() {
    out_ << "\n";
    first_ = true;
  }
  std::string str() const { return out_.str(); }

private:
  std::ostringstream out_;
  bool first_ = true;
};

json model_json(const VariogramModel& m) {
  return {{"sigma2", m.sigma2}, {"alpha", m.alpha}, {"nu", m.nu}, {"nugget", m.nugget}};
}

json score_json(const ScoreReport& s) {
  return {{"model", s.model}, {"mspe", s.mspe}, {"mae", s.mae}, {"crps", s.crps}, {"logs", s.logs},
          {"n_test", s.n_test}};
}

template <class F>
void guarded(Stage stage, F&& body) {
  const std::string tag = "[" + to_string(stage) + "] ";
  try {
    body();
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const IoError& e) {
    throw IoError(tag + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  } catch (const DomainError& e) {
    throw DomainError(tag + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(tag + e.what());
  }
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, Eigen::Index begin, Eigen::Index count) {
  return m.middleRows(begin, count);
}

}  // namespace

// ---------------------------------------------------------------- pipeline

PipelineResult run_pipeline(const RunConfig& cfg, const PipelineOptions& opts) {
  PipelineResult res;
  Exporter ex(opts.output_dir);
  auto log = [&](const std::string& msg) {
    if (opts.log) opts.log(msg);
  };
  const std::uint64_t seed = cfg.mode == Mode::Simulate ? cfg.effective_seed() : cfg.seed.value_or(0);
  const std::uint64_t split_seed = cfg.split_seed ? *cfg.split_seed : seed;
  FitOptions fit_opts = cfg.fit;
  FitOptions krige_opts = cfg.krige_fit;

  json manifest = {{"tool", "nsdeform"},
                   {"config_hash", hex64(fnv1a64(cfg.canonical))},
                   {"config", json::parse(cfg.canonical)},
                   {"seed", seed},
                   {"split_seed", split_seed},
                   {"versions",
                    {{"nsdeform", NSDEFORM_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}}}};
  json timings = json::object();

  auto run_stage = [&](Stage stage, auto&& body) {
    if (static_cast<int>(stage) > static_cast<int>(opts.last)) return false;
    log("stage " + to_string(stage));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      guarded(stage, body);
    } catch (...) {
      manifest["failed_stage"] = to_string(stage);
      manifest["timings"] = timings;
      try {
        ex.manifest(manifest);
      } catch (...) {
      }
      throw;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.timings[to_string(stage)] = secs;
    timings[to_string(stage)] = secs;
    res.completed = stage;
    manifest["completed_stage"] = to_string(stage);
    manifest["timings"] = timings;
    ex.manifest(manifest);
    return true;
  };

  const Partition part(cfg.partition);

  run_stage(Stage::Data, [&] {
    SpatialDataset raw;
    if (cfg.mode == Mode::Simulate) {
      std::vector<Box> boxes;
      std::vector<Eigen::Matrix2d> kernels;
      std::vector<double> sds;
      for (const auto& r : cfg.scenario.regions) {
        boxes.push_back(r.box);
        kernels.push_back(r.kernel);
        sds.push_back(r.sd);
      }
      const KernelField field(Partition(boxes), kernels, sds, cfg.scenario.nu);
      const SiteMatrix sites = regular_grid(cfg.scenario.domain, cfg.scenario.nx, cfg.scenario.ny);
      const Realization real = simulate(sites, field, seed);
      raw.sites = real.sites;
      raw.values = real.values;
      Csv csv({"x", "y", "value"});
      for (Eigen::Index i = 0; i < raw.size(); ++i) {
        csv.cell(raw.sites(i, 0)).cell(raw.sites(i, 1)).cell(raw.values[i]).end();
      }
      ex.text("realization.csv", csv.str());
    } else {
      raw = ingest_csv(cfg.data_path, cfg.schema);
    }
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
      if (!part.domain().contains(raw.sites.row(i).transpose())) {
        throw DomainError("site " + std::to_string(i) + " lies outside the partition domain");
      }
    }
    auto [data, record] = transform(raw, cfg.transform);
    res.data = std::move(data);
    res.data.dropped_rows = raw.dropped_rows;
    res.data.duplicates = raw.duplicates;
    res.transform = record;
    if (cfg.n_test >= res.data.size()) throw ConfigError("split.n_test must be smaller than the number of sites");
    res.split = split(res.data.size(), cfg.n_test, split_seed);

    std::vector<char> is_test(static_cast<std::size_t>(res.data.size()), 0);
    for (const auto t : res.split.test) is_test[static_cast<std::size_t>(t)] = 1;
    Csv csv({"site_id", "x", "y", "value", "is_test"});
    for (Eigen::Index i = 0; i < res.data.size(); ++i) {
      csv.cell(static_cast<long long>(i)).cell(res.data.sites(i, 0)).cell(res.data.sites(i, 1));
      csv.cell(res.data.values[i]).cell(static_cast<long long>(is_test[static_cast<std::size_t>(i)])).end();
    }
    ex.text("dataset.csv", csv.str());

    json chain = json::array();
    for (const auto s : record.chain) chain.push_back(to_string(s));
    manifest["dataset"] = {{"n_sites", res.data.size()},
                           {"dropped_rows", raw.dropped_rows},
                           {"duplicate_pairs", raw.duplicates.size()},
                           {"n_train", res.split.train.size()},
                           {"n_test", res.split.test.size()},
                           {"transform", {{"chain", chain}, {"mean", record.mean}, {"sd", record.sd}}}};
    log("  " + std::to_string(res.data.size()) + " sites, " + std::to_string(raw.dropped_rows) + " dropped");
  });

  const SpatialDataset train = res.data.subset(res.split.train);

  run_stage(Stage::Fit, [&] {
    json fits = json::array();
    for (std::size_t r = 0; r < part.size(); ++r) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < train.size(); ++i) {
        if (part.region_of(train.sites.row(i).transpose()) == r) rows.push_back(i);
      }
      const SpatialDataset local = train.subset(rows);
      RegionalFit rf;
      rf.region = r;
      rf.n_sites = local.size();
      try {
        rf.fit = fit_matern_mle(local.sites, local.values, fit_opts);
      } catch (const ParameterError& e) {
        throw ParameterError("region " + std::to_string(r) + ": " + e.what());
      }
      const Box& b = part.region(r);
      const double max_dist =
          cfg.max_dist.value_or(0.5 * std::hypot(b.xmax - b.xmin, b.ymax - b.ymin));
      if (local.size() >= 2) rf.empirical = empirical_variogram(local.sites, local.values, cfg.n_bins, max_dist);

      Csv csv({"bin_center", "semivariance", "count"});
      for (std::size_t k = 0; k < rf.empirical.bin_centers.size(); ++k) {
        csv.cell(rf.empirical.bin_centers[k]).cell(rf.empirical.semivariances[k]);
        csv.cell(static_cast<long long>(rf.empirical.counts[k])).end();
      }
      ex.text("empirical_variogram_region" + std::to_string(r) + ".csv", csv.str());
      json fj = model_json(rf.fit.model);
      fj["region_id"] = r;
      fj["loglik"] = rf.fit.loglik;
      fj["n_sites"] = rf.n_sites;
      fj["converged"] = rf.fit.converged;
      fits.push_back(fj);
      log("  region " + std::to_string(r) + ": alpha=" + fmt(rf.fit.model.alpha) + " sigma2=" +
          fmt(rf.fit.model.sigma2) + " nu=" + fmt(rf.fit.model.nu));
      res.fits.push_back(std::move(rf));
    }
    ex.json_file("variogram_fits.json", fits);
  });

  run_stage(Stage::Register, [&] {
    std::vector<VariogramModel> models;
    for (const auto& f : res.fits) models.push_back(f.fit.model);
    res.h_t = determine_ht(models, cfg.ht_rel_tol);
    res.bandwidth = cfg.bandwidth.value_or(res.h_t / 50.0);
    std::vector<SampledFunction> curves;
    for (const auto& m : models) curves.push_back(sample_on_grid(m, res.h_t, cfg.grid_m));
    res.registration = register_set(curves, cfg.registration);
    res.warps.clear();
    for (const auto& w : res.registration.warps) {
      res.warps.push_back(smooth_and_extend(w.knots(), w.warped(), res.h_t, res.bandwidth));
    }

    const std::vector<double> hs = uniform_grid(res.h_t, 512);
    for (std::size_t r = 0; r < res.warps.size(); ++r) {
      Csv csv({"h", "phi_of_h"});
      for (const double h : hs) csv.cell(h).cell(res.warps[r](h)).end();
      ex.text("warp_region" + std::to_string(r) + ".csv", csv.str());
    }
    std::vector<std::string> header{"h", "template"};
    for (std::size_t r = 0; r < curves.size(); ++r) header.push_back("standardized_" + std::to_string(r));
    for (std::size_t r = 0; r < curves.size(); ++r) header.push_back("aligned_" + std::to_string(r));
    Csv reg(header);
    std::vector<SampledFunction> standardized;
    for (const auto& c : curves) standardized.push_back(standardize(c).function);
    for (std::size_t i = 0; i < cfg.grid_m; ++i) {
      reg.cell(curves[0].grid[i]).cell(res.registration.template_function.values[i]);
      for (const auto& s : standardized) reg.cell(s.values[i]);
      for (const auto& a : res.registration.aligned) reg.cell(a.values[i]);
      reg.end();
    }
    ex.text("registered_variograms.csv", reg.str());
    ex.json_file("warps_meta.json", {{"h_t", res.h_t},
                                     {"bandwidth", res.bandwidth},
                                     {"grid_m", cfg.grid_m},
                                     {"iterations", res.registration.iterations},
                                     {"converged", res.registration.converged},
                                     {"scalings", res.registration.scalings},
                                     {"translations", res.registration.translations}});
    manifest["h_t"] = res.h_t;
    log("  h_t=" + fmt(res.h_t) + " iterations=" + std::to_string(res.registration.iterations));
  });

  run_stage(Stage::Embed, [&] {
    SiteSet& s = res.sites;
    s.n_train = static_cast<Eigen::Index>(res.split.train.size());
    s.n_test = static_cast<Eigen::Index>(res.split.test.size());
    SiteMatrix grid;
    if (cfg.prediction_grid) grid = regular_grid(cfg.prediction_grid->box, cfg.prediction_grid->nx, cfg.prediction_grid->ny);
    s.n_grid = grid.rows();
    s.sites.resize(s.n_train + s.n_test + s.n_grid, 2);
    Eigen::Index row = 0;
    for (const auto i : res.split.train) {
      s.sites.row(row++) = res.data.sites.row(i);
      s.ids.push_back(i);
    }
    for (const auto i : res.split.test) {
      s.sites.row(row++) = res.data.sites.row(i);
      s.ids.push_back(i);
    }
    for (Eigen::Index g = 0; g < s.n_grid; ++g) {
      s.sites.row(row++) = grid.row(g);
      s.ids.push_back(res.data.size() + g);
    }
    for (Eigen::Index g = 0; g < s.n_grid; ++g) {
      if (!part.domain().contains(grid.row(g).transpose())) throw DomainError("prediction grid leaves the domain");
    }

    const WarpedDistanceMatrix dist = warped_distance_matrix(s.sites, part, res.warps);
    const Cmds solver(dist.values);
    res.selection = select_dimension(solver, dist.values, cfg.psi_max, cfg.epsilon);
    const int psi = cfg.psi.value_or(res.selection.psi);
    res.embedding = embed_without_folding(solver, dist, psi);

    std::vector<std::string> header{"site_id"};
    for (int d = 0; d < res.embedding.dimension(); ++d) header.push_back("dim_" + std::to_string(d + 1));
    header.push_back("is_observed");
    Csv csv(header);
    for (Eigen::Index i = 0; i < s.sites.rows(); ++i) {
      csv.cell(static_cast<long long>(s.ids[static_cast<std::size_t>(i)]));
      for (int d = 0; d < res.embedding.dimension(); ++d) csv.cell(res.embedding.coords(i, d));
      csv.cell(static_cast<long long>(i < s.n_train ? 1 : 0)).end();
    }
    ex.text("embedding.csv", csv.str());
    Csv curve({"psi", "nmse"});
    for (std::size_t p = 0; p < res.selection.nmse.size(); ++p) {
      curve.cell(static_cast<long long>(p)).cell(res.selection.nmse[p]).end();
    }
    ex.text("nmse_curve.csv", curve.str());
    manifest["embedding"] = {{"psi_selected", res.selection.psi},
                             {"psi", res.embedding.psi},
                             {"dimension", res.embedding.dimension()},
                             {"zero_filled", res.embedding.zero_filled},
                             {"nmse", res.embedding.nmse},
                             {"has_duplicates", dist.has_duplicates}};
    log("  psi=" + std::to_string(res.embedding.psi) + " nmse=" + fmt(res.embedding.nmse));
  });

  run_stage(Stage::Krige, [&] {
    const SiteSet& s = res.sites;
    const Eigen::Index n_pred = s.n_test + s.n_grid;
    const Eigen::MatrixXd deformed_train = rows_of(res.embedding.coords, 0, s.n_train);
    const Eigen::MatrixXd deformed_pred = rows_of(res.embedding.coords, s.n_train, n_pred);
    const Eigen::MatrixXd geo = s.sites;
    const Eigen::MatrixXd geo_train = rows_of(geo, 0, s.n_train);
    const Eigen::MatrixXd geo_pred = rows_of(geo, s.n_train, n_pred);

    res.deformed_model = fit_deformed(deformed_train, train.values, krige_opts);
    res.nonstationary.output = krige(deformed_train, train.values, deformed_pred, res.deformed_model.base);
    res.stationary_fit = fit_matern_mle(geo_train, train.values, krige_opts);
    res.stationary.output = krige(geo_train, train.values, geo_pred, res.stationary_fit.model);

    auto write = [&](const std::string& name, const KrigingOutput& out) {
      Csv csv({"site_id", "x", "y", "mean", "sd"});
      for (const auto& p : out.predictions) {
        const Eigen::Index row = s.n_train + p.site;
        csv.cell(static_cast<long long>(s.ids[static_cast<std::size_t>(row)]));
        csv.cell(s.sites(row, 0)).cell(s.sites(row, 1)).cell(p.mean).cell(p.sd).end();
      }
      ex.text(name, csv.str());
    };
    write("predictions_nonstationary.csv", res.nonstationary.output);
    write("predictions_stationary.csv", res.stationary.output);
    json nj = model_json(res.deformed_model.base);
    nj["loglik"] = res.deformed_model.loglik;
    nj["space"] = "deformed";
    nj["clamped_variances"] = res.nonstationary.output.clamped_variances;
    json sj = model_json(res.stationary_fit.model);
    sj["loglik"] = res.stationary_fit.loglik;
    sj["space"] = "geographic";
    sj["clamped_variances"] = res.stationary.output.clamped_variances;
    ex.json_file("kriging_fits.json", {{"nonstationary", nj}, {"stationary", sj}});
  });

  run_stage(Stage::Score, [&] {
    const Eigen::Index nt = res.sites.n_test;
    if (nt == 0) {
      log("  no test sites; scores skipped");
      return;
    }
    std::vector<double> truth(static_cast<std::size_t>(nt));
    for (Eigen::Index t = 0; t < nt; ++t) truth[t] = res.data.values[res.split.test[static_cast<std::size_t>(t)]];
    auto score = [&](const std::string& name, ModelPredictions& mp) {
      std::vector<double> mean(static_cast<std::size_t>(nt)), sd(static_cast<std::size_t>(nt));
      for (Eigen::Index t = 0; t < nt; ++t) {
        mean[t] = mp.output.predictions[static_cast<std::size_t>(t)].mean;
        sd[t] = mp.output.predictions[static_cast<std::size_t>(t)].sd;
      }
      mp.scores = score_predictions(name, mean, sd, truth);
      ex.json_file("scores_" + name + ".json", score_json(mp.scores));
      log("  " + name + ": mspe=" + fmt(mp.scores.mspe) + " crps=" + fmt(mp.scores.crps) +
          " logs=" + fmt(mp.scores.logs));
    };
    score("nonstationary", res.nonstationary);
    score("stationary", res.stationary);
  });

  run_stage(Stage::Maps, [&] {
    if (cfg.correlation_anchors.empty()) return;
    GridSpec g;
    if (cfg.correlation_grid) {
      g = *cfg.correlation_grid;
    } else if (cfg.prediction_grid) {
      g = *cfg.prediction_grid;
    } else {
      g = {part.domain(), 50, 50};
    }
    const SiteMatrix grid = regular_grid(g.box, g.nx, g.ny);
    for (std::size_t a = 0; a < cfg.correlation_anchors.size(); ++a) {
      CorrelationMap map{cfg.correlation_anchors[a], grid,
                         correlation_map(cfg.correlation_anchors[a], grid, res.warps, part, res.deformed_model)};
      Csv csv({"x", "y", "rho"});
      for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        csv.cell(grid(i, 0)).cell(grid(i, 1)).cell(map.rho[static_cast<std::size_t>(i)]).end();
      }
      ex.text("correlation_map_" + std::to_string(a) + ".csv", csv.str());
      res.maps.push_back(std::move(map));
    }
  });

  return res;
}

// ---------------------------------------------------------------- report

std::string write_report(const fs::path& manifest_path) {
  auto read_json = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read " + p.string());
    try {
      return json::parse(in);
    } catch (const json::parse_error& e) {
      throw IoError("malformed JSON in " + p.string() + ": " + e.what());
    }
  };
  const json manifest = read_json(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  std::set<std::string> files;
  for (const auto& a : manifest.value("artifacts", json::array())) files.insert(a.at("file").get<std::string>());

  std::ostringstream out;
  out << std::setprecision(6);
  out << "config_hash " << manifest.value("config_hash", "?") << "  seed " << manifest.value("seed", 0ULL)
      << "  completed " << manifest.value("completed_stage", "none") << "\n";
  if (files.count("variogram_fits.json")) {
    out << "\nregional fits\n";
    out << "region,n_sites,sigma2,alpha,nu,nugget,loglik\n";
    for (const auto& f : read_json(dir / "variogram_fits.json")) {
      out << f.at("region_id").get<int>() << "," << f.at("n_sites").get<long long>() << ","
          << f.at("sigma2").get<double>() << "," << f.at("alpha").get<double>() << "," << f.at("nu").get<double>()
          << "," << f.at("nugget").get<double>() << "," << f.at("loglik").get<double>() << "\n";
    }
  }
  if (manifest.contains("embedding")) {
    const json& e = manifest.at("embedding");
    out << "\nembedding psi " << e.at("psi").get<int>() << "  dimension " << e.at("dimension").get<int>()
        << "  nmse " << e.at("nmse").get<double>() << "\n";
  }
  Csv table({"model", "mspe", "mae", "crps", "logs", "n_test"});
  bool any = false;
  for (const char* model : {"stationary", "nonstationary"}) {
    const std::string name = std::string("scores_") + model + ".json";
    if (!files.count(name)) continue;
    const json s = read_json(dir / name);
    if (!any) out << "\nprediction scores\nmodel,mspe,mae,crps,logs,n_test\n";
    any = true;
    out << model << "," << s.at("mspe").get<double>() << "," << s.at("mae").get<double>() << ","
        << s.at("crps").get<double>() << "," << s.at("logs").get<double>() << ","
        << s.at("n_test").get<long long>() << "\n";
    table.raw(model).cell(s.at("mspe").get<double>()).cell(s.at("mae").get<double>());
    table.cell(s.at("crps").get<double>()).cell(s.at("logs").get<double>());
    table.cell(s.at("n_test").get<long long>()).end();
  }
  const std::string text = out.str();
  auto dump = [&](const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    f << content;
    if (!f) throw IoError("cannot write " + p.string());
  };
  dump(dir / "report.txt", text);
  if (any) dump(dir / "scores_table.csv", table.str());
  return text;
}

}  // namespace nsdeform
