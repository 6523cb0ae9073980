#include "cli_config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>

#include "saflow/version.hpp"

namespace saflow::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at " + (path.empty() ? "<root>" : path) + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(join(path, it.key()), "unknown key");
  }
}

const json& member(const json& j, const char* key) { return j.at(key); }

double get_number(const json& j, const std::string& path, const char* key, double lo,
                  bool lo_strict, double fallback, bool required = false) {
  if (!j.contains(key)) {
    if (required) fail(join(path, key), "missing required key");
    return fallback;
  }
  const json& v = member(j, key);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  const double x = v.get<double>();
  if (lo_strict ? !(x > lo) : !(x >= lo))
    fail(join(path, key), std::string("must be ") + (lo_strict ? "> " : ">= ") + std::to_string(lo));
  return x;
}

std::uint64_t get_u64(const json& j, const std::string& path, const char* key,
                      std::uint64_t fallback, std::uint64_t lo = 0) {
  if (!j.contains(key)) return fallback;
  const json& v = member(j, key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
    fail(join(path, key), "expected a nonnegative integer");
  const std::uint64_t x = v.get<std::uint64_t>();
  if (x < lo) fail(join(path, key), "must be >= " + std::to_string(lo));
  return x;
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = member(j, key);
  if (!v.is_boolean()) fail(join(path, key), "expected a boolean");
  return v.get<bool>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = member(j, key);
  if (!v.is_string()) fail(join(path, key), "expected a string");
  return v.get<std::string>();
}

NoiseSpec parse_noise(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  check_keys(j, path, {"kind", "sigma", "scale", "seed"});
  NoiseSpec n;
  const std::string kind = get_string(j, path, "kind", "none");
  if (kind == "none")
    n.kind = NoiseSpec::Kind::none;
  else if (kind == "gaussian")
    n.kind = NoiseSpec::Kind::gaussian;
  else if (kind == "poisson")
    n.kind = NoiseSpec::Kind::poisson;
  else
    fail(join(path, "kind"), "expected one of none|gaussian|poisson");
  n.sigma = get_number(j, path, "sigma", 0.0, false, 0.0);
  n.scale = get_number(j, path, "scale", 0.0, true, 1.0);
  n.seed = get_u64(j, path, "seed", 0);
  if (n.kind == NoiseSpec::Kind::gaussian && !j.contains("sigma"))
    fail(join(path, "sigma"), "gaussian noise needs sigma");
  if (n.kind != NoiseSpec::Kind::gaussian && j.contains("sigma"))
    fail(join(path, "sigma"), "sigma only applies to gaussian noise");
  if (n.kind != NoiseSpec::Kind::poisson && j.contains("scale"))
    fail(join(path, "scale"), "scale only applies to poisson noise");
  return n;
}

InstanceSpec parse_instance(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  check_keys(j, path,
             {"kind", "d", "blocks", "shifts", "window", "rows", "row_partition", "seed", "noise"});
  InstanceSpec spec;
  const std::string kind = get_string(j, path, "kind", "stft");
  if (kind == "stft")
    spec.kind = InstanceSpec::Kind::stft;
  else if (kind == "dense")
    spec.kind = InstanceSpec::Kind::dense;
  else
    fail(join(path, "kind"), "expected one of stft|dense");

  spec.d = std::size_t(get_u64(j, path, "d", 16, 1));
  spec.seed = get_u64(j, path, "seed", 1);

  if (spec.kind == InstanceSpec::Kind::stft) {
    if (j.contains("rows")) fail(join(path, "rows"), "rows only applies to dense instances");
    if (j.contains("row_partition"))
      fail(join(path, "row_partition"), "row_partition only applies to dense instances");
    spec.stft_blocks = std::size_t(get_u64(j, path, "blocks", 4, 1));
    if (j.contains("shifts")) {
      const json& sh = member(j, "shifts");
      if (!sh.is_array() || sh.empty()) fail(join(path, "shifts"), "expected a nonempty array");
      for (std::size_t i = 0; i < sh.size(); ++i) {
        if (!sh[i].is_number_integer())
          fail(join(path, "shifts[" + std::to_string(i) + "]"), "expected an integer");
        spec.shifts.push_back(sh[i].get<long long>());
      }
    }
    const std::string win = get_string(j, path, "window", "gaussian");
    if (win == "ones")
      spec.window = InstanceSpec::Window::ones;
    else if (win == "hann")
      spec.window = InstanceSpec::Window::hann;
    else if (win == "gaussian")
      spec.window = InstanceSpec::Window::gaussian;
    else
      fail(join(path, "window"), "expected one of ones|hann|gaussian");
  } else {
    for (const char* k : {"blocks", "shifts", "window"})
      if (j.contains(k)) fail(join(path, k), "only applies to stft instances");
    if (!j.contains("rows")) fail(join(path, "rows"), "dense instances need rows");
    spec.rows = std::size_t(get_u64(j, path, "rows", 0, 1));
    spec.row_partition = get_bool(j, path, "row_partition", false);
  }
  if (j.contains("noise")) spec.noise = parse_noise(member(j, "noise"), join(path, "noise"));
  return spec;
}

SolverEntry parse_solver(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  check_keys(j, path,
             {"algo", "label", "eps", "schedule", "batch", "sampling", "iters", "grad_tol",
              "trace_every"});
  SolverEntry s;
  const std::string algo = get_string(j, path, "algo", "");
  if (algo.empty()) fail(join(path, "algo"), "missing required key");
  try {
    s.algo = algo_from_name(algo);
  } catch (const std::exception&) {
    fail(join(path, "algo"), "expected one of af|saf|kaczmarz|pie");
  }
  s.label = get_string(j, path, "label", "");
  s.eps = get_number(j, path, "eps", 0.0, false, 0.0);
  if (j.contains("schedule")) {
    const json& sch = member(j, "schedule");
    const std::string spath = join(path, "schedule");
    if (!sch.is_object()) fail(spath, "expected an object");
    check_keys(sch, spath, {"kind", "base", "theta"});
    s.has_schedule = true;
    const std::string kind = get_string(sch, spath, "kind", "constant");
    if (kind == "constant")
      s.schedule_kind = StepSchedule::Kind::constant;
    else if (kind == "polynomial")
      s.schedule_kind = StepSchedule::Kind::polynomial;
    else
      fail(join(spath, "kind"), "expected one of constant|polynomial");
    if (!sch.contains("base")) fail(join(spath, "base"), "missing required key");
    const json& base = member(sch, "base");
    if (base.is_string()) {
      if (base.get<std::string>() != "auto")
        fail(join(spath, "base"), "expected a positive number or \"auto\"");
      s.base_auto = true;
    } else if (base.is_number()) {
      s.base = base.get<double>();
      if (!(s.base > 0.0)) fail(join(spath, "base"), "must be > 0");
    } else {
      fail(join(spath, "base"), "expected a positive number or \"auto\"");
    }
    s.theta = get_number(sch, spath, "theta", 0.0, true, 0.25);
    if (!(s.theta < 0.5)) fail(join(spath, "theta"), "must lie in (0, 1/2)");
    if (s.schedule_kind == StepSchedule::Kind::constant && sch.contains("theta"))
      fail(join(spath, "theta"), "theta only applies to polynomial schedules");
  }
  s.batch = std::size_t(get_u64(j, path, "batch", 1, 1));
  s.sampling = get_string(j, path, "sampling", "");
  if (!s.sampling.empty() && s.sampling != "uniform" && s.sampling != "variance_reducing")
    fail(join(path, "sampling"), "expected one of uniform|variance_reducing");
  s.iters = get_u64(j, path, "iters", 100);
  s.grad_tol = get_number(j, path, "grad_tol", 0.0, false, 0.0);
  s.trace_every = get_u64(j, path, "trace_every", 1, 1);
  return s;
}

void validate_entry(const SolverEntry& s, const std::string& path) {
  switch (s.algo) {
    case Algo::af:
      if (s.batch != 1) fail(join(path, "batch"), "full-gradient runs take no minibatch size");
      if (!s.sampling.empty())
        fail(join(path, "sampling"), "full-gradient runs take no sampling distribution");
      if (!s.has_schedule) fail(join(path, "schedule"), "missing required key");
      break;
    case Algo::saf:
      if (!s.has_schedule) fail(join(path, "schedule"), "missing required key");
      break;
    case Algo::kaczmarz:
      if (s.eps != 0.0) fail(join(path, "eps"), "row projections assume eps = 0");
      if (s.has_schedule)
        fail(join(path, "schedule"), "row projections have a fixed step; remove the schedule");
      if (s.batch != 1) fail(join(path, "batch"), "row projections draw one row per step");
      break;
    case Algo::pie:
      if (s.eps != 0.0) fail(join(path, "eps"), "magnitude projections assume eps = 0");
      if (!s.has_schedule) fail(join(path, "schedule"), "missing required key");
      if (s.base_auto)
        fail(join(path, "schedule.base"), "\"auto\" applies to gradient steps, not the relaxation factor");
      if (s.batch != 1) fail(join(path, "batch"), "magnitude projections draw one block per step");
      break;
  }
}

void validate_semantics(const CliConfig& cfg) {
  for (std::size_t i = 0; i < cfg.solvers.size(); ++i)
    validate_entry(cfg.solvers[i], "solvers[" + std::to_string(i) + "]");
  if (cfg.trials == 0) fail("harness.trials", "must be >= 1");
}

SolverEntry default_entry(Algo algo) {
  SolverEntry s;
  s.algo = algo;
  switch (algo) {
    case Algo::af:
    case Algo::saf:
      s.has_schedule = true;
      s.schedule_kind = StepSchedule::Kind::constant;
      s.base_auto = true;
      break;
    case Algo::kaczmarz:
      break;
    case Algo::pie:
      s.has_schedule = true;
      s.schedule_kind = StepSchedule::Kind::polynomial;
      s.base = 0.9;
      s.theta = 0.25;
      break;
  }
  return s;
}

}  // namespace

CliConfig load_config(const std::string& path) {
  CliConfig cfg;
  if (path.empty()) {
    // flag-only invocation: a small default instance, solver picked by --algo
    cfg.has_instance = true;
    cfg.instance.d = 16;
    return cfg;
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config error: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& ex) {
    throw ConfigError("config error: " + path + " is not valid JSON: " + ex.what());
  }
  if (!doc.is_object()) fail("", "expected a JSON object");
  check_keys(doc, "", {"instance", "ensemble_file", "solvers", "harness", "budget", "out"});

  if (doc.contains("instance")) {
    cfg.has_instance = true;
    cfg.instance = parse_instance(member(doc, "instance"), "instance");
  }
  cfg.ensemble_file = get_string(doc, "", "ensemble_file", "");
  if (cfg.has_instance && !cfg.ensemble_file.empty())
    fail("ensemble_file", "give either an instance section or an ensemble file, not both");

  if (doc.contains("solvers")) {
    const json& arr = member(doc, "solvers");
    if (!arr.is_array() || arr.empty()) fail("solvers", "expected a nonempty array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      cfg.solvers.push_back(parse_solver(arr[i], "solvers[" + std::to_string(i) + "]"));
  }

  if (doc.contains("harness")) {
    const json& h = member(doc, "harness");
    if (!h.is_object()) fail("harness", "expected an object");
    check_keys(h, "harness", {"trials", "base_seed", "threads"});
    cfg.trials = std::size_t(get_u64(h, "harness", "trials", 1, 1));
    cfg.base_seed = get_u64(h, "harness", "base_seed", 0);
    cfg.threads = int(get_u64(h, "harness", "threads", 0));
  }

  if (doc.contains("budget")) {
    const json& b = member(doc, "budget");
    if (!b.is_object()) fail("budget", "expected an object");
    check_keys(b, "budget", {"gamma", "floor"});
    cfg.has_budget = true;
    cfg.budget_gamma = get_number(b, "budget", "gamma", 0.0, true, 0.0);
    cfg.budget_floor = get_number(b, "budget", "floor", 0.0, false, 0.0);
  }

  cfg.out = get_string(doc, "", "out", ".");
  validate_semantics(cfg);
  return cfg;
}

void apply_overrides(CliConfig& cfg, const Overrides& ov) {
  if (ov.out) cfg.out = *ov.out;
  if (ov.seed) {
    cfg.instance.seed = *ov.seed;
    cfg.base_seed = *ov.seed;
  }
  if (ov.trials) cfg.trials = *ov.trials;

  if (ov.algo) {
    Algo algo;
    try {
      algo = algo_from_name(*ov.algo);
    } catch (const std::exception&) {
      throw ConfigError("config error at --algo: expected one of af|saf|kaczmarz|pie");
    }
    if (cfg.solvers.empty()) {
      cfg.solvers.push_back(default_entry(algo));
    } else {
      for (auto& s : cfg.solvers) s.algo = algo;
    }
  }
  if (cfg.solvers.empty() && (ov.eps || ov.mu || ov.theta || ov.alpha0 || ov.iters || ov.batch))
    throw ConfigError("config error: solver flags given but no solvers configured (use --algo or a config file)");

  for (auto& s : cfg.solvers) {
    if (ov.eps && (s.algo == Algo::af || s.algo == Algo::saf)) s.eps = *ov.eps;
    if (ov.iters) s.iters = *ov.iters;
    if (ov.batch && s.algo == Algo::saf) s.batch = *ov.batch;
    if (ov.mu && (s.algo == Algo::af || s.algo == Algo::saf)) {
      s.has_schedule = true;
      if (*ov.mu == "auto") {
        s.base_auto = true;
        s.base = 0.0;
      } else {
        char* end = nullptr;
        const double v = std::strtod(ov.mu->c_str(), &end);
        if (end == nullptr || *end != '\0' || !(v > 0.0))
          throw ConfigError("config error at --mu: expected a positive number or \"auto\"");
        s.base_auto = false;
        s.base = v;
      }
    }
    if (ov.alpha0 && s.algo == Algo::pie) {
      // classical practice: a fixed relaxation factor; --theta switches to decay
      s.has_schedule = true;
      s.schedule_kind = StepSchedule::Kind::constant;
      s.base_auto = false;
      s.base = *ov.alpha0;
      if (!(s.base > 0.0)) throw ConfigError("config error at --alpha0: must be > 0");
    }
    if (ov.theta && s.algo != Algo::kaczmarz) {
      s.schedule_kind = StepSchedule::Kind::polynomial;
      s.theta = *ov.theta;
      if (!(s.theta > 0.0 && s.theta < 0.5))
        throw ConfigError("config error at --theta: must lie in (0, 1/2)");
    }
  }
  if (ov.eps) {
    bool applied = false;
    for (const auto& s : cfg.solvers) applied = applied || s.algo == Algo::af || s.algo == Algo::saf;
    if (!applied) throw ConfigError("config error at --eps: no gradient-based solver to apply it to");
  }
  if (ov.mu) {
    bool applied = false;
    for (const auto& s : cfg.solvers) applied = applied || s.algo == Algo::af || s.algo == Algo::saf;
    if (!applied) throw ConfigError("config error at --mu: no gradient-based solver to apply it to");
  }
  if (ov.alpha0) {
    bool applied = false;
    for (const auto& s : cfg.solvers) applied = applied || s.algo == Algo::pie;
    if (!applied) throw ConfigError("config error at --alpha0: no projection-engine solver to apply it to");
  }
  if (ov.batch) {
    bool applied = false;
    for (const auto& s : cfg.solvers) applied = applied || s.algo == Algo::saf;
    if (!applied) throw ConfigError("config error at --k: no minibatch solver to apply it to");
  }
  validate_semantics(cfg);
}

nlohmann::json effective_json(const CliConfig& cfg) {
  json root;
  if (cfg.has_instance) {
    json inst;
    inst["kind"] = cfg.instance.kind == InstanceSpec::Kind::stft ? "stft" : "dense";
    inst["d"] = cfg.instance.d;
    inst["seed"] = cfg.instance.seed;
    if (cfg.instance.kind == InstanceSpec::Kind::stft) {
      if (cfg.instance.shifts.empty())
        inst["blocks"] = cfg.instance.stft_blocks;
      else
        inst["shifts"] = cfg.instance.shifts;
      switch (cfg.instance.window) {
        case InstanceSpec::Window::ones: inst["window"] = "ones"; break;
        case InstanceSpec::Window::hann: inst["window"] = "hann"; break;
        case InstanceSpec::Window::gaussian: inst["window"] = "gaussian"; break;
      }
    } else {
      inst["rows"] = cfg.instance.rows;
      inst["row_partition"] = cfg.instance.row_partition;
    }
    json noise;
    switch (cfg.instance.noise.kind) {
      case NoiseSpec::Kind::none: noise["kind"] = "none"; break;
      case NoiseSpec::Kind::gaussian:
        noise["kind"] = "gaussian";
        noise["sigma"] = cfg.instance.noise.sigma;
        noise["seed"] = cfg.instance.noise.seed;
        break;
      case NoiseSpec::Kind::poisson:
        noise["kind"] = "poisson";
        noise["scale"] = cfg.instance.noise.scale;
        noise["seed"] = cfg.instance.noise.seed;
        break;
    }
    inst["noise"] = noise;
    root["instance"] = inst;
  }
  if (!cfg.ensemble_file.empty()) root["ensemble_file"] = cfg.ensemble_file;

  json solvers = json::array();
  for (const auto& s : cfg.solvers) {
    json e;
    e["algo"] = algo_name(s.algo);
    if (!s.label.empty()) e["label"] = s.label;
    e["eps"] = s.eps;
    if (s.has_schedule) {
      json sch;
      sch["kind"] = s.schedule_kind == StepSchedule::Kind::constant ? "constant" : "polynomial";
      if (s.base_auto)
        sch["base"] = "auto";
      else
        sch["base"] = s.base;
      if (s.schedule_kind == StepSchedule::Kind::polynomial) sch["theta"] = s.theta;
      e["schedule"] = sch;
    }
    e["batch"] = s.batch;
    if (!s.sampling.empty()) e["sampling"] = s.sampling;
    e["iters"] = s.iters;
    e["grad_tol"] = s.grad_tol;
    e["trace_every"] = s.trace_every;
    solvers.push_back(e);
  }
  if (!solvers.empty()) root["solvers"] = solvers;

  json h;
  h["trials"] = cfg.trials;
  h["base_seed"] = cfg.base_seed;
  root["harness"] = h;

  if (cfg.has_budget) {
    json b;
    if (cfg.budget_gamma > 0.0) b["gamma"] = cfg.budget_gamma;
    b["floor"] = cfg.budget_floor;
    root["budget"] = b;
  }
  return root;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_manifest(const std::string& out_dir, const std::string& command, const CliConfig& cfg,
                    std::uint64_t extra_hash) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  std::uint64_t h = fnv1a64(command + "\n" + effective_json(cfg).dump());
  if (extra_hash != 0) {
    h ^= extra_hash;
    h *= 1099511628211ull;
  }
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)h);
  m["config_hash"] = std::string(hex);
  json seeds;
  if (cfg.has_instance) {
    seeds["instance"] = cfg.instance.seed;
    if (cfg.instance.noise.kind != NoiseSpec::Kind::none) seeds["noise"] = cfg.instance.noise.seed;
  }
  seeds["harness_base"] = cfg.base_seed;
  m["seeds"] = seeds;

  const auto path = std::filesystem::path(out_dir) / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << m.dump(2) << "\n";
}

}  // namespace saflow::cli
