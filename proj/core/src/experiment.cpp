#include "pctlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pctlab/errors.hpp"
#include "pctlab/text_io.hpp"

#ifndef PCTLAB_VERSION
#define PCTLAB_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace pctlab {

ChainScheme parse_chain_scheme(const std::string& name) {
  if (name == "chain") return ChainScheme::chain;
  if (name == "radial") return ChainScheme::radial;
  if (name == "fc") return ChainScheme::fc;
  throw ConfigError("unknown chain scheme '" + name + "'");
}

std::string to_string(ChainScheme s) {
  switch (s) {
    case ChainScheme::chain: return "chain";
    case ChainScheme::radial: return "radial";
    case ChainScheme::fc: return "fc";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config

namespace {

std::string hidden_string(const std::vector<int>& hidden) {
  if (hidden.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < hidden.size(); ++i) s += (i ? "," : "") + std::to_string(hidden[i]);
  return s;
}

std::vector<int> to_widths(const std::vector<std::int64_t>& v) {
  std::vector<int> out;
  for (auto x : v) {
    if (x < 1) throw ConfigError("hidden layer widths must be >= 1");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

int output_classes(const DatasetSpec& d) { return d.classes; }
int input_dim(const DatasetSpec& d) { return d.kind == "rings" ? 2 : d.dim; }

std::uint64_t as_seed(std::int64_t v, const char* key) {
  if (v < 0) throw ConfigError(std::string(key) + " must be >= 0");
  return static_cast<std::uint64_t>(v);
}

}  // namespace

ExperimentConfig parse_experiment_config(const ConfigFile& f) {
  ExperimentConfig c;
  c.name = f.get_string("experiment.name", c.name);

  auto& d = c.dataset;
  d.kind = f.get_string("dataset.kind", d.kind);
  d.classes = static_cast<int>(f.get_int("dataset.classes", d.classes));
  d.dim = static_cast<int>(f.get_int("dataset.dim", d.dim));
  d.n_per_class = static_cast<int>(f.get_int("dataset.n_per_class", d.n_per_class));
  d.separation = f.get_double("dataset.separation", d.separation);
  d.spread = f.get_double("dataset.spread", d.spread);
  d.noise = f.get_double("dataset.noise", d.noise);
  d.seed = as_seed(f.get_int("dataset.seed", static_cast<std::int64_t>(d.seed)), "dataset.seed");
  d.train_fraction = f.get_double("dataset.train_fraction", d.train_fraction);
  d.growth = f.get_string("dataset.growth", d.growth);
  d.growth_fraction = f.get_double("dataset.growth_fraction", d.growth_fraction);

  c.arch.input_dim = input_dim(d);
  c.arch.output_dim = output_classes(d);
  c.arch.hidden = to_widths(f.get_int_list("arch.hidden", {32, 32}));
  c.arch.activation = parse_activation(f.get_string("arch.activation", "relu"));
  c.arch_new = c.arch;
  if (f.has("arch_new.hidden")) c.arch_new.hidden = to_widths(f.get_int_list("arch_new.hidden", {}));
  c.arch_new.activation =
      parse_activation(f.get_string("arch_new.activation", to_string(c.arch.activation)));

  auto& s = c.schedule;
  s.epochs = static_cast<int>(f.get_int("schedule.epochs", s.epochs));
  s.base_lr = f.get_double("schedule.base_lr", s.base_lr);
  s.momentum = f.get_double("schedule.momentum", s.momentum);
  s.lr_decay_factor = f.get_double("schedule.lr_decay_factor", s.lr_decay_factor);
  s.decay_every = static_cast<int>(f.get_int("schedule.decay_every", s.decay_every));
  s.batch_size = static_cast<int>(f.get_int("schedule.batch_size", s.batch_size));
  s.weight_decay = f.get_double("schedule.weight_decay", s.weight_decay);

  auto& o = c.objective;
  o.kind = parse_objective_kind(f.get_string("objective.kind", "ce_only"));
  o.alpha = f.get_double("objective.alpha", o.alpha);
  o.lambda = f.get_double("objective.lambda", o.lambda);
  o.ldi.xi = f.get_double("objective.ldi.xi", o.ldi.xi);
  o.ldi.p = static_cast<int>(f.get_int("objective.ldi.p", o.ldi.p));
  const auto top_k = f.get_int("objective.ldi.top_k", 0);
  if (top_k < 0) throw ConfigError("objective.ldi.top_k must be >= 0 (0 selects all classes)");
  o.ldi.subset = top_k == 0 ? SubsetMode::all : SubsetMode::top_k;
  o.ldi.top_k = static_cast<int>(top_k);
  o.kd_temperature = f.get_double("objective.kd.temperature", o.kd_temperature);
  o.fd_base_weight = f.get_double("objective.fd.base_weight", o.fd_base_weight);
  o.fd_old_correct_weight = f.get_double("objective.fd.old_correct_weight", o.fd_old_correct_weight);
  c.distill_reference = f.get_string("objective.reference", c.distill_reference);
  c.old_kind = parse_objective_kind(f.get_string("objective.old_kind", "ce_only"));

  c.ensemble_m = static_cast<int>(f.get_int("ensemble.m", c.ensemble_m));
  const std::string mode = f.get_string("ensemble.mode", "online");
  if (mode != "online" && mode != "offline")
    throw ConfigError("ensemble.mode must be 'online' or 'offline'");
  c.teacher_mode = mode == "online" ? TeacherMode::online : TeacherMode::offline;

  auto& sp = c.seeds;
  sp.offset = f.get_int("seeds.offset", 0);
  sp.pool_base = as_seed(f.get_int("seeds.pool_base", static_cast<std::int64_t>(sp.pool_base)), "seeds.pool_base");
  sp.old_base = as_seed(f.get_int("seeds.old_base", static_cast<std::int64_t>(sp.old_base)), "seeds.old_base");
  sp.new_base = as_seed(f.get_int("seeds.new_base", static_cast<std::int64_t>(sp.new_base)), "seeds.new_base");
  sp.chain_base = as_seed(f.get_int("seeds.chain_base", static_cast<std::int64_t>(sp.chain_base)), "seeds.chain_base");
  sp.teacher_base = as_seed(f.get_int("seeds.teacher_base", static_cast<std::int64_t>(sp.teacher_base)), "seeds.teacher_base");
  sp.stats = as_seed(f.get_int("seeds.stats", static_cast<std::int64_t>(sp.stats)), "seeds.stats");

  c.pairs = static_cast<int>(f.get_int("update.pairs", c.pairs));

  c.chain_length = static_cast<int>(f.get_int("chain.length", c.chain_length));
  c.chain_scheme = parse_chain_scheme(f.get_string("chain.scheme", "chain"));
  const std::string root = f.get_string("chain.root_kind", "auto");
  if (root == "auto") {
    c.chain_root_kind = c.objective.needs_ensemble() ? ObjectiveKind::elodi : ObjectiveKind::ce_only;
  } else {
    c.chain_root_kind = parse_objective_kind(root);
  }
  for (int k = 0; k < std::max(c.chain_length, 0); ++k) {
    MlpArch a = c.arch;
    const std::string key = "chain.hidden." + std::to_string(k);
    if (f.has(key)) a.hidden = to_widths(f.get_int_list(key, {}));
    c.chain_archs.push_back(a);
  }

  c.pool_size = static_cast<int>(f.get_int("pool.size", c.pool_size));
  if (f.has("pool.second_hidden") || f.has("pool.second_activation")) {
    MlpArch b = c.arch;
    if (f.has("pool.second_hidden")) b.hidden = to_widths(f.get_int_list("pool.second_hidden", {}));
    b.activation = parse_activation(f.get_string("pool.second_activation", to_string(b.activation)));
    c.pool_second_arch = b;
  }
  c.stats_mode = f.get_string("stats.mode", c.stats_mode);
  c.stats_sizes.clear();
  for (auto v : f.get_int_list("stats.sizes", {1, 2, 4})) {
    if (v < 1) throw ConfigError("stats.sizes entries must be >= 1");
    c.stats_sizes.push_back(static_cast<std::size_t>(v));
  }
  c.study.trials = static_cast<std::size_t>(std::max<std::int64_t>(0, f.get_int("stats.trials", 2000)));
  c.study.mc_samples = static_cast<std::size_t>(std::max<std::int64_t>(0, f.get_int("stats.mc_samples", 5000)));
  c.study.bin_width = f.get_double("stats.bin_width", c.study.bin_width);
  c.study.grid_points = static_cast<std::size_t>(std::max<std::int64_t>(2, f.get_int("stats.grid_points", 200)));
  c.probes = f.get_int_list("stats.probes", {});

  f.require_all_consumed();
  c.validate();
  return c;
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["experiment.name"] = name;
  kv["dataset.kind"] = dataset.kind;
  kv["dataset.classes"] = std::to_string(dataset.classes);
  kv["dataset.dim"] = std::to_string(dataset.dim);
  kv["dataset.n_per_class"] = std::to_string(dataset.n_per_class);
  kv["dataset.separation"] = format_double(dataset.separation);
  kv["dataset.spread"] = format_double(dataset.spread);
  kv["dataset.noise"] = format_double(dataset.noise);
  kv["dataset.seed"] = std::to_string(dataset.seed);
  kv["dataset.train_fraction"] = format_double(dataset.train_fraction);
  kv["dataset.growth"] = dataset.growth;
  kv["dataset.growth_fraction"] = format_double(dataset.growth_fraction);
  kv["arch.hidden"] = hidden_string(arch.hidden);
  kv["arch.activation"] = to_string(arch.activation);
  kv["arch_new.hidden"] = hidden_string(arch_new.hidden);
  kv["arch_new.activation"] = to_string(arch_new.activation);
  kv["schedule.epochs"] = std::to_string(schedule.epochs);
  kv["schedule.base_lr"] = format_double(schedule.base_lr);
  kv["schedule.momentum"] = format_double(schedule.momentum);
  kv["schedule.lr_decay_factor"] = format_double(schedule.lr_decay_factor);
  kv["schedule.decay_every"] = std::to_string(schedule.decay_every);
  kv["schedule.batch_size"] = std::to_string(schedule.batch_size);
  kv["schedule.weight_decay"] = format_double(schedule.weight_decay);
  kv["objective.kind"] = to_string(objective.kind);
  kv["objective.alpha"] = format_double(objective.alpha);
  kv["objective.lambda"] = format_double(objective.lambda);
  kv["objective.ldi.xi"] = format_double(objective.ldi.xi);
  kv["objective.ldi.p"] = std::to_string(objective.ldi.p);
  kv["objective.ldi.top_k"] =
      std::to_string(objective.ldi.subset == SubsetMode::all ? 0 : objective.ldi.top_k);
  kv["objective.kd.temperature"] = format_double(objective.kd_temperature);
  kv["objective.fd.base_weight"] = format_double(objective.fd_base_weight);
  kv["objective.fd.old_correct_weight"] = format_double(objective.fd_old_correct_weight);
  kv["objective.reference"] = distill_reference;
  kv["objective.old_kind"] = to_string(old_kind);
  kv["ensemble.m"] = std::to_string(ensemble_m);
  kv["ensemble.mode"] = teacher_mode == TeacherMode::online ? "online" : "offline";
  kv["seeds.offset"] = std::to_string(seeds.offset);
  kv["seeds.pool_base"] = std::to_string(seeds.pool_base);
  kv["seeds.old_base"] = std::to_string(seeds.old_base);
  kv["seeds.new_base"] = std::to_string(seeds.new_base);
  kv["seeds.chain_base"] = std::to_string(seeds.chain_base);
  kv["seeds.teacher_base"] = std::to_string(seeds.teacher_base);
  kv["seeds.stats"] = std::to_string(seeds.stats);
  kv["update.pairs"] = std::to_string(pairs);
  kv["chain.length"] = std::to_string(chain_length);
  kv["chain.scheme"] = to_string(chain_scheme);
  kv["chain.root_kind"] = to_string(chain_root_kind);
  for (std::size_t k = 0; k < chain_archs.size(); ++k)
    kv["chain.hidden." + std::to_string(k)] = hidden_string(chain_archs[k].hidden);
  kv["pool.size"] = std::to_string(pool_size);
  if (pool_second_arch) {
    kv["pool.second_hidden"] = hidden_string(pool_second_arch->hidden);
    kv["pool.second_activation"] = to_string(pool_second_arch->activation);
  }
  kv["stats.mode"] = stats_mode;
  std::string sizes;
  for (std::size_t i = 0; i < stats_sizes.size(); ++i)
    sizes += (i ? "," : "") + std::to_string(stats_sizes[i]);
  kv["stats.sizes"] = sizes;
  kv["stats.trials"] = std::to_string(study.trials);
  kv["stats.mc_samples"] = std::to_string(study.mc_samples);
  kv["stats.bin_width"] = format_double(study.bin_width);
  kv["stats.grid_points"] = std::to_string(study.grid_points);
  std::string probe_list;
  for (std::size_t i = 0; i < probes.size(); ++i)
    probe_list += (i ? "," : "") + std::to_string(probes[i]);
  kv["stats.probes"] = probe_list.empty() ? "auto" : probe_list;

  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string ExperimentConfig::config_hash() const { return hex64(fnv1a64(canonical())); }

std::string ExperimentConfig::pool_hash() const {
  std::string text;
  std::istringstream in(canonical());
  std::string line;
  while (std::getline(in, line)) {
    for (const char* prefix : {"dataset.", "arch.", "schedule.", "pool.", "seeds.pool_base",
                               "seeds.offset"}) {
      if (line.rfind(prefix, 0) == 0) {
        text += line + "\n";
        break;
      }
    }
  }
  return hex64(fnv1a64(text));
}

void ExperimentConfig::validate() const {
  if (dataset.kind != "blobs" && dataset.kind != "rings")
    throw ConfigError("dataset.kind must be 'blobs' or 'rings'");
  if (dataset.classes < 2) throw ConfigError("dataset.classes must be >= 2");
  if (dataset.n_per_class < 2) throw ConfigError("dataset.n_per_class must be >= 2");
  if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0))
    throw ConfigError("dataset.train_fraction must be in (0, 1)");
  if (dataset.growth != "none") parse_split_mode(dataset.growth);
  if (dataset.growth == "train_test") throw ConfigError("dataset.growth cannot be train_test");
  arch.validate();
  arch_new.validate();
  schedule.validate();
  objective.validate();
  if (objective.ldi.subset == SubsetMode::top_k && objective.ldi.top_k > dataset.classes)
    throw ConfigError("objective.ldi.top_k exceeds the number of classes");
  if (distill_reference != "old" && distill_reference != "ensemble")
    throw ConfigError("objective.reference must be 'old' or 'ensemble'");
  if (old_kind != ObjectiveKind::ce_only && old_kind != ObjectiveKind::elodi)
    throw ConfigError("objective.old_kind must be ce_only or elodi");
  if (ensemble_m < 1) throw ConfigError("ensemble.m must be >= 1");
  if (pairs < 1) throw ConfigError("update.pairs must be >= 1");
  if (chain_length < 1) throw ConfigError("chain.length must be >= 1");
  if (pool_size < 2) throw ConfigError("pool.size must be >= 2");
  if (stats_mode != "homogeneous" && stats_mode != "heterogeneous")
    throw ConfigError("stats.mode must be 'homogeneous' or 'heterogeneous'");
  if (stats_mode == "heterogeneous" && !pool_second_arch)
    throw ConfigError("stats.mode = heterogeneous needs pool.second_hidden or pool.second_activation");
  if (!(study.bin_width > 0.0)) throw ConfigError("stats.bin_width must be > 0");
  if (study.trials < 1) throw ConfigError("stats.trials must be >= 1");
  if (study.mc_samples < 100) throw ConfigError("stats.mc_samples must be >= 100");
  if (seeds.offset < 0) throw ConfigError("seeds.offset must be >= 0");

  struct Range {
    const char* role;
    std::uint64_t lo, hi;
  };
  const auto m = static_cast<std::uint64_t>(ensemble_m);
  const auto students = static_cast<std::uint64_t>(std::max(2 * pairs, chain_length));
  const std::vector<Range> ranges{
      {"pool", seeds.pool_base, seeds.pool_base + static_cast<std::uint64_t>(pool_size) * 2},
      {"old", seeds.old_base, seeds.old_base + static_cast<std::uint64_t>(pairs)},
      {"new", seeds.new_base, seeds.new_base + static_cast<std::uint64_t>(pairs)},
      {"chain", seeds.chain_base, seeds.chain_base + static_cast<std::uint64_t>(chain_length)},
      {"teacher", seeds.teacher_base, seeds.teacher_base + students * m},
  };
  for (std::size_t i = 0; i < ranges.size(); ++i)
    for (std::size_t j = i + 1; j < ranges.size(); ++j)
      if (ranges[i].lo < ranges[j].hi && ranges[j].lo < ranges[i].hi)
        throw ConfigError(std::string("seed ranges overlap: ") + ranges[i].role + " [" +
                          std::to_string(ranges[i].lo) + ", " + std::to_string(ranges[i].hi) +
                          ") and " + ranges[j].role + " [" + std::to_string(ranges[j].lo) + ", " +
                          std::to_string(ranges[j].hi) + ")");
}

ExperimentData make_experiment_data(const DatasetSpec& spec) {
  const LabeledDataset full =
      spec.kind == "rings"
          ? make_rings(spec.classes, spec.n_per_class, spec.noise, spec.seed)
          : make_blobs(spec.classes, spec.dim, spec.n_per_class, spec.separation, spec.spread,
                       spec.seed);
  auto [train_set, test_set] =
      split(full, {SplitMode::train_test, spec.train_fraction, spec.seed});
  return {std::move(train_set), std::move(test_set)};
}

// ---------------------------------------------------------------------------
// Audit and manifests

void AccessAudit::record(const std::string& purpose, const std::string& path) {
  std::lock_guard lock(mutex_);
  lines_.push_back(purpose + " " + path);
}

std::vector<std::string> AccessAudit::lines() const {
  std::lock_guard lock(mutex_);
  auto out = lines_;
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::string render_manifest_body(const Manifest& m) {
  std::ostringstream out;
  out << "# pctlab run manifest\n";
  out << "command = " << m.command << '\n';
  out << "config_hash = " << m.config_hash << '\n';
  out << "version = " << m.version << '\n';
  if (!m.report.empty()) out << "report = " << m.report << '\n';
  for (const auto& a : m.artifacts) out << "artifact = " << a << '\n';
  return out.str();
}

}  // namespace

std::string Manifest::content_hash() const { return hex64(fnv1a64(render_manifest_body(*this))); }

std::string Manifest::render() const {
  std::string body = render_manifest_body(*this);
  body += "manifest_hash = " + content_hash() + "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.0f", wall_clock_ms);
  body += "wall_clock_ms = " + std::string(buf) + "\n";
  return body;
}

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::string stated_hash;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw IntegrityError("manifest: malformed line '" + t + "'");
    const std::string k = trim(t.substr(0, eq));
    const std::string v = trim(t.substr(eq + 1));
    if (k == "command") m.command = v;
    else if (k == "config_hash") m.config_hash = v;
    else if (k == "version") m.version = v;
    else if (k == "report") m.report = v;
    else if (k == "artifact") m.artifacts.push_back(v);
    else if (k == "manifest_hash") stated_hash = v;
    else if (k == "wall_clock_ms") m.wall_clock_ms = parse_double(v);
    else throw IntegrityError("manifest: unknown key '" + k + "'");
  }
  if (stated_hash != m.content_hash()) throw IntegrityError("manifest: hash mismatch");
  return m;
}

Manifest read_manifest(const fs::path& path) {
  try {
    return Manifest::parse(read_file(path));
  } catch (const IntegrityError& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

void verify_manifest(const Manifest& manifest, const fs::path& dir) {
  for (const auto& a : manifest.artifacts)
    if (!fs::exists(dir / a)) throw IntegrityError("manifest artifact missing: " + (dir / a).string());
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return buf;
}

void write_manifest(const fs::path& out_dir, Manifest& m, Clock::time_point start) {
  m.version = PCTLAB_VERSION;
  m.wall_clock_ms = elapsed_ms(start);
  write_file(out_dir / ("manifest-" + m.command + ".txt"), m.render());
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::size_t terms = 0;
  for (const auto& e : history) terms = std::max(terms, e.reference_terms.size());
  std::ostringstream out;
  out << "epoch,lr,mean_loss,train_error";
  for (std::size_t t = 0; t < terms; ++t) out << ",ref_term_" << t;
  out << '\n';
  for (const auto& e : history) {
    out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.mean_loss) << ','
        << format_double(e.train_error);
    for (std::size_t t = 0; t < terms; ++t)
      out << ',' << (t < e.reference_terms.size() ? format_double(e.reference_terms[t]) : "0");
    out << '\n';
  }
  return out.str();
}

TrainSchedule schedule_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainSchedule s = cfg.schedule;
  s.shuffle_seed = seed;
  return s;
}

MlpArch with_classes(MlpArch a, int classes) {
  a.output_dim = classes;
  return a;
}

bool kd_or_fd(ObjectiveKind k) { return k == ObjectiveKind::kd || k == ObjectiveKind::fd; }

bool needs_teacher(const ExperimentConfig& cfg, ObjectiveKind kind) {
  ObjectiveSpec probe = cfg.objective;
  probe.kind = kind;
  return probe.needs_ensemble() || (kd_or_fd(kind) && cfg.distill_reference == "ensemble");
}

bool needs_predecessor(const ExperimentConfig& cfg, ObjectiveKind kind) {
  ObjectiveSpec probe = cfg.objective;
  probe.kind = kind;
  return probe.needs_legacy() || (kd_or_fd(kind) && cfg.distill_reference == "old");
}

// Trains an ensemble teacher and, in offline mode, round-trips its logits
// through a cache file so the student only ever sees stored values.
std::unique_ptr<EnsembleTeacher> make_teacher(const ExperimentConfig& cfg, const MlpArch& arch,
                                              const LabeledDataset& train_set,
                                              std::uint64_t base_seed, const fs::path& cache_path,
                                              std::vector<std::string>& artifacts,
                                              const fs::path& out_dir, int jobs) {
  auto teacher = std::make_unique<EnsembleTeacher>(
      train_ensemble(arch, train_set, cfg.schedule, cfg.ensemble_m, base_seed, jobs));
  if (cfg.teacher_mode == TeacherMode::offline) {
    std::ostringstream csv;
    write_cache_csv(build_offline_cache(*teacher, train_set), csv);
    write_file(cache_path, csv.str());
    std::istringstream in(read_file(cache_path));
    teacher->use_cache(std::make_shared<LogitsCache>(read_cache_csv(in)));
    artifacts.push_back(fs::relative(cache_path, out_dir).generic_string());
  }
  return teacher;
}

}  // namespace

// ---------------------------------------------------------------------------
// train-pool

namespace {

fs::path pool_member_path(const fs::path& out_dir, char pool, std::size_t i) {
  return out_dir / "pool" / std::string(1, pool) / ("model_" + padded(i) + ".ckpt");
}

}  // namespace

PoolRunResult run_train_pool(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = Clock::now();
  const ExperimentData data = make_experiment_data(cfg.dataset);
  const std::string hash = cfg.pool_hash();

  struct Job {
    char pool;
    std::size_t index;
    MlpArch arch;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  const auto n = static_cast<std::size_t>(cfg.pool_size);
  const std::uint64_t base = cfg.seeds.shifted(cfg.seeds.pool_base);
  for (std::size_t i = 0; i < n; ++i) jobs.push_back({'a', i, cfg.arch, base + i});
  if (cfg.pool_second_arch)
    for (std::size_t i = 0; i < n; ++i) jobs.push_back({'b', i, *cfg.pool_second_arch, base + n + i});

  std::vector<int> trained(jobs.size(), 0);
  parallel_for(jobs.size(), opts.jobs, [&](std::size_t j) {
    const Job& job = jobs[j];
    const fs::path path = pool_member_path(opts.out_dir, job.pool, job.index);
    if (fs::exists(path)) {
      const Checkpoint ck = load_checkpoint(path);
      if (ck.config_hash != hash)
        throw IntegrityError("checkpoint " + path.string() + " was produced by config " +
                             ck.config_hash + ", current pool config is " + hash +
                             "; refusing to overwrite");
      return;
    }
    const TrainResult r = train(init_mlp(job.arch, job.seed), data.train,
                                schedule_for(cfg, job.seed), ObjectiveSpec{});
    save_checkpoint(path, r.model, hash);
    trained[j] = 1;
  });

  PoolRunResult result;
  result.manifest.command = "train-pool";
  result.manifest.config_hash = cfg.config_hash();
  for (const auto& job : jobs)
    result.manifest.artifacts.push_back(
        fs::relative(pool_member_path(opts.out_dir, job.pool, job.index), opts.out_dir).generic_string());
  for (int t : trained) (t ? result.trained : result.skipped) += 1;
  write_manifest(opts.out_dir, result.manifest, start);
  return result;
}

// ---------------------------------------------------------------------------
// update

UpdateRunResult run_update(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = Clock::now();
  const fs::path root = opts.out_dir / "update";
  const ExperimentData data = make_experiment_data(cfg.dataset);

  // Old model data under the configured growth protocol.
  LabeledDataset old_train = data.train;
  if (cfg.dataset.growth != "none") {
    old_train = split(data.train, {parse_split_mode(cfg.dataset.growth), cfg.dataset.growth_fraction,
                                   cfg.dataset.seed})
                    .first;
  }
  const LabeledDataset eval = old_train.num_classes == data.test.num_classes
                                  ? data.test
                                  : restrict_to_classes(data.test, old_train.num_classes);
  const MlpArch old_arch = with_classes(cfg.arch, old_train.num_classes);
  const MlpArch new_arch = with_classes(cfg.arch_new, data.train.num_classes);

  const bool new_needs_teacher = needs_teacher(cfg, cfg.objective.kind);
  const bool new_needs_old = needs_predecessor(cfg, cfg.objective.kind);
  const auto pairs = static_cast<std::size_t>(cfg.pairs);
  const auto m = static_cast<std::uint64_t>(cfg.ensemble_m);
  const std::string hash = cfg.config_hash();

  AccessAudit audit;
  UpdateRunResult result;
  result.pairs.resize(pairs);
  std::vector<std::vector<std::string>> pair_artifacts(pairs);

  parallel_for(pairs, opts.jobs, [&](std::size_t i) {
    auto& artifacts = pair_artifacts[i];
    const fs::path pair_dir = root / ("pair_" + padded(i));
    auto rel = [&](const fs::path& p) { return fs::relative(p, opts.out_dir).generic_string(); };

    // Old model.
    const std::uint64_t old_seed = cfg.seeds.shifted(cfg.seeds.old_base) + i;
    ObjectiveSpec old_obj = cfg.objective;
    old_obj.kind = cfg.old_kind;
    TrainReferences old_refs;
    std::unique_ptr<EnsembleTeacher> old_teacher;
    if (old_obj.needs_ensemble()) {
      old_teacher = make_teacher(cfg, old_arch, old_train,
                                 cfg.seeds.shifted(cfg.seeds.teacher_base) + i * m,
                                 root / "teachers" / ("old_" + padded(i) + "_cache.csv"), artifacts,
                                 opts.out_dir, 1);
      old_refs.ensemble = old_teacher.get();
    }
    const MlpModel old_model =
        train(init_mlp(old_arch, old_seed), old_train, schedule_for(cfg, old_seed), old_obj, old_refs)
            .model;
    const fs::path old_path = root / "old" / ("model_" + padded(i) + ".ckpt");
    save_checkpoint(old_path, old_model, hash);
    artifacts.push_back(rel(old_path));

    // New model.
    const std::uint64_t new_seed = cfg.seeds.shifted(cfg.seeds.new_base) + i;
    TrainReferences new_refs;
    std::unique_ptr<EnsembleTeacher> new_teacher;
    if (new_needs_teacher) {
      new_teacher = make_teacher(cfg, new_arch, data.train,
                                 cfg.seeds.shifted(cfg.seeds.teacher_base) + (pairs + i) * m,
                                 root / "teachers" / ("new_" + padded(i) + "_cache.csv"), artifacts,
                                 opts.out_dir, 1);
      new_refs.ensemble = new_teacher.get();
    }
    std::optional<MlpModel> legacy;
    std::optional<ModelSource> legacy_source;
    if (new_needs_old) {
      audit.record("train_reference", rel(old_path));
      legacy = load_checkpoint(old_path).model;
      legacy_source.emplace(*legacy);
      new_refs.legacy.push_back(&*legacy_source);
    }
    TrainResult trained = train(init_mlp(new_arch, new_seed), data.train,
                                schedule_for(cfg, new_seed), cfg.objective, new_refs);
    const fs::path new_path = root / "new" / ("model_" + padded(i) + ".ckpt");
    const std::string new_ckpt = serialize_checkpoint(trained.model, hash);
    write_file(new_path, new_ckpt);
    artifacts.push_back(rel(new_path));

    // Evaluation reads both checkpoints back from disk.
    audit.record("evaluate", rel(old_path));
    audit.record("evaluate", rel(new_path));
    const MlpModel old_eval = load_checkpoint(old_path).model;
    const MlpModel new_eval = load_checkpoint(new_path).model;
    UpdateReport rep = flip_report(make_prediction_set("old", old_eval, eval),
                                   make_prediction_set("new", new_eval, eval), eval);
    rep.config_echo = {{"config_hash", hash},
                       {"experiment", cfg.name},
                       {"objective", to_string(cfg.objective.kind)},
                       {"old_objective", to_string(cfg.old_kind)},
                       {"old_seed", std::to_string(old_seed)},
                       {"new_seed", std::to_string(new_seed)},
                       {"old_arch", old_arch.tag()},
                       {"new_arch", new_arch.tag()}};
    write_file(pair_dir / "report.txt", render_report_text(rep));
    write_file(pair_dir / "flips.csv", render_flip_csv(rep));
    write_file(pair_dir / "train_log.csv", history_csv(trained.history));
    for (const char* f : {"report.txt", "flips.csv", "train_log.csv"}) artifacts.push_back(rel(pair_dir / f));

    result.pairs[i] = {std::move(rep), std::move(trained.history), new_ckpt};
  });

  std::vector<UpdateReport> reports;
  for (const auto& p : result.pairs) reports.push_back(p.report);
  result.aggregate = merge_reports(reports);
  for (const auto& r : reports) {
    result.mean_er_old += r.er_old.value() / static_cast<double>(pairs);
    result.mean_er_new += r.er_new.value() / static_cast<double>(pairs);
    result.mean_nfr += r.nfr.value() / static_cast<double>(pairs);
    result.mean_pfr += r.pfr.value() / static_cast<double>(pairs);
  }
  result.aggregate.config_echo = {
      {"config_hash", hash},
      {"experiment", cfg.name},
      {"objective", to_string(cfg.objective.kind)},
      {"old_objective", to_string(cfg.old_kind)},
      {"pairs", std::to_string(pairs)},
      {"ensemble_m", std::to_string(cfg.ensemble_m)},
      {"teacher_mode", cfg.teacher_mode == TeacherMode::online ? "online" : "offline"},
      {"alpha", format_double(cfg.objective.alpha)},
      {"xi", format_double(cfg.objective.ldi.xi)},
      {"mean_er_old", format_fixed4(result.mean_er_old)},
      {"mean_er_new", format_fixed4(result.mean_er_new)},
      {"mean_nfr", format_fixed4(result.mean_nfr)},
      {"mean_pfr", format_fixed4(result.mean_pfr)},
  };
  write_file(root / "report.txt", render_report_text(result.aggregate));

  std::ostringstream summary;
  summary << "pair,old_seed,new_seed,er_old,er_new,nfr,pfr\n";
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto& r = result.pairs[i].report;
    summary << i << ',' << r.config_echo.at("old_seed") << ',' << r.config_echo.at("new_seed") << ','
            << format_fixed4(r.er_old.value()) << ',' << format_fixed4(r.er_new.value()) << ','
            << format_fixed4(r.nfr.value()) << ',' << format_fixed4(r.pfr.value()) << '\n';
  }
  write_file(root / "summary.csv", summary.str());

  result.audit = audit.lines();
  std::string audit_text;
  for (const auto& l : result.audit) audit_text += l + "\n";
  write_file(root / "audit.txt", audit_text);

  result.manifest.command = "update";
  result.manifest.config_hash = hash;
  result.manifest.report = "update/report.txt";
  for (const auto& a : pair_artifacts) result.manifest.artifacts.insert(result.manifest.artifacts.end(), a.begin(), a.end());
  for (const char* f : {"update/report.txt", "update/summary.csv", "update/audit.txt"})
    result.manifest.artifacts.emplace_back(f);
  write_manifest(opts.out_dir, result.manifest, start);
  return result;
}

// ---------------------------------------------------------------------------
// chain

ChainRunResult run_chain(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = Clock::now();
  if (cfg.chain_length < 3) throw ConfigError("chain: need at least 3 models");
  const fs::path root = opts.out_dir / "chain";
  const ExperimentData data = make_experiment_data(cfg.dataset);
  const std::string hash = cfg.config_hash();
  const auto n = static_cast<std::size_t>(cfg.chain_length);
  const auto m = static_cast<std::uint64_t>(cfg.ensemble_m);

  ChainRunResult result;
  const bool uses_predecessors = needs_predecessor(cfg, cfg.objective.kind);
  if (!uses_predecessors)
    result.warnings.push_back("scheme '" + to_string(cfg.chain_scheme) + "' ignored: objective " +
                              to_string(cfg.objective.kind) + " takes no predecessor reference");

  std::vector<MlpModel> models;
  std::vector<std::string> artifacts;
  for (std::size_t k = 0; k < n; ++k) {
    const MlpArch arch = with_classes(cfg.chain_archs[k], data.train.num_classes);
    const std::uint64_t seed = cfg.seeds.shifted(cfg.seeds.chain_base) + k;
    ObjectiveSpec obj = cfg.objective;
    std::vector<int> refs;
    if (k == 0) {
      obj.kind = cfg.chain_root_kind;
    } else if (uses_predecessors) {
      switch (cfg.chain_scheme) {
        case ChainScheme::chain: refs = {static_cast<int>(k - 1)}; break;
        case ChainScheme::radial: refs = {0}; break;
        case ChainScheme::fc:
          for (std::size_t j = 0; j < k; ++j) refs.push_back(static_cast<int>(j));
          break;
      }
    }
    if (needs_predecessor(cfg, obj.kind) && refs.empty())
      throw ConfigError("chain: root objective " + to_string(obj.kind) + " needs a predecessor");

    TrainReferences tr;
    std::unique_ptr<EnsembleTeacher> teacher;
    if (needs_teacher(cfg, obj.kind)) {
      teacher = make_teacher(cfg, arch, data.train, cfg.seeds.shifted(cfg.seeds.teacher_base) + k * m,
                             root / "teachers" / ("model_" + padded(k) + "_cache.csv"), artifacts,
                             opts.out_dir, opts.jobs);
      tr.ensemble = teacher.get();
    }
    std::vector<ModelSource> sources;
    sources.reserve(refs.size());
    for (int r : refs) sources.emplace_back(models[static_cast<std::size_t>(r)]);
    for (const auto& s : sources) tr.legacy.push_back(&s);

    TrainResult trained = train(init_mlp(arch, seed), data.train, schedule_for(cfg, seed), obj, tr);
    const fs::path path = root / ("model_" + padded(k) + ".ckpt");
    save_checkpoint(path, trained.model, hash);
    artifacts.push_back(fs::relative(path, opts.out_dir).generic_string());
    models.push_back(std::move(trained.model));
    result.histories.push_back(std::move(trained.history));
    result.references.push_back(refs);
  }

  std::vector<PredictionSet> preds;
  for (std::size_t k = 0; k < n; ++k) {
    preds.push_back(make_prediction_set("model_" + padded(k), models[k], data.test));
    result.error_rates.push_back(error_rate(preds.back(), data.test));
  }
  result.pairwise_nfr = pairwise_nfr_matrix(preds, data.test);

  std::ostringstream matrix;
  matrix << "old\\new";
  for (std::size_t j = 0; j < n; ++j) matrix << ",model_" << padded(j);
  matrix << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    matrix << "model_" << padded(i);
    for (std::size_t j = 0; j < n; ++j) matrix << ',' << format_fixed4(result.pairwise_nfr(i, j));
    matrix << '\n';
  }
  write_file(root / "pairwise_nfr.csv", matrix.str());

  std::ostringstream er;
  er << "model,arch,references,er\n";
  for (std::size_t k = 0; k < n; ++k) {
    std::string refs;
    for (std::size_t r = 0; r < result.references[k].size(); ++r)
      refs += (r ? ";" : "") + std::to_string(result.references[k][r]);
    er << k << ',' << models[k].arch.tag() << ',' << (refs.empty() ? "-" : refs) << ','
       << result.error_rates[k].str() << '\n';
  }
  write_file(root / "error_rates.csv", er.str());

  std::string log;
  for (std::size_t k = 0; k < n; ++k) {
    std::istringstream in(history_csv(result.histories[k]));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        if (k == 0) log += "model," + line + "\n";
        header = false;
        continue;
      }
      log += std::to_string(k) + "," + line + "\n";
    }
  }
  write_file(root / "train_log.csv", log);

  std::ostringstream rep;
  rep << "# pctlab chain report\n";
  rep << "config_hash = " << hash << '\n';
  rep << "objective = " << to_string(cfg.objective.kind) << '\n';
  rep << "scheme = " << to_string(cfg.chain_scheme) << '\n';
  rep << "models = " << n << '\n';
  for (const auto& w : result.warnings) rep << "warning = " << w << '\n';
  write_file(root / "report.txt", rep.str());

  result.manifest.command = "chain";
  result.manifest.config_hash = hash;
  result.manifest.artifacts = artifacts;
  for (const char* f : {"chain/pairwise_nfr.csv", "chain/error_rates.csv", "chain/train_log.csv",
                        "chain/report.txt"})
    result.manifest.artifacts.emplace_back(f);
  write_manifest(opts.out_dir, result.manifest, start);
  return result;
}

// ---------------------------------------------------------------------------
// stats

namespace {

SeedPool load_pool(const ExperimentConfig& cfg, const fs::path& out_dir, char which,
                   const MlpArch& arch) {
  SeedPool pool;
  pool.arch_tag = arch.tag();
  const std::string expected = cfg.pool_hash();
  for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.pool_size); ++i) {
    const fs::path path = pool_member_path(out_dir, which, i);
    if (!fs::exists(path))
      throw ConfigError("stats: missing pool checkpoint " + path.string() + " (run train-pool first)");
    Checkpoint ck = load_checkpoint(path);
    if (ck.config_hash != expected)
      throw IntegrityError("checkpoint " + path.string() + " belongs to pool config " +
                           ck.config_hash + ", expected " + expected);
    pool.models.push_back(std::move(ck.model));
  }
  return pool;
}

}  // namespace

StatsRunResult run_stats(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = Clock::now();
  const fs::path root = opts.out_dir / "stats";
  const ExperimentData data = make_experiment_data(cfg.dataset);
  const bool hetero = cfg.stats_mode == "heterogeneous";
  const SeedPool first = load_pool(cfg, opts.out_dir, 'a', with_classes(cfg.arch, data.train.num_classes));
  std::optional<SeedPool> second;
  if (hetero)
    second = load_pool(cfg, opts.out_dir, 'b', with_classes(*cfg.pool_second_arch, data.train.num_classes));

  StatsRunResult result;
  std::ostringstream pools_csv;
  pools_csv << "pool,member,arch,er\n";
  auto pool_ers = [&](const SeedPool& p, char tag, std::vector<double>& out) {
    for (std::size_t i = 0; i < p.models.size(); ++i) {
      const Rate er = error_rate(make_prediction_set("m", p.models[i], data.test), data.test);
      out.push_back(er.value());
      pools_csv << tag << ',' << i << ',' << p.arch_tag << ',' << er.str() << '\n';
    }
  };
  pool_ers(first, 'a', result.pool_error_rates_first);
  if (second) pool_ers(*second, 'b', result.pool_error_rates_second);
  write_file(root / "pools.csv", pools_csv.str());

  std::vector<std::int64_t> probes = cfg.probes;
  if (probes.empty())
    for (std::size_t i = 0; i < std::min<std::size_t>(3, data.test.size()); ++i)
      probes.push_back(data.test.ids[i]);

  StudyOptions study = cfg.study;
  study.trial_seed = cfg.seeds.shifted(cfg.seeds.stats);
  study.mc_seed = cfg.seeds.shifted(cfg.seeds.stats) + 1;

  result.probes.resize(probes.size());
  std::vector<std::vector<std::string>> probe_artifacts(probes.size());
  parallel_for(probes.size(), opts.jobs, [&](std::size_t pi) {
    const std::int64_t id = probes[pi];
    const auto it = std::find(data.test.ids.begin(), data.test.ids.end(), id);
    if (it == data.test.ids.end())
      throw ConfigError("stats: probe id " + std::to_string(id) + " is not in the test split");
    const auto row = static_cast<std::size_t>(it - data.test.ids.begin());
    const auto x = data.test.features.row(row);
    LogitPools pools{pool_logits(first, x), second ? pool_logits(*second, x) : Matrix{}};

    ProbeStudy& ps = result.probes[pi];
    ps.probe_id = id;
    ps.model = fit_gaussian_model(pools);
    const fs::path dir = root / ("probe_" + std::to_string(id));
    auto& arts = probe_artifacts[pi];
    auto emit = [&](const std::string& name, const std::string& text) {
      write_file(dir / name, text);
      arts.push_back(fs::relative(dir / name, opts.out_dir).generic_string());
    };

    const double offset_sq = [&] {
      double s = 0.0;
      for (double v : ps.model.delta_mu) s += v * v;
      return s;
    }();
    for (std::size_t m : cfg.stats_sizes) {
      if (m > pools.max_ensemble_size())
        throw ConfigError("stats: ensemble size " + std::to_string(m) + " too large for pool of " +
                          std::to_string(cfg.pool_size));
      DisplacementStats cell = displacement_study(pools, id, m, study);
      const std::string sfx = "_m" + std::to_string(m) + ".csv";

      std::ostringstream norms;
      norms << "trial,norm\n";
      for (std::size_t t = 0; t < cell.norms.size(); ++t)
        norms << t << ',' << format_double(cell.norms[t]) << '\n';
      emit("norms" + sfx, norms.str());

      std::ostringstream hist;
      hist << "bin_lo,bin_hi,count\n";
      for (std::size_t b = 0; b < cell.histogram.counts.size(); ++b)
        hist << format_double(cell.histogram.bin_lo(b)) << ',' << format_double(cell.histogram.bin_hi(b))
             << ',' << cell.histogram.counts[b] << '\n';
      emit("hist" + sfx, hist.str());

      std::ostringstream pmf;
      pmf << "x,density\n";
      for (std::size_t q = 0; q < cell.simulated.curve.query_points.size(); ++q)
        pmf << format_double(cell.simulated.curve.query_points[q]) << ','
            << format_double(cell.simulated.curve.densities[q]) << '\n';
      emit("pmf" + sfx, pmf.str());

      ScalingRow srow;
      srow.m = m;
      for (double v : cell.norms) {
        srow.mean_norm += v;
        srow.mean_sq_norm += v * v;
      }
      srow.mean_norm /= static_cast<double>(cell.norms.size());
      srow.mean_sq_norm /= static_cast<double>(cell.norms.size());
      srow.predicted_mean_sq = trace(ps.model.sigma_prime) / static_cast<double>(m) + offset_sq;
      ps.scaling.push_back(srow);
      ps.cells.push_back(std::move(cell));
    }

    std::ostringstream fitted;
    fitted << "component,delta_mu";
    for (std::size_t k = 0; k < ps.model.delta_mu.size(); ++k) fitted << ",sigma_prime_" << k;
    fitted << '\n';
    for (std::size_t k = 0; k < ps.model.delta_mu.size(); ++k) {
      fitted << k << ',' << format_double(ps.model.delta_mu[k]);
      for (std::size_t j = 0; j < ps.model.delta_mu.size(); ++j)
        fitted << ',' << format_double(ps.model.sigma_prime(k, j));
      fitted << '\n';
    }
    emit("fitted_model.csv", fitted.str());

    std::ostringstream scaling;
    scaling << "m,mean_norm,mean_sq_norm,predicted_mean_sq,delta_mu_norm,tv_distance\n";
    for (std::size_t c = 0; c < ps.scaling.size(); ++c) {
      const auto& r = ps.scaling[c];
      scaling << r.m << ',' << format_double(r.mean_norm) << ',' << format_double(r.mean_sq_norm) << ','
              << format_double(r.predicted_mean_sq) << ',' << format_double(std::sqrt(offset_sq)) << ','
              << format_double(ps.cells[c].tv_distance) << '\n';
    }
    emit("scaling.csv", scaling.str());
  });

  std::ostringstream summary;
  summary << "probe,m,mean_norm,mean_sq_norm,predicted_mean_sq,delta_mu_norm,tv_distance\n";
  for (const auto& ps : result.probes)
    for (std::size_t c = 0; c < ps.scaling.size(); ++c) {
      const auto& r = ps.scaling[c];
      summary << ps.probe_id << ',' << r.m << ',' << format_double(r.mean_norm) << ','
              << format_double(r.mean_sq_norm) << ',' << format_double(r.predicted_mean_sq) << ','
              << format_double(l2_norm(ps.model.delta_mu)) << ','
              << format_double(ps.cells[c].tv_distance) << '\n';
    }
  write_file(root / "summary.csv", summary.str());

  result.manifest.command = "stats";
  result.manifest.config_hash = cfg.config_hash();
  result.manifest.artifacts = {"stats/pools.csv", "stats/summary.csv"};
  for (const auto& a : probe_artifacts)
    result.manifest.artifacts.insert(result.manifest.artifacts.end(), a.begin(), a.end());
  write_manifest(opts.out_dir, result.manifest, start);
  return result;
}

// ---------------------------------------------------------------------------
// report

ConsolidatedReport run_report(const std::vector<fs::path>& manifests, const fs::path& out_dir) {
  if (manifests.empty()) throw ConfigError("report: at least one manifest is required");
  ConsolidatedReport out;
  for (const auto& path : manifests) {
    try {
      if (!fs::exists(path)) throw IntegrityError("manifest not found");
      const Manifest man = read_manifest(path);
      if (man.report.empty()) throw IntegrityError("manifest lists no report");
      const fs::path report_path = path.parent_path() / man.report;
      if (!fs::exists(report_path)) throw IntegrityError("missing report " + report_path.string());
      const auto kv = parse_key_values(read_file(report_path));
      if (!kv.contains("config_hash") || kv.at("config_hash") != man.config_hash)
        throw IntegrityError("report config hash does not match its manifest");
      ReportRow row;
      row.source = path.string();
      row.objective = kv.contains("objective") ? kv.at("objective") : "?";
      row.er_old = parse_rate(kv.at("er_old"));
      row.er_new = parse_rate(kv.at("er_new"));
      row.nfr = parse_rate(kv.at("nfr"));
      row.pfr = parse_rate(kv.at("pfr"));
      row.identity_holds = row.er_new.count - row.er_old.count == row.nfr.count - row.pfr.count &&
                           row.er_new.total == row.nfr.total;
      out.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      out.errors.push_back(path.string() + ": " + e.what());
    }
  }

  std::ostringstream txt;
  std::ostringstream csv;
  txt << "# pctlab summary\n";
  char line[512];
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s %8s %9s  %s\n", "objective", "ER_old",
                "ER_new", "NFR", "PFR", "identity", "source");
  txt << line;
  csv << "source,objective,er_old,er_new,nfr,pfr,identity\n";
  for (const auto& r : out.rows) {
    std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s %8s %9s  %s\n", r.objective.c_str(),
                  format_fixed4(r.er_old.value()).c_str(), format_fixed4(r.er_new.value()).c_str(),
                  format_fixed4(r.nfr.value()).c_str(), format_fixed4(r.pfr.value()).c_str(),
                  r.identity_holds ? "ok" : "VIOLATED", r.source.c_str());
    txt << line;
    csv << r.source << ',' << r.objective << ',' << format_fixed4(r.er_old.value()) << ','
        << format_fixed4(r.er_new.value()) << ',' << format_fixed4(r.nfr.value()) << ','
        << format_fixed4(r.pfr.value()) << ',' << (r.identity_holds ? "ok" : "violated") << '\n';
  }
  if (!out.errors.empty()) {
    txt << "\n# errors\n";
    for (const auto& e : out.errors) txt << e << '\n';
  }
  write_file(out_dir / "summary.txt", txt.str());
  write_file(out_dir / "summary.csv", csv.str());
  return out;
}

}  // namespace pctlab
