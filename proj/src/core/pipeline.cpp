#include "gf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "gf/error.hpp"
#include "gf/formula.hpp"
#include "gf/registry.hpp"
#include "gf/rng.hpp"
#include "json.hpp"

namespace gf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

bool contains(const std::vector<std::string>& v, std::string_view s) { return std::find(v.begin(), v.end(), s) != v.end(); }

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

// ---- presets ----

std::vector<std::string> preset_features(std::string_view preset) {
  const auto& all = feature_names();
  if (preset == "all") return all;
  if (preset == "greenfactory") {
    std::vector<std::string> v;
    for (const auto& f : all)
      if (f != "synflow") v.push_back(f);
    return v;
  }
  if (preset == "fast") return {"gm_e", "gm_f", "gm_j", "gradnorm", "eznas", "cifar10"};
  throw ConfigError("unknown feature preset '" + std::string(preset) + "' (expected all, greenfactory or fast)");
}

bool is_feature_preset(std::string_view name) { return name == "all" || name == "greenfactory" || name == "fast"; }

std::vector<std::string> resolve_features(std::string_view text) {
  if (is_feature_preset(text)) return preset_features(text);
  std::vector<std::string> names;
  for (auto& n : split_list(text, ','))
    if (!n.empty()) names.push_back(std::move(n));
  if (names.empty()) throw DataError("empty feature list");
  check_feature_names(names);
  std::set<std::string> seen;
  for (const auto& n : names)
    if (!seen.insert(n).second) throw DataError("feature '" + n + "' listed twice");
  return names;
}

HyperParams preset_hyperparams(std::string_view preset) {
  HyperParams hp;
  if (preset == "default") return hp;
  if (preset == "greenfactory") {
    hp.n_estimators = 968;
    hp.max_features = MaxFeatures::of(8);
    hp.min_samples_split = 3;
    hp.min_samples_leaf = 1;
    hp.max_depth = 38;
    hp.bootstrap = false;
    return hp;
  }
  if (preset == "fast") {
    hp.n_estimators = 945;
    hp.max_features = MaxFeatures::of(10);
    hp.min_samples_split = 3;
    hp.min_samples_leaf = 1;
    hp.max_depth = 73;
    hp.bootstrap = false;
    return hp;
  }
  throw ConfigError("unknown hyperparameter preset '" + std::string(preset) +
                    "' (expected default, greenfactory or fast)");
}

// ---- scoring ----

namespace {

constexpr std::size_t kStatsPerPass = 6;
constexpr std::array<std::string_view, 4> kPassGroups = {"probe_clean", "probe_noise", "probe_perturbation",
                                                         "probe_random"};

bool is_weight_stat(std::size_t s) { return s < 18 && s % kStatsPerPass == kStatsPerPass - 1; }

// Index into kPassGroups, or -1 for the weight copies that need no pass.
int pass_of_stat(std::size_t s) {
  if (is_weight_stat(s)) return -1;
  return s < 18 ? static_cast<int>(s / kStatsPerPass) : 3;
}

StatSet pass_mask(int pass) {
  StatSet m;
  for (std::size_t s = 0; s < kStatCount; ++s)
    if (pass_of_stat(s) == pass) m.set(s);
  return m;
}

bool is_formula_feature(std::string_view f) { return f == "eznas" || f.substr(0, 3) == "gm_"; }

StatSet feature_stats(const std::string& f, const FormulaRegistry& registry) {
  if (f == "gradnorm") return StatSet().set(static_cast<std::size_t>(Stat::PassGrad));
  if (is_formula_feature(f)) return referenced_stats(registry.get(f));
  return {};
}

void merge_record(ProbeRecord& dst, const ProbeRecord& src) {
  for (std::size_t i = 0; i < dst.layers.size(); ++i)
    for (std::size_t s = 0; s < kStatCount; ++s)
      if (src.layers[i].values[s]) dst.layers[i].values[s] = src.layers[i].values[s];
}

}  // namespace

FeatureTiming feature_cost_groups(const FormulaRegistry& registry) {
  FeatureTiming t;
  for (const auto& f : feature_names()) {
    std::vector<std::string> g;
    if (f == "cifar10" || f == "cifar100" || f == "imagenet16") {
      t.groups_of[f] = {"dataset"};
      continue;
    }
    g.emplace_back("setup");
    if (f == "aznas" || f.substr(0, 3) == "az_") {
      g.emplace_back("az");
    } else if (f == "gradnorm" || is_formula_feature(f)) {
      const StatSet stats = feature_stats(f, registry);
      for (int p = 0; p < 4; ++p)
        if ((stats & pass_mask(p)).any()) g.emplace_back(kPassGroups[static_cast<std::size_t>(p)]);
      g.push_back("eval_" + f);
    } else {
      g.push_back(f);
    }
    t.groups_of[f] = std::move(g);
  }
  return t;
}

std::vector<NetworkScore> score_network(const ScoreJob& job, const FormulaRegistry& registry,
                                        const std::vector<std::string>& features, const ScoringOptions& o,
                                        std::map<std::string, double>* group_seconds) {
  if (job.datasets.empty()) throw ContractError("score_network: no datasets");
  if (!job.accuracy.empty() && job.accuracy.size() != job.datasets.size())
    throw ContractError("score_network: accuracy list does not match datasets");
  check_feature_names(features);
  auto want = [&](std::string_view f) { return contains(features, f); };
  auto charge = [&](const std::string& group, Clock::time_point t0) {
    if (group_seconds) (*group_seconds)[group] += seconds_since(t0);
  };

  const std::uint64_t init_seed = derive_seed({job.seed, 0x1417});
  const std::uint64_t batch_seed = derive_seed({job.seed, 0xba7c});
  const std::uint64_t probe_seed = derive_seed({job.seed, 0x960be});

  bool want_az = want("aznas");
  for (const auto& f : features) want_az = want_az || f.substr(0, 3) == "az_";
  StatSet stats;
  for (const auto& f : features) stats |= feature_stats(f, registry);

  // Body-only results, filled from the first dataset's network.
  double naswot_v = 0.0, zen_v = 0.0;
  AzComponents az;

  std::vector<NetworkScore> out;
  for (std::size_t d = 0; d < job.datasets.size(); ++d) {
    const Dataset ds = job.datasets[d];
    NetworkScore ns;
    ScoreRow& row = ns.row;
    row.net_id = job.net_id;
    row.spec = to_string(job.spec);
    row.space = space_of(job.spec);
    row.dataset = ds;

    auto t0 = Clock::now();
    ArchSpec spec = job.spec;
    set_num_classes(spec, dataset_classes(ds));
    const Network net = Network::instantiate(spec, init_seed, o.resolution);
    const Tensor batch = gaussian_batch(net, o.batch_size, batch_seed);
    charge("setup", t0);

    if (d == 0) {
      if (want("naswot")) {
        t0 = Clock::now();
        naswot_v = naswot(net, batch).value;
        charge("naswot", t0);
      }
      if (want("zennas")) {
        t0 = Clock::now();
        zen_v = zen_score(net, derive_seed({job.seed, 0x2e4})).value;
        charge("zennas", t0);
      }
      if (want_az) {
        t0 = Clock::now();
        az = aznas_components(net, batch, derive_seed({job.seed, 0xa2}));
        charge("az", t0);
      }
    }

    if (want("params")) {
      t0 = Clock::now();
      row.params = static_cast<double>(count_params(net));
      charge("params", t0);
    }
    const bool need_flops = want("flops") || want_az;
    double flops = 0.0;
    if (need_flops) {
      t0 = Clock::now();
      flops = static_cast<double>(count_flops(net, net.sample_shape()));
      charge("flops", t0);
      if (want("flops")) row.flops = flops;
    }
    if (want("synflow")) {
      t0 = Clock::now();
      row.set_proxy("synflow", synflow(net).value);
      charge("synflow", t0);
    }
    if (want("naswot")) row.set_proxy("naswot", naswot_v);
    if (want("zennas")) row.set_proxy("zennas", zen_v);
    if (want("zico")) {
      t0 = Clock::now();
      row.set_proxy("zico", zico(net, derive_seed({job.seed, 0x21c0})).value);
      charge("zico", t0);
    }
    if (want("tenas")) {
      t0 = Clock::now();
      ns.tenas = tenas(net, derive_seed({job.seed, 0x7e4a5}));
      ns.has_tenas = true;
      row.set_proxy("tenas", ns.tenas.standalone);
      charge("tenas", t0);
    }
    if (want_az) {
      ns.az = az;
      ns.az.flops = flops;  // the head is part of the complexity term
      ns.has_az = true;
      row.set_proxy("az_expressivity", az.expressivity);
      row.set_proxy("az_progressivity", az.progressivity);
      row.set_proxy("az_trainability", az.trainability);
      row.set_proxy("aznas", 0.0);
    }

    if (stats.any()) {
      ProbeOptions po;
      po.noise_sigma = o.noise_sigma;
      po.perturb_eps = o.perturb_eps;
      po.seed = probe_seed;
      t0 = Clock::now();
      StatSet weights;
      for (std::size_t s = 0; s < kStatCount; ++s)
        if (is_weight_stat(s)) weights.set(s);
      po.required = stats & weights;
      ProbeRecord rec = run_probes(net, batch, po);
      charge("setup", t0);
      for (int p = 0; p < 4; ++p) {
        po.required = stats & pass_mask(p);
        if (po.required.none()) continue;
        t0 = Clock::now();
        merge_record(rec, run_probes(net, batch, po));
        charge(std::string(kPassGroups[static_cast<std::size_t>(p)]), t0);
      }
      for (const auto& f : features) {
        if (f == "gradnorm") {
          t0 = Clock::now();
          row.set_proxy(f, gradnorm(rec).value);
          charge("eval_gradnorm", t0);
        } else if (is_formula_feature(f)) {
          t0 = Clock::now();
          row.set_proxy(f, sanitize(eval_formula(registry.get(f), rec)));
          charge("eval_" + f, t0);
        }
      }
    }

    t0 = Clock::now();
    const auto& acc = job.accuracy.empty() ? std::optional<double>{} : job.accuracy[d];
    row.accuracy = acc ? *acc : surrogate_accuracy(job.spec, ds, derive_seed({job.seed, 0xacc}));
    charge("target", t0);
    out.push_back(std::move(ns));
  }
  return out;
}

void apply_population_columns(std::vector<NetworkScore>& scores) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < scores.size(); ++i)
    groups[{static_cast<int>(scores[i].row.space), static_cast<int>(scores[i].row.dataset)}].push_back(i);
  for (const auto& [key, idx] : groups) {
    if (idx.size() < 2) continue;
    bool all_tenas = true, all_az = true;
    for (auto i : idx) {
      all_tenas = all_tenas && scores[i].has_tenas;
      all_az = all_az && scores[i].has_az;
    }
    if (all_tenas) {
      std::vector<TenasComponents> pop;
      for (auto i : idx) pop.push_back(scores[i].tenas);
      const auto v = tenas_rank_sum(pop);
      for (std::size_t k = 0; k < idx.size(); ++k) scores[idx[k]].row.set_proxy("tenas", v[k]);
    }
    if (all_az) {
      std::vector<AzComponents> pop;
      for (auto i : idx) pop.push_back(scores[i].az);
      const auto v = aznas_aggregate(pop);
      for (std::size_t k = 0; k < idx.size(); ++k) scores[idx[k]].row.set_proxy("aznas", v[k]);
    }
  }
}

// ---- collect ----

std::vector<ScoreJob> sample_jobs(const CollectOptions& o) {
  if (o.n < 1) throw ContractError("collect: n must be at least 1");
  if (o.datasets.empty()) throw ContractError("collect: no datasets");
  std::vector<ScoreJob> jobs;
  for (SearchSpace space : o.spaces)
    for (std::size_t i = 0; i < o.n; ++i) {
      ScoreJob j;
      j.seed = derive_seed({o.seed, static_cast<std::uint64_t>(space), i});
      j.spec = sample_spec(space, derive_seed({j.seed, 0x5bec}));
      char id[32];
      std::snprintf(id, sizeof id, "%s-%04zu", std::string(to_string(space)).c_str(), i);
      j.net_id = id;
      j.datasets = o.datasets;
      jobs.push_back(std::move(j));
    }
  return jobs;
}

std::vector<ScoreJob> jobs_from_targets(std::istream& in, std::uint64_t seed) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("target csv: empty input");
  const auto header = split_csv_line(line);
  auto col = [&](std::string_view name) -> long {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<long>(it - header.begin());
  };
  const long c_spec = col("spec"), c_ds = col("dataset"), c_acc = col("accuracy"), c_id = col("net_id");
  std::string missing;
  for (auto [c, n] : {std::pair{c_spec, "spec"}, {c_ds, "dataset"}, {c_acc, "accuracy"}})
    if (c < 0) missing += (missing.empty() ? "" : ", ") + std::string(n);
  if (!missing.empty()) throw DataError("target csv: missing columns: " + missing);

  std::vector<ScoreJob> jobs;
  std::map<std::string, std::size_t> by_spec;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    const std::string where = "target csv line " + std::to_string(line_no) + ": ";
    if (f.size() != header.size()) throw DataError(where + "wrong field count");
    ArchSpec spec;
    Dataset ds;
    double acc;
    try {
      spec = parse_spec(f[static_cast<std::size_t>(c_spec)]);
      ds = parse_dataset(f[static_cast<std::size_t>(c_ds)]);
      std::size_t used = 0;
      const std::string& a = f[static_cast<std::size_t>(c_acc)];
      acc = std::stod(a, &used);
      if (used != a.size() || !std::isfinite(acc)) throw DataError("accuracy is not a finite number");
    } catch (const Error& e) {
      throw DataError(where + e.what());
    } catch (const std::exception&) {
      throw DataError(where + "accuracy is not a number");
    }
    const std::string key = to_string(spec);
    auto it = by_spec.find(key);
    if (it == by_spec.end()) {
      ScoreJob j;
      j.spec = spec;
      j.seed = derive_seed({seed, 0xe47, jobs.size()});
      if (c_id >= 0 && !f[static_cast<std::size_t>(c_id)].empty()) {
        j.net_id = f[static_cast<std::size_t>(c_id)];
      } else {
        char id[32];
        std::snprintf(id, sizeof id, "ext-%04zu", jobs.size());
        j.net_id = id;
      }
      it = by_spec.emplace(key, jobs.size()).first;
      jobs.push_back(std::move(j));
    }
    ScoreJob& j = jobs[it->second];
    if (std::find(j.datasets.begin(), j.datasets.end(), ds) != j.datasets.end())
      throw DataError(where + "duplicate (spec, dataset) pair");
    j.datasets.push_back(ds);
    j.accuracy.emplace_back(acc);
  }
  if (jobs.empty()) throw DataError("target csv: no rows");
  return jobs;
}

std::vector<ScoreJob> jobs_from_targets(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return jobs_from_targets(in, seed);
}

CollectResult collect(const std::vector<ScoreJob>& jobs, const FormulaRegistry& registry, const CollectOptions& o) {
  const auto start = Clock::now();
  const auto& features = feature_names();
  std::vector<std::vector<NetworkScore>> results(jobs.size());
  std::vector<std::map<std::string, double>> seconds(jobs.size());
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex mu;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        results[i] = score_network(jobs[i], registry, features, o.scoring, &seconds[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
      const std::size_t k = ++done;
      if (o.progress) {
        std::lock_guard<std::mutex> lock(mu);
        o.progress(k, jobs.size());
      }
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(o.workers, static_cast<unsigned>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<NetworkScore> all;
  for (auto& r : results)
    for (auto& s : r) all.push_back(std::move(s));
  apply_population_columns(all);

  CollectResult res;
  for (auto& s : all) res.table.rows.push_back(std::move(s.row));
  res.timing = feature_cost_groups(registry);
  res.timing.group_seconds["dataset"] = 0.0;
  for (const auto& groups : res.timing.groups_of)
    for (const auto& g : groups.second) res.timing.group_seconds.emplace(g, 0.0);
  res.timing.group_seconds.emplace("target", 0.0);
  for (const auto& m : seconds)
    for (const auto& [g, s] : m) res.timing.group_seconds[g] += s;
  res.wall_seconds = seconds_since(start);
  return res;
}

void write_timing_csv(const FeatureTiming& t, std::ostream& out) {
  std::map<std::string, std::vector<std::string>> members;
  for (const auto& f : feature_names())
    for (const auto& g : t.groups(f)) members[g].push_back(f);
  out << "group,seconds,features\n";
  for (const auto& [g, s] : t.group_seconds)
    out << csv_line({g, format_double(s), join(members[g], ";")}) << '\n';
}

FeatureTiming read_timing_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("timing csv: empty input");
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"group", "seconds", "features"})
    throw DataError("timing csv: expected header group,seconds,features");
  FeatureTiming t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw DataError("timing csv line " + std::to_string(line_no) + ": expected 3 fields");
    double s;
    try {
      std::size_t used = 0;
      s = std::stod(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw DataError("timing csv line " + std::to_string(line_no) + ": seconds is not a number");
    }
    if (!t.group_seconds.emplace(f[0], s).second)
      throw DataError("timing csv line " + std::to_string(line_no) + ": duplicate group '" + f[0] + "'");
    if (f[2].empty()) continue;
    for (const auto& feat : split_list(f[2], ';'))
      if (!feat.empty()) t.groups_of[feat].push_back(f[0]);
  }
  return t;
}

FeatureTiming load_timing_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_timing_csv(in);
}

// ---- splits ----

SplitAssignment split_table(const ScoreTable& table, const SplitConfig& c) {
  return stratified_split(table.targets(), c.stratified ? c.bins : 1, SplitFractions{}, c.seed, c.bin_mode);
}

void store_split(const SplitConfig& c, ForestModel& m) {
  m.metadata["split_seed"] = std::to_string(c.seed);
  m.metadata["split_mode"] = c.stratified ? "stratified" : "random";
  m.metadata["split_bins"] = std::to_string(c.bins);
  m.metadata["split_bin_mode"] = c.bin_mode == BinMode::EqualWidth ? "equal_width" : "quantile";
}

SplitConfig stored_split(const ForestModel& m, const SplitConfig& fallback) {
  SplitConfig c = fallback;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = m.metadata.find(key);
    return it == m.metadata.end() ? nullptr : &it->second;
  };
  try {
    if (auto v = get("split_seed")) c.seed = std::stoull(*v);
    if (auto v = get("split_bins")) c.bins = std::stoi(*v);
  } catch (const std::exception&) {
    throw ParseError("model file: bad split metadata", 0);
  }
  if (auto v = get("split_mode")) c.stratified = *v == "stratified";
  if (auto v = get("split_bin_mode")) c.bin_mode = *v == "quantile" ? BinMode::Quantile : BinMode::EqualWidth;
  return c;
}

// ---- train ----

namespace {

std::vector<double> take(const std::vector<double>& v, const std::vector<std::size_t>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.data.begin() + static_cast<long>(rows[i] * m.cols),
              m.data.begin() + static_cast<long>((rows[i] + 1) * m.cols), out.data.begin() + static_cast<long>(i * m.cols));
  return out;
}

void require_rows(const std::vector<std::size_t>& rows, const char* slice) {
  if (rows.size() < 2) throw DataError(std::string(slice) + " slice has fewer than 2 rows");
}

}  // namespace

TrainResult train(const ScoreTable& table, const TrainOptions& o) {
  check_feature_names(o.features);
  TrainResult res;
  res.split = split_table(table, o.split);
  const auto train_rows = res.split.rows(Slice::Train);
  require_rows(train_rows, "train");
  const Matrix x = table.matrix(o.features);
  const auto y = table.targets();
  FitOptions fo;
  fo.threads = o.threads;
  res.model = fit_forest(take_rows(x, train_rows), take(y, train_rows), o.hp, o.forest_seed, o.features, fo);
  store_split(o.split, res.model);
  res.model.metadata["forest_seed"] = std::to_string(o.forest_seed);
  res.rmse = rmse_report(res.model.predict(x), table, res.split);
  return res;
}

std::vector<RmseRow> rmse_report(const std::vector<double>& pred, const ScoreTable& table, const SplitAssignment& split) {
  if (pred.size() != table.rows.size() || split.slice.size() != table.rows.size())
    throw DataError("rmse_report: predictions, split and table sizes differ");
  std::vector<RmseRow> out;
  const auto y = table.targets();
  for (Slice s : {Slice::Train, Slice::Val, Slice::Test}) {
    const auto rows = split.rows(s);
    if (rows.empty()) continue;
    out.push_back({to_string(s), "all", "all", rmse(take(pred, rows), take(y, rows)), rows.size()});
    for (SearchSpace space : {SearchSpace::Tss, SearchSpace::Sss})
      for (std::size_t d = 0; d < kDatasetNames.size(); ++d) {
        std::vector<std::size_t> g;
        for (auto r : rows)
          if (table.rows[r].space == space && table.rows[r].dataset == static_cast<Dataset>(d)) g.push_back(r);
        if (g.empty()) continue;
        out.push_back({to_string(s), std::string(to_string(space)), std::string(kDatasetNames[d]),
                       rmse(take(pred, g), take(y, g)), g.size()});
      }
  }
  return out;
}

void write_rmse_csv(const std::vector<RmseRow>& rows, std::ostream& out) {
  out << "slice,search_space,dataset,rmse,n\n";
  for (const auto& r : rows)
    out << csv_line({r.slice, r.search_space, r.dataset, format_double(r.rmse), std::to_string(r.n)}) << '\n';
}

std::string format_rmse_text(const std::vector<RmseRow>& rows) {
  std::ostringstream ss;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-5s  %-5s  %-10s  %9s  %5s\n", "slice", "space", "dataset", "rmse", "n");
  ss << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-5s  %-5s  %-10s  %9.4f  %5zu\n", r.slice.c_str(), r.search_space.c_str(),
                  r.dataset.c_str(), r.rmse, r.n);
    ss << buf;
  }
  return ss.str();
}

// ---- rfe ----

RfeResult run_rfe(const ScoreTable& table, const FeatureTiming& timing, const RfeOptions& o) {
  check_feature_names(o.features);
  timing.cost(o.features);  // fails early on missing groups
  const auto split = split_table(table, o.split);
  const auto tr = split.rows(Slice::Train), va = split.rows(Slice::Val);
  require_rows(tr, "train");
  require_rows(va, "validation");
  const Matrix x = table.matrix(o.features);
  const auto y = table.targets();
  FitOptions fo;
  fo.threads = o.threads;
  return rfe(take_rows(x, tr), take(y, tr), take_rows(x, va), take(y, va), o.features, o.hp, o.seed, timing, fo);
}

void write_rfe_csv(const std::vector<TradeoffRow>& rows, std::ostream& out) {
  out << "k,rmse,time_seconds,score\n";
  for (const auto& r : rows)
    out << csv_line({std::to_string(r.k), format_double(r.rmse), format_double(r.time_seconds), format_double(r.score)})
        << '\n';
}

std::vector<TradeoffRow> rescore_rfe_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("rfe csv: empty input");
  const auto header = split_csv_line(line);
  auto col = [&](std::initializer_list<std::string_view> names) -> long {
    for (auto n : names) {
      const auto it = std::find(header.begin(), header.end(), n);
      if (it != header.end()) return static_cast<long>(it - header.begin());
    }
    return -1;
  };
  const long ck = col({"k"}), cr = col({"rmse"}), ct = col({"time_seconds", "time"});
  if (ck < 0 || cr < 0 || ct < 0) throw DataError("rfe csv: need columns k, rmse and time_seconds");
  std::vector<TradeoffRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw DataError("rfe csv line " + std::to_string(line_no) + ": wrong field count");
    TradeoffRow r;
    try {
      r.k = std::stoul(f[static_cast<std::size_t>(ck)]);
      r.rmse = std::stod(f[static_cast<std::size_t>(cr)]);
      r.time_seconds = std::stod(f[static_cast<std::size_t>(ct)]);
    } catch (const std::exception&) {
      throw DataError("rfe csv line " + std::to_string(line_no) + ": not a number");
    }
    rows.push_back(r);
  }
  if (rows.size() < 2) throw DataError("rfe csv: need at least 2 rows");
  std::vector<double> rm, tm;
  for (const auto& r : rows) {
    rm.push_back(r.rmse);
    tm.push_back(r.time_seconds);
  }
  const auto s = tradeoff_score(rm, tm);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].score = s[i];
  return rows;
}

void write_rfe_selection_csv(const RfeResult& r, const std::vector<std::string>& features, std::ostream& out) {
  std::vector<std::string> head = {"k"};
  head.insert(head.end(), features.begin(), features.end());
  out << csv_line(head) << '\n';
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    std::vector<std::string> f = {std::to_string(r.rows[i].k)};
    for (const auto& name : features) f.emplace_back(contains(r.selected[i], name) ? "1" : "0");
    out << csv_line(f) << '\n';
  }
}

std::string format_rfe_text(const std::vector<TradeoffRow>& rows) {
  std::ostringstream ss;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%3s  %9s  %11s  %6s\n", "k", "rmse", "time [s]", "score");
  ss << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%3zu  %9.4f  %11.4f  %6.3f\n", r.k, r.rmse, r.time_seconds, r.score);
    ss << buf;
  }
  return ss.str();
}

// ---- tune ----

TuneResult tune(const ScoreTable& table, const TuneOptions& o) {
  if (o.trials < 20) throw ContractError("tune: at least 20 trials are required");
  check_feature_names(o.features);
  const auto split = split_table(table, o.split);
  const auto tr = split.rows(Slice::Train), va = split.rows(Slice::Val);
  require_rows(tr, "train");
  require_rows(va, "validation");
  const Matrix x = table.matrix(o.features);
  const auto y = table.targets();
  const Matrix xt = take_rows(x, tr), xv = take_rows(x, va);
  const auto yt = take(y, tr), yv = take(y, va);
  FitOptions fo;
  fo.threads = o.threads;
  const std::uint64_t forest_seed = derive_seed({o.seed, 0xf0e});

  TpeOptions to;
  to.n_trials = o.trials;
  to.seed = o.seed;
  to.random_search = o.random_search;
  to.enqueued = {point_from_hyperparams(HyperParams{})};
  std::size_t trial = 0;
  auto objective = [&](const TpePoint& p) {
    const HyperParams hp = hyperparams_from_point(p);
    const double r = rmse(fit_forest(xt, yt, hp, forest_seed, o.features, fo).predict(xv), yv);
    if (o.on_trial) {
      TpeTrial t;
      t.number = trial;
      t.point = p;
      t.objective = r;
      t.warmup = trial < to.warmup;
      o.on_trial(t);
    }
    ++trial;
    return r;
  };
  TuneResult res;
  res.search = tpe_optimize(forest_search_space(), objective, to);
  res.best = hyperparams_from_point(res.search.best_trial().point);
  res.best_rmse = res.search.best_trial().objective;
  res.default_rmse = res.search.trials.front().objective;
  res.features = o.features;
  res.seed = o.seed;
  return res;
}

namespace {

nlohmann::ordered_json hp_json(const HyperParams& hp) {
  nlohmann::ordered_json j;
  j["n_estimators"] = hp.n_estimators;
  if (hp.max_features.mode == MaxFeaturesMode::Count)
    j["max_features"] = hp.max_features.count;
  else
    j["max_features"] = to_string(hp.max_features);
  j["min_samples_split"] = hp.min_samples_split;
  j["min_samples_leaf"] = hp.min_samples_leaf;
  j["max_depth"] = hp.max_depth;
  j["bootstrap"] = hp.bootstrap;
  return j;
}

}  // namespace

std::string tuned_json(const TuneResult& r) {
  nlohmann::ordered_json j = hp_json(r.best);
  j["validation_rmse"] = r.best_rmse;
  j["default_validation_rmse"] = r.default_rmse;
  j["trials"] = r.search.trials.size();
  j["seed"] = r.seed;
  j["features"] = r.features;
  return j.dump(2) + "\n";
}

HyperParams parse_tuned_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("hyperparameter json: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("hyperparameter json: expected an object");
  HyperParams hp;
  try {
    auto int_field = [&](const char* key, int& dst) {
      if (j.contains(key)) dst = j.at(key).get<int>();
    };
    int_field("n_estimators", hp.n_estimators);
    int_field("min_samples_split", hp.min_samples_split);
    int_field("min_samples_leaf", hp.min_samples_leaf);
    int_field("max_depth", hp.max_depth);
    if (j.contains("max_features")) {
      const auto& mf = j.at("max_features");
      hp.max_features = mf.is_number_integer() ? MaxFeatures::of(mf.get<int>()) : parse_max_features(mf.get<std::string>());
    }
    if (j.contains("bootstrap")) hp.bootstrap = j.at("bootstrap").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("hyperparameter json: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("hyperparameter json: ") + e.what());
  }
  validate_tuning_ranges(hp);
  return hp;
}

HyperParams load_tuned_json(const std::string& path) { return parse_tuned_json(read_text_file(path)); }

void write_trial_log(const TuneResult& r, std::ostream& out) {
  out << "trial,n_estimators,max_features,min_samples_split,min_samples_leaf,max_depth,bootstrap,objective\n";
  for (const auto& t : r.search.trials) {
    const HyperParams hp = hyperparams_from_point(t.point);
    out << csv_line({std::to_string(t.number), std::to_string(hp.n_estimators), to_string(hp.max_features),
                     std::to_string(hp.min_samples_split), std::to_string(hp.min_samples_leaf),
                     std::to_string(hp.max_depth), hp.bootstrap ? "true" : "false", format_double(t.objective)})
        << '\n';
  }
}

// ---- eval / report ----

std::vector<NamedColumn> proxy_columns(const ScoreTable& table) {
  std::vector<NamedColumn> cols;
  for (auto id : kProxyIds) cols.push_back({std::string(id), table.column(id)});
  cols.push_back({"params", table.column("params")});
  cols.push_back({"flops", table.column("flops")});
  return cols;
}

EvalResult evaluate(const ForestModel& model, const ScoreTable& table, const SplitConfig& split_config) {
  try {
    check_feature_names(model.feature_names);
  } catch (const DataError& e) {
    throw DataError(std::string("model and table features do not match: ") + e.what());
  }
  if (model.feature_names.size() != model.n_features) throw DataError("model feature list is inconsistent");
  const auto split = split_table(table, split_config);
  const auto pred = model.predict(table.matrix(model.feature_names));
  EvalResult res;
  auto cols = proxy_columns(table);
  cols.push_back({"ensemble", pred});
  res.correlations = correlation_report(table, cols, split.rows(Slice::Test), &res.warnings);
  res.rmse = rmse_report(pred, table, split);
  return res;
}

EvalResult report(const ScoreTable& table, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> r = rows;
  if (r.empty()) {
    r.resize(table.rows.size());
    std::iota(r.begin(), r.end(), 0);
  }
  EvalResult res;
  res.correlations = correlation_report(table, proxy_columns(table), r, &res.warnings);
  return res;
}

// ---- files ----

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp-" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + path);
  }
}

}  // namespace gf
