#include "relevancer/runner.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "relevancer/csv.hpp"

namespace relevancer {

namespace fs = std::filesystem;

std::vector<StrategyTemplate> standard_strategies(std::uint64_t seed) {
  std::vector<StrategyTemplate> s;
  s.push_back({Strategy::kZeroShot, {0}, {}, false, seed, 0, false});
  s.push_back({Strategy::kRandomFewShot, {8, 16}, {}, false, seed, 0, false});
  s.push_back({Strategy::kRandomFewShot, {8, 16}, {}, true, seed, 0, false});
  s.push_back({Strategy::kRagFewShot, {8, 16}, {}, false, seed, 0, false});
  s.push_back({Strategy::kRagFewShot, {8, 16}, {}, true, seed, 0, false});
  s.push_back({Strategy::kRagMmrFewShot, {8, 16}, {0.75, 0.5, 0.25, 0.0}, false, seed, 0, false});
  return s;
}

void ExperimentGrid::validate() const {
  if (concurrency < 1) throw Error(Errc::kInvalidConfig, "concurrency must be >= 1");
  for (const auto& m : models) m.validate();
  embedder.validate();
  for (const auto& s : strategies) {
    if (s.k.empty()) throw Error(Errc::kInvalidConfig, "strategy " + std::string(to_string(s.strategy)) + " has no k");
    if (s.strategy == Strategy::kRagMmrFewShot && s.lambdas.empty()) {
      throw Error(Errc::kInvalidConfig, "rag_mmr_fs needs at least one lambda");
    }
    if (s.strategy != Strategy::kRagMmrFewShot && !s.lambdas.empty()) {
      throw Error(Errc::kInvalidConfig, "lambda is only meaningful for rag_mmr_fs");
    }
  }
  for (const auto& [model, p] : prices) {
    if (p.prompt_per_1k < 0 || p.completion_per_1k < 0) {
      throw Error(Errc::kInvalidConfig, "negative price for " + model);
    }
  }
}

// --- grid file -------------------------------------------------------------

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(Errc::kInvalidConfig, "grid: " + msg); }

void check_keys(const toml::table& t, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, node] : t) {
    if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
      bad("unknown key '" + std::string(key.str()) + "' in " + where);
    }
  }
}

std::string req_string(const toml::table& t, std::string_view key, const std::string& where) {
  auto v = t[key].value<std::string>();
  if (!v) bad(where + " needs string '" + std::string(key) + "'");
  return *v;
}

template <typename T>
std::vector<T> scalar_or_array(const toml::node_view<const toml::node>& node, const std::string& what) {
  std::vector<T> out;
  if (!node) return out;
  if (const auto* arr = node.as_array()) {
    for (const auto& el : *arr) {
      auto v = el.template value<T>();
      if (!v) bad("bad element in " + what);
      out.push_back(*v);
    }
  } else if (auto v = node.template value<T>()) {
    out.push_back(*v);
  } else {
    bad("bad value for " + what);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

std::size_t as_size(std::int64_t v, const std::string& what) {
  if (v < 0) bad(what + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentGrid parse_grid_toml(std::string_view text, const fs::path& base_dir) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    bad(std::string(e.description()));
  }
  check_keys(doc,
             {"models", "strategies", "preset", "seed", "scheme", "test", "pool", "test_mapping", "pool_mapping",
              "store", "embedder", "cache_dir", "output_dir", "report", "concurrency", "keep_prompts", "prices",
              "baselines"},
             "grid");

  ExperimentGrid g;
  const std::uint64_t seed = static_cast<std::uint64_t>(doc["seed"].value_or<std::int64_t>(0));

  if (auto s = doc["scheme"].value<std::string>()) {
    auto names = builtin_scheme_names();
    g.scheme = std::find(names.begin(), names.end(), *s) != names.end() ? *s : resolve(base_dir, *s).string();
  }
  g.test_set = resolve(base_dir, req_string(doc, "test", "grid"));
  g.pool = resolve(base_dir, req_string(doc, "pool", "grid"));
  if (auto v = doc["test_mapping"].value<std::string>()) g.test_mapping = resolve(base_dir, *v);
  if (auto v = doc["pool_mapping"].value<std::string>()) g.pool_mapping = resolve(base_dir, *v);
  if (auto v = doc["store"].value<std::string>()) g.store = resolve(base_dir, *v);
  if (auto v = doc["cache_dir"].value<std::string>()) g.cache_dir = resolve(base_dir, *v);
  else g.cache_dir = resolve(base_dir, g.cache_dir.string());
  if (auto v = doc["output_dir"].value<std::string>()) g.output_dir = resolve(base_dir, *v);
  else g.output_dir = resolve(base_dir, g.output_dir.string());
  if (auto v = doc["report"].value<std::string>()) g.report = resolve(base_dir, *v);
  else g.report = resolve(base_dir, g.report.string());
  g.concurrency = as_size(doc["concurrency"].value_or<std::int64_t>(4), "concurrency");
  g.keep_prompts = doc["keep_prompts"].value_or(false);

  if (const auto* e = doc["embedder"].as_table()) {
    check_keys(*e, {"kind", "dim", "endpoint", "model"}, "[embedder]");
    g.embedder.kind = parse_embedder_kind((*e)["kind"].value_or<std::string>("hash"));
    g.embedder.dim = as_size((*e)["dim"].value_or<std::int64_t>(kDefaultEmbeddingDim), "embedder.dim");
    g.embedder.endpoint = (*e)["endpoint"].value_or<std::string>("");
    g.embedder.model = (*e)["model"].value_or<std::string>("");
  }

  if (const auto* models = doc["models"].as_array()) {
    for (const auto& node : *models) {
      const auto* t = node.as_table();
      if (t == nullptr) bad("[[models]] entries must be tables");
      check_keys(*t, {"name", "model", "endpoint", "temperature", "top_p", "max_tokens"}, "[[models]]");
      LlmConfig m;
      m.model = req_string(*t, "model", "[[models]]");
      m.endpoint = req_string(*t, "endpoint", "[[models]]");
      m.name = (*t)["name"].value_or<std::string>("");
      m.temperature = (*t)["temperature"].value_or(0.0);
      m.top_p = (*t)["top_p"].value_or(1.0);
      m.max_tokens = static_cast<int>((*t)["max_tokens"].value_or<std::int64_t>(256));
      g.models.push_back(std::move(m));
    }
  }

  if (auto preset = doc["preset"].value<std::string>()) {
    if (*preset != "standard") bad("unknown preset '" + *preset + "'");
    g.strategies = standard_strategies(seed);
  }
  if (const auto* strategies = doc["strategies"].as_array()) {
    for (const auto& node : *strategies) {
      const auto* t = node.as_table();
      if (t == nullptr) bad("[[strategies]] entries must be tables");
      check_keys(*t, {"strategy", "k", "lambda", "cot", "seed", "mmr_pool", "reverse"}, "[[strategies]]");
      StrategyTemplate s;
      s.strategy = parse_strategy(req_string(*t, "strategy", "[[strategies]]"));
      for (auto k : scalar_or_array<std::int64_t>((*t)["k"], "k")) s.k.push_back(as_size(k, "k"));
      if (s.k.empty()) {
        if (s.strategy != Strategy::kZeroShot) bad("strategy " + std::string(to_string(s.strategy)) + " needs k");
        s.k.push_back(0);
      }
      s.lambdas = scalar_or_array<double>((*t)["lambda"], "lambda");
      s.cot = (*t)["cot"].value_or(false);
      s.seed = static_cast<std::uint64_t>((*t)["seed"].value_or<std::int64_t>(static_cast<std::int64_t>(seed)));
      s.mmr_pool = as_size((*t)["mmr_pool"].value_or<std::int64_t>(0), "mmr_pool");
      s.reverse = (*t)["reverse"].value_or(false);
      g.strategies.push_back(std::move(s));
    }
  }

  if (const auto* prices = doc["prices"].as_table()) {
    for (const auto& [model, node] : *prices) {
      const auto* t = node.as_table();
      if (t == nullptr) bad("prices." + std::string(model.str()) + " must be a table");
      check_keys(*t, {"prompt", "completion"}, "prices");
      g.prices[std::string(model.str())] = Price{(*t)["prompt"].value_or(0.0), (*t)["completion"].value_or(0.0)};
    }
  }

  if (const auto* baselines = doc["baselines"].as_array()) {
    for (const auto& node : *baselines) {
      const auto* t = node.as_table();
      if (t == nullptr) bad("[[baselines]] entries must be tables");
      check_keys(*t, {"config_id", "accuracy", "macro_f1", "weighted_f1"}, "[[baselines]]");
      g.baselines.push_back({req_string(*t, "config_id", "[[baselines]]"), (*t)["accuracy"].value_or(0.0),
                             (*t)["macro_f1"].value_or(0.0), (*t)["weighted_f1"].value_or(0.0)});
    }
  }

  g.validate();
  return g;
}

ExperimentGrid load_grid_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kInvalidConfig, "cannot open grid file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_grid_toml(buf.str(), path.parent_path());
}

// --- config ids ------------------------------------------------------------

std::string format_lambda(double lambda) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, lambda);
  if (ec != std::errc{}) throw Error(Errc::kBadLambda, "cannot format lambda");
  return std::string(buf, ptr);
}

std::string config_tag(const PromptConfig& config) {
  std::string tag;
  switch (config.strategy) {
    case Strategy::kZeroShot: tag = "VANILLA"; break;
    case Strategy::kRandomFewShot: tag = std::to_string(config.k) + "_FS"; break;
    case Strategy::kRagFewShot: tag = std::to_string(config.k) + "_FS_RAG"; break;
    case Strategy::kRagMmrFewShot:
      tag = std::to_string(config.k) + "_FS_RAG_MMR_" + format_lambda(config.lambda.value_or(0.0));
      break;
  }
  if (config.cot) tag += "_COT";
  if (config.reverse) tag += "_REV";
  return tag;
}

std::string config_id(const LlmConfig& model, const PromptConfig& config) {
  return model.display_name() + " + " + config_tag(config);
}

ParsedConfigId parse_config_id(std::string_view id) {
  auto fail = [&]() -> ParsedConfigId {
    throw Error(Errc::kInvalidConfig, "malformed config id '" + std::string(id) + "'");
  };
  auto sep = id.rfind(" + ");
  if (sep == std::string_view::npos || sep == 0) return fail();
  ParsedConfigId p;
  p.model = std::string(id.substr(0, sep));

  std::vector<std::string_view> parts;
  std::string_view tag = id.substr(sep + 3);
  for (std::size_t start = 0;;) {
    auto pos = tag.find('_', start);
    parts.push_back(tag.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  std::size_t i = 0;
  if (parts[0] == "VANILLA") {
    i = 1;
  } else {
    auto [ptr, ec] = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), p.k);
    if (ec != std::errc{} || ptr != parts[0].data() + parts[0].size() || p.k == 0) return fail();
    if (parts.size() < 2 || parts[1] != "FS") return fail();
    p.strategy = Strategy::kRandomFewShot;
    i = 2;
    if (i < parts.size() && parts[i] == "RAG") {
      p.strategy = Strategy::kRagFewShot;
      ++i;
      if (i < parts.size() && parts[i] == "MMR") {
        if (i + 1 >= parts.size()) return fail();
        double lambda = 0.0;
        auto s = parts[i + 1];
        auto [lp, lec] = std::from_chars(s.data(), s.data() + s.size(), lambda);
        if (lec != std::errc{} || lp != s.data() + s.size()) return fail();
        p.strategy = Strategy::kRagMmrFewShot;
        p.lambda = lambda;
        i += 2;
      }
    }
  }
  if (i < parts.size() && parts[i] == "COT") {
    if (p.strategy == Strategy::kZeroShot) return fail();
    p.cot = true;
    ++i;
  }
  if (i < parts.size() && parts[i] == "REV") {
    p.reverse = true;
    ++i;
  }
  if (i != parts.size()) return fail();
  return p;
}

std::vector<ExpandedConfig> expand_grid(const ExperimentGrid& grid) {
  std::vector<ExpandedConfig> out;
  if (grid.models.empty()) return out;
  grid.validate();
  const LabelScheme scheme = resolve_scheme(grid.scheme);
  std::set<std::string> seen;
  for (const auto& model : grid.models) {
    for (const auto& s : grid.strategies) {
      std::vector<std::optional<double>> lambdas;
      if (s.strategy == Strategy::kRagMmrFewShot) {
        for (double l : s.lambdas) lambdas.emplace_back(l);
      } else {
        lambdas.emplace_back(std::nullopt);
      }
      for (auto k : s.k) {
        for (const auto& lambda : lambdas) {
          PromptConfig pc;
          pc.strategy = s.strategy;
          pc.k = k;
          pc.lambda = lambda;
          pc.cot = s.cot;
          pc.seed = s.seed;
          pc.scheme = scheme;
          pc.mmr_pool = s.mmr_pool;
          pc.reverse = s.reverse;
          pc.validate();
          ExpandedConfig ec{config_id(model, pc), pc, model};
          if (!seen.insert(ec.config_id).second) {
            throw Error(Errc::kDuplicateConfig, "config id '" + ec.config_id + "' is generated twice");
          }
          out.push_back(std::move(ec));
        }
      }
    }
  }
  return out;
}

// --- execution -------------------------------------------------------------

namespace {

std::string file_stem_for(const std::string& id) {
  std::string out;
  for (std::size_t i = 0; i < id.size(); ++i) {
    if (id.compare(i, 3, " + ") == 0) {
      out += "__";
      i += 2;
      continue;
    }
    char c = id[i];
    bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out;
}

// Write to a sibling temp file and rename, so readers never see half a report.
void write_file_atomically(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kOutputUnwritable, "cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw Error(Errc::kOutputUnwritable, "write failed for " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::kOutputUnwritable, "cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace

PreparedData prepare_data(const ExperimentGrid& grid, bool need_store) {
  PreparedData d;
  d.scheme = resolve_scheme(grid.scheme);
  ColumnMapping pool_map = grid.pool_mapping ? load_mapping_file(*grid.pool_mapping) : ColumnMapping{};
  ColumnMapping test_map = grid.test_mapping ? load_mapping_file(*grid.test_mapping) : ColumnMapping{};
  d.test = load_test_set(grid.test_set, test_map, d.scheme);
  d.pool = exclude_overlap(load_dataset(grid.pool, pool_map, d.scheme), d.test);
  if (!need_store) return d;

  d.embedder = make_embedder(grid.embedder);
  if (grid.store && fs::exists(*grid.store)) {
    Store cached = Store::load(*grid.store);
    if (cached.embedder() == grid.embedder && cached.scheme() == d.scheme &&
        store_to_dataset(cached).examples == d.pool.examples) {
      d.store.emplace(std::move(cached));
      return d;
    }
  }
  d.store.emplace(build_store(d.pool, *d.embedder));
  if (grid.store) d.store->save(*grid.store);
  return d;
}

BatchResult run_config(const ExpandedConfig& config, const PreparedData& data, const ExperimentGrid& grid,
                       const RunOptions& options, const fs::path& output_path) {
  GoldMap gold;
  for (const auto& item : data.test) {
    if (item.gold) gold.emplace(pair_key(item.pair), *item.gold);
  }
  std::unique_ptr<Backend> backend = options.backend_factory
                                         ? options.backend_factory(config.llm, data.scheme, gold)
                                         : make_backend(config.llm, data.scheme, std::move(gold));

  CompletionCache cache(cache_file_for(grid.cache_dir, config.llm.model, config_tag(config.prompt)));

  AnnotationJob job;
  job.test_set = data.test;
  job.pool = data.pool;
  job.prompt_config = config.prompt;
  job.llm_config = config.llm;
  job.config_id = config.config_id;
  job.concurrency = grid.concurrency;
  job.output_path = output_path;
  job.keep_prompts = grid.keep_prompts;

  AnnotationContext ctx;
  if (config.prompt.uses_store()) {
    if (!data.store) throw Error(Errc::kInvalidConfig, config.config_id + " needs a vector store");
    ctx.store = &*data.store;
    ctx.embedder = data.embedder.get();
  }
  ctx.backend = backend.get();
  ctx.cache = &cache;
  ctx.retry = options.retry;
  return label_batch(job, ctx);
}

fs::path timing_path_for(const fs::path& report) {
  fs::path p = report;
  p.replace_extension(".timing.csv");
  return p;
}

GridResult run_grid(const ExperimentGrid& grid, const RunOptions& options) {
  grid.validate();
  auto configs = expand_grid(grid);
  if (!options.only.empty()) {
    std::vector<ExpandedConfig> kept;
    for (const auto& id : options.only) {
      auto it = std::find_if(configs.begin(), configs.end(), [&](const auto& c) { return c.config_id == id; });
      if (it == configs.end()) throw Error(Errc::kInvalidConfig, "no config '" + id + "' in the grid");
      kept.push_back(*it);
    }
    configs = std::move(kept);
  }

  bool need_store = std::any_of(configs.begin(), configs.end(), [](const auto& c) { return c.prompt.uses_store(); });
  PreparedData data = prepare_data(grid, need_store);

  // Everything below can fail on data; do it before the first backend call.
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    if (!data.test[i].gold) {
      throw Error(Errc::kMissingGold, "test pair " + std::to_string(i + 1) + " has no gold label to score against");
    }
  }
  if (data.test.empty()) throw Error(Errc::kEmptyMatrix, "test set is empty");
  for (const auto& c : configs) {
    if (c.prompt.k > data.pool.size()) {
      throw Error(Errc::kPoolTooSmall, c.config_id + " needs " + std::to_string(c.prompt.k) +
                                           " examples but the pool has " + std::to_string(data.pool.size()));
    }
    if (c.prompt.cot) {
      for (std::size_t i = 0; i < data.pool.size(); ++i) {
        if (!data.pool.examples[i].rationale) {
          throw Error(Errc::kMissingRationale,
                      c.config_id + " uses chain of thought but pool example " + std::to_string(i + 1) +
                          " has no rationale");
        }
      }
    }
  }

  GridResult result;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& c = configs[i];
    fs::path out = grid.output_dir / (file_stem_for(c.config_id) + ".jsonl");
    BatchResult batch = run_config(c, data, grid, options, out);

    ResultRow row;
    row.config_id = c.config_id;
    row.metrics = metrics(confusion(batch.predictions, data.scheme));
    row.wall_clock_s = batch.summary.wall_clock_s;
    row.seconds_per_record = batch.summary.n == 0 ? 0.0 : batch.summary.wall_clock_s / double(batch.summary.n);
    row.backend_calls = batch.summary.backend_calls;
    row.cache_hits = batch.summary.cache_hits;
    row.backend_failures = batch.summary.backend_failures;
    if (batch.summary.has_tokens) {
      row.token_totals = TokenCounts{batch.summary.prompt_tokens, batch.summary.completion_tokens};
      if (auto it = grid.prices.find(c.llm.model); it != grid.prices.end()) {
        row.cost_estimate = (double(row.token_totals->prompt) * it->second.prompt_per_1k +
                             double(row.token_totals->completion) * it->second.completion_per_1k) /
                            1000.0;
      }
    }
    result.backend_failures += row.backend_failures;
    if (options.log != nullptr) {
      *options.log << fmt::format("[{}/{}] {}: acc {} macro {} weighted {} ({} calls, {} cached, {:.2f}s)\n", i + 1,
                                  configs.size(), c.config_id, format_metric(row.metrics.accuracy),
                                  format_metric(row.metrics.macro_f1), format_metric(row.metrics.weighted_f1),
                                  row.backend_calls, row.cache_hits, row.wall_clock_s);
    }
    result.rows.push_back(std::move(row));
  }

  std::ostringstream report, timing;
  write_report_csv(report, result.rows, data.scheme, grid.baselines);
  write_timing_csv(timing, result.rows);
  write_file_atomically(grid.report, report.str());
  write_file_atomically(timing_path_for(grid.report), timing.str());
  return result;
}

// --- reports ---------------------------------------------------------------

void write_report_csv(std::ostream& out, const std::vector<ResultRow>& rows, const LabelScheme& scheme,
                      const std::vector<BaselineRow>& baselines) {
  std::vector<std::string> header{"config_id", "accuracy", "macro_f1", "weighted_f1", "n", "invalid"};
  for (const auto& l : scheme.labels) header.push_back(l + "_f1");
  header.insert(header.end(), {"prompt_tokens", "completion_tokens", "cost_estimate"});
  csv::write_row(out, header);

  for (const auto& r : rows) {
    const auto& m = r.metrics;
    std::vector<std::string> f{r.config_id,           format_metric(m.accuracy), format_metric(m.macro_f1),
                               format_metric(m.weighted_f1), std::to_string(m.n),  std::to_string(m.invalid)};
    for (const auto& [label, cm] : m.per_class) f.push_back(format_metric(cm.f1));
    f.push_back(r.token_totals ? std::to_string(r.token_totals->prompt) : "");
    f.push_back(r.token_totals ? std::to_string(r.token_totals->completion) : "");
    f.push_back(r.cost_estimate ? fmt::format("{:.6f}", *r.cost_estimate) : "");
    csv::write_row(out, f);
  }
  for (const auto& b : baselines) {
    std::vector<std::string> f{b.config_id, format_metric(b.accuracy), format_metric(b.macro_f1),
                               format_metric(b.weighted_f1)};
    f.resize(header.size());
    csv::write_row(out, f);
  }
}

void write_timing_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  csv::write_row(out, {"config_id", "wall_clock_s", "seconds_per_record", "backend_calls", "cache_hits"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.config_id, fmt::format("{:.3f}", r.wall_clock_s), fmt::format("{:.4f}", r.seconds_per_record),
                         std::to_string(r.backend_calls), std::to_string(r.cache_hits)});
  }
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

CsvTable read_csv_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  csv::Reader reader(in);
  CsvTable t;
  if (auto h = reader.next()) t.header = std::move(*h);
  while (auto r = reader.next()) {
    if (r->size() == 1 && r->front().empty()) continue;
    t.rows.push_back(std::move(*r));
  }
  return t;
}

double to_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(Errc::kMalformedRow, "bad number '" + s + "' in " + what);
  }
  return v;
}

}  // namespace

std::vector<ReportEntry> load_report(const fs::path& report) {
  CsvTable t = read_csv_file(report);
  auto need = [&](std::string_view name) {
    auto c = t.column(name);
    if (!c) throw Error(Errc::kMissingColumn, "report " + report.string() + " has no column " + std::string(name));
    return *c;
  };
  const auto id_c = need("config_id"), acc_c = need("accuracy"), mac_c = need("macro_f1"), w_c = need("weighted_f1");
  const auto n_c = t.column("n"), inv_c = t.column("invalid"), cost_c = t.column("cost_estimate");

  auto cell = [](const std::vector<std::string>& row, std::optional<std::size_t> c) -> std::optional<std::string> {
    if (!c || *c >= row.size() || row[*c].empty()) return std::nullopt;
    return row[*c];
  };

  std::vector<ReportEntry> out;
  for (const auto& row : t.rows) {
    ReportEntry e;
    e.config_id = cell(row, id_c).value_or("");
    e.accuracy = to_double(cell(row, acc_c).value_or("0"), "accuracy");
    e.macro_f1 = to_double(cell(row, mac_c).value_or("0"), "macro_f1");
    e.weighted_f1 = to_double(cell(row, w_c).value_or("0"), "weighted_f1");
    if (auto v = cell(row, n_c)) e.n = static_cast<std::uint64_t>(to_double(*v, "n"));
    if (auto v = cell(row, inv_c)) e.invalid = static_cast<std::uint64_t>(to_double(*v, "invalid"));
    if (auto v = cell(row, cost_c)) e.cost_estimate = to_double(*v, "cost_estimate");
    out.push_back(std::move(e));
  }

  fs::path timing = timing_path_for(report);
  if (fs::exists(timing)) {
    CsvTable tt = read_csv_file(timing);
    auto tid = tt.column("config_id"), spr = tt.column("seconds_per_record");
    if (tid && spr) {
      for (const auto& row : tt.rows) {
        auto id = cell(row, tid);
        auto v = cell(row, spr);
        if (!id || !v) continue;
        for (auto& e : out)
          if (e.config_id == *id) e.seconds_per_record = to_double(*v, "seconds_per_record");
      }
    }
  }
  return out;
}

std::vector<ReportEntry> sort_report(std::vector<ReportEntry> rows, SortKey key) {
  auto value = [key](const ReportEntry& e) {
    switch (key) {
      case SortKey::kMacroF1: return e.macro_f1;
      case SortKey::kAccuracy: return e.accuracy;
      default: return e.weighted_f1;
    }
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const ReportEntry& a, const ReportEntry& b) {
    if (key != SortKey::kConfigId && value(a) != value(b)) return value(a) > value(b);
    return a.config_id < b.config_id;
  });
  return rows;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "md" || text == "markdown") return ReportFormat::kMarkdown;
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "table" || text == "text") return ReportFormat::kTable;
  if (text == "tex" || text == "latex") return ReportFormat::kLatex;
  throw Error(Errc::kInvalidConfig, "unknown report format '" + std::string(text) + "'");
}

void render_report(std::ostream& out, const std::vector<ReportEntry>& rows, ReportFormat format) {
  bool has_spr = std::any_of(rows.begin(), rows.end(), [](const auto& e) { return e.seconds_per_record.has_value(); });
  bool has_cost = std::any_of(rows.begin(), rows.end(), [](const auto& e) { return e.cost_estimate.has_value(); });

  if (format == ReportFormat::kLatex) {
    for (const auto& e : rows) {
      out << fmt::format("{} & {} & {} & {} \\\\\n", e.config_id, format_metric(e.accuracy), format_metric(e.macro_f1),
                         format_metric(e.weighted_f1));
    }
    return;
  }

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"config_id", "accuracy", "macro_f1", "weighted_f1", "n", "invalid"};
  if (has_spr) header.emplace_back("seconds_per_record");
  if (has_cost) header.emplace_back("cost_estimate");
  cells.push_back(header);
  for (const auto& e : rows) {
    std::vector<std::string> r{e.config_id,
                               format_metric(e.accuracy),
                               format_metric(e.macro_f1),
                               format_metric(e.weighted_f1),
                               e.n ? std::to_string(*e.n) : "",
                               e.invalid ? std::to_string(*e.invalid) : ""};
    if (has_spr) r.push_back(e.seconds_per_record ? fmt::format("{:.4f}", *e.seconds_per_record) : "");
    if (has_cost) r.push_back(e.cost_estimate ? fmt::format("{:.6f}", *e.cost_estimate) : "");
    cells.push_back(std::move(r));
  }
  switch (format) {
    case ReportFormat::kCsv:
      for (const auto& r : cells) csv::write_row(out, r);
      break;
    case ReportFormat::kMarkdown: write_markdown_table(out, cells); break;
    default: write_aligned_table(out, cells); break;
  }
}

}  // namespace relevancer
