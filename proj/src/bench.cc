#include "scalesearch/bench.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <mutex>
#include <thread>

#include <unistd.h>

#include "scalesearch/cluster.h"
#include "scalesearch/error.h"
#include "scalesearch/local_cluster.h"
#include "scalesearch/query.h"
#include "scalesearch/segment.h"
#include "scalesearch/workload.h"

namespace scalesearch {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double MicrosSince(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

double MillisSince(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int64_t SteadyMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now().time_since_epoch()).count();
}

json Ratio(uint64_t num, uint64_t den) {
  if (den == 0) return nullptr;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::shared_ptr<const IndexSchema> UnitSchema() {
  static const auto schema = std::make_shared<const IndexSchema>(IndexSchema::Parse(R"({
    "index": "units", "primary_key": "id",
    "families": [{"name": "cf", "freshness_sla_ms": 60000, "path": "segment"}],
    "fields": [{"name": "id", "kind": "keyword", "family": "cf"},
               {"name": "body", "kind": "text", "family": "cf"}]})"));
  return schema;
}

// Runs `body` every period until stop is set.
template <typename F>
void Every(std::chrono::microseconds period, const std::atomic<bool>& stop, F body) {
  auto next = Clock::now();
  while (!stop.load()) {
    body();
    next += period;
    const auto now = Clock::now();
    if (next < now) next = now;
    std::this_thread::sleep_until(next);
  }
}

// Unique directory under the system temp dir, removed on scope exit.
struct ScratchDir {
  explicit ScratchDir(const std::string& stem) {
    static std::atomic<uint64_t> counter{0};
    path = std::filesystem::temp_directory_path() /
           (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  std::filesystem::path path;
};

std::chrono::microseconds PeriodFor(double rate) {
  return std::chrono::microseconds(static_cast<int64_t>(1e6 / std::max(rate, 1e-3)));
}

}  // namespace

json BenchReport::ToJson() const { return {{"scenario", scenario}, {"config", config}, {"metrics", metrics}}; }

double Percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kInvalidArgument, "percentile of an empty sample");
  const double rank = std::ceil(p / 100.0 * static_cast<double>(sorted.size()));
  const size_t idx = rank < 1 ? 0 : static_cast<size_t>(rank) - 1;
  return sorted[std::min(idx, sorted.size() - 1)];
}

json Distribution(std::vector<double> samples) {
  json out = {{"count", samples.size()}};
  if (samples.empty()) {
    for (const char* k : {"p50", "p95", "p99", "max", "mean"}) out[k] = nullptr;
    return out;
  }
  std::sort(samples.begin(), samples.end());
  double sum = 0;
  for (double s : samples) sum += s;
  out["p50"] = Percentile(samples, 50);
  out["p95"] = Percentile(samples, 95);
  out["p99"] = Percentile(samples, 99);
  out["max"] = samples.back();
  out["mean"] = sum / static_cast<double>(samples.size());
  return out;
}

// ---------------------------------------------------------------------------

BenchReport BenchMergePolicy(MergePolicy policy, uint64_t n, uint64_t unit) {
  if (unit == 0 || n < unit) throw Error(ErrorCode::kInvalidArgument, "merge bench needs N >= M >= 1");
  const auto schema = UnitSchema();
  MemIndex index(schema, MemIndexOptions{policy, unit, std::nullopt});
  const uint64_t bound = static_cast<uint64_t>(std::bit_width(n) - 1) + 1;
  uint64_t violations = 0;
  std::vector<uint64_t> trace;
  const auto t0 = Clock::now();
  uint64_t next_doc = 0;
  for (uint64_t seg = 1; next_doc < n; ++seg) {
    SegmentBuffer buffer(schema);
    for (uint64_t i = 0; i < unit && next_doc < n; ++i, ++next_doc) {
      Document d;
      d.fields.emplace("id", "u" + std::to_string(next_doc));
      d.fields.emplace("body", "unit doc");
      buffer.Add(d);
    }
    index.Incorporate(SegmentView::Open(buffer.Seal(seg), schema));
    trace.push_back(index.subindex_count());
    if (policy == MergePolicy::kLogarithmic && index.subindex_count() > bound) ++violations;
  }
  const MergeStats& st = index.merge_stats();
  BenchReport r;
  r.scenario = "merge-policy";
  r.config = {{"policy", MergePolicyName(policy)}, {"n", n}, {"unit", unit}};
  r.metrics = {{"merge_volume_docs", st.merge_volume_docs},
               {"merges", st.merges},
               {"final_subindexes", index.subindex_count()},
               {"max_subindexes", st.max_subindexes},
               {"subindex_bound", bound},
               {"bound_violations", violations},
               {"subindex_trace", trace},
               {"elapsed_ms", MillisSince(t0)}};
  return r;
}

// ---------------------------------------------------------------------------

namespace {

// One engine that seals a one-document segment per refresh and, under the
// given policy, rewrites every merged index into the store.
json SimulateMergeWaf(MergePolicy policy, const std::vector<Document>& docs, uint64_t raw_bytes,
                      const std::shared_ptr<const IndexSchema>& schema) {
  auto store = std::make_shared<InstrumentedStore>(std::make_shared<MemoryObjectStore>());
  NodeCounters counters("simulated-" + std::string(MergePolicyName(policy)));
  NodeScope scope(&counters);
  std::vector<std::vector<const Document*>> runs;
  uint64_t next_id = 1;
  auto upload = [&](const std::vector<const Document*>& run) {
    SegmentBuffer buffer(schema);
    for (const Document* d : run) buffer.Add(*d);
    const uint64_t id = next_id++;
    store->Put(SegmentObjectKey(0, id), buffer.Seal(id));
  };
  for (const Document& d : docs) {
    if (policy == MergePolicy::kImmediate && !runs.empty()) {
      // The refresh and the merge are one rewrite of the whole index.
      runs.front().push_back(&d);
      upload(runs.front());
      continue;
    }
    runs.push_back({&d});
    upload(runs.back());
    if (policy == MergePolicy::kNoMerge) continue;
    for (;;) {
      std::vector<uint64_t> sizes;
      for (const auto& run : runs) sizes.push_back(run.size());
      const std::vector<MergeAction> plan = PlanMerges(sizes, 1, policy);
      if (plan.empty()) break;
      const MergeAction& a = plan.front();
      std::vector<const Document*> merged = runs[a.first];
      merged.insert(merged.end(), runs[a.second].begin(), runs[a.second].end());
      runs[a.first] = std::move(merged);
      runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(a.second));
      upload(runs[a.first]);
    }
  }
  return {{"documents", docs.size()},
          {"raw_bytes", raw_bytes},
          {"store_puts", counters.store_puts.load()},
          {"store_put_bytes", counters.store_put_bytes.load()},
          {"final_indexes", runs.size()},
          {"waf", Ratio(counters.store_put_bytes.load(), raw_bytes)}};
}

}  // namespace

BenchReport BenchWaf(const WafOptions& options) {
  const auto schema = ProductSchema();
  ProductGenerator gen(schema, options.seed);
  std::vector<Document> docs;
  uint64_t raw = 0;
  for (size_t i = 0; i < options.docs; ++i) {
    docs.push_back(gen.Next());
    raw += RawBytes(docs.back());
  }

  LocalClusterOptions lo;
  lo.config.refresh_max_docs = options.refresh_max_docs;
  LocalCluster cluster(schema, lo);
  for (const Document& d : docs) cluster.Ingest(d, 0);
  cluster.Quiesce(0);
  uint64_t puts = 0, put_bytes = 0, segments = 0, search_puts = 0;
  for (const NodeCounters* c : cluster.CountersFor(NodeRole::kWrite)) {
    puts += c->store_puts;
    put_bytes += c->store_put_bytes;
    segments += c->segment_writer_invocations;
  }
  for (const NodeCounters* c : cluster.CountersFor(NodeRole::kSearch)) search_puts += c->store_puts;
  const uint64_t log_bytes = cluster.client().log_append_bytes;

  std::vector<Document> sim(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(
                                                             std::min(docs.size(), options.simulation_docs)));
  uint64_t sim_raw = 0;
  for (const Document& d : sim) sim_raw += RawBytes(d);

  BenchReport r;
  r.scenario = "waf";
  r.config = {{"seed", options.seed},
              {"docs", options.docs},
              {"simulation_docs", sim.size()},
              {"refresh_max_docs", options.refresh_max_docs}};
  r.metrics["scalesearch"] = {{"documents", docs.size()},
                              {"raw_bytes", raw},
                              {"store_puts", puts},
                              {"store_put_bytes", put_bytes},
                              {"segment_writer_invocations", segments},
                              {"search_node_store_puts", search_puts},
                              {"log_append_bytes", log_bytes},
                              {"waf", Ratio(put_bytes, raw)},
                              {"log_waf", Ratio(log_bytes, raw)}};
  r.metrics["immediate"] = SimulateMergeWaf(MergePolicy::kImmediate, sim, sim_raw, schema);
  r.metrics["logarithmic"] = SimulateMergeWaf(MergePolicy::kLogarithmic, sim, sim_raw, schema);
  r.metrics["no_merge"] = SimulateMergeWaf(MergePolicy::kNoMerge, sim, sim_raw, schema);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<QueryNode> QueryPool(ProductGenerator& gen, const IndexSchema& schema, size_t n) {
  std::vector<QueryNode> pool;
  std::uniform_int_distribution<int> shape(0, 3);
  for (size_t i = 0; i < n; ++i) {
    std::string text;
    switch (shape(gen.rng())) {
      case 0: text = "title:" + gen.Word(); break;
      case 1: text = "title:" + gen.Word() + " AND description:" + gen.Word(); break;
      case 2: text = "description:" + gen.Word() + " OR text_2:" + gen.Word(); break;
      default: text = "description:" + gen.Word() + " AND price:[0 TO 5000]"; break;
    }
    pool.push_back(ParseQuery(text, schema));
  }
  return pool;
}

struct ModeResult {
  std::vector<double> latencies_us;
  uint64_t docs_ingested = 0;
  json counters = json::object();
  uint64_t write_query_executions = 0;
  uint64_t search_store_puts = 0;
  uint64_t search_segment_writes = 0;
  uint64_t search_file_writes = 0;
  uint64_t incorporate_file_writes = 0;
};

// Paces queries until stop; `run` executes one query and returns its
// latency in microseconds.
template <typename F>
std::vector<double> RunQueries(double qps, const std::atomic<bool>& stop, const std::vector<QueryNode>& pool,
                               F run) {
  std::vector<double> lat;
  size_t i = 0;
  Every(PeriodFor(qps), stop, [&] { lat.push_back(run(pool[i++ % pool.size()])); });
  return lat;
}

ModeResult RunIsolated(const ContentionOptions& o, double ingest_rate, const std::vector<Document>& preload,
                       ProductGenerator& gen, const std::vector<QueryNode>& pool) {
  const auto schema = ProductSchema();
  LocalClusterOptions lo;
  lo.config.refresh_max_docs = o.refresh_max_docs;
  lo.config.refresh_max_age_ms = 200;
  lo.config.poll_interval_ms = 100;
  lo.config.realtime_poll_interval_ms = 20;
  std::optional<ScratchDir> scratch;
  if (o.file_backed) {
    scratch.emplace("sscontention");
    lo.data_dir = scratch->path;
  }
  auto cluster_ptr = std::make_unique<LocalCluster>(schema, lo);
  LocalCluster& cluster = *cluster_ptr;
  for (const Document& d : preload) cluster.Ingest(d, 0);
  cluster.Quiesce(SteadyMs());

  WriteNode& writer = cluster.writer(0);
  SearchNode& searcher = cluster.searcher(0);
  std::atomic<bool> stop{false};
  std::atomic<uint64_t> ingested{0};
  std::thread write_loop([&] { Every(std::chrono::milliseconds(10), stop, [&] { writer.Tick(SteadyMs()); }); });
  std::thread search_loop([&] { Every(std::chrono::milliseconds(10), stop, [&] { searcher.Tick(SteadyMs()); }); });
  std::thread producer;
  if (ingest_rate > 0) {
    std::vector<Document> stream;
    const size_t total = static_cast<size_t>(ingest_rate * static_cast<double>(o.duration_ms) / 1000.0) + 1;
    for (size_t i = 0; i < total; ++i) stream.push_back(gen.Next());
    producer = std::thread([&cluster, &stop, &ingested, stream = std::move(stream), ingest_rate] {
      size_t i = 0;
      Every(PeriodFor(ingest_rate), stop, [&] {
        if (i < stream.size()) cluster.Ingest(stream[i++], WallClockMs()), ++ingested;
      });
    });
  }
  std::vector<double> lat;
  std::thread queries([&] {
    lat = RunQueries(o.qps, stop, pool, [&](const QueryNode& q) {
      NodeScope scope(&searcher.counters());
      const auto t0 = Clock::now();
      Execute(*searcher.snapshot(), q, 10);
      return MicrosSince(t0);
    });
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(o.duration_ms));
  stop = true;
  for (std::thread* t : {&write_loop, &search_loop, &producer, &queries}) {
    if (t->joinable()) t->join();
  }

  ModeResult r;
  r.latencies_us = std::move(lat);
  r.docs_ingested = ingested;
  for (const NodeCounters* c : cluster.CountersFor(NodeRole::kWrite)) {
    r.write_query_executions += c->query_executions;
    r.counters[c->node_id] = c->ToJson();
  }
  for (const NodeCounters* c : cluster.CountersFor(NodeRole::kSearch)) {
    r.search_store_puts += c->store_puts;
    r.search_segment_writes += c->segment_writer_invocations;
    r.search_file_writes += c->file_writes;
    r.incorporate_file_writes += c->incorporate_file_writes;
    r.counters[c->node_id] = c->ToJson();
  }
  r.counters["client"] = cluster.client().ToJson();
  cluster_ptr.reset();
  return r;
}

ModeResult RunColocated(const ContentionOptions& o, const std::vector<Document>& preload, ProductGenerator& gen,
                        const std::vector<QueryNode>& pool) {
  const auto schema = ProductSchema();
  NodeCounters counters("colocated");
  MemIndex index(schema);
  std::mutex loop_mu;  // the single process loop
  std::mutex queue_mu;
  std::deque<Document> queue;
  std::unique_ptr<SegmentBuffer> buffer;
  int64_t first_buffered = 0;
  uint64_t next_id = 1;

  auto seal = [&] {
    const uint64_t id = next_id++;
    index.Incorporate(SegmentView::Open(buffer->Seal(id), schema));
    buffer.reset();
  };
  {
    NodeScope scope(&counters);
    for (const Document& d : preload) {
      if (!buffer) buffer = std::make_unique<SegmentBuffer>(schema);
      buffer->Add(d);
      if (buffer->doc_count() >= o.refresh_max_docs) seal();
    }
    if (buffer) seal();
  }

  std::atomic<bool> stop{false};
  std::atomic<uint64_t> ingested{0};
  std::thread loop([&] {
    NodeScope scope(&counters);
    Every(std::chrono::milliseconds(10), stop, [&] {
      std::deque<Document> batch;
      {
        std::lock_guard lock(queue_mu);
        batch.swap(queue);
      }
      std::lock_guard lock(loop_mu);
      for (Document& d : batch) {
        if (!buffer) {
          buffer = std::make_unique<SegmentBuffer>(schema);
          first_buffered = SteadyMs();
        }
        buffer->Add(d);
        if (buffer->doc_count() >= o.refresh_max_docs) seal();
      }
      if (buffer && SteadyMs() - first_buffered >= 200) seal();
    });
  });
  std::thread producer;
  if (o.ingest_rate > 0) {
    std::vector<Document> stream;
    const size_t total = static_cast<size_t>(o.ingest_rate * static_cast<double>(o.duration_ms) / 1000.0) + 1;
    for (size_t i = 0; i < total; ++i) stream.push_back(gen.Next());
    producer = std::thread([&, stream = std::move(stream)] {
      size_t i = 0;
      Every(PeriodFor(o.ingest_rate), stop, [&] {
        if (i >= stream.size()) return;
        std::lock_guard lock(queue_mu);
        queue.push_back(stream[i++]);
        ++ingested;
      });
    });
  }
  std::vector<double> lat;
  std::thread queries([&] {
    NodeScope scope(&counters);
    lat = RunQueries(o.qps, stop, pool, [&](const QueryNode& q) {
      const auto t0 = Clock::now();
      std::lock_guard lock(loop_mu);
      Execute(*index.snapshot(), q, 10);
      return MicrosSince(t0);
    });
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(o.duration_ms));
  stop = true;
  for (std::thread* t : {&loop, &producer, &queries}) {
    if (t->joinable()) t->join();
  }
  ModeResult r;
  r.latencies_us = std::move(lat);
  r.docs_ingested = ingested;
  r.counters["colocated"] = counters.ToJson();
  return r;
}

json ModeJson(const ModeResult& m) {
  return {{"latency_us", Distribution(m.latencies_us)},
          {"docs_ingested", m.docs_ingested},
          {"counters", m.counters}};
}

json P99Ratio(const ModeResult& num, const ModeResult& den) {
  if (num.latencies_us.empty() || den.latencies_us.empty()) return nullptr;
  auto a = num.latencies_us, b = den.latencies_us;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return Percentile(a, 99) / std::max(Percentile(b, 99), 1e-3);
}

}  // namespace

BenchReport BenchContention(const ContentionOptions& o) {
  const auto schema = ProductSchema();
  ProductGenerator gen(schema, o.seed);
  std::vector<Document> preload;
  for (size_t i = 0; i < o.preload_docs; ++i) preload.push_back(gen.Next());
  const std::vector<QueryNode> pool = QueryPool(gen, *schema, 256);

  ProductGenerator stream_a(schema, o.seed + 1000), stream_b(schema, o.seed + 1000), stream_0(schema, o.seed + 1000);
  // Streams continue the preload key sequence so new keys never collide.
  for (size_t i = 0; i < o.preload_docs; ++i) stream_a.Next(), stream_b.Next(), stream_0.Next();

  const ModeResult isolated = RunIsolated(o, o.ingest_rate, preload, stream_a, pool);
  const ModeResult colocated = RunColocated(o, preload, stream_b, pool);
  std::optional<ModeResult> baseline;
  if (o.baseline) baseline = RunIsolated(o, 0, preload, stream_0, pool);

  BenchReport r;
  r.scenario = "contention";
  r.config = {{"seed", o.seed},
              {"qps", o.qps},
              {"ingest_rate", o.ingest_rate},
              {"duration_ms", o.duration_ms},
              {"preload_docs", o.preload_docs},
              {"refresh_max_docs", o.refresh_max_docs},
              {"file_backed", o.file_backed}};
  r.metrics["isolated"] = ModeJson(isolated);
  r.metrics["colocated"] = ModeJson(colocated);
  r.metrics["p99_ratio_colocated_over_isolated"] = P99Ratio(colocated, isolated);
  if (baseline) {
    r.metrics["isolated_baseline"] = ModeJson(*baseline);
    r.metrics["p99_ratio_isolated_over_baseline"] = P99Ratio(isolated, *baseline);
  }
  r.metrics["isolation"] = {{"search_node_store_puts", isolated.search_store_puts},
                            {"search_node_segment_writer_invocations", isolated.search_segment_writes},
                            {"search_node_file_writes", isolated.search_file_writes},
                            {"incorporate_file_writes", isolated.incorporate_file_writes},
                            {"write_node_query_executions", isolated.write_query_executions}};
  return r;
}

// ---------------------------------------------------------------------------

BenchReport BenchFreshness(const FreshnessOptions& o) {
  const auto schema = ProductSchema();
  ProductGenerator gen(schema, o.seed);
  const int64_t max_age = std::max<int64_t>(1, std::llround(static_cast<double>(o.max_age_ms) * o.time_scale));
  const int64_t poll = std::max<int64_t>(1, std::llround(static_cast<double>(o.poll_interval_ms) * o.time_scale));

  LocalClusterOptions lo;
  lo.config.refresh_max_age_ms = max_age;
  lo.config.poll_interval_ms = poll;
  lo.config.realtime_poll_interval_ms = o.realtime_poll_interval_ms;
  LocalCluster cluster(schema, lo);
  const size_t needed = 2 * o.updates_per_path;
  std::vector<std::string> keys;
  for (size_t i = 0; i < std::max(o.preload_docs, needed); ++i) {
    Document d = gen.Next();
    keys.push_back(PrimaryKeyOf(*schema, d));
    cluster.Ingest(d, 0);
  }
  cluster.Quiesce(SteadyMs());

  WriteNode& writer = cluster.writer(0);
  SearchNode& searcher = cluster.searcher(0);

  struct Probe {
    QueryNode query;
    std::string key;
    bool in_place;
    Clock::time_point published;
  };
  std::mutex probe_mu;
  std::vector<Probe> outstanding;
  std::vector<double> in_place_ms, segment_ms;
  size_t timeouts = 0;

  std::atomic<bool> stop{false};
  std::thread write_loop([&] { Every(std::chrono::milliseconds(10), stop, [&] { writer.Tick(SteadyMs()); }); });
  std::thread search_loop([&] {
    Every(std::chrono::milliseconds(o.realtime_poll_interval_ms), stop, [&] { searcher.Tick(SteadyMs()); });
  });

  const int64_t timeout_ms = 4 * (max_age + poll) + 5000;
  std::thread prober([&] {
    NodeScope scope(&searcher.counters());
    Every(std::chrono::milliseconds(2), stop, [&] {
      std::lock_guard lock(probe_mu);
      if (outstanding.empty()) return;
      const auto snap = searcher.snapshot();
      std::erase_if(outstanding, [&](const Probe& p) {
        const double age = MillisSince(p.published);
        bool visible = false;
        for (const Hit& h : Execute(*snap, p.query, 10)) visible = visible || h.key == p.key;
        if (visible) (p.in_place ? in_place_ms : segment_ms).push_back(age);
        if (!visible && age > static_cast<double>(timeout_ms)) ++timeouts;
        return visible || age > static_cast<double>(timeout_ms);
      });
    });
  });

  const auto t_start = Clock::now();
  for (size_t i = 0; i < needed; ++i) {
    const bool in_place = i % 2 == 0;
    const size_t n = i / 2;
    Probe p;
    p.in_place = in_place;
    if (in_place) {
      // Unique price so the probe matches only this update.
      p.key = keys[n];
      const double price = 1e7 + static_cast<double>(n);
      p.query = QueryNode::Range("price", price, price);
      std::lock_guard lock(probe_mu);
      p.published = Clock::now();
      cluster.Update(p.key, "price", price, WallClockMs());
      outstanding.push_back(std::move(p));
    } else {
      p.key = keys[o.updates_per_path + n];
      Document d = gen.Make(p.key);
      const std::string token = "fresh" + std::to_string(o.seed) + "x" + std::to_string(n);
      d.fields["title"] = std::get<std::string>(d.fields["title"]) + " " + token;
      p.query = QueryNode::Term("title", token);
      std::lock_guard lock(probe_mu);
      p.published = Clock::now();
      cluster.Ingest(d, WallClockMs());
      outstanding.push_back(std::move(p));
    }
    std::this_thread::sleep_until(t_start + PeriodFor(o.update_rate) * static_cast<int64_t>(i + 1));
  }
  for (;;) {
    {
      std::lock_guard lock(probe_mu);
      if (outstanding.empty()) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  stop = true;
  for (std::thread* t : {&write_loop, &search_loop, &prober}) t->join();

  const int64_t realtime_sla = schema->Family("cf_realtime").freshness_sla_ms;
  const int64_t segment_sla = schema->Family("cf_text").freshness_sla_ms;
  BenchReport r;
  r.scenario = "freshness";
  r.config = {{"seed", o.seed},
              {"updates_per_path", o.updates_per_path},
              {"update_rate", o.update_rate},
              {"time_scale", o.time_scale},
              {"max_age_ms", max_age},
              {"poll_interval_ms", poll},
              {"realtime_poll_interval_ms", o.realtime_poll_interval_ms}};
  json in_place = Distribution(in_place_ms);
  in_place["sla_ms"] = realtime_sla;
  in_place["bound_ms"] = 1000;
  json segment = Distribution(segment_ms);
  segment["sla_ms"] = segment_sla;
  segment["scaled_sla_ms"] = static_cast<double>(segment_sla) * o.time_scale;
  // Refresh age plus one segment poll plus slack for upload and probing.
  segment["bound_ms"] = max_age + poll + 1000;
  r.metrics = {{"in_place", in_place}, {"segment", segment}, {"timeouts", timeouts}};
  return r;
}

}  // namespace scalesearch
