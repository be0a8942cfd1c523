#pragma once

// Benchmarks run against the in-process topology. Every metric comes from
// instrumented counters or recorded timestamps.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalesearch/memindex.h"

namespace scalesearch {

struct BenchReport {
  std::string scenario;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metrics = nlohmann::json::object();

  nlohmann::json ToJson() const;
};

// Nearest-rank percentiles; an empty sample gives count 0 and null values.
nlohmann::json Distribution(std::vector<double> samples);
double Percentile(const std::vector<double>& sorted, double p);

// N unit documents arrive as N/M segments of M documents each.
// metrics: merge_volume_docs, merges, final_subindexes, max_subindexes,
// bound_violations (steps where the count exceeded floor(log2 N)+1),
// subindex_trace.
BenchReport BenchMergePolicy(MergePolicy policy, uint64_t n, uint64_t unit);

struct WafOptions {
  uint64_t seed = 1;
  size_t docs = 6000;
  size_t simulation_docs = 256;  // documents fed to the merge simulations
  uint32_t refresh_max_docs = 4096;
};

// metrics.scalesearch: store-put and log-append bytes over raw bytes for the
// full topology; metrics.immediate / metrics.logarithmic: a single-node
// engine that rewrites its merged index into the store after every
// one-document refresh. A ratio is null when the workload is empty.
BenchReport BenchWaf(const WafOptions& options);

struct ContentionOptions {
  uint64_t seed = 1;
  double qps = 200;
  double ingest_rate = 500;  // documents per second
  int64_t duration_ms = 3000;
  size_t preload_docs = 2000;
  uint32_t refresh_max_docs = 256;
  bool baseline = true;  // also run mode (a) with ingestion off
  // Mode (a) keeps its store and log on disk in a scratch directory, so
  // the file-write counters see real writes.
  bool file_backed = true;
};

// Mode (a) isolated: write and search nodes on their own threads, queries
// read published snapshots. Mode (b) co-located: one loop owns ingestion,
// segment builds and queries, serialized by a loop lock whose wait is part
// of the measured latency.
BenchReport BenchContention(const ContentionOptions& options);

struct FreshnessOptions {
  uint64_t seed = 1;
  size_t updates_per_path = 100;
  double update_rate = 100;  // per second, both paths together
  // Multiplies refresh max_age and the segment poll interval.
  double time_scale = 1.0;
  int64_t max_age_ms = 5000;
  int64_t poll_interval_ms = 15000;
  int64_t realtime_poll_interval_ms = 20;
  size_t preload_docs = 400;
};

// metrics.in_place / metrics.segment: freshness distributions in ms plus the
// family SLA and the bound derived from the configured intervals.
BenchReport BenchFreshness(const FreshnessOptions& options);

}  // namespace scalesearch
