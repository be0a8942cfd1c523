// sscli: drive a file-backed single-process cluster and run the benches.
//
// The data directory holds schema.json, config.json, meta.json, the object
// store and the message log. Every command reopens the cluster; search
// nodes are stateless and rebuild from the store and the realtime topics.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "scalesearch/bench.h"
#include "scalesearch/error.h"
#include "scalesearch/local_cluster.h"
#include "scalesearch/log.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scalesearch;

namespace {

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIOError, "cannot write " + p.string());
  out << text;
}

struct Opened {
  std::shared_ptr<const IndexSchema> schema;
  std::unique_ptr<LocalCluster> cluster;
};

Opened Open(const fs::path& dir) {
  if (!fs::exists(dir / "schema.json")) {
    throw Error(ErrorCode::kNotFound, "no index in " + dir.string() + "; run create-index first");
  }
  Opened o;
  o.schema = std::make_shared<const IndexSchema>(IndexSchema::Parse(ReadFile(dir / "schema.json")));
  LocalClusterOptions lo;
  lo.config = ClusterConfig::FromJson(json::parse(ReadFile(dir / "config.json")));
  lo.data_dir = dir;
  o.cluster = std::make_unique<LocalCluster>(o.schema, lo);
  return o;
}

void Emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    WriteFile(out, j.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ScaleSearch command line"};
  app.require_subcommand(1);
  std::string data_dir = "ssdata";
  app.add_option("--data", data_dir, "Data directory")->capture_default_str();

  auto* create = app.add_subcommand("create-index", "Create an index from a schema file");
  std::string schema_file, config_file;
  std::vector<std::string> boundaries;
  create->add_option("--schema", schema_file, "Schema JSON")->required()->check(CLI::ExistingFile);
  create->add_option("--config", config_file, "Cluster config JSON")->check(CLI::ExistingFile);
  create->add_option("--boundaries", boundaries, "Initial shard boundary keys");

  auto* ingest = app.add_subcommand("ingest", "Ingest JSON-lines documents");
  std::string docs_file;
  ingest->add_option("--file", docs_file, "Documents, one JSON object per line")->required();

  auto* update = app.add_subcommand("update", "Publish a single-field update");
  std::string field, key, value_text;
  update->add_option("--field", field)->required();
  update->add_option("--key", key)->required();
  update->add_option("--value", value_text, "JSON scalar (bare words are strings)")->required();

  auto* query = app.add_subcommand("query", "Run a query");
  std::string query_text;
  size_t limit = 10;
  query->add_option("query", query_text)->required();
  query->add_option("--limit", limit)->capture_default_str();

  auto* stats = app.add_subcommand("stats", "Shards, footprints and node counters");

  auto* bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  uint64_t seed = 1;
  std::string out;
  bench->add_option("--seed", seed)->capture_default_str();
  bench->add_option("--out", out, "Report path (stdout when omitted)");
  bench->fallthrough();

  auto* merge = bench->add_subcommand("merge-policy", "Merge volume per policy");
  std::string policy = "logarithmic";
  uint64_t n = 1024, unit = 1;
  merge->add_option("--policy", policy)->check(CLI::IsMember({"immediate", "none", "logarithmic"}))->capture_default_str();
  merge->add_option("--n", n)->capture_default_str();
  merge->add_option("--unit", unit)->capture_default_str();

  auto* waf = bench->add_subcommand("waf", "Write amplification");
  WafOptions waf_opts;
  waf->add_option("--docs", waf_opts.docs)->capture_default_str();
  waf->add_option("--simulation-docs", waf_opts.simulation_docs)->capture_default_str();
  waf->add_option("--refresh-docs", waf_opts.refresh_max_docs)->capture_default_str();

  auto* contention = bench->add_subcommand("contention", "Query latency under ingestion");
  ContentionOptions con;
  contention->add_option("--qps", con.qps)->capture_default_str();
  contention->add_option("--ingest-rate", con.ingest_rate)->capture_default_str();
  contention->add_option("--duration-ms", con.duration_ms)->capture_default_str();
  contention->add_option("--preload", con.preload_docs)->capture_default_str();

  auto* fresh = bench->add_subcommand("freshness", "Update-to-visibility latency per path");
  FreshnessOptions fo;
  fresh->add_option("--updates", fo.updates_per_path, "Updates per path")->capture_default_str();
  fresh->add_option("--rate", fo.update_rate, "Updates per second")->capture_default_str();
  fresh->add_option("--time-scale", fo.time_scale, "Multiplier on max_age and poll interval")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path dir = data_dir;
    if (*create) {
      const IndexSchema schema = IndexSchema::Parse(ReadFile(schema_file));
      ClusterConfig config;
      if (!config_file.empty()) config = ClusterConfig::FromJson(json::parse(ReadFile(config_file)));
      if (fs::exists(dir / "schema.json")) throw Error(ErrorCode::kAlreadyExists, "index exists in " + dir.string());
      fs::create_directories(dir);
      WriteFile(dir / "schema.json", schema.ToJson().dump(2) + "\n");
      WriteFile(dir / "config.json", config.ToJson().dump(2) + "\n");
      LocalClusterOptions lo;
      lo.config = config;
      lo.boundaries = boundaries;
      lo.data_dir = dir;
      LocalCluster cluster(std::make_shared<const IndexSchema>(schema), lo);
      std::cout << "created index \"" << schema.index_name() << "\" with " << cluster.ActiveShards().size()
                << " shard(s) in " << dir.string() << "\n";
    } else if (*ingest) {
      Opened o = Open(dir);
      std::ifstream in(docs_file);
      if (!in) throw Error(ErrorCode::kNotFound, "cannot read " + docs_file);
      std::string line;
      size_t count = 0, lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
          j = json::parse(line);
        } catch (const json::parse_error& e) {
          throw Error(ErrorCode::kSyntax, docs_file + ":" + std::to_string(lineno) + ": " + e.what());
        }
        o.cluster->Ingest(DocumentFromJson(*o.schema, j), WallClockMs());
        ++count;
      }
      // Seal and upload now so the documents survive without this process.
      o.cluster->TickWriters(WallClockMs(), true);
      std::cout << "ingested " << count << " document(s)\n";
    } else if (*update) {
      Opened o = Open(dir);
      json v;
      try {
        v = json::parse(value_text);
      } catch (const json::parse_error&) {
        v = value_text;
      }
      const Value value = ValueFromJson(o.schema->Field(field), v);
      const uint64_t offset = o.cluster->Update(key, field, value, WallClockMs());
      if (o.schema->RouteOf(field).path == UpdatePath::kSegment) o.cluster->TickWriters(WallClockMs(), true);
      std::cout << "published " << field << " for " << key << " at offset " << offset << "\n";
    } else if (*query) {
      Opened o = Open(dir);
      o.cluster->Quiesce(WallClockMs());
      for (const Hit& h : o.cluster->Query(query_text, limit)) {
        std::cout << json{{"key", h.key}, {"score", h.score}, {"shard", h.shard}}.dump() << "\n";
      }
    } else if (*stats) {
      Opened o = Open(dir);
      o.cluster->Quiesce(WallClockMs());
      json j = {{"index", o.schema->index_name()}, {"shards", json::array()}};
      for (uint32_t s : o.cluster->ActiveShards()) {
        const ShardDescriptor d = *o.cluster->meta().Shard(s);
        const MemIndex& idx = o.cluster->searcher(s).index();
        const MergeStats& ms = idx.merge_stats();
        j["shards"].push_back({{"shard", s},
                               {"lo", d.range.lo},
                               {"hi", d.range.hi ? json(*d.range.hi) : json(nullptr)},
                               {"live_docs", o.cluster->searcher(s).snapshot()->live_docs()},
                               {"subindexes", idx.subindex_count()},
                               {"footprint_bytes", idx.Footprint().total()},
                               {"merges", ms.merges},
                               {"merge_volume_docs", ms.merge_volume_docs},
                               {"segments", ms.incorporated_segments}});
      }
      std::cout << j.dump(2) << "\n";
    } else if (*bench) {
      BenchReport r;
      if (*merge) {
        r = BenchMergePolicy(*ParseMergePolicy(policy), n, unit);
      } else if (*waf) {
        waf_opts.seed = seed;
        r = BenchWaf(waf_opts);
      } else if (*contention) {
        con.seed = seed;
        r = BenchContention(con);
      } else {
        fo.seed = seed;
        r = BenchFreshness(fo);
      }
      Emit(r.ToJson(), out);
    }
  } catch (const Error& e) {
    std::cerr << "sscli: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sscli: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
