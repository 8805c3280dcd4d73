#ifndef GFM_HARNESS_HPP
#define GFM_HARNESS_HPP

#include <map>

#include "gfm/task.hpp"

namespace gfm {

// One benchmark method by name: sp kinds take "gfm", "dijkstra", "astar";
// tour kinds take "gfm", "gfm0" (model-free blend), "nn", "nn2opt",
// "held_karp", "greedy".
struct MethodSpec {
    std::string name;
    std::map<std::string, std::string> options;
};

struct ExperimentConfig {
    std::string graph_file;          // used when generator is empty
    std::string generator;           // "" | "sim" | "proxy"
    int graph_nodes = 20;
    std::uint64_t graph_seed = 42;
    TaskKind kind = TaskKind::SP;
    int instance_count = 20;
    std::uint64_t rng_seed = 0;
    int r_min = 5;
    int r_max = 10;
    std::vector<MethodSpec> methods;
    std::string checkpoint; // GFM1 file for model methods
    std::string output_dir; // "" keeps results in memory only

    void validate() const;
};

// key = value lines, '#' comments. Keys: graph, generator, nodes,
// graph_seed, kind, instances, seed, r_min, r_max, methods (comma list),
// checkpoint, output_dir.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

Graph load_experiment_graph(const ExperimentConfig& cfg);

// Seeded instance corpus. SP: distinct (s, t). Tours: distinct depot(s)
// plus |R| drawn from [r_min, r_max], all distinct and excluding the
// endpoints. Throws when the graph cannot host r_min required nodes.
std::vector<TaskSpec> gen_instances(const Graph& g, TaskKind kind, int count,
                                    std::uint64_t rng_seed, int r_min = 5, int r_max = 10);

struct ResultRow {
    std::string method;
    double mean_objective_km = 0.0; // over feasible outputs only
    double success_rate = 0.0;
    double mean_runtime_s = 0.0;
    int instances = 0;
};

struct RunOutput {
    std::vector<ResultRow> rows;
    std::string per_instance_csv;
    std::string markdown;
    std::string csv;
    std::string manifest;
};

// Solves every instance with every method; timing wraps the solve call
// only. When cfg.output_dir is set, writes results.md, results.csv,
// instances.csv, and manifest.txt there.
RunOutput run(const ExperimentConfig& cfg);

std::string results_markdown(const std::vector<ResultRow>& rows);
std::string results_csv(const std::vector<ResultRow>& rows);

// Plain-text polylines: per solution a "ROUTE <n>" header then n lines
// "x y". Requires coordinates.
std::string export_routes(const Graph& g, const std::vector<Solution>& solutions);
std::vector<std::vector<std::pair<double, double>>> parse_routes(const std::string& text);

} // namespace gfm

#endif // GFM_HARNESS_HPP
