#include "gfm/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "gfm/decoder.hpp"

namespace gfm {

void ExperimentConfig::validate() const {
    if (generator.empty() && graph_file.empty())
        throw std::invalid_argument("experiment: need a graph file or a generator");
    if (!generator.empty() && generator != "sim" && generator != "proxy")
        throw std::invalid_argument("experiment: unknown generator " + generator);
    if (instance_count < 1) throw std::invalid_argument("experiment: instance_count >= 1");
    if (methods.empty()) throw std::invalid_argument("experiment: need at least one method");
    if (r_min < 1 || r_max < r_min) throw std::invalid_argument("experiment: bad r range");
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "graph") cfg.graph_file = value;
            else if (key == "generator") cfg.generator = value;
            else if (key == "nodes") cfg.graph_nodes = std::stoi(value);
            else if (key == "graph_seed") cfg.graph_seed = std::stoull(value);
            else if (key == "kind") cfg.kind = task_kind_from_string(value);
            else if (key == "instances") cfg.instance_count = std::stoi(value);
            else if (key == "seed") cfg.rng_seed = std::stoull(value);
            else if (key == "r_min") cfg.r_min = std::stoi(value);
            else if (key == "r_max") cfg.r_max = std::stoi(value);
            else if (key == "checkpoint") cfg.checkpoint = value;
            else if (key == "output_dir") cfg.output_dir = value;
            else if (key == "methods") {
                for (const std::string& m : split(value, ','))
                    cfg.methods.push_back({m, {}});
            } else {
                throw ParseError("config line " + std::to_string(lineno) + ": unknown key " + key);
            }
        } catch (const ParseError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ParseError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_experiment_config(text);
}

Graph load_experiment_graph(const ExperimentConfig& cfg) {
    if (cfg.generator == "sim") return generate_simulation_graph(cfg.graph_seed, cfg.graph_nodes);
    if (cfg.generator == "proxy") return generate_proxy_graph(cfg.graph_seed, cfg.graph_nodes);
    return load_edge_list_file(cfg.graph_file);
}

std::vector<TaskSpec> gen_instances(const Graph& g, TaskKind kind, int count,
                                    std::uint64_t rng_seed, int r_min, int r_max) {
    if (count < 1) throw std::invalid_argument("gen_instances: count >= 1");
    const int n = g.node_count();
    const int reserved = kind == TaskKind::TPDOD ? 2 : 1;
    if (kind != TaskKind::SP && r_min + reserved > n)
        throw std::invalid_argument("gen_instances: required set cannot fit the graph");

    std::vector<TaskSpec> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(rng_seed, 0x175, static_cast<std::uint64_t>(i)));
        TaskSpec spec;
        spec.kind = kind;
        spec.source = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        if (kind == TaskKind::SP || kind == TaskKind::TPDOD) {
            do {
                spec.target = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
            } while (spec.target == spec.source);
        }
        if (kind != TaskKind::SP) {
            const int cap = std::min(r_max, n - reserved);
            const int take = r_min + static_cast<int>(rng.uniform_int(
                                         static_cast<std::uint64_t>(cap - r_min + 1)));
            while (static_cast<int>(spec.required.size()) < take) {
                const int r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
                if (r == spec.source || (kind == TaskKind::TPDOD && r == spec.target)) continue;
                if (std::find(spec.required.begin(), spec.required.end(), r) ==
                    spec.required.end())
                    spec.required.push_back(r);
            }
        }
        spec.validate(g);
        out.push_back(std::move(spec));
    }
    return out;
}

namespace {

// NN / NN+2opt / Held-Karp over the closure, expanded through witnesses.
Solution baseline_tour(const Graph& g, const TaskSpec& spec, const std::string& method) {
    std::vector<int> subset = spec.required;
    subset.push_back(spec.source);
    if (spec.kind == TaskKind::TPDOD) subset.push_back(spec.target);
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    ClosureMatrix closure = metric_closure(g, subset);
    auto index_of = [&](int node) {
        return static_cast<int>(std::lower_bound(subset.begin(), subset.end(), node) -
                                subset.begin());
    };
    const int start = index_of(spec.source);
    const bool open = spec.kind == TaskKind::TPDOD;

    TourOrder order;
    if (open) {
        const int finish = index_of(spec.target);
        if (method == "held_karp") {
            order = held_karp(closure, false, std::pair<int, int>{start, finish});
        } else {
            // nearest-unvisited chain from origin, destination pinned last
            order.closed = false;
            order.indices.push_back(start);
            std::vector<char> used(subset.size(), 0);
            used[start] = used[finish] = 1;
            int cur = start;
            for (std::size_t step = 2; step < subset.size(); ++step) {
                int best = -1;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < subset.size(); ++j)
                    if (!used[j] && closure.dist(cur, static_cast<int>(j)) < best_d) {
                        best_d = closure.dist(cur, static_cast<int>(j));
                        best = static_cast<int>(j);
                    }
                used[best] = 1;
                order.indices.push_back(best);
                cur = best;
            }
            order.indices.push_back(finish);
            if (method == "nn2opt") order = two_opt(closure, order);
        }
    } else {
        if (method == "held_karp") {
            order = held_karp(closure, true);
        } else {
            order = nearest_neighbor(closure, start);
            if (method == "nn2opt") order = two_opt(closure, order);
        }
        auto it = std::find(order.indices.begin(), order.indices.end(), start);
        std::rotate(order.indices.begin(), it, order.indices.end());
    }

    Solution sol;
    sol.method_tag = method;
    sol.walk = expand_order(closure, order.indices, !open);
    sol.objective_km = objective(g, sol.walk);
    sol.feasible = true;
    return sol;
}

Solution solve_one(const Graph& g, const TaskSpec& spec, const std::string& method,
                   const Parameters<float>* params) {
    if (method == "dijkstra") {
        auto d = dijkstra(g, spec.source);
        Solution sol;
        sol.method_tag = method;
        sol.walk = reconstruct_path(d, spec.source, spec.target);
        sol.objective_km = d.dist[spec.target];
        sol.feasible = true;
        return sol;
    }
    if (method == "astar") {
        PathResult p = astar(g, spec.source, spec.target);
        Solution sol;
        sol.method_tag = method;
        sol.walk = p.nodes;
        sol.objective_km = p.length_km;
        sol.feasible = true;
        return sol;
    }
    if (method == "greedy") return greedy_walk_tour(g, spec);
    if (method == "nn" || method == "nn2opt" || method == "held_karp")
        return baseline_tour(g, spec, method);
    if (method == "gfm" || method == "gfm0") {
        if (!params) throw std::invalid_argument("method " + method + " needs a checkpoint");
        DecodeConfig dcfg;
        if (method == "gfm0") dcfg.blend_lambda = 0.0;
        Solution sol = decode(*params, g, spec, dcfg);
        sol.method_tag = method;
        return sol;
    }
    throw std::invalid_argument("unknown method: " + method);
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open for hashing: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(bytes.data(), bytes.size());
}

} // namespace

RunOutput run(const ExperimentConfig& cfg) {
    cfg.validate();
    Graph g = load_experiment_graph(cfg);
    std::vector<TaskSpec> instances =
        gen_instances(g, cfg.kind, cfg.instance_count, cfg.rng_seed, cfg.r_min, cfg.r_max);

    std::optional<Parameters<float>> params;
    for (const MethodSpec& m : cfg.methods)
        if ((m.name == "gfm" || m.name == "gfm0") && !params) {
            if (cfg.checkpoint.empty())
                throw std::invalid_argument("experiment: model methods need checkpoint=");
            params = load_checkpoint<float>(cfg.checkpoint); // excluded from timing
        }

    RunOutput out;
    std::ostringstream csv;
    csv << "method,instance,kind,source,target,required,objective_km,feasible,runtime_s,walk\n";
    for (const MethodSpec& m : cfg.methods) {
        ResultRow row;
        row.method = m.name;
        row.instances = static_cast<int>(instances.size());
        double obj_sum = 0.0, time_sum = 0.0;
        int feasible = 0;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            Solution sol = solve_one(g, instances[i], m.name, params ? &*params : nullptr);
            const auto t1 = std::chrono::steady_clock::now();
            sol.runtime_s = std::chrono::duration<double>(t1 - t0).count();
            time_sum += sol.runtime_s;
            if (sol.feasible) {
                ++feasible;
                obj_sum += sol.objective_km;
            }
            csv << m.name << ',' << i << ',' << solution_csv_row(instances[i], sol) << '\n';
        }
        row.success_rate = static_cast<double>(feasible) / static_cast<double>(instances.size());
        row.mean_objective_km = feasible > 0 ? obj_sum / feasible : 0.0;
        row.mean_runtime_s = time_sum / static_cast<double>(instances.size());
        out.rows.push_back(row);
    }
    out.per_instance_csv = csv.str();
    out.markdown = results_markdown(out.rows);
    out.csv = results_csv(out.rows);

    std::ostringstream manifest;
    manifest << "graph_hash = " << g.content_hash() << '\n';
    if (!cfg.generator.empty())
        manifest << "generator = " << cfg.generator << '\n'
                 << "nodes = " << cfg.graph_nodes << '\n'
                 << "graph_seed = " << cfg.graph_seed << '\n';
    else
        manifest << "graph = " << cfg.graph_file << '\n';
    manifest << "kind = " << to_string(cfg.kind) << '\n'
             << "instances = " << cfg.instance_count << '\n'
             << "seed = " << cfg.rng_seed << '\n'
             << "r_min = " << cfg.r_min << '\n'
             << "r_max = " << cfg.r_max << '\n';
    std::ostringstream ms;
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
        ms << (i ? "," : "") << cfg.methods[i].name;
    manifest << "methods = " << ms.str() << '\n';
    if (params) manifest << "checkpoint_hash = " << file_hash(cfg.checkpoint) << '\n';
    out.manifest = manifest.str();

    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        auto write = [&](const std::string& name, const std::string& content) {
            std::ofstream f(cfg.output_dir + "/" + name);
            if (!f) throw ParseError("cannot write " + cfg.output_dir + "/" + name);
            f << content;
        };
        write("results.md", out.markdown);
        write("results.csv", out.csv);
        write("instances.csv", out.per_instance_csv);
        write("manifest.txt", out.manifest);
    }
    return out;
}

std::string results_markdown(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "| Method | Obj (km) | Succ (%) | Time (s) |\n";
    os << "|---|---|---|---|\n";
    for (const ResultRow& r : rows) {
        os << "| " << r.method << " | ";
        if (r.success_rate > 0.0)
            os << std::fixed << std::setprecision(3) << r.mean_objective_km;
        else
            os << "--";
        os << " | " << std::fixed << std::setprecision(1) << 100.0 * r.success_rate << " | "
           << std::setprecision(4) << r.mean_runtime_s << " |\n";
    }
    return os.str();
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "method,mean_objective_km,success_rate,mean_runtime_s,instances\n";
    for (const ResultRow& r : rows)
        os << r.method << ',' << r.mean_objective_km << ',' << r.success_rate << ','
           << r.mean_runtime_s << ',' << r.instances << '\n';
    return os.str();
}

std::string export_routes(const Graph& g, const std::vector<Solution>& solutions) {
    if (!g.has_coords()) throw InvalidGraphError("export_routes: graph has no coordinates");
    std::ostringstream os;
    os << "# routes " << solutions.size() << '\n';
    os << std::setprecision(17);
    for (const Solution& sol : solutions) {
        os << "ROUTE " << sol.walk.size() << '\n';
        for (int v : sol.walk)
            os << g.coords()[v].first << ' ' << g.coords()[v].second << '\n';
    }
    return os.str();
}

std::vector<std::vector<std::pair<double, double>>> parse_routes(const std::string& text) {
    std::vector<std::vector<std::pair<double, double>>> out;
    std::istringstream in(text);
    std::string line;
    int pending = 0;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("ROUTE", 0) == 0) {
            if (pending != 0) throw ParseError("routes: truncated polyline");
            pending = std::stoi(line.substr(5));
            out.emplace_back();
            continue;
        }
        if (pending == 0) throw ParseError("routes: point outside a ROUTE block");
        std::istringstream ps(line);
        double x, y;
        if (!(ps >> x >> y)) throw ParseError("routes: bad point line");
        out.back().emplace_back(x, y);
        --pending;
    }
    if (pending != 0) throw ParseError("routes: truncated polyline");
    return out;
}

} // namespace gfm
